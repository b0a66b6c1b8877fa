#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "cash/dataset.hpp"
#include "test_util.hpp"

using namespace cash;

TEST_CASE("csv: labels map in first-appearance order", "[dataset]") {
  testutil::TempDir dir("csv");
  const auto path = testutil::write_file(dir.file("t.csv"),
                                         "x,y\n1.5,a\n2.5,b\n3.5,a\n4.5,b\n");
  const Dataset d = load_csv(path, "y", true);
  REQUIRE(d.size() == 4);
  REQUIRE(d.class_count() == 2);
  REQUIRE(d.label(0) == 0);
  REQUIRE(d.label(1) == 1);
  REQUIRE(d.label(2) == 0);
  REQUIRE(d.label(3) == 1);
  REQUIRE(d.class_name(0) == "a");
}

TEST_CASE("csv: all-numeric column becomes numeric", "[dataset]") {
  testutil::TempDir dir("csv");
  const auto path =
      testutil::write_file(dir.file("t.csv"), "x,y\n1.5,p\n2.5,q\n");
  const Dataset d = load_csv(path, "y", true);
  REQUIRE(d.attr_count() == 1);
  REQUIRE(d.attr(0).kind == AttrKind::numeric);
  REQUIRE(d.row(0)[0] == 1.5);
  REQUIRE(d.row(1)[0] == 2.5);
}

TEST_CASE("csv: mixed column becomes categorical in first-appearance order", "[dataset]") {
  testutil::TempDir dir("csv");
  const auto path =
      testutil::write_file(dir.file("t.csv"), "c,y\nred,p\nblue,q\nred,p\n");
  const Dataset d = load_csv(path, "y", true);
  REQUIRE(d.attr(0).kind == AttrKind::categorical);
  REQUIRE(d.attr(0).levels == std::vector<std::string>{"red", "blue"});
  REQUIRE(d.row(0)[0] == 0.0);
  REQUIRE(d.row(1)[0] == 1.0);
}

TEST_CASE("csv: ragged row reports its line number", "[dataset]") {
  testutil::TempDir dir("csv");
  const auto path =
      testutil::write_file(dir.file("t.csv"), "x,y\n1,a\n2,b,EXTRA\n3,a\n");
  try {
    load_csv(path, "y", true);
    FAIL("expected RaggedRow");
  } catch (const RaggedRow& e) {
    REQUIRE(e.line == 3);
  }
}

TEST_CASE("csv: empty and unusable files", "[dataset]") {
  testutil::TempDir dir("csv");
  REQUIRE_THROWS_AS(load_csv(testutil::write_file(dir.file("e.csv"), "x,y\n"), "y", true),
                    EmptyFile);
  REQUIRE_THROWS_AS(
      load_csv(testutil::write_file(dir.file("m.csv"), "x,y\n1,a\n2,b\n"), "z", true),
      MissingLabelColumn);
  REQUIRE_THROWS_AS(
      load_csv(testutil::write_file(dir.file("q.csv"), "x,y\n?,a\n2,b\n"), "y", true),
      MissingValue);
}

TEST_CASE("csv: label column by index without header", "[dataset]") {
  testutil::TempDir dir("csv");
  const auto path = testutil::write_file(dir.file("t.csv"), "1,a\n2,b\n");
  const Dataset d = load_csv(path, "1", false);
  REQUIRE(d.class_count() == 2);
  REQUIRE(d.attr_count() == 1);
}

TEST_CASE("csv: quoted fields with embedded commas", "[dataset]") {
  testutil::TempDir dir("csv");
  const auto path = testutil::write_file(dir.file("t.csv"),
                                         "c,y\n\"a,1\",p\n\"b\"\"2\",q\n");
  const Dataset d = load_csv(path, "y", true);
  REQUIRE(d.attr(0).levels == std::vector<std::string>{"a,1", "b\"2"});
}

TEST_CASE("arff: nominal levels follow declaration order", "[dataset]") {
  testutil::TempDir dir("arff");
  const auto path = testutil::write_file(dir.file("t.arff"),
                                         "@relation t\n"
                                         "@attribute a numeric\n"
                                         "@attribute c {x,y}\n"
                                         "@data\n"
                                         "1,x\n2,y\n");
  const Dataset d = load_arff(path);
  REQUIRE(d.size() == 2);
  REQUIRE(d.label(0) == 0);
  REQUIRE(d.label(1) == 1);
  REQUIRE(d.class_names() == std::vector<std::string>{"x", "y"});
}

TEST_CASE("arff: string attributes rejected", "[dataset]") {
  testutil::TempDir dir("arff");
  const auto path = testutil::write_file(dir.file("t.arff"),
                                         "@relation t\n"
                                         "@attribute s string\n"
                                         "@attribute c {p,n}\n"
                                         "@data\nfoo,p\n");
  REQUIRE_THROWS_AS(load_arff(path), UnsupportedAttributeType);
}

TEST_CASE("arff: a mid-list class attribute is the label", "[dataset]") {
  testutil::TempDir dir("arff");
  const auto path = testutil::write_file(dir.file("t.arff"),
                                         "@relation t\n"
                                         "@attribute a numeric\n"
                                         "@attribute class {p,n}\n"
                                         "@attribute b numeric\n"
                                         "@data\n"
                                         "1,p,10\n2,n,20\n");
  const Dataset d = load_arff(path);
  REQUIRE(d.attr_count() == 2);
  REQUIRE(d.attr(0).name == "a");
  REQUIRE(d.attr(1).name == "b");
  REQUIRE(d.label(0) == 0);
  REQUIRE(d.label(1) == 1);
  REQUIRE(d.row(0)[1] == 10.0);
}

TEST_CASE("arff: parse errors carry line numbers", "[dataset]") {
  testutil::TempDir dir("arff");
  const auto path = testutil::write_file(dir.file("t.arff"),
                                         "@relation t\n"
                                         "@attribute a numeric\n"
                                         "@attribute c {x,y}\n"
                                         "@data\n"
                                         "1,x\nbad_value,z\n");
  try {
    load_arff(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 6);
  }
}

TEST_CASE("split: stratified 70/30 on 10 instances", "[dataset]") {
  auto data = testutil::make_blobs(10, 2, 2, 42);
  const auto [train, test] = split_train_test(data, 0.3, 7);
  REQUIRE(train.size() == 7);
  REQUIRE(test.size() == 3);
  for (const Dataset* part : {&train, &test}) {
    const auto hist = part->class_histogram();
    REQUIRE(hist[0] >= 1);
    REQUIRE(hist[1] >= 1);
  }
}

TEST_CASE("split: deterministic given the seed", "[dataset]") {
  auto data = testutil::make_blobs(30, 3, 3, 1);
  const auto [a_train, a_test] = split_train_test(data, 0.3, 99);
  const auto [b_train, b_test] = split_train_test(data, 0.3, 99);
  REQUIRE(a_test.size() == b_test.size());
  for (std::size_t i = 0; i < a_test.size(); ++i) {
    REQUIRE(a_test.row(i) == b_test.row(i));
    REQUIRE(a_test.label(i) == b_test.label(i));
  }
}

TEST_CASE("split: 100 instances at 0.3 gives 70/30", "[dataset]") {
  auto data = testutil::make_blobs(100, 2, 2, 5);
  const auto [train, test] = split_train_test(data, 0.3, 11);
  REQUIRE(train.size() == 70);
  REQUIRE(test.size() == 30);
}

TEST_CASE("folds: equal partition when k divides n", "[dataset]") {
  auto data = testutil::make_blobs(10, 2, 2, 3);
  const FoldPlan plan = stratified_folds(data, 5, 17);
  for (int f = 0; f < 5; ++f) REQUIRE(plan.fold_members(f).size() == 2);
}

TEST_CASE("folds: sizes differ by at most one", "[dataset]") {
  auto data = testutil::make_blobs(11, 2, 2, 3);
  const FoldPlan plan = stratified_folds(data, 5, 17);
  std::vector<std::size_t> sizes;
  for (int f = 0; f < 5; ++f) sizes.push_back(plan.fold_members(f).size());
  std::sort(sizes.begin(), sizes.end());
  REQUIRE(sizes == std::vector<std::size_t>{2, 2, 2, 2, 3});
}

TEST_CASE("folds: per-class stratification", "[dataset]") {
  // 6 of class 0, 4 of class 1, k = 2: each fold holds 3 + 2.
  std::vector<AttrMeta> meta{{"x", AttrKind::numeric, {}}};
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({static_cast<double>(i)});
    labels.push_back(i < 6 ? 0 : 1);
  }
  const Dataset data("d", meta, {"a", "b"}, rows, labels);
  const FoldPlan plan = stratified_folds(data, 2, 23);
  for (int f = 0; f < 2; ++f) {
    int c0 = 0, c1 = 0;
    for (std::size_t i : plan.fold_members(f)) (data.label(i) == 0 ? c0 : c1)++;
    REQUIRE(c0 == 3);
    REQUIRE(c1 == 2);
  }
}

TEST_CASE("folds: k larger than n rejected", "[dataset]") {
  auto data = testutil::make_blobs(4, 2, 2, 3);
  REQUIRE_THROWS_AS(stratified_folds(data, 5, 1), KTooLarge);
  REQUIRE_THROWS_AS(stratified_folds(data, 1, 1), ConfigError);
}

TEST_CASE("split: degenerate fractions rejected", "[dataset]") {
  auto data = testutil::make_blobs(10, 2, 2, 3);
  REQUIRE_THROWS_AS(split_train_test(data, 0.01, 1), TooFewInstances);  // empty test side
  auto two = testutil::make_blobs(2, 2, 2, 3);
  REQUIRE_THROWS_AS(split_train_test(two, 0.9, 1), TooFewInstances);
}

TEST_CASE("folds: deterministic and stratification holds across seeds", "[dataset]") {
  auto data = testutil::make_blobs(53, 3, 3, 9);
  for (std::uint64_t seed : {1ull, 2ull, 77ull}) {
    const FoldPlan a = stratified_folds(data, 7, seed);
    const FoldPlan b = stratified_folds(data, 7, seed);
    REQUIRE(a.fold_of == b.fold_of);
    // fold sizes within 1
    std::vector<int> sizes(7, 0);
    for (int f : a.fold_of) ++sizes[f];
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    REQUIRE(*hi - *lo <= 1);
    // per-class counts within 1
    for (int c = 0; c < 3; ++c) {
      std::vector<int> per(7, 0);
      for (std::size_t i = 0; i < data.size(); ++i)
        if (data.label(i) == c) ++per[a.fold_of[i]];
      const auto [plo, phi] = std::minmax_element(per.begin(), per.end());
      REQUIRE(*phi - *plo <= 1);
    }
  }
}

TEST_CASE("folds: training sides cover every instance k-1 times", "[dataset]") {
  auto data = testutil::make_blobs(23, 2, 2, 4);
  const int k = 5;
  const FoldPlan plan = stratified_folds(data, k, 31);
  std::vector<int> covered(data.size(), 0);
  for (int f = 0; f < k; ++f)
    for (std::size_t i : plan.train_members(f)) ++covered[i];
  for (int c : covered) REQUIRE(c == k - 1);
}

TEST_CASE("round-trip: csv write + reload preserves labels and numerics bitwise",
          "[dataset]") {
  Rng rng(2024);
  std::vector<AttrMeta> meta{{"x", AttrKind::numeric, {}},
                             {"c", AttrKind::categorical, {"lo", "hi", "mid"}},
                             {"z", AttrKind::numeric, {}}};
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    rows.push_back({rng.normal() * std::exp(rng.uniform(-8.0, 8.0)),
                    static_cast<double>(rng.index(3)), rng.uniform01()});
    labels.push_back(static_cast<int>(rng.index(2)));
  }
  const Dataset source("rt", meta, {"neg", "pos"}, rows, labels);

  testutil::TempDir dir("roundtrip");
  save_csv(source, dir.file("rt0.csv"));
  const Dataset original = load_csv(dir.file("rt0.csv"), "class", true);
  save_csv(original, dir.file("rt1.csv"));
  const Dataset reloaded = load_csv(dir.file("rt1.csv"), "class", true);

  REQUIRE(reloaded.size() == original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    REQUIRE(reloaded.label(i) == original.label(i));
    REQUIRE(reloaded.class_name(reloaded.label(i)) == source.class_name(source.label(i)));
    REQUIRE(reloaded.row(i)[0] == original.row(i)[0]);  // bitwise
    REQUIRE(reloaded.row(i)[0] == source.row(i)[0]);
    REQUIRE(reloaded.row(i)[2] == source.row(i)[2]);
    REQUIRE(reloaded.attr(1).levels[static_cast<std::size_t>(reloaded.row(i)[1])] ==
            source.attr(1).levels[static_cast<std::size_t>(source.row(i)[1])]);
  }
}
