#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cash/errors.hpp"
#include "cash/random.hpp"

namespace cash {

enum class AttrKind { numeric, categorical };

struct AttrMeta {
  std::string name;
  AttrKind kind = AttrKind::numeric;
  std::vector<std::string> levels;  // categorical only
  std::size_t level_count() const { return levels.size(); }
};

// Immutable labeled dataset. Feature cells are doubles: raw values for
// numeric attributes, level indices for categorical ones.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string name, std::vector<AttrMeta> attrs, std::vector<std::string> classes,
          std::vector<std::vector<double>> rows, std::vector<int> labels,
          std::string label_name = "class")
      : name_(std::move(name)),
        label_name_(std::move(label_name)),
        attrs_(std::move(attrs)),
        classes_(std::move(classes)),
        rows_(std::move(rows)),
        labels_(std::move(labels)) {
    if (rows_.size() != labels_.size())
      throw DataError("row count does not match label count");
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      if (rows_[i].size() != attrs_.size()) throw DataError("row arity mismatch");
      if (labels_[i] < 0 || labels_[i] >= static_cast<int>(classes_.size()))
        throw DataError("class index out of range");
      for (std::size_t j = 0; j < attrs_.size(); ++j) {
        if (attrs_[j].kind == AttrKind::categorical) {
          const double v = rows_[i][j];
          if (v < 0 || v >= static_cast<double>(attrs_[j].level_count()) ||
              v != static_cast<double>(static_cast<std::int64_t>(v)))
            throw DataError("categorical value out of range in attribute " + attrs_[j].name);
        }
      }
    }
  }

  std::size_t size() const { return rows_.size(); }
  std::size_t attr_count() const { return attrs_.size(); }
  int class_count() const { return static_cast<int>(classes_.size()); }
  const std::vector<double>& row(std::size_t i) const { return rows_[i]; }
  int label(std::size_t i) const { return labels_[i]; }
  const AttrMeta& attr(std::size_t j) const { return attrs_[j]; }
  const std::vector<AttrMeta>& attrs() const { return attrs_; }
  const std::string& class_name(int c) const { return classes_[static_cast<std::size_t>(c)]; }
  const std::vector<std::string>& class_names() const { return classes_; }
  const std::string& name() const { return name_; }
  const std::string& label_name() const { return label_name_; }

  std::vector<int> class_histogram() const {
    std::vector<int> h(classes_.size(), 0);
    for (int y : labels_) ++h[static_cast<std::size_t>(y)];
    return h;
  }

  int distinct_class_count() const {
    int n = 0;
    for (int c : class_histogram())
      if (c > 0) ++n;
    return n;
  }

  // Row subset; retains the full attribute and class census.
  Dataset subset(std::span<const std::size_t> idx, const std::string& suffix = "") const {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    rows.reserve(idx.size());
    labels.reserve(idx.size());
    for (std::size_t i : idx) {
      rows.push_back(rows_[i]);
      labels.push_back(labels_[i]);
    }
    return Dataset(name_ + suffix, attrs_, classes_, std::move(rows), std::move(labels),
                   label_name_);
  }

 private:
  std::string name_;
  std::string label_name_ = "class";
  std::vector<AttrMeta> attrs_;
  std::vector<std::string> classes_;
  std::vector<std::vector<double>> rows_;
  std::vector<int> labels_;
};

// k-fold partition: fold_of[i] is the fold that holds instance i as
// validation data.
struct FoldPlan {
  int k = 0;
  std::vector<int> fold_of;

  std::vector<std::size_t> fold_members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] != fold) out.push_back(i);
    return out;
  }
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

// Splits one line into comma-separated fields with double-quote escaping.
// Embedded newlines inside quotes are not supported.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError(line_no, "unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

struct LevelTable {
  std::vector<std::string> order;
  std::map<std::string, int> index;
  int intern(const std::string& s) {
    auto it = index.find(s);
    if (it != index.end()) return it->second;
    const int id = static_cast<int>(order.size());
    order.push_back(s);
    index.emplace(s, id);
    return id;
  }
};

}  // namespace detail

// Loads an RFC-4180-style CSV file. Columns whose every value parses as a
// finite decimal number become numeric; the rest become categorical with
// levels in first-appearance order. Labels map to 0-based indices in
// first-appearance order. `label_column` is a header name, or a 0-based
// column index when there is no header (or no header entry matches).
inline Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        bool has_header) {
  const auto lines = detail::read_lines(path);

  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> line_nos;
  std::size_t arity = 0;
  bool first = true;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    auto fields = detail::split_csv_line(lines[li], li + 1);
    if (first && has_header) {
      header = std::move(fields);
      arity = header.size();
      first = false;
      continue;
    }
    if (first) {
      arity = fields.size();
      first = false;
    } else if (fields.size() != arity) {
      throw RaggedRow(li + 1);
    }
    cells.push_back(std::move(fields));
    line_nos.push_back(li + 1);
  }
  if (cells.empty()) throw EmptyFile(path.string());

  // Resolve the label column: header name first, then numeric index.
  std::size_t label_idx = arity;
  if (has_header) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == label_column) label_idx = j;
  }
  if (label_idx == arity) {
    int idx = -1;
    auto [p, ec] = std::from_chars(label_column.data(), label_column.data() + label_column.size(),
                                   idx);
    if (ec == std::errc{} && p == label_column.data() + label_column.size() && idx >= 0 &&
        static_cast<std::size_t>(idx) < arity) {
      label_idx = static_cast<std::size_t>(idx);
    } else {
      throw MissingLabelColumn(label_column);
    }
  }

  std::vector<std::size_t> feature_cols;
  for (std::size_t j = 0; j < arity; ++j)
    if (j != label_idx) feature_cols.push_back(j);

  // Column type detection.
  std::vector<bool> numeric(feature_cols.size(), true);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const std::string& v = cells[r][feature_cols[f]];
      if (v == "?") throw MissingValue(line_nos[r]);
      double d;
      if (!detail::parse_double(v, d)) numeric[f] = false;
    }
    if (cells[r][label_idx] == "?") throw MissingValue(line_nos[r]);
  }

  std::vector<AttrMeta> attrs(feature_cols.size());
  std::vector<detail::LevelTable> levels(feature_cols.size());
  for (std::size_t f = 0; f < feature_cols.size(); ++f) {
    attrs[f].name = has_header ? header[feature_cols[f]]
                               : "attr" + std::to_string(feature_cols[f]);
    attrs[f].kind = numeric[f] ? AttrKind::numeric : AttrKind::categorical;
  }

  detail::LevelTable classes;
  std::vector<std::vector<double>> rows(cells.size(), std::vector<double>(feature_cols.size()));
  std::vector<int> labels(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const std::string& v = cells[r][feature_cols[f]];
      if (numeric[f]) {
        double d;
        detail::parse_double(v, d);
        rows[r][f] = d;
      } else {
        rows[r][f] = levels[f].intern(v);
      }
    }
    labels[r] = classes.intern(cells[r][label_idx]);
  }
  for (std::size_t f = 0; f < feature_cols.size(); ++f) attrs[f].levels = levels[f].order;

  if (classes.order.size() < 2)
    throw DataError("dataset needs at least 2 distinct classes, found " +
                    std::to_string(classes.order.size()));

  return Dataset(path.stem().string(), std::move(attrs), std::move(classes.order),
                 std::move(rows), std::move(labels),
                 has_header ? header[label_idx] : "class");
}

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string unquote(std::string s) {
  if (s.size() >= 2 && ((s.front() == '\'' && s.back() == '\'') ||
                        (s.front() == '"' && s.back() == '"')))
    return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace detail

// Loads the ARFF subset: @relation, numeric and nominal @attribute lines,
// and a dense @data section. The attribute named "class" is the label; when
// absent the last attribute is used. Nominal level order follows the
// declaration.
inline Dataset load_arff(const std::filesystem::path& path) {
  const auto lines = detail::read_lines(path);

  std::string relation = path.stem().string();
  std::vector<AttrMeta> decl;          // all declared attributes, in order
  std::vector<bool> decl_nominal;
  std::size_t data_start = lines.size();
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string t = detail::trim(lines[li]);
    if (t.empty() || t[0] == '%') continue;
    const std::string low = detail::lower(t);
    if (low.rfind("@relation", 0) == 0) {
      relation = detail::unquote(detail::trim(t.substr(9)));
    } else if (low.rfind("@attribute", 0) == 0) {
      std::string rest = detail::trim(t.substr(10));
      // name may be quoted; type is everything after the name token
      std::string name, type;
      if (!rest.empty() && (rest[0] == '\'' || rest[0] == '"')) {
        const char q = rest[0];
        const auto close = rest.find(q, 1);
        if (close == std::string::npos) throw ParseError(li + 1, "unterminated attribute name");
        name = rest.substr(1, close - 1);
        type = detail::trim(rest.substr(close + 1));
      } else {
        const auto sp = rest.find_first_of(" \t");
        if (sp == std::string::npos) throw ParseError(li + 1, "attribute without type");
        name = rest.substr(0, sp);
        type = detail::trim(rest.substr(sp));
      }
      AttrMeta m;
      m.name = name;
      if (!type.empty() && type[0] == '{') {
        if (type.back() != '}') throw ParseError(li + 1, "unterminated nominal specification");
        m.kind = AttrKind::categorical;
        std::stringstream ss(type.substr(1, type.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
          m.levels.push_back(detail::unquote(detail::trim(item)));
        }
        if (m.levels.empty()) throw ParseError(li + 1, "empty nominal specification");
        decl_nominal.push_back(true);
      } else {
        const std::string tl = detail::lower(type);
        if (tl == "numeric" || tl == "real" || tl == "integer") {
          m.kind = AttrKind::numeric;
          decl_nominal.push_back(false);
        } else {
          throw UnsupportedAttributeType(type);
        }
      }
      decl.push_back(std::move(m));
    } else if (low.rfind("@data", 0) == 0) {
      data_start = li + 1;
      break;
    }
  }
  if (decl.empty()) throw ParseError(1, "no attribute declarations");
  if (data_start >= lines.size()) throw EmptyFile(path.string());

  // Label attribute: "class" by name, else the last declaration.
  std::size_t label_idx = decl.size() - 1;
  for (std::size_t j = 0; j < decl.size(); ++j)
    if (detail::lower(decl[j].name) == "class") label_idx = j;

  std::vector<std::size_t> feature_cols;
  for (std::size_t j = 0; j < decl.size(); ++j)
    if (j != label_idx) feature_cols.push_back(j);

  std::vector<AttrMeta> attrs;
  for (std::size_t f : feature_cols) attrs.push_back(decl[f]);

  std::vector<std::string> classes;
  detail::LevelTable class_table;
  const bool nominal_label = decl_nominal[label_idx];
  if (nominal_label) classes = decl[label_idx].levels;

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (std::size_t li = data_start; li < lines.size(); ++li) {
    const std::string t = detail::trim(lines[li]);
    if (t.empty() || t[0] == '%') continue;
    if (t[0] == '{') throw ParseError(li + 1, "sparse data rows are not supported");
    auto fields = detail::split_csv_line(t, li + 1);
    if (fields.size() != decl.size())
      throw ParseError(li + 1, "expected " + std::to_string(decl.size()) + " values, got " +
                                   std::to_string(fields.size()));
    std::vector<double> row(feature_cols.size());
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      std::string v = detail::unquote(detail::trim(fields[feature_cols[f]]));
      if (v == "?") throw MissingValue(li + 1);
      const AttrMeta& m = attrs[f];
      if (m.kind == AttrKind::numeric) {
        double d;
        if (!detail::parse_double(v, d))
          throw ParseError(li + 1, "bad numeric value '" + v + "'");
        row[f] = d;
      } else {
        const auto it = std::find(m.levels.begin(), m.levels.end(), v);
        if (it == m.levels.end())
          throw ParseError(li + 1, "undeclared nominal value '" + v + "'");
        row[f] = static_cast<double>(it - m.levels.begin());
      }
    }
    std::string lv = detail::unquote(detail::trim(fields[label_idx]));
    if (lv == "?") throw MissingValue(li + 1);
    if (nominal_label) {
      const auto it = std::find(classes.begin(), classes.end(), lv);
      if (it == classes.end()) throw ParseError(li + 1, "undeclared class value '" + lv + "'");
      labels.push_back(static_cast<int>(it - classes.begin()));
    } else {
      labels.push_back(class_table.intern(lv));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyFile(path.string());
  if (!nominal_label) classes = class_table.order;

  // Nominal labels may declare levels never seen in the data; that is fine,
  // but a single-class dataset is not.
  int seen = 0;
  {
    std::vector<bool> hit(classes.size(), false);
    for (int y : labels) hit[static_cast<std::size_t>(y)] = true;
    for (bool b : hit) seen += b ? 1 : 0;
  }
  if (seen < 2)
    throw DataError("dataset needs at least 2 distinct classes, found " + std::to_string(seen));

  return Dataset(relation, std::move(attrs), std::move(classes), std::move(rows),
                 std::move(labels), decl[label_idx].name);
}

// Writes a Dataset back out as headered CSV. Numeric cells use the shortest
// round-tripping decimal form, so reloading reproduces them bitwise.
inline void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += "\"\"";
      else q.push_back(c);
    }
    q.push_back('"');
    return q;
  };
  for (std::size_t j = 0; j < data.attr_count(); ++j) out << quote(data.attr(j).name) << ',';
  out << quote(data.label_name()) << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.attr_count(); ++j) {
      const double v = data.row(i)[j];
      if (data.attr(j).kind == AttrKind::numeric) {
        out << detail::format_double(v);
      } else {
        out << quote(data.attr(j).levels[static_cast<std::size_t>(v)]);
      }
      out << ',';
    }
    out << quote(data.class_name(data.label(i))) << '\n';
  }
}

namespace detail {

// Largest-remainder allocation of `target` test instances across classes,
// repaired so every class with >= 2 members keeps at least one instance on
// each side where the target allows it.
inline std::vector<std::size_t> allocate_stratified(const std::vector<int>& class_counts,
                                                    double fraction, std::size_t target) {
  const std::size_t nc = class_counts.size();
  std::vector<std::size_t> take(nc, 0);
  std::vector<double> remainder(nc, 0.0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    const double exact = fraction * class_counts[c];
    take[c] = static_cast<std::size_t>(exact);
    remainder[c] = exact - static_cast<double>(take[c]);
    assigned += take[c];
  }
  std::vector<std::size_t> order(nc);
  for (std::size_t c = 0; c < nc; ++c) order[c] = c;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    if (class_counts[a] != class_counts[b]) return class_counts[a] > class_counts[b];
    return a < b;
  });
  for (std::size_t i = 0; assigned < target && i < nc; ++i) {
    const std::size_t c = order[i];
    if (take[c] < static_cast<std::size_t>(class_counts[c])) {
      ++take[c];
      ++assigned;
    }
  }
  // Keep both sides populated per class where possible.
  for (std::size_t c = 0; c < nc; ++c) {
    const auto n = static_cast<std::size_t>(class_counts[c]);
    if (n >= 2) {
      if (take[c] == 0) take[c] = 1;
      if (take[c] == n) take[c] = n - 1;
    }
  }
  return take;
}

}  // namespace detail

// Stratified train/test split, deterministic in `seed`. The second element
// of the pair is the test set.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double test_fraction,
                                                    std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw ConfigError("test fraction must lie in (0,1)");
  const std::size_t n = data.size();
  const auto target = static_cast<std::size_t>(std::llround(test_fraction * n));
  if (target < 1 || target >= n)
    throw TooFewInstances("cannot split " + std::to_string(n) + " instances at fraction " +
                          std::to_string(test_fraction));

  std::vector<std::vector<std::size_t>> by_class(data.class_names().size());
  for (std::size_t i = 0; i < n; ++i)
    by_class[static_cast<std::size_t>(data.label(i))].push_back(i);
  const auto take = detail::allocate_stratified(data.class_histogram(), test_fraction, target);

  std::vector<std::size_t> test_idx, train_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto members = by_class[c];
    Rng rng(mix_seed(seed, 0x5117 + c));
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i < take[c]) test_idx.push_back(members[i]);
      else train_idx.push_back(members[i]);
    }
  }
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return {data.subset(train_idx, "-train"), data.subset(test_idx, "-test")};
}

// Stratified k folds via per-class round-robin with a continuing fold
// pointer, after a seeded within-class shuffle. Guarantees fold sizes and
// per-class fold counts each differ by at most one.
inline FoldPlan stratified_folds(const Dataset& data, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  if (static_cast<std::size_t>(k) > data.size()) throw KTooLarge(k, data.size());

  FoldPlan plan;
  plan.k = k;
  plan.fold_of.assign(data.size(), -1);

  std::vector<std::vector<std::size_t>> by_class(data.class_names().size());
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[static_cast<std::size_t>(data.label(i))].push_back(i);

  Rng start_rng(mix_seed(seed, 0xf01d));
  std::size_t pointer = start_rng.index(static_cast<std::size_t>(k));
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto members = by_class[c];
    Rng rng(mix_seed(seed, 0xc1a5 + c));
    rng.shuffle(members);
    for (std::size_t i : members) {
      plan.fold_of[i] = static_cast<int>(pointer % static_cast<std::size_t>(k));
      ++pointer;
    }
  }
  return plan;
}

}  // namespace cash
