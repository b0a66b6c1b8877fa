#!/usr/bin/env python3
"""Regenerates the bundled fixture datasets (deterministic)."""
import numpy as np

rng = np.random.default_rng(20240817)


def write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")


def fix150():
    # three partially overlapping blobs in four dimensions
    means = np.array([
        [0.0, 0.0, 0.0, 0.0],
        [2.2, 1.8, 0.0, -1.5],
        [-1.8, 2.0, 1.6, 1.2],
    ])
    rows = []
    for c in range(3):
        for _ in range(50):
            x = means[c] + rng.normal(0, 1.15, size=4)
            rows.append([f"{v:.6f}" for v in x] + [f"c{c}"])
    rng.shuffle(rows)
    write_csv("fix150.csv", ["f0", "f1", "f2", "f3", "label"], rows)


def fix1000():
    # ring-vs-core plus an XOR pair, two informative categoricals, two noise
    # columns; label noise keeps the floor above zero
    rows = []
    for _ in range(1000):
        xy = rng.normal(0, 1.6, size=2)
        radius = np.hypot(*xy)
        a, b = rng.normal(0, 1, size=2)
        xor_bit = (a > 0) != (b > 0)
        cat1 = rng.choice(["red", "green", "blue"])
        cat2 = rng.choice(["on", "off"])
        score = (
            1.2 * (radius > 1.9)
            + 0.9 * xor_bit
            + 0.5 * (cat1 == "red")
            + 0.35 * (cat2 == "on")
            + rng.normal(0, 0.55)
        )
        label = "pos" if score > 1.15 else "neg"
        noise = rng.normal(0, 1, size=2)
        rows.append(
            [f"{xy[0]:.6f}", f"{xy[1]:.6f}", f"{a:.6f}", f"{b:.6f}",
             f"{noise[0]:.6f}", f"{noise[1]:.6f}", cat1, cat2, label]
        )
    write_csv(
        "fix1000.csv",
        ["x", "y", "a", "b", "n0", "n1", "cat1", "cat2", "label"],
        rows,
    )


if __name__ == "__main__":
    fix150()
    fix1000()
