"""Regenerate the bundled synthetic CSV pair.

The two files form an exact covariate-shift pair: every (cell, group) keeps
the same dyadic positive fraction while the target's cell counts tilt the
feature marginals, in opposite directions for the two groups. Counts are
multiples of 4 so all empirical conditionals are exactly representable.
"""

import csv
import pathlib

CELLS = [(i, j) for i in range(4) for j in range(4)]
GROUPS = ("a", "b")
OUT = pathlib.Path(__file__).resolve().parent.parent / "src" / "fairshift" / "data"


def qual(i: int, j: int, group: str) -> float:
    s = i + j
    if s <= 2:
        return 0.25
    if s <= 4:
        return 0.5
    return 0.75


def source_count(i: int, j: int, group: str) -> int:
    return 16


def target_count(i: int, j: int, group: str) -> int:
    lean = i if group == "a" else 3 - i
    return 4 * (1 + lean) + (4 if j >= 2 else 0)


def write(path: pathlib.Path, count_fn) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["f1", "f2", "label", "group"])
        for group in GROUPS:
            for i, j in CELLS:
                n = count_fn(i, j, group)
                pos = int(qual(i, j, group) * n)
                assert qual(i, j, group) * n == pos, "counts must keep q exact"
                f1, f2 = i + 0.5, j + 0.5
                for _ in range(n - pos):
                    writer.writerow([f1, f2, 0, group])
                for _ in range(pos):
                    writer.writerow([f1, f2, 1, group])


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    write(OUT / "synthetic_source.csv", source_count)
    write(OUT / "synthetic_target.csv", target_count)
    print("wrote", OUT / "synthetic_source.csv")
    print("wrote", OUT / "synthetic_target.csv")


if __name__ == "__main__":
    main()
