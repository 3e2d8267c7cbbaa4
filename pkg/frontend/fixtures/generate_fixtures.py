"""Regenerate the golden fixtures consumed by the vitest suite.

Run from the repository root with the harpia package installed:

    python3 frontend/fixtures/generate_fixtures.py

The client's RLE codec and lasso preview are pinned to the server
implementation through these files; regenerate them whenever the server
conventions change.
"""

import json
from pathlib import Path

import numpy as np

from harpia.annotate import RLEMask, lasso_fill

HERE = Path(__file__).parent


def rle_golden(count: int = 100) -> list[dict]:
    rng = np.random.default_rng(20260824)
    cases = []
    for i in range(count):
        h = int(rng.integers(1, 16))
        w = int(rng.integers(1, 16))
        density = float(rng.uniform(0.05, 0.95))
        mask = rng.random((h, w)) < density
        encoded = RLEMask.encode(mask, axis="z", index=i % 7, label=1 + i % 4)
        cases.append(
            {
                "mask": encoded.to_dict(),
                "bitmap": ["".join("1" if v else "0" for v in row) for row in mask],
            }
        )
    return cases


def lasso_golden() -> list[dict]:
    polygons = [
        # rectangle with 0.5-offset corners: 12 interior pixel centers
        {"dims": (8, 8), "polygon": [(0.5, 0.5), (0.5, 4.5), (3.5, 4.5), (3.5, 0.5)]},
        # triangle
        {"dims": (12, 12), "polygon": [(1.0, 1.0), (1.0, 10.0), (10.0, 5.5)]},
        # bow-tie (self-intersecting; exercises even-odd parity)
        {"dims": (10, 14), "polygon": [(1.0, 1.0), (8.0, 12.0), (1.0, 12.0), (8.0, 1.0)]},
        # concave L-shape
        {
            "dims": (12, 12),
            "polygon": [(0.5, 0.5), (0.5, 9.5), (4.5, 9.5), (4.5, 4.5), (9.5, 4.5), (9.5, 0.5)],
        },
        # irregular pentagon with fractional vertices
        {
            "dims": (16, 16),
            "polygon": [(2.2, 1.3), (1.7, 9.8), (7.4, 13.6), (13.1, 8.2), (9.9, 2.1)],
        },
    ]
    cases = []
    for i, spec in enumerate(polygons):
        mask = lasso_fill(spec["polygon"], spec["dims"], axis="z", index=0, label=1)
        cases.append(
            {
                "polygon": [list(v) for v in spec["polygon"]],
                "width": spec["dims"][1],
                "height": spec["dims"][0],
                "mask": mask.to_dict(),
            }
        )
    return cases


def main() -> None:
    (HERE / "rle_golden.json").write_text(json.dumps(rle_golden(), indent=1))
    (HERE / "lasso_golden.json").write_text(json.dumps(lasso_golden(), indent=1))
    print("fixtures written to", HERE)


if __name__ == "__main__":
    main()
