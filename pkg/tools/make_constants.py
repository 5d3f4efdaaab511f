"""Regenerate src/clickmix/data/constants.json.

The simulation generators and initial distributions are typed in by hand.
The MSNBC-style stand-ins (17-category repeat-prone streams and four holding
time rate sets) are drawn once from a fixed seed and frozen in the file, so
changing this script means bumping CONSTANTS_VERSION.
"""

import json
from pathlib import Path

import numpy as np

CONSTANTS_VERSION = "1"
MSNBC_SEED = 20170301

SIM1_Q1 = [
    [-0.100, 0.050, 0.020, 0.020, 0.010],
    [0.100, -1.000, 0.200, 0.100, 0.600],
    [0.020, 0.050, -0.100, 0.005, 0.025],
    [0.050, 0.050, 0.050, -1.000, 0.850],
    [0.006, 0.004, 0.050, 0.040, -0.100],
]
SIM1_Q2 = [
    [-0.100, 0.001, 0.009, 0.015, 0.075],
    [0.700, -1.000, 0.200, 0.050, 0.050],
    [0.010, 0.005, -0.100, 0.030, 0.055],
    [0.400, 0.400, 0.100, -1.000, 0.100],
    [0.030, 0.030, 0.020, 0.020, -0.100],
]
SIM2_Q1 = [
    [-0.14, 0.05, 0.02, 0.02, 0.01, 0.02, 0.02],
    [0.10, -1.40, 0.20, 0.10, 0.60, 0.20, 0.20],
    [0.02, 0.05, -0.14, 0.01, 0.03, 0.02, 0.02],
    [0.05, 0.05, 0.05, -1.40, 0.80, 0.25, 0.20],
    [0.01, 0.00, 0.05, 0.04, -0.14, 0.04, 0.01],
    [0.70, 0.10, 0.10, 0.10, 0.10, -1.40, 0.30],
    [0.50, 0.50, 0.05, 0.05, 0.10, 0.20, -1.40],
]
SIM2_Q2 = [
    [-1.40, 0.40, 0.30, 0.15, 0.15, 0.25, 0.15],
    [0.02, -0.14, 0.03, 0.02, 0.03, 0.03, 0.01],
    [0.30, 0.50, -1.40, 0.10, 0.10, 0.20, 0.20],
    [0.01, 0.01, 0.01, -0.14, 0.05, 0.03, 0.03],
    [0.01, 0.01, 0.04, 0.05, -0.14, 0.02, 0.02],
    [0.70, 0.05, 0.15, 0.05, 0.15, -1.40, 0.30],
    [0.05, 0.05, 0.01, 0.01, 0.01, 0.01, -0.14],
]
SIM2_Q3 = [
    [-1.40, 0.20, 0.70, 0.20, 0.10, 0.10, 0.10],
    [0.60, -1.40, 0.20, 0.20, 0.20, 0.10, 0.10],
    [0.10, 0.10, -1.40, 0.80, 0.10, 0.10, 0.20],
    [0.05, 0.03, 0.03, -0.14, 0.01, 0.01, 0.01],
    [0.05, 0.05, 0.01, 0.01, -0.14, 0.01, 0.02],
    [1.00, 0.02, 0.03, 0.02, 0.03, -1.40, 0.30],
    [0.20, 0.20, 0.20, 0.20, 0.20, 0.40, -1.40],
]

MSNBC_CATEGORIES = [
    "frontpage", "news", "tech", "local", "opinion", "on-air", "misc", "weather",
    "msn-news", "health", "living", "business", "msn-sports", "sports", "summary",
    "bbs", "travel",
]


def msnbc_constants():
    rng = np.random.default_rng(MSNBC_SEED)
    j = len(MSNBC_CATEGORIES)
    popularity = np.sort(rng.dirichlet(np.full(j, 0.8)))[::-1]
    jump = rng.gamma(2.0, 1.0, size=(j, j)) * popularity[None, :]
    np.fill_diagonal(jump, 0.0)
    jump /= jump.sum(axis=1, keepdims=True)
    stay_bands = [(0.15, 0.25), (0.35, 0.45), (0.55, 0.65)]
    transitions = []
    for lo, hi in stay_bands:
        stay = rng.uniform(lo, hi, size=j)
        lam = (1.0 - stay)[:, None] * jump
        np.fill_diagonal(lam, stay)
        transitions.append(lam)
    mean_bands = [1.0, 5.0, 20.0, 60.0]
    rate_sets = [
        (1.0 / (m * rng.lognormal(0.0, 0.25, size=j))).tolist() for m in mean_bands
    ]
    return {
        "categories": MSNBC_CATEGORIES,
        "dwm_weights": [0.4, 0.35, 0.25],
        "dwm_initial": [popularity.tolist()] * len(stay_bands),
        "dwm_transitions": [t.tolist() for t in transitions],
        "rate_sets": rate_sets,
        "rate_set_mean_bands": mean_bands,
        "seed": MSNBC_SEED,
    }


def main():
    uniform7 = [1 / 7] * 7
    alpha2 = [0.1] * 6 + [0.4]
    alpha3 = [0.1, 0.1, 0.4, 0.1, 0.1, 0.1, 0.1]
    data = {
        "version": CONSTANTS_VERSION,
        "sim1": {
            "generators": [SIM1_Q1, SIM1_Q2],
            "weights": [0.5, 0.5],
            "initial": [[0.2] * 5, [0.2] * 5],
        },
        "sim2": {
            "generators": [SIM2_Q1, SIM2_Q2, SIM2_Q3],
            "weights": [0.2, 0.4, 0.4],
            "initial": [uniform7, alpha2, alpha3],
        },
        "msnbc": msnbc_constants(),
    }
    out = Path(__file__).resolve().parents[1] / "src" / "clickmix" / "data" / "constants.json"
    out.write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
