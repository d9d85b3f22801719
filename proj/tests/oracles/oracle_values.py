"""Freezes reference values computed independently of the C++ code.

Run from the repo root; writes tests/data/oracle_values.json.
"""
import itertools
import json
import pathlib

import numpy as np
from scipy import stats

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "oracle_values.json"


def alpha_nominal(units):
    """Krippendorff's alpha from pairable values, no coincidence matrix."""
    values = [[v for v in u if v is not None] for u in units]
    values = [v for v in values if len(v) >= 2]
    n = sum(len(v) for v in values)
    do = 0.0
    for v in values:
        m = len(v)
        mismatches = sum(1 for a, b in itertools.permutations(range(m), 2) if v[a] != v[b])
        do += mismatches / (m - 1)
    do /= n
    freq = {}
    for v in values:
        for x in v:
            freq[x] = freq.get(x, 0) + 1
    de = sum(freq[a] * freq[b] for a in freq for b in freq if a != b) / (n * (n - 1))
    return 1.0 - do / de


# Reliability data with four coders and missing values (units in columns).
KRIPP_CODERS = [
    [1, 2, 3, 3, 2, 1, 4, 1, 2, None, None, None],
    [1, 2, 3, 3, 2, 2, 4, 1, 2, 5, None, 3],
    [None, 3, 3, 3, 2, 3, 4, 2, 2, 5, 1, None],
    [1, 2, 3, 3, 2, 4, 4, 1, 2, 5, 1, None],
]


def payoff(a, z, strategies, x, i):
    u = []
    for h, gh in enumerate(strategies[i]):
        total = 0.0
        for j in range(len(strategies)):
            if j == i:
                continue
            total += a[i][j] * sum(z[gh][gs] * x[j][s] for s, gs in enumerate(strategies[j]))
        u.append(x[i][h] * total)
    return u


def main():
    units = [list(u) for u in zip(*KRIPP_CODERS)]
    kripp = alpha_nominal(units)

    rng = np.random.default_rng(8)
    pop = rng.integers(0, 5000, size=40).astype(float)
    pop[:6] = pop[6:12]  # ties in x
    correct = (rng.random(40) < 0.6).astype(float)
    rho, p = stats.spearmanr(pop, correct)

    # Three players, global strategies 0..4.
    strategies = [[0, 1], [2], [3, 4]]
    a = [[0.0, 0.8, 0.3], [0.8, 0.0, 0.5], [0.3, 0.5, 0.0]]
    z = [[1.0, 0.2, 0.9, 0.4, 0.1],
         [0.2, 1.0, 0.3, 0.6, 0.5],
         [0.9, 0.3, 1.0, 0.7, 0.2],
         [0.4, 0.6, 0.7, 1.0, 0.0],
         [0.1, 0.5, 0.2, 0.0, 1.0]]
    x = [[0.25, 0.75], [1.0], [0.6, 0.4]]
    game_payoffs = [payoff(a, z, strategies, x, i) for i in range(3)]

    out = {
        "krippendorff": {"coders": KRIPP_CODERS, "alpha": kripp},
        "spearman": {"x": pop.tolist(), "y": correct.tolist(), "rho": float(rho), "p_value": float(p)},
        "game": {"strategies": strategies, "a": a, "z": z, "x": x, "payoffs": game_payoffs},
        "levenshtein_marlborough": 1.0 - 1.0 / 17.0,
    }
    OUT.write_text(json.dumps(out, indent=2) + "\n")
    print(f"alpha={kripp:.6f} rho={rho:.6f} p={p:.6g}")


if __name__ == "__main__":
    main()
