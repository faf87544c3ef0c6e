"""Statistical helpers shared by the test modules."""

import numpy as np
from scipy import stats


def pooled_chisquare(counts, pmf, min_expected=5.0):
    """Chi-square GOF p-value; adjacent codes are pooled until each bin expects >= ``min_expected``."""
    counts = np.asarray(counts, dtype=np.float64)
    expected = np.asarray(pmf, dtype=np.float64) * counts.sum()
    obs, exp = [], []
    o = e = 0.0
    for c, x in zip(counts, expected):
        o += c
        e += x
        if e >= min_expected:
            obs.append(o)
            exp.append(e)
            o = e = 0.0
    if e > 0 or o > 0:
        if exp:
            obs[-1] += o
            exp[-1] += e
        else:
            obs.append(o)
            exp.append(e)
    if len(exp) < 2:
        return 1.0
    exp = np.array(exp)
    exp *= np.sum(obs) / exp.sum()
    return float(stats.chisquare(obs, exp).pvalue)


def spearman(a, b) -> float:
    return float(stats.spearmanr(a, b).statistic)


# one line per acceptance criterion, printed in the pytest terminal summary
RESULTS: list = []
