"""
One-tailed Wilcoxon signed-rank test.

Zero differences are discarded and tied magnitudes get average ranks. Up to
EXACT_LIMIT nonzero differences the p-value comes from the exact null
distribution of W+; above it a normal approximation with tie-corrected
variance and a 0.5 continuity correction is used.
"""
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.stats import norm, rankdata

from headcast.src.utils.exception import EXIT_DEGENERATE_STATISTICS, HeadcastException, invalid_argument

EXACT_LIMIT = 20
ENUMERATION_CHUNK = 1 << 16
ALTERNATIVES = ("greater", "less")


class WilcoxonResult(BaseModel):
    statistic: float
    p_one_tailed: float
    n_effective: int
    method: Literal["exact", "normal-approx", "degenerate"]


def degenerate_result() -> WilcoxonResult:
    """Result reported when every difference is zero."""
    return WilcoxonResult(statistic=0.0, p_one_tailed=1.0, n_effective=0, method="degenerate")


def _signed_ranks(diffs, alternative: str) -> Tuple[np.ndarray, np.ndarray]:
    if alternative not in ALTERNATIVES:
        raise invalid_argument(f"alternative must be one of {ALTERNATIVES}.", alternative=alternative)
    values = np.asarray(diffs, dtype=float).ravel()
    if not np.all(np.isfinite(values)):
        raise invalid_argument("Differences must be finite.")
    nonzero = values[values != 0.0]
    if nonzero.size == 0:
        raise HeadcastException(
            error=ValueError("All paired differences are zero."),
            error_type="DegenerateSample",
            context={"n": int(values.size)},
            exit_code=EXIT_DEGENERATE_STATISTICS,
        )
    return nonzero, rankdata(np.abs(nonzero))


def _exact_p(ranks: np.ndarray, w_plus: float, alternative: str) -> float:
    # average ranks are multiples of 1/2, so 2*W+ lives on the integers
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    counts = np.zeros(int(doubled.sum()) + 1, dtype=np.int64)
    counts[0] = 1
    for rank in doubled:
        shifted = np.zeros_like(counts)
        shifted[rank:] = counts[:counts.size - rank]
        counts = counts + shifted
    observed = int(np.rint(2.0 * w_plus))
    tail = counts[observed:].sum() if alternative == "greater" else counts[:observed + 1].sum()
    return float(tail) / float(2 ** ranks.size)


def _normal_p(ranks: np.ndarray, w_plus: float, alternative: str) -> float:
    n = ranks.size
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(ranks, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48.0
    sd = np.sqrt(variance)
    if alternative == "greater":
        p = norm.sf((w_plus - mean - 0.5) / sd)
    else:
        p = norm.cdf((w_plus - mean + 0.5) / sd)
    return float(min(1.0, max(0.0, p)))


def wilcoxon_one_tailed(diffs, alternative: str = "greater") -> WilcoxonResult:
    """
    Tests whether paired differences tend to be positive ("greater") or negative ("less").

    Args:
        diffs: Paired differences, e.g. err_baseline - err_proposed.
        alternative (str): "greater" gives P(W+ >= observed), "less" gives P(W+ <= observed).

    Returns:
        WilcoxonResult: W+, the one-tailed p-value, the number of nonzero differences and the method.

    Raises:
        HeadcastException: DegenerateSample when every difference is zero.
    """
    nonzero, ranks = _signed_ranks(diffs, alternative)
    w_plus = float(ranks[nonzero > 0].sum())
    if ranks.size <= EXACT_LIMIT:
        return WilcoxonResult(statistic=w_plus, p_one_tailed=_exact_p(ranks, w_plus, alternative),
                              n_effective=int(ranks.size), method="exact")
    return WilcoxonResult(statistic=w_plus, p_one_tailed=_normal_p(ranks, w_plus, alternative),
                          n_effective=int(ranks.size), method="normal-approx")


def exact_wilcoxon_oracle(diffs, alternative: str = "greater") -> float:
    """
    Tail probability of W+ by enumerating all 2**n sign assignments.

    Raises:
        HeadcastException: SampleTooLarge for more than EXACT_LIMIT nonzero differences.
    """
    nonzero, ranks = _signed_ranks(diffs, alternative)
    n = ranks.size
    if n > EXACT_LIMIT:
        raise HeadcastException(
            error=ValueError(f"Enumeration refused for n={n} > {EXACT_LIMIT}."),
            error_type="SampleTooLarge",
            context={"n_effective": int(n)},
        )
    observed = float(ranks[nonzero > 0].sum())
    bits = np.arange(n, dtype=np.int64)
    hits = 0
    total = 1 << n
    for start in range(0, total, ENUMERATION_CHUNK):
        masks = np.arange(start, min(start + ENUMERATION_CHUNK, total), dtype=np.int64)
        signs = (masks[:, None] >> bits) & 1
        sums = signs @ ranks
        if alternative == "greater":
            hits += int(np.count_nonzero(sums >= observed - 1e-9))
        else:
            hits += int(np.count_nonzero(sums <= observed + 1e-9))
    return float(hits) / float(total)


def normal_approx_p(diffs, alternative: str = "greater") -> float:
    """The large-sample p-value, available at any n for comparison with the exact path."""
    nonzero, ranks = _signed_ranks(diffs, alternative)
    return _normal_p(ranks, float(ranks[nonzero > 0].sum()), alternative)
