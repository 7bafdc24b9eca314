"""Scalar special functions behind the Mexican needlet frame.

The frame is built from the weight w_s(x) = x^s e^{-x} applied to the squared
scale-ratios (B^{-j} k)^2 of the circular Laplacian spectrum.  This module
provides the weight itself, its Calderon normalisation e_s = Gamma(2s)/2^{2s},
the frame constant Lambda_{B,s} = e_s / (2 log B), incomplete gamma functions,
partial Calderon sums with their closed-form approximations, and the tail
bound that controls frequency truncation of an atom.

Everything here is pure and scalar (weight accepts numpy arrays as well);
no state is shared between calls.
"""

from __future__ import annotations

import math
from typing import Literal, NamedTuple

import numpy as np

__all__ = [
    "weight",
    "calderon_constant",
    "lambda_Bs",
    "upper_incomplete_gamma",
    "lower_incomplete_gamma",
    "calderon_partial_sums",
    "weight_tail_sum",
    "weight_pointwise_tail",
    "exact_cutoff",
    "auto_coarse_level",
    "nominal_coarse_level",
    "PartialSums",
]

# Relative term size below which infinite sums are truncated: one factor of
# machine epsilon below the accumulated value (1e-18 for the tail sums, which
# feed inequalities that must not be undershot).
_SUM_RTOL = 1e-16
_TAIL_RTOL = 1e-18

_EXP_FLOOR = 700.0  # exp(-x) underflows past here; the weight is then 0


def _check_shape(s: int) -> int:
    if not isinstance(s, (int, np.integer)) or s < 1:
        raise ValueError(f"shape parameter s must be an integer >= 1, got {s!r}")
    return int(s)


def _check_scale(B: float) -> float:
    if not B > 1.0:
        raise ValueError(f"scale parameter B must be > 1, got {B!r}")
    return float(B)


def weight(s: int, x):
    """Mexican weight w_s(x) = x^s exp(-x) for x >= 0.

    Accepts scalars or numpy arrays; the maximum over x is attained at x = s.
    """
    s = _check_shape(s)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("weight argument must be nonnegative")
    out = np.where(arr < _EXP_FLOOR, arr**s * np.exp(-np.minimum(arr, _EXP_FLOOR)), 0.0)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def calderon_constant(s: int) -> float:
    """Calderon integral e_s = int_0^inf w_s(x)^2 dx/x = Gamma(2s) / 2^{2s}."""
    s = _check_shape(s)
    return math.gamma(2 * s) / 4.0**s


def lambda_Bs(s: int, B: float) -> float:
    """Frame constant Lambda_{B,s} = e_s / (2 log B)."""
    B = _check_scale(B)
    return calderon_constant(s) / (2.0 * math.log(B))


# ---------------------------------------------------------------------------
# Incomplete gamma functions.  Classical regime split: power series for the
# lower function when x < a + 1, Lentz continued fraction for the upper
# function when x >= a + 1; the other one follows from gamma + Gamma = Gamma(a).
# ---------------------------------------------------------------------------


def _check_gamma_args(a: float, x: float) -> tuple[float, float]:
    if not a > 0.0:
        raise ValueError(f"gamma order a must be positive, got {a!r}")
    if x < 0.0:
        raise ValueError(f"gamma argument x must be nonnegative, got {x!r}")
    return float(a), float(x)


def _lower_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by series, for x < a + 1."""
    if x == 0.0:
        return 0.0
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    log_pref = a * math.log(x) - x - math.lgamma(a)
    return total * math.exp(log_pref)


def _upper_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by continued fraction, x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    log_pref = a * math.log(x) - x - math.lgamma(a)
    return h * math.exp(log_pref)


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Gamma(a, x) = int_x^inf t^{a-1} e^{-t} dt."""
    a, x = _check_gamma_args(a, x)
    if x < a + 1.0:
        return math.gamma(a) * (1.0 - _lower_series(a, x))
    return math.gamma(a) * _upper_cf(a, x)


def lower_incomplete_gamma(a: float, x: float) -> float:
    """gamma(a, x) = int_0^x t^{a-1} e^{-t} dt."""
    a, x = _check_gamma_args(a, x)
    if x < a + 1.0:
        return math.gamma(a) * _lower_series(a, x)
    return math.gamma(a) * (1.0 - _upper_cf(a, x))


# ---------------------------------------------------------------------------
# Calderon partial sums.
# ---------------------------------------------------------------------------


class PartialSums(NamedTuple):
    sum: float
    approximation: float
    relative_gap: float


def _cut_point(B: float, J0: int, cut: str) -> float:
    # "paper": B^{J0/log B} written out, which is e^{J0} independently of B.
    # "scale": B^{J0}, which keeps the analytic cut tied to the scale grid and
    # is the variant under which the gap shrinks as B -> 1.
    if cut == "paper":
        return math.exp(J0)
    if cut == "scale":
        return B**J0
    raise ValueError(f"cut must be 'paper' or 'scale', got {cut!r}")


def calderon_partial_sums(
    s: int,
    B: float,
    J0: int,
    t: float,
    direction: Literal["coarse", "fine"],
    cut: str = "paper",
) -> PartialSums:
    """One-sided Calderon sums and their incomplete-gamma approximations.

    direction="coarse" returns sum_{j <= -J0} w_s(t B^{-2j})^2 together with
    2^{-2s} Gamma(2s, 2 t x0) / (2 log B); direction="fine" returns the
    complementary sum over j > -J0 with the lower-gamma approximation, so the
    two directions partition the full two-sided sum.  x0 is e^{J0} for
    cut="paper" (the literal reading) and B^{J0} for cut="scale".
    """
    s = _check_shape(s)
    B = _check_scale(B)
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t!r}")
    d = 2.0 * math.log(B)
    x0 = _cut_point(B, J0, cut)

    if direction == "coarse":
        # Arguments t*B^{2J0}, t*B^{2J0+2}, ...: grows geometrically, the
        # squared weight eventually decays like exp(-2 arg).
        total = 0.0
        arg = t * B ** (2.0 * J0)
        while arg < 2.0 * _EXP_FLOOR:
            term = weight(s, arg) ** 2
            total += term
            if arg > s and term < total * _SUM_RTOL:
                break
            arg *= B * B
        approx = 4.0**-s * upper_incomplete_gamma(2 * s, 2.0 * t * x0) / d
    elif direction == "fine":
        # Arguments t*B^{2J0-2}, t*B^{2J0-4}, ...: shrinks geometrically, the
        # squared weight decays like arg^{4s}.
        total = 0.0
        arg = t * B ** (2.0 * (J0 - 1))
        while arg > 0.0:
            term = weight(s, arg) ** 2
            total += term
            if term < total * _SUM_RTOL:
                break
            arg /= B * B
        approx = 4.0**-s * lower_incomplete_gamma(2 * s, 2.0 * t * x0) / d
    else:
        raise ValueError(f"direction must be 'coarse' or 'fine', got {direction!r}")

    gap = abs(total - approx) / approx if approx > 0.0 else math.inf
    return PartialSums(total, approx, gap)


# ---------------------------------------------------------------------------
# Frequency tail of a single level.
# ---------------------------------------------------------------------------


def weight_tail_sum(s: int, B: float, j: int, K: int) -> tuple[float, float]:
    """Tail sum_{|k|>K} w_s((k B^{-j})^2)^2 and its closed-form bound.

    The bound is 2^{-(2s+1/2)} B^j Gamma(2s + 1/2, 2 K^2 B^{-2j}); the direct
    sum is truncated once terms fall below 1e-18 of the running total past the
    mode of the summand.
    """
    s = _check_shape(s)
    B = _check_scale(B)
    if K < 1:
        raise ValueError(f"cut-off K must be >= 1, got {K!r}")
    scale = B ** (-float(j))
    k_mode = math.sqrt(s) / scale  # summand peaks where (k*scale)^2 = s
    total = 0.0
    k = K + 1
    while True:
        arg = (k * scale) ** 2
        if arg > 2.0 * _EXP_FLOOR and k > k_mode:
            break
        term = weight(s, arg) ** 2
        total += term
        if k > k_mode and (term < total * _TAIL_RTOL or term == 0.0):
            break
        k += 1
    tail = 2.0 * total
    a = 2 * s + 0.5
    bound = 2.0**-a * B ** float(j) * upper_incomplete_gamma(a, 2.0 * K * K * scale * scale)
    return tail, bound


def weight_pointwise_tail(s: int, B: float, j: int, K: int) -> float:
    """2 sum_{k > K} w_s((k B^{-j})^2): a bound on the pointwise error of
    truncating an atom's frequency sum at K."""
    s = _check_shape(s)
    B = _check_scale(B)
    scale = B ** (-float(j))
    k_mode = math.sqrt(s) / scale
    total = 0.0
    k = K + 1
    while True:
        arg = (k * scale) ** 2
        if arg > _EXP_FLOOR and k > k_mode:
            break
        term = weight(s, arg)
        total += term
        if k > k_mode and (term < total * _TAIL_RTOL or term == 0.0):
            break
        k += 1
    return 2.0 * total


def exact_cutoff(s: int, B: float, j: int, tol: float = 1e-20) -> int:
    """Smallest K whose truncation tail bound falls below tol.

    Atoms realised with this cut-off serve as the machine-precision surrogate
    for the untruncated needlet (whose frequency support is unbounded).
    """
    s = _check_shape(s)
    B = _check_scale(B)
    a = 2 * s + 0.5
    scale2 = B ** (-2.0 * j)
    pref = 2.0**-a * B ** float(j)

    def bound(K: int) -> float:
        return pref * upper_incomplete_gamma(a, 2.0 * K * K * scale2)

    K = max(1, math.ceil(B ** float(j) * math.sqrt(s)))
    while bound(K) >= tol:
        K *= 2
    lo, hi = K // 2, K
    if bound(lo) < tol:
        lo = 1 if lo <= 1 else lo
        while lo > 1 and bound(lo - 1) < tol:
            lo -= 1
        return lo
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if bound(mid) < tol:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Coarse level selection.
# ---------------------------------------------------------------------------


def nominal_coarse_level(s: int, B: float) -> int:
    """Largest integer J0 with J0 < -log_B sqrt(s) (the partition condition)."""
    s = _check_shape(s)
    B = _check_scale(B)
    bound = -0.5 * math.log(s) / math.log(B)
    J0 = math.ceil(bound) - 1
    return J0


def auto_coarse_level(s: int, B: float, tol: float = 1e-9) -> int:
    """Coarsest level worth keeping: dropping all j below it loses at most
    a tol fraction of the k = +-1 Daubechies line sum_j w_s(B^{-2j})^2.

    The k = 1 line is the worst case; every higher frequency sees arguments
    k^2 times larger at the same level, hence smaller dropped tails.
    """
    s = _check_shape(s)
    B = _check_scale(B)
    lam = lambda_Bs(s, B)
    j_peak = math.floor(-0.5 * math.log(s) / math.log(B))
    # Collect the squared-weight profile downward until terms are negligible.
    terms: list[tuple[int, float]] = []
    j = j_peak
    while True:
        arg = B ** (-2.0 * j)
        term = weight(s, arg) ** 2 if arg < 2.0 * _EXP_FLOOR else 0.0
        terms.append((j, term))
        if arg > 2.0 * s and term < tol * lam * 1e-6:
            break
        j -= 1
    cum = 0.0
    for jj, term in sorted(terms):
        cum += term
        if cum > tol * lam:
            return jj
    return j_peak
