"""Mexican needlet frame on the circle.

An atom at level j and position q is

    psi_{jq}(theta) = sqrt(lambda_jq) * sum_k w_s((B^{-j} k)^2) exp(ik(theta - x_jq)),

with equal-arc partitions lambda_jq = 1/Q_j, x_jq midpoints, and Q_j =
max(1, ceil(B^j / eta)).  Analysis and synthesis are computed frequency-side:
for modes m_k the position profile over q is a folded inverse DFT of length
Q_j (exact, including aliasing when Q_j is smaller than the frequency span),
so per-level transforms cost O(k_max + Q_j log Q_j).

The frame annihilates constants (w_s(0) = 0), so synthesis reproduces the
mean-removed part of a function; consumers that need the mean add it back.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .fourier import (
    AliasingError,
    FourierTable,
    GridFunction,
    fourier_coefficients,
    grid_size_for,
    spectrum_to_grid,
)
from .special import (
    auto_coarse_level,
    exact_cutoff,
    lambda_Bs,
    upper_incomplete_gamma,
    weight,
    weight_pointwise_tail,
)

__all__ = [
    "FrameParams",
    "Partition",
    "AtomIndex",
    "CoefficientTable",
    "BiasReport",
    "BiasConstants",
    "InequalityViolation",
    "ReferenceResolutionError",
    "build_partition",
    "needlet_eval",
    "localization_envelope",
    "calibrate_envelope_constant",
    "localization_excess",
    "analyze",
    "level_energies",
    "adequate_level_range",
    "tightness_ratio",
    "besov_level_norms",
    "besov_smoothness",
    "synthesis_spectrum",
    "summation",
    "atom_l2_norm_sq",
    "atom_l1_norm",
    "bias_report",
    "calibrate_bias_constants",
    "partition_to_csv",
    "partition_from_csv",
    "coefficients_to_csv",
    "coefficients_from_csv",
]


@dataclass(frozen=True)
class FrameParams:
    """Shape s, scale B, pixel parameter eta and coarse cut J0.

    J0 = None selects the energy-based default: the coarsest level below
    which the remaining k = +-1 line energy is under 1e-9 of Lambda_{B,s}.
    """

    s: int
    B: float
    eta: float
    J0: int | None = None

    def __post_init__(self):
        if not isinstance(self.s, (int, np.integer)) or self.s < 1:
            raise ValueError(f"s must be an integer >= 1, got {self.s!r}")
        if not self.B > 1.0:
            raise ValueError(f"B must be > 1, got {self.B!r}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0, 1), got {self.eta!r}")
        if self.J0 is None:
            object.__setattr__(self, "J0", auto_coarse_level(self.s, self.B))
        cond = -0.5 * math.log(self.s) / math.log(self.B)
        if not self.J0 < cond:
            raise ValueError(f"J0={self.J0} violates J0 < -log_B sqrt(s) = {cond:.4f}")

    @property
    def frame_constant(self) -> float:
        return lambda_Bs(self.s, self.B)

    def to_dict(self) -> dict:
        return {"s": int(self.s), "B": float(self.B), "eta": float(self.eta), "J0": int(self.J0)}


class AtomIndex(NamedTuple):
    j: int
    q: int  # 1-based position within the level
    K: int | None = None


@dataclass(frozen=True)
class Partition:
    """Equal-arc partitions for levels J0..J_max: Q_j arcs of measure 1/Q_j."""

    params: FrameParams
    levels: tuple[int, ...]
    counts: dict[int, int]

    def count(self, j: int) -> int:
        return self.counts[j]

    def arc_length(self, j: int) -> float:
        return 1.0 / self.counts[j]

    def lambdas(self, j: int) -> np.ndarray:
        Q = self.counts[j]
        return np.full(Q, 1.0 / Q)

    def centers(self, j: int) -> np.ndarray:
        Q = self.counts[j]
        return 2.0 * math.pi * (np.arange(Q) + 0.5) / Q

    def center(self, j: int, q: int) -> float:
        Q = self.counts[j]
        if not 1 <= q <= Q:
            raise ValueError(f"q={q} out of range 1..{Q} at level {j}")
        return 2.0 * math.pi * (q - 0.5) / Q


def build_partition(params: FrameParams, J_max: int) -> Partition:
    if J_max < params.J0:
        raise ValueError(f"J_max={J_max} below coarse cut J0={params.J0}")
    levels = tuple(range(params.J0, J_max + 1))
    counts = {j: max(1, math.ceil(params.B**j / params.eta)) for j in levels}
    return Partition(params=params, levels=levels, counts=counts)


# ---------------------------------------------------------------------------
# Frequency-side machinery.
# ---------------------------------------------------------------------------


def _level_weights(params: FrameParams, j: int, k_max: int) -> np.ndarray:
    """w_s((B^{-j} k)^2) for k = -k_max .. k_max."""
    ks = np.arange(-k_max, k_max + 1)
    return weight(params.s, (ks * params.B ** (-float(j))) ** 2)


def _mask_band(arr: np.ndarray, k_max: int, lo: int, hi: int | None) -> np.ndarray:
    """Zero all entries except lo < |k| <= hi (hi=None means no upper cap)."""
    ks = np.abs(np.arange(-k_max, k_max + 1))
    keep = ks > lo
    if hi is not None:
        keep &= ks <= hi
    out = np.where(keep, arr, 0.0)
    return out


def _fold(modes: np.ndarray, k_max: int, Q: int) -> np.ndarray:
    """g[r] = sum_{k = r mod Q} modes_k e^{i pi k / Q} (midpoint phase)."""
    ks = np.arange(-k_max, k_max + 1)
    g = np.zeros(Q, dtype=complex)
    np.add.at(g, np.mod(ks, Q), modes * np.exp(1j * math.pi * ks / Q))
    return g


def _analyze_level(modes: np.ndarray, k_max: int, Q: int) -> np.ndarray:
    """Coefficients beta_q = sqrt(1/Q) sum_k modes_k e^{ik x_q}, q = 0..Q-1."""
    g = _fold(modes, k_max, Q)
    return math.sqrt(1.0 / Q) * Q * np.fft.ifft(g)


def _level_energy(modes: np.ndarray, k_max: int, Q: int) -> float:
    """sum_q |beta_q|^2 without the inverse transform (Parseval over q)."""
    g = _fold(modes, k_max, Q)
    return float(np.sum(np.abs(g) ** 2))


def _synthesize_level(values: np.ndarray, k_max: int) -> np.ndarray:
    """D_k = sum_q values_q e^{-ik x_q} for k = -k_max .. k_max."""
    Q = values.size
    d = np.fft.fft(values)
    ks = np.arange(-k_max, k_max + 1)
    return np.exp(-1j * math.pi * ks / Q) * d[np.mod(ks, Q)]


# ---------------------------------------------------------------------------
# Atom evaluation and localization.
# ---------------------------------------------------------------------------


def needlet_eval(params: FrameParams, partition: Partition, idx: AtomIndex, theta):
    """Atom value(s) at theta; real because the weights are even in k.

    K absent selects the machine-precision surrogate cut-off for the level.
    """
    K = idx.K if idx.K is not None else exact_cutoff(params.s, params.B, idx.j)
    Q = partition.count(idx.j)
    x = partition.center(idx.j, idx.q)
    ks = np.arange(1, K + 1)
    w = weight(params.s, (ks * params.B ** (-float(idx.j))) ** 2)
    th = np.asarray(theta, dtype=float) - x
    vals = 2.0 * np.cos(np.multiply.outer(th, ks)).dot(w) * math.sqrt(1.0 / Q)
    return float(vals) if np.isscalar(theta) else vals


def _atom_profile(params: FrameParams, j: int, K: int | None, M: int) -> np.ndarray:
    """Profile g_j(Delta) = sum_k w_k e^{ik Delta} on the size-M grid (real)."""
    Kj = K if K is not None else exact_cutoff(params.s, params.B, j)
    w = _level_weights(params, j, Kj)
    return spectrum_to_grid(w.astype(complex), Kj, M).values.real


def localization_envelope(params: FrameParams, partition: Partition, idx: AtomIndex, theta, c_s: float):
    """Gaussian-times-polynomial envelope dominating |psi_jq| once c_s is calibrated."""
    x = partition.center(idx.j, idx.q)
    lam = partition.arc_length(idx.j)
    d = np.mod(np.asarray(theta, dtype=float) - x + math.pi, 2.0 * math.pi) - math.pi
    u = params.B ** float(idx.j) * d / 2.0
    env = math.sqrt(lam) * c_s * params.B ** float(idx.j) * np.exp(-(u**2)) * (1.0 + u ** (2 * params.s))
    return float(env) if np.isscalar(theta) else env


def _envelope_base(params: FrameParams, j: int, delta: np.ndarray) -> np.ndarray:
    """Envelope without sqrt(lambda) c_s: B^j exp(-u^2)(1 + u^{2s}), u = B^j delta/2."""
    u = params.B ** float(j) * delta / 2.0
    return params.B ** float(j) * np.exp(-(u**2)) * (1.0 + u ** (2 * params.s))


def _envelope_validity_floor(params: FrameParams, j: int, K: int) -> float:
    """Envelope magnitude below which the K-truncated surrogate cannot speak
    for the exact atom: ten times the pointwise truncation-error bound (the
    discarded frequencies' ringing), plus double-precision headroom."""
    return 10.0 * weight_pointwise_tail(params.s, params.B, j, K)


def calibrate_envelope_constant(
    params: FrameParams, j_range: Iterable[int], grid: int = 1 << 16
) -> float:
    """Smallest c_s making the envelope dominate |psi| on a dense offset grid.

    The ratio is taken where the envelope exceeds the surrogate atom's
    truncation-ringing floor; past that radius the computed profile no longer
    tracks the exact atom, which decays at the envelope's own Gaussian rate.
    """
    c = 0.0
    for j in j_range:
        Kj = exact_cutoff(params.s, params.B, j)
        M = max(grid, grid_size_for(Kj))
        prof = np.abs(_atom_profile(params, j, None, M))
        delta = np.mod(2.0 * math.pi * np.arange(M) / M + math.pi, 2.0 * math.pi) - math.pi
        base = _envelope_base(params, j, delta)
        floor = _envelope_validity_floor(params, j, Kj) + 1e-15 * prof.max()
        valid = base > floor
        c = max(c, float((prof[valid] / base[valid]).max()))
    return c


def localization_excess(
    params: FrameParams,
    partition: Partition,
    idx: AtomIndex,
    theta: np.ndarray,
    c_s: float,
) -> float:
    """max over grid of |psi_jq| - envelope within the envelope's validity
    region (where it exceeds the surrogate atom's truncation-ringing floor)."""
    K = idx.K if idx.K is not None else exact_cutoff(params.s, params.B, idx.j)
    vals = np.abs(needlet_eval(params, partition, idx, theta))
    x = partition.center(idx.j, idx.q)
    delta = np.mod(np.asarray(theta) - x + math.pi, 2.0 * math.pi) - math.pi
    base = _envelope_base(params, idx.j, delta)
    floor = _envelope_validity_floor(params, idx.j, K) + 1e-15 * vals.max()
    valid = base > floor
    env = math.sqrt(partition.arc_length(idx.j)) * c_s * base
    return float((vals[valid] - env[valid]).max())


# ---------------------------------------------------------------------------
# Analysis.
# ---------------------------------------------------------------------------


@dataclass
class CoefficientTable:
    """Per-level coefficient arrays for atoms indexed (j, q), q = 1..Q_j."""

    params: FrameParams
    kind: str  # exact | truncated | empirical
    values: dict[int, np.ndarray]
    cutoffs: dict[int, int]

    def levels(self) -> list[int]:
        return sorted(self.values)

    def __getitem__(self, idx: AtomIndex) -> complex:
        return complex(self.values[idx.j][idx.q - 1])

    def level_energy(self, j: int) -> float:
        return float(np.sum(np.abs(self.values[j]) ** 2))

    def energy(self) -> float:
        return sum(self.level_energy(j) for j in self.values)


def analyze(
    params: FrameParams,
    partition: Partition,
    f: GridFunction,
    J_max: int,
    K: int | None = None,
) -> CoefficientTable:
    """Needlet coefficients <f, psi_jq> for levels J0..J_max.

    Computed frequency-side from the quadrature Fourier table of f; K absent
    means machine-precision atoms (kind "exact"), otherwise kind "truncated".
    """
    levels = [j for j in partition.levels if j <= J_max]
    cutoffs = {j: (K if K is not None else exact_cutoff(params.s, params.B, j)) for j in levels}
    k_max = max(cutoffs.values())
    table = fourier_coefficients(f, k_max)
    values: dict[int, np.ndarray] = {}
    for j in levels:
        Kj = cutoffs[j]
        w = _level_weights(params, j, Kj)
        a = table.coeffs[k_max - Kj : k_max + Kj + 1]
        values[j] = _analyze_level(w * a, Kj, partition.count(j))
    return CoefficientTable(
        params=params,
        kind="exact" if K is None else "truncated",
        values=values,
        cutoffs=cutoffs,
    )


def level_energies(
    params: FrameParams,
    partition: Partition,
    table: FourierTable,
    levels: Sequence[int],
    K: int | None = None,
) -> dict[int, float]:
    """sum_q |beta_jq|^2 per level, straight from a Fourier table."""
    out = {}
    for j in levels:
        Kj = K if K is not None else exact_cutoff(params.s, params.B, j)
        # frequencies beyond the table are treated as absent; the caller sizes
        # the table to the function's spectral content
        Kj = min(Kj, table.k_max)
        w = _level_weights(params, j, Kj)
        a = table.coeffs[table.k_max - Kj : table.k_max + Kj + 1]
        out[j] = _level_energy(w * a, Kj, partition.count(j))
    return out


def tightness_ratio(
    params: FrameParams,
    partition: Partition,
    test_functions: Sequence[GridFunction],
    J_range: tuple[int, int],
) -> tuple[float, float]:
    """Extremes over test functions of frame energy / mean-removed L2 energy.

    Requires the level range to capture all but 1e-10 of the two-sided weight
    sum at every frequency the test functions carry.
    """
    j_lo, j_hi = J_range
    levels = [j for j in partition.levels if j_lo <= j <= j_hi]
    if not levels:
        raise ValueError("empty level range")
    ratios = []
    for f in test_functions:
        table = fourier_coefficients(f, (f.M - 2) // 2)
        gammas = np.abs(table.coeffs) ** 2
        ks = table.ks()
        band = np.abs(ks)[gammas > 1e-20 * gammas.sum()]
        band = int(band.max()) if band.size else 0
        if band == 0:
            raise ValueError("test function has no mean-removed energy in the frame range")
        _check_range_residual(params, j_lo, j_hi, band)
        denom = float(np.sum(gammas[ks != 0]))
        energy = sum(level_energies(params, partition, table, levels).values())
        ratios.append(energy / denom)
    return min(ratios), max(ratios)


def adequate_level_range(s: int, B: float, band: int, tol: float = 1e-11) -> tuple[int, int]:
    """Level range whose out-of-range weight energy is below tol for every
    frequency 1..band (the coarse side is governed by k=1, the fine by k=band)."""
    lo = auto_coarse_level(s, B, tol=tol)
    # fine side: walk up until the remaining arguments' lower-gamma mass dies out
    t = float(band * band)
    full = 0.0
    j = lo
    terms = []
    while True:
        arg = t * B ** (-2.0 * j)
        term = weight(s, arg) ** 2 if arg < 1400.0 else 0.0
        terms.append(term)
        full += term
        if j > lo and arg < 1e-3 and term < full * 1e-18:
            break
        j += 1
    above = 0.0
    hi = j
    for term in reversed(terms):
        above += term
        if above > tol * full:
            break
        hi -= 1
    return lo, hi + 1


def _check_range_residual(params: FrameParams, j_lo: int, j_hi: int, band: int) -> None:
    for k in range(1, band + 1):
        t = float(k * k)
        full = 0.0
        covered = 0.0
        for j in range(j_lo - 200, j_hi + 400):
            arg = t * params.B ** (-2.0 * j)
            if arg > 1400.0:
                continue
            term = weight(params.s, arg) ** 2
            full += term
            if j_lo <= j <= j_hi:
                covered += term
        if full - covered > 1e-10 * full:
            raise ValueError(
                f"level range [{j_lo}, {j_hi}] leaves {(full - covered) / full:.2e} "
                f"of the frequency-{k} weight sum uncovered"
            )


def besov_level_norms(coefficients: CoefficientTable, partition: Partition) -> dict[int, float]:
    """(eta * sum_q |beta_jq|^2)^{1/2} per level."""
    if coefficients.kind != "exact":
        raise ValueError("level norms are defined for exact coefficient tables")
    eta = coefficients.params.eta
    return {j: math.sqrt(eta * coefficients.level_energy(j)) for j in coefficients.levels()}


def besov_smoothness(level_norms: dict[int, float], B: float, floor: float = 1e-13) -> float:
    """Smoothness exponent from a log-linear fit of level norms against j."""
    js = np.array([j for j, v in sorted(level_norms.items()) if v > floor and j > 0])
    vals = np.array([level_norms[j] for j in js])
    if js.size < 3:
        raise ValueError("not enough usable levels for a smoothness fit")
    slope = np.polyfit(js, np.log(vals), 1)[0]
    return float(-slope / math.log(B))


# ---------------------------------------------------------------------------
# Synthesis.
# ---------------------------------------------------------------------------


def synthesis_spectrum(
    params: FrameParams,
    partition: Partition,
    coefficients: CoefficientTable,
    J: int,
    K: int | None = None,
) -> tuple[int, np.ndarray]:
    """Fourier modes of sum_{j <= J} sum_q beta_jq psi_jq on the circle."""
    levels = [j for j in partition.levels if j <= J]
    missing = [j for j in levels if j not in coefficients.values]
    if missing:
        raise ValueError(f"missing coefficients for levels {missing}")
    cutoffs = {
        j: (K if K is not None else coefficients.cutoffs[j]) for j in levels
    }
    k_max = max(cutoffs.values())
    spec = np.zeros(2 * k_max + 1, dtype=complex)
    for j in levels:
        Kj = cutoffs[j]
        w = _level_weights(params, j, Kj)
        d = _synthesize_level(coefficients.values[j], Kj)
        lam = math.sqrt(partition.arc_length(j))
        spec[k_max - Kj : k_max + Kj + 1] += lam * w * d
    return k_max, spec


def summation(
    params: FrameParams,
    partition: Partition,
    coefficients: CoefficientTable,
    J: int,
    K: int | None = None,
    M: int | None = None,
) -> GridFunction:
    """Summation-operator synthesis on a uniform grid."""
    k_max, spec = synthesis_spectrum(params, partition, coefficients, J, K)
    M = M if M is not None else grid_size_for(k_max)
    return spectrum_to_grid(spec, k_max, M)


# ---------------------------------------------------------------------------
# Atom norms.
# ---------------------------------------------------------------------------


def atom_l2_norm_sq(params: FrameParams, partition: Partition, j: int, K: int | None = None) -> float:
    """||psi_jq||_{L2}^2 = lambda_j sum_{|k| <= K} w_k^2 (Parseval, exact)."""
    Kj = K if K is not None else exact_cutoff(params.s, params.B, j)
    w = _level_weights(params, j, Kj)
    return partition.arc_length(j) * float(np.sum(w**2))


def atom_l1_norm(params: FrameParams, partition: Partition, j: int, M: int = 1 << 14) -> float:
    """||psi_jq||_{L1} by quadrature of the atom profile."""
    Kj = exact_cutoff(params.s, params.B, j)
    M = max(M, grid_size_for(Kj))
    prof = _atom_profile(params, j, None, M)
    return math.sqrt(partition.arc_length(j)) * float(np.mean(np.abs(prof)))


# ---------------------------------------------------------------------------
# Bias decomposition.
# ---------------------------------------------------------------------------


class InequalityViolation(AssertionError):
    """A checked frame inequality failed; the message names the check."""


class ReferenceResolutionError(RuntimeError):
    """Reference synthesis resolution is insufficient for the requested bias."""


@dataclass(frozen=True)
class BiasConstants:
    """Calibrated constants for the three-term truncation bound (logs of C)."""

    r: float
    log_C1: float
    log_C2: float
    log_C3: float


@dataclass
class BiasReport:
    J: int
    K: int
    J_ref: int
    R: float
    I1: float
    I2: float
    I3: float
    bounds: tuple[float, float, float] | None
    coeff_tail_margin: float  # max over levels of lhs/rhs for the coefficient-tail bound
    atom_tail_margin: float  # same for the truncated-atom norm bound
    spectral_tail: float  # sum of |a_k|^2 beyond K
    noise_floor: float = 0.0  # FFT roundoff scale; components below it are zeros

    @property
    def components_within_bounds(self) -> bool:
        if self.bounds is None:
            return True
        return all(
            val <= bound * (1.0 + 1e-9) or val <= self.noise_floor
            for val, bound in zip((self.I1, self.I2, self.I3), self.bounds)
        )


def _log_bound_forms(params: FrameParams, J: int, K: int, r: float, tail: float) -> tuple[float, float, float]:
    s, lnB = params.s, math.log(params.B)
    f1 = -r * J * lnB
    f2 = 0.5 * math.log(J) + (2 * s - 0.5) * math.log(K) - float(K) ** 2 - (r + 2 * s - 0.5) * J * lnB
    f3 = (
        (1 - 2 * s) * J * lnB
        + 0.5 * math.log(J)
        + (s - 0.25) * math.log(K)
        - 2.0 * float(K) ** 2
        + (0.5 * math.log(tail) if tail > 0.0 else -math.inf)
    )
    return f1, f2, f3


def _component_spectra(
    params: FrameParams,
    partition: Partition,
    table: FourierTable,
    J: int,
    K: int,
    cutoffs: dict[int, int],
    k_ref: int,
):
    """Reference, truncated, and telescoping-difference spectra."""
    ref = np.zeros(2 * k_ref + 1, dtype=complex)
    trunc = np.zeros_like(ref)
    i1 = np.zeros_like(ref)
    i2 = np.zeros_like(ref)
    i3 = np.zeros_like(ref)
    coeff_tail_sq: dict[int, float] = {}
    for j in partition.levels:
        Kj = cutoffs[j]
        Q = partition.count(j)
        sq_lam = math.sqrt(partition.arc_length(j))
        w = _level_weights(params, j, Kj)
        a = table.coeffs[table.k_max - Kj : table.k_max + Kj + 1]
        modes = w * a
        beta = _analyze_level(modes, Kj, Q)
        d_exact = _synthesize_level(beta, Kj)
        lvl = sq_lam * w * d_exact
        ref[k_ref - Kj : k_ref + Kj + 1] += lvl
        if j > J:
            i1[k_ref - Kj : k_ref + Kj + 1] += lvl
            continue
        w_in = _mask_band(w, Kj, 0, K)
        w_out = _mask_band(w, Kj, K, None)
        beta_K = _analyze_level(w_in * a, Kj, Q)
        d_K = _synthesize_level(beta_K, Kj)
        trunc[k_ref - Kj : k_ref + Kj + 1] += sq_lam * w_in * d_K
        # beta (psi - psi_K): exact coefficients, discarded atom frequencies
        i2[k_ref - Kj : k_ref + Kj + 1] += sq_lam * w_out * d_exact
        # (beta - beta_K) psi_K: discarded coefficient frequencies, kept atoms
        delta = beta - beta_K
        i3[k_ref - Kj : k_ref + Kj + 1] += sq_lam * w_in * _synthesize_level(delta, Kj)
        coeff_tail_sq[j] = float(np.sum(np.abs(delta) ** 2))
    return ref, trunc, i1, i2, i3, coeff_tail_sq


def bias_report(
    params: FrameParams,
    f: GridFunction,
    J: int,
    K: int,
    constants: BiasConstants | None = None,
    ref_margin: int = 10,
    check_reference: bool = False,
) -> BiasReport:
    """Truncation bias of the summation operator and its three components.

    The reference synthesis runs ref_margin levels past J with machine-
    precision atom cut-offs.  Checked along the way: the per-level coefficient
    tail bound sum_q |beta_K - beta|^2 <= B^j Gamma(2s+1/2, 2K^2 B^{-2j})
    * tail(gamma), and the truncated-atom norm bound ||psi_K - psi||^2 <=
    2^{-(2s+1/2)} eta Gamma(2s+1/2, 2K^2 B^{-2j}).
    """
    if K < 1 or J < params.J0:
        raise ValueError("need K >= 1 and J >= J0")
    J_ref = J + ref_margin
    partition = build_partition(params, J_ref)
    cutoffs = {j: max(exact_cutoff(params.s, params.B, j), K) for j in partition.levels}
    k_ref = max(cutoffs.values())
    table = fourier_coefficients(f, k_ref)
    ref, trunc, i1, i2, i3, coeff_tail_sq = _component_spectra(
        params, partition, table, J, K, cutoffs, k_ref
    )

    def norm(spec):
        return float(np.sqrt(np.sum(np.abs(spec) ** 2)))

    R = norm(ref - trunc)
    report = BiasReport(
        J=J,
        K=K,
        J_ref=J_ref,
        R=R,
        I1=norm(i1),
        I2=norm(i2),
        I3=norm(i3),
        bounds=None,
        coeff_tail_margin=0.0,
        atom_tail_margin=0.0,
        spectral_tail=table.spectral_tail(K),
        noise_floor=1e-13 * norm(ref),
    )

    # Intermediate inequalities, levels j >= 0 up to J.
    a_gam = 2 * params.s + 0.5
    tail_gamma = report.spectral_tail
    sq_floor = report.noise_floor**2
    margins1, margins2 = [0.0], [0.0]
    for j in [j for j in partition.levels if 0 <= j <= J]:
        gam = upper_incomplete_gamma(a_gam, 2.0 * K * K * params.B ** (-2.0 * j))
        rhs1 = params.B ** float(j) * gam * tail_gamma
        lhs1 = coeff_tail_sq[j]
        if lhs1 > rhs1 * (1.0 + 1e-9) and lhs1 > sq_floor:
            raise InequalityViolation(
                f"coefficient-tail bound violated at level {j}: {lhs1:.6e} > {rhs1:.6e}"
            )
        if rhs1 > 0.0:
            margins1.append(lhs1 / rhs1)
        w = _level_weights(params, j, cutoffs[j])
        lhs2 = partition.arc_length(j) * float(np.sum(_mask_band(w, cutoffs[j], K, None) ** 2))
        rhs2 = 2.0**-a_gam * params.eta * gam
        if lhs2 > rhs2 * (1.0 + 1e-9) and lhs2 > 1e-300:
            raise InequalityViolation(
                f"truncated-atom norm bound violated at level {j}: {lhs2:.6e} > {rhs2:.6e}"
            )
        if rhs2 > 0.0:
            margins2.append(lhs2 / rhs2)
    report.coeff_tail_margin = max(margins1)
    report.atom_tail_margin = max(margins2)

    if constants is not None:
        f1, f2, f3 = _log_bound_forms(params, J, K, constants.r, tail_gamma)

        def safe_exp(arg: float) -> float:
            if not math.isfinite(arg):
                return 0.0
            return math.inf if arg > 700.0 else math.exp(arg)

        report.bounds = (
            safe_exp(constants.log_C1 + f1),
            safe_exp(constants.log_C2 + f2),
            safe_exp(constants.log_C3 + f3),
        )
        for name, val, bound in zip(("coarse", "atom-truncation", "coefficient-truncation"),
                                    (report.I1, report.I2, report.I3), report.bounds):
            if val > bound * (1.0 + 1e-9) and val > report.noise_floor:
                raise InequalityViolation(
                    f"{name} component exceeds its calibrated bound: {val:.6e} > {bound:.6e}"
                )

    if check_reference:
        again = bias_report(params, f, J, K, ref_margin=ref_margin + 5)
        if R > 0 and abs(again.R - R) > 0.01 * R:
            raise ReferenceResolutionError(
                f"reference moved by {abs(again.R - R) / R:.2%} when extended; increase ref_margin"
            )
    return report


def calibrate_bias_constants(
    params: FrameParams,
    f: GridFunction,
    J_grid: Sequence[int],
    K_grid: Sequence[int],
    r: float,
    ref_margin: int = 10,
) -> BiasConstants:
    """Fit log C1..C3 as the max log-ratio of measured components to forms."""
    logs = [-math.inf, -math.inf, -math.inf]
    for J in J_grid:
        for K in K_grid:
            rep = bias_report(params, f, J, K, ref_margin=ref_margin)
            forms = _log_bound_forms(params, J, K, r, rep.spectral_tail)
            for i, val in enumerate((rep.I1, rep.I2, rep.I3)):
                if val > rep.noise_floor and math.isfinite(forms[i]):
                    logs[i] = max(logs[i], math.log(val) - forms[i])
    logs = [x if math.isfinite(x) else 0.0 for x in logs]
    return BiasConstants(r=r, log_C1=logs[0], log_C2=logs[1], log_C3=logs[2])


# ---------------------------------------------------------------------------
# CSV serialization.
# ---------------------------------------------------------------------------


def _header_line(params: FrameParams, extra: dict | None = None) -> str:
    payload = params.to_dict()
    if extra:
        payload.update(extra)
    return "# " + json.dumps(payload, sort_keys=True)


def partition_to_csv(partition: Partition, path) -> None:
    with open(path, "w") as fh:
        fh.write(_header_line(partition.params) + "\n")
        fh.write("j,q,lambda,center\n")
        for j in partition.levels:
            lam = partition.arc_length(j)
            for q, x in enumerate(partition.centers(j), start=1):
                fh.write(f"{j},{q},{lam!r},{float(x)!r}\n")


def partition_from_csv(path) -> Partition:
    with open(path) as fh:
        head = json.loads(fh.readline().lstrip("# "))
        fh.readline()
        counts: dict[int, int] = {}
        for line in fh:
            j = int(line.split(",", 1)[0])
            counts[j] = counts.get(j, 0) + 1
    params = FrameParams(s=head["s"], B=head["B"], eta=head["eta"], J0=head["J0"])
    return Partition(params=params, levels=tuple(sorted(counts)), counts=counts)


def coefficients_to_csv(table: CoefficientTable, path) -> None:
    with open(path, "w") as fh:
        fh.write(_header_line(table.params, {"kind": table.kind}) + "\n")
        fh.write("j,q,K,re,im\n")
        for j in table.levels():
            K = table.cutoffs[j]
            for q, v in enumerate(table.values[j], start=1):
                fh.write(f"{j},{q},{K},{float(v.real)!r},{float(v.imag)!r}\n")


def coefficients_from_csv(path) -> CoefficientTable:
    with open(path) as fh:
        head = json.loads(fh.readline().lstrip("# "))
        fh.readline()
        values: dict[int, list[complex]] = {}
        cutoffs: dict[int, int] = {}
        for line in fh:
            j_s, _q, k_s, re_s, im_s = line.rstrip("\n").split(",")
            j = int(j_s)
            cutoffs[j] = int(k_s)
            values.setdefault(j, []).append(complex(float(re_s), float(im_s)))
    params = FrameParams(s=head["s"], B=head["B"], eta=head["eta"], J0=head["J0"])
    return CoefficientTable(
        params=params,
        kind=head["kind"],
        values={j: np.array(v) for j, v in values.items()},
        cutoffs=cutoffs,
    )
