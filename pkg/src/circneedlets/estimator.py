"""Hard-thresholding density estimator built on the needlet frame.

Sample-size tuning: tau_n = sqrt(log n / n), K_n = round(sqrt(n / log n)),
J_n = round(log_B sqrt(n / log n)), eta_n = n^{-3/4}, and the threshold
constant kappa = kappa0 * sqrt(0.107) * sup|F|.  Empirical coefficients are
sample means of conjugated truncated atoms; a coefficient survives iff its
modulus reaches kappa * tau_n.  The estimate is 1 plus the surviving
synthesis divided by the frame constant (near-tightness makes the frame
operator approximately Lambda times the identity on mean-removed functions),
optionally clipped at zero and renormalized.

Replication r of any Monte-Carlo loop draws its samples with seed ^ r, so
runs over different sample sizes with the same master seed share underlying
randomness and pair up replication-by-replication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fourier import GridFunction, grid_size_for, l2_distance, spectrum_to_grid, uniform_grid
from .frame import (
    CoefficientTable,
    FrameParams,
    Partition,
    _analyze_level,
    _level_weights,
    analyze,
    build_partition,
    synthesis_spectrum,
)
from .sampling import DensityModel, SampleSet, sample

__all__ = [
    "TuningParams",
    "EstimateResult",
    "RiskReport",
    "ConcentrationReport",
    "derive_tuning",
    "estimator_frame",
    "empirical_fourier",
    "empirical_coefficients",
    "threshold_and_synthesize",
    "estimate_density",
    "l2_risk",
    "monte_carlo_risk",
    "paired_risk_difference",
    "concentration_check",
    "pilot_sup",
    "optimal_bandwidth_level",
]

_FOURIER_CHUNK = 16384


@dataclass(frozen=True)
class TuningParams:
    """Sample-size derived quantities steering the estimator."""

    n: int
    B: float
    kappa0: float
    sup_f: float
    J_n: int
    K_n: int
    tau_n: float
    eta_n: float
    kappa: float

    @property
    def threshold(self) -> float:
        return self.kappa * self.tau_n


def derive_tuning(n: int, B: float, kappa0: float, sup_f: float) -> TuningParams:
    """Tuning parameters at sample size n (natural logarithms throughout)."""
    if n < 100:
        raise ValueError(f"need n >= 100 samples, got {n}")
    if not B > 1.0:
        raise ValueError(f"B must be > 1, got {B}")
    if kappa0 < 0.0 or sup_f <= 0.0:
        raise ValueError("kappa0 must be >= 0 and sup_f positive")
    ratio = math.sqrt(n / math.log(n))
    return TuningParams(
        n=int(n),
        B=float(B),
        kappa0=float(kappa0),
        sup_f=float(sup_f),
        J_n=round(math.log(ratio) / math.log(B)),
        K_n=round(ratio),
        tau_n=math.sqrt(math.log(n) / n),
        eta_n=float(n) ** -0.75,
        kappa=kappa0 * math.sqrt(0.107) * sup_f,
    )


def estimator_frame(
    tuning: TuningParams, s: int = 3, J0: int | None = None
) -> tuple[FrameParams, Partition]:
    """Frame and partition for an estimation run: levels J0 .. J_n at eta_n."""
    params = FrameParams(s=s, B=tuning.B, eta=tuning.eta_n, J0=J0)
    return params, build_partition(params, tuning.J_n)


def empirical_fourier(angles: np.ndarray, k_max: int) -> np.ndarray:
    """mean_i e^{-ik X_i} for k = -k_max .. k_max (the empirical a_k)."""
    if angles.size == 0:
        raise ValueError("empty sample set")
    ks = np.arange(-k_max, k_max + 1)
    acc = np.zeros(ks.size, dtype=complex)
    for start in range(0, angles.size, _FOURIER_CHUNK):
        chunk = angles[start : start + _FOURIER_CHUNK]
        acc += np.exp(-1j * np.outer(ks, chunk)).sum(axis=1)
    return acc / angles.size


def empirical_coefficients(
    params: FrameParams,
    partition: Partition,
    samples: SampleSet,
    tuning: TuningParams,
) -> CoefficientTable:
    """Empirical coefficients (1/n) sum_i conj(psi_jq;K_n(X_i)) per atom.

    Computed through the empirical Fourier means, which is the same sum
    reorganized frequency-side; deterministic given the samples.
    """
    K = tuning.K_n
    ahat = empirical_fourier(samples.angles, K)
    values: dict[int, np.ndarray] = {}
    for j in partition.levels:
        if j > tuning.J_n:
            continue
        w = _level_weights(params, j, K)
        values[j] = _analyze_level(w * ahat, K, partition.count(j))
    return CoefficientTable(
        params=params,
        kind="empirical",
        values=values,
        cutoffs={j: K for j in values},
    )


@dataclass
class EstimateResult:
    """Thresholded density estimate with its survivor bookkeeping."""

    density: GridFunction
    surviving: dict[int, int]
    coefficients: CoefficientTable
    tuning: TuningParams
    imag_residual: float
    clipped: bool

    def total_survivors(self) -> int:
        return sum(self.surviving.values())


def threshold_and_synthesize(
    params: FrameParams,
    partition: Partition,
    empirical: CoefficientTable,
    tuning: TuningParams,
    M: int | None = None,
    clip: bool = True,
) -> EstimateResult:
    """Keep atoms with |beta-hat| >= kappa tau_n, synthesize, add the mean.

    The synthesized part is divided by Lambda_{B,s}; with clip=True the
    estimate is floored at zero and renormalized to unit mass.
    """
    if any(k != tuning.K_n for k in empirical.cutoffs.values()):
        raise ValueError("coefficient table cut-off disagrees with tuning K_n")
    thr = tuning.threshold
    surviving: dict[int, int] = {}
    masked: dict[int, np.ndarray] = {}
    for j in sorted(empirical.values):
        vals = empirical.values[j]
        keep = np.abs(vals) >= thr
        surviving[j] = int(keep.sum())
        masked[j] = np.where(keep, vals, 0.0)
    masked_table = CoefficientTable(
        params=params, kind="empirical", values=masked, cutoffs=dict(empirical.cutoffs)
    )
    k_max, spec = synthesis_spectrum(params, partition, masked_table, tuning.J_n, K=tuning.K_n)
    M = M if M is not None else grid_size_for(tuning.K_n)
    synth = spectrum_to_grid(spec, k_max, M).values / params.frame_constant
    imag_residual = float(np.max(np.abs(synth.imag))) if synth.size else 0.0
    density = 1.0 + synth.real
    if clip:
        density = np.maximum(density, 0.0)
        mass = density.mean()
        if mass > 0.0:
            density = density / mass
    return EstimateResult(
        density=GridFunction(density),
        surviving=surviving,
        coefficients=empirical,
        tuning=tuning,
        imag_residual=imag_residual,
        clipped=clip,
    )


def estimate_density(
    model_or_samples,
    n: int | None = None,
    kappa0: float = 0.10,
    seed: int | None = None,
    B: float = 1.4,
    s: int = 3,
    M: int | None = None,
    clip: bool = True,
    sup_f: float | None = None,
) -> EstimateResult:
    """End-to-end single estimate from a model (sampling n points) or a SampleSet."""
    if isinstance(model_or_samples, SampleSet):
        samples = model_or_samples
        if sup_f is None:
            sup_f = pilot_sup(samples.angles)
    else:
        model: DensityModel = model_or_samples
        if n is None or seed is None:
            raise ValueError("sampling from a model needs n and seed")
        samples = sample(model, n, seed)
        if sup_f is None:
            sup_f = model.sup
    tuning = derive_tuning(samples.n, B, kappa0, sup_f)
    params, partition = estimator_frame(tuning, s=s)
    empirical = empirical_coefficients(params, partition, samples, tuning)
    return threshold_and_synthesize(params, partition, empirical, tuning, M=M, clip=clip)


def l2_risk(estimate: EstimateResult, truth: GridFunction) -> float:
    """Squared L2 distance between the estimate and the true density."""
    return l2_distance(estimate.density, truth) ** 2


@dataclass
class RiskReport:
    """Monte-Carlo risk summary across replications."""

    n: int
    kappa0: float
    replications: int
    seed: int
    risks: np.ndarray

    @property
    def mean_risk(self) -> float:
        return float(self.risks.mean())

    @property
    def stderr(self) -> float:
        if self.risks.size < 2:
            return float("nan")
        return float(self.risks.std(ddof=1) / math.sqrt(self.risks.size))


def monte_carlo_risk(
    model: DensityModel,
    n: int,
    kappa0: float,
    replications: int,
    seed: int,
    B: float = 1.4,
    s: int = 3,
    M: int | None = None,
    clip: bool = True,
) -> RiskReport:
    """Replicated L2 risk; replication r draws with seed ^ r."""
    if replications < 1:
        raise ValueError("need at least one replication")
    tuning = derive_tuning(n, B, kappa0, model.sup)
    params, partition = estimator_frame(tuning, s=s)
    M = M if M is not None else grid_size_for(tuning.K_n)
    truth = GridFunction(model.pdf(uniform_grid(M)))
    risks = np.empty(replications)
    for r in range(replications):
        samples = sample(model, n, seed ^ r)
        empirical = empirical_coefficients(params, partition, samples, tuning)
        est = threshold_and_synthesize(params, partition, empirical, tuning, M=M, clip=clip)
        risks[r] = l2_risk(est, truth)
    return RiskReport(n=n, kappa0=kappa0, replications=replications, seed=seed, risks=risks)


def paired_risk_difference(a: RiskReport, b: RiskReport) -> tuple[float, float]:
    """Mean risk difference a - b and its standard error.

    Reports sharing seed and replication count pair up replication-by-
    replication (common random numbers); otherwise the independent
    combination of the two standard errors is used.
    """
    diff = a.mean_risk - b.mean_risk
    if a.seed == b.seed and a.replications == b.replications:
        d = a.risks - b.risks
        return diff, float(d.std(ddof=1) / math.sqrt(d.size))
    return diff, math.hypot(a.stderr, b.stderr)


@dataclass
class ConcentrationReport:
    """Deviation moments of empirical coefficients around the truth."""

    n: int
    levels: tuple[int, ...]
    replications: int
    seed: int
    mean_sq_dev: dict[int, np.ndarray]  # per level, per atom E|beta-hat - beta|^2
    exceed_threshold: float
    exceed_count: int
    atom_count: int

    def level_mean(self, j: int) -> float:
        return float(self.mean_sq_dev[j].mean())

    @property
    def overall_mean(self) -> float:
        return float(np.mean(np.concatenate([v for _, v in sorted(self.mean_sq_dev.items())])))

    @property
    def exceed_rate(self) -> float:
        return self.exceed_count / (self.atom_count * self.replications)

    def fitted_deviation_constant(self) -> float:
        """Smallest c with E|beta-hat - beta|^2 <= c / n across all atoms."""
        return self.n * max(float(v.max()) for v in self.mean_sq_dev.values())


def concentration_check(
    model: DensityModel,
    n: int,
    levels: tuple[int, int],
    replications: int,
    seed: int,
    kappa0: float = 0.10,
    B: float = 1.4,
    s: int = 3,
    yardstick_n: int | None = None,
) -> ConcentrationReport:
    """Empirical E|beta-hat - beta|^2 per atom and threshold exceedances.

    levels is an inclusive (lo, hi) range, every level of which must satisfy
    B^j <= sqrt(n / log n).  The partition and cut-off come from yardstick_n
    (default n), so runs at different sample sizes can share atoms; the
    exceedance threshold kappa * tau_n / 2 always uses n's own tau.
    """
    j_lo, j_hi = levels
    limit = math.sqrt(n / math.log(n))
    if B**j_hi > limit:
        raise ValueError(f"level {j_hi} violates B^j <= sqrt(n/log n) = {limit:.2f}")
    tuning_n = derive_tuning(n, B, kappa0, model.sup)
    yard = derive_tuning(yardstick_n or n, B, kappa0, model.sup)
    params, partition = estimator_frame(yard, s=s)
    if j_lo < params.J0 or j_hi > yard.J_n:
        raise ValueError(f"levels {levels} outside the yardstick range [{params.J0}, {yard.J_n}]")
    lvl = [j for j in partition.levels if j_lo <= j <= j_hi]

    # true truncated coefficients from the model density
    M = grid_size_for(yard.K_n, minimum=1 << 14)
    truth = GridFunction(model.pdf(uniform_grid(M)))
    exact = analyze(params, partition, truth, j_hi, K=yard.K_n)

    acc = {j: np.zeros(partition.count(j)) for j in lvl}
    thr = tuning_n.kappa * tuning_n.tau_n / 2.0
    exceed = 0
    for r in range(replications):
        samples = sample(model, n, seed ^ r)
        ahat = empirical_fourier(samples.angles, yard.K_n)
        for j in lvl:
            w = _level_weights(params, j, yard.K_n)
            bh = _analyze_level(w * ahat, yard.K_n, partition.count(j))
            dev = np.abs(bh - exact.values[j])
            acc[j] += dev**2
            exceed += int((dev > thr).sum())
    mean_sq = {j: acc[j] / replications for j in lvl}
    return ConcentrationReport(
        n=n,
        levels=tuple(lvl),
        replications=replications,
        seed=seed,
        mean_sq_dev=mean_sq,
        exceed_threshold=thr,
        exceed_count=exceed,
        atom_count=sum(partition.count(j) for j in lvl),
    )


def pilot_sup(angles: np.ndarray, bins: int = 64) -> float:
    """Histogram estimate of sup|F| under the unit-mass measure."""
    counts, _ = np.histogram(angles, bins=bins, range=(0.0, 2.0 * math.pi))
    return float(counts.max() * bins / angles.size)


def optimal_bandwidth_level(n: int, B: float, r: float) -> float:
    """Rate-study diagnostic: the level with B^J = (n / log n)^{1/(2r+1)}."""
    return math.log(n / math.log(n)) / ((2.0 * r + 1.0) * math.log(B))
