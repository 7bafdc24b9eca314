"""Command-line front end: frame diagnostics and simulation tables.

Subcommands: frame-check, estimate, tables, rate, bias.  Every run is driven
by a config file plus optional --out/--seed/--threads overrides, and every
CSV starts with a provenance comment echoing the effective configuration.
Exit code 0 means all internal checks passed; failures name the check.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .estimator import (
    derive_tuning,
    empirical_coefficients,
    estimator_frame,
    monte_carlo_risk,
    threshold_and_synthesize,
)
from .fourier import from_callable, grid_size_for, uniform_grid
from .frame import (
    FrameParams,
    adequate_level_range,
    analyze,
    atom_l1_norm,
    atom_l2_norm_sq,
    besov_level_norms,
    besov_smoothness,
    bias_report,
    build_partition,
    calibrate_bias_constants,
    calibrate_envelope_constant,
    localization_excess,
    tightness_ratio,
    AtomIndex,
    InequalityViolation,
)
from .sampling import sample
from .special import calderon_partial_sums, lambda_Bs, weight_tail_sum

LOCALIZATION_MAX_LEVEL = 12
VALIDATION_GRID = 8192


def _provenance(cfg: ExperimentConfig, command: str) -> str:
    return f"# circneedlets {command} {cfg.echo()}"


def _write_csv(path: Path, provenance: str, header: str, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(provenance + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (np.floating,)):
        return repr(float(x))
    if x is None:
        return "NA"
    return str(x)


class CheckSet:
    """Named pass/fail results; exit code 0 iff everything passed."""

    def __init__(self) -> None:
        self.results: list[tuple[str, bool, str]] = []

    def record(self, name: str, passed: bool, detail: str = "") -> None:
        self.results.append((name, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))

    @property
    def exit_code(self) -> int:
        return 0 if all(ok for _, ok, _ in self.results) else 1

    def rows(self):
        return [(name, ok, detail) for name, ok, detail in self.results]


def _random_band_limited(rng, band: int, M: int = 2048):
    th = uniform_grid(M)
    vals = np.zeros(M)
    for k in range(1, band + 1):
        vals += rng.normal() * np.cos(k * th) + rng.normal() * np.sin(k * th)
    vals *= 0.95 / np.max(np.abs(vals))
    return from_callable(lambda _: 1.0 + vals, M=M)


# ---------------------------------------------------------------------------
# frame-check
# ---------------------------------------------------------------------------


def cmd_frame_check(cfg: ExperimentConfig, out: Path) -> int:
    checks = CheckSet()
    prov = _provenance(cfg, "frame-check")
    p = cfg.frame
    lam = p.frame_constant
    j_top = max(LOCALIZATION_MAX_LEVEL, p.J0 + 1)
    partition = build_partition(p, j_top)

    # arc sums and power sums of the arc lengths
    rows = []
    worst_sum, worst_power = 0.0, 0.0
    for j in partition.levels:
        Q = partition.count(j)
        arc_err = abs(math.fsum(partition.lambdas(j)) - 1.0)
        worst_sum = max(worst_sum, arc_err)
        for pw in (1.5, 2.0, 3.0):
            margin = (Q * (1.0 / Q) ** pw) / (p.eta ** (pw - 1.0) * p.B ** (j * (1.0 - pw)))
            worst_power = max(worst_power, margin)
            rows.append((j, Q, pw, margin))
    _write_csv(out / "lambda_sums.csv", prov, "j,Q,p,lhs_over_rhs", rows)
    checks.record("partition-arc-sums", worst_sum < 1e-12, f"max deviation {worst_sum:.2e}")
    checks.record("arc-power-sums", worst_power <= 1.0 + 1e-12, f"max lhs/rhs {worst_power:.6f}")

    # tightness over seeded random band-limited densities
    rng = np.random.default_rng(cfg.seed)
    fns = [_random_band_limited(rng, cfg.tightness_band) for _ in range(cfg.tightness_functions)]
    j_lo, j_hi = adequate_level_range(p.s, p.B, cfg.tightness_band)
    wide = FrameParams(s=p.s, B=p.B, eta=p.eta, J0=min(j_lo, p.J0))
    wide_part = build_partition(wide, j_hi)
    lo_ratio, hi_ratio = tightness_ratio(wide, wide_part, fns, (wide.J0, j_hi))
    band = (0.95, 1.05) if p.B <= 1.1 else (0.8, 1.2)
    ok = band[0] * lam < lo_ratio <= hi_ratio < band[1] * lam
    _write_csv(
        out / "tightness.csv",
        prov,
        "min_ratio,max_ratio,frame_constant,spread,band_low,band_high",
        [(lo_ratio, hi_ratio, lam, hi_ratio / lo_ratio, band[0], band[1])],
    )
    checks.record(
        "tightness-sandwich",
        ok,
        f"ratios in [{lo_ratio / lam:.6f}, {hi_ratio / lam:.6f}] x frame constant",
    )

    # localization envelope with a calibrated constant
    c_s = calibrate_envelope_constant(p, range(p.J0, j_top + 1))
    th = uniform_grid(VALIDATION_GRID)
    rows = []
    worst = -np.inf
    for j in partition.levels:
        q = int(rng.integers(1, partition.count(j) + 1))
        idx = AtomIndex(j=j, q=q)
        excess = localization_excess(p, partition, idx, th, c_s)
        worst = max(worst, excess)
        rows.append((j, q, excess))
    _write_csv(out / "localization.csv", prov, "j,q,max_excess", rows)
    checks.record("localization-envelope", worst <= 1e-12, f"c_s={c_s:.6f}, max excess {worst:.2e}")

    # norm growth: ||psi||_2^2 / eta stable, ||psi||_1 decaying
    l2_ratios = {j: atom_l2_norm_sq(p, partition, j) / p.eta for j in range(3, j_top + 1)}
    mid = float(np.mean(list(l2_ratios.values())))
    stable = all(0.9 * mid <= v <= 1.1 * mid for v in l2_ratios.values())
    l1 = {j: atom_l1_norm(p, partition, j) for j in range(3, j_top + 1)}
    decaying = all(l1[j] > l1[j + 1] for j in range(3, j_top))
    _write_csv(
        out / "norms.csv",
        prov,
        "j,l2_sq_over_eta,l1",
        [(j, l2_ratios[j], l1[j]) for j in sorted(l2_ratios)],
    )
    checks.record("norm-stability", stable, f"l2^2/eta within [{min(l2_ratios.values()):.4f}, {max(l2_ratios.values()):.4f}], mid {mid:.4f}")
    checks.record("l1-norm-decay", decaying)

    # Calderon partial sums: partition identity and gap comparison vs B=1.05
    rows = []
    gaps_ok = True
    ident_ok = True
    for J0 in (0, 1, 2):
        for t in (0.5, 1.0):
            coarse = calderon_partial_sums(p.s, p.B, J0, t, "coarse", cut="scale")
            fine = calderon_partial_sums(p.s, p.B, J0, t, "fine", cut="scale")
            approx_total = coarse.approximation + fine.approximation
            ident_ok &= abs(approx_total - lam) < 1e-10 * lam
            if p.B > 1.051:
                ref_c = calderon_partial_sums(p.s, 1.05, J0, t, "coarse", cut="scale")
                ref_f = calderon_partial_sums(p.s, 1.05, J0, t, "fine", cut="scale")
                gaps_ok &= ref_c.relative_gap < coarse.relative_gap
                gaps_ok &= ref_f.relative_gap < fine.relative_gap
            rows.append((J0, t, coarse.sum, coarse.relative_gap, fine.sum, fine.relative_gap))
    _write_csv(out / "calderon.csv", prov, "J0,t,coarse_sum,coarse_gap,fine_sum,fine_gap", rows)
    checks.record("calderon-approximation-identity", ident_ok)
    checks.record("calderon-gap-shrinks-toward-B1", gaps_ok)

    # truncation tail bounds
    rows = []
    tails_ok = True
    grid_s = sorted({1, 3, p.s})
    grid_B = sorted({1.1, 1.4, p.B})
    for s_ in grid_s:
        for B_ in grid_B:
            for j in (0, 5, 10):
                for K in (5, 10, 30):
                    tail, bound = weight_tail_sum(s_, B_, j, K)
                    tails_ok &= tail <= bound
                    rows.append((s_, B_, j, K, tail, bound))
    _write_csv(out / "tails.csv", prov, "s,B,j,K,tail,bound", rows)
    checks.record("weight-tail-bounds", tails_ok)

    _write_csv(out / "checks.csv", prov, "check,passed,detail", checks.rows())
    return checks.exit_code


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def cmd_estimate(cfg: ExperimentConfig, out: Path, n: int | None = None, kappa0: float | None = None) -> int:
    prov = _provenance(cfg, "estimate")
    n = n if n is not None else cfg.n_grid[0]
    kappa0 = kappa0 if kappa0 is not None else cfg.estimate_kappa0
    model = cfg.density
    samples = sample(model, n, cfg.seed)
    tuning = derive_tuning(n, cfg.frame.B, kappa0, model.sup)
    params, partition = estimator_frame(tuning, s=cfg.frame.s)
    empirical = empirical_coefficients(params, partition, samples, tuning)
    thresholded = threshold_and_synthesize(params, partition, empirical, tuning, clip=cfg.clip)
    linear_tuning = derive_tuning(n, cfg.frame.B, 0.0, model.sup)
    linear = threshold_and_synthesize(params, partition, empirical, linear_tuning, clip=cfg.clip)

    th = thresholded.density.theta()
    truth = model.pdf(th)
    _write_csv(
        out / "density.csv",
        prov,
        "theta,truth,thresholded,linear",
        zip(th, truth, thresholded.density.values, linear.density.values),
    )
    _write_csv(
        out / "survivors.csv",
        prov,
        "j,Q,surviving",
        [(j, partition.count(j), thresholded.surviving[j]) for j in sorted(thresholded.surviving)],
    )
    print(
        f"estimate: n={n} kappa0={kappa0} survivors={thresholded.total_survivors()}"
        f"/{sum(partition.count(j) for j in thresholded.surviving)}"
    )
    return 0


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


def _survivors_for(cfg: ExperimentConfig, n: int, kappa0: float):
    model = cfg.density
    samples = sample(model, n, cfg.seed)  # replication 0 of the risk loop
    tuning = derive_tuning(n, cfg.frame.B, kappa0, model.sup)
    params, partition = estimator_frame(tuning, s=cfg.frame.s)
    empirical = empirical_coefficients(params, partition, samples, tuning)
    est = threshold_and_synthesize(params, partition, empirical, tuning, clip=cfg.clip)
    counts = {j: partition.count(j) for j in est.surviving}
    return est.surviving, counts


def cmd_tables(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    checks = CheckSet()
    prov = _provenance(cfg, "tables")
    cells = [(n, k0) for n in cfg.n_grid for k0 in cfg.kappa0_grid]

    def run_cell(cell):
        n, k0 = cell
        return monte_carlo_risk(
            cfg.density, n, k0, cfg.replications, cfg.seed, B=cfg.frame.B, s=cfg.frame.s, clip=cfg.clip
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = dict(zip(cells, pool.map(run_cell, cells)))
    else:
        reports = {cell: run_cell(cell) for cell in cells}

    # table 2: risks
    rows = [
        (n, k0, reports[(n, k0)].mean_risk, reports[(n, k0)].stderr, cfg.replications, cfg.seed)
        for (n, k0) in cells
    ]
    _write_csv(out / "table2.csv", prov, "n,kappa0,mean_risk,stderr,replications,seed", rows)

    # table 1: survivor counts of replication 0, one column block per n
    surv: dict[tuple[int, float], dict[int, int]] = {}
    totals: dict[int, dict[int, int]] = {}
    for n in cfg.n_grid:
        for k0 in cfg.kappa0_grid:
            s_counts, q_counts = _survivors_for(cfg, n, k0)
            surv[(n, k0)] = s_counts
            totals[n] = q_counts
    levels = sorted({j for v in surv.values() for j in v})
    header = "j," + ",".join(f"n{n}_k{k0}" for (n, k0) in cells) + "," + ",".join(
        f"Q_n{n}" for n in cfg.n_grid
    )
    rows = []
    for j in levels:
        row = [j]
        row += [surv[(n, k0)].get(j) for (n, k0) in cells]
        row += [totals[n].get(j) for n in cfg.n_grid]
        rows.append(tuple(row))
    _write_csv(out / "table1.csv", prov, header, rows)

    # structural checks
    monotone = True
    for n in cfg.n_grid:
        ordered = sorted(cfg.kappa0_grid)
        for j in levels:
            counts = [surv[(n, k0)].get(j) for k0 in ordered]
            present = [c for c in counts if c is not None]
            monotone &= all(a >= b for a, b in zip(present, present[1:]))
    checks.record("survivors-nonincreasing-in-kappa0", monotone)
    if len(cfg.n_grid) >= 2:
        small, large = min(cfg.n_grid), max(cfg.n_grid)
        deeper = max(surv[(large, cfg.kappa0_grid[0])]) >= max(surv[(small, cfg.kappa0_grid[0])])
        checks.record("levels-deepen-with-n", deeper)
        direction = True
        for k0 in cfg.kappa0_grid:
            direction &= reports[(large, k0)].mean_risk < reports[(small, k0)].mean_risk
        checks.record("risk-decreasing-in-n", direction)

    _write_csv(out / "table_checks.csv", prov, "check,passed,detail", checks.rows())
    return checks.exit_code


# ---------------------------------------------------------------------------
# rate
# ---------------------------------------------------------------------------


def cmd_rate(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    checks = CheckSet()
    prov = _provenance(cfg, "rate")
    if len(cfg.rate_n_grid) < 4:
        raise ConfigError("rate.n_grid needs at least 4 sample sizes")

    def run_n(n):
        return monte_carlo_risk(
            cfg.density, n, cfg.rate_kappa0, cfg.replications, cfg.seed,
            B=cfg.frame.B, s=cfg.frame.s, clip=cfg.clip,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = dict(zip(cfg.rate_n_grid, pool.map(run_n, cfg.rate_n_grid)))
    else:
        reports = {n: run_n(n) for n in cfg.rate_n_grid}

    xs = np.log([n / math.log(n) for n in cfg.rate_n_grid])
    ys = np.log([reports[n].mean_risk for n in cfg.rate_n_grid])
    slope = float(np.polyfit(xs, ys, 1)[0])
    rows = [
        (n, n / math.log(n), reports[n].mean_risk, reports[n].stderr, slope)
        for n in cfg.rate_n_grid
    ]
    _write_csv(out / "rate.csv", prov, "n,n_over_log_n,mean_risk,stderr,fitted_slope", rows)
    _write_csv(
        out / "rate_references.csv",
        prov,
        "r,reference_slope",
        [(r, -2.0 * r / (2.0 * r + 1.0)) for r in cfg.r_values],
    )
    checks.record("rate-slope-negative", slope < 0.0, f"fitted slope {slope:.3f}")
    _write_csv(out / "rate_checks.csv", prov, "check,passed,detail", checks.rows())
    return checks.exit_code


# ---------------------------------------------------------------------------
# bias
# ---------------------------------------------------------------------------


def cmd_bias(cfg: ExperimentConfig, out: Path) -> int:
    checks = CheckSet()
    prov = _provenance(cfg, "bias")
    p = cfg.frame
    model = cfg.density
    k_probe = max(cfg.bias_K_grid)
    M = grid_size_for(
        max(4 * k_probe, int(8 * p.B ** (max(cfg.bias_J_grid) + 10))), minimum=1 << 15
    )
    f = from_callable(model.pdf, M=M)

    # smoothness estimate feeding the bound forms
    part = build_partition(p, LOCALIZATION_MAX_LEVEL)
    norms = besov_level_norms(analyze(p, part, f, LOCALIZATION_MAX_LEVEL), part)
    r_hat = besov_smoothness(norms, p.B)
    constants = calibrate_bias_constants(p, f, cfg.bias_J_grid, cfg.bias_K_grid, r=r_hat)

    rows = []
    table: dict[tuple[int, int], float] = {}
    violations = 0
    for J in cfg.bias_J_grid:
        for K in cfg.bias_K_grid:
            try:
                rep = bias_report(p, f, J, K, constants=constants)
            except InequalityViolation as exc:
                checks.record(f"bias-inequalities-J{J}-K{K}", False, str(exc))
                violations += 1
                continue
            table[(J, K)] = rep.R
            rows.append(
                (J, K, rep.R, rep.I1, rep.I2, rep.I3, *rep.bounds,
                 rep.coeff_tail_margin, rep.atom_tail_margin, rep.spectral_tail)
            )
    _write_csv(
        out / "bias.csv",
        prov,
        "J,K,R,I1,I2,I3,bound1,bound2,bound3,coeff_tail_margin,atom_tail_margin,spectral_tail",
        rows,
    )
    checks.record("bias-inequalities", violations == 0, f"smoothness r_hat={r_hat:.3f}")

    mono = True
    for (J, K), R in table.items():
        for J2, K2 in table:
            if J2 >= J and K2 >= K:
                mono &= table[(J2, K2)] <= R * (1.0 + 1e-9) + 1e-300
    checks.record("bias-monotone-in-J-and-K", mono)
    _write_csv(out / "bias_checks.csv", prov, "check,passed,detail", checks.rows())
    return checks.exit_code


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--config", required=True, help="path to the experiment config file")
    sub.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    sub.add_argument("--seed", type=int, default=None, help="master seed override")
    sub.add_argument("--threads", type=int, default=1, help="worker threads for grid cells")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="circneedlets", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("frame-check", "estimate", "tables", "rate", "bias"):
        sub = subs.add_parser(name)
        _add_common(sub)
        if name == "estimate":
            sub.add_argument("--n", type=int, default=None)
            sub.add_argument("--kappa0", type=float, default=None)
    args = parser.parse_args(argv)

    overrides = {}
    if args.seed is not None:
        overrides["experiment.seed"] = str(args.seed)
    if args.out is not None:
        overrides["output.dir"] = args.out
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(cfg.out_dir)
    try:
        if args.command == "frame-check":
            return cmd_frame_check(cfg, out)
        if args.command == "estimate":
            return cmd_estimate(cfg, out, n=args.n, kappa0=args.kappa0)
        if args.command == "tables":
            return cmd_tables(cfg, out, threads=args.threads)
        if args.command == "rate":
            return cmd_rate(cfg, out, threads=args.threads)
        if args.command == "bias":
            return cmd_bias(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InequalityViolation as exc:
        print(f"inequality violated: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
