"""Flat key-value experiment configuration.

The file format is one `section.key = value` assignment per line, `#`
comments, blank lines ignored.  Lists are comma-separated.  A master seed is
mandatory; there is no wall-clock fallback anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .frame import FrameParams
from .sampling import DensityModel, make_model

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    pass


_DENSITY_FIELDS = {
    "kind": str,
    "center": float,
    "width": float,
    "amplitude": float,
    "concentration": float,
    "exponent_sign": int,
}

_DEFAULTS = {
    "frame.s": "3",
    "frame.B": "1.4",
    "frame.eta": "1e-3",
    "frame.J0": "auto",
    "density.kind": "gaussian_bump",
    "experiment.n_grid": "8000, 12000",
    "experiment.kappa0_grid": "0.10, 0.15, 0.20",
    "experiment.replications": "100",
    "estimator.clip": "true",
    "rate.n_grid": "1000, 2000, 4000, 8000, 16000",
    "rate.kappa0": "0.2",
    "rate.r_values": "1, 2",
    "bias.J_grid": "6, 8, 10",
    "bias.K_grid": "10, 20, 30",
    "tightness.band": "8",
    "tightness.functions": "20",
    "output.dir": "out",
}

_KNOWN_KEYS = set(_DEFAULTS) | {
    "experiment.seed",
    "estimator.kappa0",
    "density.center",
    "density.width",
    "density.amplitude",
    "density.concentration",
    "density.exponent_sign",
}


@dataclass
class ExperimentConfig:
    frame: FrameParams
    density: DensityModel
    n_grid: list[int]
    kappa0_grid: list[float]
    replications: int
    seed: int
    out_dir: str
    clip: bool
    estimate_kappa0: float
    rate_n_grid: list[int]
    rate_kappa0: float
    r_values: list[float]
    bias_J_grid: list[int]
    bias_K_grid: list[int]
    tightness_band: int
    tightness_functions: int
    raw: dict[str, str] = field(default_factory=dict)

    def echo(self) -> str:
        """Deterministic one-line rendering of the effective configuration.

        The output directory is excluded: it does not affect any computed
        number, and runs into different directories must stay byte-identical.
        """
        return " ".join(f"{k}={self.raw[k]}" for k in sorted(self.raw) if k != "output.dir")


def _parse_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _to_int(key: str, v: str) -> int:
    try:
        return int(v)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from exc


def _to_float(key: str, v: str) -> float:
    try:
        x = float(v)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from exc
    if not math.isfinite(x):
        raise ConfigError(f"{key}: value must be finite")
    return x


def _to_list(key: str, v: str, conv) -> list:
    items = [s.strip() for s in v.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"{key}: list must not be empty")
    return [conv(key, s) for s in items]


def _to_bool(key: str, v: str) -> bool:
    low = v.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {v!r}")


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    raw = dict(_DEFAULTS)
    raw.update(_parse_lines(text))
    if overrides:
        raw.update(overrides)

    if "experiment.seed" not in raw:
        raise ConfigError("experiment.seed is required (no wall-clock default)")
    seed = _to_int("experiment.seed", raw["experiment.seed"])
    if seed < 0:
        raise ConfigError("experiment.seed must be nonnegative")

    s = _to_int("frame.s", raw["frame.s"])
    B = _to_float("frame.B", raw["frame.B"])
    eta = _to_float("frame.eta", raw["frame.eta"])
    J0 = None if raw["frame.J0"].lower() == "auto" else _to_int("frame.J0", raw["frame.J0"])
    try:
        frame = FrameParams(s=s, B=B, eta=eta, J0=J0)
    except ValueError as exc:
        raise ConfigError(f"frame: {exc}") from exc

    density_kwargs = {}
    for name, conv in _DENSITY_FIELDS.items():
        key = f"density.{name}"
        if key in raw:
            density_kwargs[name] = raw[key] if conv is str else (
                _to_int(key, raw[key]) if conv is int else _to_float(key, raw[key])
            )
    kind = density_kwargs.pop("kind", "gaussian_bump")
    try:
        density = make_model(kind, **density_kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"density: {exc}") from exc

    kappa0_grid = _to_list("experiment.kappa0_grid", raw["experiment.kappa0_grid"], _to_float)
    n_grid = _to_list("experiment.n_grid", raw["experiment.n_grid"], _to_int)
    replications = _to_int("experiment.replications", raw["experiment.replications"])
    if replications < 1:
        raise ConfigError("experiment.replications must be >= 1")

    cfg = ExperimentConfig(
        frame=frame,
        density=density,
        n_grid=n_grid,
        kappa0_grid=kappa0_grid,
        replications=replications,
        seed=seed,
        out_dir=raw["output.dir"],
        clip=_to_bool("estimator.clip", raw["estimator.clip"]),
        estimate_kappa0=_to_float("estimator.kappa0", raw.get("estimator.kappa0", str(kappa0_grid[0]))),
        rate_n_grid=_to_list("rate.n_grid", raw["rate.n_grid"], _to_int),
        rate_kappa0=_to_float("rate.kappa0", raw["rate.kappa0"]),
        r_values=_to_list("rate.r_values", raw["rate.r_values"], _to_float),
        bias_J_grid=_to_list("bias.J_grid", raw["bias.J_grid"], _to_int),
        bias_K_grid=_to_list("bias.K_grid", raw["bias.K_grid"], _to_int),
        tightness_band=_to_int("tightness.band", raw["tightness.band"]),
        tightness_functions=_to_int("tightness.functions", raw["tightness.functions"]),
        raw=raw,
    )
    if cfg.tightness_band < 1 or cfg.tightness_functions < 1:
        raise ConfigError("tightness.band and tightness.functions must be >= 1")
    return cfg


def load_config(path: str | Path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text, overrides)
