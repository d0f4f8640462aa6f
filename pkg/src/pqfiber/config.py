"""Run configuration: sectioned key-value files with flag overrides.

Every field has a documented default, so an empty configuration is a valid
run; flags win over file values. The fully resolved configuration is echoed
into the JSON outputs and written back in file form, and re-ingesting that
echo reproduces the run byte-for-byte. No environment variable is consulted
except an output-directory override (PQFIBER_OUT), to keep runs reproducible
from the configuration alone.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .fibering import SolveOptions
from .eigensolver import EigenOptions
from .functionals import ProblemSpec
from .grid import RadialGrid, WeightField, build_grid, sample_weight

__all__ = ["RunConfig", "DEFAULTS", "load_config", "resolved_ini", "OUT_DIR_ENV"]

OUT_DIR_ENV = "PQFIBER_OUT"

# section -> key -> (default, type)
DEFAULTS: dict[str, dict[str, tuple]] = {
    "problem": {
        "p": (2.0, float),
        "q": (4.0, float),
        "dim": (7, int),
        "lambda": (None, float),        # absolute spectral parameter (solve)
        "lambda_ratio": (None, float),  # alternative: multiple of lambda1
        "grad_reg_eps": (1e-8, float),
    },
    "grid": {
        "r_inner": (1.0, float),
        "r_outer": (20.0, float),
        "n_cells": (2000, int),
        "spacing": ("uniform", str),
        "ratio": (1.02, float),
    },
    "weight": {
        "kind": ("power_decay", str),
        "kappa": (1.0, float),
        "alpha": (None, float),  # default p + 1, resolved at load time
    },
    "eigen": {
        "tol": (1e-10, float),
        "max_iter": (50000, int),
    },
    "solve": {
        "tol_energy": (1e-12, float),
        "tol_kkt": (1e-8, float),
        "max_iter": (100000, int),
        "extended_polish": (True, bool),
    },
    "sweep": {
        "k_edge": (6, int),
        "j_far": (15, int),
        "extend": (True, bool),
        "warm_start": (True, bool),
        "tighten_per_rung": (True, bool),
        "max_failures": (0, int),
        "min_range": (1e2, float),
    },
    "verify": {
        "tiny_cells": (4, int),
        "samples_per_angle": (241, int),
    },
    "output": {
        "dir": ("out", str),
    },
    "run": {
        "workers": (0, int),  # 0 = auto
    },
}


@dataclass
class RunConfig:
    """Fully resolved configuration; one flat dataclass mirroring DEFAULTS."""

    values: dict[str, dict[str, object]] = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.values[section][key]

    # -- derived objects -----------------------------------------------------

    def grid(self) -> RadialGrid:
        g = self.values["grid"]
        return build_grid(
            g["r_inner"], g["r_outer"], g["n_cells"], g["spacing"], self.values["problem"]["dim"],
            g["ratio"] if g["spacing"] == "geometric" else None,
        )

    def weight(self, grid: RadialGrid) -> WeightField:
        w = self.values["weight"]
        return sample_weight(
            grid,
            kind=w["kind"],
            kappa=w["kappa"],
            alpha=w["alpha"],
            integrability_p=self.values["problem"]["p"],
        )

    def spec(self, weight: WeightField, lam: float) -> ProblemSpec:
        prob = self.values["problem"]
        return ProblemSpec(
            p=prob["p"],
            q=prob["q"],
            dim_n=prob["dim"],
            lam=float(lam),
            weight=weight,
            grad_reg_eps=prob["grad_reg_eps"],
        )

    def eigen_options(self) -> EigenOptions:
        e = self.values["eigen"]
        return EigenOptions(tol=e["tol"], max_iter=e["max_iter"])

    def solve_options(self) -> SolveOptions:
        s = self.values["solve"]
        return SolveOptions(
            tol_energy=s["tol_energy"],
            tol_kkt=s["tol_kkt"],
            max_iter=s["max_iter"],
            extended_polish=s["extended_polish"],
        )

    def out_dir(self) -> str:
        return os.environ.get(OUT_DIR_ENV) or self.values["output"]["dir"]

    def echo(self) -> dict:
        return {s: dict(kv) for s, kv in self.values.items()}


def _coerce(section: str, key: str, raw: str, typ) -> object:
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {typ.__name__}") from exc


def load_config(path: str | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Build a RunConfig from defaults, an optional file, and overrides.

    overrides maps "section.key" to raw string values (flags win over the
    file). Validation names the offending section.key in every message.
    """
    values = {s: {k: d for k, (d, _) in kv.items()} for s, kv in DEFAULTS.items()}

    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
        for section in parser.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                values[section][key] = _coerce(section, key, raw, DEFAULTS[section][key][1])

    for dotted, raw in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must be section.key")
        section, key = dotted.split(".", 1)
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        values[section][key] = _coerce(section, key, str(raw), DEFAULTS[section][key][1])

    cfg = RunConfig(values=values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    prob = cfg.values["problem"]
    grid = cfg.values["grid"]
    weight = cfg.values["weight"]
    p, q, dim = prob["p"], prob["q"], prob["dim"]
    if dim < 2:
        raise ConfigError(f"problem.dim: spatial dimension must be >= 2, got {dim}")
    if not (1.0 < p < dim):
        raise ConfigError(f"problem.p: p must lie in (1, N) = (1, {dim}), got {p}")
    if not (1.0 < q < dim):
        raise ConfigError(f"problem.q: q must lie in (1, N) = (1, {dim}), got {q}")
    if p == q:
        raise ConfigError("problem.q: p != q is required")
    if prob["grad_reg_eps"] < 0.0:
        raise ConfigError("problem.grad_reg_eps: must be >= 0")
    if prob["lambda"] is not None and prob["lambda_ratio"] is not None:
        raise ConfigError("problem.lambda and problem.lambda_ratio are mutually exclusive")
    if grid["r_outer"] <= grid["r_inner"]:
        raise ConfigError(
            f"grid.r_outer: must exceed r_inner, got r_inner={grid['r_inner']}, r_outer={grid['r_outer']}"
        )
    if grid["r_inner"] <= 0.0:
        raise ConfigError(f"grid.r_inner: must be positive, got {grid['r_inner']}")
    if grid["n_cells"] < 2:
        raise ConfigError(f"grid.n_cells: must be >= 2, got {grid['n_cells']}")
    if grid["spacing"] not in ("uniform", "geometric"):
        raise ConfigError(f"grid.spacing: must be uniform or geometric, got {grid['spacing']!r}")
    if weight["alpha"] is None:
        weight["alpha"] = p + 1.0
    if weight["kind"] == "power_decay" and weight["alpha"] <= p:
        raise ConfigError(f"weight.alpha: alpha > p required, got alpha={weight['alpha']}, p={p}")
    if weight["kappa"] <= 0.0:
        raise ConfigError(f"weight.kappa: must be positive, got {weight['kappa']}")
    sweep = cfg.values["sweep"]
    if sweep["k_edge"] < 0 or sweep["j_far"] < 0:
        raise ConfigError("sweep.k_edge and sweep.j_far must be >= 0")


def resolved_ini(cfg: RunConfig) -> str:
    """The fully resolved configuration in file form; re-ingesting it
    reproduces the run."""
    parser = configparser.ConfigParser()
    for section, kv in cfg.values.items():
        parser.add_section(section)
        for key, val in kv.items():
            if val is None:
                continue
            if isinstance(val, bool):
                parser.set(section, key, "true" if val else "false")
            elif isinstance(val, float):
                parser.set(section, key, f"{val:.17g}")
            else:
                parser.set(section, key, str(val))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
