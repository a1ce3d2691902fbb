"""Experiment configuration: a plain ``key = value`` text format.

Values are JSON literals (numbers, strings in double quotes or bare words,
lists in brackets). Blank lines and lines starting with ``#`` are ignored.

Recognised keys and defaults::

    density.family   heavy_polynomial | light_von_mises      (required)
    density.alpha    tail exponent, required for heavy_polynomial, must exceed dim
    density.tau      exponent, required for light_von_mises, > 0
    dim              ambient dimension                         (default 1)
    k                tuple size                                (default 2)
    constraint.kind  connected | betti_cycle | gamma_iso       (default connected)
    constraint.graph path | complete | cycle | star            (gamma_iso only, default path)
    r_n.rule         constant | power | log_power              (default constant)
    r_n.exponent     s for power, p for log_power              (default 0)
    r_n.scale        multiplier                                (default 1)
    n.grid           list of expected sample sizes             (required)
    replications     replications per grid point, >= 1         (default 100)
    seed             master seed, non-negative integer         (default 0)
    mc_samples       Monte Carlo size for limit constants      (default 200000)
    output.dir       directory for outputs                     (default "out")
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .distributions import RadialDensity, heavy_polynomial, light_von_mises
from .errors import ConfigError, ParameterError
from .scaling import RnRule, check_power_band
from .topology import ConstraintH, ConstraintKind, betti_cycle, complete_graph, connected, \
    cycle_graph, gamma_iso, path_graph, star_graph

FAMILIES = ("heavy_polynomial", "light_von_mises")
GRAPHS = {"path": path_graph, "complete": complete_graph, "cycle": cycle_graph,
          "star": lambda k: star_graph(k - 1)}

# config key -> dataclass attribute
KEYS = {
    "density.family": "family",
    "density.alpha": "alpha",
    "density.tau": "tau",
    "dim": "dim",
    "k": "k",
    "constraint.kind": "constraint_kind",
    "constraint.graph": "constraint_graph",
    "r_n.rule": "rn_rule",
    "r_n.exponent": "rn_exponent",
    "r_n.scale": "rn_scale",
    "n.grid": "n_grid",
    "replications": "replications",
    "seed": "seed",
    "mc_samples": "mc_samples",
    "output.dir": "output_dir",
}
REQUIRED = ("density.family", "n.grid")


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    n_grid: tuple[float, ...]
    alpha: float | None = None
    tau: float | None = None
    dim: int = 1
    k: int = 2
    constraint_kind: str = "connected"
    constraint_graph: str = "path"
    rn_rule: str = "constant"
    rn_exponent: float = 0.0
    rn_scale: float = 1.0
    replications: int = 100
    seed: int = 0
    mc_samples: int = 200_000
    output_dir: str = "out"
    _lines: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(float(n) for n in self.n_grid))
        self.validate()

    def _fail(self, key: str, message: str):
        raise ConfigError(f"{key}: {message}", line=self._lines.get(key), field=key)

    def validate(self) -> None:
        if self.family not in FAMILIES:
            self._fail("density.family", f"must be one of {', '.join(FAMILIES)}, got {self.family!r}")
        if not isinstance(self.dim, int) or self.dim < 1:
            self._fail("dim", f"must be a positive integer, got {self.dim!r}")
        if not isinstance(self.k, int) or self.k < 1:
            self._fail("k", f"must be a positive integer, got {self.k!r}")
        if self.family == "heavy_polynomial":
            if self.alpha is None:
                self._fail("density.alpha", "required for heavy_polynomial")
            if not self.alpha > self.dim:
                self._fail("density.alpha", f"heavy tails need alpha > dim (alpha={self.alpha}, dim={self.dim})")
            if self.tau is not None:
                self._fail("density.tau", "only valid for light_von_mises")
        else:
            if self.tau is None:
                self._fail("density.tau", "required for light_von_mises")
            if not self.tau > 0:
                self._fail("density.tau", f"must be > 0, got {self.tau}")
            if self.alpha is not None:
                self._fail("density.alpha", "only valid for heavy_polynomial")
        if self.constraint_kind not in [c.value for c in ConstraintKind]:
            self._fail("constraint.kind", f"unknown constraint {self.constraint_kind!r}")
        if self.constraint_graph not in GRAPHS:
            self._fail("constraint.graph", f"must be one of {', '.join(GRAPHS)}")
        try:
            self.constraint()
        except ParameterError as exc:
            self._fail("constraint.kind", str(exc))
        if self.rn_rule not in ("constant", "power", "log_power"):
            self._fail("r_n.rule", f"must be constant, power or log_power, got {self.rn_rule!r}")
        if not self.rn_scale > 0:
            self._fail("r_n.scale", f"must be positive, got {self.rn_scale}")
        if self.rn_rule == "power":
            try:
                check_power_band(self.rn_exponent, self.k, self.dim)
            except ParameterError as exc:
                self._fail("r_n.exponent", str(exc))
        if not self.n_grid or any(not (n > 1 and math.isfinite(n)) for n in self.n_grid):
            self._fail("n.grid", "must be a non-empty list of finite values > 1")
        if not isinstance(self.replications, int) or self.replications < 1:
            self._fail("replications", f"must be an integer >= 1, got {self.replications!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            self._fail("seed", f"must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.mc_samples, int) or self.mc_samples < 2:
            self._fail("mc_samples", f"must be an integer >= 2, got {self.mc_samples!r}")

    # derived objects -----------------------------------------------------------

    def density(self) -> RadialDensity:
        if self.family == "heavy_polynomial":
            return heavy_polynomial(self.alpha, self.dim)
        return light_von_mises(self.tau, self.dim)

    def constraint(self) -> ConstraintH:
        if self.constraint_kind == "connected":
            return connected(self.k)
        if self.constraint_kind == "betti_cycle":
            return betti_cycle(self.k)
        return gamma_iso(GRAPHS[self.constraint_graph](self.k))

    def rn(self) -> RnRule:
        return RnRule(self.rn_rule, self.rn_exponent, self.rn_scale)

    # serialisation -------------------------------------------------------------

    def as_dict(self) -> dict:
        out = {}
        for key, attr in KEYS.items():
            val = getattr(self, attr)
            if val is None:
                continue
            out[key] = list(val) if isinstance(val, tuple) else val
        return out


def _coerce(attr: str, value, key: str, line: int):
    try:
        if attr == "n_grid":
            if not isinstance(value, list):
                raise TypeError("expected a list")
            return tuple(float(v) for v in value)
        if attr in ("dim", "k", "replications", "seed", "mc_samples"):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
                raise TypeError("expected an integer")
            return int(value)
        if attr in ("alpha", "tau", "rn_exponent", "rn_scale"):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError("expected a number")
            return float(value)
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}, got {value!r}", line=line, field=key) from None


def parse_config(text: str) -> ExperimentConfig:
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, rhs = line.partition("=")
        key, rhs = key.strip(), rhs.strip()
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno, field=key)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line=lineno, field=key)
        try:
            value = json.loads(rhs)
        except json.JSONDecodeError:
            value = rhs
        values[key] = _coerce(KEYS[key], value, key, lineno)
        lines[key] = lineno
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", field=key)
    kwargs = {KEYS[k]: v for k, v in values.items()}
    return ExperimentConfig(**kwargs, _lines=lines)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text(encoding="utf-8"))


def serialize_config(config: ExperimentConfig) -> str:
    out = [f"{key} = {json.dumps(val)}" for key, val in config.as_dict().items()]
    return "\n".join(out) + "\n"
