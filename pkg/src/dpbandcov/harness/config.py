"""Experiment configuration: parsing, defaults and validation.

A config is a YAML (``.yaml``/``.yml``) or JSON (``.json``) mapping::

    experiment: err_vs_rho        # err_vs_rho | convergence | adaptive_compare | estimator_snapshot
    seed: 2024
    replicates: 20
    output_dir: out/err_vs_rho
    model: {family: power_deterministic, alpha: 1.0, c: 0.5}
    grid:
      n: [500]
      d: [50, 500]
      rho: [0.1, 0.5, 1, 5, 10, inf]
      alpha: [1.0]                # alpha assumed by the non-adaptive estimator
      k: auto                     # or a list of explicit block sizes
    estimators: [tridiagonal]     # tridiagonal | adaptive | naive

Optional keys: ``L`` (10), ``L1`` (5), ``c0`` (0.25), ``k0`` (``auto`` =
``ceil(ln n)`` clamped to ``d``), ``L2`` (10), ``norm`` (``operator``),
``block_mode`` (``experiment``), ``timing`` (true). ``convergence`` also
needs ``regime: {d_exponent, d_scale, rho_exponent, rho_scale}`` giving
``d = round(d_scale n^d_exponent)`` and ``rho = rho_scale n^rho_exponent``;
its ``grid.d`` and ``grid.rho`` are then ignored. ``inf`` (or YAML
``.inf``) means no privacy.

Every validation failure raises :class:`~dpbandcov.errors.ConfigError`
naming the offending field path, e.g. ``grid.rho[2]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import yaml

from ..errors import ConfigError

EXPERIMENTS = ("err_vs_rho", "convergence", "adaptive_compare", "estimator_snapshot")
ESTIMATORS = ("tridiagonal", "adaptive", "naive")
FAMILIES = ("power_deterministic", "power_random", "exponential", "identity")

_TOP_KEYS = {
    "experiment", "seed", "replicates", "output_dir", "model", "grid", "estimators",
    "L", "L1", "c0", "k0", "L2", "norm", "block_mode", "regime", "timing",
}


@dataclass(frozen=True)
class ModelSpec:
    family: str = "power_deterministic"
    alpha: float = 1.0
    c: float = 0.5
    gamma: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class GridSpec:
    n: tuple[int, ...]
    d: tuple[int, ...] = ()
    rho: tuple[float, ...] = ()
    alpha: tuple[float, ...] = (1.0,)
    k: Union[str, tuple[int, ...]] = "auto"


@dataclass(frozen=True)
class RegimeSpec:
    d_exponent: float
    d_scale: float = 1.0
    rho_exponent: float = 0.0
    rho_scale: float = math.inf

    def d_for(self, n: int) -> int:
        return max(1, int(round(self.d_scale * n**self.d_exponent)))

    def rho_for(self, n: int) -> float:
        return math.inf if math.isinf(self.rho_scale) else self.rho_scale * n**self.rho_exponent


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    grid: GridSpec
    model: ModelSpec = field(default_factory=ModelSpec)
    estimators: tuple[str, ...] = ("tridiagonal",)
    replicates: int = 20
    seed: int = 0
    output_dir: str = "out"
    L: float = 10.0
    L1: float = 5.0
    c0: float = 0.25
    k0: Union[str, int] = "auto"
    L2: float = 10.0
    norm: str = "operator"
    block_mode: str = "experiment"
    regime: Optional[RegimeSpec] = None
    timing: bool = True

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def validate(self) -> "ExperimentConfig":
        """Check cross-field constraints; returns ``self`` for chaining."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.model.family not in FAMILIES:
            raise ConfigError("model.family", f"must be one of {FAMILIES}, got {self.model.family!r}")
        if not self.estimators:
            raise ConfigError("estimators", "must list at least one estimator")
        for i, e in enumerate(self.estimators):
            if e not in ESTIMATORS:
                raise ConfigError(f"estimators[{i}]", f"must be one of {ESTIMATORS}, got {e!r}")
        if len(set(self.estimators)) != len(self.estimators):
            raise ConfigError("estimators", "duplicate estimator")
        if self.replicates < 1:
            raise ConfigError("replicates", "must be >= 1")
        if not self.grid.n:
            raise ConfigError("grid.n", "must be nonempty")
        for i, n in enumerate(self.grid.n):
            if n < 2:
                raise ConfigError(f"grid.n[{i}]", "must be >= 2")
        if self.experiment == "convergence":
            if self.regime is None:
                raise ConfigError("regime", "required for the convergence experiment")
            if len(self.grid.n) < 3:
                raise ConfigError("grid.n", "slope fitting needs at least three values")
            if len(self.grid.alpha) != 1:
                raise ConfigError("grid.alpha", "convergence fits one slope; give exactly one alpha")
        else:
            for key in ("d", "rho"):
                if not getattr(self.grid, key):
                    raise ConfigError(f"grid.{key}", "must be nonempty")
            for i, d in enumerate(self.grid.d):
                if d < 1:
                    raise ConfigError(f"grid.d[{i}]", "must be >= 1")
        for i, r in enumerate(self.grid.rho):
            if not r > 0:
                raise ConfigError(f"grid.rho[{i}]", "must be positive (inf allowed)")
        if not self.grid.alpha:
            raise ConfigError("grid.alpha", "must be nonempty")
        for i, a in enumerate(self.grid.alpha):
            if not (a > 0 and math.isfinite(a)):
                raise ConfigError(f"grid.alpha[{i}]", "must be positive and finite")
        if self.grid.k != "auto":
            if not self.grid.k:
                raise ConfigError("grid.k", "must be 'auto' or a nonempty list")
            for i, k in enumerate(self.grid.k):
                if k < 1:
                    raise ConfigError(f"grid.k[{i}]", "must be >= 1")
        for key in ("L", "L1", "L2"):
            v = getattr(self, key)
            if not v > 0:
                raise ConfigError(key, "must be positive")
        if not 0 < self.c0 <= 1:
            raise ConfigError("c0", "must lie in (0, 1]")
        if self.k0 != "auto" and (not isinstance(self.k0, int) or self.k0 < 1):
            raise ConfigError("k0", "must be 'auto' or a positive integer")
        if self.norm not in ("operator", "frobenius"):
            raise ConfigError("norm", "must be 'operator' or 'frobenius'")
        if self.block_mode not in ("theory", "experiment"):
            raise ConfigError("block_mode", "must be 'theory' or 'experiment'")
        if self.experiment == "adaptive_compare" and "adaptive" not in self.estimators:
            raise ConfigError("estimators", "adaptive_compare needs the adaptive estimator")
        if self.experiment == "estimator_snapshot":
            missing = {"tridiagonal", "adaptive"} - set(self.estimators)
            if missing:
                raise ConfigError("estimators", f"estimator_snapshot needs {sorted(missing)}")
        if math.isinf(self.L) and any(math.isfinite(r) for r in self._rhos()):
            raise ConfigError("L", "L = inf is only allowed when every rho is inf")
        return self

    def _rhos(self) -> list[float]:
        if self.experiment == "convergence" and self.regime is not None:
            return [self.regime.rho_for(n) for n in self.grid.n]
        return list(self.grid.rho)


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


def _real(path: str, v: Any, allow_inf: bool = False) -> float:
    if isinstance(v, bool):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity", ".inf"):
            v = math.inf
        else:
            try:
                v = float(s)
            except ValueError:
                raise ConfigError(path, f"expected a number, got {v!r}") from None
    if not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(v).__name__}")
    v = float(v)
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise ConfigError(path, f"must be finite, got {v}")
    return v


def _int(path: str, v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, float) and v.is_integer():
            return int(v)
        raise ConfigError(path, f"expected an integer, got {v!r}")
    return v


def _list(path: str, v: Any, conv) -> tuple:
    if not isinstance(v, (list, tuple)):
        v = [v]
    return tuple(conv(f"{path}[{i}]", x) for i, x in enumerate(v))


def _mapping(path: str, v: Any) -> Mapping:
    if not isinstance(v, Mapping):
        raise ConfigError(path, f"expected a mapping, got {type(v).__name__}")
    return v


def _check_keys(path: str, m: Mapping, allowed: set[str]) -> None:
    for key in m:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(where, "unknown key")


def parse_config(raw: Any) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from a parsed mapping."""
    raw = _mapping("<root>", raw)
    _check_keys("", raw, _TOP_KEYS)
    if "experiment" not in raw:
        raise ConfigError("experiment", "missing required key")
    if "grid" not in raw:
        raise ConfigError("grid", "missing required key")

    m = _mapping("model", raw.get("model", {}))
    _check_keys("model", m, {"family", "alpha", "c", "gamma", "seed"})
    model = ModelSpec(
        family=str(m.get("family", "power_deterministic")),
        alpha=_real("model.alpha", m.get("alpha", 1.0)),
        c=_real("model.c", m.get("c", 0.5)),
        gamma=_real("model.gamma", m.get("gamma", 1.0), allow_inf=True),
        seed=_int("model.seed", m.get("seed", 0)),
    )

    g = _mapping("grid", raw["grid"])
    _check_keys("grid", g, {"n", "d", "rho", "alpha", "k"})
    if "n" not in g:
        raise ConfigError("grid.n", "missing required key")
    k_raw = g.get("k", "auto")
    k = "auto" if k_raw == "auto" else _list("grid.k", k_raw, _int)
    grid = GridSpec(
        n=_list("grid.n", g["n"], _int),
        d=_list("grid.d", g.get("d", []), _int),
        rho=_list("grid.rho", g.get("rho", []), lambda p, v: _real(p, v, allow_inf=True)),
        alpha=_list("grid.alpha", g.get("alpha", [model.alpha]), _real),
        k=k,
    )

    regime = None
    if raw.get("regime") is not None:
        r = _mapping("regime", raw["regime"])
        _check_keys("regime", r, {"d_exponent", "d_scale", "rho_exponent", "rho_scale"})
        if "d_exponent" not in r:
            raise ConfigError("regime.d_exponent", "missing required key")
        regime = RegimeSpec(
            d_exponent=_real("regime.d_exponent", r["d_exponent"]),
            d_scale=_real("regime.d_scale", r.get("d_scale", 1.0)),
            rho_exponent=_real("regime.rho_exponent", r.get("rho_exponent", 0.0)),
            rho_scale=_real("regime.rho_scale", r.get("rho_scale", math.inf), allow_inf=True),
        )
        if not regime.d_scale > 0:
            raise ConfigError("regime.d_scale", "must be positive")
        if not regime.rho_scale > 0:
            raise ConfigError("regime.rho_scale", "must be positive (inf allowed)")

    k0 = raw.get("k0", "auto")
    if k0 != "auto":
        k0 = _int("k0", k0)
    timing = raw.get("timing", True)
    if not isinstance(timing, bool):
        raise ConfigError("timing", "must be true or false")

    cfg = ExperimentConfig(
        experiment=str(raw["experiment"]),
        grid=grid,
        model=model,
        estimators=tuple(str(e) for e in _list("estimators", raw.get("estimators", ["tridiagonal"]), lambda p, v: v)),
        replicates=_int("replicates", raw.get("replicates", 20)),
        seed=_int("seed", raw.get("seed", 0)),
        output_dir=str(raw.get("output_dir", "out")),
        L=_real("L", raw.get("L", 10.0), allow_inf=True),
        L1=_real("L1", raw.get("L1", 5.0)),
        c0=_real("c0", raw.get("c0", 0.25)),
        k0=k0,
        L2=_real("L2", raw.get("L2", 10.0)),
        norm=str(raw.get("norm", "operator")),
        block_mode=str(raw.get("block_mode", "experiment")),
        regime=regime,
        timing=timing,
    )
    return cfg.validate()


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a ``.yaml``/``.yml`` or ``.json`` config file."""
    path = Path(path)
    text = path.read_text()
    suffix = path.suffix.lower()
    try:
        if suffix == ".json":
            raw = json.loads(text)
        elif suffix in (".yaml", ".yml"):
            raw = yaml.safe_load(text)
        else:
            raise ConfigError("<file>", f"unsupported config extension {suffix!r}; use .yaml, .yml or .json")
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError("<file>", f"cannot parse {path.name}: {exc}") from exc
    return parse_config(raw)
