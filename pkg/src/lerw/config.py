"""Experiment configuration: defaults, JSON config files and CLI overrides."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Optional

EXPERIMENTS = (
    "survival",
    "rho-ratio",
    "sigma-scaling",
    "clt",
    "tau-clt",
    "compare-lew",
    "zeta",
    "z-decay",
    "walk",
    "erase",
)

# alpha = inf (full erasure) only means something for these
INF_ALPHA_OK = ("compare-lew", "erase")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "survival"
    N: int = 1024
    alpha: float = 0.4
    dim: int = 3
    replicas: int = 1000
    master_seed: int = 0
    n_grid: Optional[tuple[int, ...]] = None
    beta_grid: Optional[tuple[float, ...]] = None
    margin_factor: float = 1.0
    workers: int = 1
    out_dir: str = "out"
    # extra steps before the margin for compare-lew; default 32 * N
    path_steps: Optional[int] = None
    zeta: Optional[float] = None
    bootstrap: int = 200
    max_total_steps: int = 4 * 10**9

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["alpha"] = "inf" if math.isinf(self.alpha) else self.alpha
        for key in ("n_grid", "beta_grid"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


_FIELDS = {f.name for f in fields(ExperimentConfig)}


def _as_int(key, value, lo=None, hi=None):
    if isinstance(value, bool):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, str):
        try:
            value = int(value)
        except ValueError:
            raise ConfigError(key, f"expected an integer, got {value!r}") from None
    if not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(key, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(key, f"must be <= {hi}, got {value}")
    return value


def _as_float(key, value, lo=None, strict=False):
    if isinstance(value, bool):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {value!r}") from None
    if not isinstance(value, (int, float)) or math.isnan(value):
        raise ConfigError(key, f"expected a number, got {value!r}")
    value = float(value)
    if lo is not None and (value < lo or (strict and value == lo)):
        raise ConfigError(key, f"must be {'>' if strict else '>='} {lo}, got {value}")
    return value


def _as_list(key, value, conv):
    if isinstance(value, str):
        value = [v for v in value.replace(" ", "").split(",") if v]
    if not isinstance(value, (list, tuple)):
        raise ConfigError(key, f"expected a list, got {value!r}")
    return tuple(conv(f"{key}[{i}]", v) for i, v in enumerate(value))


def _validate(raw: dict[str, Any]) -> ExperimentConfig:
    for key in raw:
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
    v = dict(raw)
    exp = v.get("experiment", ExperimentConfig.experiment)
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}, got {exp!r}")
    if "N" in v:
        v["N"] = _as_int("N", v["N"], lo=1)
    if "alpha" in v:
        a = v["alpha"]
        if isinstance(a, str) and a.strip().lower() in ("inf", "infinity"):
            a = math.inf
        a = _as_float("alpha", a, lo=0.0)
        if math.isinf(a) and exp not in INF_ALPHA_OK:
            raise ConfigError("alpha", f"'inf' is only valid for {', '.join(INF_ALPHA_OK)}")
        v["alpha"] = a
    if "dim" in v:
        v["dim"] = _as_int("dim", v["dim"], lo=1, hi=64)
    if "replicas" in v:
        v["replicas"] = _as_int("replicas", v["replicas"], lo=1)
    if "master_seed" in v:
        v["master_seed"] = _as_int("master_seed", v["master_seed"], lo=0, hi=2**64 - 1)
    if v.get("n_grid") is not None:
        v["n_grid"] = _as_list("n_grid", v["n_grid"], lambda k, x: _as_int(k, x, lo=0))
    if v.get("beta_grid") is not None:
        v["beta_grid"] = _as_list("beta_grid", v["beta_grid"], lambda k, x: _as_float(k, x, lo=0.0))
    if "margin_factor" in v:
        v["margin_factor"] = _as_float("margin_factor", v["margin_factor"], lo=1.0)
    if "workers" in v:
        v["workers"] = _as_int("workers", v["workers"], lo=1, hi=256)
    if "out_dir" in v:
        if not isinstance(v["out_dir"], (str, Path)):
            raise ConfigError("out_dir", f"expected a path, got {v['out_dir']!r}")
        v["out_dir"] = str(v["out_dir"])
    if v.get("path_steps") is not None:
        v["path_steps"] = _as_int("path_steps", v["path_steps"], lo=1)
    if v.get("zeta") is not None:
        v["zeta"] = _as_float("zeta", v["zeta"], lo=0.0)
    if "bootstrap" in v:
        v["bootstrap"] = _as_int("bootstrap", v["bootstrap"], lo=100)
    if "max_total_steps" in v:
        v["max_total_steps"] = _as_int("max_total_steps", v["max_total_steps"], lo=1)
    cfg = ExperimentConfig(**v)
    _cross_check(cfg)
    return cfg


def _cross_check(cfg: ExperimentConfig) -> None:
    if cfg.experiment == "z-decay" and cfg.beta_grid is not None:
        for i, b in enumerate(cfg.beta_grid):
            if b <= cfg.alpha:
                raise ConfigError(f"beta_grid[{i}]", f"must exceed alpha={cfg.alpha}, got {b}")
    if cfg.experiment == "zeta" and cfg.n_grid is not None:
        if len(cfg.n_grid) < 3:
            raise ConfigError("n_grid", f"zeta needs at least 3 grid points, got {len(cfg.n_grid)}")
        if any(b <= a for a, b in zip(cfg.n_grid, cfg.n_grid[1:])) or cfg.n_grid[0] < 1:
            raise ConfigError("n_grid", "zeta grid must be positive and strictly increasing")


def parse_config(text: Optional[str] = None, overrides: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    """Build a validated config from a JSON document and/or flag overrides.

    Precedence is defaults < document < overrides; ``None`` overrides are ignored.
    """
    raw: dict[str, Any] = {}
    if text:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError("<document>", "top level must be an object")
        raw.update(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return _validate(raw)


def load_config(path, overrides: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, overrides)
