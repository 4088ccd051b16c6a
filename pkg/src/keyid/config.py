"""Run configuration: `key = value` lines, `#` comments, hard errors on
unknown keys, every field defaulted.  CLI flags override file values."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace

from .errors import ConfigError


@dataclass(frozen=True)
class RunConfig:
    level1: int = 11
    level2: int = 11
    # rectangular verification grid (verify-surface); the default nx is
    # even so the grid avoids x = 0, the density-suppressed geodesic
    # through the zero cusp
    x_min: float = -0.45
    x_max: float = 0.45
    y_min: float = 0.12
    y_max: float = 0.30
    nx: int = 4
    ny: int = 5
    # per-surface sample sizes (verify-product)
    points1: int = 5
    points2: int = 5
    # tolerances
    target: float = 1e-2          # surface residual target
    target_product: float = 2e-2  # product residual target
    tail_eps: float = 1e-6
    quad_rel_tol: float = 1e-9
    h_tol: float = 2e-3           # heat-Laplacian integral budget
    # truncation override: 0 means auto
    radius: float = 0.0
    threads: int = 0              # 0: machine parallelism
    out: str = ""
    figures: bool = True

    def validate(self) -> "RunConfig":
        if self.level1 < 1 or self.level2 < 1:
            raise ConfigError("levels must be positive")
        if not (self.x_min < self.x_max):
            raise ConfigError("x_min must be below x_max")
        if not (0.0 < self.y_min < self.y_max):
            raise ConfigError("need 0 < y_min < y_max")
        if min(self.nx, self.ny, self.points1, self.points2) < 1:
            raise ConfigError("grid counts must be positive")
        for name in ("target", "target_product", "tail_eps", "quad_rel_tol", "h_tol"):
            if not (getattr(self, name) > 0.0):
                raise ConfigError(f"{name} must be positive")
        if self.threads < 0 or self.radius < 0.0:
            raise ConfigError("threads and radius cannot be negative")
        return self

    @property
    def n_threads(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str, line_no: int, col: int):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("non-finite")
            return v
        if ftype == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError("not a boolean")
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})", line_no, col) from exc


def parse_config(path: str) -> RunConfig:
    cfg = RunConfig()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].rstrip()
            if not stripped.strip():
                continue
            if "=" not in stripped:
                col = len(line) - len(line.lstrip()) + 1
                raise ConfigError("expected `key = value`", line_no, col)
            key, _, raw = stripped.partition("=")
            col = line.index(key.strip()[0]) + 1 if key.strip() else 1
            key = key.strip()
            raw = raw.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown key {key!r}", line_no, col)
            cfg = replace(cfg, **{key: _parse_value(key, raw, line_no, col)})
    return cfg.validate()


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    clean = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **clean).validate() if clean else cfg.validate()
