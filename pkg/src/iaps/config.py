"""Scenario configuration: physical and system constants.

Powers are stored in dB/dBm as given by the user and converted to linear
milliwatts through the ``*_mw`` / linear properties.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Iterable


class ConfigError(ValueError):
    """Invalid or unparsable configuration."""


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class ScenarioConfig:
    M: int = 16
    N0: int = 20
    N1: int = 20
    K: int = 8
    R: int = 10
    L: int = 30
    region_m: float = 500.0
    delta: float = 0.5
    p_max_dbm: float = 30.0
    gamma_db: float = 15.0
    pfa: float = 1e-5
    sigma_rcs_db: float = -19.0
    sigma_nc_dbm: float = -100.0
    sigma_ns_db: float = 42.0
    delta_p_frac: float = 0.01
    trials: int = 200
    seed: int = 2024
    # None selects K * sigma_nc^2 / P_max
    rzf_lambda: float | None = None
    zfr_mode: str = "projection"

    def __post_init__(self) -> None:
        for name in ("M", "N0", "N1", "K", "R", "L", "trials", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.M < 1 or self.N0 < 1 or self.N1 < 1 or self.L < 1:
            raise ConfigError("antenna and slot counts must be >= 1")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.R < 0:
            raise ConfigError("R must be >= 0")
        if self.K > self.M:
            raise ConfigError(f"K <= M required (K={self.K}, M={self.M})")
        if not self.M < self.N0:
            raise ConfigError(f"M < N0 required (M={self.M}, N0={self.N0})")
        for name in ("region_m", "delta", "p_max_dbm", "gamma_db", "sigma_rcs_db",
                     "sigma_nc_dbm", "sigma_ns_db"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{name} must be a number, got {value!r}")
            # sigma_rcs_db = -inf is the degenerate zero-variance target
            if name == "sigma_rcs_db" and value == -math.inf:
                continue
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite")
        if self.region_m <= 0 or self.delta <= 0:
            raise ConfigError("region_m and delta must be positive")
        if not 0.0 < self.pfa < 1.0:
            raise ConfigError("pfa must lie in (0, 1)")
        if not 0.0 < self.delta_p_frac < 1.0:
            raise ConfigError("delta_p_frac must lie in (0, 1)")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.rzf_lambda is not None and self.rzf_lambda < 0:
            raise ConfigError("rzf_lambda must be nonnegative")
        if self.zfr_mode not in ("projection", "paper-literal"):
            raise ConfigError(f"unknown zfr_mode {self.zfr_mode!r}")

    # linear quantities -----------------------------------------------------

    @property
    def p_max_mw(self) -> float:
        return db_to_lin(self.p_max_dbm)

    @property
    def gamma(self) -> float:
        return db_to_lin(self.gamma_db)

    @property
    def sigma_rcs2(self) -> float:
        return 0.0 if self.sigma_rcs_db == -math.inf else db_to_lin(self.sigma_rcs_db)

    @property
    def sigma_nc2(self) -> float:
        return db_to_lin(self.sigma_nc_dbm)

    @property
    def sigma_ns2(self) -> float:
        return db_to_lin(self.sigma_ns_db)

    @property
    def rzf_reg(self) -> float:
        if self.rzf_lambda is not None:
            return self.rzf_lambda
        return self.K * self.sigma_nc2 / self.p_max_mw

    @property
    def delta_p_mw(self) -> float:
        return self.delta_p_frac * self.p_max_mw

    # serialization -----------------------------------------------------------

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ScenarioConfig.from_dict(data)


def _coerce(name: str, raw: str) -> Any:
    types = {f.name: f.type for f in fields(ScenarioConfig)}
    if name not in types:
        raise ConfigError(f"unknown configuration key {name!r}")
    kind = str(types[name])
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind.startswith("float | None"):
            return None if raw.lower() in ("none", "null", "") else float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def parse_overrides(items: Iterable[str]) -> dict[str, Any]:
    """Parse ``key=value`` strings into typed config overrides."""
    out: dict[str, Any] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        out[key] = _coerce(key, raw.strip())
    return out


def apply_overrides(config: ScenarioConfig, items: Iterable[str]) -> ScenarioConfig:
    changes = parse_overrides(items)
    try:
        return config.replace(**changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
