"""Run configuration and verification reports.

The config file is a flat ``key = value`` text document with a fixed
schema; unknown keys are rejected.  Reports serialize to JSON (sorted keys,
so identical runs are byte-identical up to the wall_time field) or to CSV
with 17-significant-digit floats.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from typing import Optional

from .sobolev import SobolevParams

__all__ = [
    "ConfigError",
    "DEFAULT_TOLERANCES",
    "RunConfig",
    "CheckResult",
    "VerificationReport",
]


class ConfigError(ValueError):
    """Malformed or out-of-schema run configuration."""


DEFAULT_TOLERANCES = {
    "multiplier_identity": 1e-12,
    "norm_spread": 1.01,
    "theta_ratio_spread": 1.02,
    "theta_multiplier_error": 1e-10,
    "holder_violations": 0.0,
    "presymplectic": 1e-12,
    "bracket_skew": 1e-10,
    "jacobi_floor": 1e-6,
    "jacobi_negative_factor": 10.0,
    "nemytskii_slack": 1e-9,
    "rhs_relative": 1e-8,
    "magri": 1e-8,
    "casimir_drift": 1e-10,
    "energy_drift": 1e-6,
    "nls_l2_drift": 1e-8,
    "ch_roundtrip": 1e-12,
    "hessian_asymmetry": 1e-5,
    "dh_integral": 1e-12,
}

_SCALAR_SCHEMA = {
    "grid_size": int,
    "s": float,
    "p": float,
    "seed": int,
    "output_format": str,
    "output_path": str,
    "adversarial": bool,
}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    grid_size: int = 256
    s: float = 0.5
    p: float = 2.0
    seed: int = 42
    output_format: str = "json"
    output_path: Optional[str] = None
    adversarial: bool = False
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def __post_init__(self):
        if self.grid_size < 8 or self.grid_size % 2 != 0:
            raise ConfigError(f"grid_size must be even and >= 8, got {self.grid_size}")
        if not 0.0 < self.s <= 0.5:
            raise ConfigError(f"s must lie in (0, 1/2], got {self.s}")
        if not 1.0 < self.p < float("inf"):
            raise ConfigError(f"p must lie in (1, inf), got {self.p}")
        if self.output_format not in ("json", "csv"):
            raise ConfigError(f"output_format must be json or csv, got {self.output_format!r}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")

    @property
    def sobolev(self) -> SobolevParams:
        return SobolevParams(self.s, self.p)

    def tolerance(self, name: str) -> float:
        return self.tolerances[name]

    # -- flat key=value round trip ------------------------------------------

    def to_text(self) -> str:
        lines = [
            f"grid_size = {self.grid_size}",
            f"s = {self.s:.17g}",
            f"p = {self.p:.17g}",
            f"seed = {self.seed}",
            f"output_format = {self.output_format}",
            f"adversarial = {str(self.adversarial).lower()}",
        ]
        if self.output_path is not None:
            lines.append(f"output_path = {self.output_path}")
        for k in sorted(self.tolerances):
            lines.append(f"tolerance.{k} = {self.tolerances[k]:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        kwargs = {}
        tolerances = dict(DEFAULT_TOLERANCES)
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key.startswith("tolerance."):
                tname = key[len("tolerance."):]
                if tname not in DEFAULT_TOLERANCES:
                    raise ConfigError(f"line {lineno}: unknown tolerance {tname!r}")
                tolerances[tname] = float(value)
                continue
            if key not in _SCALAR_SCHEMA:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            typ = _SCALAR_SCHEMA[key]
            try:
                kwargs[key] = _parse_bool(value) if typ is bool else typ(value)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from exc
        return cls(tolerances=tolerances, **kwargs)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())


@dataclass
class CheckResult:
    name: str
    measured: float
    threshold: float
    passed: bool


@dataclass
class VerificationReport:
    suite: str
    checks: list
    environment: dict
    wall_time: float = 0.0

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, measured: float, threshold: float,
            compare: str = "<=") -> CheckResult:
        m = float(measured)
        if compare == "<=":
            ok = m <= threshold
        elif compare == "<":
            ok = m < threshold
        elif compare == ">=":
            ok = m >= threshold
        elif compare == ">":
            ok = m > threshold
        elif compare == "==":
            ok = m == threshold
        else:
            raise ValueError(f"unknown comparison {compare!r}")
        check = CheckResult(name=name, measured=m, threshold=float(threshold), passed=bool(ok))
        self.checks.append(check)
        return check

    def to_dict(self, include_wall_time: bool = True) -> dict:
        d = {
            "suite": self.suite,
            "environment": dict(self.environment),
            "overall_pass": self.overall_pass,
            "checks": [asdict(c) for c in self.checks],
        }
        if include_wall_time:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_wall_time), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = ["name,measured,threshold,passed"]
        for c in self.checks:
            lines.append(f"{c.name},{c.measured:.17g},{c.threshold:.17g},{c.passed}")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ConfigError(f"unknown output format {fmt!r}")

    def summary_lines(self) -> list:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            out.append(f"[{status}] {self.suite}/{c.name}: measured={c.measured:.6g} "
                       f"threshold={c.threshold:.6g}")
        return out
