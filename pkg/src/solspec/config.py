"""Run configuration: flat key=value files plus command-line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .core import ThetaSequence, is_prime
from .errors import ConfigError
from .lengths import DEFAULT_MAX_ELEMENTS, LengthSpec, default_cap

SCHEMA_VERSION = "1"


def parse_digits(text: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """``"pre|period"`` or just ``"period"``; digits are comma separated."""
    text = text.strip()
    if "|" in text:
        pre, per = text.split("|", 1)
    else:
        pre, per = "", text

    def ints(s):
        s = s.strip()
        return tuple(int(x) for x in s.split(",") if x.strip()) if s else ()

    try:
        return ints(pre), ints(per)
    except ValueError as exc:
        raise ConfigError(f"bad digit stream {text!r}") from exc


def parse_list(text: str, conv=Fraction) -> list:
    try:
        return [conv(x.strip()) for x in str(text).split(",") if x.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad list {text!r}") from exc


@dataclass
class RunConfig:
    p: int = 2
    theta0: str = "0"
    digits: str = "0"
    spec: str | None = None  # per-command default when unset
    radius: str = "4"
    radii: str = "1,2,4,8"
    t: float = 1.0
    j: int = 0
    k: int = 1
    level: int | None = None
    tol: float = 1e-10
    nmax: int | None = None  # summability depth (default 4) or Neumann term cap (default 200)
    gamma: str = "(1, 0)"
    input: str | None = None
    input2: str | None = None
    op: str = "product"
    s: float = 1.0
    q: int = 1
    q_schedule: str = "1,2,3"
    s_schedule: str = "0,1,2,3"
    order: int = 1
    out: str | None = None
    format: str | None = None
    max_elements: int = field(default_factory=default_cap)
    max_dim: int = 5000

    # derived views
    @property
    def theta(self) -> ThetaSequence:
        pre, per = parse_digits(self.digits)
        try:
            return ThetaSequence(Fraction(self.theta0), pre, per, self.p)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc)) from exc

    def length_spec(self, default: str) -> LengthSpec:
        text = self.spec or default
        if ":" not in text and self.level is not None and text in ("restricted", "restricted-base", "z2"):
            text = f"{text}:{self.level}"
        try:
            return LengthSpec.parse(text, self.p)
        except ValueError as exc:
            raise ConfigError(f"bad length spec {text!r}: {exc}") from exc

    def validate(self) -> "RunConfig":
        if not is_prime(self.p):
            raise ConfigError(f"p = {self.p} is not prime")
        self.theta  # checks theta0 range and digits
        for name in ("max_elements", "max_dim", "nmax"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.format not in (None, "json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        return self

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out")
        return d


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str) -> Any:
    typ = _FIELDS[name].type
    raw = raw.strip()
    try:
        if "int" in typ and "None" in typ:
            return None if raw.lower() in ("", "none") else int(raw)
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    if raw.lower() == "none" and "None" in typ:
        return None
    return raw


def load_config_file(path: str | Path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_config(file_values: dict, overrides: dict) -> RunConfig:
    values = dict(file_values)
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**values)
    return cfg.validate()


__all__ = [
    "RunConfig",
    "SCHEMA_VERSION",
    "DEFAULT_MAX_ELEMENTS",
    "build_config",
    "load_config_file",
    "parse_digits",
    "parse_list",
]
