"""Run configuration: preset defaults, then a flat ``key = value`` file, then flags."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .presets import PRESETS, get_preset
from .reconstruction import SCHEMES


@dataclass(frozen=True)
class RunConfig:
    problem: str
    nx: int
    ny: int
    cfl: float
    tfinal: float
    recon: str = "hweno1"
    pp: bool = False
    out: str | None = None
    threads: int | None = None
    snapshot_every: float | None = None
    diag_every: float | None = None
    v_max: float | None = None

    def validate(self) -> "RunConfig":
        if self.problem not in PRESETS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {', '.join(sorted(PRESETS))}")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError(f"grid sizes must be positive, got {self.nx} x {self.ny}")
        if not (self.cfl > 0 and math.isfinite(self.cfl)):
            raise ConfigError(f"cfl must be positive, got {self.cfl}")
        if not (self.tfinal > 0 and math.isfinite(self.tfinal)):
            raise ConfigError(f"tfinal must be positive, got {self.tfinal}")
        if self.recon not in SCHEMES:
            raise ConfigError(f"recon must be one of {SCHEMES}, got {self.recon!r}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be at least 1")
        for name in ("snapshot_every", "diag_every"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.v_max is not None:
            if self.v_max <= 0:
                raise ConfigError("v_max must be positive")
            if "v_max" not in get_preset(self.problem).params:
                raise ConfigError("v_max only applies to the Vlasov-Poisson problems")
        return self

    def bounds(self):
        p = get_preset(self.problem)
        if self.v_max is None:
            return p.bounds
        return (p.bounds[0], p.bounds[1], -self.v_max, self.v_max)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


_PARSERS = {
    "problem": str, "nx": int, "ny": int, "cfl": float, "tfinal": float, "recon": str, "pp": _bool,
    "out": str, "threads": int, "snapshot_every": _opt_float, "diag_every": _opt_float, "v_max": _opt_float,
}
_ALIASES = {"t_final": "tfinal", "nv": "ny", "snapshot-every": "snapshot_every", "diag-every": "diag_every"}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return out


def defaults_for(problem: str) -> dict:
    try:
        p = get_preset(problem)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    return {"problem": problem, "nx": p.nx, "ny": p.ny, "cfl": p.cfl, "tfinal": p.t_final, "pp": p.pp}


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Resolve a RunConfig with precedence flags > file > preset defaults."""
    from_file = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        from_file = parse_config_text(text, str(p))
    flags = {k: v for k, v in (overrides or {}).items() if v is not None}
    problem = flags.get("problem", from_file.get("problem"))
    if problem is None:
        raise ConfigError("no problem given")
    merged = defaults_for(problem)
    merged.update(from_file)
    merged.update(flags)
    known = {f.name for f in fields(RunConfig)}
    extra = set(merged) - known
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}")
    return RunConfig(**merged).validate()


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    return replace(cfg, **kw).validate()
