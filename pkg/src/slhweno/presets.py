"""Benchmark problems with their default settings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rkei
from .mesh import PERIODIC, ZERO, Grid
from .tracing import VelocityField


@dataclass(frozen=True)
class ProblemPreset:
    id: str
    bounds: tuple
    bc: tuple
    nx: int
    ny: int
    cfl: float
    t_final: float
    pp: bool
    initial: Callable
    model: Callable  # model(grid) -> model object
    exact: Optional[Callable] = None  # exact(x, y, t)
    params: dict = field(default_factory=dict)
    qualitative: bool = False

    def grid(self, nx: int | None = None, ny: int | None = None, bounds: tuple | None = None) -> Grid:
        b = bounds or self.bounds
        return Grid(*b, nx or self.nx, ny or self.ny, *self.bc)


# ---------------------------------------------------------------- linear transport

def _const_initial(x, y):
    return np.sin(10 * (x + y))


def _const_exact(x, y, t):
    return np.sin(10 * (x + y - 2 * t))


SWIRL_PERIOD = 1.5


def swirl_velocity(period: float = SWIRL_PERIOD) -> VelocityField:
    def g(t):
        return math.cos(math.pi * t / period)

    return VelocityField.analytic(
        lambda x, y, t: -2 * np.pi * np.cos(0.5 * x) ** 2 * np.sin(y) * g(t),
        lambda x, y, t: 2 * np.pi * np.sin(x) * np.cos(0.5 * y) ** 2 * g(t))


BELL_R0 = 0.3 * math.pi
BELL_CENTER = (0.3 * math.pi, 0.0)


def cosine_bell(x, y):
    r = np.sqrt((x - BELL_CENTER[0]) ** 2 + (y - BELL_CENTER[1]) ** 2)
    inside = r < BELL_R0
    return np.where(inside, BELL_R0 * np.cos(np.where(inside, r, 0) * np.pi / (2 * BELL_R0)) ** 6, 0.0)


def _swirl_exact(x, y, t):
    if abs(t - SWIRL_PERIOD) > 1e-12:
        raise ValueError("the swirling flow is only known in closed form at t = 1.5")
    return cosine_bell(x, y)


def rotation_triple(x, y):
    """Slotted disk, cone and smooth hump, mapped from the unit square to [-pi, pi]^2."""
    X = (np.asarray(x) + np.pi) / (2 * np.pi)
    Y = (np.asarray(y) + np.pi) / (2 * np.pi)
    r0 = 0.15
    out = np.zeros(np.broadcast(X, Y).shape)
    d = np.hypot(X - 0.5, Y - 0.75) / r0
    slot = (np.abs(X - 0.5) < 0.025) & (Y < 0.85)
    out = np.where((d <= 1) & ~slot, 1.0, out)
    d = np.hypot(X - 0.5, Y - 0.25) / r0
    out = np.where(d <= 1, 1.0 - d, out)
    d = np.hypot(X - 0.25, Y - 0.5) / r0
    out = np.where(d <= 1, 0.25 * (1 + np.cos(np.pi * np.minimum(d, 1))), out)
    return out


# ---------------------------------------------------------------- Vlasov-Poisson

LANDAU = {"alpha": 0.5, "k": 0.5}
BOT = {"n_p": 9 / (10 * math.sqrt(2 * math.pi)), "n_b": 2 / (10 * math.sqrt(2 * math.pi)),
       "u": 4.5, "v_t": 0.5, "k": 0.3, "eps": 0.04}


def landau_initial(x, v):
    a, k = LANDAU["alpha"], LANDAU["k"]
    return (1 + a * np.cos(k * x)) * np.exp(-0.5 * v * v) / math.sqrt(2 * math.pi)


def bot_initial(x, v):
    p = BOT
    return ((p["n_p"] * np.exp(-0.5 * v * v) + p["n_b"] * np.exp(-((v - p["u"]) ** 2) / (2 * p["v_t"] ** 2)))
            * (1 + p["eps"] * np.cos(p["k"] * x)))


# ---------------------------------------------------------------- guiding centre and Euler

KHI = {"k": 0.5, "eps": 0.015}
SHEAR = {"delta": 0.05, "rho": math.pi / 15}


def khi_initial(x, y):
    return np.sin(y) + KHI["eps"] * np.cos(KHI["k"] * x)


def shear_initial(x, y):
    d, r = SHEAR["delta"], SHEAR["rho"]
    lower = d * np.cos(x) - np.cosh((y - np.pi / 2) / r) ** -2 / r
    upper = d * np.cos(x) + np.cosh((1.5 * np.pi - y) / r) ** -2 / r
    return np.where(y <= np.pi, lower, upper)


def landau_bounds(v_max: float = 2 * math.pi):
    return (0.0, 4 * math.pi, -v_max, v_max)


PRESETS = {
    "const_advection": ProblemPreset(
        "const_advection", (-math.pi, math.pi, -math.pi, math.pi), (PERIODIC, PERIODIC), 80, 80, 10.2, 20.0,
        False, _const_initial, lambda g: rkei.LinearModel(VelocityField.uniform(1.0, 1.0)), _const_exact),
    "swirl_smooth": ProblemPreset(
        "swirl_smooth", (-math.pi, math.pi, -math.pi, math.pi), (ZERO, ZERO), 80, 80, 10.2, SWIRL_PERIOD,
        True, cosine_bell, lambda g: rkei.LinearModel(swirl_velocity(), speed_time=0.0), _swirl_exact,
        {"r0": BELL_R0, "center": BELL_CENTER, "period": SWIRL_PERIOD}),
    "swirl_discontinuous": ProblemPreset(
        "swirl_discontinuous", (-math.pi, math.pi, -math.pi, math.pi), (ZERO, ZERO), 100, 100, 10.2,
        SWIRL_PERIOD, True, rotation_triple, lambda g: rkei.LinearModel(swirl_velocity(), speed_time=0.0), None,
        {"period": SWIRL_PERIOD}, qualitative=True),
    "landau_strong": ProblemPreset(
        "landau_strong", landau_bounds(), (PERIODIC, ZERO), 128, 256, 10.2, 40.0, True, landau_initial,
        lambda g: rkei.VlasovPoissonModel(), None, dict(LANDAU, v_max=2 * math.pi)),
    "bump_on_tail": ProblemPreset(
        "bump_on_tail", (0.0, 20 * math.pi / 3, -13.0, 13.0), (PERIODIC, ZERO), 128, 256, 10.2, 40.0, True,
        bot_initial, lambda g: rkei.VlasovPoissonModel(), None, dict(BOT, v_max=13.0)),
    "kelvin_helmholtz": ProblemPreset(
        "kelvin_helmholtz", (0.0, 4 * math.pi, 0.0, 2 * math.pi), (PERIODIC, PERIODIC), 256, 256, 10.2, 40.0,
        False, khi_initial, lambda g: rkei.GuidingCenterModel(), None, dict(KHI)),
    "shear_flow": ProblemPreset(
        "shear_flow", (0.0, 2 * math.pi, 0.0, 2 * math.pi), (PERIODIC, PERIODIC), 256, 256, 10.2, 8.0,
        False, shear_initial, lambda g: rkei.EulerModel(), None, dict(SHEAR)),
}


def get_preset(name: str) -> ProblemPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PRESETS)}") from None


def preset_table() -> dict:
    """Serializable parameters of every preset (for golden tests and docs)."""
    out = {}
    for k, p in PRESETS.items():
        out[k] = {"bounds": [float(b) for b in p.bounds], "bc": list(p.bc), "nx": p.nx, "ny": p.ny,
                  "cfl": p.cfl, "t_final": p.t_final, "pp": p.pp,
                  "params": {a: (list(b) if isinstance(b, tuple) else b) for a, b in p.params.items()}}
    return out
