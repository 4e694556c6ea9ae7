"""Fourth-order Runge-Kutta exponential integrator over frozen-velocity SL steps,
the outer time loop and conservation diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fields as fs
from .errors import NumericalFailure, SLHwenoError
from .integrator import StepConfig, sl_step
from .mesh import Grid, MomentField, gauss_legendre_unit
from .tracing import VelocityField

log = logging.getLogger(__name__)

ENTROPY_FLOOR = 1e-14


# ---------------------------------------------------------------- models

class LinearModel:
    """Transport by a prescribed (possibly time-dependent) velocity.

    ``speed_time`` pins the CFL speed sampling to one instant, for fields whose
    peak over the whole run is reached there.
    """

    kind = "linear"

    def __init__(self, vf: VelocityField, speed_time: float | None = None):
        self.vf = vf
        self.speed_time = speed_time

    def max_speeds(self, mf: MomentField, t: float, state=None):
        return self.vf.max_speeds(mf.grid, t if self.speed_time is None else self.speed_time)


class UniformModel:
    """State-independent constant velocity, run through the RKEI stages."""

    kind = "uniform"

    def __init__(self, a: float, b: float):
        self.ab = (float(a), float(b))

    def state(self, mf):
        return self.ab

    def velocity(self, terms) -> VelocityField:
        s = sum(c for c, _ in terms)
        return VelocityField.uniform(s * self.ab[0], s * self.ab[1])

    def max_speeds(self, mf, t, state=None):
        return abs(self.ab[0]), abs(self.ab[1])


class VlasovPoissonModel:
    """f_t + v f_x + E f_v = 0 on an (x, v) grid."""

    kind = "vp"

    def __init__(self, rho0: float | None = None):
        self.rho0 = rho0

    def state(self, mf):
        return fs.vp_efield(mf, self.rho0)

    def velocity(self, terms) -> VelocityField:
        s = sum(c for c, _ in terms)
        return fs.vp_velocity(fs.combine_1d(terms), s)

    def max_speeds(self, mf, t, state=None):
        g = mf.grid
        E = state if state is not None else self.state(mf)
        vmax = max(abs(g.y_lo), abs(g.y_hi))
        return vmax, float(np.abs(E(g.x_centers())).max())


class _Periodic2DModel:
    def state(self, mf):
        raise NotImplementedError

    def velocity(self, terms) -> VelocityField:
        u = fs.combine([(c, s[0]) for c, s in terms])
        v = fs.combine([(c, s[1]) for c, s in terms])
        return fs.spectral_velocity(u, v)

    def max_speeds(self, mf, t, state=None):
        g = mf.grid
        u, v = state if state is not None else self.state(mf)
        X, Y = np.meshgrid(g.x_centers(), g.y_centers(), indexing="ij")
        return float(np.abs(u(X, Y)).max()), float(np.abs(v(X, Y)).max())


class GuidingCenterModel(_Periodic2DModel):
    kind = "gc"

    def state(self, mf):
        return fs.gc_velocity(mf)


class EulerModel(_Periodic2DModel):
    kind = "euler"

    def state(self, mf):
        return fs.euler_velocity(mf)


# ---------------------------------------------------------------- stepping

def rkei_step(mf: MomentField, model, dt: float, cfg: StepConfig = StepConfig(), v1=None) -> MomentField:
    """One step of the five-stage commutator-free composition."""
    def sl(u, terms):
        return sl_step(u, model.velocity(terms), dt, cfg)

    V1 = model.state(mf) if v1 is None else v1
    u2 = sl(mf, [(0.5, V1)])
    V2 = model.state(u2)
    u3 = sl(mf, [(0.5, V2)])
    V3 = model.state(u3)
    u4 = sl(u2, [(-0.5, V1), (1.0, V3)])
    V4 = model.state(u4)
    half = sl(mf, [(0.25, V1), (1 / 6, V2), (1 / 6, V3), (-1 / 12, V4)])
    return sl(half, [(-1 / 12, V1), (1 / 6, V2), (1 / 6, V3), (0.25, V4)])


def courant_rate(grid: Grid, speeds) -> float:
    return speeds[0] / grid.dx + speeds[1] / grid.dy


def cfl_dt(grid: Grid, speeds, cfl: float) -> float:
    rate = courant_rate(grid, speeds)
    return math.inf if rate == 0 else cfl / rate


def substeps(grid: Grid, speeds, dt: float) -> int:
    """One RK4 substep per unit of Courant number, at least one."""
    return max(1, math.ceil(dt * courant_rate(grid, speeds) * (1 - 1e-12)))


# ---------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    mass: float
    l1: float
    l2: float
    energy: float
    extra: float
    min_avg: float

    def row(self) -> str:
        return ",".join(f"{v:.17g}" for v in (self.time, self.mass, self.l1, self.l2,
                                               self.energy, self.extra, self.min_avg))


CSV_HEADER = "time,mass,l1,l2,energy,extra,min_avg"


def _p1_at_gauss(mf: MomentField, n: int = 3):
    t, w = gauss_legendre_unit(n)
    vals = (mf.ubar[..., None, None] + 12 * mf.vbar[..., None, None] * t[:, None]
            + 12 * mf.wbar[..., None, None] * t[None, :])
    return vals, w[:, None] * w[None, :]


def diagnostics(mf: MomentField, model, t: float = 0.0) -> DiagnosticsRecord:
    """mass, L1, L2 of the P1 solution and the model's energy and entropy or enstrophy.

    ``extra`` is the entropy for Vlasov-Poisson, the enstrophy for the 2-D
    models and 0 for linear transport (whose ``energy`` is also 0).
    """
    g = mf.grid
    area = g.dx * g.dy
    vals, ww = _p1_at_gauss(mf)
    mass = float(mf.ubar.sum() * area)
    l1 = float(np.einsum("ijab,ab->", np.abs(vals), ww) * area)
    l2sq = float(np.einsum("ijab,ab->", vals * vals, ww) * area)
    energy = 0.0
    extra = 0.0
    kind = getattr(model, "kind", "linear")
    if kind == "vp":
        vj = g.y_centers()[None, :]
        kinetic = 0.5 * area * float(np.sum(mf.ubar * (vj ** 2 + g.dy ** 2 / 12) + 2 * vj * g.dy * mf.wbar))
        E = model.state(mf)
        energy = kinetic + 0.5 * E.l2_squared()
        f = np.maximum(vals, 0.0)
        extra = -float(np.einsum("ijab,ab->", f * np.log(f + ENTROPY_FLOOR), ww) * area)
    elif kind in ("gc", "euler"):
        u, v = model.state(mf)
        energy = 0.5 * (u.l2_squared() + v.l2_squared())
        extra = l2sq
    return DiagnosticsRecord(float(t), mass, l1, math.sqrt(l2sq), energy, extra, float(mf.ubar.min()))


# ---------------------------------------------------------------- snapshots

def write_snapshot(path, mf: MomentField, t: float):
    """Little-endian: int32 nx, ny; float64 x_lo, x_hi, y_lo, y_hi, time; float64 ubar[nx][ny]."""
    g = mf.grid
    with open(path, "wb") as fh:
        fh.write(np.array([g.nx, g.ny], dtype="<i4").tobytes())
        fh.write(np.array([g.x_lo, g.x_hi, g.y_lo, g.y_hi, t], dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(mf.ubar, dtype="<f8").tobytes())


def read_snapshot(path):
    raw = Path(path).read_bytes()
    nx, ny = np.frombuffer(raw[:8], dtype="<i4")
    x_lo, x_hi, y_lo, y_hi, t = np.frombuffer(raw[8:48], dtype="<f8")
    ubar = np.frombuffer(raw[48:], dtype="<f8").reshape(int(nx), int(ny)).copy()
    return {"nx": int(nx), "ny": int(ny), "bounds": (x_lo, x_hi, y_lo, y_hi), "time": float(t), "ubar": ubar}


# ---------------------------------------------------------------- time loop

@dataclass
class RunResult:
    state: MomentField
    time: float
    steps: int
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)


def run(mf: MomentField, model, t_final: float, cfl: float, cfg: StepConfig = StepConfig(),
        diag_every: float | None = None, snapshot_every: float | None = None, out_dir=None,
        dt_fixed: float | None = None, max_steps: int = 10_000_000) -> RunResult:
    """Advance to ``t_final``; linear models use single SL steps, others the RKEI.

    Diagnostics are recorded at t = 0, after every step when ``diag_every`` is
    0 or at the first step reaching each multiple of ``diag_every``, and at the end.
    """
    if not t_final > 0 or not cfl > 0:
        raise ValueError("t_final and cfl must be positive")
    t = 0.0
    steps = 0
    res = RunResult(mf, t, 0)
    out_dir = Path(out_dir) if out_dir is not None else None
    csv = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv = open(out_dir / "diagnostics.csv", "w")
        csv.write(CSV_HEADER + "\n")

    def record(state, now):
        rec = diagnostics(state, model, now)
        if not all(math.isfinite(v) for v in (rec.mass, rec.l1, rec.l2, rec.energy, rec.extra)):
            raise NumericalFailure(f"non-finite diagnostics at t = {now}")
        res.records.append(rec)
        if csv is not None:
            csv.write(rec.row() + "\n")
            csv.flush()

    def snapshot(state, now):
        if out_dir is None:
            return
        p = out_dir / f"snapshot_{len(res.snapshots):05d}.bin"
        write_snapshot(p, state, now)
        res.snapshots.append(p)

    next_diag = diag_every if diag_every else None
    next_snap = snapshot_every if snapshot_every else None
    good = mf
    try:
        record(mf, t)
        while t < t_final * (1 - 1e-14) and steps < max_steps:
            v1 = None
            if model.kind == "linear":
                speeds = model.max_speeds(mf, t)
            else:
                v1 = model.state(mf)
                speeds = model.max_speeds(mf, t, v1)
            dt = dt_fixed if dt_fixed is not None else cfl_dt(mf.grid, speeds, cfl)
            dt = min(dt, t_final - t)
            step_cfg = cfg if cfg.n_sub is not None else replace(cfg, n_sub=substeps(mf.grid, speeds, dt))
            if model.kind == "linear":
                mf = sl_step(mf, model.vf, dt, step_cfg, t)
            else:
                mf = rkei_step(mf, model, dt, step_cfg, v1)
            t = t + dt if t + dt < t_final * (1 - 1e-14) else t_final
            steps += 1
            if not mf.is_finite():
                raise NumericalFailure(f"non-finite moments after step {steps} (t = {t})")
            good = mf
            if diag_every == 0 or (next_diag is not None and t >= next_diag * (1 - 1e-12)):
                if t < t_final:
                    record(mf, t)
                while next_diag is not None and next_diag <= t * (1 + 1e-12):
                    next_diag += diag_every
            if next_snap is not None and t >= next_snap * (1 - 1e-12) and t < t_final:
                snapshot(mf, t)
                while next_snap <= t * (1 + 1e-12):
                    next_snap += snapshot_every
        record(mf, t)
        snapshot(mf, t)
    except (SLHwenoError, FloatingPointError):
        snapshot(good, t)
        raise
    finally:
        if csv is not None:
            csv.close()
    res.state, res.time, res.steps = mf, t, steps
    return res
