"""Error norms, preset runs and grid-refinement studies."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rkei
from .integrator import StepConfig
from .mesh import MomentField, basis, gauss_legendre_unit, project_initial
from .presets import ProblemPreset
from .reconstruction import ReconConfig, recon_field

ERROR_GAUSS = 3


def step_config(scheme: str = "hweno1", pp: bool = False, cfl: float | None = None) -> StepConfig:
    """Stepping options; without ``cfl`` the substep count follows each step's Courant number."""
    n_sub = None if cfl is None else max(1, math.ceil(cfl))
    return StepConfig(recon=ReconConfig(scheme=scheme), pp=pp, n_sub=n_sub)


def cell_values(mf: MomentField, recon: ReconConfig = ReconConfig(), n: int = ERROR_GAUSS):
    """Reconstructed H at n x n Gauss points of every cell, shape (nx, ny, n, n)."""
    t, w = gauss_legendre_unit(n)
    rf = recon_field(mf, recon)
    B = basis(t[:, None] + 0 * t[None, :], 0 * t[:, None] + t[None, :], 10)
    return np.einsum("abl,ijl->ijab", B, rf.coef), w[:, None] * w[None, :]


def l2_error_exact(mf: MomentField, exact, t: float, recon: ReconConfig = ReconConfig()) -> float:
    """Area-normalized L2 distance between the reconstruction and exact(x, y, t)."""
    g = mf.grid
    vals, ww = cell_values(mf, recon)
    tq, _ = gauss_legendre_unit(ERROR_GAUSS)
    X = g.x_centers()[:, None, None, None] + tq[None, None, :, None] * g.dx
    Y = g.y_centers()[None, :, None, None] + tq[None, None, None, :] * g.dy
    diff = vals - exact(X, Y, t)
    return math.sqrt(float(np.einsum("ijab,ab->", diff * diff, ww)) * g.dx * g.dy / g.area)


def l2_error_reference(coarse: MomentField, fine: MomentField, recon: ReconConfig = ReconConfig()) -> float:
    """L2 distance to a finer run, with the fine reconstruction sampled at coarse Gauss points."""
    gc, gf = coarse.grid, fine.grid
    rx, ry = gf.nx // gc.nx, gf.ny // gc.ny
    if rx * gc.nx != gf.nx or ry * gc.ny != gf.ny or rx < 1 or ry < 1:
        raise ValueError("the reference grid must refine the coarse grid by integer factors")
    vals, ww = cell_values(coarse, recon)
    tq, _ = gauss_legendre_unit(ERROR_GAUSS)
    fine_coef = recon_field(fine, recon).coef

    def locate(r, n):
        s = (tq + 0.5) * r
        k = np.minimum(np.floor(s).astype(int), r - 1)
        return (np.arange(n)[:, None] * r + k[None, :]), s - k - 0.5

    ci, mu = locate(rx, gc.nx)
    cj, nu = locate(ry, gc.ny)
    B = basis(mu[:, None] + 0 * nu[None, :], 0 * mu[:, None] + nu[None, :], 10)  # (3, 3, 10)
    ref = np.einsum("abl,ijabl->ijab", B,
                    fine_coef[ci[:, None, :, None], cj[None, :, None, :]])
    diff = vals - ref
    return math.sqrt(float(np.einsum("ijab,ab->", diff * diff, ww)) * gc.dx * gc.dy / gc.area)


def observed_orders(errors, ratio: float = 2.0) -> list:
    """log(e_coarse / e_fine) / log(ratio); the first entry is None."""
    out = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(math.log(a / b) / math.log(ratio) if a > 0 and b > 0 else float("nan"))
    return out


def run_preset(preset: ProblemPreset, nx: int, ny: int | None = None, *, t_final: float | None = None,
               cfl: float | None = None, scheme: str = "hweno1", pp: bool | None = None, bounds=None,
               dt_fixed: float | None = None, **kw) -> rkei.RunResult:
    grid = preset.grid(nx, ny or nx, bounds)
    cfl = preset.cfl if cfl is None else cfl
    pp = preset.pp if pp is None else pp
    mf = project_initial(grid, preset.initial)
    cfg = step_config(scheme, pp)
    return rkei.run(mf, preset.model(grid), preset.t_final if t_final is None else t_final, cfl, cfg,
                    dt_fixed=dt_fixed, **kw)


@dataclass(frozen=True)
class ConvergenceRow:
    mesh: str
    error: float
    order: float | None


def convergence_study(preset: ProblemPreset, sizes, scheme: str = "hweno1", *, t_final=None, cfl=None,
                      pp=None, reference_size=None, aspect: int = 1, bounds=None) -> list:
    """Errors and orders on n x (aspect n) grids against the exact solution or a finer run."""
    t_final = preset.t_final if t_final is None else t_final
    recon = ReconConfig(scheme=scheme)
    opts = dict(t_final=t_final, cfl=cfl, scheme=scheme, pp=pp, bounds=bounds)
    ref = None
    if preset.exact is None:
        if reference_size is None:
            reference_size = 2 * max(sizes)
        ref = run_preset(preset, reference_size, aspect * reference_size, **opts).state
    errors = []
    for n in sizes:
        state = run_preset(preset, n, aspect * n, **opts).state
        if ref is None:
            errors.append(l2_error_exact(state, preset.exact, t_final, recon))
        else:
            errors.append(l2_error_reference(state, ref, recon))
    orders = observed_orders(errors)
    return [ConvergenceRow(f"{n}x{aspect * n}", e, o) for n, e, o in zip(sizes, errors, orders)]


def format_table(rows) -> str:
    lines = [f"{'mesh':>12}  {'L2 error':>12}  {'order':>6}"]
    for r in rows:
        order = "-" if r.order is None else f"{r.order:6.2f}"
        lines.append(f"{r.mesh:>12}  {r.error:12.3e}  {order:>6}")
    return "\n".join(lines) + "\n"


def write_table_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mesh", "l2_error", "order"])
        for r in rows:
            w.writerow([r.mesh, repr(r.error), "" if r.order is None else repr(r.order)])


def read_table_csv(path) -> list:
    rows = []
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["mesh", "l2_error", "order"]:
            raise ValueError(f"unexpected convergence table header {header}")
        for mesh, err, order in reader:
            rows.append(ConvergenceRow(mesh, float(err), float(order) if order else None))
    return rows
