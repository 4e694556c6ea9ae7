"""Command-line entry point: ``slhweno run | converge | stability``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import convergence, stability
from .config import parse_config
from .errors import ConfigError, SLHwenoError
from .mesh import MomentField, project_initial
from .presets import PRESETS, get_preset
from .reconstruction import SCHEMES
from . import rkei

log = logging.getLogger("slhweno")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--problem", choices=sorted(PRESETS))
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--cfl", type=float)
    p.add_argument("--tfinal", type=float)
    p.add_argument("--recon", choices=SCHEMES)
    p.add_argument("--pp", choices=("on", "off"))
    p.add_argument("--v-max", dest="v_max", type=float, help="velocity cut-off for Vlasov-Poisson problems")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads (default: all cores)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="slhweno", description="Conservative semi-Lagrangian HWENO transport solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="advance one problem and write diagnostics and snapshots")
    _common(r)
    r.add_argument("--snapshot-every", dest="snapshot_every", type=float)
    r.add_argument("--diag-every", dest="diag_every", type=float)
    r.add_argument("--section-x", type=float, help="x of the column extract (default: domain middle)")
    r.add_argument("--section-y", type=float, help="y of the row extract (default: domain middle)")

    c = sub.add_parser("converge", help="grid-refinement study")
    _common(c)
    c.add_argument("--sizes", default="20,40,80", help="comma-separated nx values")
    c.add_argument("--aspect", type=int, help="ny / nx (default: the preset's ratio)")
    c.add_argument("--reference", type=int, help="nx of the reference run (problems without exact solution)")

    s = sub.add_parser("stability", help="spectral radius sweep of the linear scheme")
    s.add_argument("--samples", type=int, default=50, help="points per axis")
    s.add_argument("--csv", help="per-(theta1, theta2) slice table")
    s.add_argument("--threads", type=int)
    return ap


def _set_threads(n):
    import numba

    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads must be at least 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _preflight(out) -> Path | None:
    if out is None:
        return None
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {path} is not writable: {exc}") from exc
    return path


def _overrides(args) -> dict:
    keys = ("problem", "nx", "ny", "cfl", "tfinal", "recon", "out", "threads", "v_max",
            "snapshot_every", "diag_every")
    out = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "pp", None) is not None:
        out["pp"] = args.pp == "on"
    return out


def write_sections(out: Path, mf: MomentField, x=None, y=None):
    """Column of ubar at fixed x and row at fixed y, as two-column CSV files."""
    g = mf.grid
    x = 0.5 * (g.x_lo + g.x_hi) if x is None else x
    y = 0.5 * (g.y_lo + g.y_hi) if y is None else y
    i = int(np.clip(np.floor((x - g.x_lo) / g.dx), 0, g.nx - 1))
    j = int(np.clip(np.floor((y - g.y_lo) / g.dy), 0, g.ny - 1))
    np.savetxt(out / "section_x.csv", np.column_stack([g.y_centers(), mf.ubar[i, :]]), delimiter=",",
               header=f"y,ubar at x={g.x_centers()[i]:.17g}", comments="")
    np.savetxt(out / "section_y.csv", np.column_stack([g.x_centers(), mf.ubar[:, j]]), delimiter=",",
               header=f"x,ubar at y={g.y_centers()[j]:.17g}", comments="")


def cmd_run(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    _set_threads(cfg.threads)
    out = _preflight(cfg.out)
    preset = get_preset(cfg.problem)
    grid = preset.grid(cfg.nx, cfg.ny, cfg.bounds())
    mf = project_initial(grid, preset.initial)
    step = convergence.step_config(cfg.recon, cfg.pp)
    log.info("running %s on %dx%d to T=%g (CFL %g, %s, pp %s)", cfg.problem, cfg.nx, cfg.ny, cfg.tfinal,
             cfg.cfl, cfg.recon, "on" if cfg.pp else "off")
    res = rkei.run(mf, preset.model(grid), cfg.tfinal, cfg.cfl, step, diag_every=cfg.diag_every,
                   snapshot_every=cfg.snapshot_every, out_dir=out)
    if out is not None:
        write_sections(out, res.state, args.section_x, args.section_y)
    last = res.records[-1]
    print(f"t={last.time:.6g} steps={res.steps} mass={last.mass:.17g} l2={last.l2:.6e} min={last.min_avg:.3e}")
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    _set_threads(cfg.threads)
    out = _preflight(cfg.out)
    preset = get_preset(cfg.problem)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    if not sizes or min(sizes) < 1:
        raise ConfigError("--sizes needs positive integers")
    aspect = args.aspect or max(1, preset.ny // preset.nx)
    rows = convergence.convergence_study(preset, sizes, cfg.recon, t_final=cfg.tfinal, cfl=cfg.cfl, pp=cfg.pp,
                                         reference_size=args.reference, aspect=aspect, bounds=cfg.bounds())
    text = convergence.format_table(rows)
    print(text, end="")
    if out is not None:
        (out / "convergence.txt").write_text(text)
        convergence.write_table_csv(out / "convergence.csv", rows)
    return EXIT_OK


def cmd_stability(args) -> int:
    _set_threads(args.threads)
    if args.samples < 2:
        raise ConfigError("--samples must be at least 2")
    if args.csv:
        _preflight(Path(args.csv).parent)
    res = stability.sweep_spectral_radius(args.samples)
    t1, t2, x1, x2 = res.argmax
    print(f"max rho = {res.max_rho:.17g} at theta=({t1:.6g}, {t2:.6g}) xi=({x1:.6g}, {x2:.6g})")
    if args.csv:
        stability.write_slices_csv(args.csv, res)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        handler = {"run": cmd_run, "converge": cmd_converge, "stability": cmd_stability}[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"slhweno: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"slhweno: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SLHwenoError, FloatingPointError, ValueError) as exc:
        print(f"slhweno: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
