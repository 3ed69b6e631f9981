"""Command-line front-end: ``tropma {degree,approx,measure,solve,calabi-yau,verify}``.

Exit codes: 0 success, 1 failed checks, 2 input errors, 3 convergence failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _exact as ex
from . import clmeasure as cl
from . import io
from . import masolver as ms
from . import plapprox as pl
from .errors import ConvergenceError, InputError, TropmaError
from .green import degree, hessian_bounds
from .periodic import grid_points
from .verify import cmd_verify

log = logging.getLogger("tropma")

COMMANDS = ("degree", "approx", "measure", "solve", "calabi-yau", "verify")


@dataclass
class RunConfig:
    command: str
    green: Path | None = None
    problem: Path | None = None
    n: int = 8
    n_list: tuple[int, ...] = (8, 16, 32)
    grid_n: int | None = None
    tol: float = 1e-9
    seed: int = 0
    out: Path | None = None
    dump_decomposition: Path | None = None
    samples: int = 1000
    bounds_grid: int = 64
    inject: tuple[str, ...] = ()

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        for path in (self.green, self.problem):
            if path is not None and not Path(path).exists():
                raise InputError(f"file not found: {path}")
        if self.command in ("degree", "approx", "measure") and self.green is None:
            raise InputError(f"{self.command} needs --green FILE")
        if self.command in ("solve", "calabi-yau") and self.problem is None:
            raise InputError(f"{self.command} needs --problem FILE")
        if self.n < 1 or any(n < 1 for n in self.n_list):
            raise InputError("N must be >= 1")
        if self.grid_n is not None and self.grid_n < 8:
            raise InputError("grid_n must be >= 8")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if self.samples < 1 or self.bounds_grid < 4:
            raise InputError("samples must be >= 1 and bounds_grid >= 4")
        return self


_PATH_FIELDS = ("green", "problem", "out", "dump_decomposition")


def load_config(args: argparse.Namespace) -> RunConfig:
    """Merge ``--config`` JSON with explicit flags (flags win)."""
    values: dict = {}
    if args.config is not None:
        raw = io.read_json(args.config)
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        base = Path(args.config).parent
        for key, val in raw.items():
            if key in _PATH_FIELDS and val is not None:
                val = Path(val) if Path(val).is_absolute() else base / val
            values[key] = val
    for key in ("green", "problem", "grid_n", "tol", "seed", "out", "dump_decomposition",
                "samples", "inject"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    if args.n is not None:
        ns = tuple(int(v) for v in str(args.n).split(","))
        values["n"], values["n_list"] = ns[-1], ns
    elif "n_list" in values:
        values["n_list"] = tuple(int(v) for v in values["n_list"])
    elif "n" in values:
        values["n_list"] = (int(values["n"]),)
    for key in _PATH_FIELDS:
        if values.get(key) is not None:
            values[key] = Path(values[key])
    try:
        return RunConfig(command=args.command, **values).validate()
    except TypeError as err:
        raise InputError(f"bad configuration: {err}") from err


def _out_dir(cfg: RunConfig) -> Path | None:
    if cfg.out is None:
        return None
    cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg.out


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _approx(cfg: RunConfig, n: int | None = None):
    g = io.load_green(cfg.green)
    hb = hessian_bounds(g, cfg.bounds_grid)
    return g, hb, pl.build_pl_approx(g, n or cfg.n, hb)


def run_degree(cfg: RunConfig) -> int:
    g = io.load_green(cfg.green)
    deg = degree(g.data)
    print(ex.fmt(deg))
    out = _out_dir(cfg)
    if out:
        io.write_json(out / "degree.json", {
            "degree": ex.fmt(deg), "volume": ex.fmt(g.lattice.volume),
            "H_q": ex.fmt(math.factorial(g.dim) * ex.det(g.data.b))})
    return 0


def run_approx(cfg: RunConfig) -> int:
    g, hb, f = _approx(cfg)
    dec = pl.induced_decomposition(f, check_injective=False)
    rep = pl.check_error_bounds(f, g, hb, samples=cfg.samples, seed=cfg.seed,
                                decomposition=dec, strict=False)
    print(f"N={f.N} pieces={len(f.pieces)} vertices={len(dec.vertices)} cells={len(dec.cells)}")
    print(f"value gap {rep.max_gap:.6g} < {rep.gap_bound:.6g}: {rep.value_ok}")
    print(f"slope deviation {rep.max_grad_dev:.6g} <= {rep.grad_bound:.6g}: {rep.gradient_ok}")
    print(f"cell diameter {rep.max_diameter:.6g} <= {rep.diameter_bound:.6g}: {rep.diameter_ok}")
    if not dec.injective:
        log.warning("cells are not injective into the torus at N=%d (sufficient N >= %d)",
                    f.N, f.injectivity_threshold)
    out = _out_dir(cfg)
    if out:
        io.write_json(out / "pl.json", f.to_json())
        io.write_json(out / "bounds.json", dataclasses.asdict(rep))
    if cfg.dump_decomposition:
        io.write_json(cfg.dump_decomposition, dec.to_json())
    return 0 if rep.ok else 1


def _measure_paths(out: Path) -> tuple[Path, Path]:
    if out.suffix == ".json":
        return out, out.with_suffix(".csv")
    return out / "measure.json", out / "measure.csv"


def run_measure(cfg: RunConfig) -> int:
    g, _, f = _approx(cfg)
    dec = pl.induced_decomposition(f, check_injective=False)
    m = cl.chambert_loir_measure(f, dec)
    deg = degree(g.data)
    print(f"atoms={len(m.atoms)} mass={ex.fmt(m.mass)} degree={ex.fmt(deg)}")
    if cfg.out:
        jpath, cpath = _measure_paths(cfg.out)
        io.write_json(jpath, m.to_json())
        _write_text(cpath, m.to_csv())
    if cfg.dump_decomposition:
        io.write_json(cfg.dump_decomposition, dec.to_json())
    return 0 if m.mass == deg else 1


def _solve(cfg: RunConfig):
    data, grid_n, f_raw = io.load_problem(cfg.problem)
    grid_n = cfg.grid_n or grid_n
    p = ms.normalize_density(f_raw, data, grid_n)
    s = ms.solve(p, tol=cfg.tol)
    log.info("Newton converged in %d steps, residual %.3e", s.newton_iters, s.residual_inf)
    return data, f_raw, p, s


def _write_solution(out: Path, p: ms.MAProblem, s: ms.MASolution) -> None:
    _write_text(out / "phi.csv", io.grid_csv(s.phi))
    io.write_json(out / "solution.json", dict(s.metadata(), grid_n=p.grid_n))


def run_solve(cfg: RunConfig) -> int:
    _, _, p, s = _solve(cfg)
    print(f"iters={s.newton_iters} residual={s.residual_inf:.3e} min_eig={s.min_eig:.6g} "
          f"compat_shift={s.compat_shift:.3e}")
    out = _out_dir(cfg)
    if out:
        _write_solution(out, p, s)
    return 0


def target_density(data, f_raw, p: ms.MAProblem) -> cl.DensityMeasure:
    """The prescribed measure ``H_q e^f dx`` with ``f`` normalized as in ``p``."""
    x0 = grid_points(data.lattice, p.grid_n)[:1]
    raw0 = float(np.asarray(f_raw.value(x0))[0])
    shift = raw0 - float(p.f.ravel()[0])
    hq = float(math.factorial(data.dim) * ex.det(data.b))
    return cl.DensityMeasure(data.lattice, lambda x: hq * np.exp(f_raw.value(x) - shift),
                             max(p.grid_n, 128))


def run_calabi_yau(cfg: RunConfig) -> int:
    data, f_raw, p, s = _solve(cfg)
    g = ms.solution_to_green(p, s)
    hb = hessian_bounds(g, 2 * p.grid_n)
    target = target_density(data, f_raw, p)
    battery = cl.harmonic_battery(data.lattice)
    deg = degree(data)
    rows, last = [], None
    for n in cfg.n_list:
        m = cl.chambert_loir_measure(pl.build_pl_approx(g, n, hb))
        dist = cl.weak_distance(m, target, battery)
        rows.append((n, len(m.atoms), m.mass, dist))
        print(f"N={n:<4d} atoms={len(m.atoms):<6d} mass={ex.fmt(m.mass)} weak_distance={dist:.6g}")
        last = m
    out = _out_dir(cfg)
    if out:
        _write_solution(out, p, s)
        io.write_json(out / "measure.json", last.to_json())
        _write_text(out / "measure.csv", last.to_csv())
        _write_text(out / "density.csv", io.grid_csv(
            target.samples().reshape((target.grid_n,) * data.dim)))
        table = ["N,atoms,mass,weak_distance"]
        table += [f"{n},{k},{ex.fmt(mass)},{io.fmt_float(d)}" for n, k, mass, d in rows]
        _write_text(out / "convergence.csv", "\n".join(table) + "\n")
    return 0 if all(mass == deg for _, _, mass, _ in rows) else 1


def run_verify(cfg: RunConfig) -> int:
    rep = cmd_verify(cfg.seed, inject=cfg.inject)
    print(rep.table())
    out = _out_dir(cfg)
    if out:
        io.write_json(out / "verify.json", rep.to_json())
    return 0 if rep.passed else 1


RUNNERS = {"degree": run_degree, "approx": run_approx, "measure": run_measure,
           "solve": run_solve, "calabi-yau": run_calabi_yau, "verify": run_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with default option values")
    common.add_argument("--green", type=Path, help="Green-function JSON")
    common.add_argument("--problem", type=Path, help="Monge-Ampere problem JSON")
    common.add_argument("--n", help="subdivision N (comma-separated list for calabi-yau)")
    common.add_argument("--grid-n", dest="grid_n", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int, help="random samples for bound checks")
    common.add_argument("--out", type=Path, help="output directory (or .json path for measure)")
    common.add_argument("--dump-decomposition", dest="dump_decomposition", type=Path)
    common.add_argument("--inject", action="append", help=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="tropma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args)
        return RUNNERS[cfg.command](cfg)
    except InputError as err:
        print(f"input error: {err}", file=sys.stderr)
        return 2
    except ConvergenceError as err:
        print(f"convergence failure: {err}", file=sys.stderr)
        return 3
    except TropmaError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
