"""Command-line experiment harness.

Every subcommand expands its flags into a grid of cells, evaluates the cells
(optionally on a thread pool), and writes one record per cell as CSV or JSON.
Output is byte-identical across runs with the same flags; wall times are only
written when ``--timings`` is given.

Exit codes: 0 success, 1 usage error, 2 numerical failure in some cell,
3 bracket inversion (lower bound above upper bound).
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .norms import multiplier_norm_scan, transpose_gap_experiment
from .operators import (
    NormConvergenceError,
    NormKind,
    TupleShape,
    hankel_matrix,
    intertwining_residual,
    kernel_hankel_rank_check,
    mult_matrix,
    operator_norm,
    tuple_mult_matrix,
)
from .polyparse import PolySyntaxError, parse_poly
from .space_core import (
    ConfigurationError,
    SpaceSpec,
    cnp_coefficient_check,
    random_poly,
)
from .weak_product import (
    ALSOptions,
    BracketInversionError,
    SearchOptions,
    wp_bracket,
)

DEFAULT_SEED = 0x5EED
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_BRACKET = 0, 1, 2, 3

COLUMNS = {
    "gap": ["n", "N", "row_norm", "col_norm", "ratio", "expected_ratio", "certificate_ok"],
    "hankel-check": ["case", "kind", "d", "N", "value", "threshold", "ok"],
    "wp": ["h", "r", "D", "lower", "upper", "h1_oracle", "iters"],
    "cnp": ["N", "passed", "first_failure", "min_coefficient"],
    "mult-norm": ["N", "norm", "residual", "iterations", "kind"],
}
DEFAULT_FORMAT = {"gap": "csv", "hankel-check": "csv", "wp": "json", "cnp": "json", "mult-norm": "csv"}

INTERTWINING_THRESHOLD = 1e-10
KERNEL_RANK_THRESHOLD = 1e-12


class UsageError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    space: SpaceSpec
    grid: dict[str, list]
    params: dict[str, Any] = field(default_factory=dict)
    out: Path | None = None
    fmt: str = "csv"
    seed: int = DEFAULT_SEED
    tol: float = 1e-10
    jobs: int = 1
    timings: bool = False

    def __post_init__(self) -> None:
        if self.command not in COLUMNS:
            raise UsageError(f"unknown command {self.command!r}")
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise UsageError("empty parameter grid")
        if self.tol <= 0:
            raise UsageError("tolerance must be positive")
        if self.fmt not in ("csv", "json"):
            raise UsageError(f"unknown format {self.fmt!r}")

    def cells(self) -> list[dict]:
        keys = list(self.grid)
        return [dict(zip(keys, values)) for values in itertools.product(*(self.grid[k] for k in keys))]

    def echo(self) -> dict:
        return {
            "command": self.command,
            "space": self.space.to_json(),
            "grid": self.grid,
            "params": self.params,
            "seed": self.seed,
            "tol": self.tol,
        }


@dataclass
class Report:
    config: dict
    command: str
    records: list[dict]
    wall_times: list[float]
    version: str = __version__
    timings: bool = False

    @property
    def failed(self) -> bool:
        return any(r.get("status") == "error" for r in self.records)


# ---------------------------------------------------------------------------
# cells


def _gap_cell(cfg: ExperimentConfig, cell: dict) -> dict:
    n = cell["n"]
    N = cell["N"] if cell["N"] is not None else n + 4
    res = transpose_gap_experiment(cfg.space, n, N, tol=cfg.tol)
    rep = res.report
    return {
        "n": n,
        "N": N,
        "row_norm": rep.row_norm.value,
        "col_norm": rep.col_norm.value,
        "ratio": rep.ratio,
        "expected_ratio": rep.expected_ratio,
        "certificate_ok": res.certificate_ok,
    }


def _hankel_cell(cfg: ExperimentConfig, cell: dict) -> dict:
    case = cell["case"]
    rng = np.random.default_rng([cfg.seed, case])
    space = cfg.space if cfg.params.get("fixed_space") else SpaceSpec.drury_arveson(1 + case % 3)
    kind = "intertwining" if case < cfg.params["count"] else "kernel"
    if kind == "intertwining":
        deg = cfg.params["deg"]
        b = random_poly(rng, space.d, int(rng.integers(0, deg + 1)))
        psi = random_poly(rng, space.d, int(rng.integers(0, deg + 1)))
        N = int(rng.integers(0, cfg.params["trunc"] + 1))
        value = intertwining_residual(space, b, psi, N)
        threshold = INTERTWINING_THRESHOLD
    else:
        N = int(rng.integers(0, cfg.params["kernel_trunc"] + 1))
        w = rng.standard_normal(space.d) + 1j * rng.standard_normal(space.d)
        w *= 0.7 * rng.random() / np.linalg.norm(w)
        value = kernel_hankel_rank_check(space, w, N).second_singular_value
        threshold = KERNEL_RANK_THRESHOLD
    return {
        "case": case,
        "kind": kind,
        "d": space.d,
        "N": N,
        "value": value,
        "threshold": threshold,
        "ok": value <= threshold,
    }


def _wp_cell(cfg: ExperimentConfig, cell: dict) -> dict:
    h = parse_poly(cfg.params["h"], cfg.space.d)
    r, D = cell["r"], cell["D"]
    als = ALSOptions(seed=cfg.seed)
    search = SearchOptions(seed=cfg.seed, degree=cfg.params.get("symbol_degree"))
    br = wp_bracket(cfg.space, h, r, D, als, search)
    return {
        "h": h.to_str(),
        "r": r,
        "D": D,
        "lower": br.lower,
        "lower_witness": br.lower_witness.to_json() if br.lower_witness is not None else None,
        "upper": br.upper,
        "pairs": br.upper_witness.to_json(),
        "h1_oracle": br.h1_oracle,
        "iters": br.iterations,
    }


def _cnp_cell(cfg: ExperimentConfig, cell: dict) -> dict:
    res = cnp_coefficient_check(cfg.space, cell["N"])
    return {
        "N": cell["N"],
        "passed": res.passed,
        "first_failure": res.first_failure,
        "min_coefficient": min(res.coefficients),
        "coefficients": list(res.coefficients),
    }


def _mult_norm_cell(cfg: ExperimentConfig, cell: dict) -> dict:
    phis = [parse_poly(p, cfg.space.d) for p in cfg.params["phi"]]
    shape = cfg.params.get("shape", "single")
    N = cell["N"]
    if shape == "single":
        est = multiplier_norm_scan(cfg.space, phis[0], [N], tol=cfg.tol)[0]
    else:
        est = operator_norm(tuple_mult_matrix(cfg.space, phis, shape, N), cfg.tol, kind=NormKind.LOWER_BOUND_OF_FULL_NORM)
    return {
        "N": N,
        "norm": est.value,
        "residual": est.residual,
        "iterations": est.iterations,
        "kind": est.kind.value,
    }


CELL_RUNNERS: dict[str, Callable[[ExperimentConfig, dict], dict]] = {
    "gap": _gap_cell,
    "hankel-check": _hankel_cell,
    "wp": _wp_cell,
    "cnp": _cnp_cell,
    "mult-norm": _mult_norm_cell,
}


def _run_cell(cfg: ExperimentConfig, cell: dict) -> tuple[dict, float]:
    start = time.perf_counter()
    try:
        record = CELL_RUNNERS[cfg.command](cfg, cell)
        record["status"] = "ok"
    except BracketInversionError:
        raise
    except NormConvergenceError as exc:
        record = {**cell, "status": "error", "error": f"{exc}; best estimate {exc.best.value!r}"}
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        record = {**cell, "status": "error", "error": f"{type(exc).__name__}: {exc}"}
    return record, time.perf_counter() - start


def execute(config: ExperimentConfig) -> Report:
    cells = config.cells()
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(lambda c: _run_cell(config, c), cells))
    else:
        results = [_run_cell(config, c) for c in cells]
    return Report(
        config=config.echo(),
        command=config.command,
        records=[r for r, _ in results],
        wall_times=[t for _, t in results],
        timings=config.timings,
    )


# ---------------------------------------------------------------------------
# rendering


def _csv_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(report: Report, fmt: str) -> bytes:
    if fmt == "json":
        doc: dict = {
            "tool": "wplab",
            "version": report.version,
            "config": report.config,
            "records": report.records,
        }
        if report.timings:
            doc["wall_times"] = report.wall_times
        return (json.dumps(doc, indent=2, allow_nan=True) + "\n").encode()
    if fmt != "csv":
        raise UsageError(f"unknown format {fmt!r}")
    columns = list(COLUMNS[report.command])
    if report.failed:
        columns += ["status", "error"]
    if report.timings:
        columns.append("wall_time")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for record, t in zip(report.records, report.wall_times):
        row = {**record, "wall_time": t}
        writer.writerow([_csv_value(row.get(c)) for c in columns])
    return buf.getvalue().encode()


def write_output(data: bytes, out: Path | None) -> None:
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    try:
        Path(out).write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc.strerror or exc}") from exc


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_space(text: str) -> SpaceSpec:
    text = text.strip()
    if text == "hardy":
        return SpaceSpec.hardy()
    if text == "dirichlet":
        return SpaceSpec.dirichlet()
    if text.startswith("da") and text[2:].isdigit():
        return SpaceSpec.drury_arveson(int(text[2:]))
    if text.startswith("custom:"):
        path = Path(text[len("custom:"):])
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read custom space {path}: {exc}") from exc
        if isinstance(data, list):
            return SpaceSpec.custom(data)
        data = dict(data)
        data.setdefault("family", "custom")
        return SpaceSpec.from_json(data)
    raise UsageError(f"unknown space {text!r}; use hardy, da<d>, dirichlet or custom:<file>")


def parse_int_list(text: str) -> list[int]:
    """``"3"``, ``"1..4"`` (inclusive) or ``"1,3,8"``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError as exc:
        raise UsageError(f"bad integer list {text!r}") from exc
    if not out:
        raise UsageError(f"empty range {text!r}")
    return out


def _add_common(p: argparse.ArgumentParser, space_default: str | None) -> None:
    p.add_argument("--space", default=space_default, help="hardy | da<d> | dirichlet | custom:<file>")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", dest="fmt", choices=["csv", "json"], default=None)
    p.add_argument("--jobs", type=int, default=1, help="worker threads for grid cells")
    p.add_argument("--timings", action="store_true", help="include wall time per cell (breaks byte-identity)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wplab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gap", help="transpose gap of the binomial family")
    _add_common(p, "da2")
    p.add_argument("--n", default="1..4")
    p.add_argument("--trunc", "--N", dest="trunc", default=None, help="truncation(s); default n+4")

    p = sub.add_parser("hankel-check", help="seeded Hankel identity suite")
    _add_common(p, None)
    p.add_argument("--count", type=int, default=200, help="random (b, psi) pairs")
    p.add_argument("--points", type=int, default=50, help="random kernel points")
    p.add_argument("--deg", "--D", dest="deg", type=int, default=4)
    p.add_argument("--trunc", "--N", dest="trunc", type=int, default=4)
    p.add_argument("--kernel-trunc", type=int, default=5)

    p = sub.add_parser("wp", help="weak product norm bracket")
    _add_common(p, "hardy")
    p.add_argument("action", nargs="?", default="bracket", choices=["bracket"])
    p.add_argument("--h", required=True, help='polynomial, e.g. "(1+z)^2"')
    p.add_argument("--rank", "--r", dest="rank", default="2")
    p.add_argument("--deg", "--D", dest="deg", default=None, help="factor degree cap(s); default ceil(deg h / 2)")
    p.add_argument("--symbol-deg", type=int, default=None, help="Hankel symbol degree; default max(D, deg h)")

    p = sub.add_parser("cnp", help="CNP coefficient test")
    _add_common(p, "dirichlet")
    p.add_argument("--trunc", "--N", dest="trunc", default="50")

    p = sub.add_parser("mult-norm", help="truncated multiplier norms over N")
    _add_common(p, "hardy")
    p.add_argument("--phi", action="append", required=True)
    p.add_argument("--shape", choices=["single", "column", "row"], default="single")
    p.add_argument("--trunc", "--N", dest="trunc", default="0..8")
    p.add_argument("--dump-matrix", type=Path, default=None, help="write the largest-N matrix as JSON")

    p = sub.add_parser("dump-matrix", help="write an operator matrix as JSON")
    _add_common(p, "hardy")
    p.add_argument("--kind", choices=["mult", "column", "row", "hankel"], default="mult")
    p.add_argument("--phi", action="append", required=True, help="multiplier(s) or Hankel symbol")
    p.add_argument("--trunc", "--N", dest="trunc", type=int, default=2)
    p.add_argument("--deg", "--D", dest="deg", type=int, default=None, help="Hankel codomain degree")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    space = parse_space(args.space) if args.space else SpaceSpec.drury_arveson(2)
    common = dict(
        command=args.command,
        space=space,
        out=args.out,
        fmt=args.fmt or DEFAULT_FORMAT[args.command],
        seed=args.seed,
        tol=args.tol,
        jobs=max(1, args.jobs),
        timings=args.timings,
    )
    if args.command == "gap":
        Ns = parse_int_list(args.trunc) if args.trunc else [None]
        return ExperimentConfig(grid={"n": parse_int_list(args.n), "N": Ns}, **common)
    if args.command == "hankel-check":
        if args.count < 0 or args.points < 0 or args.count + args.points == 0:
            raise UsageError("empty parameter grid")
        params = {
            "count": args.count,
            "deg": args.deg,
            "trunc": args.trunc,
            "kernel_trunc": args.kernel_trunc,
            "fixed_space": args.space is not None,
        }
        # cases below ``count`` check the intertwining relation, the rest kernel Hankels
        return ExperimentConfig(grid={"case": list(range(args.count + args.points))}, params=params, **common)
    if args.command == "wp":
        h = parse_poly(args.h, space.d)
        degs = parse_int_list(args.deg) if args.deg else [max(1, math.ceil(h.degree / 2))]
        params = {"h": args.h, "symbol_degree": args.symbol_deg}
        return ExperimentConfig(grid={"r": parse_int_list(args.rank), "D": degs}, params=params, **common)
    if args.command == "cnp":
        return ExperimentConfig(grid={"N": parse_int_list(args.trunc)}, **common)
    if args.command == "mult-norm":
        for p in args.phi:
            parse_poly(p, space.d)
        if args.shape == "single" and len(args.phi) != 1:
            raise UsageError("--shape single takes exactly one --phi")
        params = {"phi": list(args.phi), "shape": args.shape}
        return ExperimentConfig(grid={"N": parse_int_list(args.trunc)}, params=params, **common)
    raise UsageError(f"unknown command {args.command!r}")


def dump_matrix(args: argparse.Namespace) -> bytes:
    space = parse_space(args.space)
    polys = [parse_poly(p, space.d) for p in args.phi]
    if args.kind == "mult":
        if len(polys) != 1:
            raise UsageError("--kind mult takes exactly one --phi")
        M = mult_matrix(space, polys[0], args.trunc)
    elif args.kind == "hankel":
        if len(polys) != 1:
            raise UsageError("--kind hankel takes exactly one symbol")
        cod = args.deg if args.deg is not None else args.trunc
        M = hankel_matrix(space, polys[0], args.trunc, cod)
    else:
        M = tuple_mult_matrix(space, polys, TupleShape(args.kind), args.trunc)
    return (M.dumps() + "\n").encode()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "dump-matrix":
            write_output(dump_matrix(args), args.out)
            return EXIT_OK
        config = config_from_args(args)
        report = execute(config)
        write_output(render(report, config.fmt), config.out)
        if args.command == "mult-norm" and args.dump_matrix is not None:
            phis = [parse_poly(p, config.space.d) for p in args.phi]
            N = max(config.grid["N"])
            if args.shape == "single":
                M = mult_matrix(config.space, phis[0], N)
            else:
                M = tuple_mult_matrix(config.space, phis, args.shape, N)
            write_output((M.dumps() + "\n").encode(), args.dump_matrix)
    except (UsageError, PolySyntaxError, ConfigurationError) as exc:
        print(f"wplab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BracketInversionError as exc:
        print(f"wplab: internal error: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except OSError as exc:
        print(f"wplab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_NUMERIC if report.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
