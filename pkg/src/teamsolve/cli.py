"""Command-line entry point.

    teamsolve --game kuhn4 --opponent 3 --algorithm cg
    teamsolve --game goofspiel --report-structure
    teamsolve reproduce-tables --jobs 2

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import games, linsolve as ls, tmecor
from .cfr import DEFAULT_RNG_SEED
from .correlation import INTEGRALITY_TOL, RelevantPairIndex, triangle_free
from .efg import Game, InvalidGame, Role, SeatAssignment, load_json

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
ALGORITHMS = ("direct-lp", "cg", "fixed-support")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    game: str | None = None
    game_file: str | None = None
    opponent: int = 3  # the team is the first two seats unless told otherwise
    algorithm: str = "cg"
    n: int | None = None
    seed_iterations: int = 1000
    rng_seed: int = DEFAULT_RNG_SEED
    tolerance: float = tmecor.CG_TOL
    backend: str = "embedded"
    alternate_pricing: bool = False
    output: str | None = None
    dump_lp: str | None = None

    def validate(self) -> None:
        if (self.game is None) == (self.game_file is None):
            raise ConfigError("give exactly one of --game and --game-file")
        if self.opponent not in (1, 2, 3):
            raise ConfigError("--opponent must be 1, 2 or 3")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"--algorithm must be one of {', '.join(ALGORITHMS)}")
        if self.algorithm == "fixed-support" and (self.n is None or self.n < 1):
            raise ConfigError("fixed-support needs a positive --n")
        if self.seed_iterations < 1:
            raise ConfigError("--seed-iterations must be positive")
        if not self.tolerance > 0:
            raise ConfigError("--tolerance must be positive")


def load_game(cfg: RunConfig) -> Game:
    try:
        if cfg.game_file is not None:
            return load_json(cfg.game_file)
        return games.build(cfg.game)
    except (games.UnsupportedParameters, InvalidGame, OSError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# structure

def structure(game: Game, opponent: int = 3) -> dict:
    """Sizes, relevant pairs under ``opponent`` and triangle-freeness for every seat."""
    sizes = [len(game.sequence_index(s)) for s in range(3)]
    flags = []
    pairs = None
    for o in (1, 2, 3):
        a = SeatAssignment(o)
        index = RelevantPairIndex(game, a)
        flags.append(bool(triangle_free(game, a, index)))
        if o == opponent:
            pairs = len(index)
    a = SeatAssignment(opponent)
    full = sizes[a.t1] * sizes[a.t2]
    return {
        "num_sequences": sizes,
        "num_leaves": int(game.num_leaves),
        "relevant_pairs": pairs,
        "pairs_per_leaf": pairs / game.num_leaves,
        "full_over_relevant": full / pairs,
        "triangle_free": flags,
    }


def format_structure(name: str, s: dict) -> str:
    marks = "".join("Y" if f else "n" for f in s["triangle_free"])
    seqs = "/".join(str(k) for k in s["num_sequences"])
    return (f"{name:<18} seqs {seqs:<16} leaves {s['num_leaves']:<7} pairs {s['relevant_pairs']:<8} "
            f"pairs/leaves {s['pairs_per_leaf']:.2f}  full/pairs {s['full_over_relevant']:.2f}  "
            f"triangle-free(O=1,2,3) {marks}")


# ---------------------------------------------------------------------------
# solving

def _support_summary(sol: tmecor.TmecorSolution, game: Game, assignment: SeatAssignment) -> list[dict]:
    out = []
    for lam, plan in sol.support:
        entry = {"lambda": lam, "deterministic_member": None,
                 "nonzeros": int(np.count_nonzero(plan.values > INTEGRALITY_TOL))}
        try:
            det, pure, _ = tmecor.decompose_plan(plan)
        except tmecor.NotSemiRandomized:
            out.append(entry)
            continue
        idx = game.sequence_index(assignment.t1 if det is Role.TEAM_ONE else assignment.t2)
        entry["deterministic_member"] = "T1" if det is Role.TEAM_ONE else "T2"
        entry["pure_sequences"] = [idx.label(s) for s in np.flatnonzero(pure[1:] > 0.5) + 1]
        out.append(entry)
    return out


def solve(cfg: RunConfig, game: Game) -> tuple[tmecor.TmecorSolution, ls.Model | None]:
    a = SeatAssignment(cfg.opponent)
    if cfg.algorithm == "direct-lp":
        sol = tmecor.direct_lp(game, a, backend=cfg.backend)
        return sol, sol.stats.get("_model")
    if cfg.algorithm == "fixed-support":
        sol = tmecor.fixed_support_mip(game, a, cfg.n, backend=cfg.backend)
        model = tmecor.fixed_support_model(tmecor.team_problem(game, a), cfg.n)[0] if cfg.dump_lp else None
        return sol, model
    sol = tmecor.column_generation(game, a, m=cfg.seed_iterations, tol=cfg.tolerance,
                                   rng_seed=cfg.rng_seed, backend=cfg.backend,
                                   member=Role.TEAM_ONE, alternate=cfg.alternate_pricing)
    model = None
    if cfg.dump_lp:
        model = tmecor.build_master(game, a, sol.stats["_plans"])
    return sol, model


def run(cfg: RunConfig) -> dict:
    """Solve one configuration and return the JSON report (raises on failure)."""
    cfg.validate()
    try:
        ls.get_backend(cfg.backend)
    except ls.BackendUnavailable as exc:
        raise ConfigError(str(exc)) from exc
    t0 = time.perf_counter()
    game = load_game(cfg)
    t_build = time.perf_counter() - t0
    a = SeatAssignment(cfg.opponent)
    info = structure(game, cfg.opponent)
    if cfg.algorithm == "direct-lp" and not info["triangle_free"][cfg.opponent - 1]:
        raise tmecor.NotTriangleFree(
            f"{game.name} is not triangle-free for opponent seat {cfg.opponent}; use cg or fixed-support")
    t1 = time.perf_counter()
    sol, model = solve(cfg, game)
    t_solve = time.perf_counter() - t1
    if cfg.dump_lp and model is not None:
        with open(cfg.dump_lp, "w") as fh:
            fh.write(model.to_lp_text())
    stats = {k: v for k, v in sol.stats.items() if not k.startswith("_") and k != "wall_time"}
    return {
        "game": cfg.game or cfg.game_file,
        "opponent": cfg.opponent,
        "team_seats": [a.t1 + 1, a.t2 + 1],
        "algorithm": cfg.algorithm,
        "backend": cfg.backend,
        "value": sol.value,
        "certificate": sol.certificate,
        "support": _support_summary(sol, game, a),
        "iterations": stats.get("iterations"),
        "pricing": {"relaxation_count": stats.get("relaxation_pricings", 0),
                    "mip_count": stats.get("mip_pricings", 0)},
        "structure": info,
        "details": stats,
        "timings": {"build": t_build, "solve": t_solve},
    }


# ---------------------------------------------------------------------------
# table reproduction

# (game, opponent, algorithm, n, expected value, tolerance)
TABLE_CELLS = [
    *[("kuhn3", o, "cg", None, 0.0, 1e-6) for o in (1, 2, 3)],
    ("kuhn4", 1, "cg", None, 0.0379, 1e-4),
    ("kuhn4", 2, "cg", None, 0.0265, 1e-4),
    ("kuhn4", 3, "cg", None, -0.0417, 1e-4),
    *[(g, o, alg, None, v, 1e-4)
      for g, v in (("goofspiel-limited", 0.2524), ("goofspiel", 0.2534))
      for o in (1, 2, 3) for alg in ("direct-lp", "cg")],
    ("kuhn4", 1, "fixed-support", 1, 0.02083, 1e-4),
    ("kuhn4", 1, "fixed-support", 2, 0.03788, 1e-4),
    ("kuhn4", 2, "fixed-support", 1, 0.00181, 1e-4),
    ("kuhn4", 2, "fixed-support", 2, 0.02457, 1e-4),
    ("kuhn4", 2, "fixed-support", 3, 0.02652, 1e-4),
    ("kuhn4", 3, "fixed-support", 1, -0.04167, 1e-4),
    *[("goofspiel-limited", o, "fixed-support", n, v, 1e-4)
      for o in (1, 2, 3) for n, v in ((1, 0.23889), (2, 0.25242))],
]


def _cell(args) -> tuple:
    game, opp, alg, n, expected, tol, backend = args
    cfg = RunConfig(game=game, opponent=opp, algorithm=alg, n=n, backend=backend)
    t0 = time.perf_counter()
    try:
        value = run(cfg)["value"]
        err = None
    except Exception as exc:  # report and keep going
        value, err = None, f"{type(exc).__name__}: {exc}"
    return (game, opp, alg, n, expected, tol, value, err, time.perf_counter() - t0)


def reproduce_tables(jobs: int = 1, backend: str = "embedded", only: str | None = None,
                     stream=None) -> int:
    stream = stream or sys.stdout
    cells = [c + (backend,) for c in TABLE_CELLS if only is None or c[0] == only]
    print(f"{'game':<18} {'O':>1} {'algorithm':<13} {'n':>2} {'expected':>9} {'value':>11}  result  time",
          file=stream)
    failed = 0
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = ex.map(_cell, cells)
            failed = _print_cells(results, stream)
    else:
        failed = _print_cells(map(_cell, cells), stream)
    print(f"{len(cells) - failed}/{len(cells)} cells within tolerance", file=stream)
    return EXIT_OK if failed == 0 else EXIT_SOLVER


def _print_cells(results, stream) -> int:
    failed = 0
    for game, opp, alg, n, expected, tol, value, err, dt in results:
        ok = value is not None and abs(value - expected) <= tol
        failed += not ok
        shown = f"{value:11.6f}" if value is not None else f"{'error':>11}"
        print(f"{game:<18} {opp:>1} {alg:<13} {n or '-':>2} {expected:9.5f} {shown}  "
              f"{'PASS' if ok else 'FAIL'}    {dt:.1f}s", file=stream, flush=True)
        if err:
            print(f"    {err}", file=stream)
    return failed


# ---------------------------------------------------------------------------
# argument parsing

def _run_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="teamsolve", description="Team-maxmin equilibria with correlation.")
    p.add_argument("--game", choices=list(games.GAMES), help="benchmark game name")
    p.add_argument("--game-file", help="load a game from the JSON node-list format")
    p.add_argument("--opponent", type=int, default=3, help="opponent seat (1-3, default 3)")
    p.add_argument("--algorithm", default="cg", choices=ALGORITHMS)
    p.add_argument("--n", type=int, help="support cap for fixed-support")
    p.add_argument("--seed-iterations", type=int, default=1000, help="CFR+ seeding iterations m")
    p.add_argument("--rng-seed", type=int, default=DEFAULT_RNG_SEED)
    p.add_argument("--tolerance", type=float, default=tmecor.CG_TOL, help="reduced-cost stopping tolerance")
    p.add_argument("--backend", default="embedded", help="LP/MIP engine (embedded, highs)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (used by reproduce-tables)")
    p.add_argument("--output", help="also write the JSON report here")
    p.add_argument("--report-structure", action="store_true", help="print sizes and flags, do not solve")
    p.add_argument("--alternate-pricing", action="store_true",
                   help="alternate the pricing member between iterations")
    p.add_argument("--dump-lp", metavar="FILE", help="write the solved LP/MIP in LP text format")
    return p


def _tables_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="teamsolve reproduce-tables",
                                description="Solve the pinned table cells and report pass/fail.")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--backend", default="embedded")
    p.add_argument("--game", choices=list(games.GAMES), help="restrict to one game")
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] == "reproduce-tables":
            args = _parse(_tables_parser(), argv[1:])
            if args.jobs < 1:
                raise ConfigError("--jobs must be positive")
            return reproduce_tables(args.jobs, args.backend, args.game)
        args = _parse(_run_parser(), argv)
        cfg = RunConfig(game=args.game, game_file=args.game_file, opponent=args.opponent,
                        algorithm=args.algorithm, n=args.n, seed_iterations=args.seed_iterations,
                        rng_seed=args.rng_seed, tolerance=args.tolerance, backend=args.backend,
                        alternate_pricing=args.alternate_pricing, output=args.output,
                        dump_lp=args.dump_lp)
        if args.report_structure:
            if (cfg.game is None) == (cfg.game_file is None):
                raise ConfigError("give exactly one of --game and --game-file")
            if cfg.opponent not in (1, 2, 3):
                raise ConfigError("--opponent must be 1, 2 or 3")
            game = load_game(cfg)
            info = structure(game, cfg.opponent)
            print(format_structure(cfg.game or cfg.game_file, info))
            _write(cfg.output, {"game": cfg.game or cfg.game_file, "structure": info})
            return EXIT_OK
        report = run(cfg)
    except ConfigError as exc:
        print(f"teamsolve: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except tmecor.NotTriangleFree as exc:
        print(f"teamsolve: NotTriangleFree: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (tmecor.SolveFailed, tmecor.NonConvergence, ls.SolverError) as exc:
        print(f"teamsolve: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:  # e.g. model size limits
        print(f"teamsolve: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = json.dumps(report, indent=2, default=_jsonable)
    print(text)
    _write(cfg.output, report)
    return EXIT_OK


def _parse(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    try:
        return parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags; keep --help at 0
        if exc.code not in (0, None):
            raise ConfigError("invalid arguments") from None
        raise


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write(path: str | None, report: dict) -> None:
    if path:
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2, default=_jsonable)
            fh.write("\n")


if __name__ == "__main__":
    sys.exit(main())
