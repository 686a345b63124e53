"""Command-line interface.

Gate strengths are given as CX fractions (1.0 means pi/4); coordinates and
everything emitted are in radians unless a column says otherwise.

Exit codes: 0 success, 2 malformed input, 3 invalid value, 4 domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from .circuit_polytope import StrengthSequence, circuit_polytope
from .decomposer import reconstruct
from .optimizer import (
    REFERENCE_ERROR_MODEL,
    EmptyGateSetError,
    ErrorModel,
    GateSet,
    SynthesisMode,
    SynthesisOptions,
    expected_cost_exact,
    expected_cost_monte_carlo,
    optimal_synthesize,
    _thread_count,
)
from .polytope import union_volume
from .weyl import (
    QUARTER_PI,
    SWAP,
    NotUnitaryError,
    average_infidelity,
    check_unitary,
    haar_density,
    monodromy_coordinate,
    unitary_from_json,
)

JSON_FORMAT = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_DOMAIN = 4

#: frozen CSV column layouts
SCAN_1D_COLUMNS = ("x", "expected_cost")
SCAN_2D_COLUMNS = ("x", "y", "expected_cost")
HISTOGRAM_COLUMNS = ("word", "mirrored", "count", "fraction")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _parse_error(msg: str) -> CliError:
    return CliError(msg, EXIT_PARSE)


def _invalid(msg: str) -> CliError:
    return CliError(msg, EXIT_VALIDATION)


def _fmt(x: float) -> str:
    x = float(x)
    return "0" if x == 0 else repr(x)


def _floats(text: str, flag: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise _parse_error(f"{flag}: expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise _invalid(f"{flag}: values must be finite")
    return vals


def _gate_set(text: str, flag: str = "--gates") -> GateSet:
    fracs = _floats(text, flag)
    if not fracs:
        raise CliError(f"{flag}: gate set is empty", EXIT_DOMAIN)
    for f in fracs:
        if not 0 < f <= 1:
            raise _invalid(f"{flag}: strength {f!r} outside (0, 1] CX fractions")
    return GateSet.from_fractions(fracs)


def _error_model(args) -> ErrorModel:
    m = REFERENCE_ERROR_MODEL.m if args.m is None else args.m
    b = REFERENCE_ERROR_MODEL.b if args.b is None else args.b
    for flag, v in (("--m", m), ("--b", b)):
        if not math.isfinite(v) or v < 0:
            raise _invalid(f"{flag}: must be finite and >= 0, got {v!r}")
    return ErrorModel(m, b)


def _read_unitary(path: str) -> np.ndarray:
    try:
        with (sys.stdin if path == "-" else open(path)) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise _parse_error(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise _parse_error(f"{path}: malformed JSON ({exc.msg})") from None
    if isinstance(obj, dict) and "unitary" in obj:
        obj = obj["unitary"]
    try:
        u = unitary_from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise _parse_error(f"{path}: expected {{'re': 4x4, 'im': 4x4}} ({exc})") from None
    if u.shape != (4, 4) or not np.all(np.isfinite(u)):
        raise _parse_error(f"{path}: expected a finite 4x4 matrix, got shape {u.shape}")
    try:
        return check_unitary(u)
    except NotUnitaryError as exc:
        raise _invalid(f"{path}: {exc}") from None


def _positive_int(flag: str, v: int) -> int:
    if v < 1:
        raise _invalid(f"{flag}: must be >= 1, got {v}")
    return v


def _options(args) -> SynthesisOptions:
    tol = args.member_tol
    if not math.isfinite(tol) or tol < 0:
        raise _invalid(f"--member-tol: must be finite and >= 0, got {tol!r}")
    mode = SynthesisMode.APPROXIMATE if args.approx else SynthesisMode.EXACT
    return SynthesisOptions(mode=mode, mirror=args.mirror, member_tol=tol)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_coord(args) -> str:
    u = _read_unitary(args.unitary)
    a = monodromy_coordinate(u)
    if args.format == "json":
        return _dump({"format": JSON_FORMAT, "coordinate": a.tolist(), "cx_fractions": (a / QUARTER_PI).tolist()})
    return ", ".join(_fmt(x) for x in a) + "\n" + "cx fractions: " + ", ".join(_fmt(x) for x in a / QUARTER_PI) + "\n"


def _coordinate_arg(args) -> np.ndarray:
    if (args.coord is None) == (args.unitary is None):
        raise _parse_error("member: give exactly one of --coord or --unitary")
    if args.unitary is not None:
        return monodromy_coordinate(_read_unitary(args.unitary))
    vals = _floats(args.coord, "--coord")
    if len(vals) != 3:
        raise _parse_error(f"--coord: expected three numbers, got {len(vals)}")
    return np.array(vals)


def cmd_member(args) -> str:
    a = _coordinate_arg(args)
    fracs = _floats(args.gates, "--gates")
    for f in fracs:
        if not 0 <= f <= 1:
            raise _invalid(f"--gates: strength {f!r} outside [0, 1] CX fractions")
    if not math.isfinite(args.tol) or args.tol < 0:
        raise _invalid(f"--tol: must be finite and >= 0, got {args.tol!r}")
    seq = StrengthSequence.from_fractions(fracs)
    inside = circuit_polytope(seq).contains(a, args.tol)
    return _dump({"format": JSON_FORMAT, "coordinate": a.tolist(), "word": list(seq.alphas), "member": bool(inside)})


def cmd_synth(args) -> str:
    u = _read_unitary(args.unitary)
    gs = _gate_set(args.gates)
    res = optimal_synthesize(u, gs, _error_model(args), _options(args))
    goal = u @ SWAP if res.mirrored else u
    residual = average_infidelity(reconstruct(res.circuit), goal)
    return _dump(
        {
            "format": JSON_FORMAT,
            "word": list(res.word),
            "word_cx_fractions": [w / QUARTER_PI for w in res.word],
            "target": res.target.tolist(),
            "approximant": res.approximant.tolist(),
            "infidelity": res.infidelity,
            "template_cost": res.template_cost,
            "total_cost": res.total_cost,
            "mirrored": res.mirrored,
            "residual": residual,
            "circuit": res.circuit.to_json(),
        }
    )


def cmd_volume(args) -> str:
    fracs = _floats(args.gates, "--gates")
    for f in fracs:
        if not 0 <= f <= 1:
            raise _invalid(f"--gates: strength {f!r} outside [0, 1] CX fractions")
    order = _positive_int("--order", args.order)
    seq = StrengthSequence.from_fractions(fracs)
    density = haar_density if args.haar else None
    vol = union_volume(circuit_polytope(seq).components, density, order)
    return _dump({"format": JSON_FORMAT, "word": list(seq.alphas), "haar": bool(args.haar), "volume": vol})


def _template(text: str) -> tuple[list[float], list[str]]:
    fixed, free = [], []
    for tok in (t.strip() for t in text.split(",")):
        if tok in ("x", "y"):
            if tok in free:
                raise _parse_error(f"--gates-template: {tok} appears twice")
            free.append(tok)
        else:
            try:
                f = float(tok)
            except ValueError:
                raise _parse_error(f"--gates-template: cannot read {tok!r}") from None
            if not 0 < f <= 1:
                raise _invalid(f"--gates-template: strength {f!r} outside (0, 1] CX fractions")
            fixed.append(f)
    if free not in (["x"], ["x", "y"]):
        raise _parse_error("--gates-template: free strengths must be x or x,y")
    return fixed, free


def cmd_scan(args) -> str:
    fixed, free = _template(args.gates_template)
    grid = _positive_int("--grid", args.grid)
    em = _error_model(args)
    ticks = [k / grid for k in range(1, grid + 1)]
    memo: dict = {}

    def value(extra: Sequence[float]) -> float:
        gs = GateSet.from_fractions(fixed + list(extra))
        if gs.strengths not in memo:
            if args.mode == "exact":
                memo[gs.strengths] = expected_cost_exact(gs, em)
            else:
                opts = SynthesisOptions(mode=SynthesisMode.APPROXIMATE, mirror=args.mirror)
                memo[gs.strengths] = expected_cost_monte_carlo(gs, em, opts, args.n, args.seed).mean
        return memo[gs.strengths]

    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    if len(free) == 1:
        w.writerow(SCAN_1D_COLUMNS)
        for x in ticks:
            w.writerow([_fmt(x), repr(value([x]))])
    else:
        w.writerow(SCAN_2D_COLUMNS)
        for x in ticks:
            for y in ticks:
                w.writerow([_fmt(x), _fmt(y), repr(value([x, y]))])
    return out.getvalue()


def _histogram_csv(hist, n: int) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(HISTOGRAM_COLUMNS)
    rows = sorted(hist.items(), key=lambda kv: (-kv[1], kv[0]))
    for (word, mirrored), count in rows:
        w.writerow([";".join(f"{a / QUARTER_PI:.6g}" for a in word), int(mirrored), count, repr(count / n)])
    return out.getvalue()


def cmd_stats(args) -> str:
    gs = _gate_set(args.gates)
    n = _positive_int("--n", args.n)
    est = expected_cost_monte_carlo(gs, _error_model(args), _options(args), n, args.seed)
    hist_csv = _histogram_csv(est.histogram, n)
    if args.histogram:
        with open(args.histogram, "w", newline="") as fh:
            fh.write(hist_csv)
    return _dump(
        {
            "format": JSON_FORMAT,
            "gates": list(gs.strengths),
            "n": n,
            "seed": args.seed,
            "mean": est.mean,
            "stderr": est.stderr,
            "histogram": [
                {"word": list(word), "mirrored": mirrored, "count": count}
                for (word, mirrored), count in sorted(est.histogram.items(), key=lambda kv: (-kv[1], kv[0]))
            ],
        }
    )


# ---------------------------------------------------------------------------
# parser


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=float, default=None, help="infidelity per radian of XX strength")
    p.add_argument("--b", type=float, default=None, help="infidelity offset per XX gate")


def _add_synthesis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--approx", action="store_true", help="allow approximate synthesis")
    p.add_argument("--mirror", action="store_true", help="also consider the target times SWAP")
    p.add_argument("--member-tol", type=float, default=1e-9, help="polytope membership tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xxsynth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coord", help="canonical coordinate of a unitary")
    p.add_argument("unitary", help="unitary JSON file ({'re','im'}), '-' for stdin")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_coord)

    p = sub.add_parser("member", help="circuit polytope membership")
    p.add_argument("--gates", required=True, help="strength sequence as CX fractions")
    p.add_argument("--coord", help="a1,a2,a3 in radians")
    p.add_argument("--unitary", help="unitary JSON file")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_member)

    p = sub.add_parser("synth", help="optimal synthesis of a unitary")
    p.add_argument("unitary")
    p.add_argument("--gates", required=True, help="gate set as CX fractions, e.g. 1,0.5,0.3333")
    _add_model_flags(p)
    _add_synthesis_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("volume", help="volume of a circuit polytope")
    p.add_argument("--gates", required=True, help="strength sequence as CX fractions")
    p.add_argument("--haar", action="store_true", help="weight by the Haar density")
    p.add_argument("--order", type=int, default=14, help="quadrature order")
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("scan", help="expected-cost landscape as CSV")
    p.add_argument("--gates-template", required=True, help="e.g. '1.0,x' or '1.0,x,y' (CX fractions)")
    p.add_argument("--grid", type=int, required=True, help="grid points per free strength")
    p.add_argument("--mode", choices=("exact", "approximate"), default="exact")
    p.add_argument("--mirror", action="store_true", help="approximate mode only")
    p.add_argument("--n", type=int, default=10_000, help="Monte Carlo samples (approximate mode)")
    p.add_argument("--seed", type=int, default=0)
    _add_model_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("stats", help="Monte Carlo expected cost and template histogram")
    p.add_argument("--gates", required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--histogram", help="write the template histogram CSV here")
    _add_model_flags(p)
    _add_synthesis_flags(p)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        _thread_count()
    except ValueError as exc:
        print(f"xxsynth: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if getattr(args, "seed", 0) < 0:
        print("xxsynth: error: --seed: must be >= 0", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        sys.stdout.write(args.func(args))
    except CliError as exc:
        print(f"xxsynth: error: {exc}", file=sys.stderr)
        return exc.code
    except EmptyGateSetError as exc:
        print(f"xxsynth: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return 0


if __name__ == "__main__":
    sys.exit(main())
