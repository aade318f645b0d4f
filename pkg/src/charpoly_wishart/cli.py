"""Command-line entry point.

Every subcommand accepts ``--config FILE`` (a JSON object of parameters).
Explicit flags override the file.  The fully resolved configuration is
echoed into JSON outputs under ``"config"``.  For CSV outputs it goes to a
``<output>.config.json`` sidecar, or to standard error when writing to
standard output.

Exit codes: 0 success, 1 invalid input or failed verification checks,
2 numerical non-convergence (output still written and flagged).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import contour, predictions
from .ensemble import EntryDistribution, EnsembleConfig
from .errors import CharpolyError, DegenerateEstimateError
from .montecarlo import estimate_normalized_ratio
from .spectral_law import MPLaw, ScalingPoint, mp_density
from .special_fn import airy_pair
from .verify import SUITES, run_suite

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).replace(" ", "").split(",") if x]


# Each parameter: (flag, dest, type, default, help)
_PARAMS: Dict[str, list] = {
    "mp-density": [
        ("--c", "c", float, 2.0, "aspect ratio c >= 1"),
        ("--from", "start", float, 0.0, "first lambda"),
        ("--to", "stop", float, 6.0, "last lambda"),
        ("--points", "points", int, 101, "number of grid points"),
    ],
    "predict": [
        ("--regime", "regime", str, "bulk", "bulk, edge (= edge+) or edge-"),
        ("--k", "k", int, 1, "half the number of characteristic polynomials"),
        ("--c", "c", float, 2.0, "aspect ratio c"),
        ("--lambda0", "lambda0", float, 3.0, "bulk point (ignored at an edge)"),
        ("--kappa4", "kappa4", float, 0.0, "fourth-cumulant excess mu4 - 3/4"),
        ("--xis", "xis", _floats, [0.0, 0.5], "2k comma-separated xi values"),
    ],
    "mc": [
        ("--regime", "regime", str, "bulk", "bulk, edge (= edge+) or edge-"),
        ("--dist", "dist", str, "gaussian", "gaussian, rademacher or threepoint:q"),
        ("--n", "n", int, 64, "matrix size n"),
        ("--m", "m", int, 128, "rows of A, m >= n"),
        ("--lambda0", "lambda0", float, 3.0, "bulk point (ignored at an edge)"),
        ("--xis", "xis", _floats, [0.0, 0.5], "xi1,xi2"),
        ("--samples", "samples", int, 10_000, "Monte Carlo sample count"),
        ("--seed", "seed", int, 0, "64-bit seed"),
        ("--threads", "threads", int, None, "worker threads (default: $CHARPOLY_THREADS or CPU count)"),
        ("--blocks-csv", "blocks_csv", str, None, "write leave-one-block-out jackknife ratios here"),
    ],
    "contour": [
        ("--regime", "regime", str, "bulk", "bulk, edge (= edge+) or edge-"),
        ("--n", "n", int, 32, "matrix size n"),
        ("--m", "m", int, 64, "rows of A"),
        ("--c", "c", float, None, "limit aspect ratio (default m/n)"),
        ("--lambda0", "lambda0", float, 3.0, "bulk point (ignored at an edge)"),
        ("--xis", "xis", _floats, [0.0, 0.5], "xi1,xi2 (or four values for k = 2)"),
        ("--kappa4", "kappa4", float, 0.0, "fourth-cumulant excess"),
        ("--radius", "radius", float, 0.5, "contour radius in (0, 1)"),
        ("--points", "points", int, 512, "trapezoid nodes per circle"),
        ("--tol", "tol", float, 1e-8, "relative self-error tolerance"),
    ],
    "saddle": [
        ("--c", "c", float, 2.0, "aspect ratio c_{m,n}"),
        ("--lambda0", "lambda0", float, None, "bulk point; omit for the upper edge"),
    ],
    "airy": [
        ("--from", "start", float, -5.0, "first x"),
        ("--to", "stop", float, 5.0, "last x"),
        ("--points", "points", int, 101, "number of grid points"),
    ],
    "hciz": [
        ("--a", "a", _floats, [1.0, 2.0], "a1,a2"),
        ("--b", "b", _floats, [0.0, 1.0], "b1,b2"),
        ("--samples", "samples", int, 1_000_000, "Haar samples"),
        ("--seed", "seed", int, 0, "seed"),
    ],
    "verify": [
        ("--suite", "suite", str, "quick", "quick or full"),
        ("--seed", "seed", int, 7, "base seed"),
        ("--threads", "threads", int, None, "worker threads"),
        ("--checks", "checks", str, None, "comma-separated subset of check names"),
    ],
}

_CSV_COMMANDS = {"mp-density", "airy"}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="charpoly", description="Characteristic-polynomial correlations of sample covariance matrices.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, params in _PARAMS.items():
        p = sub.add_parser(name, help=f"{name} subcommand")
        for flag, dest, typ, default, hlp in params:
            p.add_argument(flag, dest=dest, type=typ, default=None,
                           help=f"{hlp} (default: {default})")
        p.add_argument("--config", dest="config", default=None, help="JSON file with parameters")
        p.add_argument("--output", "-o", dest="output", default=None, help="output path (default stdout)")
        p.add_argument("--format", dest="format", choices=["json", "csv"], default=None,
                       help="output format")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    cfg = {dest: default for _, dest, _, default, _ in _PARAMS[command]}
    cfg["format"] = "csv" if command in _CSV_COMMANDS else "json"
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        given = data.get("command", command)
        data = dict(data.get("config", data))
        data.pop("command", None)
        if given != command:
            raise UsageError(f"config file is for '{given}', not '{command}'")
        types = {dest: typ for _, dest, typ, _, _ in _PARAMS[command]}
        for key, val in data.items():
            if key not in cfg:
                raise UsageError(f"unknown config key {key!r} for {command}")
            cfg[key] = val if val is None or key == "format" else types[key](val)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["format"] not in ("json", "csv"):
        raise UsageError("format must be json or csv")
    return cfg


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) for x in r])
    return buf.getvalue()


def _json_text(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def _point(regime: str, c: float, lambda0: Optional[float]) -> ScalingPoint:
    return ScalingPoint.make(MPLaw(c), regime, lambda0)


def _write_table(cmd: str, cfg: dict, header, rows, output: Optional[str]) -> int:
    echo = {"command": cmd, "config": cfg}
    if cfg["format"] == "csv":
        _emit(_csv_text(header, rows), output)
        if output:
            with open(output + ".config.json", "w") as fh:
                fh.write(_json_text(echo))
        else:
            sys.stderr.write(json.dumps(echo, sort_keys=True) + "\n")
    else:
        _emit(_json_text({**echo, "columns": list(header), "rows": [list(map(float, r)) for r in rows]}), output)
    return EXIT_OK


def cmd_mp_density(cfg: dict, output) -> int:
    if cfg["points"] < 1:
        raise ValueError("points must be >= 1")
    law = MPLaw(cfg["c"])
    xs = np.linspace(cfg["start"], cfg["stop"], cfg["points"])
    return _write_table("mp-density", cfg, ["lambda", "rho"], zip(xs, mp_density(law, xs)), output)


def cmd_airy(cfg: dict, output) -> int:
    if cfg["points"] < 1:
        raise ValueError("points must be >= 1")
    xs = np.linspace(cfg["start"], cfg["stop"], cfg["points"])
    rows = [(x, *airy_pair(x)) for x in xs]
    return _write_table("airy", cfg, ["x", "Ai", "Aip"], rows, output)


def _require_json(cfg: dict, cmd: str) -> None:
    if cfg["format"] != "json":
        raise ValueError(f"{cmd} only writes json")


def cmd_predict(cfg: dict, output) -> int:
    _require_json(cfg, "predict")
    point = _point(cfg["regime"], cfg["c"], cfg["lambda0"])
    q = predictions.LimitQuery(cfg["k"], tuple(cfg["xis"]), MPLaw(cfg["c"]), point, cfg["kappa4"])
    f = predictions.limit_factors(q)
    out = {"command": "predict", "config": cfg, "rhs": f.pop("rhs"), "factors": f,
           "point": point.to_dict()}
    if q.k == 1:
        out["normalized_ratio"] = predictions.normalized_ratio_prediction(q)
    _emit(_json_text(out), output)
    return EXIT_OK


def cmd_mc(cfg: dict, output) -> int:
    _require_json(cfg, "mc")
    if len(cfg["xis"]) != 2:
        raise ValueError("mc takes exactly two xis")
    dist = EntryDistribution.parse(cfg["dist"])
    ens = EnsembleConfig(cfg["n"], cfg["m"], dist, cfg["seed"])
    point = _point(cfg["regime"], ens.c_mn, cfg["lambda0"])
    t0 = time.perf_counter()
    est = estimate_normalized_ratio(ens, point, cfg["xis"][0], cfg["xis"][1], cfg["samples"], cfg["threads"])
    runtime = time.perf_counter() - t0
    q = predictions.LimitQuery(1, tuple(cfg["xis"]), MPLaw(ens.c_mn), point, dist.kappa4())
    out = {"command": "mc", "config": cfg, "ratio": est.ratio, "stderr": est.stderr,
           "prediction": predictions.normalized_ratio_prediction(q), "samples": est.n_samples,
           "lambdas": list(est.lambdas), "runtime_s": runtime}
    if cfg["blocks_csv"]:
        with open(cfg["blocks_csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["block", "leave_one_out_ratio"])
            for i, v in enumerate(est.jackknife_values):
                w.writerow([i, repr(float(v))])
    _emit(_json_text(out), output)
    return EXIT_OK


def cmd_contour(cfg: dict, output) -> int:
    _require_json(cfg, "contour")
    c = cfg["c"] if cfg["c"] is not None else cfg["m"] / cfg["n"]
    point = _point(cfg["regime"], c, cfg["lambda0"])
    spec = contour.ContourSpec(cfg["radius"], cfg["points"])
    xis = cfg["xis"]
    res = contour.contour_f2k_integral(cfg["n"], cfg["m"], point, xis, cfg["kappa4"], spec, cfg["tol"])
    out = {"command": "contour", "config": cfg, **res.to_dict()}
    converged = res.converged
    if len(xis) == 2:
        cr = contour.contour_normalized_ratio(cfg["n"], cfg["m"], point, xis[0], xis[1], cfg["kappa4"],
                                              spec, tol=cfg["tol"])
        out["normalized_ratio"] = cr.ratio
        out["richardson_shift"] = cr.richardson_shift
        converged = converged and cr.converged
    else:
        out["normalized_ratio"] = None
    k = len(xis) // 2
    out["F_asymptotic"] = contour.assemble_f2k(res, cfg["n"], point, k).to_dict()
    out["converged"] = converged
    _emit(_json_text(out), output)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_saddle(cfg: dict, output) -> int:
    _require_json(cfg, "saddle")
    law = MPLaw(cfg["c"])
    point = ScalingPoint.edge(law, 1) if cfg["lambda0"] is None else ScalingPoint.bulk(law, cfg["lambda0"])
    rep = contour.saddle_report(point, cfg["c"])
    _emit(_json_text({"command": "saddle", "config": cfg, **rep.to_dict()}), output)
    return EXIT_OK


def cmd_hciz(cfg: dict, output) -> int:
    _require_json(cfg, "hciz")
    (a1, a2), (b1, b2) = cfg["a"], cfg["b"]
    mc, closed, z = contour.hciz_check(a1, a2, b1, b2, cfg["samples"], cfg["seed"])
    _emit(_json_text({"command": "hciz", "config": cfg, "mc_value": mc, "closed_form": closed,
                      "z_score": z}), output)
    return EXIT_OK


def cmd_verify(cfg: dict, output) -> int:
    _require_json(cfg, "verify")
    if cfg["suite"] not in SUITES:
        raise ValueError(f"suite must be one of {sorted(SUITES)}")

    def progress(chk):
        sys.stderr.write(f"{'PASS' if chk.passed else 'FAIL'}  {chk.name}  ({chk.seconds:.1f}s)\n")
        sys.stderr.flush()

    only = [c for c in cfg["checks"].split(",") if c] if cfg["checks"] else None
    report = run_suite(cfg["suite"], cfg["seed"], cfg["threads"], progress=progress, only=only)
    body = {"command": "verify", "config": cfg, **report.to_dict()}
    if output:
        _emit(_json_text(body), output)
        print(report.table(timings=False))
    else:
        print(report.table(timings=False), file=sys.stderr)
        _emit(_json_text(body), None)
    return EXIT_OK if report.passed else EXIT_INVALID


_COMMANDS: Dict[str, Callable[[dict, Optional[str]], int]] = {
    "mp-density": cmd_mp_density, "predict": cmd_predict, "mc": cmd_mc, "contour": cmd_contour,
    "saddle": cmd_saddle, "airy": cmd_airy, "hciz": cmd_hciz, "verify": cmd_verify,
}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args.command, args)
        if args.format is not None:
            cfg["format"] = args.format
        return _COMMANDS[args.command](cfg, args.output)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except DegenerateEstimateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValueError, TypeError, KeyError, NotImplementedError, CharpolyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
