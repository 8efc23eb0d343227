"""Command-line driver: verify, bounds, sweep, state and build.

Exit codes: 0 success, 1 a check or bound failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .bounds import BoundReport, bound_report, fmt17
from .connector import invariant_subspace_residual, verify_tight
from .errors import CapExceededError, CongruenceError, NormalizationError, TightBellError
from .library import FAMILIES, GraphSpec, build_family
from .network import (
    TreeNetwork,
    contract_network,
    mps_contract,
    mps_factors,
    network_state,
    parse_angle,
    tsirelson_chain,
    wbc_pair_tree,
    wbc_theta_range,
)
from .selftest import fst_verdict
from .serialize import complex_to_dict, mps_to_dict, state_to_dict

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SWEEP_HEADER = ("param",) + BoundReport.CSV_HEADER
SWEEP_TAGS = ("bk-chain", "wbc-3p", "wbc-4p")


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit code 2."""


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON ({exc})") from exc


def _load_network(path):
    data = _load_json(path)
    try:
        return TreeNetwork.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: invalid network ({exc})") from exc


def _emit(args, text):
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


# verify


def cmd_verify(args):
    net = _load_network(args.network)
    report = {"nodes": {}, "network": None, "passed": False}
    ok = True
    try:
        complexes = net.complexes
    except TightBellError as exc:
        raise UsageError(str(exc)) from exc
    for nid, cx in complexes.items():
        tr = verify_tight(cx, args.tol)
        res = invariant_subspace_residual(cx)
        node_ok = tr.passed and res <= args.tol
        report["nodes"][nid] = {"tight": tr.to_dict(), "invariant_residual": res, "passed": node_ok}
        ok = ok and node_ok
    try:
        cx = contract_network(net)
    except CongruenceError as exc:
        report["error"] = str(exc)
        report["congruence_deviation"] = exc.deviation
        return _finish_verify(args, report, False)
    tr = verify_tight(cx, args.tol)
    res = invariant_subspace_residual(cx)
    try:
        fst = fst_verdict(cx).to_dict()
    except NormalizationError as exc:
        fst = {"passed": False, "error": str(exc), "attained_max": exc.attained}
    net_ok = tr.passed and res <= args.tol and fst["passed"]
    report["network"] = {
        "n_parties": net.n_parties,
        "tight": tr.to_dict(),
        "invariant_residual": res,
        "fst": fst,
        "passed": net_ok,
    }
    return _finish_verify(args, report, ok and net_ok)


def _finish_verify(args, report, ok):
    report["passed"] = ok
    if args.json:
        _emit(args, _dumps(report))
    else:
        lines = []
        for nid, r in report["nodes"].items():
            lines.append(
                f"node {nid}: tight residual {r['tight']['max_residual']:.3e}, "
                f"invariant residual {r['invariant_residual']:.3e} "
                f"{'ok' if r['passed'] else 'FAIL'}"
            )
        if "error" in report:
            lines.append(f"contraction failed: {report['error']}")
        if report["network"] is not None:
            n = report["network"]
            lines.append(
                f"network ({n['n_parties']} parties): tight residual "
                f"{n['tight']['max_residual']:.3e}, invariant residual "
                f"{n['invariant_residual']:.3e}, self-testing checks "
                f"{'pass' if n['fst']['passed'] else 'FAIL'}"
            )
        lines.append("PASS" if ok else "FAIL")
        _emit(args, "\n".join(lines))
    if not ok and "error" in report:
        print(report["error"], file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# bounds


def cmd_bounds(args):
    net = _load_network(args.network)
    try:
        rep = bound_report(net, y=args.y, threads=args.threads)
    except CongruenceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    except CapExceededError as exc:
        raise UsageError(str(exc)) from exc
    if args.json:
        _emit(args, _dumps(rep.to_dict()))
    else:
        _emit(args, _csv([rep.CSV_HEADER, rep.csv_row()]))
    return EXIT_OK if rep.consistent(args.tol) else EXIT_FAIL


# sweep


def _sweep_points(args):
    """(parameter label, network builder) for every requested point."""
    if args.tag == "bk-chain":
        if args.n_min < 2 and args.n_max >= args.n_min:
            raise UsageError("bk-chain needs N >= 2")
        return [(str(n), lambda n=n: tsirelson_chain(n)) for n in range(args.n_min, args.n_max + 1)]
    tsi = args.tag == "wbc-4p"
    omega = parse_angle(args.omega) if args.omega is not None else math.pi / 4
    lo, hi = wbc_theta_range(omega)
    lo = parse_angle(args.theta_min) if args.theta_min is not None else lo
    hi = parse_angle(args.theta_max) if args.theta_max is not None else hi
    if args.points < 0:
        raise UsageError("--points must be non-negative")
    # open interval: the endpoints are degenerate
    thetas = np.linspace(lo, hi, args.points + 2)[1:-1] if args.points else []
    return [(fmt17(th), lambda th=th: wbc_pair_tree(th, omega, tsi)) for th in thetas]


def cmd_sweep(args):
    rows = [SWEEP_HEADER]
    records = []
    ok = True
    for label, build in _sweep_points(args):
        try:
            rep = bound_report(build(), y=args.y, threads=args.threads)
        except (TightBellError, ValueError) as exc:
            print(f"warning: skipping point {label}: {exc}", file=sys.stderr)
            continue
        ok = ok and rep.consistent(args.tol)
        rows.append([label] + rep.csv_row())
        records.append({"param": float(label), **rep.to_dict()})
    if args.json:
        _emit(args, _dumps({"tag": args.tag, "points": records}))
    else:
        _emit(args, _csv(rows))
    return EXIT_OK if ok else EXIT_FAIL


# state


def _parse_selector(text):
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"selector must be b,y[,eigenvalue], got {text!r}") from exc
    if len(parts) not in (2, 3) or parts[0] not in (1, -1):
        raise UsageError(f"selector must be b,y[,eigenvalue] with b = +-1, got {text!r}")
    eig = parts[2] if len(parts) == 3 else 1
    if eig not in (0, 1):
        raise UsageError("eigenvalue must be 0 or 1")
    return parts[0], parts[1], eig


def cmd_state(args):
    net = _load_network(args.network)
    b, y, eig = _parse_selector(args.selector)
    try:
        if args.format == "mps":
            factors = mps_factors(net, b, y, eig)
            out = mps_to_dict(factors, net.parties)
            out["norm"] = float(np.linalg.norm(mps_contract(factors)))
        else:
            out = state_to_dict(network_state(net, b, y, eig), net.parties)
    except CongruenceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out["selector"] = {"b": b, "y": y, "eigenvalue": eig}
    _emit(args, _dumps(out))
    return EXIT_OK


# build


def cmd_build(args):
    params = {}
    for key in ("theta", "phi", "omega"):
        v = getattr(args, key)
        if v is not None:
            try:
                params[key] = parse_angle(v)
            except ValueError as exc:
                raise UsageError(f"--{key}: cannot read angle {v!r}") from exc
    if args.graph is not None:
        try:
            params["graph"] = GraphSpec.from_dict(_load_json(args.graph))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"{args.graph}: invalid graph ({exc})") from exc
    try:
        cx = build_family(args.family, params, check=True)
    except (TightBellError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    tr = verify_tight(cx, args.tol)
    out = complex_to_dict(cx)
    out["tight"] = tr.to_dict()
    _emit(args, _dumps(out))
    return EXIT_OK if tr.passed else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="tightbell", description=__doc__.splitlines()[0])
    p.add_argument("--tol", type=float, default=1e-9, help="check tolerance (default 1e-9)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for enumeration")
    p.add_argument("--json", action="store_true", help="emit JSON instead of text/CSV")
    p.add_argument("--out", metavar="PATH", help="write output to PATH instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check tightness and self-testing of a network")
    v.add_argument("network")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bounds", help="classical, no-signalling and quantum values")
    b.add_argument("network")
    b.add_argument("--y", type=int, default=1, help="root output setting (default 1)")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sweep", help="bounds along a family of networks, as CSV")
    s.add_argument("tag", choices=SWEEP_TAGS)
    s.add_argument("--n-min", type=int, default=2)
    s.add_argument("--n-max", type=int, default=10)
    s.add_argument("--points", type=int, default=21, help="interior theta points (wbc tags)")
    s.add_argument("--omega", help="fixed omega for wbc tags (default pi/4)")
    s.add_argument("--theta-min", help="lower theta end (excluded)")
    s.add_argument("--theta-max", help="upper theta end (excluded)")
    s.add_argument("--y", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    st = sub.add_parser("state", help="maximizing state as amplitudes or MPS factors")
    st.add_argument("network")
    st.add_argument("--selector", default="1,1", help="b,y[,eigenvalue] (default 1,1)")
    st.add_argument("--format", choices=("amplitudes", "mps"), default="amplitudes")
    st.set_defaults(func=cmd_state)

    bd = sub.add_parser("build", help="build one library complex")
    bd.add_argument("family", choices=FAMILIES)
    bd.add_argument("--theta")
    bd.add_argument("--phi")
    bd.add_argument("--omega")
    bd.add_argument("--graph", help="graph JSON file for basta")
    bd.set_defaults(func=cmd_build)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.tol <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_USAGE
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
