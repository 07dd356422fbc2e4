"""Command-line interface: grow, range, normalize, fixpoint, oracle, verify."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from profilelab import harness, oracle, tree_sim
from profilelab.fixedpoint import fixpoint_iterate
from profilelab.harness import ExperimentConfig, emit_report, rep_rng
from profilelab.martingale import NCDomainError
from profilelab.normalize import l_n, log_a_bar, log_a_c
from profilelab.spectral import RangeError, range_d1, spectral_point, theta_of_c
from profilelab.tree_sim import ResourceLimitError
from profilelab.weight_model import model_from_json, preset_from_cli

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="profilelab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--preset", required=True, help="preset name or @FILE for a JSON model")
        sp.add_argument("--param", action="append", default=[], metavar="k=v")

    g = sub.add_parser("grow", help="grow one tree and export its profile")
    common(g)
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--trace", help="write the growth trace (leaf picks and atoms) as JSON")
    g.add_argument("--out")
    g.add_argument("--format", choices=("csv", "json"), default="json")

    r = sub.add_parser("range", help="admissible interval and slope range (d=1)")
    common(r)

    nz = sub.add_parser("normalize", help="normalization constants on a c- or l-grid")
    common(nz)
    nz.add_argument("--nodes", type=int, required=True)
    grp = nz.add_mutually_exclusive_group(required=True)
    grp.add_argument("--c", help="comma-separated slopes")
    grp.add_argument("--l", help="comma-separated integer levels")
    nz.add_argument("--out")

    f = sub.add_parser("fixpoint", help="population-dynamics sampling of the limit")
    common(f)
    f.add_argument("--theta", required=True, help="real theta (comma-separated for d>1)")
    f.add_argument("--pool", type=int, required=True, metavar="M")
    f.add_argument("--iters", type=int, required=True, metavar="K")
    f.add_argument("--seed", type=int, required=True)
    f.add_argument("--samples", help="also dump the final pool to this CSV")
    f.add_argument("--out")

    o = sub.add_parser("oracle", help="exact small-n mean profile and martingale check")
    common(o)
    o.add_argument("--nodes", type=int, required=True)
    o.add_argument("--martingale-check", action="store_true")
    o.add_argument("--out")

    v = sub.add_parser("verify", help="run the gate suites")
    common(v)
    v.add_argument("--suite", choices=("identity", "convergence", "all"), default="identity")
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--config", help="JSON file mirroring ExperimentConfig")
    v.add_argument("--out")
    v.add_argument("--format", choices=("csv", "json"), default="json")
    return p


def _model(args):
    if args.preset.startswith("@"):
        with open(args.preset[1:]) as fh:
            return model_from_json(fh.read())
    return preset_from_cli(args.preset, args.param)


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _profile_text(prof, fmt: str) -> str:
    items = prof.sorted_items()
    if fmt == "csv":
        lines = [",".join(str(c) for c in l) + f",{u}" for l, u in items]
        return "\n".join(lines) + "\n"
    doc = {"n": prof.n, "profile": [{"l": list(l), "u": u} for l, u in items]}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _cmd_grow(args) -> int:
    model = _model(args)
    rng = rep_rng(args.seed, 0, 0)
    if args.trace:
        tree, trace = tree_sim.grow(model, args.nodes, rng, trace=True)
        with open(args.trace, "w") as fh:
            json.dump({"steps": [list(s) for s in trace.steps]}, fh)
        prof = tree_sim.profile(tree)
    else:
        prof = tree_sim.sample_profile(model, args.nodes, rng)
    _write(_profile_text(prof, args.format), args.out)
    return 0


def _cmd_range(args) -> int:
    dom = range_d1(_model(args))
    doc = {
        "z0": dom.z0,
        "z1": dom.z1,
        "lambda_star": [dom.c_lo, dom.c_hi],
        "theta_interval": [dom.theta_low, dom.theta_high if math.isfinite(dom.theta_high) else None],
    }
    _write(json.dumps(doc, sort_keys=True, indent=2) + "\n", None)
    return 0


def _cmd_normalize(args) -> int:
    model = _model(args)
    if model.d != 1:
        raise RangeError("the normalize subcommand handles d = 1 grids")
    n = args.nodes
    lines = []
    if args.c is not None:
        lines.append("c,theta,l_n,log_A_c")
        for tok in args.c.split(","):
            c = float(tok)
            theta = float(theta_of_c(model, c)[0])
            lev = int(l_n(c, n, model.b)[0])
            lines.append(f"{c!r},{theta!r},{lev},{log_a_c(model, n, c)!r}")
    else:
        lines.append("l,theta,log_A_bar")
        for tok in args.l.split(","):
            l = int(tok)
            c = (model.b - 1) * l / math.log(n)
            theta = float(theta_of_c(model, c)[0])
            lines.append(f"{l},{theta!r},{log_a_bar(model, n, l)!r}")
    _write("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_fixpoint(args) -> int:
    model = _model(args)
    theta = np.array([float(t) for t in args.theta.split(",")])
    if theta.size != model.d:
        raise RangeError(f"theta has {theta.size} components, model has d={model.d}")
    pool = fixpoint_iterate(
        model, theta, pool_size=args.pool, iterations=args.iters,
        rng=rep_rng(args.seed, 2, 0),
    )
    doc = {
        "theta": list(pool.theta) if model.d > 1 else pool.theta[0],
        "mean": pool.mean,
        "var": pool.variance,
        "ks": pool.ks_to_previous,
    }
    if args.samples:
        np.savetxt(args.samples, pool.samples, fmt="%.17g")
        doc["samples_path"] = args.samples
    _write(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    return 1 if pool.divergent else 0


def _cmd_oracle(args) -> int:
    model = _model(args)
    if args.martingale_check:
        grid = [np.full(model.d, t) for t in (-math.log(2.0), 0.0, math.log(2.0))]
        dev = oracle.conditional_martingale_check(model, args.nodes, grid)
        _write(json.dumps({"n": args.nodes, "max_deviation": dev}, sort_keys=True) + "\n", args.out)
        return 0
    means = oracle.exact_mean_profile(model, args.nodes)
    lines = [",".join(str(c) for c in l) + f",{v!r}" for l, v in sorted(means.items())]
    _write("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_verify(args) -> int:
    model = _model(args)
    cfg = ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_json(fh.read())
    cfg.preset = model.name
    cfg.params = dict(cfg.params)
    cfg.seed = args.seed
    if args.preset.startswith("@"):
        raise RangeError("verify works on catalogued presets")
    cfg.params = _cli_params(args.param)

    ok = True
    pieces = {}
    if args.suite in ("identity", "all"):
        gates = harness.run_identity_suite(cfg)
        ok = ok and all(g.passed for g in gates if g.hard)
        pieces["identity"] = json.loads(emit_report(gates, "json", None))
    if args.suite in ("convergence", "all"):
        if not cfg.c_grid and not cfg.l_grid:
            sp = spectral_point(cfg.model(), np.zeros(cfg.model().d))
            cfg.c_grid = (float(sp.gradA[0]),) if cfg.model().d == 1 else (list(map(float, sp.gradA)),)
        ns = cfg.n if isinstance(cfg.n, list) else [cfg.n]
        reports = []
        for n in ns:
            sub = ExperimentConfig(**{**cfg.__dict__, "n": int(n)})
            rep = harness.run_convergence(sub)
            for row in rep.rows:
                ok = ok and abs(row["ratio_mean"] - 1.0) < cfg.thresholds["ratio_mean_rel"]
            reports.append(rep.as_dict())
        pieces["convergence"] = reports
    doc = {"suite": args.suite, "seed": args.seed, "pass": ok, "reports": pieces}
    if args.format == "json" or "identity" not in pieces:
        _write(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    else:
        gates = pieces["identity"]["gates"]
        lines = ["name,passed,hard"] + [f"{g['name']},{g['passed']},{g['hard']}" for g in gates]
        _write("\n".join(lines) + "\n", args.out)
    return 0 if ok else 1


def _cli_params(params) -> dict:
    out = {}
    for s in params:
        k, _, v = s.partition("=")
        out[k] = tuple(int(x) for x in v.split(":")) if k == "c" else v
    return out


_COMMANDS = {
    "grow": _cmd_grow,
    "range": _cmd_range,
    "normalize": _cmd_normalize,
    "fixpoint": _cmd_fixpoint,
    "oracle": _cmd_oracle,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RangeError, NCDomainError, ResourceLimitError, OSError, KeyError) as exc:
        print(f"profilelab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
