"""Command line entry point.

Subcommands: generate, energy, periodic, continuum, metrics, suite, plan.
Global flags: --config, --out, --threads, --seed.
Exit codes: 0 success, 2 config error, 3 partial sweep failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"config error: {path}: {exc}") from exc


def _add_common(p):
    p.add_argument("--config", help="sweep/config JSON file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="settling",
                                     description="hindered-settling simulators")
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name in ("generate", "energy", "periodic", "continuum", "metrics",
                 "suite", "plan"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "periodic":
            p.add_argument("--rho", type=float, action="append")
            p.add_argument("--tol", type=float, default=1e-6)
            p.add_argument("--a-per", action="store_true",
                           help="extrapolate the first-order coefficient")
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except SystemExit:
        raise
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args):
    from . import continuum, freespace, harness, periodic
    from .configs import save_config_csv
    os.makedirs(args.out, exist_ok=True)

    if args.cmd == "plan":
        cfg = _require_config(args)
        for line in harness.plan(cfg):
            print(line)
        return 0

    if args.cmd == "periodic":
        rhos = args.rho or [0.05]
        results = []
        for rho in rhos:
            res = periodic.lattice_energy(rho, tol=args.tol, full_result=True)
            results.append({"rho": rho, "K": res.K, "S": res.value,
                            "tail_bound": res.tail_bound})
        out = {"results": results}
        if args.a_per and len(rhos) >= 3:
            a, resid, info = periodic.a_per_estimate(rhos, tol=args.tol)
            out.update({"a_per": a, "residual": resid, "info": info})
        path = os.path.join(args.out, "periodic.json")
        with open(path, "w") as fh:
            json.dump(out, fh, indent=1, sort_keys=True)
        print(json.dumps(out["results"], indent=1))
        return 0

    cfg = _require_config(args)

    if args.cmd == "generate":
        records = []
        for i, spec in enumerate(cfg.get("sweep", [])):
            spec = dict(spec)
            spec.setdefault("seed", args.seed)
            config, density = harness.build_configuration(spec)
            base = os.path.join(args.out, f"config_{i:03d}")
            meta = save_config_csv(config, base + ".csv", base + ".json")
            records.append(meta)
        print(f"wrote {len(records)} configurations to {args.out}")
        return 0

    if args.cmd in ("energy", "continuum", "metrics"):
        wanted = {"energy": ("freespace", "torus"),
                  "continuum": ("defect", "vstar", "empirical"),
                  "metrics": ("metrics",)}[args.cmd]
        sweep = []
        for spec in cfg.get("sweep", []):
            spec = dict(spec)
            spec["pipelines"] = [p for p in spec.get("pipelines", wanted)
                                 if p in wanted] or list(wanted)
            sweep.append(spec)
        sub_cfg = dict(cfg)
        sub_cfg["sweep"] = sweep
        records = harness.run(sub_cfg, out_dir=args.out, threads=args.threads)
        bad = [r for r in records if r.status != "ok"]
        for rec in records:
            print(rec.csv_row())
        return 3 if bad else 0

    if args.cmd == "suite":
        opts = cfg.get("suite", {})
        verdicts = harness.scaling_suite(
            r=opts.get("r", 0.05), M_list=tuple(opts.get("M_list", (4, 6, 8))),
            thresholds=cfg.get("thresholds"), grid=opts.get("grid"),
            r_sweep=tuple(opts.get("r_sweep", (0.02, 0.04, 0.08))),
            ill_M_list=tuple(opts.get("ill_M_list", (8, 12, 16))))
        path = os.path.join(args.out, "verdicts.json")
        with open(path, "w") as fh:
            json.dump(verdicts, fh, indent=1, sort_keys=True, default=str)
        print(json.dumps({k: v["pass"] if isinstance(v, dict) else v
                          for k, v in verdicts.items()}, indent=1))
        return 0 if verdicts["pass"] else 3

    raise ValueError(f"unhandled command {args.cmd}")


def _require_config(args):
    if not args.config:
        raise SystemExit("config error: --config is required for this command")
    return _load_config(args.config)


if __name__ == "__main__":
    sys.exit(main())
