"""Command-line entry point: ``ramp run | verify | sweep | plotdata``."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import audits
from .approximator import forward, load_mlp
from .config import ConfigError, RampConfig, parse_config


def _with_seed(cfg: RampConfig, seed: int | None) -> RampConfig:
    if seed is None:
        return cfg
    if seed < 0:
        raise ConfigError("trainer.seed: must be >= 0")
    return dataclasses.replace(cfg, trainer=dataclasses.replace(cfg.trainer, seed=seed))


def _run_one(cfg: RampConfig, out: Path, quiet: bool) -> float:
    from .trainer import run_training

    def progress(log):
        if not quiet:
            print(f"epoch {log.epoch:4d}  steps {log.env_steps:8d}  coverage {log.coverage_pct:6.2f}%  "
                  f"entropy {log.entropy_est:.3f}", flush=True)

    logs = run_training(cfg, out, progress)
    return logs[-1].coverage_pct


def cmd_run(args) -> int:
    cfg = _with_seed(parse_config(args.config), args.seed)
    out = Path(args.out) if args.out else Path("runs") / f"{Path(args.config).stem}_seed{cfg.trainer.seed}"
    cov = _run_one(cfg, out, args.quiet)
    print(f"final coverage {cov:.2f}% -> {out}")
    return 0


def cmd_verify(args) -> int:
    names = list(audits.AUDITS) if not args.only else args.only
    unknown = [n for n in names if n not in audits.AUDITS]
    if unknown:
        print(f"unknown audit(s): {', '.join(unknown)}; choose from {', '.join(audits.AUDITS)}", file=sys.stderr)
        return 2
    ok = True
    for name in names:
        res = audits.run_audit(name)
        print(f"{'PASS' if res.passed else 'FAIL'} {name}: {res.detail} [{res.seconds:.1f}s]", flush=True)
        if not res.passed:
            ok = False
            print(f"  counterexample: {res.counterexample!r}")
    return 0 if ok else 1


def _sweep_job(job):
    cfg, out = job
    return cfg.trainer.seed, _run_one(cfg, Path(out), True)


def cmd_sweep(args) -> int:
    base = parse_config(args.config)
    out = Path(args.out) if args.out else Path("runs") / f"{Path(args.config).stem}_sweep"
    jobs = [(_with_seed(base, s), str(out / f"seed_{s}")) for s in args.seeds]
    if args.parallel:
        cap = int(os.environ.get("RAMP_THREADS", os.cpu_count() or 1))
        with ProcessPoolExecutor(max_workers=max(1, min(cap, len(jobs)))) as ex:
            results = list(ex.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    covs = np.array([c for _, c in results])
    for seed, cov in results:
        print(f"seed {seed}: final coverage {cov:.2f}%")
    print(f"mean {covs.mean():.2f}% +- {covs.std():.2f}")
    return 0


def cmd_plotdata(args) -> int:
    run = Path(args.run)
    dest = open(args.out, "w") if args.out else sys.stdout
    try:
        if args.grid:
            ckpt = run / "checkpoints" / f"epoch_{args.epoch}" / "reward.bin"
            if not ckpt.is_file():
                print(f"no reward checkpoint at {ckpt}", file=sys.stderr)
                return 1
            net = load_mlp(ckpt)
            axis = -1.0 + (np.arange(args.grid) + 0.5) * 2.0 / args.grid
            xx, yy = np.meshgrid(axis, axis, indexing="xy")
            pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
            f = forward(net, pts)[:, 0]
            dest.write("x,y,f_phi_value\n")
            for (x, y), v in zip(pts, f):
                dest.write(f"{x!r},{y!r},{float(v)!r}\n")
        else:
            src = run / f"states_epoch_{args.epoch}.csv"
            if not src.is_file():
                print(f"no scatter dump at {src}", file=sys.stderr)
                return 1
            dest.write(src.read_text())
    finally:
        if dest is not sys.stdout:
            dest.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ramp", description="Exploration by running away from past experience.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train one configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run the exact oracle audits")
    v.add_argument("--only", action="append", metavar="NAME", help=f"one of: {', '.join(audits.AUDITS)}")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="train one configuration over several seeds")
    s.add_argument("--config", required=True)
    s.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    s.add_argument("--out")
    s.add_argument("--parallel", action="store_true", help="one process per seed, capped by RAMP_THREADS")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("plotdata", help="emit (x, y, f_phi_value) scatter data for an epoch")
    d.add_argument("--run", required=True)
    d.add_argument("--epoch", type=int, required=True)
    d.add_argument("--grid", type=int, default=0, help="evaluate the reward checkpoint on an N x N grid instead")
    d.add_argument("--out")
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FloatingPointError, OSError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
