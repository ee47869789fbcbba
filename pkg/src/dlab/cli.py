"""Command-line entry point: ``dlab run|order|study|bench``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__, harness
from .metrics import OrderCase, estimate_order, order_errors, sample_size_study, exact_draw
from .rng import RngStream
from .targets import GaussianMixture, benchmark_mixture

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _load(path: str, seed: int | None, out: str | None) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise harness.ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    cfg = harness.parse_config(text)
    if seed is not None:
        if seed < 0:
            raise harness.ConfigError("--seed must be >= 0")
        cfg["sampling"]["master_seed"] = seed
    if out is not None:
        cfg["output"]["dir"] = out
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args.config, args.seed, args.out)
    res = harness.run_grid(cfg, threads=args.threads)
    out = cfg["output"]["dir"]
    print(f"{len(res.records)} cells run, {len(res.skipped)} skipped, {len(res.errors)} failed -> {out}")
    for s in res.skipped:
        logging.info("skipped cell %d (%s / %s / %s): %s", s["cell"], s["schedule"], s["sampler"], s["guidance"], s["reason"])
    for e in res.errors:
        print(f"cell {e['cell']} failed: {e['error']}", file=sys.stderr)
    return EXIT_RUNTIME if res.errors else EXIT_OK


def cmd_order(args) -> int:
    case = OrderCase()
    solvers = ["euler", "heun"] if args.solver == "both" else [args.solver]
    for solver in solvers:
        errs = order_errors(solver, case, args.steps)
        print(f"solver={solver}")
        print(f"  {'N':>6}  {'max |error|':>14}")
        for N, e in zip(args.steps, errs):
            print(f"  {N:>6d}  {e:>14.6e}")
        order = estimate_order(solver, case, args.steps)
        print(f"  order = {order:.4f}")
    return EXIT_OK


def _study_draw(name: str, gmm: GaussianMixture):
    if name == "exact":
        return exact_draw(gmm)
    sch, smp = harness.reference_specs(name)

    def draw(n, gen):
        return harness.run_sampler(gmm, sch, smp, None, n, gen).final

    return draw


def cmd_study(args) -> int:
    gmm = benchmark_mixture()
    st = sample_size_study(_study_draw(args.sampler, gmm), gmm, args.sizes, args.repeats, RngStream(args.seed, 0))
    lines = ["size,score_mean,score_std,frechet_mean,frechet_std"]
    for (n, sm, ss), (_, fm, fs) in zip(st.score.points, st.frechet.points):
        lines.append(f"{int(n)},{sm!r},{ss!r},{fm!r},{fs!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write(text)
    print(f"sampler={args.sampler} repeats={args.repeats} (x axis: generated sample count)")
    print(f"{'size':>8}  {'score mean':>12}  {'score std':>11}  {'frechet mean':>13}  {'frechet std':>12}")
    for (n, sm, ss), (_, fm, fs) in zip(st.score.points, st.frechet.points):
        print(f"{int(n):>8d}  {sm:>12.6f}  {ss:>11.3e}  {fm:>13.3e}  {fs:>12.3e}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args.config, args.seed, args.out)
    if args.repeats < 1:
        raise harness.ConfigError("--repeats must be >= 1")
    records = harness.bench(cfg, repeats=args.repeats, threads=args.threads)
    if not records:
        print("no runnable cells", file=sys.stderr)
        return EXIT_RUNTIME
    csv_text, table = harness.bench_table(records)
    out = cfg["output"]["dir"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "bench.csv"), "w") as fh:
        fh.write(csv_text)
    print(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dlab", description="Diffusion sampling laboratory on Gaussian-mixture oracles.")
    p.add_argument("--version", action="version", version=f"dlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a schedule x sampler x guidance grid")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=None, help="override sampling.master_seed")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--out", default=None, help="override output.dir")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("order", help="empirical convergence order of the ODE solvers")
    o.add_argument("--solver", choices=["euler", "heun", "both"], default="both")
    o.add_argument("--steps", type=_int_list, default=[8, 16, 32, 64, 128])
    o.set_defaults(func=cmd_order)

    s = sub.add_parser("study", help="metric mean/std as a function of sample count")
    s.add_argument("--sizes", type=_int_list, default=[1000, 3162, 10000, 31623])
    s.add_argument("--repeats", type=int, default=10)
    s.add_argument("--sampler", choices=["exact", *harness.REFERENCE], default="exact")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None, help="also write the table as CSV")
    s.set_defaults(func=cmd_study)

    b = sub.add_parser("bench", help="median wall-clock and NFE per sampler")
    b.add_argument("--config", required=True)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
