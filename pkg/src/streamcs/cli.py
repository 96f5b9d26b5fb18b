"""Command-line harness.

Subcommands: gen | run | bench | support | debias | mismatch. Every
subcommand is deterministic given --seed and writes CSV with a header row.
Options resolve as: explicit flag > config file (key=value lines) > default.
The paper-scale studies ran at n = 6000; the defaults here are scaled to
n = 600 with proportional sparsity and measurement counts so each command
finishes at desk scale.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .metrics import write_summary
from .pipeline import PipelineConfig, PipelineError, write_emissions
from .streams import StreamConfig, gen_stream, load_stream, mismatch_expectation, save_stream

_RULE_CHOICES = ("fixed", "6pn", "5kbar")


def _read_config(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line (expected key=value): {line!r}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _resolve(args, defaults: dict):
    """flags > config file > defaults; config values are parsed by default type."""
    config = _read_config(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in config:
            raw = config[key]
            if isinstance(default, bool):
                resolved[key] = raw.lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                resolved[key] = int(raw)
            elif isinstance(default, float):
                resolved[key] = float(raw)
            elif isinstance(default, (list, tuple)):
                resolved[key] = type(default)(
                    type(default[0])(v) for v in raw.split(",")
                )
            else:
                resolved[key] = raw
        else:
            resolved[key] = default
    unknown = set(config) - set(defaults)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return argparse.Namespace(**resolved)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _resolve_m(rule: str, m: int | None, n: int, p: float) -> int:
    if rule == "fixed":
        if m is None:
            raise ValueError("--m is required with --m-rule fixed")
        return m
    if rule == "6pn":
        return max(2, round(6 * p * n))
    if rule == "5kbar":
        return max(2, round(5 * p * n))
    raise ValueError(f"unknown m rule {rule!r}")


def _resolve_lam(lam: float | None, sigma: float, n: int) -> float:
    if lam is not None:
        return lam
    if sigma <= 0:
        raise ValueError(
            "the default regularization rule 4*sigma*sqrt(2 log n) degenerates "
            "at sigma=0; pass --lam explicitly for noiseless runs"
        )
    return harness.lambda_rule(sigma, n)


def cmd_gen(args) -> int:
    opts = _resolve(
        args,
        dict(length=10_000, p=0.05, amp_low=1.0, amp_high=2.0, seed=0, out="stream.txt"),
    )
    cfg = StreamConfig(opts.p, opts.amp_low, opts.amp_high, opts.seed, opts.length)
    save_stream(gen_stream(cfg).values, opts.out)
    print(f"wrote {opts.length} entries to {opts.out}")
    return 0


def cmd_run(args) -> int:
    opts = _resolve(
        args,
        dict(
            stream="",
            length=12_000,
            p=0.05,
            amp_low=1.0,
            amp_high=2.0,
            n=600,
            tau=1,
            m=None,
            m_rule="6pn",
            sigma=0.1,
            lam=None,
            xi1=0.1,
            xi2=0,
            xi3=0,
            detector="threshold",
            mode="voting",
            ensemble="gaussian",
            seed=0,
            eps=0.0,
            max_iter=10_000,
            out="run",
        ),
    )
    if opts.stream:
        values = load_stream(opts.stream)
    else:
        values = gen_stream(
            StreamConfig(opts.p, opts.amp_low, opts.amp_high, opts.seed, opts.length)
        ).values
    m = _resolve_m(opts.m_rule, opts.m, opts.n, opts.p)
    lam = _resolve_lam(opts.lam, opts.sigma, opts.n)
    cfg = PipelineConfig(
        n=opts.n,
        lam=lam,
        tau=opts.tau,
        xi1=opts.xi1,
        xi2=opts.xi2 or None,
        xi3=opts.xi3 or None,
        detector=opts.detector,
        solver_eps=opts.eps or None,
        max_iter=opts.max_iter,
    )
    matrix = harness.gen_matrix(opts.ensemble, m, opts.n, opts.seed + 1)
    try:
        emissions, decoder = harness.run_stream(
            values, matrix, cfg, sigma=opts.sigma, noise_seed=opts.seed + 2,
            mode=opts.mode,
        )
    except PipelineError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    write_emissions(f"{opts.out}_estimates.csv", emissions)
    summary = harness.summarize_run(emissions, values, decoder)
    rows = [
        ("run", opts.n, opts.tau, m, opts.sigma, opts.seed, "stream_nev", summary.stream_nev),
        ("run", opts.n, opts.tau, m, opts.sigma, opts.seed, "mean_iterations",
         summary.mean_iterations),
        ("run", opts.n, opts.tau, m, opts.sigma, opts.seed, "windows",
         float(decoder.windows_done)),
    ]
    write_summary(f"{opts.out}_summary.csv", rows)
    print(f"stream_nev={summary.stream_nev:.6g} over {decoder.windows_done} windows")
    return 0


def cmd_bench(args) -> int:
    opts = _resolve(
        args,
        dict(n_list=[200, 500, 1000], p=0.05, sigma=0.1, windows=25, tau=1,
             ensemble="gaussian", seed=0, out="bench.csv"),
    )
    lines = ["n,arm,encode_s,setup_s,solve_s,mean_iters,encode_ops,per_window_speedup"]
    for n in opts.n_list:
        r = harness.bench_arms(
            n, p=opts.p, sigma=opts.sigma, windows=opts.windows, seed=opts.seed,
            tau=opts.tau, ensemble=opts.ensemble,
        )
        lines.append(
            f"{n},recursive_warm,{r.recursive_encode_s:.6g},{r.recursive_setup_s:.6g},"
            f"{r.recursive_solve_s:.6g},{r.recursive_iters:.6g},"
            f"{r.recursive_encode_ops},{r.per_window_speedup:.6g}"
        )
        lines.append(
            f"{n},direct_cold,{r.direct_encode_s:.6g},{r.direct_setup_s:.6g},"
            f"{r.direct_solve_s:.6g},{r.direct_iters:.6g},{r.direct_encode_ops},1"
        )
        print(
            f"n={n}: speedup x{r.per_window_speedup:.2f} "
            f"(iters {r.recursive_iters:.1f} vs {r.direct_iters:.1f}, "
            f"certified={r.both_certified})"
        )
    with open(opts.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


def cmd_support(args) -> int:
    opts = _resolve(
        args,
        dict(n=600, kappa=6, sigma=0.1, m_list=[12, 24, 36, 48, 60, 72],
             xi1_list=[0.01, 0.1, 1.0], trials=20, seed=0, out="support.csv"),
    )
    rows = harness.support_sweep(
        opts.n, opts.kappa, opts.sigma, opts.m_list, opts.xi1_list,
        trials=opts.trials, seed=opts.seed,
    )
    with open(opts.out, "w") as fh:
        fh.write("m,xi1,tpr,fpr\n")
        for m, xi1, tpr, fpr in rows:
            fh.write(f"{m},{xi1},{tpr:.17g},{fpr:.17g}\n")
    for m, xi1, tpr, fpr in rows:
        print(f"m={m} xi1={xi1}: tpr={tpr:.3f} fpr={fpr:.4f}")
    return 0


def cmd_debias(args) -> int:
    opts = _resolve(
        args,
        dict(n=400, kappa=20, m=120, sigma=0.1, k_list=[1, 2, 4, 8, 16, 32, 64],
             xi1=0.1, trials=3, seed=0, out="debias.csv"),
    )
    rows = harness.debias_curves(
        opts.n, opts.kappa, opts.m, opts.sigma, opts.k_list, xi1=opts.xi1,
        seed=opts.seed, trials=opts.trials,
    )
    with open(opts.out, "w") as fh:
        fh.write("K,scheme,mse\n")
        for k, scheme, mse in rows:
            fh.write(f"{k},{scheme},{mse:.17g}\n")
    for k, scheme, mse in rows:
        print(f"K={k:3d} {scheme:>14s}: mse={mse:.5g}")
    return 0


def cmd_mismatch(args) -> int:
    opts = _resolve(
        args,
        dict(n_list=[100, 200, 500, 1000], p_list=[0.01, 0.05, 0.1, 0.2, 0.5],
             kappa_mult=1.0, amp=1.0, out="mismatch.csv"),
    )
    rows = harness.mismatch_table(opts.n_list, opts.p_list, opts.kappa_mult, opts.amp)
    with open(opts.out, "w") as fh:
        fh.write("n,p,kappa,expected_l1_tail\n")
        for n, p, kappa, val in rows:
            fh.write(f"{n},{p},{kappa},{val:.17g}\n")
    print(f"wrote {len(rows)} rows to {opts.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamcs",
        description="Streaming compressed sensing experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value config file (flags win)")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate a sparse stream to the text format")
    p.add_argument("--length", type=int)
    p.add_argument("--p", type=float, help="probability an entry is nonzero")
    p.add_argument("--amp-low", dest="amp_low", type=float)
    p.add_argument("--amp-high", dest="amp_high", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = add("run", cmd_run, "full streaming pipeline over a stream")
    p.add_argument("--stream", help="input stream file (default: generate)")
    p.add_argument("--length", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--amp-low", dest="amp_low", type=float)
    p.add_argument("--amp-high", dest="amp_high", type=float)
    p.add_argument("--n", type=int, help="window length")
    p.add_argument("--tau", type=int, help="window step size")
    p.add_argument("--m", type=int, help="measurements per window (m-rule fixed)")
    p.add_argument("--m-rule", dest="m_rule", choices=_RULE_CHOICES)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lam", type=float, help="override 4*sigma*sqrt(2 log n)")
    p.add_argument("--xi1", type=float)
    p.add_argument("--xi2", type=int)
    p.add_argument("--xi3", type=int)
    p.add_argument("--detector", choices=("threshold", "annihilate_topk"))
    p.add_argument("--mode", choices=("voting", "average_only"))
    p.add_argument("--ensemble", choices=("gaussian", "bernoulli", "achlioptas"))
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float, help="solver eps (default 1e-6*lam)")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--out", help="output prefix")

    p = add("bench", cmd_bench, "recursive+warm vs direct+cold per-window cost")
    p.add_argument("--n-list", dest="n_list", type=_int_list)
    p.add_argument("--p", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--windows", type=int)
    p.add_argument("--tau", type=int)
    p.add_argument("--ensemble", choices=("gaussian", "bernoulli", "achlioptas"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = add("support", cmd_support, "TPR/FPR of thresholded LASSO support vs m")
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--m-list", dest="m_list", type=_int_list)
    p.add_argument("--xi1-list", dest="xi1_list", type=_float_list)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = add("debias", cmd_debias, "averaging vs voting vs plain debias on one window")
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--k-list", dest="k_list", type=_int_list)
    p.add_argument("--xi1", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = add("mismatch", cmd_mismatch, "tabulate the sparsity-truncation expectation")
    p.add_argument("--n-list", dest="n_list", type=_int_list)
    p.add_argument("--p-list", dest="p_list", type=_float_list)
    p.add_argument("--kappa-mult", dest="kappa_mult", type=float)
    p.add_argument("--amp", type=float)
    p.add_argument("--out")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
