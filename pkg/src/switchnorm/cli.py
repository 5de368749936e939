"""Command line entry point.

Exit codes: 0 when every check passes, 1 when a check fails or the library
raises, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import report_weights, verify_remark1_in, verify_remark1_ln
from .errors import SwitchNormError
from .harness.gradcheck import GROUPS, gradcheck
from .harness.sweep import batch_size_sweep
from .harness.train import TaskConfig, TrainConfig, run_experiment
from .snlayer import load_sn_params, save_sn_params
from .stats import Scope, stats_direct, stats_reuse
from .tensor import Rng, tensor_randn


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"values must be >= 1, got {text!r}")
    return values


def _shape(text: str) -> tuple[int, int, int, int]:
    values = _int_list(text)
    if len(values) != 4:
        raise argparse.ArgumentTypeError(f"expected N,C,H,W, got {text!r}")
    return tuple(values)


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _write(out: Path, name: str, lines: list[str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text("\n".join(lines) + "\n")


def _emit(out: Path, name: str, lines: list[str]) -> None:
    for line in lines:
        print(line)
    _write(out, name, lines)


def cmd_gradcheck(args) -> int:
    result = gradcheck(args.shape, args.seed, args.eps_fd)
    lines = [f"{g} {result.errors[g]:.6e}" for g in GROUPS]
    _emit(args.out, "gradcheck.txt", lines)
    return 0 if result.passed(args.threshold) else 1


def cmd_equiv(args) -> int:
    rng = Rng(args.seed)
    lines = ["trial,n,c,h,w,max_abs_diff"]
    worst = 0.0
    for trial in range(args.trials):
        shape = [1 + int(u * m) for u, m in zip(rng.uniform(4), args.max_shape)]
        x = tensor_randn(rng, *shape)
        diff = 0.0
        for reused, scope in zip(stats_reuse(x), (Scope.IN, Scope.LN, Scope.BN)):
            direct = stats_direct(x, scope)
            diff = max(diff, np.abs(reused.mu - direct.mu).max(),
                       np.abs(reused.var - direct.var).max())
        worst = max(worst, diff)
        lines.append(f"{trial},{','.join(map(str, shape))},{diff:.6e}")
    _write(args.out, "equiv.csv", lines)
    ok = worst < args.threshold
    print(f"trials={args.trials} max_abs_diff={worst:.6e} {'pass' if ok else 'fail'}")
    return 0 if ok else 1


def _train_config(args, **overrides) -> TrainConfig:
    fields = dict(minibatch_size=args.minibatch_size, steps=args.steps, lr=args.lr,
                  momentum=args.momentum, weight_decay_main=args.wd_main,
                  weight_decay_affine=args.wd_affine, weight_decay_lambda=args.wd_lambda,
                  seed=args.seed, eval_mode=args.eval_mode, sample_batches=args.sample_batches,
                  ma_momentum=args.ma_momentum, lr_decay_at=args.lr_decay_at,
                  lr_decay_factor=args.lr_decay_factor)
    fields.update(overrides)
    return TrainConfig(**fields)


def _task_config(args) -> TaskConfig:
    return TaskConfig(classes=args.classes, noise=args.noise, depth=args.depth,
                      net_width=args.net_width)


def cmd_train(args) -> int:
    cfg = _train_config(args)
    result = run_experiment(cfg, _task_config(args))
    args.out.mkdir(parents=True, exist_ok=True)
    result.log.write_csv(args.out / "metrics.csv")
    names = [f"sn{i}" for i in range(len(result.net.sn))]
    for name, params in zip(names, result.net.sn):
        save_sn_params(args.out / "params", name, params)
    report_weights(result.net.sn, f"batch={cfg.minibatch_size}", names).to_csv(
        args.out / "weights.csv")
    acc = (result.acc_batch_average if cfg.eval_mode == "batch_average"
           else result.acc_moving_average)
    _emit(args.out, "train_summary.txt",
          [f"final_loss={result.log.loss[-1]:.6f} train_acc={result.acc_train:.6f} "
           f"eval_acc={acc:.6f} eval_mode={cfg.eval_mode}"])
    return 0


def cmd_calibrate(args) -> int:
    cfg = _train_config(args)
    result = run_experiment(cfg, _task_config(args))
    lines = ["layer,channel,mode,bn_mu,bn_var"]
    for i, (ba, ma) in enumerate(zip(result.batch_average, result.net.running)):
        for c in range(ba.bn_mu.size):
            lines.append(f"sn{i},{c},batch_average,{ba.bn_mu[c]:.17g},{ba.bn_var[c]:.17g}")
            lines.append(f"sn{i},{c},moving_average,{ma.bn_mu[c]:.17g},{ma.bn_var[c]:.17g}")
    _write(args.out, "calibration.csv", lines)
    _emit(args.out, "calibration_summary.txt",
          [f"acc_batch_average={result.acc_batch_average:.6f} "
           f"acc_moving_average={result.acc_moving_average:.6f}"])
    return 0


def cmd_sweep(args) -> int:
    template = _train_config(args)
    seeds = [args.seed + k for k in range(args.seeds)]
    report = batch_size_sweep(template, args.sizes, seeds, _task_config(args))
    args.out.mkdir(parents=True, exist_ok=True)
    report.write_csv(args.out / "sweep.csv")
    _emit(args.out, "sweep_summary.txt", [report.summary()])
    return 0 if report.direction else 1


def cmd_remark1(args) -> int:
    common = (args.c_out, args.patch_dim, args.patches, args.gamma, args.beta)
    in_err = verify_remark1_in(Rng(args.seed), *common)
    ln_gap = verify_remark1_ln(Rng(args.seed), *common)
    _emit(args.out, "remark1.txt", [f"in_identity_error={in_err:.6e}",
                                    f"ln_discrepancy={ln_gap:.6e}"])
    return 0 if in_err < args.threshold else 1


def cmd_weights_report(args) -> int:
    manifests = []
    for path in args.params:
        manifests += sorted(path.glob("*.manifest")) if path.is_dir() else [path]
    if not manifests:
        print("no parameter manifests found", file=sys.stderr)
        return 1
    loaded = [load_sn_params(m) for m in manifests]
    report = report_weights([p for _, p in loaded], args.label, [n for n, _ in loaded])
    args.out.mkdir(parents=True, exist_ok=True)
    report.to_csv(args.out / "weights.csv")
    print("mean mu  " + " ".join(f"{v:.6f}" for v in report.mean_mu))
    print("mean var " + " ".join(f"{v:.6f}" for v in report.mean_var))
    return 0


def _add_training_flags(p: argparse.ArgumentParser, steps: int = 1000) -> None:
    d = TrainConfig()
    t = TaskConfig()
    p.add_argument("--minibatch-size", type=int, default=d.minibatch_size)
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--wd-main", type=float, default=d.weight_decay_main)
    p.add_argument("--wd-affine", type=float, default=d.weight_decay_affine)
    p.add_argument("--wd-lambda", type=float, default=d.weight_decay_lambda)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-mode", choices=("batch_average", "moving_average"),
                   default=d.eval_mode)
    p.add_argument("--sample-batches", type=int, default=d.sample_batches)
    p.add_argument("--ma-momentum", type=float, default=d.ma_momentum)
    p.add_argument("--lr-decay-at", type=int, default=None)
    p.add_argument("--lr-decay-factor", type=float, default=d.lr_decay_factor)
    p.add_argument("--classes", type=int, default=t.classes)
    p.add_argument("--noise", type=float, default=t.noise)
    p.add_argument("--depth", type=int, default=t.depth)
    p.add_argument("--net-width", type=int, default=t.net_width)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchnorm", allow_abbrev=False,
                                     description="Switchable Normalization checks and experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text, allow_abbrev=False)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.set_defaults(func=func)
        return p

    p = command("gradcheck", cmd_gradcheck, "finite-difference check of the SN backward pass")
    p.add_argument("--shape", type=_shape, default=(2, 3, 4, 4))
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--eps-fd", type=_positive_float, default=1e-5)
    p.add_argument("--threshold", type=_positive_float, default=1e-5)

    p = command("equiv", cmd_equiv, "reused vs directly summed statistics")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--max-shape", type=_shape, default=(8, 16, 8, 8))
    p.add_argument("--threshold", type=_positive_float, default=1e-12)

    p = command("train", cmd_train, "train the toy network")
    _add_training_flags(p)

    p = command("calibrate", cmd_calibrate, "train, then compare batch and moving averages")
    _add_training_flags(p)

    p = command("sweep", cmd_sweep, "importance weights across minibatch sizes")
    _add_training_flags(p)
    p.add_argument("--sizes", type=_int_list, default=[2, 32])
    p.add_argument("--seeds", type=int, default=5)

    p = command("remark1", cmd_remark1, "IN and LN against filter-norm closed forms")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c-out", type=int, default=4)
    p.add_argument("--patch-dim", type=int, default=8)
    p.add_argument("--patches", type=int, default=256)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=-1.0)
    p.add_argument("--threshold", type=_positive_float, default=1e-8)

    p = command("weights-report", cmd_weights_report, "importance weights of saved layers")
    p.add_argument("--params", type=Path, nargs="+", required=True,
                   help="manifest files or directories holding them")
    p.add_argument("--label", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SwitchNormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
