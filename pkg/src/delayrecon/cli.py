"""Command-line interface.

Subcommands cover the individual pipeline stages (simulate, embed,
select-params, cluster, train, evaluate, pod) plus the end-to-end
experiment (run) and report re-emission (report).

Exit codes: 0 success, 1 usage or config error, 2 runtime/numeric error.
"""

import argparse
import sys

import numpy as np

from . import dmat, dynamics, harness, model
from .embedding import (DelayConfig, average_mutual_information, cao_curves,
                        delay_embed, select_dim, select_tau, vector_delay_embed)
from .metrics import KernelSpec
from .partition import build_measure_pairs, constrained_kmeans
from .pod import pod_basis, pod_project, pod_reconstruct


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    pass


def _add_global_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="root RNG seed")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--deterministic", choices=["on", "off"], default="on",
                   help="fixed-order reductions (reserved; echoed in reports)")


def _load_matrix(path, column=None):
    if str(path).endswith(".dmat"):
        sections = dmat.load_dmat(path)
        mat = sections["states"] if "states" in sections else next(iter(sections.values()))
    else:
        mat = harness.load_csv_series(path)
    if column is not None:
        return mat[:, column]
    return mat


def _cfg_from_args(args):
    try:
        mapping = {}
        if args.config:
            mapping = harness.parse_config_file(args.config)
        if getattr(args, "system", None):
            mapping["system"] = args.system
        if args.seed is not None:
            mapping["seed"] = str(args.seed)
        if args.deterministic:
            mapping["deterministic"] = args.deterministic
        return harness.config_from_mapping(mapping)
    except (ValueError, OSError) as exc:  # bad config file or values
        raise UsageError(str(exc)) from exc


def _cmd_simulate(args):
    cfg = _cfg_from_args(args)
    system = dynamics.system_from_name(cfg.system or "lorenz63")
    n_keep = args.steps if args.steps is not None else cfg.n_train_pool + cfg.n_test
    traj = dynamics.simulate(system, cfg.x0, cfg.dt, cfg.n_transient, n_keep)
    states = traj.states
    if args.noise:
        variances = np.full(states.shape[1], float(args.noise))
        states = states + dynamics.gaussian_noise_matrix(
            harness.derive_seed(cfg.seed, "noise"), 0, len(states), variances)
    out = f"{args.out}/trajectory.dmat"
    dmat.save_dmat(out, {"times": traj.times[None, :], "states": states})
    print(f"wrote {out} ({len(states)} x {states.shape[1]})")
    return 0


def _cmd_embed(args):
    cfg = _cfg_from_args(args)
    delay_cfg = DelayConfig(cfg.tau_steps, cfg.m, cfg.direction)
    data = _load_matrix(args.input)
    if args.column is not None:
        state = delay_embed(np.asarray(data)[:, args.column], delay_cfg)
    elif data.ndim == 1 or data.shape[1] == 1:
        state = delay_embed(np.asarray(data).ravel(), delay_cfg)
    else:
        state = vector_delay_embed(data, delay_cfg)
    out = f"{args.out}/delay.dmat"
    dmat.save_dmat(out, {
        "delay": state.values,
        "index_offset": np.array([[float(state.index_offset)]]),
    })
    print(f"wrote {out} ({len(state)} x {state.values.shape[1]}, offset {state.index_offset})")
    return 0


def _cmd_select_params(args):
    series = np.asarray(_load_matrix(args.input, column=args.column)).ravel()
    ami = average_mutual_information(series, args.max_lag, args.bins)
    tau, tau_fallback = select_tau(ami)
    e1, e2 = cao_curves(series, tau, args.max_dim)
    m, m_fallback = select_dim(e1, args.threshold)
    with open(f"{args.out}/ami.csv", "w") as fh:
        fh.write("lag,ami\n")
        for lag, v in enumerate(ami, start=1):
            fh.write(f"{lag},{v:.12g}\n")
    with open(f"{args.out}/cao.csv", "w") as fh:
        fh.write("dim,e1,e2\n")
        for d, (a, b) in enumerate(zip(e1, e2), start=1):
            fh.write(f"{d},{a:.12g},{b:.12g}\n")
    print(f"tau_steps = {tau}{' (fallback: argmin)' if tau_fallback else ''}")
    print(f"m = {m}{' (fallback: argmax)' if m_fallback else ''}")
    print(f"wrote {args.out}/ami.csv and {args.out}/cao.csv")
    return 0


def _cmd_cluster(args):
    cfg = _cfg_from_args(args)
    points = _load_matrix(args.input)
    k = args.k if args.k is not None else cfg.k_cells
    labels, centers = constrained_kmeans(points, k, seed=harness.derive_seed(cfg.seed, "kmeans"))
    out = f"{args.out}/clusters.dmat"
    dmat.save_dmat(out, {"labels": labels.astype(np.float64)[None, :], "centers": centers})
    sizes = np.bincount(labels, minlength=k)
    print(f"wrote {out}; cell sizes {sizes.min()}..{sizes.max()}")
    return 0


def _cmd_train(args):
    cfg = _cfg_from_args(args)
    x = _load_matrix(args.delay)
    y = _load_matrix(args.full)
    if len(x) != len(y):
        raise ValueError(f"row mismatch: {len(x)} delay rows vs {len(y)} states")
    dims = (x.shape[1],) + tuple(cfg.hidden_dims) + (y.shape[1],)
    params = model.init_mlp(dims, seed=harness.derive_seed(cfg.seed, "init"))
    if args.loss == "pointwise":
        data = (x, y)
    else:
        labels, _ = constrained_kmeans(x, cfg.k_cells, seed=harness.derive_seed(cfg.seed, "kmeans"))
        data = build_measure_pairs(y, x, labels)
    tcfg = model.TrainConfig(n_steps=cfg.n_steps, lr=cfg.lr, seed=cfg.seed, loss=args.loss,
                             kernel=cfg.kernel, minibatch_per_measure=cfg.minibatch_per_measure)
    params, history = model.train(params, data, tcfg)
    out = f"{args.out}/model_{args.loss}.dmat"
    dmat.save_dmat(out, harness.params_to_sections(params))
    with open(f"{args.out}/loss_{args.loss}.csv", "w") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(history):
            fh.write(f"{i},{v:.12g}\n")
    print(f"wrote {out}; final loss {history[-1]:.6g}" if len(history)
          else f"wrote {out}; no steps run")
    return 0


def _cmd_evaluate(args):
    params = harness.params_from_sections(dmat.load_dmat(args.checkpoint))
    x = _load_matrix(args.delay)
    y = _load_matrix(args.full)
    value = model.evaluate_mse(params, x, y)
    print(f"mse {value:.12g}")
    return 0


def _cmd_pod(args):
    snapshots = _load_matrix(args.input)
    basis = pod_basis(snapshots, args.n_pod)
    out = f"{args.out}/pod_basis.dmat"
    dmat.save_dmat(out, {
        "mean": basis.mean[None, :],
        "modes": basis.modes,
        "eigenvalues": basis.eigenvalues[None, :],
    })
    coeffs = pod_project(basis, snapshots)
    dmat.save_dmat(f"{args.out}/pod_coeffs.dmat", {"coeffs": coeffs})
    recon = pod_reconstruct(basis, coeffs)
    denom = ((snapshots - snapshots.mean(axis=0)) ** 2).sum()
    err = float(((recon - snapshots) ** 2).sum() / denom) if denom > 0 else 0.0
    print(f"wrote {out}; relative reconstruction error {err:.6g}")
    return 0


def _cmd_run(args):
    cfg = _cfg_from_args(args)
    report = harness.run_experiment(cfg, out_dir=args.out)
    print(harness._report_table_text(report), end="")
    print(f"(wall clock {report.wall_clock:.1f}s; artifacts in {args.out})")
    return 0


def _cmd_report(args):
    with open(args.input) as fh:
        rows = [line.rstrip("\n").split(",", 1) for line in fh if line.strip()]
    if rows and rows[0] == ["metric", "value"]:
        rows = rows[1:]
    report = harness.Report(metrics=dict(rows), loss_pointwise=np.empty(0),
                            loss_measure=np.empty(0), wall_clock=0.0)
    if args.format == "text":
        print(harness._report_table_text(report), end="")
    else:
        print(harness._report_csv_text(report), end="")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="delayrecon",
                     description="Full-state reconstruction from time-lagged partial observations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a benchmark system to a DMAT file")
    p.add_argument("--system", default="lorenz63")
    p.add_argument("--steps", type=int, default=None, help="kept steps after the transient")
    p.add_argument("--noise", type=float, default=None, help="per-dimension noise variance")
    _add_global_flags(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("embed", help="delay-embed a series from CSV/DMAT")
    p.add_argument("--input", required=True)
    p.add_argument("--column", type=int, default=None, help="observable column for matrices")
    _add_global_flags(p)
    p.set_defaults(fn=_cmd_embed)

    p = sub.add_parser("select-params", help="AMI and neighbor-expansion parameter selection")
    p.add_argument("--input", required=True)
    p.add_argument("--column", type=int, default=0)
    p.add_argument("--max-lag", type=int, default=100)
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--max-dim", type=int, default=8)
    p.add_argument("--threshold", type=float, default=0.95)
    _add_global_flags(p)
    p.set_defaults(fn=_cmd_select_params)

    p = sub.add_parser("cluster", help="balanced k-means of delay vectors")
    p.add_argument("--input", required=True)
    p.add_argument("-k", type=int, default=None)
    _add_global_flags(p)
    p.set_defaults(fn=_cmd_cluster)

    p = sub.add_parser("train", help="train one reconstruction network")
    p.add_argument("--delay", required=True, help="delay-state matrix (rows = samples)")
    p.add_argument("--full", required=True, help="matching full-state matrix")
    p.add_argument("--loss", choices=["pointwise", "measure"], default="pointwise")
    _add_global_flags(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("evaluate", help="pointwise MSE of a checkpoint on aligned data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--delay", required=True)
    p.add_argument("--full", required=True)
    _add_global_flags(p)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("pod", help="method-of-snapshots basis of a snapshot matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--n-pod", type=int, required=True)
    _add_global_flags(p)
    p.set_defaults(fn=_cmd_pod)

    p = sub.add_parser("run", help="full two-loss reconstruction experiment")
    p.add_argument("--system", default=None)
    _add_global_flags(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("report", help="re-emit a stored report")
    p.add_argument("--input", required=True, help="report.csv from a run")
    p.add_argument("--format", choices=["csv", "text"], default="text")
    _add_global_flags(p)
    p.set_defaults(fn=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
