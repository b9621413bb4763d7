"""Experiment orchestration: config, ingestion, normalization, reports.

``run_experiment`` reproduces the noisy-reconstruction comparison: simulate
a benchmark system (or load a dataset), corrupt it with observation noise,
embed a scalar observable, and train the reconstruction network with the
pointwise loss and with the measure-matching loss from one shared
initialization, then score both on a clean held-out stretch of trajectory.
"""

import csv as _csv
import io
import os
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import dmat, dynamics, model
from .embedding import BACKWARD, DelayConfig, delay_embed, tau_steps_from_time
from .metrics import KernelSpec, mse
from .model import MlpParams, TrainConfig, forward, init_mlp, train
from .partition import build_measure_pairs, constrained_kmeans

AFFINE_LINF = "affine_linf"
ZSCORE = "zscore"
NO_NORMALIZE = "none"


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormalizationRecord:
    """Fitted affine transform y = (x - center) / scale and its inverse."""

    mode: str
    center: np.ndarray
    scale: np.ndarray

    def apply(self, data) -> np.ndarray:
        return (np.asarray(data, dtype=np.float64) - self.center) / self.scale

    def invert(self, data) -> np.ndarray:
        return np.asarray(data, dtype=np.float64) * self.scale + self.center


def normalize(data, mode: str):
    """Normalize a matrix; returns (normalized, record with the inverse).

    ``affine_linf`` uses one global midrange/half-range so every entry lands
    in [-1, 1]; ``zscore`` centers and scales each column to unit variance
    (columns with zero variance pass through unchanged, with a warning).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.size == 0:
        raise ValueError("cannot normalize empty data")
    if data.ndim == 1:
        data = data[:, None]
    if mode == NO_NORMALIZE:
        record = NormalizationRecord(mode, np.zeros(data.shape[1]), np.ones(data.shape[1]))
    elif mode == AFFINE_LINF:
        center = 0.5 * (data.max() + data.min())
        scale = np.abs(data - center).max()
        if scale == 0.0:
            warnings.warn("constant data: affine_linf scale forced to 1")
            scale = 1.0
        record = NormalizationRecord(mode, np.full(data.shape[1], center),
                                     np.full(data.shape[1], scale))
    elif mode == ZSCORE:
        center = data.mean(axis=0)
        scale = data.std(axis=0)
        flat = scale == 0.0
        if flat.any():
            warnings.warn(f"{int(flat.sum())} zero-variance column(s) passed through unscaled")
            scale = np.where(flat, 1.0, scale)
            center = np.where(flat, 0.0, center)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    if mode == ZSCORE:
        record = NormalizationRecord(mode, center, scale)
    return record.apply(data), record


# ---------------------------------------------------------------------------
# ingestion


def load_csv_series(path, columns=None) -> np.ndarray:
    """Read a rectangular numeric CSV (optional single header row) as float64.

    ``columns`` selects by integer index or, when a header is present, by
    name; ``None`` keeps every column. Malformed cells are reported with
    their 1-based row and column.
    """
    with open(path, "r", newline="") as fh:
        reader = _csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: empty CSV")

    def _numeric(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    header = None
    start = 0
    if not all(_numeric(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        start = 1
        if start == len(rows):
            raise ValueError(f"{path}: header only, no data rows")
    width = len(rows[start])
    data = np.empty((len(rows) - start, width))
    for r, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise ValueError(f"{path}: ragged row {r} (expected {width} cells, got {len(row)})")
        for c, cell in enumerate(row):
            try:
                data[r - start - 1, c] = float(cell)
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell at row {r}, column {c + 1}") from None
    if columns is None:
        return data
    idx = []
    for col in columns:
        if isinstance(col, str):
            if header is None or col not in header:
                raise ValueError(f"{path}: no column named {col!r}")
            idx.append(header.index(col))
        else:
            if not 0 <= int(col) < width:
                raise ValueError(f"{path}: column index {col} out of range")
            idx.append(int(col))
    return data[:, idx]


# ---------------------------------------------------------------------------
# configuration


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines with ``#`` comments into a flat dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        out[key] = value.strip()
    return out


def parse_config_file(path) -> dict:
    with open(path, "r") as fh:
        return parse_config_text(fh.read())


_SYSTEM_PRESETS = {
    "lorenz63": dict(dt=0.01, tau=0.18, m=4, noise_variance=0.1,
                     x0=(1.0, 1.0, 1.0)),
    "rossler": dict(dt=0.05, tau=1.44, m=4, noise_variance=0.1,
                    x0=(1.0, 1.0, 1.0)),
    "lotka_volterra4": dict(dt=0.01, tau=6.90, m=5, noise_variance=5e-5,
                            x0=(0.3, 0.3, 0.3, 0.3)),
}

GAUSSIAN_SIGMA_PRESETS = {"sst": 3.0, "era5": 25.0}
K_CELL_PRESETS = {"noisy": 20, "clean": 100, "sst": 5}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one noisy-reconstruction run needs; see presets above."""

    system: str | None = "lorenz63"
    dataset: str | None = None          # CSV/DMAT alternative to simulation
    observable_column: int = 0
    dt: float = 0.01
    x0: tuple = (1.0, 1.0, 1.0)
    n_transient: int = 10_000
    n_train_pool: int = 400_000
    n_test: int = 10_000
    noise_variance: float | tuple = 0.1
    n_train: int = 2000
    k_cells: int = 20
    tau_steps: int = 18
    m: int = 4
    direction: str = BACKWARD
    normalize_mode: str = ZSCORE
    hidden_dims: tuple = (100, 100, 100, 100)
    n_steps: int = 10_000
    lr: float = 1e-3
    kernel: KernelSpec = field(default_factory=KernelSpec.energy)
    minibatch_per_measure: int | None = None
    seed: int = 0
    deterministic: bool = True

    def describe(self) -> dict:
        kernel = self.kernel.kind if self.kernel.sigma is None else \
            f"{self.kernel.kind}(sigma={self.kernel.sigma:g})"
        noise = self.noise_variance
        noise = ",".join(f"{v:g}" for v in np.atleast_1d(np.asarray(noise, dtype=np.float64)))
        return {
            "system": self.system or self.dataset or "?",
            "dt": f"{self.dt:g}",
            "tau_steps": str(self.tau_steps),
            "m": str(self.m),
            "direction": self.direction,
            "noise_variance": noise,
            "n_train": str(self.n_train),
            "k_cells": str(self.k_cells),
            "normalize": self.normalize_mode,
            "hidden_dims": "x".join(str(d) for d in self.hidden_dims),
            "n_steps": str(self.n_steps),
            "lr": f"{self.lr:g}",
            "kernel": kernel,
            "minibatch_per_measure": str(self.minibatch_per_measure or "all"),
            "seed": str(self.seed),
            "deterministic": "on" if self.deterministic else "off",
        }


def preset_config(system: str, **overrides) -> ExperimentConfig:
    """Config for one benchmark system with its published settings."""
    system_key = dynamics.system_from_name(system).kind
    preset = _SYSTEM_PRESETS[system_key]
    tau_steps = tau_steps_from_time(preset["tau"], preset["dt"])
    cfg = ExperimentConfig(system=system_key, dt=preset["dt"], x0=preset["x0"],
                           noise_variance=preset["noise_variance"],
                           tau_steps=tau_steps, m=preset["m"])
    return replace(cfg, **overrides) if overrides else cfg


def _parse_bool(s: str) -> bool:
    return s.strip().lower() in ("1", "true", "yes", "on")


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from flat dotted keys (strings)."""
    mapping = dict(mapping)
    system = mapping.pop("system", None)
    if system is not None:
        cfg = preset_config(system)
    else:
        cfg = ExperimentConfig(system=None)
    fields = {}
    simple = {
        "dataset": ("dataset", str),
        "observable_column": ("observable_column", int),
        "dt": ("dt", float),
        "sim.transient": ("n_transient", int),
        "sim.train_pool": ("n_train_pool", int),
        "sim.test": ("n_test", int),
        "data.n_train": ("n_train", int),
        "partition.k": ("k_cells", int),
        "embed.tau_steps": ("tau_steps", int),
        "embed.dim": ("m", int),
        "embed.direction": ("direction", str),
        "normalize.mode": ("normalize_mode", str),
        "train.steps": ("n_steps", int),
        "train.lr": ("lr", float),
        "train.minibatch": ("minibatch_per_measure", int),
        "seed": ("seed", int),
    }
    for key, (attr, cast) in simple.items():
        if key in mapping:
            fields[attr] = cast(mapping.pop(key))
    if "embed.tau" in mapping:  # continuous delay, converted via dt
        tau = float(mapping.pop("embed.tau"))
        fields["tau_steps"] = tau_steps_from_time(tau, fields.get("dt", cfg.dt))
    if "x0" in mapping:
        fields["x0"] = tuple(float(v) for v in mapping.pop("x0").split(","))
    if "noise.variance" in mapping:
        parts = [float(v) for v in mapping.pop("noise.variance").split(",")]
        fields["noise_variance"] = parts[0] if len(parts) == 1 else tuple(parts)
    if "model.hidden" in mapping:
        fields["hidden_dims"] = tuple(int(v) for v in mapping.pop("model.hidden").split(","))
    if "train.kernel" in mapping:
        kind = mapping.pop("train.kernel").strip().lower()
        if kind == "gaussian":
            sigma = float(mapping.pop("train.kernel.sigma", "1.0"))
            fields["kernel"] = KernelSpec.gaussian(sigma)
        else:
            fields["kernel"] = KernelSpec.energy()
    if "deterministic" in mapping:
        fields["deterministic"] = _parse_bool(mapping.pop("deterministic"))
    if mapping:
        unknown = ", ".join(sorted(mapping))
        raise ValueError(f"unknown config keys: {unknown}")
    return replace(cfg, **fields)


def derive_seed(root: int, tag: str) -> int:
    """Stable sub-stream seed for one named purpose."""
    ss = np.random.SeedSequence(entropy=int(root) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(tag.encode()))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# report


@dataclass
class Report:
    metrics: dict                  # ordered metric -> string-formatted value
    loss_pointwise: np.ndarray
    loss_measure: np.ndarray
    wall_clock: float

    @staticmethod
    def format_value(v) -> str:
        if isinstance(v, str):
            return v
        return f"{float(v):.12g}"


def _report_csv_text(report: Report) -> str:
    buf = io.StringIO()
    buf.write("metric,value\n")
    for key, value in report.metrics.items():
        buf.write(f"{key},{value}\n")
    return buf.getvalue()


def _report_table_text(report: Report) -> str:
    width = max(len(k) for k in report.metrics)
    lines = [f"{'metric'.ljust(width)}  value", f"{'-' * width}  {'-' * 5}"]
    for key, value in report.metrics.items():
        lines.append(f"{key.ljust(width)}  {value}")
    return "\n".join(lines) + "\n"


def emit_report(report: Report, fmt: str, path) -> None:
    """Write the report as ``csv`` (metric,value rows) or aligned ``text``.

    Timing is deliberately left out of both formats so reports are
    byte-identical across reruns with the same config and seed.
    """
    if fmt == "csv":
        content = _report_csv_text(report)
    elif fmt == "text":
        content = _report_table_text(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="") as fh:
        fh.write(content)


def _write_loss_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(history):
            fh.write(f"{i},{v:.12g}\n")


def params_to_sections(params: MlpParams) -> dict:
    sections = {"layer_dims": np.asarray(params.layer_dims, dtype=np.float64)[None, :]}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        sections[f"W{i}"] = w
        sections[f"b{i}"] = b[None, :]
    return sections


def params_from_sections(sections: dict) -> MlpParams:
    dims = tuple(int(v) for v in np.asarray(sections["layer_dims"]).ravel())
    weights = [np.asarray(sections[f"W{i}"]) for i in range(len(dims) - 1)]
    biases = [np.asarray(sections[f"b{i}"]).ravel() for i in range(len(dims) - 1)]
    return MlpParams(dims, weights, biases)


# ---------------------------------------------------------------------------
# the experiment


def _load_state_matrix(path) -> np.ndarray:
    if str(path).endswith(".dmat"):
        sections = dmat.load_dmat(path)
        if "states" in sections:
            return sections["states"]
        return next(iter(sections.values()))
    return load_csv_series(path)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> Report:
    """Train both reconstruction losses from one initialization and report.

    Writes report.csv/report.txt, per-step loss CSVs, and the initial and
    final network checkpoints into ``out_dir`` when given. Partial outputs
    are removed if the run fails.
    """
    t_start = time.perf_counter()
    created = []
    try:
        report = _run_experiment_inner(cfg, out_dir, created, t_start)
    except Exception:
        for path in created:
            try:
                os.remove(path)
            except OSError:
                pass
        raise
    return report


def _run_experiment_inner(cfg, out_dir, created, t_start):
    if cfg.system is not None:
        system = dynamics.system_from_name(cfg.system)
        traj = dynamics.simulate(system, cfg.x0, cfg.dt, cfg.n_transient,
                                 cfg.n_train_pool + cfg.n_test)
        states = traj.states
    else:
        if cfg.dataset is None:
            raise ValueError("config needs either a system or a dataset")
        states = _load_state_matrix(cfg.dataset)
        if len(states) < cfg.n_test + 10:
            raise ValueError("dataset too short for the configured test split")
    d_state = states.shape[1]
    n_pool = len(states) - cfg.n_test
    pool = states[:n_pool]
    test = states[n_pool:]

    variances = np.asarray(cfg.noise_variance, dtype=np.float64)
    if variances.ndim == 0:
        variances = np.full(d_state, float(variances))
    noisy_pool = pool + dynamics.gaussian_noise_matrix(
        derive_seed(cfg.seed, "noise"), 0, n_pool, variances)

    delay_cfg = DelayConfig(cfg.tau_steps, cfg.m, cfg.direction)
    obs = noisy_pool[:, cfg.observable_column]
    delay_all = delay_embed(obs, delay_cfg)
    aligned_full = noisy_pool[delay_all.source_indices]

    n_valid = len(delay_all)
    if cfg.n_train > n_valid:
        raise ValueError(f"n_train={cfg.n_train} exceeds {n_valid} valid delay rows")
    rng = np.random.default_rng(derive_seed(cfg.seed, "subsample"))
    pick = np.sort(rng.choice(n_valid, size=cfg.n_train, replace=False))
    x_train_raw = delay_all.values[pick]
    y_train_raw = aligned_full[pick]

    x_train, x_record = normalize(x_train_raw, cfg.normalize_mode)
    y_train, y_record = normalize(y_train_raw, cfg.normalize_mode)

    labels, _ = constrained_kmeans(x_train, cfg.k_cells,
                                   seed=derive_seed(cfg.seed, "kmeans"))
    pairs = build_measure_pairs(y_train, x_train, labels)

    dims = (cfg.m,) + tuple(cfg.hidden_dims) + (d_state,)
    params0 = init_mlp(dims, seed=derive_seed(cfg.seed, "init"))

    pw_cfg = TrainConfig(n_steps=cfg.n_steps, lr=cfg.lr, seed=cfg.seed, loss=model.POINTWISE)
    ms_cfg = TrainConfig(n_steps=cfg.n_steps, lr=cfg.lr, seed=cfg.seed, loss=model.MEASURE,
                         kernel=cfg.kernel, minibatch_per_measure=cfg.minibatch_per_measure)
    params_pw, hist_pw = train(params0.copy(), (x_train, y_train), pw_cfg)
    params_ms, hist_ms = train(params0.copy(), pairs, ms_cfg)

    # clean evaluation on the held-out stretch, scored in original units
    delay_test = delay_embed(test[:, cfg.observable_column], delay_cfg)
    y_test = test[delay_test.source_indices]
    x_test = x_record.apply(delay_test.values)
    mse_pw = mse(y_record.invert(forward(params_pw, x_test)), y_test)
    mse_ms = mse(y_record.invert(forward(params_ms, x_test)), y_test)

    metrics = dict(cfg.describe())
    metrics["n_eval_rows"] = str(len(y_test))
    # absolute time indices: training must never touch the clean eval stretch
    metrics["max_train_time_index"] = str(int(delay_all.source_indices[pick].max()))
    metrics["min_eval_time_index"] = str(int(n_pool + delay_test.source_indices.min()))
    metrics["mse_pointwise"] = Report.format_value(mse_pw)
    metrics["mse_measure"] = Report.format_value(mse_ms)
    if len(hist_pw):
        metrics["final_loss_pointwise"] = Report.format_value(hist_pw[-1])
        metrics["final_loss_measure"] = Report.format_value(hist_ms[-1])
    report = Report(metrics=metrics, loss_pointwise=hist_pw, loss_measure=hist_ms,
                    wall_clock=time.perf_counter() - t_start)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

        def _mark(name):
            path = os.path.join(out_dir, name)
            created.append(path)
            return path

        emit_report(report, "csv", _mark("report.csv"))
        emit_report(report, "text", _mark("report.txt"))
        _write_loss_csv(_mark("loss_pointwise.csv"), hist_pw)
        _write_loss_csv(_mark("loss_measure.csv"), hist_ms)
        dmat.save_dmat(_mark("model_init.dmat"), params_to_sections(params0))
        dmat.save_dmat(_mark("model_pointwise.dmat"), params_to_sections(params_pw))
        dmat.save_dmat(_mark("model_measure.dmat"), params_to_sections(params_ms))
        with open(_mark("timing.txt"), "w") as fh:
            fh.write(f"wall_clock_seconds {report.wall_clock:.3f}\n")
    return report
