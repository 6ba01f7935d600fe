"""Experiment configuration, orchestration, sweeps and output files.

A configuration is a nested mapping (YAML on disk). Named presets give
complete configurations; a config file and ``key=value`` overrides are
layered on top, in that order. Values that come from the reference
experimental protocol are listed under ``value_sources`` as ``reference``;
everything else is ``chosen``.
"""
import copy
import csv
import datetime
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy import stats

from twinboot import __version__, kernels, theory
from twinboot.engine import History, TrainConfig, run_baseline, run_training
from twinboot.inference import predict_mc, reliability, sigma_error_correlation
from twinboot.optim import DivergedError
from twinboot.problems import GaussianMeanProblem, MlpProblem, TwoBasinProblem, build_seismic
from twinboot.rng import RngStream

PROBLEM_DEFAULTS = {
    "gaussian": {"n": 400, "variance": 120.0, "center": [0.0, 0.0], "init": [0.0, 0.0]},
    "two-basin": {"d": 2.0, "width": 0.7, "sigma_data": 0.3, "m": 100, "init": None},
    "seismic": {
        "height": 30, "width": 30, "n_measurements": 4096, "beta": 1.0, "noise_sigma": 0.01,
        "kernel_width": 2.0, "test_fraction": 0.2, "smoothing": 3.0, "nonlinearity": "tanh",
    },
    "mlp": {
        "layer_sizes": [2, 32, 32, 2], "n_train": 500, "n_val": 1000, "noise": 0.3,
        "turns": 1.5, "weight_decay": 0.0,
    },
}

BASE_CONFIG = {
    "name": "custom",
    "problem": {"id": "gaussian"},
    "twin_boot": True,
    "compare_standard": False,
    "train": {
        "epochs": 1,
        "batch_size": 1,
        "optimizer": {"kind": "sgd", "lr": 0.01, "schedule": {"kind": "constant"}},
        "reset": {"kind": "none"},
        "reset_mode": "sample",
        "update_at": "center",
        "sample_weights": True,
        "bootstrap": True,
        "grouping": None,
        "log": "step",
        "log_stride": 1,
    },
    "seeds": [0],
    "eval": {"mc_samples": 32, "mc_per_group": True, "ece_bins": 10},
    "workers": 1,
}

# Sweep axis aliases; any dotted config path is also accepted.
AXIS_ALIASES = {
    "M": "problem.m",
    "m": "problem.m",
    "sigma_data": "problem.sigma_data",
    "lr": "train.optimizer.lr",
    "learning_rate": "train.optimizer.lr",
    "batch_size": "train.batch_size",
    "B": "train.batch_size",
    "epochs": "train.epochs",
    "width": "problem.width",
    "d": "problem.d",
    "noise_sigma": "problem.noise_sigma",
    "beta": "problem.beta",
}


class ConfigError(ValueError):
    """Invalid configuration, override or sweep request."""


def _deep_update(dst, src):
    for key, value in src.items():
        if isinstance(value, dict) and isinstance(dst.get(key), dict):
            _deep_update(dst[key], value)
        else:
            dst[key] = copy.deepcopy(value)
    return dst


def _flatten(d, prefix=""):
    out = {}
    for key, value in d.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict) and value:
            out.update(_flatten(value, path + "."))
        else:
            out[path] = value
    return out


def _preset(name, problem, train, reference, seeds, **extra):
    cfg = copy.deepcopy(BASE_CONFIG)
    cfg["name"] = name
    cfg["problem"] = {"id": problem["id"], **PROBLEM_DEFAULTS[problem["id"]]}
    cfg["problem"].update({k: v for k, v in problem.items() if k != "id"})
    _deep_update(cfg["train"], train)
    cfg["seeds"] = list(seeds)
    _deep_update(cfg, extra)
    return {"config": cfg, "reference": sorted(reference)}


PRESETS = {
    "figure1": _preset(
        "figure1",
        {"id": "gaussian", "n": 400, "variance": 120.0},
        {"epochs": 5, "batch_size": 200, "optimizer": {"kind": "sgd", "lr": 0.07},
         "log": "step", "log_stride": 4, "bootstrap": True},
        ["problem.n", "problem.variance", "train.epochs", "train.batch_size",
         "train.optimizer.kind", "train.optimizer.lr", "train.log_stride",
         "train.bootstrap", "seeds"],
        [7],
    ),
    "figure2": _preset(
        "figure2",
        {"id": "two-basin", "d": 2.0, "width": 0.7, "sigma_data": 0.3, "m": 100, "init": None},
        {"epochs": 40, "batch_size": 10,
         "optimizer": {"kind": "sgd", "lr": 0.1,
                       "schedule": {"kind": "step", "factor": 0.5, "milestones": [20, 30]}},
         "reset": {"kind": "epochs", "epochs": [1, 2, 6, 12]}, "reset_mode": "sample",
         "log": "step"},
        ["problem.d", "train.epochs", "train.reset", "train.reset_mode"],
        range(1, 101),
    ),
    "figure3": _preset(
        "figure3",
        {"id": "two-basin", "d": 2.0, "width": 0.7, "sigma_data": 0.3, "m": 100,
         "init": [-0.5, 0.3]},
        {"epochs": 40, "batch_size": 25,
         "optimizer": {"kind": "sgd", "lr": 0.2,
                       "schedule": {"kind": "step", "factor": 0.5, "milestones": [20, 30]}},
         "reset": {"kind": "epochs", "epochs": [1, 2, 6, 12]}, "reset_mode": "sample",
         "log": "epoch"},
        ["problem.d", "train.epochs", "train.reset", "train.reset_mode",
         "train.optimizer.schedule.kind"],
        range(1, 11),
    ),
    "table1": _preset(
        "table1",
        {"id": "seismic", "n_measurements": 4096, "kernel_width": 0.5, "noise_sigma": 0.01,
         "test_fraction": 0.8},
        {"epochs": 1500, "batch_size": 32,
         "optimizer": {"kind": "adam", "lr": 0.001,
                       "schedule": {"kind": "exponential", "rate": 0.99847}},
         "reset": {"kind": "adaptive", "K0": 50, "growth": 2.0}, "grouping": "patch",
         "log": "epoch"},
        ["problem.height", "problem.width", "problem.n_measurements", "train.batch_size",
         "train.optimizer.kind", "train.optimizer.lr", "train.optimizer.schedule.kind",
         "train.reset.kind", "train.reset.K0", "train.grouping", "seeds"],
        range(25),
        compare_standard=True,
    ),
    "figure6": _preset(
        "figure6",
        {"id": "seismic", "n_measurements": 4096, "kernel_width": 0.5, "noise_sigma": 0.01,
         "test_fraction": 0.8},
        {"epochs": 1500, "batch_size": 32,
         "optimizer": {"kind": "adam", "lr": 0.001,
                       "schedule": {"kind": "exponential", "rate": 0.99847}},
         "reset": {"kind": "adaptive", "K0": 50, "growth": 2.0}, "grouping": "patch",
         "log": "epoch"},
        ["problem.height", "problem.width", "problem.n_measurements", "train.batch_size",
         "train.optimizer.kind", "train.optimizer.lr", "train.optimizer.schedule.kind",
         "train.reset.kind", "train.reset.K0", "train.grouping"],
        [0],
    ),
    "mlp-calibration": _preset(
        "mlp-calibration",
        {"id": "mlp"},
        {"epochs": 1000, "batch_size": 64,
         "optimizer": {"kind": "adam", "lr": 0.01,
                       "schedule": {"kind": "exponential", "rate": 0.997}},
         "reset": {"kind": "every", "K": 1}, "grouping": "layer", "log": "epoch"},
        ["train.optimizer.kind", "train.reset", "train.grouping"],
        range(20),
        compare_standard=True,
    ),
}


def parse_seeds(text):
    """``"1..10"`` (inclusive), ``"1,4,9"`` or a single integer."""
    if isinstance(text, (list, tuple, range)):
        seeds = [int(s) for s in text]
    else:
        text = str(text).strip()
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    if not seeds:
        raise ConfigError("seed list is empty")
    if any(s < 0 for s in seeds):
        raise ConfigError("seeds must be non-negative")
    return seeds


def parse_value(text):
    """Type a command-line value with YAML rules (numbers, booleans, lists, null)."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


class ExperimentConfig:
    """A fully resolved experiment configuration.

    ``data`` is the nested mapping; ``reference`` lists dotted keys whose
    values come from the reference protocol. Use :func:`resolve_config` to
    build one.
    """

    def __init__(self, data, reference=()):
        self.data = data
        self.reference = tuple(sorted(reference))
        self.validate()

    def get(self, path):
        node = self.data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                raise KeyError(path)
            node = node[part]
        return node

    def set(self, path, value):
        parts = path.split(".")
        node = self.data
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config key {path!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {path!r}; valid keys: "
                              f"{', '.join(sorted(_flatten(self.data)))}")
        node[parts[-1]] = value
        self.reference = tuple(k for k in self.reference
                               if k != path and not k.startswith(path + "."))

    def validate(self):
        d = self.data
        pid = d["problem"].get("id")
        if pid not in PROBLEM_DEFAULTS:
            raise ConfigError(f"unknown problem id {pid!r}; choose from {sorted(PROBLEM_DEFAULTS)}")
        unknown = set(d["problem"]) - set(PROBLEM_DEFAULTS[pid]) - {"id"}
        if unknown:
            raise ConfigError(f"unknown {pid} parameters: {sorted(unknown)}")
        d["seeds"] = parse_seeds(d["seeds"])
        try:
            self.train_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid training settings: {exc}") from None
        if int(d["workers"]) < 1:
            raise ConfigError("workers must be >= 1")
        if int(d["eval"]["mc_samples"]) < 1:
            raise ConfigError("eval.mc_samples must be >= 1")

    def train_config(self):
        t = self.data["train"]
        if t["epochs"] == 0:
            # zero-epoch runs are allowed; they emit empty logs
            t = dict(t, epochs=1)
        cfg = TrainConfig(
            epochs=t["epochs"], batch_size=t["batch_size"], optimizer=t["optimizer"],
            reset=t["reset"], sample_weights=t["sample_weights"], reset_mode=t["reset_mode"],
            update_at=t["update_at"], log=t["log"], log_stride=t["log_stride"],
        )
        # building them surfaces bad optimizer / schedule specs early
        from twinboot.engine import make_reset_schedule
        from twinboot.optim import make_optimizer

        make_optimizer(cfg.optimizer)
        make_reset_schedule(cfg.reset)
        return cfg

    @property
    def seeds(self):
        return list(self.data["seeds"])

    def value_sources(self):
        ref = set(self.reference)
        return {k: ("reference" if k in ref or any(k.startswith(r + ".") for r in ref)
                    else "chosen")
                for k in sorted(_flatten(self.data))}

    def to_dict(self):
        out = copy.deepcopy(self.data)
        out["value_sources"] = self.value_sources()
        return out

    def config_hash(self):
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def copy(self):
        return ExperimentConfig(copy.deepcopy(self.data), self.reference)


def resolve_config(preset=None, path=None, overrides=(), data=None):
    """Layer preset, config file (or mapping) and ``key=value`` overrides."""
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        base = copy.deepcopy(PRESETS[preset]["config"])
        reference = list(PRESETS[preset]["reference"])
    else:
        base = copy.deepcopy(BASE_CONFIG)
        reference = []
    layer = None
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                layer = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror}") from None
    elif data is not None:
        layer = copy.deepcopy(data)
    if layer:
        layer.pop("value_sources", None)
        pid = layer.get("problem", {}).get("id")
        if pid is not None and pid != base["problem"]["id"]:
            base["problem"] = {"id": pid, **PROBLEM_DEFAULTS.get(pid, {})}
            reference = [r for r in reference if not r.startswith("problem.")]
        touched = set(_flatten(layer))
        reference = [r for r in reference if not any(t == r or t.startswith(r + ".")
                                                     or r.startswith(t + ".") for t in touched)]
        _deep_update(base, layer)
    elif base["problem"]["id"] in PROBLEM_DEFAULTS:
        base["problem"] = {**PROBLEM_DEFAULTS[base["problem"]["id"]], **base["problem"]}
    cfg = ExperimentConfig(base, reference)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), parse_value(value))
    cfg.validate()
    return cfg


def build_problem(cfg, seed):
    p = dict(cfg.data["problem"])
    pid = p.pop("id")
    if pid == "gaussian":
        return GaussianMeanProblem(seed=seed, **p)
    if pid == "two-basin":
        return TwoBasinProblem(seed=seed, **p)
    if pid == "seismic":
        return build_seismic(seed, **p)
    return MlpProblem(seed=seed, **p)


@dataclass
class RunRecord:
    """Outcome of one (config, seed) run; ``standard_*`` fields hold the baseline when run."""

    config_hash: str
    seed: int
    metrics: dict
    history: object = None
    standard_history: object = None
    weights: dict = field(default_factory=dict)
    resets: list = field(default_factory=list)
    diverged: bool = False
    error: str = ""
    artifacts: dict = field(default_factory=dict)


def _sigma_avg(sigma_sq, grouping):
    """Whole-vector sigma from per-group variances (size-weighted)."""
    return float(np.sqrt(np.sum(sigma_sq * grouping.sizes) / grouping.n_params))


def _twin_metrics(cfg, problem, state, history, seed):
    pid = cfg.data["problem"]["id"]
    g = state.grouping
    w = state.mean_weights
    m = {
        "final_sigma": _sigma_avg(state.sigma_sq, g),
        "final_loss": 0.5 * (history.epochs[-1][2] + history.epochs[-1][3]),
        "wall_time": history.wall_time,
        "n_resets": len(history.resets),
    }
    if pid == "gaussian":
        m["sigma_theory"] = theory.sigma_true_gaussian(problem.sigma_data, problem.n)
        m["mean_error"] = float(np.linalg.norm(w - problem.dataset.inputs.mean(axis=0)))
    elif pid == "two-basin":
        try:
            m["sigma_theory"] = theory.sigma_theory_two_basin(
                problem.d, problem.width, problem.sigma_data, problem.m)
        except theory.TheoryDomainError:
            m["sigma_theory"] = float("nan")
        dist = float(np.linalg.norm(state.w1 - state.w2))
        b1, b2 = problem.basin_of(state.w1), problem.basin_of(state.w2)
        m.update(twin_distance=dist, basin_twin1=b1, basin_twin2=b2,
                 co_located=int(b1 == b2 and dist < problem.d / 2.0))
    elif pid == "seismic":
        m.update(train_loss=problem.train_loss(w), test_loss=problem.test_loss(w),
                 recon_mse=problem.recon_mse(w))
        corr = sigma_error_correlation(g.broadcast(state.sigma).reshape(problem.shape),
                                       np.abs(w - problem.v_true).reshape(problem.shape))
        m.update(spearman=corr.spearman, pearson=corr.pearson)
    elif pid == "mlp":
        ev = cfg.data["eval"]
        tr = problem.accuracy(w, problem.dataset.inputs, problem.train_labels)
        va = problem.accuracy(w, problem.val_inputs, problem.val_labels)
        rel = reliability(problem.predict(w, problem.val_inputs), problem.val_labels,
                          ev["ece_bins"])
        mc = predict_mc(problem.predict, state, problem.val_inputs, ev["mc_samples"],
                        RngStream(seed, "mc"), per_group=ev["mc_per_group"])
        rel_mc = reliability(mc.mean, problem.val_labels, ev["ece_bins"])
        sig = history.epoch_sigma()
        k = max(1, sig.shape[0] // 10)
        first, last = sig[:k].mean(axis=0), sig[-k:].mean(axis=0)
        m.update(train_acc=tr, val_acc=va, gap=tr - va, ece=rel.ece, ece_mc=rel_mc.ece,
                 val_acc_mc=float(np.mean(mc.mean.argmax(axis=1) == problem.val_labels)),
                 sigma_decay=int(np.all(first > last)))
        for label, a, b in zip(g.labels, first, last):
            m[f"sigma_first_{label}"] = float(a)
            m[f"sigma_last_{label}"] = float(b)
        m["_reliability"] = {"deterministic": rel.to_dict(), "monte_carlo": rel_mc.to_dict()}
    return m


def _standard_metrics(cfg, problem, state, history):
    pid = cfg.data["problem"]["id"]
    w = state.w
    m = {"final_loss": history.epochs[-1][2], "wall_time": history.wall_time}
    if pid == "seismic":
        m.update(train_loss=problem.train_loss(w), test_loss=problem.test_loss(w),
                 recon_mse=problem.recon_mse(w))
    elif pid == "mlp":
        tr = problem.accuracy(w, problem.dataset.inputs, problem.train_labels)
        va = problem.accuracy(w, problem.val_inputs, problem.val_labels)
        rel = reliability(problem.predict(w, problem.val_inputs), problem.val_labels,
                          cfg.data["eval"]["ece_bins"])
        m.update(train_acc=tr, val_acc=va, gap=tr - va, ece=rel.ece)
        m["_reliability"] = rel.to_dict()
    elif pid in ("gaussian", "two-basin"):
        m["final_point"] = [float(v) for v in w]
    return m


def run_single(cfg, seed):
    """Run one seed; divergence is recorded on the returned record, not raised."""
    if isinstance(cfg, dict):
        cfg = ExperimentConfig(cfg["data"], cfg["reference"])
    tc = cfg.train_config()
    problem = build_problem(cfg, seed)
    grouping = problem.grouping(cfg.data["train"]["grouping"])
    record = RunRecord(cfg.config_hash(), seed, {})
    if cfg.data["train"]["epochs"] == 0:
        record.history = History(grouping.labels if cfg.data["twin_boot"] else ())
        return record
    artifacts = {}
    if cfg.data["twin_boot"]:
        try:
            state, history = run_training(problem, tc, seed, grouping=grouping,
                                          bootstrap=cfg.data["train"]["bootstrap"])
        except DivergedError as exc:
            record.diverged = True
            record.error = str(exc)
            record.metrics = {"diverged_step": exc.step, "diverged_twin": exc.twin}
            return record
        metrics = _twin_metrics(cfg, problem, state, history, seed)
        if "_reliability" in metrics:
            artifacts["reliability"] = {"twin": metrics.pop("_reliability")}
        record.history = history
        record.resets = list(history.resets)
        record.weights = {"w1": state.w1, "w2": state.w2}
        if cfg.data["problem"]["id"] == "seismic":
            w = state.mean_weights
            shape = problem.shape
            artifacts["grids"] = {
                "truth": problem.v_true.reshape(shape),
                "recon": w.reshape(shape),
                "abs_error": np.abs(w - problem.v_true).reshape(shape),
                "sigma_map": grouping.broadcast(state.sigma).reshape(shape),
            }
    else:
        metrics = {}
    if cfg.data["compare_standard"] or not cfg.data["twin_boot"]:
        try:
            bstate, bhist = run_baseline(problem, tc, seed)
        except DivergedError as exc:
            record.diverged = True
            record.error = f"standard: {exc}"
            bstate = None
        if bstate is not None:
            sm = _standard_metrics(cfg, problem, bstate, bhist)
            rel = sm.pop("_reliability", None)
            if rel is not None:
                artifacts.setdefault("reliability", {})["standard"] = rel
            if cfg.data["twin_boot"]:
                metrics.update({f"standard_{k}": v for k, v in sm.items()})
                metrics["time_ratio"] = metrics["wall_time"] / bhist.wall_time
                record.standard_history = bhist
            else:
                metrics.update(sm)
                record.history = bhist
                record.weights = {"w": bstate.w}
    record.metrics = metrics
    record.artifacts = artifacts
    return record


def _run_seed_job(args):
    payload, seed = args
    return run_single(payload, seed)


def run_experiment(cfg, seeds=None, workers=None):
    """One :class:`RunRecord` per seed, in seed order."""
    seeds = cfg.seeds if seeds is None else parse_seeds(seeds)
    workers = int(cfg.data["workers"] if workers is None else workers)
    if workers <= 1 or len(seeds) == 1:
        return [run_single(cfg, s) for s in seeds]
    payload = {"data": cfg.data, "reference": cfg.reference}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seed_job, [(payload, s) for s in seeds]))


def resolve_axis(cfg, axis):
    path = AXIS_ALIASES.get(axis, axis)
    try:
        cfg.get(path)
    except KeyError:
        flat = _flatten(cfg.data)
        valid = sorted(set(flat) | {a for a, t in AXIS_ALIASES.items() if t in flat})
        raise ConfigError(f"unknown sweep axis {axis!r}; valid axes: {', '.join(valid)}") from None
    return path


@dataclass
class SweepResult:
    axis: str
    rows: list
    records: dict


def run_sweep(cfg, axis, values, seeds=None):
    """Final sigma (mean and std over seeds) for each value of ``axis``."""
    path = resolve_axis(cfg, axis)
    seeds = cfg.seeds if seeds is None else parse_seeds(seeds)
    if len(values) == 0:
        raise ConfigError("sweep needs at least one value")
    rows, records = [], {}
    for value in values:
        c = cfg.copy()
        c.set(path, value)
        c.validate()
        recs = run_experiment(c, seeds)
        records[value] = (c, recs)
        sig = np.array([r.metrics.get("final_sigma", np.nan) for r in recs if not r.diverged])
        theo = [r.metrics.get("sigma_theory", np.nan) for r in recs if not r.diverged]
        rows.append({
            "axis_value": value,
            "sigma_mean": float(sig.mean()) if sig.size else float("nan"),
            "sigma_std": float(sig.std(ddof=1)) if sig.size > 1 else float("nan"),
            "sigma_theory": float(theo[0]) if theo else float("nan"),
            "n_seeds": int(sig.size),
        })
    return SweepResult(path, rows, records)


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "NaN"
    return repr(v)


def _config_comment(cfg):
    return "# config: " + json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))


def _write_csv(path, header, rows, cfg=None):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if cfg is not None:
                fh.write(_config_comment(cfg) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def read_csv(path):
    """Header and rows of an emitted CSV, skipping ``#`` comment lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]


def _history_rows(history, log):
    src = history.steps if log == "step" else history.epochs
    for epoch, step, l1, l2, sig_sq in src:
        yield [epoch, step, l1, l2, *np.sqrt(sig_sq)]


def write_history(path, history, log, cfg=None):
    header = ["epoch", "step", "twin1_loss", "twin2_loss"]
    header += [f"sigma_{label}" for label in history.group_labels]
    rows = list(_history_rows(history, log)) if history is not None else []
    _write_csv(path, header, rows, cfg)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return None if math.isnan(f) or math.isinf(f) else f
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _write_json(path, obj):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc.strerror}") from None
    if not os.access(path, os.W_OK):
        raise OSError(f"cannot write to output directory {path}")


def seed_dir(out_dir, seed):
    return os.path.join(out_dir, f"seed-{seed:04d}")


def emit_outputs(records, cfg, out_dir):
    """Write per-seed history, summary, weights and problem-specific artifacts."""
    _ensure_dir(out_dir)
    with open(os.path.join(out_dir, "config.yaml"), "w", encoding="utf-8") as fh:
        yaml.safe_dump(_jsonable(cfg.to_dict()), fh, sort_keys=True)
    log = cfg.data["train"]["log"]
    for rec in records:
        d = seed_dir(out_dir, rec.seed)
        _ensure_dir(d)
        if rec.history is not None:
            write_history(os.path.join(d, "history.csv"), rec.history, log, cfg)
        else:
            _write_csv(os.path.join(d, "history.csv"),
                       ["epoch", "step", "twin1_loss", "twin2_loss"], [], cfg)
        if rec.standard_history is not None:
            write_history(os.path.join(d, "standard_history.csv"), rec.standard_history, log, cfg)
        if rec.weights:
            names = sorted(rec.weights)
            cols = [rec.weights[n] for n in names]
            _write_csv(os.path.join(d, "weights.csv"), ["index"] + names,
                       ([i, *(c[i] for c in cols)] for i in range(cols[0].size)), cfg)
        for name, grid in rec.artifacts.get("grids", {}).items():
            _write_csv(os.path.join(d, f"{name}.csv"),
                       [f"c{j}" for j in range(grid.shape[1])], grid.tolist(), cfg)
        if "reliability" in rec.artifacts:
            _write_json(os.path.join(d, "reliability.json"),
                        {"config": cfg.to_dict(), **rec.artifacts["reliability"]})
        _write_json(os.path.join(d, "summary.json"), {
            "config": cfg.to_dict(),
            "config_hash": rec.config_hash,
            "seed": rec.seed,
            "metrics": rec.metrics,
            "resets": rec.resets,
            "diverged": rec.diverged,
            "error": rec.error,
            "provenance": {
                "seed": rec.seed,
                "config_hash": rec.config_hash,
                "code_version": __version__,
                "kernel_backend": kernels.BACKEND,
                "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            },
        })


def emit_sweep(result, cfg, out_dir):
    _ensure_dir(out_dir)
    rows = [[r["axis_value"] if isinstance(r["axis_value"], str) else _fmt(r["axis_value"]),
             r["sigma_mean"], r["sigma_std"], r["sigma_theory"], r["n_seeds"]]
            for r in result.rows]
    _write_csv(os.path.join(out_dir, "sweep.csv"),
               ["axis_value", "sigma_mean", "sigma_std", "sigma_theory", "n_seeds"], rows, cfg)
    for value, (c, recs) in result.records.items():
        emit_outputs(recs, c, os.path.join(out_dir, f"{result.axis}={value}"))


def load_summary(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def config_from_summary(summary):
    """Rebuild the resolved :class:`ExperimentConfig` stored in a summary."""
    data = copy.deepcopy(summary["config"])
    sources = data.pop("value_sources", {})
    reference = [k for k, v in sources.items() if v == "reference"]
    return ExperimentConfig(data, reference)


def ci95(values):
    """Mean and Student-t 95% half-width (n-1 dof); half-width is NaN for n < 2."""
    x = np.asarray([v for v in values if v is not None and not math.isnan(v)], dtype=float)
    if x.size == 0:
        return float("nan"), float("nan"), 0
    if x.size == 1:
        return float(x[0]), float("nan"), 1
    half = stats.t.ppf(0.975, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size)
    return float(x.mean()), float(half), int(x.size)


def aggregate(summaries):
    """Per-metric mean and 95% CI over a list of summary dicts."""
    keys = sorted({k for s in summaries for k, v in s["metrics"].items()
                   if isinstance(v, (int, float)) or v is None})
    out = {}
    for k in keys:
        vals = [s["metrics"].get(k) for s in summaries if not s.get("diverged")]
        vals = [float("nan") if v is None else float(v) for v in vals if not isinstance(v, list)]
        mean, half, n = ci95(vals)
        out[k] = {"mean": mean, "ci95": half, "n": n}
    return out


def report(in_dir):
    """Aggregate every ``summary.json`` below ``in_dir`` into grouped tables.

    Writes ``report.json`` and ``report.csv`` into ``in_dir`` and returns the
    report mapping (group -> metric -> stats).
    """
    if not os.path.isdir(in_dir):
        raise OSError(f"input directory not found: {in_dir}")
    groups = {}
    for root, dirs, files in os.walk(in_dir):
        dirs.sort()
        if "summary.json" in files:
            s = load_summary(os.path.join(root, "summary.json"))
            group = os.path.relpath(os.path.dirname(root), in_dir)
            groups.setdefault(group, []).append(s)
    if not groups:
        raise OSError(f"no summary.json files under {in_dir}")
    result = {}
    for group, summaries in sorted(groups.items()):
        result[group] = {
            "config_hash": summaries[0]["config_hash"],
            "n_runs": len(summaries),
            "n_diverged": sum(1 for s in summaries if s.get("diverged")),
            "metrics": aggregate(summaries),
        }
    _write_json(os.path.join(in_dir, "report.json"), result)
    rows = []
    for group, entry in result.items():
        for metric, st in entry["metrics"].items():
            rows.append([group, metric, st["mean"], st["ci95"], st["n"]])
    _write_csv(os.path.join(in_dir, "report.csv"), ["group", "metric", "mean", "ci95", "n"], rows)
    return result
