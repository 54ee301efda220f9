"""End-to-end experiment: train per depth, certify, attack, report.

Depth accounting: ``hidden_layers`` hidden layers plus the single-node
output layer form a cascade of ``N = hidden_layers + 1`` elements, so the
shallowest default configuration (2 hidden layers) already has N = 3.
"""

import csv
import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import attack, data, passivity, report, training
from .errors import ConfigError, ParseError
from .model import build_widths, check_slope, init_model, load_model, save_model

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    csv: str = None
    target_col: str = None
    synthetic_samples: int = 2000
    synthetic_features: int = 10
    synthetic_noise: float = 0.05
    pca_components: int = 10
    depths: list = field(default_factory=lambda: [2, 6, 12])
    slope_a: float = 0.5
    nu_target: float = 1.0
    output_activation: str = "leaky_relu"
    epsilon_attack: float = 0.5
    beta: float = None
    epsilon_design: float = None
    seed: int = 0
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 20
    learning_rate: float = 1e-3
    split_fractions: list = field(default_factory=lambda: [0.6, 0.2, 0.2])
    out_dir: str = "results"

    def validate(self):
        check_slope(self.slope_a)
        if not self.nu_target > 0:
            raise ConfigError(f"nu_target must be positive, got {self.nu_target}")
        if not self.epsilon_attack > 0:
            raise ConfigError(f"epsilon_attack must be positive, got {self.epsilon_attack}")
        if self.beta is not None and not self.beta > 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if not self.depths or any(int(d) < 1 for d in self.depths):
            raise ConfigError(f"depths must be positive hidden-layer counts, got {self.depths}")
        for d in self.depths:
            if int(d) + 1 <= 2:
                raise ConfigError(f"{d} hidden layer(s) give a cascade of N = {int(d) + 1}; need N > 2")
        if self.csv is not None and not self.target_col:
            raise ConfigError("a CSV dataset needs --target-col")
        return self

    @property
    def dataset_name(self):
        if self.csv:
            return os.path.splitext(os.path.basename(self.csv))[0]
        return "synthetic"

    def train_config(self, depth):
        return training.TrainConfig(
            nu_target=self.nu_target,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.seed + 1000 * int(depth),
            learning_rate=self.learning_rate,
        )

    def attack_config(self):
        return attack.AttackConfig(epsilon_attack=self.epsilon_attack)


def load_config(path=None, **overrides):
    """Read a JSON config and apply non-``None`` overrides on top."""
    doc = {}
    if path:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid config JSON: {exc.msg}", f"{path}:{exc.lineno}") from exc
        if not isinstance(doc, dict):
            raise ParseError("config must be a JSON object", path)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**doc).validate()


def prepare_data(cfg):
    """Load, split and preprocess the configured dataset (fit on train only)."""
    if cfg.csv:
        ds = data.load_csv(cfg.csv, cfg.target_col)
    else:
        ds = data.synthetic_regression(
            cfg.synthetic_samples, cfg.synthetic_features, seed=cfg.seed, noise=cfg.synthetic_noise
        )
    tr, va, te = data.split(ds, cfg.split_fractions, seed=cfg.seed)
    prep = data.fit_preprocessor(tr, k=cfg.pca_components)
    return prep.apply(tr), prep.apply(va), prep.apply(te), prep


def _paths(cfg, depth):
    stem = os.path.join(cfg.out_dir, f"{cfg.dataset_name}_h{int(depth)}")
    return {
        "model": stem + "_model.json",
        "log": stem + "_train_log.csv",
        "cert": stem + "_certificate.json",
        "eval": stem + "_evaluation.csv",
        "summary": stem + "_attack_summary.json",
        "test": os.path.join(cfg.out_dir, f"{cfg.dataset_name}_test_points.csv"),
    }


def _dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(cfg, depth, splits=None):
    """Train one depth; writes the model file and the training log."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    tr, va, te, _ = splits or prepare_data(cfg)
    p = _paths(cfg, depth)
    data.save_csv(te, p["test"])
    widths = build_widths(tr.features.shape[1], int(depth))
    model = init_model(widths, cfg.slope_a, cfg.nu_target, seed=cfg.seed + int(depth), output_activation=cfg.output_activation)
    model, history = training.train(model, tr, va, cfg.train_config(depth))
    save_model(model, p["model"])
    history.to_csv(p["log"])
    log.info("depth %s: best epoch %d, val mse %.5g", depth, history.best_epoch,
             history.rows[history.best_epoch]["val_mse"])
    return model, history, p


def cmd_certify(model_path, nu_target=1.0, beta=None, epsilon_design=None, out_path=None):
    model = load_model(model_path)
    cert = passivity.certify(model, nu_target=nu_target, beta=beta, epsilon_design=epsilon_design)
    if out_path:
        _dump_json(cert.as_dict(), out_path)
    return cert


def load_certificate(path):
    with open(path) as fh:
        return passivity.CascadeCertificate.from_dict(json.load(fh))


def load_points(path):
    """Features of a preprocessed point file (all columns except ``target``)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("point file is empty", path)
    header = rows[0]
    keep = [j for j, h in enumerate(header) if h != "target"]
    try:
        pts = np.array([[float(r[j]) for j in keep] for r in rows[1:]], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise ParseError("malformed point file", path) from exc
    return pts.reshape(-1, len(keep))


def cmd_attack(model_path, cert_path, points, attack_cfg=None, eval_path=None, summary_path=None):
    """Attack every point; returns the evaluation table and its summary."""
    model = load_model(model_path)
    cert = load_certificate(cert_path) if isinstance(cert_path, str) else cert_path
    table = attack.evaluate_dataset(model, cert, points, attack_cfg)
    summary = table.summary()
    if eval_path:
        table.to_csv(eval_path)
    if summary_path:
        _dump_json(summary, summary_path)
    return table, summary


def cmd_report(eval_paths, cert_paths=(), out_dir=".", nu_target=None):
    """Summary CSV, one box-plot SVG per evaluation and a histogram of layer indices."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for path in eval_paths:
        cols = attack.read_evaluation_csv(path)
        name = os.path.splitext(os.path.basename(path))[0].replace("_evaluation", "")
        row = report.summary_row(name, cols)
        rows.append(row)
        bound = row["bound_ratio"]
        with open(os.path.join(out_dir, f"{name}_box.svg"), "w") as fh:
            fh.write(report.box_plot_svg(cols["ratio"], bound if math.isfinite(bound) else None, title=name))
    report.write_summary_csv(rows, os.path.join(out_dir, "summary.csv"))

    nus = []
    for path in cert_paths:
        cert = load_certificate(path)
        nus.extend(c.nu_extracted for c in cert.layers)
    if nus:
        with open(os.path.join(out_dir, "nu_histogram.svg"), "w") as fh:
            fh.write(report.histogram_svg(nus, target=nu_target))
    return rows, nus


def run_all(cfg):
    """Full pipeline over every configured depth; returns per-depth summaries."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    _dump_json(dataclasses.asdict(cfg), os.path.join(cfg.out_dir, "config_used.json"))
    splits = prepare_data(cfg)
    test_points = splits[2].features
    results = {}
    evals, certs = [], []
    for depth in cfg.depths:
        _, history, p = cmd_train(cfg, depth, splits)
        cert = cmd_certify(p["model"], cfg.nu_target, cfg.beta, cfg.epsilon_design, p["cert"])
        _, summary = cmd_attack(p["model"], cert, test_points, cfg.attack_config(), p["eval"], p["summary"])
        summary["best_epoch"] = history.best_epoch
        summary["val_mse"] = history.rows[history.best_epoch]["val_mse"]
        summary["nus"] = [c.nu_extracted for c in cert.layers]
        results[int(depth)] = summary
        evals.append(p["eval"])
        certs.append(p["cert"])
    cmd_report(evals, certs, os.path.join(cfg.out_dir, "report"), cfg.nu_target)
    return results


def any_violation(summary):
    return bool(summary.get("violations") or summary.get("tight_bound_violations"))
