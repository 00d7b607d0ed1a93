"""Experiment configuration and end-to-end commands.

Every command is a pure function of an ExperimentConfig: the same config
(and toolkit version) produces byte-identical primary outputs.  Output
files embed the config hash and the accuracy metric definition so results
remain interpretable in isolation.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import dataio, estimator, metrics, netsim, sysid
from .errors import ConfigError, DataError


def derive_seed(master_seed: int, index: int) -> int:
    """Per-scenario seed: 64-bit blake2b digest of "master:index"."""
    digest = hashlib.blake2b(f"{master_seed}:{index}".encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = ""
    validation_dataset: str = ""
    model_path: str = ""  # reuse a previously identified model
    dt: float | None = None
    block_rows: int = 20
    order_criterion: str = "energy"
    energy: float = 0.85
    fixed_order: int | None = None
    order_threshold: float | None = None
    eps_q: float = 1e-4
    eps_r: float = 1e-4
    bootstrap_iterations: int = 1
    burn_in: int | None = None  # None -> 10 * model order
    scenarios: str | list = "suite"  # "suite" or a list of scenario dicts
    sample_delay_range: bool = False
    master_seed: int = 0
    metric_def: str = metrics.DEFAULT_METRIC
    out_dir: str = "out"

    def to_dict(self) -> dict:
        doc = asdict(self)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as f:
                doc = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON in config {path}: {exc}") from exc
        return cls.from_dict(doc)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def resolve_scenarios(self) -> list[netsim.NetworkScenario]:
        if self.scenarios == "suite":
            base = netsim.scenario_suite()
        elif isinstance(self.scenarios, list):
            base = [netsim.NetworkScenario.from_dict(d) for d in self.scenarios]
        else:
            raise ConfigError(
                f"scenarios must be 'suite' or a list, got {self.scenarios!r}")
        return [s.with_seed(derive_seed(self.master_seed, i))
                for i, s in enumerate(base)]


def _stamp(config: ExperimentConfig) -> str:
    return f"# config_hash={config.config_hash} metric_def={config.metric_def}"


def _write_csv(path, header_comment: str, columns: list[str],
               rows) -> None:
    with open(path, "w", newline="") as f:
        f.write(header_comment + "\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row)


def _load_and_normalize(config: ExperimentConfig):
    if not config.dataset:
        raise ConfigError("config has no dataset path")
    raw = dataio.load_dataset(config.dataset, dt=config.dt)
    norm, params = dataio.normalize(raw)
    return raw, norm, params


def _identify(config: ExperimentConfig, norm: dataio.TrajectoryDataset,
              params: dataio.NormalizationParams):
    model, decomp, order = sysid.identify(
        norm.inputs, norm.outputs, block_rows=config.block_rows,
        criterion=config.order_criterion, energy=config.energy,
        fixed=config.fixed_order, threshold=config.order_threshold,
        dt=norm.dt, norm_params=params)
    return model, decomp, order


def _burn_in(config: ExperimentConfig, model: sysid.StateSpaceModel) -> int:
    return 10 * model.order if config.burn_in is None else config.burn_in


def cmd_identify(config: ExperimentConfig) -> dict:
    """Identify a model from the config's dataset.

    Writes model.json, singular_values.csv (scree data), and
    identify_log.json into the output directory.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, norm, params = _load_and_normalize(config)
    model, decomp, order = _identify(config, norm, params)

    model_path = out / "model.json"
    doc = model.to_dict()
    doc["config_hash"] = config.config_hash
    with open(model_path, "w") as f:
        json.dump(doc, f, indent=2)

    scree_path = out / "singular_values.csv"
    _write_csv(scree_path, _stamp(config), ["index", "singular_value"],
               ((i + 1, repr(float(v)))
                for i, v in enumerate(decomp.singular_values)))

    ss = decomp.singular_values
    log = {
        "config_hash": config.config_hash,
        "order": order,
        "criterion": config.order_criterion,
        "energy_ratio": float(np.sum(ss[:order]) / np.sum(ss)),
        "spectral_radius": model.spectral_radius,
        "unstable": model.is_unstable,
        "warnings": list(decomp.warnings),
        "n_singular_values": int(ss.size),
    }
    log_path = out / "identify_log.json"
    with open(log_path, "w") as f:
        json.dump(log, f, indent=2)
    return {"model": model, "decomposition": decomp, "order": order,
            "paths": {"model": model_path, "scree": scree_path, "log": log_path}}


def _get_model(config: ExperimentConfig):
    """Load a saved model or identify one inline; returns model and the
    normalized identification dataset (None when a saved model is used
    without a dataset)."""
    if config.model_path:
        model = sysid.StateSpaceModel.load(config.model_path)
        if config.dataset:
            raw = dataio.load_dataset(config.dataset, dt=config.dt)
            if model.norm_params is None:
                raise DataError("saved model carries no normalization params")
            norm, _ = dataio.normalize(raw, params=model.norm_params)
            return model, norm
        return model, None
    _, norm, params = _load_and_normalize(config)
    model, _, _ = _identify(config, norm, params)
    return model, norm


def run_scenario(model: sysid.StateSpaceModel,
                 noise_cfg: tuple[float, float, int],
                 inputs: np.ndarray, clean_outputs: np.ndarray,
                 scenario: netsim.NetworkScenario, dt: float,
                 metric_def: str, burn_in: int,
                 sample_delay_range: bool = False):
    """Impair, bootstrap Q/R on the observed stream, filter, report."""
    eps_q, eps_r, iterations = noise_cfg
    stream = netsim.impair(clean_outputs, scenario, dt,
                           sample_delay_range=sample_delay_range)
    noise = estimator.estimate_noise_empirical(
        model, inputs, stream.observed, eps_q=eps_q, eps_r=eps_r,
        iterations=iterations)
    run = estimator.run_filter(model, noise, inputs, stream,
                               scenario=scenario)
    report = metrics.report_run(run.estimates, clean_outputs,
                                innovations=run.innovations,
                                metric_def=metric_def, burn_in=burn_in,
                                scenario=scenario)
    return stream, noise, run, report


def cmd_sweep(config: ExperimentConfig) -> dict:
    """Run the scenario sweep and write a Table-style summary CSV plus
    per-scenario run exports.  Per-scenario failures are recorded in the
    summary without aborting the sweep."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, norm = _get_model(config)
    if norm is None:
        raise ConfigError("sweep needs a dataset (for inputs and truth)")
    scenarios = config.resolve_scenarios()
    burn_in = _burn_in(config, model)
    noise_cfg = (config.eps_q, config.eps_r, config.bootstrap_iterations)

    out_names = norm.output_names
    columns = (["scenario", "nj_ms", "nd_ms", "np_pct"]
               + [f"acc_{n}" for n in out_names]
               + [f"rmse_{n}" for n in out_names]
               + ["status"])
    rows = []
    reports = []
    for i, scenario in enumerate(scenarios):
        tag = scenario.label or f"scenario_{i + 1}"
        try:
            stream, noise, run, report = run_scenario(
                model, noise_cfg, norm.inputs, norm.outputs, scenario,
                norm.dt, config.metric_def, burn_in,
                sample_delay_range=config.sample_delay_range)
        except Exception as exc:  # keep sweeping; record the failure
            rows.append([tag, scenario.nj_ms, scenario.nd_ms,
                         scenario.loss_prob * 100.0]
                        + [""] * (2 * len(out_names))
                        + [f"error: {exc}"])
            reports.append(None)
            continue
        rows.append([tag, scenario.nj_ms, scenario.nd_ms,
                     scenario.loss_prob * 100.0]
                    + [f"{a:.4f}" for a in report.accuracy_pct]
                    + [f"{r:.6f}" for r in report.rmse]
                    + ["ok"])
        reports.append(report)

        run_path = out / f"{tag}_run.csv"
        run_cols = (["k"] + [f"z_{n}" for n in out_names]
                    + [f"yhat_{n}" for n in out_names]
                    + [f"innov_{n}" for n in out_names])
        _write_csv(run_path, _stamp(config), run_cols,
                   ([k] + [repr(float(v)) for v in stream.observed[k]]
                    + [repr(float(v)) for v in run.estimates[k]]
                    + [repr(float(v)) for v in run.innovations[k]]
                    for k in range(run.estimates.shape[0])))
        report_doc = report.to_dict()
        report_doc["config_hash"] = config.config_hash
        report_doc["noise"] = noise.to_dict()
        with open(out / f"{tag}_report.json", "w") as f:
            json.dump(report_doc, f, indent=2)

    summary_path = out / "sweep_summary.csv"
    _write_csv(summary_path, _stamp(config), columns, rows)
    return {"summary": summary_path, "reports": reports, "model": model}


def cmd_validate(config: ExperimentConfig) -> dict:
    """Score a model open loop on a validation dataset; writes
    fit_report.json and an estimate-vs-truth CSV."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, _ = _get_model(config)
    if not config.validation_dataset:
        raise ConfigError("config has no validation_dataset path")
    raw = dataio.load_dataset(config.validation_dataset, dt=config.dt)
    if model.norm_params is None:
        raise DataError("model carries no normalization params; cannot "
                        "normalize validation data consistently")
    if (raw.m_in != model.m_in or raw.m_out != model.m_out):
        raise DataError(
            f"validation dataset is {raw.m_in}x{raw.m_out} channels, model "
            f"expects {model.m_in}x{model.m_out}")
    norm, _ = dataio.normalize(raw, params=model.norm_params)

    burn_in = _burn_in(config, model)
    report = metrics.fit_report(model, norm.inputs, norm.outputs,
                                metric_def=config.metric_def, burn_in=burn_in)
    predicted = sysid.simulate(model, norm.inputs)

    report_doc = report.to_dict()
    report_doc["config_hash"] = config.config_hash
    report_path = out / "fit_report.json"
    with open(report_path, "w") as f:
        json.dump(report_doc, f, indent=2)

    series_path = out / "validation_series.csv"
    cols = (["k"] + [f"truth_{n}" for n in norm.output_names]
            + [f"pred_{n}" for n in norm.output_names])
    _write_csv(series_path, _stamp(config), cols,
               ([k] + [repr(float(v)) for v in norm.outputs[k]]
                + [repr(float(v)) for v in predicted[k]]
                for k in range(norm.n_samples)))
    return {"report": report, "paths": {"report": report_path,
                                        "series": series_path}}


def cmd_impair(config: ExperimentConfig, scenario_index: int = 0) -> dict:
    """Channel-only dry run: impair the dataset's outputs under one
    scenario and export the observed stream."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, norm, _ = _load_and_normalize(config)
    scenarios = config.resolve_scenarios()
    if not 0 <= scenario_index < len(scenarios):
        raise ConfigError(
            f"scenario index {scenario_index} outside 0..{len(scenarios) - 1}")
    scenario = scenarios[scenario_index]
    stream = netsim.impair(norm.outputs, scenario, norm.dt,
                           sample_delay_range=config.sample_delay_range)
    path = out / "impaired.csv"
    cols = (["k"] + [f"obs_{n}" for n in norm.output_names]
            + ["source_index", "lost"])
    _write_csv(path, _stamp(config), cols,
               ([k] + [repr(float(v)) for v in stream.observed[k]]
                + [int(stream.source_index[k]), int(stream.loss_mask[k])]
                for k in range(stream.n_samples)))
    return {"stream": stream, "path": path, "scenario": scenario}


def cmd_calibrate_accuracy(config: ExperimentConfig) -> dict:
    """Score candidate accuracy formulas against the published pairs and
    write the ranking."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = metrics.calibrate_accuracy()
    result["config_hash"] = config.config_hash
    path = out / "accuracy_calibration.json"
    with open(path, "w") as f:
        json.dump(result, f, indent=2)
    return {"result": result, "path": path}
