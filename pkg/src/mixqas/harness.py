"""Experiment harness: configuration, seeded repetitions, artifact emission.

A run is fully determined by its resolved configuration: every stochastic
stream is a Philox substream derived from a repetition seed and a component
label, so repeated runs produce byte-identical metric files.  Wall times
are recorded separately (timings.csv) to keep the metric files
deterministic.
"""

from __future__ import annotations

import json
import os
import time
import zlib
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import export
from .baseline import GumbelCfg, QdartsHyper, qdarts_search
from .densmat import DensityMatrix, NoiseKind, NoiseSpec, PureState
from .difftape import (
    backward,
    chain_alpha_to_hidden,
    heisenberg_observable,
    record_forward,
)
from .regopt import (
    AdamCosine,
    EntropyScheduleCfg,
    angle_penalty,
    angle_penalty_grad,
    entropy_term,
    entropy_term_grad,
)
from .searchspace import (
    build_macro_program,
    build_micro_program,
    discretize,
    gate_probs,
    init_logits,
    init_theta,
    simulate_discrete,
)
from .tasks.classify import (
    ClassifyTask,
    bce_grad,
    bce_loss,
    prediction_adjoint_mat,
    prediction_from_mat,
    prediction_from_vec,
)
from .tasks.maxcut import MaxCutTask, erdos_renyi, read_graph
from .tasks.state_init import StateInitTask


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def substream(master_seed, *labels) -> np.random.Generator:
    """Named counter-based RNG substream.

    The Philox stream is keyed by ``SeedSequence(master_seed,
    spawn_key=(crc32(label_0), crc32(label_1), ...))``, so every component
    gets an independent, platform-stable stream.
    """
    key = tuple(zlib.crc32(str(lab).encode()) for lab in labels)
    ss = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_TASKS = ("ghz", "w", "maxcut", "classify")
_ALGORITHMS = ("rho_macro", "rho_micro", "qdarts")

_TASK_DEFAULTS = {
    "ghz": dict(epochs=1000, learning_rate=0.1, t_max=100, s0=0.0, s1=0.1),
    "w": dict(epochs=1000, learning_rate=0.1, t_max=100, s0=0.0, s1=0.1),
    "maxcut": dict(epochs=1000, learning_rate=0.1, t_max=100, s0=0.0, s1=0.1, m=15),
    "classify": dict(epochs=10, learning_rate=0.01 * np.sqrt(128.0), t_max=10,
                     s0=-0.1, s1=0.1, m=15, n=8),
}


@dataclass
class ExperimentConfig:
    task: str
    algorithm: str = "rho_macro"
    n: int = 2
    m: int | None = None
    epochs: int | None = None
    learning_rate: float | None = None
    t_max: int | None = None
    s0: float | None = None
    s1: float | None = None
    s_theta: float = 0.01
    hidden_units: bool = False
    restart_schedule: bool = True
    checkpoint_stride: int = 1
    noise_kind: str = NoiseKind.NONE
    noise_grid: tuple = (0.0,)
    seeds: tuple = (0, 1, 2)
    out_dir: str = "runs/out"
    # micro search (max-cut)
    n_s: int = 2
    m_sub: int = 3
    # max-cut task
    graph_file: str | None = None
    graph_seed: int = 0
    edge_prob: float = 0.5
    # classification task
    dataset: str = "synthetic"
    data_dir: str = "data/mnist"
    encoding: str = "angle"
    batch_size: int = 128
    synthetic_train: int = 2048
    synthetic_test: int = 512
    synthetic_seed: int = 7
    # baseline
    tau: float = 0.05
    inner_iters: int = 10

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "task" not in raw:
            raise ConfigError("config requires a 'task'")
        merged = dict(raw)
        for key, val in _TASK_DEFAULTS.get(raw["task"], {}).items():
            merged.setdefault(key, val)
        if "noise_grid" in merged and np.isscalar(merged["noise_grid"]):
            merged["noise_grid"] = (float(merged["noise_grid"]),)
        cfg = cls(**merged)
        cfg.noise_grid = tuple(float(p) for p in cfg.noise_grid)
        cfg.seeds = tuple(int(s) for s in cfg.seeds)
        cfg.validate()
        return cfg

    def validate(self):
        if self.task not in _TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {_TASKS}")
        if self.algorithm not in _ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.noise_kind not in NoiseKind.ALL:
            raise ConfigError(f"unknown noise kind {self.noise_kind!r}")
        if any(not 0.0 <= p <= 1.0 for p in self.noise_grid):
            raise ConfigError("noise probabilities must lie in [0, 1]")
        if not self.seeds:
            raise ConfigError("config needs at least one seed")
        if self.algorithm == "rho_micro" and self.task != "maxcut":
            raise ConfigError("micro search requires the max-cut task (its super "
                              "circuit comes from the graph edges)")
        if (self.algorithm == "qdarts"
                and self.noise_kind == NoiseKind.DEPOLARIZING
                and any(p > 0 for p in self.noise_grid)):
            raise ConfigError("qdarts evolves state vectors and cannot model "
                              "depolarizing noise")
        if self.task == "classify":
            if self.encoding not in ("angle", "dense"):
                raise ConfigError(f"unknown encoding {self.encoding!r}")
            if self.dataset not in ("synthetic", "mnist"):
                raise ConfigError(f"unknown dataset {self.dataset!r}")
            if self.n != 8:
                raise ConfigError("classification uses an 8-qubit circuit")
        if self.epochs is None or self.learning_rate is None or self.t_max is None:
            raise ConfigError(f"no defaults for task {self.task!r}; set epochs, "
                              "learning_rate and t_max explicitly")

    def resolved(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = list(val)
            out[f.name] = val
        if out["m"] is None:
            out["m"] = self.layers()
        return out

    def layers(self) -> int:
        if self.m is not None:
            return self.m
        if self.task in ("ghz", "w"):
            return 2 * self.n
        raise ConfigError("layer count m is required for this task")

    def noise(self, p) -> NoiseSpec:
        if self.noise_kind == NoiseKind.NONE or p == 0.0:
            return NoiseSpec()
        return NoiseSpec(self.noise_kind, p)

    def entropy_cfg(self) -> EntropyScheduleCfg:
        return EntropyScheduleCfg(self.s0, self.s1)


def load_config(path, overrides=None) -> ExperimentConfig:
    with open(path) as fh:
        raw = json.load(fh)
    for key, val in (overrides or {}).items():
        raw[key] = val
    try:
        return ExperimentConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_override(text):
    """--set key=value with JSON-typed values (bare words stay strings)."""
    key, _, val = text.partition("=")
    if not _:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    try:
        return key.strip(), json.loads(val)
    except json.JSONDecodeError:
        return key.strip(), val


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    run_id: str
    seed: int
    noise_p: float
    epochs: int
    series: dict
    final: dict
    architecture: dict
    wall_time: float

    def check(self):
        for key, values in self.series.items():
            if len(values) != self.epochs:
                raise RuntimeError(f"series {key!r} has {len(values)} entries "
                                   f"for {self.epochs} epochs")
        return self


def build_task(config: ExperimentConfig):
    if config.task in ("ghz", "w"):
        return StateInitTask(config.task, config.n)
    if config.task == "maxcut":
        if config.graph_file:
            graph = read_graph(config.graph_file)
        else:
            graph = erdos_renyi(config.n, config.edge_prob,
                                substream(config.graph_seed, "graph"))
        return MaxCutTask(graph)
    if config.dataset == "mnist":
        return ClassifyTask.mnist(config.data_dir, config.encoding, config.batch_size)
    return ClassifyTask.synthetic(config.encoding, config.batch_size,
                                  seed=config.synthetic_seed,
                                  n_train=config.synthetic_train,
                                  n_test=config.synthetic_test)


def _normalized_entropy(P):
    logP = np.log(np.clip(P, 1e-300, None))
    total = float(np.sum(-np.sum(P * logP, axis=-1)))
    m, n, G = P.shape
    return total / (m * n * np.log(G))


def _final_state(task, config, A, theta, noise, structure):
    """Output of the discretized circuit on the task's initial state."""
    n = task.n_qubits
    m = config.m_sub if structure is not None else config.layers()
    if noise.kind == NoiseKind.NONE:
        initial = PureState(n, task.initial_vec())
    else:
        initial = DensityMatrix(n, task.initial_mat())
    return simulate_discrete(A, theta, initial, noise, structure=structure, m=m)


def _final_metrics(task, config, A, theta, noise, structure=None) -> dict:
    if isinstance(task, ClassifyTask):
        def predict(state):
            out = simulate_discrete(A, theta, state, m=config.layers())
            return prediction_from_vec(out.amplitudes)
        return {"accuracy": task.test_accuracy(predict)}
    return task.final_metrics(_final_state(task, config, A, theta, noise, structure))


# ---------------------------------------------------------------------------
# density-matrix search (macro and micro)
# ---------------------------------------------------------------------------


def _odd_diag_observable(n_qubits):
    diag = np.zeros(1 << n_qubits, dtype=np.complex128)
    diag[1::2] = 1.0
    return np.diag(diag)


def classify_batch_step(program, logits, theta, psi, labels, stride=1):
    """Loss and exact batch gradients for one classification minibatch.

    The prediction is linear in the input state, so the whole batch
    collapses to one adjoint pass (a Heisenberg-picture observable giving
    every p_b) plus one tape pass on the BCE-weighted combination
    sum_b w_b |psi_b><psi_b| of the encoded inputs.  Exact for noiseless
    programs; per-element passes give the same gradients at B times the
    cost.
    """
    n = program.n_qubits
    obs = _odd_diag_observable(n)
    M, c = heisenberg_observable(program, logits, theta, obs)
    preds = np.clip(np.einsum("bi,ij,bj->b", np.conj(psi), M, psi).real + c,
                    0.0, 1.0)
    loss = bce_loss(preds, labels)
    w = bce_grad(preds, labels)
    rho_bar = np.einsum("b,bi,bj->ij", w.astype(np.complex128), psi, np.conj(psi))
    _, tape = record_forward(program, logits, theta, rho_bar, stride)
    return loss, backward(tape, obs), preds


def _train_rho(config: ExperimentConfig, task, seed, noise_p) -> RunRecord:
    t_start = time.perf_counter()
    noise = config.noise(noise_p)
    rng_init = substream(seed, "init")
    structure = None
    if config.algorithm == "rho_micro":
        structure = task.supercircuit()
        m, n_loc = config.m_sub, structure.n_sub_qubits
        program = build_micro_program(structure, m, noise)
        theta_shape = (structure.n_subcircuits, m, n_loc)
    else:
        m, n_loc = config.layers(), task.n_qubits
        program = build_macro_program(task.n_qubits, m, noise)
        theta_shape = (m, n_loc)
    G = len(program.gateset)
    logits = init_logits(rng_init, m, n_loc, G, config.hidden_units)
    theta = init_theta(rng_init, theta_shape)
    opt = AdamCosine(config.learning_rate, config.t_max, restart=config.restart_schedule)
    ent_cfg = config.entropy_cfg()
    is_classify = isinstance(task, ClassifyTask)
    rng_batches = substream(seed, "batches") if is_classify else None

    def apply_update(logits, theta, task_loss, bundle, t_norm):
        P = gate_probs(logits)
        ent = entropy_term(P, t_norm, ent_cfg)
        ang = angle_penalty(theta, config.s_theta)
        d_alpha = bundle.d_alpha + entropy_term_grad(P, t_norm, ent_cfg)
        d_theta = bundle.d_theta + angle_penalty_grad(theta, config.s_theta)
        params = {"theta": theta, **logits.parameters()}
        if logits.has_hidden:
            dH, dv = chain_alpha_to_hidden(d_alpha, logits)
            grads = {"theta": d_theta, "hidden": dH, "hidden_vec": dv}
        else:
            grads = {"theta": d_theta, "alpha": d_alpha}
        updated = opt.step(params, grads)
        new_logits = logits.replace_parameters(
            {k: v for k, v in updated.items() if k != "theta"})
        return new_logits, updated["theta"], task_loss + ent + ang

    series = {"loss": [], "task_loss": [], "entropy": [], "learning_rate": []}
    for epoch in range(config.epochs):
        t_norm = epoch / config.epochs
        opt.schedule_step = epoch  # annealing follows epochs, not minibatches
        series["entropy"].append(_normalized_entropy(gate_probs(logits)))
        series["learning_rate"].append(opt.learning_rate())

        if is_classify:
            # one pass over the training set, one update per full minibatch
            losses, totals = [], []
            for batch in task.epoch_batches(rng_batches):
                psi = task.encoded_matrix(batch)
                labels = task.train_labels[batch]
                if noise.kind == NoiseKind.NONE:
                    task_loss, bundle, _ = classify_batch_step(
                        program, logits, theta, psi, labels, config.checkpoint_stride)
                else:
                    task_loss, bundle = _classify_batch_per_element(
                        program, logits, theta, psi, labels, config.checkpoint_stride)
                logits, theta, total = apply_update(logits, theta, task_loss,
                                                    bundle, t_norm)
                losses.append(task_loss)
                totals.append(total)
            series["task_loss"].append(float(np.mean(losses)))
            series["loss"].append(float(np.mean(totals)))
        else:
            rho_out, tape = record_forward(program, logits, theta, task.initial_mat(),
                                           config.checkpoint_stride)
            task_loss = task.loss_mat(rho_out)
            bundle = backward(tape, task.adjoint_mat(rho_out))
            logits, theta, total = apply_update(logits, theta, task_loss, bundle, t_norm)
            series["task_loss"].append(task_loss)
            series["loss"].append(total)

    A = discretize(gate_probs(logits))
    final = _final_metrics(task, config, A, theta, noise, structure)
    final["task_loss"] = series["task_loss"][-1]
    record = export.architecture_record(A, theta, program.gateset,
                                        task.n_qubits, structure)
    run_id = _run_id(seed, noise_p, config)
    return RunRecord(run_id, seed, noise_p, config.epochs, series, final,
                     record, time.perf_counter() - t_start).check()


def _classify_batch_per_element(program, logits, theta, psi, labels, stride):
    """Per-element tapes (used when noise channels make the collapsed
    batch pass inapplicable); gradients are averaged in batch order."""
    task_loss = 0.0
    bundle = None
    B = len(labels)
    n = program.n_qubits
    for amp, y in zip(psi, labels):
        rho0 = np.outer(amp, np.conj(amp))
        rho_out, tape = record_forward(program, logits, theta, rho0, stride)
        p = prediction_from_mat(rho_out)
        task_loss += bce_loss([p], [y]) / B
        dldp = bce_grad([p], [y])[0] / B
        b = backward(tape, prediction_adjoint_mat(n, dldp))
        bundle = b if bundle is None else bundle.add_(b)
    return task_loss, bundle


# ---------------------------------------------------------------------------
# baseline search
# ---------------------------------------------------------------------------


def _train_qdarts(config: ExperimentConfig, task, seed, noise_p) -> RunRecord:
    t_start = time.perf_counter()
    noise = config.noise(noise_p)
    hyper = QdartsHyper(
        m=config.layers(),
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        t_max=config.t_max,
        entropy=config.entropy_cfg(),
        s_theta=config.s_theta,
        hidden_units=config.hidden_units,
        noise=noise,
        restart=config.restart_schedule,
    )
    cfg = GumbelCfg(tau=config.tau, num_inner_iter=config.inner_iters)
    A, theta, trace = qdarts_search(
        task, cfg, hyper,
        rng_init=substream(seed, "init"),
        rng_sample=substream(seed, "gumbel"),
        rng_batch=substream(seed, "batches"),
    )
    final = _final_metrics(task, config, A, theta, noise)
    final["task_loss"] = trace["task_loss"][-1]
    program = build_macro_program(task.n_qubits, hyper.m)
    record = export.architecture_record(A, theta, program.gateset, task.n_qubits)
    run_id = _run_id(seed, noise_p, config)
    return RunRecord(run_id, seed, noise_p, config.epochs, trace, final,
                     record, time.perf_counter() - t_start).check()


def _run_id(seed, noise_p, config):
    if len(config.noise_grid) > 1:
        return f"p{noise_p:g}_s{seed}"
    return str(seed)


# ---------------------------------------------------------------------------
# top-level driver and artifact emission
# ---------------------------------------------------------------------------


def run_experiment(config: ExperimentConfig, emit=True):
    """One RunRecord per (noise p, seed); optionally writes all artifacts."""
    task = build_task(config)
    records = []
    for p in config.noise_grid:
        for seed in config.seeds:
            if config.algorithm == "qdarts":
                records.append(_train_qdarts(config, task, seed, p))
            else:
                records.append(_train_rho(config, task, seed, p))
    if emit:
        emit_outputs(records, config.out_dir, config.resolved())
    return records


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def emit_outputs(records, out_dir, resolved_config) -> list:
    """Write metrics.csv, summary.csv, per-run architecture and QASM files,
    config.resolved and timings.csv.  Fails before touching the filesystem
    when the record set is empty."""
    if not records:
        raise ValueError("emit_outputs called with no run records")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    lines = ["run,epoch,key,value"]
    for rec in records:
        for key, values in sorted(rec.series.items()):
            for epoch, value in enumerate(values):
                lines.append(f"{rec.run_id},{epoch},{key},{_fmt(float(value))}")
        for key in sorted(rec.final):
            lines.append(f"{rec.run_id},{rec.epochs},final_{key},{_fmt(float(rec.final[key]))}")
    _atomic_write(out / "metrics.csv", "\n".join(lines) + "\n")
    written.append(out / "metrics.csv")

    lines = ["noise_p,metric,mean,std,n_runs"]
    by_p = {}
    for rec in records:
        by_p.setdefault(rec.noise_p, []).append(rec)
    for p in sorted(by_p):
        group = by_p[p]
        metrics = sorted({k for rec in group for k in rec.final})
        for metric in metrics:
            vals = np.array([rec.final[metric] for rec in group if metric in rec.final])
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            lines.append(f"{_fmt(float(p))},{metric},{_fmt(float(vals.mean()))},"
                         f"{_fmt(std)},{len(vals)}")
    _atomic_write(out / "summary.csv", "\n".join(lines) + "\n")
    written.append(out / "summary.csv")

    for rec in records:
        arch_path = out / f"architecture_{rec.run_id}.json"
        _atomic_write(arch_path, json.dumps(rec.architecture, indent=2, sort_keys=True) + "\n")
        qasm_path = out / f"circuit_{rec.run_id}.qasm"
        _atomic_write(qasm_path, export.to_qasm(rec.architecture))
        written += [arch_path, qasm_path]

    _atomic_write(out / "config.resolved", json.dumps(resolved_config, indent=2,
                                                      sort_keys=True) + "\n")
    written.append(out / "config.resolved")

    lines = ["run,wall_time_seconds"]
    lines += [f"{rec.run_id},{rec.wall_time:.3f}" for rec in records]
    _atomic_write(out / "timings.csv", "\n".join(lines) + "\n")
    written.append(out / "timings.csv")
    return written


# ---------------------------------------------------------------------------
# readers (round-trip counterparts of the emitters)
# ---------------------------------------------------------------------------


def read_metrics_csv(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != ["run", "epoch", "key", "value"]:
            raise ValueError(f"unexpected metrics header {header}")
        for line in fh:
            run, epoch, key, value = line.strip().split(",")
            rows.append({"run": run, "epoch": int(epoch), "key": key,
                         "value": float(value)})
    return rows


def read_summary_csv(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != ["noise_p", "metric", "mean", "std", "n_runs"]:
            raise ValueError(f"unexpected summary header {header}")
        for line in fh:
            p, metric, mean, std, n = line.strip().split(",")
            rows.append({"noise_p": float(p), "metric": metric,
                         "mean": float(mean), "std": float(std), "n_runs": int(n)})
    return rows


def read_resolved_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))
