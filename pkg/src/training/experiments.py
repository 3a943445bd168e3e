"""
Experiment orchestration for the four subcommands.

Every run writes into `config.out_dir`: JSON-lines metrics (plus a CSV
mirror when enabled), model checkpoints for training tasks and a final
`summary.json`. Given identical configs and seeds the metrics files are
byte-identical, as long as `record_timing` is off.
"""

import os
import time
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from complex_core import make_rng
from models import (
    CapacityRow,
    ExperimentConfig,
    InitResult,
    LossKind,
    MetricsRecord,
    RecurrenceKind,
    RunSummary,
    Split,
    SysidRow,
    Task,
)
from rnn.gradcheck import gradcheck_grid, summarize
from rnn.losses import accuracy, compute_loss
from rnn.urnn import (
    SequenceBatch,
    UrnnModel,
    count_parameters,
    forward,
    init_model,
    loss_and_gradients,
    matched_restricted_dim,
    with_recurrence,
)
from tasks.copy_memory import (
    INPUT_CLASSES,
    OUTPUT_CLASSES,
    CopySpec,
    copy_baseline,
    gen_copy_batch,
    recall_mask,
)
from tasks.dataset_io import dump_dataset
from tasks.system_id import gen_sysid_dataset, gen_sysid_system, nmse, sysid_oracle_model
from training.checkpoint import load_checkpoint, save_checkpoint
from training.metrics import MetricsWriter
from training.rmsprop import RmspropState, rmsprop_update
from unitary.recurrence import FullRecurrence, RestrictedRecurrence
from unitary.restricted import (
    capacity_verdict,
    compose,
    fit_to_target,
    sample_restricted,
    sample_wide_unitary,
)
from unitary.stiefel import GradScaleState, full_step
from utils.errors import ArtifactIOError, ConfigError, NumericFailure
from utils.logging_config import get_logger, set_run_context

logger = get_logger(__name__)

CAPACITY_RATIO_THRESHOLD = 10.0
UNCONSTRAINED = ("v", "b", "u", "c", "h0")


@dataclass
class TrainerState:
    """Optimizer state carried between training steps"""

    rmsprop: RmspropState
    grad_scale: Optional[GradScaleState] = None


def new_trainer_state(config: ExperimentConfig) -> TrainerState:
    return TrainerState(
        rmsprop=RmspropState(
            averaging=config.averaging, momentum=config.momentum, epsilon=config.epsilon
        ),
        grad_scale=(
            GradScaleState(decay=config.grad_scale_decay, epsilon=config.epsilon)
            if config.grad_scale
            else None
        ),
    )


def trainable_groups(model: UrnnModel, oracle_freeze: bool = False) -> Tuple[str, ...]:
    """Unconstrained parameter groups updated by RMSprop"""
    if oracle_freeze:
        return ()
    return tuple(name for name in UNCONSTRAINED if name != "h0" or model.train_h0)


def train_step(
    model: UrnnModel,
    batch: SequenceBatch,
    loss_kind: LossKind,
    state: TrainerState,
    config: ExperimentConfig,
    oracle_freeze: bool = False,
) -> Tuple[UrnnModel, TrainerState, float, np.ndarray]:
    """
    One optimization step on one batch.

    A full recurrence moves along the Cayley curve with the fixed
    `stiefel_lr`; θ of a restricted recurrence and every unfrozen
    unconstrained group go through RMSprop with `lr`.

    Returns:
        (updated model, updated state, loss before the step, outputs)
    """
    loss, grads, outputs = loss_and_gradients(model, batch, loss_kind)
    if not np.isfinite(loss):
        raise NumericFailure(f"Non-finite training loss {loss}")

    groups = trainable_groups(model, oracle_freeze)
    params: Dict[str, np.ndarray] = {name: getattr(model, name) for name in groups}
    updates: Dict[str, np.ndarray] = {name: getattr(grads, name) for name in groups}

    grad_scale = state.grad_scale
    match model.recurrence:
        case FullRecurrence(point=point):
            point, grad_scale = full_step(point, grads.recurrence, config.stiefel_lr, grad_scale)
            recurrence = FullRecurrence(point)
        case RestrictedRecurrence() as restricted:
            params["theta"] = restricted.flat_parameters()
            updates["theta"] = restricted.flat_gradient(grads.recurrence)
            recurrence = restricted

    params, rmsprop = rmsprop_update(params, updates, state.rmsprop, config.lr)
    if "theta" in params:
        recurrence = recurrence.with_flat_parameters(params.pop("theta"))

    model = replace(with_recurrence(model, recurrence), **params)
    return model, TrainerState(rmsprop=rmsprop, grad_scale=grad_scale), loss, outputs


def predict(model: UrnnModel, batch: SequenceBatch) -> np.ndarray:
    _, outputs = forward(model, batch)
    return outputs


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.start = time.perf_counter()

    def ms(self) -> Optional[float]:
        if not self.enabled:
            return None
        return (time.perf_counter() - self.start) * 1000.0


def _metrics_writer(config: ExperimentConfig, stem: str) -> MetricsWriter:
    out = Path(config.out_dir)
    csv_path = out / f"{stem}.csv" if config.write_csv else None
    return MetricsWriter(out / f"{stem}.jsonl", csv_path)


def _save_atomically(model: UrnnModel, path: Path) -> None:
    staging = path.with_name(path.name + ".partial")
    save_checkpoint(model, staging)
    try:
        os.replace(staging, path)
    except OSError as e:
        raise ArtifactIOError(f"Could not move checkpoint into place at {path}: {e}") from e
    logger.debug(f"Checkpoint written to {path}")


def _copymem_seed(seed_data: int, index: int) -> int:
    # index 0 is the test batch, i + 1 the training batch of iteration i
    return int(np.random.SeedSequence([seed_data, index]).generate_state(1, np.uint64)[0])


def run_copymem(config: ExperimentConfig) -> RunSummary:
    """Train on fresh copy-memory batches and evaluate on a fixed test batch"""
    kind = config.recurrence
    n = config.n
    if kind is RecurrenceKind.RESTRICTED and config.match_params:
        n = matched_restricted_dim(config.n, INPUT_CLASSES, OUTPUT_CLASSES, config.train_h0)
        logger.info(f"Restricted hidden size {n} matches the parameter count of n={config.n}")

    if config.resume_from:
        promote = RecurrenceKind.FULL if kind is RecurrenceKind.FULL else None
        model = load_checkpoint(config.resume_from, promote_to=promote)
        if model.kind is not kind:
            raise ConfigError(
                f"Checkpoint holds a {model.kind.value} recurrence, config asks for {kind.value}"
            )
    else:
        model = init_model(
            n,
            INPUT_CLASSES,
            OUTPUT_CLASSES,
            kind,
            make_rng(config.seed_init),
            real_output=True,
            train_h0=config.train_h0,
            u_init_scale=config.u_init_scale,
        )

    test_spec = CopySpec(config.t_delay, config.test_batch, _copymem_seed(config.seed_data, 0))
    test_batch = gen_copy_batch(test_spec)
    test_recall = recall_mask(test_spec)
    if config.dump_data:
        dump_dataset(test_batch, Path(config.out_dir) / "copymem_test.bin")

    baseline = copy_baseline(config.t_delay)
    logger.info(
        f"copymem: {kind.value} n={model.n}, {count_parameters(model)} parameters, "
        f"T={config.t_delay}, baseline {baseline:.5f}"
    )

    state = new_trainer_state(config)
    clock = _Clock(config.record_timing)
    checkpoint = Path(config.out_dir) / "checkpoint.bin"
    test_losses: List[float] = []
    final_metric: Optional[float] = None

    def evaluate(iteration: int) -> None:
        nonlocal final_metric
        outputs = predict(model, test_batch)
        loss = compute_loss(outputs, test_batch.targets, LossKind.CROSS_ENTROPY)
        final_metric = accuracy(outputs, test_batch.targets, test_recall)
        test_losses.append(loss)
        writer.write(
            MetricsRecord(
                iteration=iteration,
                epoch=0,
                split=Split.TEST,
                loss=loss,
                metric_name="recall_accuracy",
                metric=final_metric,
                unitarity_defect=model.recurrence.unitarity_defect(),
                wall_ms=clock.ms(),
                seed=config.seed_init,
            )
        )
        logger.info(
            f"iteration {iteration}: test cross entropy {loss:.5f} "
            f"({loss / baseline:.3f} × baseline), recall accuracy {final_metric:.3f}"
        )

    with _metrics_writer(config, "metrics") as writer:
        evaluate(0)
        for iteration in range(config.iterations):
            spec = CopySpec(config.t_delay, config.batch_size, _copymem_seed(config.seed_data, iteration + 1))
            batch = gen_copy_batch(spec)
            try:
                model, state, loss, outputs = train_step(
                    model, batch, LossKind.CROSS_ENTROPY, state, config
                )
            except NumericFailure as e:
                logger.error(f"Numeric failure at iteration {iteration}: {e}; last checkpoint kept")
                raise
            writer.write(
                MetricsRecord(
                    iteration=iteration + 1,
                    epoch=0,
                    split=Split.TRAIN,
                    loss=loss,
                    metric_name="recall_accuracy",
                    metric=accuracy(outputs, batch.targets, recall_mask(spec)),
                    unitarity_defect=model.recurrence.unitarity_defect(),
                    wall_ms=clock.ms(),
                    seed=config.seed_init,
                )
            )
            if (iteration + 1) % config.checkpoint_every == 0:
                _save_atomically(model, checkpoint)
            if (iteration + 1) % config.eval_every == 0 and iteration + 1 < config.iterations:
                evaluate(iteration + 1)
        if config.iterations:
            evaluate(config.iterations)

    _save_atomically(model, checkpoint)
    defect = model.recurrence.unitarity_defect()
    return RunSummary(
        task=Task.COPYMEM,
        config=config,
        recurrence_dim=model.n,
        parameter_count=count_parameters(model),
        baseline=baseline,
        best_test=min(test_losses),
        inits=[
            InitResult(
                seed=config.seed_init,
                iterations=config.iterations,
                best_test=min(test_losses),
                final_test=test_losses[-1],
                final_metric=final_metric,
                unitarity_defect=defect,
            )
        ],
    )


def _sysid_init(config: ExperimentConfig, oracle: UrnnModel, seed: int) -> UrnnModel:
    """
    Model for one initialization seed. The recurrence always starts from a
    restricted draw; with oracle freezing every other parameter is the true
    system's.
    """
    model = init_model(
        config.n,
        config.n,
        config.n,
        config.recurrence,
        make_rng(seed),
        real_output=False,
        train_h0=config.train_h0,
        u_init_scale=config.u_init_scale,
    )
    if config.oracle_freeze:
        return with_recurrence(oracle, model.recurrence)
    return model


def run_sysid(config: ExperimentConfig) -> RunSummary:
    """
    Learn a true system's dynamics from input/output pairs, once per init seed.

    With `sysid_dims` set, every (n, origin) cell is run with both recurrences
    on the same data and initial W, each in its own subdirectory, and the
    summary holds one row per cell and recurrence.
    """
    if config.resume_from:
        raise ConfigError("resume_from is only supported by copymem")
    if config.sysid_dims:
        return _sysid_grid(config)
    return _sysid_single(config)


def _sysid_grid(config: ExperimentConfig) -> RunSummary:
    origins = config.sysid_origins or [config.origin]
    rows: List[SysidRow] = []
    for n in config.sysid_dims:
        verdict = capacity_verdict(n)
        for origin in origins:
            for recurrence in RecurrenceKind:
                out = Path(config.out_dir) / f"n{n}_{origin.value}_{recurrence.value}"
                try:
                    out.mkdir(parents=True, exist_ok=True)
                except OSError as e:
                    raise ArtifactIOError(f"Could not create output directory {out}: {e}") from e
                cell = config.model_copy(
                    update={
                        "n": n,
                        "origin": origin,
                        "recurrence": recurrence,
                        "sysid_dims": [],
                        "sysid_origins": [],
                        "out_dir": str(out),
                    }
                )
                summary = _sysid_single(cell)
                best = min(summary.inits, key=lambda result: (result.best_test, result.seed))
                rows.append(
                    SysidRow(
                        n=n,
                        origin=origin,
                        recurrence=recurrence,
                        provably_restricted=verdict.provably_restricted,
                        best_test=best.best_test,
                        best_seed=best.seed,
                    )
                )

    logger.info("sysid grid: best test NMSE")
    for n in config.sysid_dims:
        for origin in origins:
            cells = {row.recurrence: row.best_test for row in rows if row.n == n and row.origin is origin}
            logger.info(
                f"  n={n:3d} {origin.value}: restricted {cells[RecurrenceKind.RESTRICTED]:.4e}, "
                f"full {cells[RecurrenceKind.FULL]:.4e}"
            )
    return RunSummary(
        task=Task.SYSID,
        config=config,
        best_test=min(row.best_test for row in rows),
        sysid=rows,
    )


def _sysid_single(config: ExperimentConfig) -> RunSummary:
    data_rng = make_rng(config.seed_data)
    system = gen_sysid_system(config.n, config.origin, data_rng)
    train = gen_sysid_dataset(system, config.seq_len, config.train_count, data_rng)
    valid = gen_sysid_dataset(system, config.seq_len, config.valid_count, data_rng)
    test = gen_sysid_dataset(system, config.seq_len, config.test_count, data_rng)
    if config.dump_data:
        out = Path(config.out_dir)
        for name, split in (("train", train), ("valid", valid), ("test", test)):
            dump_dataset(split, out / f"sysid_{name}.bin")
    oracle = sysid_oracle_model(system)
    logger.info(
        f"sysid: {config.recurrence.value} n={config.n}, system from {config.origin.value}, "
        f"{config.train_count}/{config.valid_count}/{config.test_count} sequences of {config.seq_len}"
    )

    inits: List[InitResult] = []
    for k in range(config.init_seeds):
        seed = config.seed_init + k
        set_run_context(f"sysid seed_data={config.seed_data} seed_init={seed}")
        inits.append(_train_sysid(config, oracle, seed, train, valid, test))

    best = min(inits, key=lambda result: (result.best_test, result.seed))
    logger.info(f"sysid: best test NMSE {best.best_test:.4e} (init seed {best.seed})")
    return RunSummary(
        task=Task.SYSID,
        config=config,
        recurrence_dim=config.n,
        best_test=best.best_test,
        inits=inits,
    )


def _train_sysid(
    config: ExperimentConfig,
    oracle: UrnnModel,
    seed: int,
    train: SequenceBatch,
    valid: SequenceBatch,
    test: SequenceBatch,
) -> InitResult:
    model = _sysid_init(config, oracle, seed)
    shuffle = make_rng(seed).spawn(1)[0]
    state = new_trainer_state(config)
    clock = _Clock(config.record_timing)
    iteration = 0
    best_valid = best_test = np.inf
    final_test = np.inf

    def evaluate(epoch: int) -> Tuple[float, float]:
        scores = []
        for split, batch in ((Split.VALID, valid), (Split.TEST, test)):
            outputs = predict(model, batch)
            score = nmse(outputs, batch.targets)
            writer.write(
                MetricsRecord(
                    iteration=iteration,
                    epoch=epoch,
                    split=split,
                    loss=compute_loss(outputs, batch.targets, LossKind.MSE),
                    metric_name="nmse",
                    metric=score,
                    unitarity_defect=model.recurrence.unitarity_defect(),
                    wall_ms=clock.ms(),
                    seed=seed,
                )
            )
            scores.append(score)
        logger.info(f"epoch {epoch}: valid NMSE {scores[0]:.4e}, test NMSE {scores[1]:.4e}")
        return scores[0], scores[1]

    with _metrics_writer(config, f"metrics_seed{seed}") as writer:
        valid_score, final_test = evaluate(0)
        best_valid, best_test = valid_score, final_test
        for epoch in range(1, config.epochs + 1):
            order = shuffle.permutation(train.batch_size)
            for start in range(0, train.batch_size, config.batch_size):
                batch = train.select(order[start : start + config.batch_size])
                try:
                    model, state, loss, outputs = train_step(
                        model, batch, LossKind.MSE, state, config, config.oracle_freeze
                    )
                except NumericFailure as e:
                    logger.error(f"Numeric failure at iteration {iteration}: {e}; last checkpoint kept")
                    raise
                iteration += 1
                writer.write(
                    MetricsRecord(
                        iteration=iteration,
                        epoch=epoch,
                        split=Split.TRAIN,
                        loss=loss,
                        metric_name="nmse",
                        metric=nmse(outputs, batch.targets),
                        unitarity_defect=model.recurrence.unitarity_defect(),
                        wall_ms=clock.ms(),
                        seed=seed,
                    )
                )
            valid_score, final_test = evaluate(epoch)
            best_valid = min(best_valid, valid_score)
            best_test = min(best_test, final_test)
            _save_atomically(model, Path(config.out_dir) / f"checkpoint_seed{seed}.bin")

    return InitResult(
        seed=seed,
        iterations=iteration,
        best_valid=best_valid,
        best_test=best_test,
        final_test=final_test,
        final_metric=final_test,
        unitarity_defect=model.recurrence.unitarity_defect(),
    )


def run_capacity(config: ExperimentConfig) -> RunSummary:
    """
    Fit W(θ) to an in-image target and to a product-of-two target for each
    dimension and report the residual ratio.
    """
    target_rng = make_rng(config.seed_data)
    fit_rng = make_rng(config.seed_init)
    rows: List[CapacityRow] = []

    with _metrics_writer(config, "metrics") as writer:
        for index, n in enumerate(config.capacity_dims):
            verdict = capacity_verdict(n)
            truth = sample_restricted(n, target_rng)
            fit_target = partial(
                fit_to_target,
                restarts=config.fit_restarts,
                iters=config.fit_iters,
                lr=config.fit_lr,
                rng=fit_rng,
                method=config.fit_method,
                hop_scale=config.fit_hop_scale,
            )
            in_image = fit_target(compose(truth), perm=truth.perm)
            wide = fit_target(sample_wide_unitary(n, target_rng))
            ratio = wide.residual / max(in_image.residual, np.finfo(float).tiny)
            rows.append(
                CapacityRow(
                    n=n,
                    param_count=verdict.param_count,
                    manifold_dim=verdict.manifold_dim,
                    provably_restricted=verdict.provably_restricted,
                    in_image_residual=in_image.residual,
                    wide_residual=wide.residual,
                    ratio=ratio,
                )
            )
            for name, fit in (("in_image_residual", in_image), ("wide_residual", wide)):
                writer.write(
                    MetricsRecord(
                        iteration=index,
                        epoch=0,
                        split=Split.TRAIN,
                        loss=fit.residual,
                        metric_name=name,
                        metric=fit.residual,
                        unitarity_defect=RestrictedRecurrence(fit.params).unitarity_defect(),
                        seed=config.seed_init,
                    )
                )
            logger.info(
                f"capacity n={n}: in-image residual {in_image.residual:.3e}, "
                f"wide residual {wide.residual:.3e}, ratio {ratio:.1f}"
            )

    return RunSummary(
        task=Task.CAPACITY,
        config=config,
        capacity=rows,
        passed=all(
            row.ratio >= CAPACITY_RATIO_THRESHOLD for row in rows if row.provably_restricted
        ),
    )


def run_gradcheck(config: ExperimentConfig) -> RunSummary:
    """Compare BPTT gradients with central differences across the configured grid"""
    reports = gradcheck_grid(
        config.gradcheck_dims,
        config.gradcheck_io,
        config.gradcheck_len,
        config.gradcheck_batch,
        config.gradcheck_step,
        config.gradcheck_rtol,
        make_rng(config.seed_init),
    )
    for name, worst in summarize(reports).items():
        logger.info(f"gradcheck {name}: worst relative error {worst:.3e}")
    return RunSummary(
        task=Task.GRADCHECK,
        config=config,
        gradcheck=reports,
        passed=all(report.passed for report in reports),
    )


def write_summary(summary: RunSummary, out_dir: str) -> Path:
    """Write the summary document as JSON"""
    path = Path(out_dir) / "summary.json"
    try:
        path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"Could not write summary {path}: {e}") from e
    return path


def run_experiment(config: ExperimentConfig) -> RunSummary:
    """
    Execute the task named by `config` and write its summary.

    Raises:
        ConfigError: the configuration cannot be run
        NumericFailure: a loss or gradient became non-finite
        ArtifactIOError: outputs cannot be written
    """
    try:
        Path(config.out_dir).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactIOError(f"Could not create output directory {config.out_dir}: {e}") from e

    set_run_context(f"{config.task.value} seed_data={config.seed_data} seed_init={config.seed_init}")
    logger.info(f"Starting {config.task.value} run ({config.preset.value} preset) in {config.out_dir}")

    match config.task:
        case Task.COPYMEM:
            summary = run_copymem(config)
        case Task.SYSID:
            summary = run_sysid(config)
        case Task.CAPACITY:
            summary = run_capacity(config)
        case Task.GRADCHECK:
            summary = run_gradcheck(config)
        case _:
            raise ConfigError(f"Unknown task: {config.task}")

    path = write_summary(summary, config.out_dir)
    logger.info(f"Finished {config.task.value} run; summary written to {path}")
    return summary
