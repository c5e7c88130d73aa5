"""Training loop, model selection on dev F1, evaluation, multi-run averaging.

Every number a run reports is a deterministic function of (config, seed,
data): parameter init, batch shuffling, and sampling noise each draw from
their own generator seeded from the run seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import DatasetSplit
from .errors import ConfigError, DataError, NumericError
from .latent import parse_latent_spec
from .layers import AdamState, adam_step
from .model import (BaselineConfig, BaselineModel, EncoderDecoder,
                    EncoderDecoderConfig, group_by_answer_count, make_batch,
                    model_param_tensors, predict, total_loss)
from .store import EmbeddingStore, Shape2D

EVAL_CHUNK = 256


@dataclass
class TrainConfig:
    epochs: int = 120
    batch_size: int = 100
    lr: float = 0.001
    runs: int = 5
    seed: int = 0
    model: str = "encdec"           # baseline | encdec
    latent: str = "c5"
    tau: float = 0.5
    tau_anneal: bool = False        # linear 1.0 -> tau over the epochs
    beta: float = 1.0
    channels: int = 16
    hidden: tuple = (5376, 1024)
    rows: int = 32
    cols: int = 24
    select: str = "best"            # best dev F1 (ties -> earliest) | last

    def validate(self) -> None:
        if self.runs < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("runs, epochs, and batch_size must all be >= 1")
        if self.model not in ("baseline", "encdec"):
            raise ConfigError(f"unknown model kind {self.model!r}")
        if self.select not in ("best", "last"):
            raise ConfigError(f"select must be 'best' or 'last', got {self.select!r}")
        parse_latent_spec(self.latent, tau=self.tau)

    def model_config(self) -> dict:
        """JSON-able snapshot sufficient to rebuild the model skeleton."""
        return {
            "model": self.model,
            "rows": self.rows,
            "cols": self.cols,
            "latent": self.latent,
            "tau": self.tau,
            "beta": self.beta,
            "channels": self.channels,
            "hidden": list(self.hidden),
            "seq_len": 7,
            "lr": self.lr,
            "seed": self.seed,
        }


def build_model(config: dict, rng: np.random.Generator):
    shape = Shape2D(rows=config["rows"], cols=config["cols"])
    if config["model"] == "baseline":
        cfg = BaselineConfig(shape=shape, seq_len=config.get("seq_len", 7),
                             hidden=tuple(config["hidden"]))
        return BaselineModel(cfg, rng)
    spec = parse_latent_spec(config["latent"], tau=config["tau"])
    cfg = EncoderDecoderConfig(latent=spec, shape=shape,
                               seq_len=config.get("seq_len", 7),
                               conv_channels=config["channels"],
                               beta=config["beta"])
    return EncoderDecoder(cfg, rng)


@dataclass
class Checkpoint:
    """Selected parameters plus everything needed to reproduce the run."""

    config: dict
    params: dict                 # name -> float32 ndarray
    adam: AdamState | None
    best_epoch: int
    best_dev_f1: float
    curve: list = field(default_factory=list)


def restore_model(ckpt: Checkpoint):
    model = build_model(ckpt.config, np.random.default_rng(0))
    tensors = {t.name: t for t in model_param_tensors(model)}
    if set(tensors) != set(ckpt.params):
        raise ConfigError(
            f"checkpoint parameters {sorted(ckpt.params)} do not match model "
            f"parameters {sorted(tensors)}")
    for name, arr in ckpt.params.items():
        if tensors[name].data.shape != arr.shape:
            raise ConfigError(f"checkpoint tensor {name} has shape {arr.shape}, "
                              f"model expects {tensors[name].data.shape}")
        tensors[name].data = arr.copy()
    return model


@dataclass
class EvalResult:
    f1: float
    per_label_error_counts: dict
    n_instances: int
    run_seed: int = 0
    dataset: str = ""


def _snapshot_params(model) -> dict:
    return {t.name: t.data.copy() for t in model_param_tensors(model)}


def _check_store_coverage(split: DatasetSplit, store: EmbeddingStore) -> None:
    for inst in split.train + split.dev + split.test:
        for sid in inst.sentence_ids():
            if sid not in store.index:
                raise KeyError(f"sentence id {sid!r} not in store")


def train(split: DatasetSplit, store: EmbeddingStore, cfg: TrainConfig) -> Checkpoint:
    """Train one model on split.train, selecting by dev F1.

    Mini-batches of cfg.batch_size are drawn from a seeded shuffle each
    epoch (the final incomplete batch is kept).  Returns the checkpoint of
    the best dev epoch (earliest on ties), or the last epoch when
    cfg.select == "last".
    """
    cfg.validate()
    shape = Shape2D(cfg.rows, cfg.cols)
    if shape.dim != store.dim:
        raise ConfigError(f"shape {cfg.rows}x{cfg.cols} != store dim {store.dim}")
    _check_store_coverage(split, store)

    init_rng = np.random.default_rng([cfg.seed, 0])
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    noise_rng = np.random.default_rng([cfg.seed, 2])

    model = build_model(cfg.model_config(), init_rng)
    adam = AdamState(lr=cfg.lr)

    best_f1 = -1.0
    best_epoch = -1
    best_params = _snapshot_params(model)
    curve = []
    n_steps = 0

    for epoch in range(1, cfg.epochs + 1):
        if cfg.tau_anneal and cfg.model == "encdec":
            frac = (epoch - 1) / max(1, cfg.epochs - 1)
            model.cfg.latent.tau = 1.0 + frac * (cfg.tau - 1.0)

        order = shuffle_rng.permutation(len(split.train))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            chunk = [split.train[i] for i in order[start:start + cfg.batch_size]]
            for group in group_by_answer_count(chunk):
                batch = make_batch(group, store, shape)
                try:
                    loss, _ = total_loss(model, batch, rng=noise_rng)
                except NumericError as e:
                    raise NumericError(f"epoch {epoch} batch {start // cfg.batch_size}: {e}")
                for t in model_param_tensors(model):
                    t.grad = None
                loss.backward()
                adam_step(model.params, None, adam)
                n_steps += 1
                epoch_losses.append(float(loss.data))

        dev_f1 = evaluate(model, split.dev, store, shape=shape).f1
        curve.append({"epoch": epoch, "train_loss": float(np.mean(epoch_losses)),
                      "dev_f1": dev_f1})
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_epoch = epoch
            best_params = _snapshot_params(model)

    if cfg.select == "last":
        best_params = _snapshot_params(model)
        best_epoch = cfg.epochs
        best_f1 = curve[-1]["dev_f1"]

    config = cfg.model_config()
    config["n_steps"] = n_steps
    return Checkpoint(config=config, params=best_params, adam=adam,
                      best_epoch=best_epoch, best_dev_f1=best_f1, curve=curve)


def evaluate(model_or_ckpt, instances, store: EmbeddingStore,
             shape: Shape2D | None = None, run_seed: int = 0) -> EvalResult:
    """Deterministic predictions over instances; micro-F1 and error tallies.

    For a one-of-k choice task micro-F1 equals the fraction of instances
    answered correctly; wrong choices are counted under the label of the
    answer the model picked.
    """
    if len(instances) == 0:
        raise DataError("evaluate needs a non-empty instance list")
    model = restore_model(model_or_ckpt) if isinstance(model_or_ckpt, Checkpoint) else model_or_ckpt
    if shape is None:
        shape = model.cfg.shape
    n_correct = 0
    errors: dict[str, int] = {}
    for group in group_by_answer_count(instances):
        for start in range(0, len(group), EVAL_CHUNK):
            chunk = group[start:start + EVAL_CHUNK]
            batch = make_batch(chunk, store, shape)
            for inst, pred in zip(chunk, predict(model, batch)):
                if pred.chosen_index == inst.correct_index:
                    n_correct += 1
                else:
                    errors[pred.chosen_label] = errors.get(pred.chosen_label, 0) + 1
    return EvalResult(f1=n_correct / len(instances), per_label_error_counts=errors,
                      n_instances=len(instances), run_seed=run_seed,
                      dataset=instances[0].dataset)


@dataclass
class MultiRunResult:
    mean_f1: float
    std_f1: float                # population std over runs
    results: list                # per-run EvalResult on the test split
    checkpoints: list


def multi_run(cfg: TrainConfig, split: DatasetSplit, store: EmbeddingStore,
              parallel_runs: int = 1) -> MultiRunResult:
    """Train cfg.runs models with seeds seed+0..seed+runs-1 and aggregate
    their test F1.  Test instances are only touched here, after each
    training run returns."""
    cfg.validate()

    def one_run(r: int):
        run_cfg = replace(cfg, seed=cfg.seed + r)
        ckpt = train(split, store, run_cfg)
        res = evaluate(ckpt, split.test, store, run_seed=run_cfg.seed)
        return ckpt, res

    if parallel_runs > 1:
        with ThreadPoolExecutor(max_workers=parallel_runs) as pool:
            outcomes = list(pool.map(one_run, range(cfg.runs)))
    else:
        outcomes = [one_run(r) for r in range(cfg.runs)]

    checkpoints = [c for c, _ in outcomes]
    results = [r for _, r in outcomes]
    f1s = np.array([r.f1 for r in results])
    return MultiRunResult(mean_f1=float(f1s.mean()), std_f1=float(f1s.std()),
                          results=results, checkpoints=checkpoints)


def results_to_json(cfg: TrainConfig, agg: MultiRunResult) -> dict:
    """Stable-keyed results bundle (see README for the schema)."""
    return {
        "config": cfg.model_config() | {
            "epochs": cfg.epochs, "batch_size": cfg.batch_size,
            "runs": cfg.runs, "select": cfg.select,
        },
        "f1_mean": agg.mean_f1,
        "f1_std": agg.std_f1,
        "runs": [
            {
                "seed": res.run_seed,
                "f1": res.f1,
                "n_instances": res.n_instances,
                "dataset": res.dataset,
                "error_counts": res.per_label_error_counts,
                "best_epoch": ckpt.best_epoch,
                "best_dev_f1": ckpt.best_dev_f1,
                "curve": ckpt.curve,
            }
            for res, ckpt in zip(agg.results, agg.checkpoints)
        ],
    }
