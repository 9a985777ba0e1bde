"""Training harness: config, the update/sample/optimize loop, metrics, splits.

Per mini-batch the loop embeds the inputs, folds each class slice into its
tracked distribution (first sight of a class uses the plain sample
estimates, later batches the conjugate update), samples triplet companions
from the refreshed distributions, and takes one SGD step on the configured
loss. Validation Recall@k runs once per epoch and drives early stopping; the
best-validation model is the one kept.
"""

from __future__ import annotations

import copy
import json
import os
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, EmbeddingBatch, balanced_batches, load_idx, synth_blobs
from .evaluation import EmbeddedSet, recall_at_k, retrieve_topk
from .linalg import DimensionMismatch
from .losses import nca_loss, triplet_loss
from .mlp import MlpModel, backward, forward, init_params, load_checkpoint, save_checkpoint, sgd_step
from .sampler import sample_triplets
from .tracker import BatchSlice, ClassState, CovMode, bayes_update, init_mle

DATA_DIR_ENV = "BAYESTRIPLET_DATA_DIR"
RECALL_KS = (1, 4, 8, 16)
CSV_HEADER = "epoch,batch,loss,r1,r4,r8,r16,seconds"
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

DATASETS = ("blobs", "mnist")
LOSSES = ("but", "bunca")
COV_MODES = {mode.value: mode for mode in CovMode}


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Everything the loop needs; file/CLI keys map one-to-one onto fields."""

    dataset: str = "blobs"
    loss: str = "but"
    cov_mode: str = "standard"
    embed_dim: int = 16
    hidden_dims: tuple[int, ...] = (64,)
    n_per_class: int = 5
    margin: float = 0.25
    lr: float = 1e-3
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    eps_scale: float = 1e-6
    accumulate_across_epochs: bool = True
    normalize_embeddings: bool = False
    data_dir: str | None = None
    out_dir: str = "runs"
    # blobs shaping
    blob_classes: int = 3
    blob_per_class: int = 200
    blob_dim: int = 10
    blob_spread: float = 1.0
    # stratified subset sizes, 0 means use everything
    train_limit: int = 0
    test_limit: int = 0

    def validate(self) -> None:
        checks = [
            (self.dataset in DATASETS, f"dataset must be one of {DATASETS}"),
            (self.loss in LOSSES, f"loss must be one of {LOSSES}"),
            (self.cov_mode in COV_MODES, f"cov_mode must be one of {tuple(COV_MODES)}"),
            (self.embed_dim >= 2, "embed_dim must be >= 2"),
            (all(h >= 1 for h in self.hidden_dims), "hidden dims must be positive"),
            (self.n_per_class >= 1, "n_per_class must be >= 1"),
            (self.margin >= 0, "margin must be >= 0"),
            (self.lr > 0, "lr must be positive"),
            (self.max_epochs >= 1, "max_epochs must be >= 1"),
            (self.patience >= 1, "patience must be >= 1"),
            (self.eps_scale > 0, "eps_scale must be positive"),
            (self.blob_classes >= 2, "blob_classes must be >= 2"),
            (self.blob_per_class >= 1, "blob_per_class must be >= 1"),
            (self.blob_dim >= 1, "blob_dim must be >= 1"),
            (self.blob_spread > 0, "blob_spread must be positive"),
            (self.train_limit >= 0, "train_limit must be >= 0"),
            (self.test_limit >= 0, "test_limit must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def resolved_data_dir(self) -> Path:
        return Path(self.data_dir or os.environ.get(DATA_DIR_ENV) or "data")


@dataclass
class MetricsRecord:
    epoch: int
    batch: int
    loss: float | None
    r1: float | None
    r4: float | None
    r8: float | None
    r16: float | None
    seconds: float

    def csv_row(self) -> str:
        def fmt(v):
            return "" if v is None else repr(float(v))

        cells = [str(self.epoch), str(self.batch)]
        cells += [fmt(v) for v in (self.loss, self.r1, self.r4, self.r8, self.r16)]
        cells.append(f"{self.seconds:.3f}")
        return ",".join(cells)


@dataclass
class TrainResult:
    model: MlpModel
    records: list[MetricsRecord]
    summary: dict
    out_dir: Path


def _rngs(cfg: TrainConfig) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(cfg.seed).spawn(4)
    names = ("data", "init", "batch", "sample")
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


def _stratified_parts(ds: Dataset, fractions: tuple[float, ...],
                      rng: np.random.Generator) -> list[Dataset]:
    """Split per class at the given fractions (last part takes the remainder)."""
    parts: list[list[np.ndarray]] = [[] for _ in fractions]
    for j in range(ds.num_classes):
        idx = rng.permutation(np.flatnonzero(ds.labels == j))
        start = 0
        for p, frac in enumerate(fractions):
            stop = len(idx) if p == len(fractions) - 1 else start + int(frac * len(idx))
            if stop <= start:
                raise ConfigError(f"class {j} too small to split at fractions {fractions}")
            parts[p].append(idx[start:stop])
            start = stop
    out = []
    for chunks in parts:
        sel = np.concatenate(chunks)
        out.append(Dataset(ds.inputs[sel], ds.labels[sel], ds.num_classes))
    return out


def _stratified_limit(ds: Dataset, limit: int, rng: np.random.Generator) -> Dataset:
    if limit <= 0 or limit >= len(ds):
        return ds
    if limit < ds.num_classes:
        raise ConfigError(f"limit {limit} is below the class count {ds.num_classes}")
    base, extra = divmod(limit, ds.num_classes)
    keep = []
    for j in range(ds.num_classes):
        idx = rng.permutation(np.flatnonzero(ds.labels == j))
        quota = base + (1 if j < extra else 0)
        keep.append(idx[:quota])
    sel = np.concatenate(keep)
    return Dataset(ds.inputs[sel], ds.labels[sel], ds.num_classes)


def load_splits(cfg: TrainConfig) -> dict[str, Dataset]:
    """Deterministic train/val/test datasets for the configured source.

    Blobs: one synthetic draw split 70/15/15 per class. MNIST-style IDX
    files: the training pair split 70/30 into train/val (after the optional
    stratified subset), the test pair used as-is for test.
    """
    rng = _rngs(cfg)["data"]
    if cfg.dataset == "blobs":
        ds = synth_blobs(cfg.blob_classes, cfg.blob_per_class, cfg.blob_dim,
                         cfg.blob_spread, rng)
        train, val, test = _stratified_parts(ds, (0.70, 0.15, 0.15), rng)
        return {"train": train, "val": val, "test": test}

    root = cfg.resolved_data_dir()
    trainval = load_idx(root / MNIST_FILES["train_images"], root / MNIST_FILES["train_labels"])
    trainval = _stratified_limit(trainval, cfg.train_limit, rng)
    train, val = _stratified_parts(trainval, (0.70, 0.30), rng)
    test = load_idx(root / MNIST_FILES["test_images"], root / MNIST_FILES["test_labels"])
    test = _stratified_limit(test, cfg.test_limit, rng)
    return {"train": train, "val": val, "test": test}


def _l2_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.maximum(np.sqrt((x**2).sum(axis=1, keepdims=True)), 1e-12)
    return x / norms, norms


def _l2_rows_backward(unit: np.ndarray, norms: np.ndarray, grad: np.ndarray) -> np.ndarray:
    inner = (unit * grad).sum(axis=1, keepdims=True)
    return (grad - unit * inner) / norms


def embed_dataset(model: MlpModel, ds: Dataset, normalize: bool) -> EmbeddedSet:
    emb, _ = forward(model, ds.inputs)
    if normalize:
        emb, _ = _l2_rows(emb)
    return EmbeddedSet(vectors=emb, labels=ds.labels)


def _validation_recall(model: MlpModel, ds: Dataset, normalize: bool) -> dict[int, float]:
    return recall_at_k(embed_dataset(model, ds, normalize), RECALL_KS)


def train(cfg: TrainConfig, out_dir: str | Path | None = None) -> TrainResult:
    """Run the full loop and write metrics.csv, summary.json, and best.ckpt.

    Returns the best-validation model (which is never worse on validation
    R@1 than any epoch that was evaluated, the untrained state included).
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rngs = _rngs(cfg)
    splits = load_splits(cfg)
    train_ds, val_ds = splits["train"], splits["val"]

    dims = (train_ds.inputs.shape[1], *cfg.hidden_dims, cfg.embed_dim)
    model = init_params(dims, rngs["init"])
    mode = COV_MODES[cfg.cov_mode]

    started = time.perf_counter()
    records: list[MetricsRecord] = []

    baseline = _validation_recall(model, val_ds, cfg.normalize_embeddings)
    records.append(MetricsRecord(0, 0, None, *[baseline[k] for k in RECALL_KS],
                                 time.perf_counter() - started))
    best_model = copy.deepcopy(model)
    best_r1, best_epoch = baseline[1], 0
    best_val = dict(baseline)
    epochs_without_improvement = 0

    trackers: dict[int, ClassState] = {}
    epochs_run = 0
    batches_per_epoch = 0
    final_val = dict(baseline)
    for epoch in range(1, cfg.max_epochs + 1):
        epochs_run = epoch
        if not cfg.accumulate_across_epochs:
            trackers = {}
        batches = balanced_batches(train_ds, cfg.n_per_class, rngs["batch"])
        batches_per_epoch = len(batches)
        epoch_losses = []
        for batch_idx, idx in enumerate(batches):
            inputs, labels = train_ds.inputs[idx], train_ds.labels[idx]
            emb, trace = forward(model, inputs)
            if cfg.normalize_embeddings:
                work, norms = _l2_rows(emb)
            else:
                work = emb
            for j in range(train_ds.num_classes):
                batch_slice = BatchSlice(j, work[labels == j])
                if j in trackers:
                    trackers[j] = bayes_update(trackers[j], batch_slice, mode)
                else:
                    trackers[j] = init_mle(batch_slice)
            batch_embeddings = EmbeddingBatch(work, labels, cfg.n_per_class)
            triplets = sample_triplets(batch_embeddings, trackers, rngs["sample"],
                                       cfg.eps_scale)
            if cfg.loss == "but":
                loss_out = triplet_loss(triplets, cfg.margin)
            else:
                loss_out = nca_loss(triplets)
            grad = loss_out.anchor_grads
            if cfg.normalize_embeddings:
                grad = _l2_rows_backward(work, norms, grad)
            model = sgd_step(model, backward(model, trace, grad), cfg.lr)
            epoch_losses.append(loss_out.value)
            records.append(MetricsRecord(epoch, batch_idx, loss_out.value,
                                         None, None, None, None,
                                         time.perf_counter() - started))
        val = _validation_recall(model, val_ds, cfg.normalize_embeddings)
        final_val = dict(val)
        records.append(MetricsRecord(epoch, len(batches), float(np.mean(epoch_losses)),
                                     *[val[k] for k in RECALL_KS],
                                     time.perf_counter() - started))
        if val[1] > best_r1:
            best_model = copy.deepcopy(model)
            best_r1, best_epoch, best_val = val[1], epoch, dict(val)
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= cfg.patience:
                break

    checkpoint_path = out / "best.ckpt"
    save_checkpoint(best_model, checkpoint_path)
    (out / "metrics.csv").write_text(
        "\n".join([CSV_HEADER] + [r.csv_row() for r in records]) + "\n"
    )
    summary = {
        "config": {**asdict(cfg), "hidden_dims": list(cfg.hidden_dims)},
        "epochs_run": epochs_run,
        "batches_per_epoch": batches_per_epoch,
        "baseline_val": {f"r{k}": baseline[k] for k in RECALL_KS},
        "best_epoch": best_epoch,
        "best_val": {f"r{k}": best_val[k] for k in RECALL_KS},
        "final_val": {f"r{k}": final_val[k] for k in RECALL_KS},
        "seconds": time.perf_counter() - started,
        "checkpoint": str(checkpoint_path),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return TrainResult(model=best_model, records=records, summary=summary, out_dir=out)


def evaluate(checkpoint_path, cfg: TrainConfig, split: str,
             ks: tuple[int, ...] = RECALL_KS) -> dict[int, float]:
    """Recall@k of a checkpointed model on one split of the configured data."""
    cfg.validate()
    model = load_checkpoint(checkpoint_path)
    splits = load_splits(cfg)
    if split not in splits:
        raise ConfigError(f"split must be one of {tuple(splits)}, got {split!r}")
    ds = splits[split]
    if ds.inputs.shape[1] != model.layer_dims[0]:
        raise DimensionMismatch(
            f"checkpoint expects {model.layer_dims[0]}-wide inputs, split has {ds.inputs.shape[1]}"
        )
    return recall_at_k(embed_dataset(model, ds, cfg.normalize_embeddings), ks)


def retrieve(checkpoint_path, cfg: TrainConfig, split: str, query_index: int,
             k: int = 10) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest neighbors of one embedded split instance: (indices, distances, labels)."""
    cfg.validate()
    model = load_checkpoint(checkpoint_path)
    splits = load_splits(cfg)
    if split not in splits:
        raise ConfigError(f"split must be one of {tuple(splits)}, got {split!r}")
    es = embed_dataset(model, splits[split], cfg.normalize_embeddings)
    if not 0 <= query_index < es.size:
        raise IndexError(f"query index {query_index} outside [0, {es.size})")
    indices = retrieve_topk(es, es.vectors[query_index], k)
    dists = np.sqrt(((es.vectors[indices] - es.vectors[query_index]) ** 2).sum(axis=1))
    return indices, dists, es.labels[indices]
