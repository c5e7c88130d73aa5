"""Answer-prediction models: FFNN baseline and the VAE-style encoder-decoder.

Both map a stack of 7 two-dimensional sentence embeddings to one predicted
answer embedding; candidates are ranked by cosine and trained with a
max-margin loss that pushes the correct answer's score above every
erroneous one by a margin of 1.  The encoder-decoder adds a sampled latent
bottleneck whose KL terms join the loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DataError, NumericError, ShapeError
from .latent import LatentCode, LatentSpec, joint_sample
from .layers import (LayerParams, conv2d_forward, conv3d_forward, conv_init,
                     linear_forward, linear_init, param_tensors)
from .store import EmbeddingStore, Shape2D


# ---------------------------------------------------------------------------
# Scoring and loss


def score(a, b) -> float:
    """Cosine of the angle between two vectors, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"score expects equal-length vectors, got {a.shape} / {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise NumericError("cosine score undefined for a zero-norm vector")
    return float(a @ b / (na * nb))


def max_margin_loss(pred, correct, errors_set) -> float:
    """sum_i [1 - score(correct, pred) + score(err_i, pred)]^+ over erroneous answers."""
    if len(errors_set) == 0:
        raise DataError("max_margin_loss needs a non-empty errors_set")
    s_c = score(correct, pred)
    return float(sum(max(0.0, 1.0 - s_c + score(e, pred)) for e in errors_set))


def cosine_scores_np(pred: np.ndarray, answers: np.ndarray) -> np.ndarray:
    """Batched cosine: pred (B, D) against answers (B, A, D) -> (B, A)."""
    pn = np.linalg.norm(pred, axis=-1)
    an = np.linalg.norm(answers, axis=-1)
    if (pn == 0).any() or (an == 0).any():
        raise NumericError("cosine score undefined for a zero-norm vector")
    dots = np.einsum("bd,bad->ba", pred, answers)
    return dots / (pn[:, None] * an)


def cosine_scores(pred: Tensor, answers: np.ndarray) -> Tensor:
    """Differentiable batched cosine of predictions against constant answers."""
    batch, dim = pred.data.shape
    an = np.linalg.norm(answers, axis=-1)
    if (an == 0).any():
        raise NumericError("cosine score undefined for a zero-norm answer")
    pnorm = ad.sqrt((pred * pred).sum(axis=-1, keepdims=True))
    if (pnorm.data == 0).any():
        raise NumericError("cosine score undefined for a zero-norm prediction")
    dots = (pred.reshape(batch, 1, dim) * answers).sum(axis=-1)
    return dots / (pnorm * an)


def hinge_loss_from_scores(scores: Tensor, correct_idx: np.ndarray) -> Tensor:
    """Per-instance max-margin loss (B,) from cosine scores (B, A)."""
    batch, n_answers = scores.data.shape
    if n_answers < 2:
        raise DataError("max-margin loss needs at least one erroneous answer")
    onehot = np.zeros((batch, n_answers), dtype=scores.data.dtype)
    onehot[np.arange(batch), correct_idx] = 1.0
    s_c = (scores * onehot).sum(axis=-1, keepdims=True)
    terms = ad.relu(scores - s_c + 1.0) * (1.0 - onehot)
    return terms.sum(axis=-1)


# ---------------------------------------------------------------------------
# Batches


@dataclass
class Batch:
    """Instances resolved against a store, stacked for vectorized passes."""

    context: np.ndarray        # (B, S, rows, cols) float32
    answers: np.ndarray        # (B, A, dim) float32
    labels: list               # B lists of A label strings
    correct_idx: np.ndarray    # (B,) int
    ids: list

    @property
    def size(self) -> int:
        return self.context.shape[0]


def make_batch(instances, store: EmbeddingStore, shape: Shape2D) -> Batch:
    """Stack instances with a uniform answer count into one Batch."""
    counts = {len(inst.answers) for inst in instances}
    if len(counts) != 1:
        raise DataError(f"batch mixes answer counts {sorted(counts)}")
    ctx = np.empty((len(instances), len(instances[0].context), shape.rows, shape.cols),
                   dtype=np.float32)
    ans = np.empty((len(instances), counts.pop(), shape.dim), dtype=np.float32)
    labels, correct, ids = [], [], []
    for i, inst in enumerate(instances):
        for j, s in enumerate(inst.context):
            ctx[i, j] = store.vector(s.id).reshape(shape.rows, shape.cols)
        for j, (s, _) in enumerate(inst.answers):
            ans[i, j] = store.vector(s.id)
        labels.append([lab for _, lab in inst.answers])
        correct.append(inst.correct_index)
        ids.append(inst.id)
    return Batch(context=ctx, answers=ans, labels=labels,
                 correct_idx=np.asarray(correct), ids=ids)


def group_by_answer_count(instances) -> list:
    groups: dict[int, list] = {}
    for inst in instances:
        groups.setdefault(len(inst.answers), []).append(inst)
    return [groups[k] for k in sorted(groups)]


# ---------------------------------------------------------------------------
# FFNN baseline


@dataclass
class BaselineConfig:
    shape: Shape2D = field(default_factory=Shape2D)
    seq_len: int = 7
    hidden: tuple = (5376, 1024)

    def __post_init__(self):
        if len(self.hidden) != 2:
            raise ConfigError("baseline takes exactly two hidden sizes (three layers)")

    @property
    def input_dim(self) -> int:
        return self.seq_len * self.shape.dim


class BaselineModel:
    """Three linear layers with ReLU between, flattened context in, one
    embedding out."""

    kind = "baseline"

    def __init__(self, cfg: BaselineConfig, rng: np.random.Generator):
        self.cfg = cfg
        h1, h2 = cfg.hidden
        self.fc1 = linear_init(cfg.input_dim, h1, rng, "fc1")
        self.fc2 = linear_init(h1, h2, rng, "fc2")
        self.fc3 = linear_init(h2, cfg.shape.dim, rng, "fc3")

    @property
    def params(self) -> list[LayerParams]:
        return [self.fc1, self.fc2, self.fc3]

    def forward(self, context: Tensor, rng=None, deterministic: bool = True):
        batch = context.data.shape[0]
        x = context.reshape(batch, self.cfg.input_dim)
        x = ad.relu(linear_forward(x, self.fc1))
        x = ad.relu(linear_forward(x, self.fc2))
        pred = linear_forward(x, self.fc3)
        return pred, None


# ---------------------------------------------------------------------------
# Encoder-decoder


@dataclass
class EncoderDecoderConfig:
    latent: LatentSpec
    shape: Shape2D = field(default_factory=Shape2D)
    seq_len: int = 7
    conv_channels: int = 16
    kernel3d: tuple = (3, 15, 15)
    kernel2d: tuple = (15, 15)
    beta: float = 1.0

    @property
    def conv_out_spatial(self) -> tuple:
        kd, kh, kw = self.kernel3d
        return (self.seq_len - kd + 1, self.shape.rows - kh + 1, self.shape.cols - kw + 1)

    @property
    def decoder_preshape(self) -> tuple:
        # Sized so the valid 2D conv lands back on the embedding shape
        # (46x38 -> 32x24 for the default kernel).
        return (self.shape.rows + self.kernel2d[0] - 1,
                self.shape.cols + self.kernel2d[1] - 1)

    def validate(self) -> None:
        if any(o < 1 for o in self.conv_out_spatial):
            raise ConfigError(
                f"kernel {self.kernel3d} does not fit input "
                f"{(self.seq_len, self.shape.rows, self.shape.cols)}")


class EncoderDecoder:
    """conv3d encoder -> sampled latent -> linear+conv2d decoder."""

    kind = "encdec"

    def __init__(self, cfg: EncoderDecoderConfig, rng: np.random.Generator):
        cfg.validate()
        self.cfg = cfg
        flat = cfg.conv_channels * int(np.prod(cfg.conv_out_spatial))
        pre_h, pre_w = cfg.decoder_preshape
        self.enc_conv = conv_init("conv3d", 1, cfg.conv_channels, cfg.kernel3d, rng, "enc_conv")
        self.enc_fc = linear_init(flat, cfg.latent.head_dim, rng, "enc_fc")
        self.dec_fc = linear_init(cfg.latent.total_dim, pre_h * pre_w, rng, "dec_fc")
        self.dec_conv = conv_init("conv2d", 1, 1, cfg.kernel2d, rng, "dec_conv")

    @property
    def params(self) -> list[LayerParams]:
        return [self.enc_conv, self.enc_fc, self.dec_fc, self.dec_conv]

    def encode(self, context: Tensor, rng=None, deterministic: bool = False) -> LatentCode:
        """(B, S, rows, cols) -> LatentCode via conv3d, ReLU, linear head."""
        batch = context.data.shape[0]
        s, rows, cols = self.cfg.seq_len, self.cfg.shape.rows, self.cfg.shape.cols
        if context.data.shape[1:] != (s, rows, cols):
            raise ShapeError(f"context shape {context.data.shape[1:]} != {(s, rows, cols)}")
        x = context.reshape(batch, 1, s, rows, cols)
        x = ad.relu(conv3d_forward(x, self.enc_conv))
        x = x.reshape(batch, -1)
        head = linear_forward(x, self.enc_fc)
        return joint_sample(head, self.cfg.latent, rng=rng, deterministic=deterministic)

    def decode(self, code: LatentCode) -> Tensor:
        """LatentCode -> (B, dim) predicted answer embedding."""
        vec = code.vector()
        batch = vec.data.shape[0]
        pre_h, pre_w = self.cfg.decoder_preshape
        x = ad.relu(linear_forward(vec, self.dec_fc))
        x = x.reshape(batch, 1, pre_h, pre_w)
        x = conv2d_forward(x, self.dec_conv)
        return x.reshape(batch, self.cfg.shape.dim)

    def forward(self, context: Tensor, rng=None, deterministic: bool = False):
        code = self.encode(context, rng=rng, deterministic=deterministic)
        return self.decode(code), code


# ---------------------------------------------------------------------------
# Loss and prediction


def total_loss(model, batch: Batch, rng=None, deterministic: bool = False):
    """Mean batch loss and its components.

    For the encoder-decoder this is mean(loss_a) + beta * (mean KLc + mean
    KLd); the baseline has no KL terms.  Raises NumericError with the
    component breakdown if anything is non-finite.

    batch.context may be a Tensor, in which case gradients flow back to it
    (used by the end-to-end gradient checks).
    """
    context = batch.context if isinstance(batch.context, Tensor) \
        else Tensor(batch.context)
    pred, code = model.forward(context, rng=rng, deterministic=deterministic)
    scores = cosine_scores(pred, batch.answers)
    loss_a = hinge_loss_from_scores(scores, batch.correct_idx).mean()
    if code is not None:
        beta = model.cfg.beta
        klc = code.kl_continuous.mean()
        kld = code.kl_discrete.mean()
        total = loss_a + beta * (klc + kld)
    else:
        klc = kld = Tensor(np.zeros(()))
        total = loss_a
    components = {
        "loss_a": float(loss_a.data),
        "kl_continuous": float(klc.data),
        "kl_discrete": float(kld.data),
        "total": float(total.data),
    }
    if not np.isfinite(total.data):
        raise NumericError(f"non-finite loss: {components}")
    return total, components


@dataclass
class Prediction:
    predicted_embedding: np.ndarray
    scores: np.ndarray
    chosen_index: int
    chosen_label: str


def predict(model, batch: Batch) -> list[Prediction]:
    """Deterministic inference: z = mu, discrete = softmax at tau, argmax
    cosine with ties broken toward the lowest index."""
    context = Tensor(batch.context)
    pred, _ = model.forward(context, deterministic=True)
    scores = cosine_scores_np(pred.data, batch.answers)
    chosen = scores.argmax(axis=1)  # np.argmax takes the first of tied maxima
    return [
        Prediction(predicted_embedding=pred.data[i].copy(), scores=scores[i],
                   chosen_index=int(chosen[i]), chosen_label=batch.labels[i][chosen[i]])
        for i in range(batch.size)
    ]


def model_param_tensors(model) -> list[Tensor]:
    return param_tensors(model.params)
