"""Latent-layer sampling, KL regularizers, and inference-time masking.

A latent layout mixes continuous Gaussian units with relaxed-categorical
blocks.  Layouts are written as spec strings: "c5" is 5 continuous units,
"d1x2+c5" adds one 2-class discrete variable (total length 7), "d2x2+c5"
two of them (total 9).

The discrete prior is the uniform categorical, so each block's KL is
sum_i pi_i * log(pi_i * K), bounded by log K.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, NumericError, ShapeError

_SPEC_GRAMMAR = 'latent spec grammar: terms joined by "+", each "c<units>" or ' \
                '"d<count>x<classes>", e.g. "c5", "d1x2+c5", "d2x2+c5"'


@dataclass
class LatentSpec:
    continuous_dim: int
    categories: tuple = ()
    tau: float = 0.5

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.continuous_dim < 0:
            raise ConfigError("continuous_dim must be >= 0")
        if any(k < 2 for k in self.categories):
            raise ConfigError("every discrete variable needs >= 2 classes")
        if self.continuous_dim == 0 and not self.categories:
            raise ConfigError("latent spec needs at least one unit")

    @property
    def total_dim(self) -> int:
        return self.continuous_dim + sum(self.categories)

    @property
    def head_dim(self) -> int:
        """Encoder head width: mu and log_sigma per unit, plus block logits."""
        return 2 * self.continuous_dim + sum(self.categories)

    def spec_string(self) -> str:
        parts = [f"d1x{k}" for k in self.categories]
        if self.continuous_dim:
            parts.append(f"c{self.continuous_dim}")
        return "+".join(parts)


def parse_latent_spec(spec: str, tau: float = 0.5) -> LatentSpec:
    """Parse a latent spec string; raises ConfigError citing the grammar."""
    continuous = 0
    categories = []
    for term in spec.strip().split("+"):
        m = re.fullmatch(r"c(\d+)", term)
        if m:
            continuous += int(m.group(1))
            continue
        m = re.fullmatch(r"d(\d+)x(\d+)", term)
        if m:
            count, classes = int(m.group(1)), int(m.group(2))
            if count < 1:
                raise ConfigError(f"bad term {term!r}; {_SPEC_GRAMMAR}")
            categories.extend([classes] * count)
            continue
        raise ConfigError(f"bad term {term!r}; {_SPEC_GRAMMAR}")
    return LatentSpec(continuous_dim=continuous, categories=tuple(categories), tau=tau)


# ---------------------------------------------------------------------------
# Sampling primitives (differentiable; operate on the last axis)


def _check_finite(name: str, *arrays) -> None:
    for a in arrays:
        if not np.isfinite(np.asarray(a if not isinstance(a, Tensor) else a.data)).all():
            raise NumericError(f"non-finite values in {name}")


def gaussian_sample(mu: Tensor, log_sigma: Tensor, noise) -> Tensor:
    """Reparameterized draw z = mu + exp(log_sigma) * noise."""
    mu, log_sigma = ad._ensure(mu), ad._ensure(log_sigma)
    if mu.data.shape != log_sigma.data.shape:
        raise ShapeError(f"mu {mu.data.shape} and log_sigma {log_sigma.data.shape} differ")
    _check_finite("gaussian_sample inputs", mu, log_sigma, noise)
    noise = np.asarray(noise if not isinstance(noise, Tensor) else noise.data)
    return mu + ad.exp(log_sigma) * noise


def kl_gaussian(mu: Tensor, log_sigma: Tensor) -> Tensor:
    """KL(N(mu, sigma) || N(0, 1)) summed over the last axis.

    Closed form 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2).
    """
    mu, log_sigma = ad._ensure(mu), ad._ensure(log_sigma)
    _check_finite("kl_gaussian inputs", mu, log_sigma)
    var = ad.exp(log_sigma * 2.0)
    return (mu * mu + var - 1.0 - log_sigma * 2.0).sum(axis=-1) * 0.5


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard Gumbel(0,1) draws g = -log(-log(u))."""
    u = rng.random(shape)
    tiny = np.finfo(float).tiny
    return -np.log(-np.log(np.maximum(u, tiny)) + tiny)


def gumbel_softmax_sample(logits: Tensor, tau: float, gumbel: np.ndarray) -> Tensor:
    """Relaxed categorical sample softmax((g + logits)/tau) over the last axis.

    Adding the same constant to all logits cancels, so unnormalized logits
    and log-probabilities give identical samples.  Low tau sharpens toward
    one-hot(argmax(g + logits)); high tau flattens toward uniform.
    """
    if tau <= 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    logits = ad._ensure(logits)
    _check_finite("gumbel_softmax_sample inputs", logits, gumbel)
    gumbel = np.asarray(gumbel if not isinstance(gumbel, Tensor) else gumbel.data)
    return ad.softmax((logits + gumbel) * (1.0 / tau), axis=-1)


def kl_categorical_uniform(probs) -> float:
    """KL(pi || uniform) = sum pi_i log(pi_i K) for one probability vector.

    0 * log 0 counts as 0; the result lies in [0, log K].
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1:
        raise ShapeError(f"expected a probability vector, got shape {p.shape}")
    _check_finite("kl_categorical_uniform inputs", p)
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-6:
        raise ConfigError(f"not a probability vector (sum={p.sum():.8f})")
    k = p.size
    pos = p > 0
    return float(np.sum(p[pos] * np.log(p[pos] * k)))


def _kl_categorical_uniform_graph(probs: Tensor) -> Tensor:
    """Differentiable block KL over the last axis; probs must be positive."""
    k = probs.data.shape[-1]
    return (probs * (ad.log(probs) + float(np.log(k)))).sum(axis=-1)


# ---------------------------------------------------------------------------
# Joint code


@dataclass
class LatentCode:
    """One sampled latent vector, batch-shaped, with its KL contributions."""

    spec: LatentSpec
    z: Tensor | None       # (B, continuous_dim) or None
    c: Tensor | None       # (B, sum(categories)) or None
    kl_continuous: Tensor  # (B,)
    kl_discrete: Tensor    # (B,)

    def vector(self) -> Tensor:
        """Concatenated [z; c], the decoder input of length spec.total_dim."""
        parts = [t for t in (self.z, self.c) if t is not None]
        return parts[0] if len(parts) == 1 else ad.concat(parts, axis=-1)

    @property
    def batch(self) -> int:
        ref = self.z if self.z is not None else self.c
        return ref.data.shape[0]


def joint_sample(encoder_output: Tensor, spec: LatentSpec, rng=None,
                 deterministic: bool = False) -> LatentCode:
    """Sample a LatentCode from encoder head output.

    The head layout is [mu | log_sigma | block logits...].  Continuous and
    discrete parts factorize, so the code's KL is the sum of the Gaussian
    KL and the per-block categorical KLs.  With deterministic=True the
    noise is zero: z = mu and each block is softmax(logits / tau).
    """
    enc = ad._ensure(encoder_output)
    if enc.data.ndim == 1:
        enc = enc.reshape(1, -1)
    batch, width = enc.data.shape
    if width != spec.head_dim:
        raise ShapeError(f"encoder head width {width} != spec head width {spec.head_dim}"
                         f" for {spec.spec_string()!r}")
    if rng is None and not deterministic:
        raise ConfigError("joint_sample needs an rng unless deterministic=True")

    cd = spec.continuous_dim
    zeros = Tensor(np.zeros(batch, dtype=enc.data.dtype))
    z = None
    klc = zeros
    if cd > 0:
        mu = enc[:, :cd]
        log_sigma = enc[:, cd:2 * cd]
        noise = (np.zeros((batch, cd), dtype=enc.data.dtype) if deterministic
                 else rng.standard_normal((batch, cd)).astype(enc.data.dtype))
        z = gaussian_sample(mu, log_sigma, noise)
        klc = kl_gaussian(mu, log_sigma)

    blocks = []
    kld = zeros
    offset = 2 * cd
    for k in spec.categories:
        logits = enc[:, offset:offset + k]
        offset += k
        g = (np.zeros((batch, k), dtype=enc.data.dtype) if deterministic
             else gumbel_noise(rng, (batch, k)).astype(enc.data.dtype))
        blocks.append(gumbel_softmax_sample(logits, spec.tau, g))
        kld = kld + _kl_categorical_uniform_graph(ad.softmax(logits, axis=-1))
    c = None
    if blocks:
        c = blocks[0] if len(blocks) == 1 else ad.concat(blocks, axis=-1)

    return LatentCode(spec=spec, z=z, c=c, kl_continuous=klc, kl_discrete=kld)


def mask_latent(code: LatentCode, target) -> LatentCode:
    """Zero one latent component: ("continuous_unit", k) or ("discrete_block", j).

    Returns a new code whose other entries are bit-identical; KL fields are
    untouched (masking is an inference-time intervention, not a change of
    posterior).  Masking the same target twice is a no-op the second time.
    """
    kind, index = target
    spec = code.spec
    if kind == "continuous_unit":
        if not 0 <= index < spec.continuous_dim:
            raise IndexError(f"continuous unit {index} out of range "
                             f"[0, {spec.continuous_dim})")
        z = np.array(code.z.data)
        z[..., index] = 0.0
        return LatentCode(spec=spec, z=Tensor(z), c=_copy_opt(code.c),
                          kl_continuous=code.kl_continuous, kl_discrete=code.kl_discrete)
    if kind == "discrete_block":
        if not 0 <= index < len(spec.categories):
            raise IndexError(f"discrete block {index} out of range "
                             f"[0, {len(spec.categories)})")
        start = sum(spec.categories[:index])
        stop = start + spec.categories[index]
        c = np.array(code.c.data)
        c[..., start:stop] = 0.0
        return LatentCode(spec=spec, z=_copy_opt(code.z), c=Tensor(c),
                          kl_continuous=code.kl_continuous, kl_discrete=code.kl_discrete)
    raise ConfigError(f"unknown mask target kind {kind!r}")


def _copy_opt(t: Tensor | None) -> Tensor | None:
    return None if t is None else Tensor(np.array(t.data))
