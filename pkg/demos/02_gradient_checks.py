#!/usr/bin/env python3
"""Verify every layer's analytic gradients against central finite differences.

The same oracle gates training in the test suite; this script shows it on
each building block and on the composed encoder-decoder loss.
"""

import numpy as np

from blmvae import Tensor, grad_check
from blmvae.data import SynthConfig, synth_generate
from blmvae.latent import gaussian_sample, gumbel_noise, gumbel_softmax_sample, parse_latent_spec
from blmvae.layers import LayerParams, conv2d_forward, conv3d_forward, linear_forward
from blmvae.model import (EncoderDecoder, EncoderDecoderConfig, make_batch,
                          model_param_tensors, total_loss)
from blmvae.store import Shape2D

rng = np.random.default_rng(0)

# -- linear ------------------------------------------------------------------
x = rng.standard_normal((3, 6))
cot = rng.standard_normal((3, 4))

def f_linear(pt):
    w, b = pt[:24].reshape(6, 4), pt[24:]
    return (linear_forward(Tensor(x), LayerParams("linear", w, b)) * cot).sum()

err = grad_check(f_linear, Tensor(rng.standard_normal(28)))
print(f"linear  (W, b)          max rel err {err:.2e}")

# -- conv3d at the encoder's working shape ------------------------------------
x3 = rng.standard_normal((1, 1, 7, 32, 24))
cot3 = rng.standard_normal((1, 1, 5, 18, 10))

def f_conv3d(pt):
    w, b = pt[:675].reshape(1, 1, 3, 15, 15), pt[675:]
    return (conv3d_forward(Tensor(x3), LayerParams("conv3d", w, b)) * cot3).sum()

err = grad_check(f_conv3d, Tensor(rng.standard_normal(676)))
print(f"conv3d  3x15x15 kernel  max rel err {err:.2e}")

# -- conv2d at the decoder's working shape ------------------------------------
x2 = rng.standard_normal((1, 1, 46, 38))
cot2 = rng.standard_normal((1, 1, 32, 24))

def f_conv2d(pt):
    xx = pt[:1748].reshape(1, 1, 46, 38)
    w, b = pt[1748:1973].reshape(1, 1, 15, 15), pt[1973:]
    return (conv2d_forward(xx, LayerParams("conv2d", w, b)) * cot2).sum()

point = np.concatenate([x2.reshape(-1), rng.standard_normal(226)])
err = grad_check(f_conv2d, Tensor(point))
print(f"conv2d  15x15 kernel    max rel err {err:.2e} (input + kernel + bias)")

# -- sampling primitives -------------------------------------------------------
noise = rng.standard_normal(6)
cot_g = rng.standard_normal(6)
err = grad_check(lambda pt: (gaussian_sample(pt[:6], pt[6:], noise) * cot_g).sum(),
                 Tensor(rng.standard_normal(12) * 0.5))
print(f"gaussian reparam        max rel err {err:.2e}")

g = gumbel_noise(rng, 5)
cot_s = rng.standard_normal(5)
err = grad_check(lambda pt: (gumbel_softmax_sample(pt, 0.7, g) * cot_s).sum(),
                 Tensor(rng.standard_normal(5)))
print(f"gumbel-softmax          max rel err {err:.2e}")

# -- the whole loss, differentiated through every layer ------------------------
spec = parse_latent_spec("d1x2+c5", tau=0.7)
model = EncoderDecoder(EncoderDecoderConfig(latent=spec, shape=Shape2D(15, 15),
                                            conv_channels=2),
                       np.random.default_rng(3))
for t in model_param_tensors(model):
    t.data = t.data.astype(np.float64)
instances, store = synth_generate(SynthConfig(count=2, dim=225, noise=0.01), seed=4)
batch = make_batch(instances[:1], store, Shape2D(15, 15))
answers = batch.answers.astype(np.float64)

def f_total(pt):
    b = type(batch)(context=pt.reshape(1, 7, 15, 15), answers=answers,
                    labels=batch.labels, correct_idx=batch.correct_idx, ids=batch.ids)
    loss, _ = total_loss(model, b, deterministic=True)
    return loss

err = grad_check(f_total, Tensor(batch.context.astype(np.float64).reshape(-1)))
print(f"total loss end-to-end   max rel err {err:.2e}")
