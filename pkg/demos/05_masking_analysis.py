#!/usr/bin/env python3
"""Show that latent masking localizes information: plant a binary factor in
the data, train a joint model, and watch the discrete block carry it.

Half the instances can only be solved by reading a hidden binary factor
from the context (their answer set contains a foil that differs from the
correct answer only in that factor).  After training, masking the discrete
block destroys those predictions (low kappa against the base run) while
masking any single continuous unit barely moves them.
"""

import tempfile
from pathlib import Path

from blmvae import SynthConfig, TrainConfig, split_dataset, synth_generate, train
from blmvae.analysis import emit_report, kappa_matrix, masking_analysis

instances, store = synth_generate(
    SynthConfig(count=600, dim=768, noise=0.01, planted_factor=True), seed=11)
split = split_dataset(instances, seed=0)

cfg = TrainConfig(epochs=8, batch_size=100, lr=0.001, runs=1, seed=7,
                  model="encdec", latent="d1x2+c5")
print("training joint model (d1x2+c5) on planted-factor data...")
ckpt = train(split, store, cfg)
print(f"best dev F1 {ckpt.best_dev_f1:.3f} at epoch {ckpt.best_epoch}\n")

runs = masking_analysis(ckpt, split.test, store)
km = kappa_matrix(runs)
base = km.variants.index("base")
print("agreement with the unmasked run (Cohen's kappa):")
for variant, k in zip(km.variants, km.kappa[base]):
    if variant != "base":
        bar = "#" * max(0, int(30 * k))
        print(f"  {variant:20s} {k:+.3f} {bar}")

out = Path(tempfile.mkdtemp(prefix="blmvae-masking-"))
written = emit_report(out, kappa=km)
print(f"\nwrote {', '.join(p.name for p in written)} to {out}")
