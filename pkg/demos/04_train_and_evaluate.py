#!/usr/bin/env python3
"""Train the encoder-decoder and the FFNN baseline on synthetic data and
compare latent layouts.

Uses 15x15 embeddings (dim 225) so the whole script runs in about a minute;
the real 32x24 pipeline is identical up to shapes (see the CLI for that).
"""

from blmvae import SynthConfig, TrainConfig, evaluate, split_dataset, synth_generate, train

instances, store = synth_generate(
    SynthConfig(count=300, dim=225, noise=0.05), seed=1)
split = split_dataset(instances, seed=0)
print(f"{len(split.train)} train / {len(split.dev)} dev / {len(split.test)} test, "
      f"noise 0.05\n")

for model_kind, latent in (("baseline", "c5"), ("encdec", "c5"), ("encdec", "d1x2+c5")):
    cfg = TrainConfig(epochs=6, batch_size=50, lr=0.001, runs=1, seed=3,
                      model=model_kind, latent=latent, channels=4,
                      hidden=(256, 128), rows=15, cols=15)
    ckpt = train(split, store, cfg)
    res = evaluate(ckpt, split.test, store)
    name = model_kind if model_kind == "baseline" else f"{model_kind} {latent}"
    print(f"{name:16s} best dev F1 {ckpt.best_dev_f1:.3f} (epoch {ckpt.best_epoch})  "
          f"test F1 {res.f1:.3f}  errors {res.per_label_error_counts}")

print("\ntraining curve of the last run:")
for point in ckpt.curve:
    bar = "#" * int(40 * point["dev_f1"])
    print(f"  epoch {point['epoch']}: loss {point['train_loss']:7.3f}  "
          f"dev F1 {point['dev_f1']:.3f} {bar}")
