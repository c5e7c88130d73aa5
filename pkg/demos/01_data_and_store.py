#!/usr/bin/env python3
"""Walk through the data layer: synthetic instances, JSONL files, and the
binary embedding store.

Synthetic instances have a known ground truth: every context sentence is
base + position_signature(i) (+ noise), the correct answer is exactly
base + position_signature(8), and each wrong answer adds a fixed unit
direction per error label.  That makes them a self-contained oracle for
the whole pipeline.
"""

import tempfile
from pathlib import Path

from blmvae import (Shape2D, SynthConfig, load_dataset, read_store,
                    reshape_2d, save_dataset, split_dataset, synth_generate,
                    write_store)

work = Path(tempfile.mkdtemp(prefix="blmvae-demo-"))
print(f"working in {work}\n")

# -- generate a small synthetic dataset -------------------------------------
cfg = SynthConfig(count=100, dim=768, noise=0.01, dataset="agreement_fr")
instances, store = synth_generate(cfg, seed=42)
print(f"generated {len(instances)} instances, store holds {store.count} vectors "
      f"of dim {store.dim}")

inst = instances[0]
print(f"instance {inst.id}: {len(inst.context)} context sentences, "
      f"{len(inst.answers)} answers, correct at index {inst.correct_index}")
print("answer labels:", [lab for _, lab in inst.answers])

# -- JSONL roundtrip ---------------------------------------------------------
data_path = work / "data.jsonl"
save_dataset(instances, data_path)
reloaded = load_dataset(data_path, "agreement_fr")
assert [i.id for i in reloaded] == [i.id for i in instances]
print(f"\nJSONL roundtrip OK ({data_path.stat().st_size} bytes)")

# -- binary store roundtrip --------------------------------------------------
store_path = work / "embeddings.emb"
write_store(store, store_path)
back = read_store(store_path)
assert back.vectors.tobytes() == store.vectors.tobytes()
print(f"store roundtrip bit-exact ({store_path.stat().st_size} bytes + sidecar)")

# -- the 2D view of a sentence embedding ------------------------------------
vec = store.vector(inst.context[0].id)
mat = reshape_2d(vec, Shape2D(32, 24))
assert (mat.reshape(-1) == vec).all()
print(f"\nrow-major reshape: 768 -> {mat.shape}; element 24 sits at (1, 0): "
      f"{mat[1, 0] == vec[24]}")

# -- 90:10 split with dev from the train pool --------------------------------
split = split_dataset(instances, seed=0)
print(f"\nsplit of 100: train {len(split.train)}, dev {len(split.dev)}, "
      f"test {len(split.test)}")
