"""Dataset loading, splitting, and the synthetic generator."""

import json

import numpy as np
import pytest

from blmvae.data import (AGREEMENT_LABELS, BLMInstance, SynthConfig,
                         load_dataset, save_dataset, split_dataset,
                         synth_generate)
from blmvae.errors import ConfigError, DataError
from blmvae.store import write_store


def record(iid="x1", n_context=7, labels=AGREEMENT_LABELS, dataset="agreement_fr"):
    return {
        "id": iid,
        "dataset": dataset,
        "type": "I",
        "context": [f"sentence {i}" for i in range(n_context)],
        "answers": [{"text": f"answer {lab}", "label": lab} for lab in labels],
    }


def write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


class TestLoadDataset:
    def test_minimal_valid_file(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [record()])
        out = load_dataset(path, "agreement_fr")
        assert len(out) == 1
        inst = out[0]
        assert inst.id == "x1"
        assert len(inst.context) == 7
        assert inst.answers[inst.correct_index][1] == "Correct"

    def test_order_preserved_and_counts(self, tmp_path):
        # Type I agreement scale: 2304 instances in one file.
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [record(iid=f"i{k}") for k in range(2304)])
        out = load_dataset(path, "agreement_fr")
        assert len(out) == 2304
        assert [inst.id for inst in out[:3]] == ["i0", "i1", "i2"]

    def test_context_length_violation(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [record(iid="bad", n_context=6)])
        with pytest.raises(DataError, match="context length 6"):
            load_dataset(path, "agreement_fr")

    def test_malformed_json_names_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(record()) + "\n{oops\n", encoding="utf-8")
        with pytest.raises(DataError, match=":2:"):
            load_dataset(path, "agreement_fr")

    def test_missing_correct_names_instance(self, tmp_path):
        rec = record(iid="nocorrect")
        rec["answers"] = [a for a in rec["answers"] if a["label"] != "Correct"]
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [rec])
        with pytest.raises(DataError, match="nocorrect"):
            load_dataset(path, "agreement_fr")

    def test_label_closure(self, tmp_path):
        rec = record(iid="badlabel")
        rec["answers"][1]["label"] = "SSM"  # an alternation label
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [rec])
        with pytest.raises(DataError, match="SSM"):
            load_dataset(path, "agreement_fr")

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [record(iid="dup"), record(iid="dup")])
        with pytest.raises(DataError, match="dup"):
            load_dataset(path, "agreement_fr")

    def test_jsonl_roundtrip(self, tmp_path):
        instances, _ = synth_generate(SynthConfig(count=12, dim=16), seed=3)
        path = tmp_path / "d.jsonl"
        save_dataset(instances, path)
        reloaded = load_dataset(path, "agreement_fr")
        assert [i.id for i in reloaded] == [i.id for i in instances]
        assert all(a.id for a, _ in reloaded[0].answers)
        assert reloaded[5].correct_index == instances[5].correct_index
        texts = [s.text for s in reloaded[5].context]
        assert texts == [s.text for s in instances[5].context]


class TestSplitDataset:
    def make(self, n):
        instances, _ = synth_generate(SynthConfig(count=n, dim=8), seed=1)
        return instances

    def test_100_instances(self):
        split = split_dataset(self.make(100), seed=0)
        assert (len(split.train), len(split.dev), len(split.test)) == (72, 18, 10)

    def test_2304_instances_rounding(self):
        split = split_dataset(self.make(2304), seed=0)
        assert len(split.test) == 230
        assert len(split.dev) == 415
        assert len(split.train) == 1659
        # brute-force the stated rounding rule
        n_test = int(np.floor(0.10 * 2304 + 0.5))
        n_dev = int(np.floor(0.20 * (2304 - n_test) + 0.5))
        assert (n_test, n_dev) == (230, 415)

    def test_determinism(self):
        instances = self.make(50)
        a = split_dataset(instances, seed=9)
        b = split_dataset(instances, seed=9)
        assert [i.id for i in a.train] == [i.id for i in b.train]
        assert [i.id for i in a.test] == [i.id for i in b.test]

    def test_partition_property(self):
        instances = self.make(83)
        all_ids = {i.id for i in instances}
        for seed in range(5):
            s = split_dataset(instances, seed=seed)
            train, dev, test = ({i.id for i in part} for part in (s.train, s.dev, s.test))
            assert train | dev | test == all_ids
            assert not (train & dev or train & test or dev & test)

    def test_too_small(self):
        with pytest.raises(DataError, match="too small"):
            split_dataset(self.make(9), seed=0)


class TestSynthGenerate:
    def test_zero_noise_correct_is_exact(self):
        cfg = SynthConfig(count=10, dim=32, noise=0.0)
        instances, store = synth_generate(cfg, seed=4)
        assert len(instances) == 10
        # reconstruct base + signature(8) from the generator's own draws
        rng = np.random.default_rng(4)
        sig = rng.standard_normal((8, 32))
        sig /= np.linalg.norm(sig, axis=1, keepdims=True)
        # skip past error-direction/factor/attr draws: 5 + 1 + 5 rows
        rng.standard_normal((5, 32))
        rng.standard_normal((1, 32))
        rng.standard_normal((5, 32))
        base = rng.standard_normal((1, 32))
        base /= np.linalg.norm(base)
        inst = instances[0]
        correct_id = inst.answers[inst.correct_index][0].id
        np.testing.assert_array_equal(
            store.vector(correct_id),
            (base[0] + sig[7]).astype(np.float32))

    def test_zero_noise_separability(self):
        cfg = SynthConfig(count=20, dim=24, noise=0.0)
        instances, store = synth_generate(cfg, seed=0)
        for inst in instances:
            correct_vec = store.vector(inst.answers[inst.correct_index][0].id)
            dists = [np.linalg.norm(store.vector(s.id) - correct_vec)
                     for s, _ in inst.answers]
            zero_hits = [j for j, d in enumerate(dists) if d == 0.0]
            assert zero_hits == [inst.correct_index]

    def test_determinism_byte_identical(self, tmp_path):
        cfg = SynthConfig(count=50, dim=64, noise=0.01)
        for name in ("a", "b"):
            _, store = synth_generate(cfg, seed=123)
            write_store(store, tmp_path / f"{name}.emb")
        assert (tmp_path / "a.emb").read_bytes() == (tmp_path / "b.emb").read_bytes()

    def test_nearest_direction_label_recovery(self):
        # brute-force nearest-direction check over all generated answers
        cfg = SynthConfig(count=200, dim=96, noise=0.01)
        instances, store = synth_generate(cfg, seed=8)
        rng = np.random.default_rng(8)
        sig = rng.standard_normal((8, 96))
        sig /= np.linalg.norm(sig, axis=1, keepdims=True)
        dirs = rng.standard_normal((5, 96))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        error_labels = [lab for lab in AGREEMENT_LABELS if lab != "Correct"]
        candidates = {"Correct": np.zeros(96)}
        candidates.update(dict(zip(error_labels, dirs)))
        hits = total = 0
        for inst in instances:
            correct_vec = store.vector(inst.answers[inst.correct_index][0].id)
            base_sig8 = correct_vec  # correct answer is exactly base + sig(8)
            for s, lab in inst.answers:
                offset = store.vector(s.id) - base_sig8
                nearest = min(candidates, key=lambda c: np.linalg.norm(offset - candidates[c]))
                hits += nearest == lab
                total += 1
        assert hits == total

    def test_negative_noise_rejected(self):
        with pytest.raises(ConfigError, match="noise"):
            synth_generate(SynthConfig(count=5, noise=-0.1), seed=0)

    def test_instances_validate(self):
        instances, _ = synth_generate(SynthConfig(count=5, dim=8), seed=0)
        for inst in instances:
            inst.validate()
        assert isinstance(instances[0], BLMInstance)
