"""Cohen's kappa, masking analysis, error breakdowns, and report output."""

import csv
import json

import numpy as np
import pytest

from blmvae.analysis import (KappaMatrix, MaskingRun, cohens_kappa,
                             emit_report, error_breakdown, kappa_matrix,
                             masking_analysis)
from blmvae.data import SynthConfig, split_dataset, synth_generate
from blmvae.errors import ConfigError, DataError
from blmvae.training import EvalResult, TrainConfig, train


def brute_force_kappa(a, b):
    """Independent contingency-table implementation."""
    cats = sorted(set(a) | set(b))
    k = len(cats)
    table = np.zeros((k, k), dtype=int)
    for x, y in zip(a, b):
        table[cats.index(x), cats.index(y)] += 1
    n = table.sum()
    po = np.trace(table) / n
    pe = float((table.sum(axis=1) / n) @ (table.sum(axis=0) / n))
    if pe == 1.0:
        return 1.0 if list(a) == list(b) else 0.0
    return (po - pe) / (1 - pe)


class TestCohensKappa:
    def test_identical_sequences(self):
        assert cohens_kappa([0, 1, 0, 2], [0, 1, 0, 2]) == 1.0

    def test_hand_contingency_case(self):
        # po = 0.75, pe = 0.5 -> kappa = 0.5
        assert abs(cohens_kappa([0, 0, 1, 1], [0, 1, 1, 1]) - 0.5) < 1e-12

    def test_disjoint_constant_sequences(self):
        assert cohens_kappa(["X"] * 5, ["Y"] * 5) <= 0.0

    def test_identical_constant_sequences(self):
        assert cohens_kappa(["X"] * 5, ["X"] * 5) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(DataError, match="equal-length"):
            cohens_kappa([0, 1], [0])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            k = int(rng.integers(2, 5))
            a = list(rng.integers(0, k, n))
            b = list(rng.integers(0, k, n))
            assert abs(cohens_kappa(a, b) - brute_force_kappa(a, b)) < 1e-12

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(1)
        a = list(rng.integers(0, 3, 30))
        b = list(rng.integers(0, 3, 30))
        mapping = {0: "x", 1: "y", 2: "z"}
        assert abs(cohens_kappa(a, b)
                   - cohens_kappa([mapping[v] for v in a],
                                  [mapping[v] for v in b])) < 1e-15


class TestKappaMatrix:
    def runs(self, n=3, length=20, seed=2):
        rng = np.random.default_rng(seed)
        return [MaskingRun(variant=f"v{i}", labels=list(rng.integers(0, 3, length)),
                           indices=list(range(length))) for i in range(n)]

    def test_symmetric_unit_diagonal(self):
        km = kappa_matrix(self.runs())
        np.testing.assert_array_equal(np.diag(km.kappa), 1.0)
        np.testing.assert_array_equal(km.kappa, km.kappa.T)

    def test_empty_runs(self):
        with pytest.raises(DataError, match="no masking runs"):
            kappa_matrix([])


class TestMaskingAnalysis:
    def setup_trained(self, planted=False, count=40, epochs=1, latent="d1x2+c5"):
        instances, store = synth_generate(
            SynthConfig(count=count, dim=225, noise=0.01, planted_factor=planted),
            seed=3)
        split = split_dataset(instances, seed=0)
        cfg = TrainConfig(epochs=epochs, batch_size=16, runs=1, seed=0,
                          model="encdec", latent=latent, channels=2,
                          rows=15, cols=15)
        ckpt = train(split, store, cfg)
        return ckpt, split, store

    def test_variant_count_for_joint_spec(self):
        ckpt, split, store = self.setup_trained()
        runs = masking_analysis(ckpt, split.test, store)
        assert [r.variant for r in runs] == [
            "base", "mask_discrete_0", "mask_continuous_0", "mask_continuous_1",
            "mask_continuous_2", "mask_continuous_3", "mask_continuous_4"]
        assert all(len(r.labels) == len(split.test) for r in runs)
        assert all(len(r.indices) == len(split.test) for r in runs)

    def test_requires_joint_spec(self):
        ckpt, split, store = self.setup_trained(latent="c5")
        with pytest.raises(ConfigError, match="joint spec"):
            masking_analysis(ckpt, split.test, store)

    def test_dead_unit_matches_base(self):
        ckpt, split, store = self.setup_trained()
        from blmvae.training import restore_model
        model = restore_model(ckpt)
        # the decoder consumes [z; c], so continuous unit 0 feeds weight row 0;
        # zeroing that row makes masking it a strict no-op
        model.dec_fc.weights.data[0, :] = 0.0
        runs = masking_analysis(model, split.test, store)
        base = next(r for r in runs if r.variant == "base")
        masked = next(r for r in runs if r.variant == "mask_continuous_0")
        assert masked.indices == base.indices
        assert masked.labels == base.labels


class TestErrorBreakdown:
    def result(self, counts, n=100, dataset="agreement_fr", seed=0):
        return EvalResult(f1=1.0 - sum(counts.values()) / n,
                          per_label_error_counts=counts, n_instances=n,
                          run_seed=seed, dataset=dataset)

    def test_zero_errors(self):
        br = error_breakdown([self.result({})])
        assert all(r["percentage"] == 0.0 for r in br.rows)

    def test_single_run_percentage(self):
        br = error_breakdown([self.result({"WN2": 7})])
        by_label = {r["label"]: r["percentage"] for r in br.rows}
        assert by_label["WN2"] == 7.0
        assert by_label["WNA"] == 0.0

    def test_mean_over_runs_matches_recount(self):
        rng = np.random.default_rng(4)
        results = []
        for seed in range(5):
            counts = {lab: int(rng.integers(0, 6))
                      for lab in ("Coord", "WNA", "AE", "WN1", "WN2")}
            results.append(self.result(counts, seed=seed))
        br = error_breakdown(results)
        for row in br.rows:
            expected = np.mean([100.0 * r.per_label_error_counts.get(row["label"], 0)
                                / r.n_instances for r in results])
            assert abs(row["percentage"] - expected) < 1e-12

    def test_percentages_sum_to_error_rate(self):
        results = [self.result({"WN2": 7, "AE": 3}), self.result({"Coord": 2})]
        br = error_breakdown(results)
        total_pct = sum(r["percentage"] for r in br.rows)
        mean_err = np.mean([(1.0 - r.f1) * 100.0 for r in results])
        assert abs(total_pct - mean_err) < 1e-6

    def test_lexical_grouping_for_alternations(self):
        res = self.result({"SSM": 5, "LexPrep": 2, "NoEmb": 1}, dataset="alt_atl")
        groups = {r["label"]: r["group"] for r in error_breakdown([res]).rows}
        assert groups["LexPrep"] == "lexical"
        assert groups["NoEmb"] == "lexical"
        assert groups["SSM"] == "structural"
        assert groups["AgentAct"] == "structural"

    def test_agreement_all_structural(self):
        groups = {r["group"] for r in error_breakdown([self.result({"WN2": 1})]).rows}
        assert groups == {"structural"}

    def test_mixed_label_sets_rejected(self):
        with pytest.raises(DataError, match="mixed"):
            error_breakdown([self.result({}), self.result({}, dataset="alt_atl")])


class TestEmitReport:
    def kappa7(self):
        rng = np.random.default_rng(5)
        runs = [MaskingRun(variant=v, labels=list(rng.integers(0, 3, 30)),
                           indices=list(range(30)))
                for v in ["base", "mask_discrete_0"] +
                [f"mask_continuous_{k}" for k in range(5)]]
        return kappa_matrix(runs)

    def test_empty_kappa_rejected(self, tmp_path):
        with pytest.raises(DataError, match="no masking runs"):
            emit_report(tmp_path, kappa=KappaMatrix(variants=[], kappa=np.zeros((0, 0))))

    def test_kappa_csv_roundtrip(self, tmp_path):
        km = self.kappa7()
        emit_report(tmp_path, kappa=km)
        with open(tmp_path / "kappa.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["variant"] + km.variants
        assert len(rows) == 8
        parsed = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
        np.testing.assert_allclose(parsed, km.kappa, atol=5e-7)
        np.testing.assert_array_equal(np.diag(parsed), 1.0)
        assert (tmp_path / "kappa.svg").exists()
        assert (tmp_path / "summary.json").exists()

    def test_error_csv_roundtrip_and_charts(self, tmp_path):
        res = EvalResult(f1=0.93, per_label_error_counts={"WN2": 7}, n_instances=100,
                         dataset="agreement_fr")
        br = error_breakdown([res])
        emit_report(tmp_path, f1_summaries=[{"setting": "encdec_c5", "f1_mean": 0.93,
                                             "f1_std": 0.0}],
                    breakdowns={"encdec_c5": br})
        with open(tmp_path / "errors_encdec_c5.csv", encoding="utf-8") as fh:
            rows = {r["label"]: r for r in csv.DictReader(fh)}
        assert float(rows["WN2"]["percentage"]) == 7.0
        assert rows["WN2"]["group"] == "structural"
        assert (tmp_path / "errors_encdec_c5.svg").exists()
        assert (tmp_path / "f1_summary.csv").exists()
        bundle = json.loads((tmp_path / "summary.json").read_text("utf-8"))
        assert bundle["f1_summaries"][0]["f1_mean"] == 0.93
