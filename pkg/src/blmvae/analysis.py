"""Error-category breakdowns, latent-masking analysis, and report emission.

Masking re-decodes every instance with one latent component zeroed and
compares the prediction sequences against the unmasked run via Cohen's
kappa over the chosen answer labels: low agreement means the masked
component carried information the predictions depend on.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .data import labels_for
from .errors import ConfigError, DataError
from .latent import mask_latent
from .model import cosine_scores_np, group_by_answer_count, make_batch
from .store import EmbeddingStore
from .training import Checkpoint, EvalResult, restore_model

LEXICAL_LABELS = {"NoEmb", "LexPrep"}  # verb-alternation rules that are lexical
ANALYSIS_CHUNK = 256


# ---------------------------------------------------------------------------
# Cohen's kappa


def cohens_kappa(a, b) -> float:
    """Chance-corrected agreement (po - pe) / (1 - pe) between two label
    sequences.

    When pe == 1 (both raters constant) the formula is 0/0; identical
    sequences score 1.0, anything else 0.0.
    """
    if len(a) != len(b):
        raise DataError(f"kappa needs equal-length sequences, got {len(a)} / {len(b)}")
    if len(a) == 0:
        raise DataError("kappa needs at least one observation")
    n = len(a)
    po = sum(1 for x, y in zip(a, b) if x == y) / n
    cats = set(a) | set(b)
    pa = {c: 0 for c in cats}
    pb = {c: 0 for c in cats}
    for x in a:
        pa[x] += 1
    for y in b:
        pb[y] += 1
    pe = sum(pa[c] * pb[c] for c in cats) / (n * n)
    if pe == 1.0:
        return 1.0 if list(a) == list(b) else 0.0
    return (po - pe) / (1.0 - pe)


@dataclass
class KappaMatrix:
    variants: list
    kappa: np.ndarray  # symmetric, unit diagonal

    def to_rows(self) -> list:
        return [[self.variants[i]] + [float(self.kappa[i, j]) for j in range(len(self.variants))]
                for i in range(len(self.variants))]


def kappa_matrix(runs: list) -> KappaMatrix:
    """Pairwise kappa over the label sequences of masking runs."""
    if not runs:
        raise DataError("no masking runs")
    k = len(runs)
    mat = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            mat[i, j] = mat[j, i] = cohens_kappa(runs[i].labels, runs[j].labels)
    return KappaMatrix(variants=[r.variant for r in runs], kappa=mat)


# ---------------------------------------------------------------------------
# Masking analysis


@dataclass
class MaskingRun:
    variant: str      # base | mask_discrete_<j> | mask_continuous_<k>
    labels: list      # chosen answer label per instance
    indices: list     # chosen answer index per instance


def masking_analysis(model_or_ckpt, instances, store: EmbeddingStore) -> list:
    """Predictions for the base model and for every single-component mask.

    Requires a joint latent (at least one discrete block and one continuous
    unit).  Every variant covers the identical instance list in identical
    order, encoding once and re-decoding with the mask applied.
    """
    model = (restore_model(model_or_ckpt) if isinstance(model_or_ckpt, Checkpoint)
             else model_or_ckpt)
    spec = getattr(model.cfg, "latent", None)
    if spec is None or not spec.categories or spec.continuous_dim == 0:
        raise ConfigError("masking analysis requires joint spec "
                          "(>=1 discrete block and >=1 continuous unit)")

    targets = [("base", None)]
    targets += [(f"mask_discrete_{j}", ("discrete_block", j))
                for j in range(len(spec.categories))]
    targets += [(f"mask_continuous_{k}", ("continuous_unit", k))
                for k in range(spec.continuous_dim)]
    runs = {name: MaskingRun(variant=name, labels=[], indices=[]) for name, _ in targets}

    for group in group_by_answer_count(instances):
        for start in range(0, len(group), ANALYSIS_CHUNK):
            batch = make_batch(group[start:start + ANALYSIS_CHUNK], store, model.cfg.shape)
            code = model.encode(Tensor(batch.context), deterministic=True)
            for name, target in targets:
                masked = code if target is None else mask_latent(code, target)
                pred = model.decode(masked)
                scores = cosine_scores_np(pred.data, batch.answers)
                chosen = scores.argmax(axis=1)
                run = runs[name]
                for i, c in enumerate(chosen):
                    run.indices.append(int(c))
                    run.labels.append(batch.labels[i][c])
    return [runs[name] for name, _ in targets]


# ---------------------------------------------------------------------------
# Error breakdowns


@dataclass
class ErrorBreakdown:
    dataset: str
    rows: list  # {"label": str, "percentage": float, "group": str}


def error_breakdown(results: list) -> ErrorBreakdown:
    """Mean per-label error percentages across runs.

    Each wrong prediction counts under the label of the chosen answer;
    percentages are per-run fractions of all instances, averaged over
    runs.  Labels are annotated as lexical (NoEmb/LexPrep on the verb
    alternation sets) or structural.
    """
    if not results:
        raise DataError("error_breakdown needs at least one result")
    datasets = {r.dataset for r in results}
    if len(datasets) != 1:
        raise DataError(f"mixed label sets across results: {sorted(datasets)}")
    dataset = datasets.pop()
    error_labels = [lab for lab in labels_for(dataset) if lab != "Correct"]
    rows = []
    for lab in error_labels:
        pcts = [100.0 * r.per_label_error_counts.get(lab, 0) / r.n_instances
                for r in results]
        group = "lexical" if dataset != "agreement_fr" and lab in LEXICAL_LABELS \
            else "structural"
        rows.append({"label": lab, "percentage": float(np.mean(pcts)), "group": group})
    return ErrorBreakdown(dataset=dataset, rows=rows)


# ---------------------------------------------------------------------------
# Report output


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])


def _bar_chart(path: Path, labels, values, title, ylabel) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(labels)), 3.2))
    ax.bar(range(len(labels)), values, color="#348ABD")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _heatmap(path: Path, names, matrix, title) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(1.0 + 0.7 * len(names), 1.0 + 0.7 * len(names)))
    im = ax.imshow(matrix, vmin=-1.0, vmax=1.0, cmap="RdYlGn")
    ax.set_xticks(range(len(names)))
    ax.set_yticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_yticklabels(names, fontsize=7)
    for i in range(len(names)):
        for j in range(len(names)):
            ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center", fontsize=6)
    ax.set_title(title, fontsize=10)
    fig.colorbar(im, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def emit_report(out_dir, f1_summaries=None, breakdowns=None, kappa=None) -> list:
    """Write CSV tables, a JSON bundle, and rendered SVG charts.

    f1_summaries: list of {"setting", "f1_mean", "f1_std"}; breakdowns:
    {setting: ErrorBreakdown}; kappa: KappaMatrix.  Whatever is passed gets
    written; an explicitly empty kappa request is an error.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if kappa is not None and not kappa.variants:
        raise DataError("no masking runs")

    bundle: dict = {"kappa_categories": "chosen answer labels"}

    if f1_summaries:
        path = out_dir / "f1_summary.csv"
        _write_csv(path, ["setting", "f1_mean", "f1_std"],
                   [[s["setting"], float(s["f1_mean"]), float(s["f1_std"])]
                    for s in f1_summaries])
        written.append(path)
        chart = out_dir / "f1_summary.svg"
        _bar_chart(chart, [s["setting"] for s in f1_summaries],
                   [s["f1_mean"] for s in f1_summaries], "F1 by setting", "F1")
        written.append(chart)
        bundle["f1_summaries"] = f1_summaries

    if breakdowns:
        bundle["error_breakdowns"] = {}
        for setting, br in breakdowns.items():
            path = out_dir / f"errors_{setting}.csv"
            _write_csv(path, ["label", "percentage", "group"],
                       [[r["label"], float(r["percentage"]), r["group"]] for r in br.rows])
            written.append(path)
            chart = out_dir / f"errors_{setting}.svg"
            _bar_chart(chart, [r["label"] for r in br.rows],
                       [r["percentage"] for r in br.rows],
                       f"Error percentages ({setting})", "% of instances")
            written.append(chart)
            bundle["error_breakdowns"][setting] = {"dataset": br.dataset, "rows": br.rows}

    if kappa is not None:
        path = out_dir / "kappa.csv"
        _write_csv(path, ["variant"] + kappa.variants, kappa.to_rows())
        written.append(path)
        chart = out_dir / "kappa.svg"
        _heatmap(chart, kappa.variants, kappa.kappa, "Prediction agreement (kappa)")
        written.append(chart)
        bundle["kappa"] = {"variants": kappa.variants,
                           "matrix": [[float(v) for v in row] for row in kappa.kappa]}

    path = out_dir / "summary.json"
    path.write_text(json.dumps(bundle, indent=2), encoding="utf-8")
    written.append(path)
    return written


def eval_results_from_json(results_json: dict) -> list:
    """Rebuild per-run EvalResults from a persisted results bundle."""
    out = []
    for run in results_json["runs"]:
        out.append(EvalResult(
            f1=run["f1"], per_label_error_counts=dict(run["error_counts"]),
            n_instances=run["n_instances"], run_seed=run.get("seed", 0),
            dataset=run.get("dataset", "")))
    return out
