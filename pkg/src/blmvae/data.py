"""Loading, validation, splitting, and synthesis of BLM multiple-choice data.

A problem instance is a context of 7 sentences sharing one grammatical
phenomenon plus a labeled answer set with exactly one correct continuation.
Datasets are JSON-Lines, one instance per line:

    {"id": str, "dataset": "agreement_fr|alt_atl|atl_alt", "type": "I|II|III",
     "context": [str x7], "answers": [{"text": str, "label": str}, ...]}

Sentence ids are derived deterministically from the instance id as
``<id>:ctx:<i>`` and ``<id>:ans:<j>`` so that embedding stores produced by
any extractor line up with the loader.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .store import EmbeddingStore

CONTEXT_LEN = 7

DATASETS = ("agreement_fr", "alt_atl", "atl_alt")

# Answer label universes.  Both verb-alternation groups share one label set.
AGREEMENT_LABELS = ("Correct", "Coord", "WNA", "AE", "WN1", "WN2")
ALTERNATION_LABELS = (
    "Correct", "AgentAct", "Alt1", "Alt2", "NoEmb", "LexPrep", "SSM", "AASSM",
)

TYPE_TIERS = ("I", "II", "III")


def labels_for(dataset: str) -> tuple[str, ...]:
    if dataset == "agreement_fr":
        return AGREEMENT_LABELS
    if dataset in ("alt_atl", "atl_alt"):
        return ALTERNATION_LABELS
    raise DataError(f"unknown dataset {dataset!r}")


@dataclass
class SentenceRecord:
    id: str
    text: str
    dataset: str
    type_tier: str


@dataclass
class BLMInstance:
    id: str
    context: list[SentenceRecord]
    answers: list  # [(SentenceRecord, label)]
    correct_index: int

    @property
    def dataset(self) -> str:
        return self.context[0].dataset

    def sentence_ids(self) -> list[str]:
        return [s.id for s in self.context] + [s.id for s, _ in self.answers]

    def validate(self) -> None:
        if len(self.context) != CONTEXT_LEN:
            raise DataError(
                f"instance {self.id!r}: context length {len(self.context)} != {CONTEXT_LEN}"
            )
        label_set = labels_for(self.dataset)
        correct = [i for i, (_, lab) in enumerate(self.answers) if lab == "Correct"]
        if len(correct) != 1:
            raise DataError(
                f"instance {self.id!r}: expected exactly one Correct answer, got {len(correct)}"
            )
        if self.correct_index != correct[0]:
            raise DataError(f"instance {self.id!r}: correct_index does not point at Correct")
        for _, lab in self.answers:
            if lab not in label_set:
                raise DataError(
                    f"instance {self.id!r}: label {lab!r} not in {self.dataset} label set"
                )
        for s in self.context + [s for s, _ in self.answers]:
            if not s.text:
                raise DataError(f"instance {self.id!r}: empty sentence text ({s.id})")


def load_dataset(path, dataset: str) -> list[BLMInstance]:
    """Parse a JSON-Lines dataset file, validating every instance.

    Order is preserved.  Malformed JSON raises DataError with the line
    number; invariant violations name the offending instance id.
    """
    label_set = labels_for(dataset)
    instances = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: malformed JSON ({e.msg})") from None
            inst = _instance_from_record(rec, dataset, label_set, lineno, path)
            if inst.id in seen_ids:
                raise DataError(f"{path}:{lineno}: duplicate instance id {inst.id!r}")
            seen_ids.add(inst.id)
            instances.append(inst)
    return instances


def _instance_from_record(rec, dataset, label_set, lineno, path) -> BLMInstance:
    try:
        iid = str(rec["id"])
        file_dataset = rec["dataset"]
        tier = rec["type"]
        context = rec["context"]
        answers = rec["answers"]
    except (KeyError, TypeError) as e:
        raise DataError(f"{path}:{lineno}: missing field {e}") from None
    if file_dataset != dataset:
        raise DataError(
            f"instance {iid!r}: dataset {file_dataset!r} does not match requested {dataset!r}"
        )
    if tier not in TYPE_TIERS:
        raise DataError(f"instance {iid!r}: unknown type tier {tier!r}")
    if len(context) != CONTEXT_LEN:
        raise DataError(f"instance {iid!r}: context length {len(context)} != {CONTEXT_LEN}")
    ctx = [
        SentenceRecord(id=f"{iid}:ctx:{i}", text=str(t), dataset=dataset, type_tier=tier)
        for i, t in enumerate(context)
    ]
    ans = []
    correct_index = None
    for j, a in enumerate(answers):
        lab = a["label"]
        if lab not in label_set:
            raise DataError(f"instance {iid!r}: label {lab!r} not in {dataset} label set")
        if lab == "Correct":
            if correct_index is not None:
                raise DataError(f"instance {iid!r}: more than one Correct answer")
            correct_index = j
        ans.append(
            (SentenceRecord(id=f"{iid}:ans:{j}", text=str(a["text"]), dataset=dataset,
                            type_tier=tier), lab)
        )
    if correct_index is None:
        raise DataError(f"instance {iid!r}: missing Correct answer")
    inst = BLMInstance(id=iid, context=ctx, answers=ans, correct_index=correct_index)
    inst.validate()
    return inst


def save_dataset(instances: list[BLMInstance], path) -> None:
    """Write instances back out in the JSON-Lines schema (UTF-8, LF)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            rec = {
                "id": inst.id,
                "dataset": inst.dataset,
                "type": inst.context[0].type_tier,
                "context": [s.text for s in inst.context],
                "answers": [{"text": s.text, "label": lab} for s, lab in inst.answers],
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Splitting


@dataclass
class DatasetSplit:
    train: list[BLMInstance]
    dev: list[BLMInstance]
    test: list[BLMInstance]
    seed: int


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_dataset(instances: list[BLMInstance], seed: int) -> DatasetSplit:
    """90:10 train:test split, then 20% of the train pool as dev.

    Counts use round-half-up on the test count first, then on the dev
    count.  Shuffling comes from a generator seeded with `seed` only, so
    the split is deterministic and order-independent of the caller's RNG.
    """
    n = len(instances)
    if n < 10:
        raise DataError(f"too small to split: {n} instances (need >= 10)")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [instances[i] for i in order]
    n_test = _round_half_up(0.10 * n)
    pool = shuffled[n_test:]
    n_dev = _round_half_up(0.20 * len(pool))
    return DatasetSplit(
        train=pool[n_dev:],
        dev=pool[:n_dev],
        test=shuffled[:n_test],
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Synthetic data with a known ground-truth factorization


@dataclass
class SynthConfig:
    """Controls the synthetic generator.

    Context embedding i is base + signature(i) + N(0, noise^2); the correct
    answer is exactly base + signature(8); each erroneous answer adds a
    label-specific unit direction (plus noise), so labels are recoverable
    by a nearest-direction check.

    With planted_factor=True, even-indexed instances additionally hinge on
    a binary factor f readable from the context: their correct answer
    carries f*factor_dir while one designated foil answer carries
    (1-f)*factor_dir, so those instances can only be solved by recovering
    f.  Five continuous nuisance attributes are mixed into context and
    correct answer to keep the continuous latent units occupied.
    """

    count: int
    dim: int = 768
    noise: float = 0.01
    dataset: str = "agreement_fr"
    planted_factor: bool = False
    n_attrs: int = 5
    attr_scale: float = 0.5
    foil_label_index: int = 1  # answer slot that becomes the factor foil

    def validate(self) -> None:
        if self.noise < 0:
            raise ConfigError(f"noise scale must be >= 0, got {self.noise}")
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        labels_for(self.dataset)


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def synth_generate(config: SynthConfig, seed: int):
    """Generate (instances, store) with embeddings built from fixed signatures.

    All randomness comes from `seed`; re-running with identical arguments
    reproduces the store byte-for-byte.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    dim = config.dim
    labels = labels_for(config.dataset)
    error_labels = [lab for lab in labels if lab != "Correct"]

    sig = _unit_rows(rng, 8, dim)                   # positions 1..8
    err_dir = {lab: d for lab, d in zip(error_labels, _unit_rows(rng, len(error_labels), dim))}
    factor_dir = _unit_rows(rng, 1, dim)[0]
    attr_dirs = _unit_rows(rng, config.n_attrs, dim)

    instances = []
    vectors: dict[str, np.ndarray] = {}
    for k in range(config.count):
        iid = f"synth-{k:05d}"
        base = _unit_rows(rng, 1, dim)[0]
        planted = config.planted_factor and k % 2 == 0
        f = int(rng.integers(0, 2)) if config.planted_factor else 0
        attrs = rng.normal(0.0, config.attr_scale, config.n_attrs) if config.planted_factor else None

        shared = base.copy()
        if config.planted_factor:
            shared += f * factor_dir + attr_dirs.T @ attrs

        ctx_records = []
        for i in range(CONTEXT_LEN):
            vec = shared + sig[i] + config.noise * rng.standard_normal(dim)
            sid = f"{iid}:ctx:{i}"
            vectors[sid] = vec
            ctx_records.append(
                SentenceRecord(id=sid, text=f"synthetic context {k}.{i}",
                               dataset=config.dataset, type_tier="I")
            )

        correct_vec = shared + sig[7]
        answers = []
        correct_index = None
        for j, lab in enumerate(labels):
            sid = f"{iid}:ans:{j}"
            if lab == "Correct":
                vec = correct_vec
                correct_index = j
            elif planted and j == config.foil_label_index:
                # Foil: identical to the correct answer except the factor flips.
                vec = (base + attr_dirs.T @ attrs + (1 - f) * factor_dir + sig[7]
                       + config.noise * rng.standard_normal(dim))
            else:
                vec = correct_vec + err_dir[lab] + config.noise * rng.standard_normal(dim)
            vectors[sid] = vec
            answers.append(
                (SentenceRecord(id=sid, text=f"synthetic answer {k}.{j} ({lab})",
                                dataset=config.dataset, type_tier="I"), lab)
            )

        inst = BLMInstance(id=iid, context=ctx_records, answers=answers,
                           correct_index=correct_index)
        inst.validate()
        instances.append(inst)

    store = EmbeddingStore.from_dict(vectors, dim)
    return instances, store
