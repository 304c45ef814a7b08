"""Experiment orchestration: full attack runs, ablation sweeps, attack-type
classification, and annotation-batch export/aggregation.

Per-instance outcomes are logged as JSONL with stable key order so a run
with a fixed seed and built-in victims replays byte-identically, and sweep
axes can re-aggregate from logs without re-attacking.
"""
from __future__ import annotations

import dataclasses
import json
import random
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .attack import (
    AttackConfig,
    AttackResult,
    AttackTools,
    TARGET_HISTORY,
    attack_history,
    attack_question,
    random_word_attack,
)
from .constraints import (
    _NOT_COMPARATIVE,
    ConstraintConfig,
    GrammarChecker,
    ProtocolGrammarChecker,
)
from .corpus import AttackInstance, flatten_instances, load_corpus
from .encoder import ProtocolEncoder, SimilarityScorer
from .fixtures import make_fixture_corpus
from .lexsub import (
    EmbeddingTable,
    ProtocolSynonymProvider,
    embedding_candidates,
    fixture_embeddings,
    tag_word,
)
from .metrics import (
    Aggregates,
    MetricSet,
    RobustnessReport,
    attack_aggregates,
    build_report,
    compute_metric_set,
    ndcg,
)
from .oracle import OverlapRanker, ProtocolVictim, RankerConfig, Victim
from .protocol import HttpTransport, ProtocolError, StdioTransport, TransportError

BUILTIN_VICTIMS = {
    "overlap-q": RankerConfig(use_image=False, use_history=False),
    "overlap-qi": RankerConfig(use_image=True, use_history=False),
    "overlap-qh": RankerConfig(use_image=False, use_history=True),
    "overlap-qih": RankerConfig(use_image=True, use_history=True),
}


@dataclass
class ExperimentConfig:
    corpus_path: str | None = None  # None -> built-in fixture corpus
    corpus_format: str = "toy"
    relevance_path: str | None = None
    victim: str = "builtin:overlap-q"
    attack: AttackConfig = field(default_factory=AttackConfig)
    word_selection: str = "importance"  # importance | random
    embeddings_path: str | None = None  # None -> bundled fixture table
    mlm_endpoint: str | None = None
    encoder_endpoint: str | None = None
    grammar_endpoint: str | None = None
    max_instances: int | None = None
    round_ids: tuple[int, ...] | None = None
    out_dir: str | None = None
    workers: int = 1
    fixture_dialogs: int = 40
    fixture_rounds: int = 5


def _make_transport(endpoint: str):
    if endpoint.startswith(("http://", "https://")):
        return HttpTransport(endpoint)
    if endpoint.startswith("url:"):
        return HttpTransport(endpoint[4:])
    if endpoint.startswith("cmd:"):
        return StdioTransport(endpoint[4:])
    raise ValueError(f"endpoint {endpoint!r} must be http(s)://..., url:... or cmd:...")


def make_victim(spec: str) -> tuple[Victim, list]:
    """Resolve a victim spec to an object, plus transports needing close()."""
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN_VICTIMS:
            raise ValueError(f"unknown builtin victim {name!r}; options: {sorted(BUILTIN_VICTIMS)}")
        return OverlapRanker(BUILTIN_VICTIMS[name]), []
    transport = _make_transport(spec)
    return ProtocolVictim(transport), [transport]


def make_tools(cfg: ExperimentConfig) -> tuple[AttackTools, list]:
    closers = []
    table = (EmbeddingTable.load(cfg.embeddings_path) if cfg.embeddings_path
             else fixture_embeddings())
    mlm = None
    if cfg.mlm_endpoint:
        transport = _make_transport(cfg.mlm_endpoint)
        closers.append(transport)
        mlm = ProtocolSynonymProvider(transport)
    if cfg.encoder_endpoint:
        transport = _make_transport(cfg.encoder_endpoint)
        closers.append(transport)
        scorer = SimilarityScorer(encoder=ProtocolEncoder(transport))
    else:
        scorer = SimilarityScorer(table=table)
    grammar: GrammarChecker | ProtocolGrammarChecker = GrammarChecker()
    if cfg.grammar_endpoint:
        transport = _make_transport(cfg.grammar_endpoint)
        closers.append(transport)
        grammar = ProtocolGrammarChecker(transport)
    return AttackTools(embeddings=table, mlm=mlm, scorer=scorer, grammar=grammar), closers


def load_instances(cfg: ExperimentConfig) -> list[AttackInstance]:
    if cfg.corpus_path is None:
        corpus = make_fixture_corpus(cfg.fixture_dialogs, cfg.fixture_rounds,
                                     seed=cfg.attack.seed)
    else:
        corpus = load_corpus(cfg.corpus_path, cfg.corpus_format, cfg.relevance_path)
    instances = flatten_instances(corpus)
    if cfg.round_ids is not None:
        wanted = set(cfg.round_ids)
        instances = [i for i in instances if i.round_id in wanted]
    instances.sort(key=lambda i: (i.dialog.image_id, i.round_id))
    if cfg.max_instances is not None:
        instances = instances[: cfg.max_instances]
    return instances


def _attack_fn(cfg: ExperimentConfig):
    if cfg.word_selection == "random":
        return random_word_attack
    if cfg.attack.target == TARGET_HISTORY:
        return attack_history
    return attack_question


def result_record(result: AttackResult, ndcg_before: float | None,
                  ndcg_after: float | None) -> dict:
    """The JSONL log schema: everything needed to re-aggregate without re-attacking."""
    return {
        "instance_id": result.instance_id,
        "target": result.target,
        "attempted": result.attempted,
        "success": result.success,
        "original_text": result.original_text,
        "adversarial_text": result.adversarial_text,
        "substitutions": [dataclasses.asdict(s) for s in result.substitutions],
        "queries": result.queries,
        "similarity_final": result.similarity_final,
        "attacked_segment": result.attacked_segment,
        "gt_rank_before": result.gt_rank_before,
        "gt_rank_after": result.gt_rank_after,
        "p_gt_before": result.p_gt_before,
        "p_gt_after": result.p_gt_after,
        "ndcg_before": ndcg_before,
        "ndcg_after": ndcg_after,
        "answer_before": result.answer_before,
        "answer_after": result.answer_after,
        "token_count": result.token_count,
    }


@dataclass
class ExperimentOutcome:
    report: RobustnessReport
    results: list[AttackResult]
    records: list[dict]

    def segment_shares(self) -> dict[str, float]:
        """Share of attacked history segments over successful history attacks."""
        kinds = [r.attacked_segment for r in self.results
                 if r.success and r.attacked_segment]
        if not kinds:
            return {}
        return {k: kinds.count(k) / len(kinds) for k in sorted(set(kinds))}


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutcome:
    """Attack every eligible instance and aggregate a robustness report.

    Metrics are computed over all processed instances (after-state = original
    scores when nothing was committed), so the before column reflects the
    victim's base accuracy like a standard evaluation would.
    """
    instances = load_instances(cfg)
    if not instances:
        warnings.warn("no eligible instances; emitting empty report")
        empty = compute_metric_set([], [], [])
        report = build_report(empty, empty, attack_aggregates([]))
        return ExperimentOutcome(report=report, results=[], records=[])

    victim, closers = make_victim(cfg.victim)
    tools, tool_closers = make_tools(cfg)
    closers += tool_closers
    fn = _attack_fn(cfg)

    results = []
    try:
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                for result in pool.map(lambda i: fn(i, victim, cfg.attack, tools), instances):
                    results.append(result)
        else:
            for instance in instances:
                results.append(fn(instance, victim, cfg.attack, tools))
    except (TransportError, ProtocolError):
        # Flush whatever completed before the victim went away, then let the
        # caller surface the transport diagnostics.
        if cfg.out_dir:
            partial = [result_record(r, None, None) for r in results]
            out = Path(cfg.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            with (out / "results.partial.jsonl").open("w", encoding="utf-8") as fh:
                for record in partial:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
        raise
    finally:
        for closer in closers:
            closer.close()

    records = []
    ndcgs_before, ndcgs_after = [], []
    for instance, result in zip(instances, results):
        nb = na = None
        if instance.relevance is not None:
            nb = ndcg(result.scores_before, instance.relevance)
            na = ndcg(result.scores_after, instance.relevance)
            ndcgs_before.append(nb)
            ndcgs_after.append(na)
        records.append(result_record(result, nb, na))

    before = compute_metric_set(
        [r.gt_rank_before for r in results], [r.p_gt_before for r in results], ndcgs_before
    )
    after = compute_metric_set(
        [r.gt_rank_after for r in results], [r.p_gt_after for r in results], ndcgs_after
    )
    report = build_report(before, after, attack_aggregates(results))
    outcome = ExperimentOutcome(report=report, results=results, records=records)
    if cfg.out_dir:
        write_outcome(outcome, cfg.out_dir)
    return outcome


def write_outcome(outcome: ExperimentOutcome, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "results.jsonl").open("w", encoding="utf-8") as fh:
        for record in outcome.records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    (out / "report.json").write_text(outcome.report.to_json() + "\n", encoding="utf-8")
    (out / "report.csv").write_text(outcome.report.to_csv(), encoding="utf-8")
    (out / "report.txt").write_text(outcome.report.format_table() + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Ablation sweeps.

SWEEP_AXES = ("epsilon", "constraint_stack", "word_selection", "stopwords")

_STACK = (
    ("raw", ConstraintConfig(use_stopwords=True, use_pos=False, sim_threshold=None, use_grammar=False)),
    ("+pos", ConstraintConfig(use_stopwords=True, use_pos=True, sim_threshold=None, use_grammar=False)),
    ("+pos+sim0.5", ConstraintConfig(use_stopwords=True, use_pos=True, sim_threshold=0.5, use_grammar=False)),
    ("+pos+sim0.5+gram", ConstraintConfig(use_stopwords=True, use_pos=True, sim_threshold=0.5, use_grammar=True)),
)


@dataclass
class SweepEntry:
    label: str
    report: RobustnessReport


def ablation_sweep(cfg: ExperimentConfig, axis: str,
                   values: Sequence[float] | None = None) -> list[SweepEntry]:
    """One report per setting over the identical instance set and seed."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; options: {SWEEP_AXES}")

    settings: list[tuple[str, ExperimentConfig]] = []
    if axis == "epsilon":
        if not values:
            raise ValueError("epsilon sweep needs a list of threshold values")
        for eps in values:
            constraints = replace(cfg.attack.constraints, sim_threshold=float(eps))
            settings.append(
                (f"eps={eps}", replace(cfg, attack=replace(cfg.attack, constraints=constraints)))
            )
    elif axis == "constraint_stack":
        for label, constraints in _STACK:
            settings.append(
                (label, replace(cfg, attack=replace(cfg.attack, constraints=constraints)))
            )
    elif axis == "word_selection":
        for label in ("random", "importance"):
            settings.append((label, replace(cfg, word_selection=label)))
    else:  # stopwords
        for label, use in (("all_words", False), ("stopword_filtered", True)):
            constraints = replace(cfg.attack.constraints, use_stopwords=use)
            settings.append(
                (label, replace(cfg, attack=replace(cfg.attack, constraints=constraints)))
            )

    entries = []
    for label, setting in settings:
        sub_out = None
        if cfg.out_dir:
            sub_out = str(Path(cfg.out_dir) / re.sub(r"[^\w.+=-]", "_", label))
        outcome = run_experiment(replace(setting, out_dir=sub_out))
        entries.append(SweepEntry(label=label, report=outcome.report))
    if cfg.out_dir:
        write_sweep(entries, axis, cfg.out_dir)
    return entries


def write_sweep(entries: list[SweepEntry], axis: str, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [",".join(["setting"] + RobustnessReport.csv_header())]
    for entry in entries:
        lines.append(",".join([entry.label] + [str(v) for v in entry.report.csv_row()]))
    (out / f"sweep_{axis}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Attack-type classification.

ATTACK_TYPES = ("british_american", "synonym", "singular_plural",
                "comparative_superlative", "other")

_IRREGULAR_PLURALS = {
    "men": "man", "women": "woman", "children": "child", "feet": "foot",
    "teeth": "tooth", "mice": "mouse", "geese": "goose", "people": "person",
    "oxen": "ox", "lives": "life", "leaves": "leaf", "knives": "knife",
    "wolves": "wolf", "shelves": "shelf", "halves": "half",
}

_IRREGULAR_DEGREES = {
    "better": "good", "best": "good", "worse": "bad", "worst": "bad",
    "further": "far", "furthest": "far", "farther": "far", "farthest": "far",
    "less": "little", "least": "little", "more": "many", "most": "many",
}

_BA_SUFFIX_PAIRS = (
    ("or", "our"), ("ors", "ours"), ("ize", "ise"), ("izes", "ises"),
    ("ized", "ised"), ("izing", "ising"), ("yze", "yse"), ("yzed", "ysed"),
    ("og", "ogue"), ("ogs", "ogues"),
)


def _number_lemma(word: str) -> tuple[str, bool]:
    """(lemma, is_plural) using regular -s/-es/-ies rules plus irregulars."""
    lower = word.lower()
    if lower in _IRREGULAR_PLURALS:
        return _IRREGULAR_PLURALS[lower], True
    if lower in _IRREGULAR_PLURALS.values():
        return lower, False
    if lower.endswith("ies") and len(lower) > 4:
        return lower[:-3] + "y", True
    if lower.endswith(("ches", "shes", "xes", "ses", "zes")) and len(lower) > 4:
        return lower[:-2], True
    if lower.endswith("s") and not lower.endswith("ss") and len(lower) > 3:
        return lower[:-1], True
    return lower, False


def _degree_forms(word: str) -> tuple[str, set[str]]:
    """(degree, candidate base stems) where degree is base | comparative | superlative.

    Stems are a set because -er/-est stripping is ambiguous without a
    dictionary: "bigger" may undouble to "big", "larger" restores an "e",
    "happier" a "y", while "tallest" keeps its double letter.
    """
    lower = word.lower()
    if lower in _IRREGULAR_DEGREES:
        degree = "superlative" if lower.endswith("st") else "comparative"
        return degree, {_IRREGULAR_DEGREES[lower]}
    if lower in _NOT_COMPARATIVE:
        return "base", {lower}
    for suffix, degree in (("est", "superlative"), ("er", "comparative")):
        if lower.endswith(suffix) and len(lower) - len(suffix) >= 3:
            stem = lower[: -len(suffix)]
            stems = {stem, stem + "e"}
            if len(stem) > 2 and stem[-1] == stem[-2]:
                stems.add(stem[:-1])
            if stem.endswith("i"):
                stems.add(stem[:-1] + "y")
            return degree, stems
    return "base", {lower}


def _degree_match(a: str, b: str) -> bool:
    deg_a, stems_a = _degree_forms(a)
    deg_b, stems_b = _degree_forms(b)
    return deg_a != deg_b and bool(stems_a & stems_b)


def load_variant_pairs(path: str | Path | None = None) -> frozenset[tuple[str, str]]:
    if path is None:
        from .lexsub import _data_path  # bundled list
        path = _data_path("british_american.txt")
    pairs = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        a, b = line.split()
        pairs.add((a.lower(), b.lower()))
        pairs.add((b.lower(), a.lower()))
    return frozenset(pairs)


def _spelling_variant(a: str, b: str, pairs: frozenset[tuple[str, str]]) -> bool:
    if (a, b) in pairs:
        return True
    for us, uk in _BA_SUFFIX_PAIRS:
        for x, sx, y, sy in ((a, us, b, uk), (a, uk, b, us)):
            if (x.endswith(sx) and y.endswith(sy)
                    and x[: -len(sx)] == y[: -len(sy)]
                    and len(x) - len(sx) >= 2):
                return True
    return False


@dataclass
class AttackTypeClassifier:
    """Classifies a substitution pair into the five observed attack types.

    Decision order puts mechanically checkable rules first: spelling variant,
    number inflection, degree inflection, then embedding-neighborhood synonym
    with matching POS, else other.
    """

    variants: frozenset[tuple[str, str]] = field(default_factory=load_variant_pairs)
    embeddings: EmbeddingTable = field(default_factory=fixture_embeddings)
    k: int = 50

    def classify(self, original: str, replacement: str) -> str:
        if not original or not replacement:
            raise ValueError("both words must be non-empty")
        a, b = original.lower(), replacement.lower()
        if _spelling_variant(a, b, self.variants):
            return "british_american"
        lemma_a, plural_a = _number_lemma(a)
        lemma_b, plural_b = _number_lemma(b)
        if lemma_a == lemma_b and plural_a != plural_b:
            return "singular_plural"
        if _degree_match(a, b):
            return "comparative_superlative"
        neighbors = embedding_candidates(a, self.embeddings, self.k)
        if any(c.word == b for c in neighbors) and tag_word(a) == tag_word(b):
            return "synonym"
        return "other"


def classify_attack_type(original: str, replacement: str,
                         classifier: AttackTypeClassifier | None = None) -> str:
    return (classifier or AttackTypeClassifier()).classify(original, replacement)


# ---------------------------------------------------------------------------
# Annotation export and aggregation.

ANNOTATION_TASKS = ("similarity_no_image", "similarity_with_image",
                    "grammaticality", "label_consistency")

TASK_SCALES: dict[str, tuple] = {
    "similarity_no_image": (1, 2, 3, 4),
    "similarity_with_image": (1, 2, 3, 4),
    "grammaticality": (1, 2, 3, 4, 5),
    "label_consistency": ("yes", "no", "unsure"),
}


def export_annotation_batch(results: Sequence[AttackResult] | Sequence[dict],
                            tasks: Sequence[str] = ANNOTATION_TASKS,
                            sample: int | None = None, seed: int = 0,
                            tags_by_image: dict[str, Sequence[str]] | None = None) -> list[dict]:
    """One annotation item per (successful result, task), with stable item ids."""
    records = [r if isinstance(r, dict) else result_record(r, None, None) for r in results]
    successes = [r for r in records if r["success"]]
    if not successes:
        raise ValueError("no successful attacks to export")
    for task in tasks:
        if task not in ANNOTATION_TASKS:
            raise ValueError(f"unknown task {task!r}")
    if sample is not None:
        if sample > len(successes):
            raise ValueError(f"sample {sample} exceeds {len(successes)} successful attacks")
        successes = random.Random(seed).sample(successes, sample)
        successes.sort(key=lambda r: r["instance_id"])
    items = []
    for record in successes:
        image_id = record["instance_id"].rsplit(":", 1)[0]
        for task in tasks:
            item = {
                "item_id": f"{record['instance_id']}:{task}",
                "image_id": image_id,
                "task": task,
                "original_question": record["original_text"],
                "adversarial_question": record["adversarial_text"],
                "answer_before": record["answer_before"],
                "answer_after": record["answer_after"],
            }
            if tags_by_image is not None and image_id in tags_by_image:
                item["image_tags"] = list(tags_by_image[image_id])
            items.append(item)
    return items


def write_annotation_batch(items: Iterable[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item, sort_keys=True) + "\n")


def _validate_rating(task: str, value) -> object:
    scale = TASK_SCALES.get(task)
    if scale is None:
        raise ValueError(f"unknown task {task!r}")
    if task == "label_consistency":
        value = str(value).lower()
    else:
        value = int(value)
    if value not in scale:
        raise ValueError(f"value {value!r} outside the {task} scale {scale}")
    return value


def aggregate_annotations(ratings: str | Path | Iterable[dict],
                          min_ratings: int = 3) -> dict:
    """Per-task aggregation of a ratings file.

    Numeric tasks average their scale values; label consistency reports both
    the share of individual ratings ("averaging") and per-item majority-vote
    shares, where a modal tie counts as unsure. Items with fewer than
    ``min_ratings`` ratings are excluded with a warning and listed.
    """
    if isinstance(ratings, (str, Path)):
        rows = []
        for lineno, line in enumerate(Path(ratings).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    else:
        rows = list(ratings)

    # Last rating wins for a duplicate (item, annotator, task).
    deduped: dict[tuple[str, str, str], object] = {}
    for row in rows:
        task = str(row["task"])
        value = _validate_rating(task, row["value"])
        deduped[(str(row["item_id"]), str(row["annotator_id"]), task)] = value

    by_item: dict[tuple[str, str], list] = {}
    for (item_id, _annotator, task), value in deduped.items():
        by_item.setdefault((task, item_id), []).append(value)

    excluded: dict[str, list[str]] = {}
    summary: dict[str, dict] = {}
    for task in ANNOTATION_TASKS:
        items = {iid: vals for (t, iid), vals in by_item.items() if t == task}
        if not items:
            continue
        under = sorted(iid for iid, vals in items.items() if len(vals) < min_ratings)
        if under:
            excluded[task] = under
            warnings.warn(
                f"{task}: {len(under)} item(s) with fewer than {min_ratings} ratings excluded"
            )
        kept = {iid: vals for iid, vals in items.items() if len(vals) >= min_ratings}
        if not kept:
            continue
        if task == "label_consistency":
            all_ratings = [v for vals in kept.values() for v in vals]
            averaging = {
                label: all_ratings.count(label) / len(all_ratings)
                for label in ("yes", "no", "unsure")
            }
            majority_labels = []
            for vals in kept.values():
                counts = {label: vals.count(label) for label in ("yes", "no", "unsure")}
                top = max(counts.values())
                winners = [label for label, c in counts.items() if c == top]
                majority_labels.append(winners[0] if len(winners) == 1 else "unsure")
            majority = {
                label: majority_labels.count(label) / len(majority_labels)
                for label in ("yes", "no", "unsure")
            }
            summary[task] = {
                "n_items": len(kept),
                "n_ratings": len(all_ratings),
                "averaging": averaging,
                "majority": majority,
            }
        else:
            all_ratings = [v for vals in kept.values() for v in vals]
            summary[task] = {
                "n_items": len(kept),
                "n_ratings": len(all_ratings),
                "mean": sum(all_ratings) / len(all_ratings),
                "scale_max": max(TASK_SCALES[task]),
            }
    return {"tasks": summary, "excluded": excluded}
