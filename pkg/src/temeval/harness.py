"""Corpus-level evaluation runs: ingest, score, aggregate, compare.

Reads prediction/reference JSONL corpora, pushes every pair through the
selected metrics with per-pair error isolation, and aggregates by
unweighted arithmetic mean over the pairs where each metric succeeded.
Single-reference evaluation throughout: each id has exactly one reference.
"""

from __future__ import annotations

import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

from . import trajectory as traj
from .backends.base import BackendError, SemanticBackend
from .events import SourceRole
from .gateway import GatewayConfig
from .io import InputParseError, iter_jsonl
from .ngram import build_idf, cider, rouge_l, tokenize
from .tem import tem_score

METRIC_CHOICES = ("tem", "autodq", "cider", "rougel", "judge")

JUDGE_DIMENSIONS = ("correctness", "detail", "context", "temporal")


class MissingReference(Exception):
    """Prediction ids with no matching reference entry."""

    def __init__(self, ids: list[str]):
        self.ids = ids
        super().__init__(f"predictions without references: {', '.join(ids)}")


class NoOverlap(Exception):
    """Two reports share no pair ids."""


@dataclass(frozen=True)
class CaptionPair:
    id: str
    prediction: str
    reference: str


@dataclass
class HarnessConfig:
    """Effective run settings; every key can come from a key=value file."""

    base_url: str = "http://localhost:8000/v1"
    model: str = "local-model"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5
    max_in_flight: int = 4
    cache_dir: str = ".temeval_cache"
    workers: int = 4
    rouge_beta: float = 1.2
    cider_scale: float = 1.0
    assoc_lambda: float = 0.5
    cost_gate: float = 0.7
    max_age: int = 8

    @classmethod
    def from_file(cls, path: Path | str | None) -> HarnessConfig:
        """Parse a key=value config file; blank lines and # comments ignored."""
        config = cls()
        if path is None:
            return config
        types = {f.name: f.type for f in fields(cls)}
        casts = {"str": str, "float": float, "int": int}
        with open(path, encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ValueError(
                        f"{path}:{line_number}: expected key=value, got {stripped!r}"
                    )
                key, _, value = stripped.partition("=")
                key, value = key.strip(), value.strip()
                if key not in types:
                    raise ValueError(f"{path}:{line_number}: unknown config key {key!r}")
                try:
                    setattr(config, key, casts[types[key]](value))
                except ValueError as exc:
                    raise ValueError(f"{path}:{line_number}: bad value for {key}: {exc}")
        return config

    def config_hash(self) -> str:
        canonical = "\n".join(
            f"{f.name}={getattr(self, f.name)}" for f in fields(self)
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def gateway_config(self) -> GatewayConfig:
        return GatewayConfig(
            base_url=self.base_url,
            model_name=self.model,
            api_key_env=self.api_key_env,
            timeout=self.timeout,
            max_retries=self.max_retries,
            backoff_base=self.backoff_base,
            max_in_flight=self.max_in_flight,
            cache_dir=Path(self.cache_dir),
        )


@dataclass
class MetricReport:
    """Per-pair records plus aggregates and enough metadata to reproduce."""

    pairs: list[dict]
    aggregates: dict[str, float | None]
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "aggregates": self.aggregates,
            "pairs": self.pairs,
        }


def _read_corpus(path: Path | str, field: str) -> dict[str, str]:
    """id -> text mapping from a JSONL file, preserving file order."""
    out: dict[str, str] = {}
    for line_number, obj in iter_jsonl(path):
        if "id" not in obj or not isinstance(obj["id"], str) or not obj["id"]:
            raise InputParseError(path, line_number, "missing or empty 'id'")
        if field not in obj or not isinstance(obj[field], str):
            raise InputParseError(path, line_number, f"missing or non-string {field!r}")
        if obj["id"] in out:
            raise InputParseError(path, line_number, f"duplicate id {obj['id']!r}")
        if field == "reference" and not obj[field].strip():
            raise InputParseError(path, line_number, "reference must be non-empty")
        out[obj["id"]] = obj[field]
    return out


def load_caption_pairs(
    predictions_path: Path | str, references_path: Path | str
) -> tuple[list[CaptionPair], list[str]]:
    """Pairs in prediction-file order plus the full reference corpus texts."""
    predictions = _read_corpus(predictions_path, "prediction")
    references = _read_corpus(references_path, "reference")
    missing = [pair_id for pair_id in predictions if pair_id not in references]
    if missing:
        raise MissingReference(missing)
    pairs = [
        CaptionPair(id=pair_id, prediction=text, reference=references[pair_id])
        for pair_id, text in predictions.items()
    ]
    return pairs, list(references.values())


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = int(epoch) if epoch else time.time()
    return datetime.fromtimestamp(moment, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def _score_pair(
    pair: CaptionPair,
    metrics: set[str],
    backend: SemanticBackend,
    idf,
    config: HarnessConfig,
    align: bool,
) -> dict:
    record: dict = {"id": pair.id, "errors": {}}
    semantic = {"tem", "autodq", "judge"} & metrics
    judged_text = pair.prediction
    align_failed = False

    if align and semantic:
        try:
            judged_text = backend.align_format(pair.prediction, pair.reference)
        except BackendError as exc:
            align_failed = True
            message = f"{type(exc).__name__}: {exc}"
            record["errors"]["align"] = message
            for metric in sorted(semantic):
                record["errors"][metric] = f"skipped: align failed ({message})"

    if {"tem", "autodq"} & metrics and not align_failed:
        try:
            gen_events = backend.extract_events(judged_text, SourceRole.GENERATED)
            ref_events = backend.extract_events(pair.reference, SourceRole.REFERENCE)
            matrix = backend.classify_relations(gen_events, ref_events)
            score = tem_score(matrix)
            record["event_counts"] = {"generated": matrix.m, "reference": matrix.n}
            if "tem" in metrics:
                record["tem"] = {
                    "lcs_length": score.lcs_length,
                    "lcs_score": score.lcs_score,
                    "precision": score.precision,
                    "recall": score.recall,
                    "f_measure": score.f_measure,
                    "combined": score.combined,
                }
            if "autodq" in metrics:
                record["autodq"] = {
                    "precision": score.precision,
                    "recall": score.recall,
                    "f_measure": score.f_measure,
                }
        except BackendError as exc:
            message = f"{type(exc).__name__}: {exc}"
            for metric in {"tem", "autodq"} & metrics:
                record["errors"][metric] = message

    if "cider" in metrics or "rougel" in metrics:
        gen_tokens = tokenize(pair.prediction)
        ref_tokens = tokenize(pair.reference)
        if "cider" in metrics:
            record["cider"] = cider(
                gen_tokens, ref_tokens, idf, scale=config.cider_scale
            )
        if "rougel" in metrics:
            record["rouge_l"] = rouge_l(
                gen_tokens, ref_tokens, beta=config.rouge_beta
            )

    if "judge" in metrics and not align_failed:
        try:
            scores = backend.judge_scores(judged_text, pair.reference)
            record["judge"] = scores.as_dict()
        except BackendError as exc:
            record["errors"]["judge"] = f"{type(exc).__name__}: {exc}"

    return record


def pair_scalars(record: dict) -> dict[str, float]:
    """Flat metric-name -> value view of one per-pair record."""
    scalars: dict[str, float] = {}
    if "tem" in record:
        scalars["tem"] = record["tem"]["combined"]
    if "autodq" in record:
        scalars["autodq"] = record["autodq"]["f_measure"]
    if "cider" in record:
        scalars["cider"] = record["cider"]
    if "rouge_l" in record:
        scalars["rouge_l"] = record["rouge_l"]
    if "judge" in record:
        for dimension in JUDGE_DIMENSIONS:
            scalars[f"judge_{dimension}"] = record["judge"][dimension]
    return scalars


AGGREGATE_KEYS = (
    "judge_correctness",
    "judge_detail",
    "judge_context",
    "judge_temporal",
    "cider",
    "rouge_l",
    "autodq",
    "tem",
)


def _aggregate(pairs: list[dict]) -> tuple[dict[str, float | None], dict[str, int]]:
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for record in pairs:
        for key, value in pair_scalars(record).items():
            sums[key] = sums.get(key, 0.0) + value
            counts[key] = counts.get(key, 0) + 1
    aggregates: dict[str, float | None] = {}
    for key in AGGREGATE_KEYS:
        aggregates[key] = sums[key] / counts[key] if counts.get(key) else None
    return aggregates, counts


def run_eval(
    predictions_path: Path | str,
    references_path: Path | str,
    metrics: set[str],
    backend: SemanticBackend,
    config: HarnessConfig | None = None,
    align: bool = False,
) -> MetricReport:
    """Score every prediction against its reference with the chosen metrics.

    Per-pair failures are recorded under the pair's ``errors`` and never
    abort the run. The IDF table for CIDEr is built from the full reference
    file, so removing a pair can shift other pairs' CIDEr weights (and only
    those).
    """
    unknown = metrics - set(METRIC_CHOICES)
    if unknown:
        raise ValueError(f"unknown metrics: {', '.join(sorted(unknown))}")
    config = config or HarnessConfig()
    pairs, reference_corpus = load_caption_pairs(predictions_path, references_path)
    idf = (
        build_idf([tokenize(text) for text in reference_corpus])
        if "cider" in metrics
        else None
    )

    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        records = list(
            pool.map(
                lambda pair: _score_pair(pair, metrics, backend, idf, config, align),
                pairs,
            )
        )

    aggregates, counts = _aggregate(records)
    metadata = {
        "backend": backend.name,
        "config_hash": config.config_hash(),
        "template_versions": backend.template_versions(),
        "timestamp": _timestamp(),
        "metrics": sorted(metrics),
        "align": align,
        "pair_count": len(records),
        "scored_counts": {key: counts.get(key, 0) for key in AGGREGATE_KEYS},
        "error_count": sum(1 for record in records if record["errors"]),
    }
    return MetricReport(pairs=records, aggregates=aggregates, metadata=metadata)


def run_trajectory(
    detections_path: Path | str,
    src_fps: float,
    src_frame_count: int | None = None,
    n_frames: int = 16,
    config: HarnessConfig | None = None,
) -> tuple[dict, list[str]]:
    """Trajectory pipeline over one detections file.

    ``src_frame_count`` defaults to max(frame_idx)+1 over the detections;
    an empty file falls back to ``n_frames`` so the uniform sample is still
    well defined. Returns (report dict, warnings).
    """
    config = config or HarnessConfig()
    warnings: list[str] = []
    detections = traj.load_detections(detections_path)
    if src_frame_count is None:
        if detections:
            src_frame_count = max(det.frame_idx for det in detections) + 1
        else:
            src_frame_count = n_frames
            warnings.append(
                "no detections and no frame count given; "
                f"assuming {n_frames} frames for the uniform sample"
            )
    if not detections:
        warnings.append("detections file is empty; emitting no tracks")
    report = traj.run_pipeline(
        detections,
        src_fps=src_fps,
        src_frame_count=src_frame_count,
        n_frames=n_frames,
        lam=config.assoc_lambda,
        cost_gate=config.cost_gate,
        max_age=config.max_age,
    )
    return report, warnings


def compare_runs(report_a: dict, report_b: dict) -> dict:
    """Aggregate and per-pair deltas (B minus A) over the shared pair ids."""
    pairs_a = {record["id"]: record for record in report_a["pairs"]}
    pairs_b = {record["id"]: record for record in report_b["pairs"]}
    shared = [pair_id for pair_id in pairs_a if pair_id in pairs_b]
    if not shared:
        raise NoOverlap("the two reports share no pair ids")

    aggregate_deltas: dict[str, float | None] = {}
    for key in AGGREGATE_KEYS:
        value_a = report_a["aggregates"].get(key)
        value_b = report_b["aggregates"].get(key)
        aggregate_deltas[key] = (
            value_b - value_a
            if value_a is not None and value_b is not None
            else None
        )

    pair_deltas: dict[str, dict[str, float]] = {}
    for pair_id in shared:
        scalars_a = pair_scalars(pairs_a[pair_id])
        scalars_b = pair_scalars(pairs_b[pair_id])
        deltas = {
            key: scalars_b[key] - scalars_a[key]
            for key in scalars_a
            if key in scalars_b
        }
        pair_deltas[pair_id] = deltas

    return {
        "shared_ids": shared,
        "only_in_a": [pair_id for pair_id in pairs_a if pair_id not in pairs_b],
        "only_in_b": [pair_id for pair_id in pairs_b if pair_id not in pairs_a],
        "aggregate_deltas": aggregate_deltas,
        "pair_deltas": pair_deltas,
    }
