"""Main-character selection from ingested per-frame face detections.

Face detection and embedding models are upstream of this module: it consumes
their per-frame output (box + unit embedding per face) and produces
trajectories, trajectory features, a main/background split via 2-means on
(total screen area, embedding self-consistency), and a face-aware sample of
video frames.

Association is a per-frame optimal one-to-one assignment between live tracks
and detections under a blended IoU/embedding cost, which stands in for a
heavier multi-object tracker behind the same Track interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .io import InputParseError, iter_jsonl

TARGET_FPS = 16.0

DEFAULT_LAMBDA = 0.5
DEFAULT_COST_GATE = 0.7
DEFAULT_MAX_AGE = 8

EMBEDDING_NORM_TOL = 1e-6


class DimensionMismatch(Exception):
    """Detections in one run carry embeddings of different dimensions."""


class EmptyTrack(Exception):
    """Features were requested for a track with no detections."""


@dataclass(frozen=True)
class Detection:
    """One face observation: frame index, pixel box, unit embedding."""

    frame_idx: int
    bbox: tuple[float, float, float, float]
    frame_size: tuple[int, int]
    embedding: np.ndarray
    confidence: float

    def validate(self) -> None:
        x, y, w, h = self.bbox
        frame_w, frame_h = self.frame_size
        if self.frame_idx < 0:
            raise ValueError(f"frame_idx must be >= 0, got {self.frame_idx}")
        if w <= 0 or h <= 0:
            raise ValueError(f"bbox width/height must be positive, got {self.bbox}")
        if x < 0 or y < 0 or x + w > frame_w or y + h > frame_h:
            raise ValueError(
                f"bbox {self.bbox} exceeds frame bounds {self.frame_size}"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        norm = float(np.linalg.norm(self.embedding))
        if abs(norm - 1.0) > EMBEDDING_NORM_TOL:
            raise ValueError(f"embedding must be unit length, norm is {norm}")

    @property
    def area_fraction(self) -> float:
        _, _, w, h = self.bbox
        frame_w, frame_h = self.frame_size
        return (w * h) / (frame_w * frame_h)


@dataclass
class Track:
    """Temporally ordered detections judged to be one person."""

    track_id: int
    detections: list[Detection]

    @property
    def frames(self) -> list[int]:
        return [det.frame_idx for det in self.detections]


@dataclass(frozen=True)
class TrackFeatures:
    """(screen presence, embedding self-consistency) pair fed to clustering.

    total_area sums the per-frame box-area fraction across the track and
    divides by the video frame count, so it folds the temporal and the
    spatial share of the face into one number in [0, 1]. avg_cos is the mean
    pairwise cosine similarity of the track's embeddings over all unordered
    distinct pairs, defined as 1.0 for single-detection tracks.
    """

    total_area: float
    avg_cos: float


@dataclass(frozen=True)
class MainSelection:
    main_track_ids: frozenset[int]
    background_track_ids: frozenset[int]
    cluster_centers: tuple[tuple[float, float], tuple[float, float]]


def downsample_plan(
    src_fps: float, src_frame_count: int, target_fps: float = TARGET_FPS
) -> list[int]:
    """Source frame indices that resample the video to ``target_fps``.

    index(k) = round(k * src_fps / target_fps), half up, clipped to the
    frame count. A source at or below the target rate keeps every frame.
    """
    if src_fps <= 0:
        raise ValueError(f"src_fps must be positive, got {src_fps}")
    if src_frame_count <= 0:
        raise ValueError(f"src_frame_count must be positive, got {src_frame_count}")
    if src_fps <= target_fps:
        return list(range(src_frame_count))
    ratio = src_fps / target_fps
    plan: list[int] = []
    k = 0
    while True:
        idx = math.floor(k * ratio + 0.5)
        if idx >= src_frame_count:
            break
        if not plan or idx != plan[-1]:
            plan.append(idx)
        k += 1
    return plan


def iou(box_a: tuple[float, float, float, float],
        box_b: tuple[float, float, float, float]) -> float:
    ax, ay, aw, ah = box_a
    bx, by, bw, bh = box_b
    inter_w = min(ax + aw, bx + bw) - max(ax, bx)
    inter_h = min(ay + ah, by + bh) - max(ay, by)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    inter = inter_w * inter_h
    union = aw * ah + bw * bh - inter
    return inter / union


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    norm = float(np.linalg.norm(u)) * float(np.linalg.norm(v))
    if norm == 0.0:
        return 0.0
    return float(np.dot(u, v)) / norm


class _LiveTrack:
    __slots__ = ("track_id", "detections", "embedding_sum", "last_seen")

    def __init__(self, track_id: int, detection: Detection, position: int):
        self.track_id = track_id
        self.detections = [detection]
        self.embedding_sum = detection.embedding.astype(float).copy()
        self.last_seen = position

    def mean_embedding(self) -> np.ndarray:
        return self.embedding_sum / len(self.detections)

    def last_box(self) -> tuple[float, float, float, float]:
        return self.detections[-1].bbox

    def absorb(self, detection: Detection, position: int) -> None:
        self.detections.append(detection)
        self.embedding_sum += detection.embedding
        self.last_seen = position


def association_cost(
    track_box: tuple[float, float, float, float],
    track_embedding: np.ndarray,
    detection: Detection,
    lam: float,
) -> float:
    overlap = iou(track_box, detection.bbox)
    similarity = _cosine(track_embedding, detection.embedding)
    return lam * (1.0 - overlap) + (1.0 - lam) * (1.0 - similarity)


def associate_tracks(
    frames: list[list[Detection]],
    lam: float = DEFAULT_LAMBDA,
    cost_gate: float = DEFAULT_COST_GATE,
    max_age: int = DEFAULT_MAX_AGE,
) -> list[Track]:
    """Group per-frame detections into tracks.

    Each frame solves the optimal one-to-one assignment between live tracks
    and detections under cost = lam*(1-IoU) + (1-lam)*(1-cosine); matched
    pairs costing more than ``cost_gate`` are rejected. Unmatched detections
    open new tracks; tracks unmatched for more than ``max_age`` consecutive
    (downsampled) frames are retired.
    """
    expected_dim: int | None = None
    live: list[_LiveTrack] = []
    finished: list[_LiveTrack] = []
    next_id = 0

    for position, detections in enumerate(frames):
        for det in detections:
            dim = int(det.embedding.shape[0])
            if expected_dim is None:
                expected_dim = dim
            elif dim != expected_dim:
                raise DimensionMismatch(
                    f"embedding dimension {dim} != {expected_dim} "
                    f"at frame {det.frame_idx}"
                )

        matched_tracks: set[int] = set()
        matched_dets: set[int] = set()
        if live and detections:
            cost = np.empty((len(live), len(detections)))
            for i, track in enumerate(live):
                box = track.last_box()
                emb = track.mean_embedding()
                for j, det in enumerate(detections):
                    cost[i, j] = association_cost(box, emb, det, lam)
            rows, cols = linear_sum_assignment(cost)
            for i, j in zip(rows, cols):
                if cost[i, j] <= cost_gate:
                    live[i].absorb(detections[j], position)
                    matched_tracks.add(i)
                    matched_dets.add(j)

        for j, det in enumerate(detections):
            if j not in matched_dets:
                live.append(_LiveTrack(next_id, det, position))
                next_id += 1

        survivors: list[_LiveTrack] = []
        for i, track in enumerate(live):
            if i not in matched_tracks and position - track.last_seen > max_age:
                finished.append(track)
            else:
                survivors.append(track)
        live = survivors

    finished.extend(live)
    tracks = [Track(t.track_id, t.detections) for t in finished]
    tracks.sort(key=lambda t: t.track_id)
    return tracks


def track_features(track: Track, video_frame_count: int) -> TrackFeatures:
    if not track.detections:
        raise EmptyTrack(f"track {track.track_id} has no detections")
    if video_frame_count <= 0:
        raise ValueError(
            f"video_frame_count must be positive, got {video_frame_count}"
        )
    total_area = (
        sum(det.area_fraction for det in track.detections) / video_frame_count
    )
    embeddings = [det.embedding for det in track.detections]
    if len(embeddings) == 1:
        avg_cos = 1.0
    else:
        pair_values = [
            _cosine(embeddings[i], embeddings[j])
            for i in range(len(embeddings))
            for j in range(i + 1, len(embeddings))
        ]
        avg_cos = sum(pair_values) / len(pair_values)
    return TrackFeatures(total_area=total_area, avg_cos=avg_cos)


# -- main-track selection --------------------------------------------------


def _normalize(points: np.ndarray) -> np.ndarray:
    """Min-max per dimension; a constant dimension collapses to 0."""
    out = np.zeros_like(points, dtype=float)
    for dim in range(points.shape[1]):
        lo, hi = points[:, dim].min(), points[:, dim].max()
        if hi > lo:
            out[:, dim] = (points[:, dim] - lo) / (hi - lo)
    return out


def _partition_sse(points: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for value in (0, 1):
        members = points[labels == value]
        if len(members):
            center = members.mean(axis=0)
            total += float(((members - center) ** 2).sum())
    return total


def _lloyd_two_means(
    points: np.ndarray, seed_a: int, seed_b: int, max_iter: int = 100
) -> tuple[np.ndarray, list[float]]:
    """Lloyd iterations from two seed points, to assignment fixpoint.

    Returns (labels, per-iteration SSE history). Ties assign to cluster 0;
    an emptied cluster keeps its previous center.
    """
    center_a = points[seed_a].astype(float).copy()
    center_b = points[seed_b].astype(float).copy()
    labels: np.ndarray | None = None
    history: list[float] = []
    for _ in range(max_iter):
        dist_a = ((points - center_a) ** 2).sum(axis=1)
        dist_b = ((points - center_b) ** 2).sum(axis=1)
        new_labels = (dist_b < dist_a).astype(int)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        if (labels == 0).any():
            center_a = points[labels == 0].mean(axis=0)
        if (labels == 1).any():
            center_b = points[labels == 1].mean(axis=0)
        history.append(_partition_sse(points, labels))
    assert labels is not None
    return labels, history


def _sweep_best_split(points: np.ndarray) -> np.ndarray:
    """Exact minimum-SSE 2-partition of 2-D points.

    The optimal two clusters are separated by the perpendicular bisector of
    their centroids, so the optimum appears as a prefix of the points sorted
    along some direction. Orderings change only at directions perpendicular
    to pairwise difference vectors; sampling one direction per angular
    interval between those critical angles covers every distinct ordering.
    """
    n = len(points)
    critical: set[float] = set()
    for i in range(n):
        for j in range(i + 1, n):
            diff = points[j] - points[i]
            if diff[0] == 0.0 and diff[1] == 0.0:
                continue
            angle = (math.atan2(diff[1], diff[0]) + math.pi / 2.0) % math.pi
            critical.add(angle)
    if not critical:
        # All points coincide; any grouping has SSE 0.
        return np.zeros(n, dtype=int)
    angles = sorted(critical)
    directions = []
    for idx, angle in enumerate(angles):
        if idx + 1 < len(angles):
            directions.append((angle + angles[idx + 1]) / 2.0)
        else:
            directions.append((angle + angles[0] + math.pi) / 2.0)
    best_labels = np.zeros(n, dtype=int)
    best_sse = math.inf
    for direction in directions:
        axis = np.array([math.cos(direction), math.sin(direction)])
        order = sorted(range(n), key=lambda i: (float(points[i] @ axis), i))
        labels = np.zeros(n, dtype=int)
        for cut in range(1, n):
            labels[:] = 0
            labels[order[:cut]] = 1
            sse = _partition_sse(points, labels)
            if sse < best_sse:
                best_sse = sse
                best_labels = labels.copy()
    return best_labels


def select_main_tracks(
    features: list[tuple[int, TrackFeatures]]
) -> MainSelection:
    """Split tracks into a main-character cluster and a background cluster.

    Features are min-max normalized per dimension, then 2-means clustered:
    Lloyd's iterations seeded on the min- and max-total_area tracks, backed
    by an exact minimum-SSE split that takes over whenever Lloyd's converges
    to a worse local optimum. The cluster with the greater mean raw
    total_area is main; a tie goes to the cluster holding the single
    largest-total_area track. One track is always main; two tracks form one
    cluster each.
    """
    if not features:
        raise ValueError("features must be non-empty")
    ids = [track_id for track_id, _ in features]
    raw = np.array(
        [[f.total_area, f.avg_cos] for _, f in features], dtype=float
    )

    if len(features) == 1:
        center = (float(raw[0, 0]), float(raw[0, 1]))
        return MainSelection(
            main_track_ids=frozenset(ids),
            background_track_ids=frozenset(),
            cluster_centers=(center, center),
        )

    if len(features) == 2:
        labels = np.array([0, 1])
    else:
        normalized = _normalize(raw)
        seed_a = int(np.argmin(raw[:, 0]))
        seed_b = int(np.argmax(raw[:, 0]))
        if seed_a == seed_b:
            # Constant total_area: fall back to the avg_cos extremes.
            seed_a = int(np.argmin(raw[:, 1]))
            seed_b = int(np.argmax(raw[:, 1]))
        labels, _ = _lloyd_two_means(normalized, seed_a, seed_b)
        sweep_labels = _sweep_best_split(normalized)
        if _partition_sse(normalized, sweep_labels) < _partition_sse(
            normalized, labels
        ):
            labels = sweep_labels

    return _selection_from_labels(ids, raw, labels)


def _selection_from_labels(
    ids: list[int], raw: np.ndarray, labels: np.ndarray
) -> MainSelection:
    cluster_ids: dict[int, list[int]] = {0: [], 1: []}
    for track_id, label in zip(ids, labels):
        cluster_ids[int(label)].append(track_id)

    means = {}
    centers = {}
    for value in (0, 1):
        members = raw[labels == value]
        if len(members):
            means[value] = float(members[:, 0].mean())
            centers[value] = (
                float(members[:, 0].mean()),
                float(members[:, 1].mean()),
            )

    if len(means) == 1:
        main = next(iter(means))
    elif means[0] != means[1]:
        main = 0 if means[0] > means[1] else 1
    else:
        biggest = int(np.argmax(raw[:, 0]))
        main = int(labels[biggest])
    background = 1 - main

    main_center = centers[main]
    background_center = centers.get(background, main_center)
    return MainSelection(
        main_track_ids=frozenset(cluster_ids[main]),
        background_track_ids=frozenset(cluster_ids[background]),
        cluster_centers=(main_center, background_center),
    )


def select_frames(
    video_frame_count: int,
    n: int = 16,
    main_face_frames: frozenset[int] | set[int] = frozenset(),
) -> list[int]:
    """n uniform frame picks, snapped onto frames showing a main face.

    Picks are floor(j*N/n) for j in 0..n-1. When ``main_face_frames`` is
    non-empty, any pick outside the set moves to its nearest member (ties
    resolve to the earlier frame). Duplicates are allowed and order is
    preserved; an empty set leaves the uniform picks untouched.
    """
    if video_frame_count <= 0:
        raise ValueError(
            f"video_frame_count must be positive, got {video_frame_count}"
        )
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    picks = [(j * video_frame_count) // n for j in range(n)]
    if not main_face_frames:
        return picks
    members = sorted(main_face_frames)
    return [
        pick
        if pick in main_face_frames
        else min(members, key=lambda frame: (abs(frame - pick), frame))
        for pick in picks
    ]


# -- ingest / pipeline ------------------------------------------------------


def load_detections(path: Path | str) -> list[Detection]:
    """Read detections from JSONL; one object per detection.

    Expected fields: frame_idx, bbox [x, y, w, h], frame_size [w, h],
    embedding [...], confidence. Raises InputParseError with the line number
    on schema violations and DimensionMismatch on inconsistent embeddings.
    """
    detections: list[Detection] = []
    expected_dim: int | None = None
    for line_number, obj in iter_jsonl(path):
        try:
            detection = Detection(
                frame_idx=int(obj["frame_idx"]),
                bbox=tuple(float(v) for v in obj["bbox"]),
                frame_size=tuple(int(v) for v in obj["frame_size"]),
                embedding=np.asarray(obj["embedding"], dtype=float),
                confidence=float(obj["confidence"]),
            )
            if len(detection.bbox) != 4 or len(detection.frame_size) != 2:
                raise ValueError("bbox must have 4 entries, frame_size 2")
            detection.validate()
        except (KeyError, TypeError, ValueError) as exc:
            raise InputParseError(path, line_number, str(exc)) from exc
        dim = int(detection.embedding.shape[0])
        if expected_dim is None:
            expected_dim = dim
        elif dim != expected_dim:
            raise DimensionMismatch(
                f"{path}:{line_number}: embedding dimension {dim} != {expected_dim}"
            )
        detections.append(detection)
    return detections


def run_pipeline(
    detections: list[Detection],
    src_fps: float,
    src_frame_count: int,
    n_frames: int = 16,
    lam: float = DEFAULT_LAMBDA,
    cost_gate: float = DEFAULT_COST_GATE,
    max_age: int = DEFAULT_MAX_AGE,
) -> dict:
    """Full trajectory pass over one video's detections.

    Downsamples to the target rate, tracks on the planned frames, features
    each track over the downsampled frame count, clusters into main and
    background, and samples ``n_frames`` source frames snapped to main-face
    frames. Returns the serializable report dict.
    """
    plan = downsample_plan(src_fps, src_frame_count)
    planned = set(plan)
    by_frame: dict[int, list[Detection]] = {}
    for det in detections:
        if det.frame_idx in planned:
            by_frame.setdefault(det.frame_idx, []).append(det)
    frames = [by_frame.get(idx, []) for idx in plan]

    tracks = associate_tracks(frames, lam=lam, cost_gate=cost_gate, max_age=max_age)
    if not tracks:
        return {
            "tracks": [],
            "selected_frames": select_frames(src_frame_count, n_frames),
        }

    features = [(t.track_id, track_features(t, len(plan))) for t in tracks]
    selection = select_main_tracks(features)

    main_face_frames = {
        frame
        for track in tracks
        if track.track_id in selection.main_track_ids
        for frame in track.frames
    }
    selected = select_frames(src_frame_count, n_frames, main_face_frames)

    feature_by_id = dict(features)
    return {
        "tracks": [
            {
                "track_id": track.track_id,
                "frames": track.frames,
                "total_area": feature_by_id[track.track_id].total_area,
                "avg_cos": feature_by_id[track.track_id].avg_cos,
                "is_main": track.track_id in selection.main_track_ids,
            }
            for track in tracks
        ],
        "selected_frames": selected,
    }
