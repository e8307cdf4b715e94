"""The GMM -> DNN cascade.

Utterances are cut into overlapping segments of T frames; each segment is
scored against every (speaker, emotion) tag to form a likelihood vector,
which the DNN maps to a speaker posterior. Segment posteriors are averaged
into the utterance decision. The DNN-alone ablation replaces the
likelihood vector with pooled MFCC statistics (mean and std per
coefficient over the segment).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dnn as dnn_mod
from . import gmm as gmm_mod
from .errors import ConfigError, DimensionError
from .features import FeatureMatrix
from .gmm import TagStore

DEFAULT_SEGMENT_FRAMES = 100
DEFAULT_SEGMENT_OVERLAP = 0.5


@dataclass(frozen=True)
class SegmentPlan:
    frames_per_segment: int = DEFAULT_SEGMENT_FRAMES
    overlap_fraction: float = DEFAULT_SEGMENT_OVERLAP

    def __post_init__(self):
        if self.frames_per_segment < 1:
            raise ValueError("frames_per_segment must be >= 1")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError("overlap_fraction must be in [0, 1)")

    @property
    def hop(self) -> int:
        return max(1, round(self.frames_per_segment * (1.0 - self.overlap_fraction)))


@dataclass(frozen=True)
class LikelihoodVector:
    """Average log-likelihood of one segment against every tag, roster order."""

    values: np.ndarray
    segment_meta: dict = field(default_factory=dict)


def segment(features: FeatureMatrix, plan: SegmentPlan):
    """Split an utterance into frame spans [(start, stop), ...].

    Full segments of T frames at stride hop; a trailing remainder of at
    least T/2 frames that extends past the last full segment is kept;
    anything shorter is dropped. Utterances below T frames come back as a
    single short segment.
    """
    n = features.num_frames
    if n == 0:
        raise DimensionError("cannot segment an empty utterance")
    t = plan.frames_per_segment
    if n < t:
        return [(0, n)]
    spans = []
    start = 0
    while start + t <= n:
        spans.append((start, start + t))
        start += plan.hop
    last_end = spans[-1][1]
    if last_end < n and n - start >= t / 2:
        spans.append((start, n))
    return spans


def segment_views(features: FeatureMatrix, plan: SegmentPlan):
    """Segments as FeatureMatrix views sharing the parent's storage."""
    return [FeatureMatrix(data=features.data[a:b], meta=features.meta)
            for a, b in segment(features, plan)]


def likelihood_vector(store: TagStore, seg: FeatureMatrix,
                      segment_meta: dict | None = None) -> LikelihoodVector:
    """Score one segment against all tags in roster order."""
    if seg.num_coeffs != store.dim:
        raise DimensionError(f"feature dim {seg.num_coeffs} != store dim {store.dim}")
    values = np.array([gmm_mod.score_utterance(tag, seg)
                       for tag in store.ordered_tags()])
    return LikelihoodVector(values=values, segment_meta=segment_meta or {})


def pooled_mfcc_stats(seg: FeatureMatrix) -> np.ndarray:
    """Mean and standard deviation per coefficient: the DNN-alone input."""
    return np.concatenate([seg.data.mean(axis=0), seg.data.std(axis=0)])


def _aggregate(posteriors: np.ndarray, mode: str) -> np.ndarray:
    if mode == "mean":
        return posteriors.mean(axis=0)
    if mode == "geometric":
        logp = np.log(np.maximum(posteriors, 1e-300)).mean(axis=0)
        logp -= logp.max()
        p = np.exp(logp)
        return p / p.sum()
    raise ConfigError(f"unknown aggregation mode {mode!r}")


@dataclass(frozen=True)
class Decision:
    speaker_id: str
    posterior: np.ndarray  # over the speaker roster
    per_segment: list  # per-segment posteriors (and spans)
    tie: bool = False


def _decide(posteriors, spans, roster, aggregation) -> Decision:
    posteriors = np.asarray(posteriors)
    utt_posterior = _aggregate(posteriors, aggregation)
    best = int(np.argmax(utt_posterior))
    tie = int(np.sum(utt_posterior == utt_posterior[best])) > 1
    per_segment = [{"span": list(span), "posterior": p.tolist()}
                   for span, p in zip(spans, posteriors)]
    return Decision(speaker_id=roster[best], posterior=utt_posterior,
                    per_segment=per_segment, tie=tie)


def classify(store: TagStore, model: dnn_mod.DnnModel, features: FeatureMatrix,
             plan: SegmentPlan | None = None, aggregation: str = "mean") -> Decision:
    """Full cascade: likelihood vectors -> DNN -> averaged speaker posterior."""
    plan = plan or SegmentPlan()
    if model.input_size != len(store):
        raise ConfigError(
            f"DNN input size {model.input_size} != tag count {len(store)}")
    if model.output_size != len(store.speaker_roster):
        raise ConfigError(
            f"DNN output size {model.output_size} != speaker count "
            f"{len(store.speaker_roster)}")
    spans = segment(features, plan)
    vectors = np.stack([
        likelihood_vector(store, FeatureMatrix(features.data[a:b], features.meta)).values
        for a, b in spans])
    posteriors, _ = dnn_mod.forward(model, vectors)
    return _decide(np.atleast_2d(posteriors), spans, store.speaker_roster, aggregation)


def classify_dnn_only(model: dnn_mod.DnnModel, features: FeatureMatrix,
                      plan: SegmentPlan | None = None, roster: list | None = None,
                      aggregation: str = "mean") -> Decision:
    """Ablation: the DNN consumes pooled MFCC statistics per segment."""
    plan = plan or SegmentPlan()
    expected = 2 * features.num_coeffs
    if model.input_size != expected:
        raise ConfigError(
            f"DNN input size {model.input_size} != pooled stat size {expected}")
    spans = segment(features, plan)
    stats = np.stack([pooled_mfcc_stats(FeatureMatrix(features.data[a:b], features.meta))
                      for a, b in spans])
    posteriors, _ = dnn_mod.forward(model, stats)
    roster = roster or [str(k) for k in range(model.output_size)]
    return _decide(np.atleast_2d(posteriors), spans, roster, aggregation)
