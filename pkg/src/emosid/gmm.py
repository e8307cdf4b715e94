"""Diagonal-covariance Gaussian mixture models.

One mixture ("tag") is trained per (speaker, emotion) pair. Everything is
evaluated in the log domain; mixture likelihoods use log-sum-exp so that
far-out frames never underflow to -inf.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionError, EmptyUtteranceError, InsufficientDataError
from .features import FeatureMatrix

DEFAULT_MIXTURES = 16
DEFAULT_VARIANCE_FLOOR = 1e-4
DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITERS = 200

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GmmTag:
    """One trained mixture: weights, means and diagonal variances."""

    weights: np.ndarray  # (M,)
    means: np.ndarray  # (M, D)
    variances: np.ndarray  # (M, D), floored
    label: tuple = ("", "")  # (speaker_id, emotion_id)
    train_meta: dict = field(default_factory=dict)

    @property
    def num_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def log_component_densities(tag: GmmTag, x: np.ndarray) -> np.ndarray:
    """Log N(x | mu_i, diag(var_i)) for all components; x is (T, D) or (D,)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != tag.dim:
        raise DimensionError(f"feature dim {x.shape[1]} != model dim {tag.dim}")
    inv = 1.0 / tag.variances
    const = -0.5 * (tag.dim * _LOG_2PI + np.sum(np.log(tag.variances), axis=1))
    quad = (x ** 2) @ inv.T - 2.0 * (x @ (tag.means * inv).T) \
        + np.sum(tag.means ** 2 * inv, axis=1)
    return const - 0.5 * quad  # (T, M)


def log_component_density(tag: GmmTag, i: int, x: np.ndarray) -> float:
    """Log density of a single component at a single point."""
    return float(log_component_densities(tag, x)[0, i])


def log_mixture_density(tag: GmmTag, x: np.ndarray) -> np.ndarray:
    """log sum_i w_i b_i(x), via log-sum-exp. Returns (T,) (or scalar for 1-D x)."""
    scalar = np.asarray(x).ndim == 1
    out = logsumexp(log_component_densities(tag, x) + np.log(tag.weights), axis=1)
    return float(out[0]) if scalar else out


def responsibilities(tag: GmmTag, x: np.ndarray) -> np.ndarray:
    """Posterior component memberships; rows sum to 1."""
    scalar = np.asarray(x).ndim == 1
    logp = log_component_densities(tag, x) + np.log(tag.weights)
    logp -= logsumexp(logp, axis=1, keepdims=True)
    r = np.exp(logp)
    return r[0] if scalar else r


def _farthest_point_init(data: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Pick m spread-out data points as initial means (deterministic given rng)."""
    chosen = [int(rng.integers(len(data)))]
    d2 = np.sum((data - data[chosen[0]]) ** 2, axis=1)
    for _ in range(1, m):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((data - data[nxt]) ** 2, axis=1))
    return data[chosen].copy()


def em_fit(data, num_components: int = DEFAULT_MIXTURES, *, max_iters: int = DEFAULT_MAX_ITERS,
           tol: float = DEFAULT_TOL, variance_floor: float = DEFAULT_VARIANCE_FLOOR,
           seed: int = 0, label: tuple = ("", "")) -> GmmTag:
    """Train a diagonal GMM by expectation-maximization.

    Stops when the per-frame average log-likelihood improves by less than
    tol or max_iters is reached. Variances are floored after every M-step;
    iterations where the floor binds are recorded in train_meta, as are
    re-seeded starved components.
    """
    if isinstance(data, FeatureMatrix):
        data = data.data
    data = np.asarray(data, dtype=np.float64)
    t, dim = data.shape
    if t < num_components:
        raise InsufficientDataError(
            f"{t} frames < {num_components} components")

    rng = np.random.default_rng(seed)
    means = _farthest_point_init(data, num_components, rng)
    global_var = np.maximum(np.var(data, axis=0), variance_floor)
    variances = np.tile(global_var, (num_components, 1))
    weights = np.full(num_components, 1.0 / num_components)

    tag = GmmTag(weights=weights, means=means, variances=variances, label=label)
    history = []
    floor_iters = []
    starvation_events = []

    for it in range(max_iters):
        logb = log_component_densities(tag, data) + np.log(tag.weights)
        frame_ll = logsumexp(logb, axis=1)
        avg_ll = float(np.mean(frame_ll))
        history.append(avg_ll)
        if len(history) > 1 and history[-1] - history[-2] < tol:
            break

        resp = np.exp(logb - frame_ll[:, None])
        nk = resp.sum(axis=0)

        starved = np.nonzero(nk < 1e-8)[0]
        if len(starved):
            worst = np.argsort(frame_ll)
            for j, comp in enumerate(starved):
                tag.means[comp] = data[worst[j % t]]
                tag.variances[comp] = np.maximum(global_var, variance_floor)
                starvation_events.append({"iteration": it, "component": int(comp)})
            # redo the E-step with the repaired components
            logb = log_component_densities(tag, data) + np.log(tag.weights)
            frame_ll = logsumexp(logb, axis=1)
            resp = np.exp(logb - frame_ll[:, None])
            nk = resp.sum(axis=0)

        tag.weights = nk / t
        tag.means = (resp.T @ data) / nk[:, None]
        second = (resp.T @ (data ** 2)) / nk[:, None]
        variances = second - tag.means ** 2
        floored = np.any(variances < variance_floor)
        if floored:
            floor_iters.append(it)
        tag.variances = np.maximum(variances, variance_floor)

    tag.train_meta = {
        "iterations": len(history),
        "final_avg_log_likelihood": history[-1] if history else None,
        "seed": seed,
        "tol": tol,
        "variance_floor": variance_floor,
        "floor_iterations": floor_iters,
        "starvation_events": starvation_events,
        "log_likelihood_history": history,
    }
    return tag


def score_utterance(tag: GmmTag, features) -> float:
    """Average per-frame log-likelihood of an utterance under one tag."""
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    if data.shape[0] == 0:
        raise EmptyUtteranceError("cannot score an utterance with no frames")
    return float(np.mean(log_mixture_density(tag, data)))


@dataclass
class TagStore:
    """All trained tags, keyed by (speaker_id, emotion_id), with rosters."""

    tags: dict  # (speaker_id, emotion_id) -> GmmTag
    speaker_roster: list
    emotion_roster: list

    def __post_init__(self):
        for spk in self.speaker_roster:
            for emo in self.emotion_roster:
                if (spk, emo) not in self.tags:
                    raise DimensionError(f"missing tag for ({spk}, {emo})")
        dims = {tag.dim for tag in self.tags.values()}
        if len(dims) > 1:
            raise DimensionError(f"tags disagree on feature dim: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.speaker_roster) * len(self.emotion_roster)

    @property
    def dim(self) -> int:
        return next(iter(self.tags.values())).dim

    def ordered_tags(self):
        """Tags in (speaker roster x emotion roster) order."""
        return [self.tags[(spk, emo)]
                for spk in self.speaker_roster for emo in self.emotion_roster]


def gmm_identify(store: TagStore, features):
    """MAP speaker decision: per speaker, best score over its emotion tags.

    Returns (speaker_id, score_table) where score_table maps speaker to its
    score; ties go to roster order and are flagged.
    """
    if not store.speaker_roster:
        raise DimensionError("empty tag store")
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    if data.shape[0] and data.shape[1] != store.dim:
        raise DimensionError(f"feature dim {data.shape[1]} != store dim {store.dim}")

    scores = {}
    for spk in store.speaker_roster:
        scores[spk] = max(score_utterance(store.tags[(spk, emo)], features)
                          for emo in store.emotion_roster)
    best = max(store.speaker_roster, key=lambda s: scores[s])
    tie = sum(1 for s in store.speaker_roster if scores[s] == scores[best]) > 1
    return best, {"scores": scores, "tie": tie}
