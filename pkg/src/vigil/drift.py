"""Model health: distribution drift statistics, daily verdicts, retrain
proposals.

Training data is summarized once into quantile-edge bins that stay frozen
for the model's lifetime, so every later comparison is like against like.
Recent samples are binned on those frozen edges (values outside fall into
the end bins), both sides carry an epsilon floor so the divergences stay
finite, and the Kolmogorov-Smirnov and Wasserstein statistics inside
evaluate_drift are computed from the binned representations. The
standalone ks_stat/wasserstein1 operate on raw samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
import statistics
import uuid

import numpy as np

from .detect import DetectorSpec
from .errors import (DegenerateDistribution, InsufficientData, InvalidInput,
                     InvalidState)
from .timeseries import empirical_quantile

EPSILON = 1e-6
DEFAULT_K_BINS = 10

VERDICT_HEALTHY = "healthy"
VERDICT_DRIFTED = "drifted"
VERDICT_QUIET = "quiet"
VERDICT_NOISY = "noisy"

PROPOSAL_TTL_MS = 24 * 3600 * 1000


@dataclass(frozen=True)
class DriftThresholds:
    ks: float = 0.2
    psi: float = 0.2
    kl: float = 0.5
    js: float = 0.1
    wasserstein_std_ratio: float = 0.5
    min_votes: int = 2
    quiet_days: int = 7
    noisy_daily_median: float = 50.0


@dataclass(frozen=True)
class DistributionSummary:
    bin_edges: tuple[float, ...]
    bin_probs: tuple[float, ...]
    sample_count: int
    mean: float
    std: float

    def __post_init__(self):
        if len(self.bin_edges) != len(self.bin_probs) + 1:
            raise InvalidInput("need one more edge than bins")
        if not all(a < b for a, b in zip(self.bin_edges, self.bin_edges[1:])):
            raise InvalidInput("bin edges must be strictly increasing")
        if abs(sum(self.bin_probs) - 1.0) > 1e-9:
            raise InvalidInput("bin probabilities must sum to 1")

    def to_dict(self) -> dict:
        return {"bin_edges": list(self.bin_edges),
                "bin_probs": list(self.bin_probs),
                "sample_count": self.sample_count,
                "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSummary":
        return cls(bin_edges=tuple(data["bin_edges"]),
                   bin_probs=tuple(data["bin_probs"]),
                   sample_count=data["sample_count"],
                   mean=data["mean"], std=data["std"])


@dataclass(frozen=True)
class DriftReport:
    model_id: str
    ks: float
    psi: float
    kl: float
    js: float
    wasserstein: float
    daily_alert_count: int
    verdict: str
    evaluated_at: int

    def __post_init__(self):
        stats = (self.ks, self.psi, self.kl, self.js, self.wasserstein)
        if any(s < 0 for s in stats):
            raise InvalidInput("drift statistics must be non-negative")
        if self.js > math.log(2) + 1e-9:
            raise InvalidInput("js divergence exceeds ln 2", js=self.js)

    def to_dict(self) -> dict:
        return {"model_id": self.model_id, "ks": self.ks, "psi": self.psi,
                "kl": self.kl, "js": self.js, "wasserstein": self.wasserstein,
                "daily_alert_count": self.daily_alert_count,
                "verdict": self.verdict, "evaluated_at": self.evaluated_at}

    @classmethod
    def from_dict(cls, data: dict) -> "DriftReport":
        return cls(**data)


def _floor_probs(probs: np.ndarray) -> np.ndarray:
    floored = np.maximum(probs, EPSILON)
    return floored / floored.sum()


def summarize(data, k_bins: int = DEFAULT_K_BINS) -> DistributionSummary:
    """Freeze a sample into quantile-edge bins with floored probabilities."""
    data = np.asarray(data, dtype=float)
    if len(data) < k_bins:
        raise InsufficientData("need at least one point per bin",
                               n=len(data), k_bins=k_bins)
    if len(np.unique(data)) < 2:
        raise DegenerateDistribution("all values identical; no distribution "
                                     "to bin")
    edges = np.unique([empirical_quantile(data, q)
                       for q in np.linspace(0.0, 1.0, k_bins + 1)])
    counts, _ = np.histogram(data, bins=edges)
    return DistributionSummary(
        bin_edges=tuple(float(e) for e in edges),
        bin_probs=tuple(float(p) for p in _floor_probs(counts / len(data))),
        sample_count=len(data),
        mean=float(np.mean(data)),
        std=float(np.std(data)),
    )


def bin_on_edges(summary: DistributionSummary, data) -> np.ndarray:
    """Bin a sample on the summary's frozen edges; outliers clip into the
    end bins; floored and renormalized."""
    data = np.asarray(data, dtype=float)
    if len(data) == 0:
        raise InvalidInput("empty sample")
    edges = np.asarray(summary.bin_edges)
    idx = np.searchsorted(edges, data, side="right") - 1
    idx = np.clip(idx, 0, len(edges) - 2)
    counts = np.bincount(idx, minlength=len(edges) - 1)
    return _floor_probs(counts / len(data))


def ks_stat(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic from raw samples."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise InvalidInput("samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / len(a)
    cdf_b = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(cdf_a - cdf_b)))


def psi(p: DistributionSummary, q_probs) -> float:
    """Population stability index between frozen bins and fresh probs."""
    q = np.asarray(q_probs, dtype=float)
    p_probs = np.asarray(p.bin_probs)
    if len(q) != len(p_probs):
        raise InvalidInput("bin count mismatch", train=len(p_probs),
                           recent=len(q))
    return float(np.sum((q - p_probs) * np.log(q / p_probs)))


def kl(p_probs, q_probs) -> float:
    p = np.asarray(p_probs, dtype=float)
    q = np.asarray(q_probs, dtype=float)
    if len(p) != len(q):
        raise InvalidInput("length mismatch", p=len(p), q=len(q))
    return float(np.sum(p * np.log(p / q)))


def js(p_probs, q_probs) -> float:
    p = np.asarray(p_probs, dtype=float)
    q = np.asarray(q_probs, dtype=float)
    if len(p) != len(q):
        raise InvalidInput("length mismatch", p=len(p), q=len(q))
    m = 0.5 * (p + q)
    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def wasserstein1(a, b) -> float:
    """Exact 1-Wasserstein distance between empirical distributions."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise InvalidInput("samples must be non-empty")
    grid = np.sort(np.concatenate([a, b]))
    deltas = np.diff(grid)
    cdf_a = np.searchsorted(a, grid[:-1], side="right") / len(a)
    cdf_b = np.searchsorted(b, grid[:-1], side="right") / len(b)
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


def _binned_ks(p_probs: np.ndarray, q_probs: np.ndarray) -> float:
    return float(np.max(np.abs(np.cumsum(p_probs) - np.cumsum(q_probs))))


def _binned_wasserstein(edges: np.ndarray, p_probs: np.ndarray,
                        q_probs: np.ndarray) -> float:
    # point masses at bin midpoints; W1 between discrete distributions on a
    # shared support is the cumulative-difference transport sum
    mids = 0.5 * (edges[:-1] + edges[1:])
    cum = np.cumsum(p_probs - q_probs)[:-1]
    return float(np.sum(np.abs(cum) * np.diff(mids)))


def evaluate_drift(model_id: str, train_summary: DistributionSummary,
                   recent, alert_counts, evaluated_at: int,
                   thresholds: DriftThresholds = DriftThresholds(),
                   ) -> DriftReport:
    """Compare recent data against the frozen training summary and grade
    the model.

    ``alert_counts`` holds one integer per day since activation, at most
    the trailing 7; fewer than 7 entries means the model is younger than
    a week and cannot be graded quiet.
    """
    recent = np.asarray(recent, dtype=float)
    if len(recent) < 100:
        raise InsufficientData("need at least 100 recent points",
                               n=len(recent))
    p = np.asarray(train_summary.bin_probs)
    q = bin_on_edges(train_summary, recent)
    edges = np.asarray(train_summary.bin_edges)

    ks_v = _binned_ks(p, q)
    psi_v = psi(train_summary, q)
    kl_v = kl(p, q)
    js_v = min(js(p, q), math.log(2))
    w_v = _binned_wasserstein(edges, p, q)

    votes = sum([ks_v > thresholds.ks,
                 psi_v > thresholds.psi,
                 kl_v > thresholds.kl,
                 js_v > thresholds.js,
                 w_v > thresholds.wasserstein_std_ratio * train_summary.std])
    counts = list(alert_counts)
    if votes >= thresholds.min_votes:
        verdict = VERDICT_DRIFTED
    elif (len(counts) >= thresholds.quiet_days
          and all(c == 0 for c in counts[-thresholds.quiet_days:])):
        verdict = VERDICT_QUIET
    elif counts and statistics.median(counts) > thresholds.noisy_daily_median:
        verdict = VERDICT_NOISY
    else:
        verdict = VERDICT_HEALTHY

    return DriftReport(
        model_id=model_id,
        ks=ks_v, psi=max(psi_v, 0.0), kl=max(kl_v, 0.0), js=max(js_v, 0.0),
        wasserstein=w_v,
        daily_alert_count=int(counts[-1]) if counts else 0,
        verdict=verdict,
        evaluated_at=int(evaluated_at),
    )


FP = "false_positive"
TP = "true_positive"


def refine_from_feedback(spec: DetectorSpec, feedback_outcomes,
                         verdict: str) -> tuple[DetectorSpec, float]:
    """Parameter refinement rule; returns (new spec, boundary scale).

    Scale > 1 widens the decision boundary (fewer alerts), < 1 tightens.
    A majority of false-positive feedback raises the hold tolerance one
    step (capped at L-1) and widens by 25%; a quiet verdict with no such
    majority tightens by 20%.
    """
    outcomes = list(feedback_outcomes)
    fp_rate = (sum(1 for o in outcomes if o == FP) / len(outcomes)
               if outcomes else 0.0)
    if outcomes and fp_rate >= 0.5:
        new_k = min(spec.hold_tolerance + 1, spec.hold_window - 1)
        return replace(spec, hold_tolerance=new_k), 1.25
    if verdict == VERDICT_QUIET:
        return spec, 0.8
    return spec, 1.0


PROPOSAL_PENDING = "pending"
PROPOSAL_APPROVED = "approved"
PROPOSAL_REJECTED = "rejected"
PROPOSAL_AUTO_APPLIED = "auto_applied"

_TERMINAL = {PROPOSAL_APPROVED, PROPOSAL_REJECTED, PROPOSAL_AUTO_APPLIED}


@dataclass
class RetrainProposal:
    proposal_id: str
    model_id: str
    old_version: int
    candidate_version: int
    preview: dict
    created_at: int
    expires_at: int
    status: str = PROPOSAL_PENDING
    spec_updates: dict = field(default_factory=dict)
    boundary_scale: float = 1.0
    artifact_ref: str | None = None
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.expires_at <= self.created_at:
            raise InvalidInput("proposal must expire after creation")

    def to_dict(self) -> dict:
        return {"proposal_id": self.proposal_id, "model_id": self.model_id,
                "old_version": self.old_version,
                "candidate_version": self.candidate_version,
                "preview": self.preview, "created_at": self.created_at,
                "expires_at": self.expires_at, "status": self.status,
                "spec_updates": self.spec_updates,
                "boundary_scale": self.boundary_scale,
                "artifact_ref": self.artifact_ref, "report": self.report}

    @classmethod
    def from_dict(cls, data: dict) -> "RetrainProposal":
        return cls(**data)


def new_proposal(report: DriftReport, old_version: int, preview: dict,
                 spec_updates: dict, boundary_scale: float,
                 now_ts: int, ttl_ms: int = PROPOSAL_TTL_MS,
                 ) -> RetrainProposal:
    if report.verdict == VERDICT_HEALTHY:
        raise InvalidState("healthy models get no retrain proposal",
                           model_id=report.model_id)
    return RetrainProposal(
        proposal_id=uuid.uuid4().hex,
        model_id=report.model_id,
        old_version=old_version,
        candidate_version=old_version + 1,
        preview=preview,
        created_at=int(now_ts),
        expires_at=int(now_ts) + ttl_ms,
        spec_updates=spec_updates,
        boundary_scale=boundary_scale,
        report=report.to_dict(),
    )


def apply_or_timeout(proposal: RetrainProposal, decision: str | None,
                     now_ts: int) -> str:
    """Advance a pending proposal; returns the resulting status.

    Explicit approve/reject always wins; with no decision the proposal
    auto-applies once the clock passes expiry, otherwise stays pending.
    """
    if proposal.status in _TERMINAL:
        raise InvalidState("proposal already decided",
                           proposal_id=proposal.proposal_id,
                           status=proposal.status)
    if decision is not None and decision not in ("approve", "reject"):
        raise InvalidInput("decision must be approve or reject",
                           decision=decision)
    if decision == "approve":
        proposal.status = PROPOSAL_APPROVED
    elif decision == "reject":
        proposal.status = PROPOSAL_REJECTED
    elif now_ts >= proposal.expires_at:
        proposal.status = PROPOSAL_AUTO_APPLIED
    return proposal.status
