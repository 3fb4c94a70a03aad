"""Camera prioritization and the operator feedback loop.

Per camera, four bounded risk components (anomaly, predicted severity,
pattern-alert recency, event recency) combine linearly under a weight
vector into a risk score.  The top cameras under the attention budget
(16 per operator) form the board.  Operator accept/dismiss feedback on a
board entry drives a multiplicative-weights update of the component
weights, so components that predict operator interest gain influence.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp

from .learning import Baseline, SeverityModel, context_key, hour_bucket
from .snapshots import read_snapshot, write_snapshot

ATTENTION_PER_OPERATOR = 16
PATTERN_DECAY_MS = 600_000
RECENCY_DECAY_MS = 1_200_000
DEFAULT_ETA = 0.1
WEIGHTS_SNAPSHOT_VERSION = 1

COMPONENT_NAMES = ("anomaly", "severity", "pattern", "recency")


class RetexError(Exception):
    pass


class InvalidBudget(RetexError):
    def __init__(self, operators):
        super().__init__(f"operators must be >= 1, got {operators!r}")


class InvalidWeights(RetexError):
    pass


class UnknownRecommendation(RetexError):
    def __init__(self, recommendation_id):
        super().__init__(f"no live recommendation {recommendation_id!r}")
        self.recommendation_id = recommendation_id


class CameraNotOnBoard(RetexError):
    def __init__(self, camera_id):
        super().__init__(f"camera {camera_id!r} is not on the recommended board")
        self.camera_id = camera_id


class InvalidOutcome(RetexError):
    def __init__(self, outcome):
        super().__init__(f"outcome {outcome!r} must be accept or dismiss")


@dataclass(frozen=True)
class RiskWeights:
    w_anomaly: float = 0.25
    w_severity: float = 0.25
    w_pattern: float = 0.25
    w_recency: float = 0.25

    def __post_init__(self):
        values = self.as_tuple()
        if any(w <= 0 for w in values):
            raise InvalidWeights(f"weights must be strictly positive: {values}")
        if abs(sum(values) - 1.0) > 1e-9:
            raise InvalidWeights(f"weights must sum to 1: {values}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w_anomaly, self.w_severity, self.w_pattern, self.w_recency)


@dataclass(frozen=True)
class Components:
    anomaly: float
    severity: float
    pattern: float
    recency: float

    def __post_init__(self):
        for name, v in zip(COMPONENT_NAMES, self.as_tuple()):
            if not (0.0 <= v <= 1.0):
                raise RetexError(f"component {name} = {v} outside [0,1]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.anomaly, self.severity, self.pattern, self.recency)


@dataclass(frozen=True)
class CameraRisk:
    camera_id: str
    components: Components
    risk: float
    rank: int


@dataclass(frozen=True)
class Recommendation:
    recommendation_id: str
    issued_at: int
    cameras: tuple[CameraRisk, ...]
    budget: int
    weights: RiskWeights

    def entry(self, camera_id: str) -> CameraRisk:
        for cr in self.cameras:
            if cr.camera_id == camera_id:
                return cr
        raise CameraNotOnBoard(camera_id)


@dataclass(frozen=True)
class Feedback:
    recommendation_id: str
    camera_id: str
    outcome: str  # accept | dismiss
    operator_id: str = ""
    timestamp: int = 0

    def __post_init__(self):
        if self.outcome not in ("accept", "dismiss"):
            raise InvalidOutcome(self.outcome)


def compute_components(camera_id: str, now: int, baseline: Baseline,
                       severity_model: SeverityModel,
                       window_events: list,
                       last_alert_time: int | None,
                       last_event_time: int | None) -> Components:
    """Bounded risk components for one camera at event-time ``now``.

    window_events: this camera's events in the current 20-minute window.
    Severity takes the most severe predicted context among them; with an
    empty window it falls back to the prior expectation (2.0 -> 0.5).
    """
    hour = hour_bucket(now)
    a = baseline.anomaly_score(camera_id, hour, window_events)
    anomaly = a / (1.0 + a)

    if window_events:
        expectation = max(
            severity_model.predict(context_key(e))[1] for e in window_events
        )
    else:
        expectation = 2.0  # uniform-prior expectation: nothing observed to judge
    severity = expectation / 4.0

    if last_alert_time is None:
        pattern = 0.0
    else:
        pattern = exp(-max(0, now - last_alert_time) / PATTERN_DECAY_MS)

    if last_event_time is None:
        recency = 0.0
    else:
        recency = exp(-max(0, now - last_event_time) / RECENCY_DECAY_MS)

    return Components(anomaly, severity, pattern, recency)


def risk_score(weights: RiskWeights, components: Components) -> float:
    return sum(w * c for w, c in zip(weights.as_tuple(), components.as_tuple()))


def rank_cameras(snapshot: dict[str, Components], weights: RiskWeights,
                 operators: int, *, recommendation_id: str,
                 issued_at: int) -> Recommendation:
    """Board of the top-risk cameras under the attention budget.

    budget = 16 x operators; ordering by risk descending, ties by camera id.
    An empty snapshot yields an empty board.
    """
    if not isinstance(operators, int) or isinstance(operators, bool) or operators < 1:
        raise InvalidBudget(operators)
    budget = ATTENTION_PER_OPERATOR * operators
    scored = sorted(
        ((camera_id, comps, risk_score(weights, comps))
         for camera_id, comps in snapshot.items()),
        key=lambda row: (-row[2], row[0]),
    )
    board = tuple(
        CameraRisk(camera_id, comps, risk, rank)
        for rank, (camera_id, comps, risk) in enumerate(scored[:budget], start=1)
    )
    return Recommendation(recommendation_id, issued_at, board, budget, weights)


def apply_feedback(weights: RiskWeights, recommendation: Recommendation,
                   feedback: Feedback, eta: float = DEFAULT_ETA) -> RiskWeights:
    """Multiplicative-weights update from one accept/dismiss signal.

    w_i <- w_i * exp(eta * s * c_i), renormalized; s is +1 for accept,
    -1 for dismiss, c the camera's component vector.
    """
    if feedback.recommendation_id != recommendation.recommendation_id:
        raise UnknownRecommendation(feedback.recommendation_id)
    entry = recommendation.entry(feedback.camera_id)
    s = 1.0 if feedback.outcome == "accept" else -1.0
    raw = [
        w * exp(eta * s * c)
        for w, c in zip(weights.as_tuple(), entry.components.as_tuple())
    ]
    total = sum(raw)
    return RiskWeights(*(w / total for w in raw))


def explain(recommendation: Recommendation, camera_id: str) -> str:
    """Component breakdown for one board entry; contributions sum to the risk."""
    entry = recommendation.entry(camera_id)
    weights = recommendation.weights.as_tuple()
    values = entry.components.as_tuple()
    lines = [
        f"camera {camera_id} risk {entry.risk:.3f} (rank {entry.rank})"
    ]
    for name, value, weight in zip(COMPONENT_NAMES, values, weights):
        lines.append(
            f"  {name:<8} value {value:.3f} x weight {weight:.3f} = {value * weight:.3f}"
        )
    return "\n".join(lines)


def save_weights(weights: RiskWeights, path) -> None:
    record = dict(zip(
        ("w_anomaly", "w_severity", "w_pattern", "w_recency"), weights.as_tuple()
    ))
    write_snapshot(path, WEIGHTS_SNAPSHOT_VERSION, [record])


def load_weights(path) -> RiskWeights:
    records = read_snapshot(path, WEIGHTS_SNAPSHOT_VERSION)
    if len(records) != 1:
        raise InvalidWeights(f"{path}: expected exactly one weights record")
    r = records[0]
    return RiskWeights(r["w_anomaly"], r["w_severity"], r["w_pattern"], r["w_recency"])
