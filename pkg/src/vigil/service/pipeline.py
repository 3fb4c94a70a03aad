"""Single-threaded fusion core shared by the live server, pipe mode and replay.

All mutation funnels through this class in arrival order, so one input
stream has exactly one resulting state.  Time for scoring is event time:
the largest timestamp ingested so far.  That makes replaying a log
equivalent to having processed it live, and makes whole runs reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..events import (
    EventStore,
    OperatorAnnotation,
    SensorEvent,
    annotation_to_event,
    event_from_record,
    validate_annotation,
    validate_event,
)
from ..learning import WINDOW_LENGTH_MS, Baseline, ContextKey, SeverityModel, context_key
from ..ontology import Ontology
from ..patterns import IncrementalMatcher, Match, parse_pattern
from ..retex import (
    Feedback,
    Recommendation,
    RiskWeights,
    UnknownRecommendation,
    apply_feedback,
    compute_components,
    load_weights,
    rank_cameras,
    save_weights,
)
from .config import ServiceConfig

BASELINE_SNAP = "baseline.snap"
SEVERITY_SNAP = "severity.snap"
WEIGHTS_SNAP = "weights.snap"

LIVE_RECOMMENDATION_LIMIT = 64  # feedback accepted only against these


@dataclass(frozen=True)
class Alert:
    name: str
    match: Match
    camera_id: str


@dataclass(frozen=True)
class IngestResult:
    stored: bool  # False when the event was a duplicate resend
    alerts: tuple[Alert, ...] = ()


class FusionPipeline:
    def __init__(self, config: ServiceConfig, ontology: Ontology):
        self.config = config
        self.ontology = ontology
        data_dir = Path(config.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        self.data_dir = data_dir
        self.store = EventStore(data_dir / "events", ontology)

        baseline_path = data_dir / BASELINE_SNAP
        severity_path = data_dir / SEVERITY_SNAP
        weights_path = data_dir / WEIGHTS_SNAP
        self.baseline = (
            Baseline.load(baseline_path) if baseline_path.exists() else Baseline()
        )
        self.severity = (
            SeverityModel.load(severity_path, alpha=config.alpha)
            if severity_path.exists()
            else SeverityModel(alpha=config.alpha)
        )
        self.weights = load_weights(weights_path) if weights_path.exists() else RiskWeights()

        self.matchers: dict[str, IncrementalMatcher] = {}
        self.event_clock = self.store.max_timestamp()
        self._window_events: dict[str, list[SensorEvent]] = {}
        self._last_event_time: dict[str, int] = {}
        self._last_alert_time: dict[str, int] = {}
        self._recommendation_count = 0
        self._live: dict[str, Recommendation] = {}

    # -- patterns -------------------------------------------------------------

    def add_pattern(self, name: str, pattern_text: str) -> None:
        """Register or replace a named pattern; matching starts from now."""
        ast = parse_pattern(pattern_text, self.ontology)
        matcher = IncrementalMatcher(ast, self.ontology, pattern_text)
        self.matchers[name] = matcher

    # -- ingestion ------------------------------------------------------------

    def ingest_event(self, e: SensorEvent) -> IngestResult:
        validate_event(e)
        self.ontology.validate_term(e.concept)
        if e.event_id in self.store:
            return IngestResult(stored=False)  # resend of an already-applied event
        stale = e.timestamp < self.event_clock
        self.store.append(e)
        self.event_clock = max(self.event_clock, e.timestamp)
        self.baseline.update(e)
        self._last_event_time[e.camera_id] = max(
            self._last_event_time.get(e.camera_id, 0), e.timestamp
        )
        window = self._window_events.setdefault(e.camera_id, [])
        window.append(e)
        if len(window) >= 512:
            window_start = (self.event_clock // WINDOW_LENGTH_MS) * WINDOW_LENGTH_MS
            if window[0].timestamp < window_start:
                self._window_events[e.camera_id] = [
                    ev for ev in window if ev.timestamp >= window_start
                ]

        alerts: list[Alert] = []
        if not stale:  # late events are stored and counted but cannot re-open matchers
            for name, matcher in self.matchers.items():
                for match in matcher.feed(e):
                    self._last_alert_time[e.camera_id] = max(
                        self._last_alert_time.get(e.camera_id, 0), match.end
                    )
                    alerts.append(Alert(name, match, e.camera_id))
        return IngestResult(stored=True, alerts=tuple(alerts))

    def ingest_event_payload(self, payload: dict) -> IngestResult:
        return self.ingest_event(event_from_record(payload))

    def ingest_annotation(self, a: OperatorAnnotation) -> IngestResult:
        """Store the annotation as a human-source event and learn its severity."""
        validate_annotation(a)
        self.ontology.validate_term(a.concept)
        e = annotation_to_event(a)
        result = self.ingest_event(e)
        if result.stored:
            self.severity.update(context_key(e), a.severity)
        return result

    def apply_rating(self, camera_id: str, hour_bucket: int, concept: str,
                     rating: int) -> None:
        self.ontology.validate_term(concept)
        self.severity.update(ContextKey(camera_id, hour_bucket, concept), rating)

    def apply_feedback(self, recommendation_id: str, camera_id: str,
                       outcome: str, operator_id: str = "") -> RiskWeights:
        recommendation = self._live.get(recommendation_id)
        if recommendation is None:
            raise UnknownRecommendation(recommendation_id)
        fb = Feedback(recommendation_id, camera_id, outcome, operator_id,
                      timestamp=self.event_clock)
        self.weights = apply_feedback(self.weights, recommendation, fb,
                                      eta=self.config.eta)
        return self.weights

    # -- board ----------------------------------------------------------------

    def _current_window(self, camera_id: str) -> list[SensorEvent]:
        window_start = (self.event_clock // WINDOW_LENGTH_MS) * WINDOW_LENGTH_MS
        events = self._window_events.get(camera_id, [])
        kept = [e for e in events if e.timestamp >= window_start]
        self._window_events[camera_id] = kept
        return kept

    def compute_board(self) -> Recommendation:
        now = self.event_clock
        snapshot = {
            camera_id: compute_components(
                camera_id,
                now,
                self.baseline,
                self.severity,
                self._current_window(camera_id),
                self._last_alert_time.get(camera_id),
                self._last_event_time.get(camera_id),
            )
            for camera_id in self._last_event_time
        }
        self._recommendation_count += 1
        recommendation = rank_cameras(
            snapshot,
            self.weights,
            self.config.operators,
            recommendation_id=f"rec-{self._recommendation_count}",
            issued_at=now,
        )
        self._live[recommendation.recommendation_id] = recommendation
        while len(self._live) > LIVE_RECOMMENDATION_LIMIT:
            oldest = next(iter(self._live))
            del self._live[oldest]
        return recommendation

    # -- persistence ----------------------------------------------------------

    def snapshot_models(self) -> None:
        self.baseline.save(self.data_dir / BASELINE_SNAP)
        self.severity.save(self.data_dir / SEVERITY_SNAP)
        save_weights(self.weights, self.data_dir / WEIGHTS_SNAP)

    def close(self) -> None:
        self.store.close()
