"""vigil: security-event fusion for camera networks.

Machine labeling events and operator annotations, expressed against a
shared concept hierarchy, flow into an append-only store; long-term
normality baselines, a rating-supervised severity model and temporal
sequence patterns combine into a live camera-priority board that adapts
to operator accept/dismiss feedback.
"""

from .events import (
    CameraMeta,
    DuplicateEventIdError,
    EventStore,
    InvalidEventError,
    OperatorAnnotation,
    RetentionPolicy,
    SensorEvent,
    StoreError,
    SweepReport,
    annotation_to_event,
)
from .learning import (
    Baseline,
    ContextKey,
    InvalidRating,
    SeverityModel,
    WINDOW_LENGTH_MS,
    context_key,
    hour_bucket,
)
from .ontology import (
    Concept,
    Ontology,
    OntologyError,
    UnknownConceptError,
    format_timestamp,
    load_ontology,
    load_ontology_file,
    load_seed_ontology,
    serialize_ontology,
)
from .patterns import (
    IncrementalMatcher,
    Match,
    OutOfOrderEvent,
    PatternError,
    PatternSyntaxError,
    Seq,
    Term,
    format_pattern,
    match_events,
    parse_pattern,
)
from .retex import (
    CameraNotOnBoard,
    CameraRisk,
    Components,
    Feedback,
    InvalidBudget,
    Recommendation,
    RiskWeights,
    UnknownRecommendation,
    apply_feedback,
    compute_components,
    explain,
    rank_cameras,
)
from .service import (
    FusionPipeline,
    Message,
    ScenarioScript,
    ServiceConfig,
    generate_events,
    load_config,
    parse_message,
    serialize_message,
)

__version__ = "0.1.0"

__all__ = [
    "Baseline",
    "CameraMeta",
    "CameraNotOnBoard",
    "CameraRisk",
    "Components",
    "Concept",
    "ContextKey",
    "DuplicateEventIdError",
    "EventStore",
    "Feedback",
    "FusionPipeline",
    "IncrementalMatcher",
    "InvalidBudget",
    "InvalidEventError",
    "InvalidRating",
    "Match",
    "Message",
    "OperatorAnnotation",
    "Ontology",
    "OntologyError",
    "OutOfOrderEvent",
    "PatternError",
    "PatternSyntaxError",
    "Recommendation",
    "RetentionPolicy",
    "RiskWeights",
    "ScenarioScript",
    "SensorEvent",
    "Seq",
    "ServiceConfig",
    "SeverityModel",
    "StoreError",
    "SweepReport",
    "Term",
    "UnknownConceptError",
    "UnknownRecommendation",
    "WINDOW_LENGTH_MS",
    "annotation_to_event",
    "apply_feedback",
    "compute_components",
    "context_key",
    "explain",
    "format_pattern",
    "format_timestamp",
    "generate_events",
    "hour_bucket",
    "load_config",
    "load_ontology",
    "load_ontology_file",
    "load_seed_ontology",
    "match_events",
    "parse_message",
    "parse_pattern",
    "rank_cameras",
    "serialize_message",
    "serialize_ontology",
    "__version__",
]
