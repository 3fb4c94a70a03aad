"""Event export: delimited output plus rendered summary figures.

CSV rows carry the stored fields and the ontology-generated description,
so an export is readable without the service.  Figures summarize per-camera
volume, volume over time, and concept mix; they render headlessly and are
written next to the delimited output.
"""

from __future__ import annotations

import csv
from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from ..events import SensorEvent
from ..learning import WINDOW_LENGTH_MS
from ..ontology import Ontology, format_timestamp

CSV_COLUMNS = (
    "event_id", "camera_id", "timestamp", "time_iso", "concept",
    "confidence", "source", "video_ref", "description",
)


def export_csv(events: list[SensorEvent], ontology: Ontology, out_fh) -> int:
    writer = csv.writer(out_fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for e in events:
        writer.writerow([
            e.event_id,
            e.camera_id,
            e.timestamp,
            format_timestamp(e.timestamp),
            e.concept,
            f"{e.confidence:.2f}",
            e.source,
            e.video_ref or "",
            ontology.describe_event(e),
        ])
    return len(events)


def render_figures(events: list[SensorEvent], out_dir, prefix: str = "export") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    by_camera = Counter(e.camera_id for e in events)
    fig, ax = plt.subplots(figsize=(8, 4))
    cameras = sorted(by_camera)
    ax.bar(cameras, [by_camera[c] for c in cameras], color="#3b6ea5")
    ax.set_title("Events per camera")
    ax.set_ylabel("events")
    ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    path = out_dir / f"{prefix}_events_per_camera.png"
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(8, 4))
    if events:
        windows = Counter(e.timestamp // WINDOW_LENGTH_MS for e in events)
        xs = sorted(windows)
        base = xs[0]
        ax.plot([(x - base) * 20 for x in xs], [windows[x] for x in xs],
                marker="o", color="#a53b3b")
    ax.set_title("Events per 20-minute window")
    ax.set_xlabel("minutes from first window")
    ax.set_ylabel("events")
    fig.tight_layout()
    path = out_dir / f"{prefix}_events_over_time.png"
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    by_concept = Counter(e.concept for e in events)
    fig, ax = plt.subplots(figsize=(8, 4))
    concepts = [c for c, _ in by_concept.most_common()]
    ax.barh(concepts[::-1], [by_concept[c] for c in concepts][::-1], color="#3ba55d")
    ax.set_title("Concept mix")
    ax.set_xlabel("events")
    fig.tight_layout()
    path = out_dir / f"{prefix}_concept_mix.png"
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    return paths
