"""CSV export, summary figures, and the CLI verbs that drive them."""

import csv
import io
import json

import yaml
from click.testing import CliRunner

from vigil.events import EventStore
from vigil.learning import WINDOW_LENGTH_MS
from vigil.service.cli import main
from vigil.service.report import CSV_COLUMNS, export_csv, render_figures
from conftest import BASE_TS, make_event


def sample_events():
    return [
        make_event("e1", camera_id="cam1", concept="theft",
                   timestamp=BASE_TS, confidence=0.9),
        make_event("e2", camera_id="cam2", concept="crowd",
                   timestamp=BASE_TS + WINDOW_LENGTH_MS, confidence=0.75,
                   video_ref="seg/7"),
        make_event("e3", camera_id="cam1", concept="crowd",
                   timestamp=BASE_TS + 2 * WINDOW_LENGTH_MS, confidence=0.6),
    ]


def test_csv_shape_and_content(seed_ontology):
    buf = io.StringIO()
    count = export_csv(sample_events(), seed_ontology, buf)
    assert count == 3
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == 4
    first = dict(zip(CSV_COLUMNS, rows[1]))
    assert first["event_id"] == "e1"
    assert first["confidence"] == "0.90"
    assert first["time_iso"].endswith("Z")
    assert first["video_ref"] == ""
    assert "cam1" in first["description"]
    second = dict(zip(CSV_COLUMNS, rows[2]))
    assert second["video_ref"] == "seg/7"


def test_csv_empty_store_still_has_header(seed_ontology):
    buf = io.StringIO()
    assert export_csv([], seed_ontology, buf) == 0
    assert buf.getvalue().strip() == ",".join(CSV_COLUMNS)


def test_figures_rendered(tmp_path):
    paths = render_figures(sample_events(), tmp_path, prefix="night")
    assert [p.name for p in paths] == [
        "night_events_per_camera.png",
        "night_events_over_time.png",
        "night_concept_mix.png",
    ]
    for p in paths:
        data = p.read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(data) > 1_000


def test_figures_tolerate_empty_input(tmp_path):
    paths = render_figures([], tmp_path)
    assert len(paths) == 3
    assert all(p.exists() for p in paths)


# -- CLI ----------------------------------------------------------------------

def seed_store(data_dir, ontology):
    store = EventStore(data_dir / "events", ontology)
    for e in sample_events():
        store.append(e)
    store.close()


def write_config(tmp_path, **extra):
    config_path = tmp_path / "service.yaml"
    body = {"data_dir": str(tmp_path / "data")}
    body.update(extra)
    config_path.write_text(yaml.safe_dump(body))
    return config_path


def test_export_cli_to_stdout(tmp_path, seed_ontology):
    config_path = write_config(tmp_path)
    seed_store(tmp_path / "data", seed_ontology)
    runner = CliRunner()
    result = runner.invoke(main, [
        "export", "--from", str(BASE_TS), "--to", str(BASE_TS + 10),
        "--config", str(config_path),
    ])
    assert result.exit_code == 0, result.output
    rows = list(csv.reader(io.StringIO(result.output)))
    assert rows[0] == list(CSV_COLUMNS)
    assert [r[0] for r in rows[1:]] == ["e1"]


def test_export_cli_filters_and_figures(tmp_path, seed_ontology):
    config_path = write_config(tmp_path)
    seed_store(tmp_path / "data", seed_ontology)
    out_path = tmp_path / "report" ; out_path.mkdir()
    out_file = out_path / "slice.csv"
    runner = CliRunner()
    result = runner.invoke(main, [
        "export", "--from", str(BASE_TS),
        "--to", str(BASE_TS + 3 * WINDOW_LENGTH_MS),
        "--camera", "cam1", "--concept", "crowd",
        "--out", str(out_file), "--figures",
        "--config", str(config_path),
    ])
    assert result.exit_code == 0, result.output
    rows = list(csv.reader(out_file.open()))
    assert [r[0] for r in rows[1:]] == ["e3"]
    for suffix in ("events_per_camera", "events_over_time", "concept_mix"):
        assert (out_path / f"slice_{suffix}.png").exists()


def test_export_cli_figures_need_out(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, [
        "export", "--from", "1", "--to", "2", "--figures",
    ])
    assert result.exit_code != 0
    assert "--figures requires --out" in result.output


def test_simulate_cli_writes_stream(tmp_path):
    script = tmp_path / "scenario.yaml"
    script.write_text(
        "seed: 3\n"
        f"duration_ms: {WINDOW_LENGTH_MS}\n"
        f"start_time_ms: {BASE_TS}\n"
        "cameras: [cam1]\n"
        "injections:\n"
        f"  - {{offset_ms: 1000, camera: cam1, concepts: [theft, crowd]}}\n"
    )
    runner = CliRunner()
    first = runner.invoke(main, ["simulate", "--script", str(script)])
    second = runner.invoke(main, ["simulate", "--script", str(script)])
    assert first.exit_code == 0, first.output
    assert first.stdout == second.stdout  # same seed, same bytes
    msgs = [json.loads(line) for line in first.stdout.splitlines()]
    assert [m["kind"] for m in msgs] == ["sensor_event", "sensor_event"]
    assert msgs[0]["payload"]["concept"] == "theft"

    out_file = tmp_path / "stream.ndjson"
    to_file = runner.invoke(main, [
        "simulate", "--script", str(script), "--out", str(out_file)])
    assert to_file.exit_code == 0
    assert out_file.read_text() == first.stdout


def test_simulate_cli_seed_override(tmp_path):
    script = tmp_path / "scenario.yaml"
    script.write_text(
        "seed: 3\n"
        f"duration_ms: {WINDOW_LENGTH_MS}\n"
        f"start_time_ms: {BASE_TS}\n"
        "cameras: [cam1]\n"
        "base_rates: [{concept: theft, rate: 4.0}]\n"
    )
    runner = CliRunner()
    a = runner.invoke(main, ["simulate", "--script", str(script), "--seed", "9"])
    b = runner.invoke(main, ["simulate", "--script", str(script), "--seed", "10"])
    assert a.exit_code == 0 and b.exit_code == 0
    assert a.stdout != b.stdout


def test_replay_cli_prints_board(tmp_path, seed_ontology):
    log = tmp_path / "capture.ndjson"
    lines = [
        json.dumps({"kind": "sensor_event", "seq": i, "payload": {
            "event_id": f"e{i}", "camera_id": "cam1",
            "timestamp": BASE_TS + i * 1000, "concept": "theft",
            "confidence": 0.8, "source": "machine"}})
        for i in range(1, 4)
    ]
    log.write_text("\n".join(lines) + "\n")
    config_path = write_config(tmp_path)
    runner = CliRunner()
    result = runner.invoke(main, [
        "replay", "--log", str(log), "--config", str(config_path)])
    assert result.exit_code == 0, result.output
    board = json.loads(result.stdout.strip())
    assert board["kind"] == "board_update"
    assert board["payload"]["cameras"][0]["camera_id"] == "cam1"
    assert "replayed 3 events" in result.stderr


def test_replay_cli_rejects_corrupt_log(tmp_path):
    log = tmp_path / "capture.ndjson"
    log.write_text('{"broken\n{"also": "broken"}\n')
    config_path = write_config(tmp_path)
    runner = CliRunner()
    result = runner.invoke(main, [
        "replay", "--log", str(log), "--config", str(config_path)])
    assert result.exit_code != 0
    assert "unreadable record" in result.output + result.stderr
