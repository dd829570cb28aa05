"""
Tests for result files and manifests
"""
import json
from datetime import datetime, timezone

import pytest
from pydantic import ValidationError

from hexloop.analysis import DecayFit, ScanPoint, ScanResult
from hexloop.errors import SchemaError, StorageError
from hexloop.mcmc import Measure, StatisticKind, TailEstimate
from storage.models import RunManifest, ScanRow
from storage.results import ResultStore, dumps_json, file_digest, get_result_store, manifest_path

STARTED = datetime(2024, 1, 1, tzinfo=timezone.utc)


def _tail(statistic="cluster"):
    return TailEstimate(statistic=statistic, k=[0, 1, 2], estimate=[1.0, 0.5, 0.125],
                        stderr=[0.0, 0.01, 0.005], n_samples=400)


def _scan():
    fit = DecayFit(c=0.2, C=0.9, ci_low=0.1, ci_high=0.3, k_min=0, k_max=12, n_points=13, residual=1.1)
    points = [
        ScanPoint(n=1.5, x=0.5, num_vertices=24, num_edges=30, fit=fit, xc=0.6, eps_line=0.58),
        ScanPoint(n=3.0, x=0.7, num_vertices=24, num_edges=30, fit=fit, xc=None, eps_line=0.59),
    ]
    return ScanResult(radius=1, statistic=StatisticKind.R, points=points)


def test_store_is_a_singleton():
    assert get_result_store() is ResultStore()


def test_manifest_path():
    assert manifest_path("out/tail.csv").name == "tail.csv.manifest.json"


def test_tail_round_trip(tmp_path):
    store = get_result_store()
    path = store.write_tail(tmp_path / "tail.csv", _tail())
    assert path.read_text().splitlines()[0] == "k,estimate,stderr,n_samples"
    back = store.read_tail(path)
    assert back.estimate == [1.0, 0.5, 0.125]
    assert back.n_samples == 400
    # without a manifest the statistic falls back to R
    assert back.statistic == StatisticKind.R


def test_tail_statistic_comes_from_manifest(tmp_path):
    store = get_result_store()
    path = store.write_tail(tmp_path / "tail.csv", _tail())
    store.write_manifest(path, "sample", {"stat": "cluster", "measure": "fk"}, 3, STARTED, 0.5)
    back = store.read_tail(path)
    assert back.statistic == StatisticKind.CLUSTER
    assert back.measure == Measure.FK


def test_manifest_records_digest(tmp_path):
    store = get_result_store()
    path = store.write_text(tmp_path / "report.json", "{}\n")
    extra = store.write_text(tmp_path / "extra.txt", "hello\n")
    manifest = store.write_manifest(path, "verify", {"suite": "eqz"}, None, STARTED, 1.25, extra_outputs=(extra,))
    assert manifest.outputs == {"report.json": file_digest(path), "extra.txt": file_digest(extra)}
    on_disk = json.loads(manifest_path(path).read_text())
    assert on_disk["subcommand"] == "verify"
    assert on_disk["seed"] is None
    assert store.read_manifest(path) == manifest
    assert store.read_manifest(tmp_path / "missing.csv") is None


def test_manifest_rejects_bad_digest():
    with pytest.raises(ValidationError):
        RunManifest(subcommand="fit", parameters={}, version="0", started_at=STARTED,
                    wall_clock_seconds=0.0, outputs={"a": "not-a-digest"})


def test_scan_round_trip(tmp_path):
    store = get_result_store()
    path = store.write_scan(tmp_path / "scan.csv", _scan())
    rows = store.read_scan(path)
    assert [r.n for r in rows] == [1.5, 3.0]
    assert rows[0].xc == 0.6
    assert rows[1].xc is None
    assert rows[0].k_max == 12


def test_scan_row_validation():
    with pytest.raises(ValidationError):
        ScanRow(n=1.0, x=0.5, num_vertices=1, num_edges=1, c=0, C=1, ci_low=0, ci_high=0,
                k_min=0, k_max=0, n_points=0, residual=0, inv_sqrt3=0.5, eps_line=0.6)


def test_wrong_header_is_a_schema_error(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("k,estimate\n0,1.0\n")
    with pytest.raises(SchemaError):
        get_result_store().read_tail(path)
    with pytest.raises(SchemaError):
        get_result_store().read_scan(path)


def test_invalid_rows_are_schema_errors(tmp_path):
    store = get_result_store()
    mixed = tmp_path / "mixed.csv"
    mixed.write_text("k,estimate,stderr,n_samples\n0,1.0,0.0,10\n1,0.5,0.1,20\n")
    with pytest.raises(SchemaError):
        store.read_tail(mixed)
    rising = tmp_path / "rising.csv"
    rising.write_text("k,estimate,stderr,n_samples\n0,0.5,0.0,10\n1,0.9,0.1,10\n")
    with pytest.raises(SchemaError):
        store.read_tail(rising)
    empty = tmp_path / "empty.csv"
    empty.write_text("k,estimate,stderr,n_samples\n")
    with pytest.raises(SchemaError):
        store.read_tail(empty)


def test_io_failures_are_storage_errors(tmp_path):
    store = get_result_store()
    with pytest.raises(StorageError):
        store.write_text(tmp_path, "cannot overwrite a directory")
    with pytest.raises(StorageError):
        store.read_tail(tmp_path / "missing.csv")


def test_json_is_sorted_and_terminated():
    text = dumps_json({"b": 1, "a": [1, 2]})
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert dumps_json(_tail()) == dumps_json(_tail())
