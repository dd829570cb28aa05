"""
Result file operations
Writes tail/scan tables as CSV, reports as JSON and a sha256 manifest per output
"""
import csv
import hashlib
import json
import logging
from datetime import datetime
from io import StringIO
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import BaseModel, ValidationError

from hexloop import __version__
from hexloop.analysis import ScanResult
from hexloop.errors import SchemaError, StorageError
from hexloop.mcmc import Measure, StatisticKind, TailEstimate
from storage.models import SCAN_COLUMNS, TAIL_COLUMNS, RunManifest, ScanRow, TailRow

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def manifest_path(output: PathLike) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def file_digest(path: PathLike) -> str:
    """sha256 of a file's bytes"""
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as e:
        logger.error(f"Cannot hash {path}: {e}")
        raise StorageError(f"Failed to read {path}: {e}")


def dumps_json(payload: Union[BaseModel, dict, list]) -> str:
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def tail_csv(tail: TailEstimate) -> str:
    """Tail estimate as CSV text"""
    output = StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(TAIL_COLUMNS)
    for k, p, se in zip(tail.k, tail.estimate, tail.stderr):
        writer.writerow([k, repr(float(p)), repr(float(se)), tail.n_samples])
    return output.getvalue()


def scan_csv(result: ScanResult) -> str:
    """Scan result as CSV text"""
    output = StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(SCAN_COLUMNS)
    for point in result.points:
        fit = point.fit
        writer.writerow([
            repr(point.n), repr(point.x), point.num_vertices, point.num_edges,
            repr(fit.c), repr(fit.C), repr(fit.ci_low), repr(fit.ci_high),
            fit.k_min, fit.k_max, fit.n_points, repr(fit.residual),
            "" if point.xc is None else repr(point.xc), repr(point.inv_sqrt3), repr(point.eps_line),
        ])
    return output.getvalue()


class ResultStore:
    """Reads and writes result files with manifests"""

    _instance: Optional["ResultStore"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    # ==================== Writers ====================

    def write_text(self, path: PathLike, text: str) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            logger.error(f"Error writing {path}: {e}")
            raise StorageError(f"Failed to write {path}: {e}")
        logger.info(f"Wrote {path}")
        return path

    def write_json(self, path: PathLike, payload: Union[BaseModel, dict, list]) -> Path:
        return self.write_text(path, dumps_json(payload))

    def write_tail(self, path: PathLike, tail: TailEstimate) -> Path:
        return self.write_text(path, tail_csv(tail))

    def write_scan(self, path: PathLike, result: ScanResult) -> Path:
        return self.write_text(path, scan_csv(result))

    def write_manifest(self, output: PathLike, subcommand: str, parameters: dict[str, Any],
                       seed: Optional[int], started_at: datetime, wall_clock_seconds: float,
                       extra_outputs: tuple[PathLike, ...] = ()) -> RunManifest:
        """Write <output>.manifest.json with digests of output and any extra files"""
        outputs = {Path(p).name: file_digest(p) for p in (output, *extra_outputs)}
        manifest = RunManifest(
            subcommand=subcommand,
            parameters=parameters,
            seed=seed,
            version=__version__,
            started_at=started_at,
            wall_clock_seconds=wall_clock_seconds,
            outputs=outputs,
        )
        self.write_json(manifest_path(output), manifest)
        return manifest

    # ==================== Readers ====================

    def _read_rows(self, path: PathLike, columns: tuple[str, ...]) -> list[dict[str, str]]:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            logger.error(f"Error reading {path}: {e}")
            raise StorageError(f"Failed to read {path}: {e}")
        reader = csv.DictReader(StringIO(text))
        if tuple(reader.fieldnames or ()) != columns:
            raise SchemaError(f"{path}: expected columns {', '.join(columns)}, got {reader.fieldnames}")
        return list(reader)

    def read_manifest(self, output: PathLike) -> Optional[RunManifest]:
        path = manifest_path(output)
        if not path.exists():
            return None
        try:
            return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise SchemaError(f"{path}: invalid manifest: {e}")

    def read_tail(self, path: PathLike) -> TailEstimate:
        """
        Tail CSV back into a TailEstimate

        The statistic and measure come from the sibling manifest when present.
        """
        try:
            rows = [TailRow(**row) for row in self._read_rows(path, TAIL_COLUMNS)]
        except ValidationError as e:
            raise SchemaError(f"{path}: invalid tail row: {e}")
        if not rows:
            raise SchemaError(f"{path}: no tail rows")
        if len({r.n_samples for r in rows}) != 1:
            raise SchemaError(f"{path}: n_samples differs between rows")

        statistic, measure = StatisticKind.R, Measure.LOOP
        manifest = self.read_manifest(path)
        if manifest is not None:
            statistic = StatisticKind(manifest.parameters.get("stat", statistic.value))
            measure = Measure(manifest.parameters.get("measure", measure.value))
        try:
            return TailEstimate(
                statistic=statistic,
                measure=measure,
                k=[r.k for r in rows],
                estimate=[r.estimate for r in rows],
                stderr=[r.stderr for r in rows],
                n_samples=rows[0].n_samples,
            )
        except ValidationError as e:
            raise SchemaError(f"{path}: {e}")

    def read_scan(self, path: PathLike) -> list[ScanRow]:
        try:
            return [ScanRow(**row) for row in self._read_rows(path, SCAN_COLUMNS)]
        except ValidationError as e:
            raise SchemaError(f"{path}: invalid scan row: {e}")


def get_result_store() -> ResultStore:
    """Get the result store instance"""
    return ResultStore()
