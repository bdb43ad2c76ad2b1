"""File outputs: CSV reports, training history, connection maps."""

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from app.core.learning.training import EpochStats
from app.core.network.access import PilotPlan
from app.core.network.downlink import ClusterAssignment
from app.core.network.scenario import Scenario, UEDrop
from app.models.reports import EmpiricalCDF, EvalReport

logger = logging.getLogger(__name__)


def _header_lines(provenance: dict[str, object]) -> str:
    return "".join(f"# {key}={value}\n" for key, value in provenance.items())


def _write_frame(path: Path, frame: pd.DataFrame, provenance: dict[str, object]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(_header_lines(provenance))
        frame.to_csv(handle, index=False, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def read_frame(path: Path) -> pd.DataFrame:
    """Read back a CSV written here, skipping the provenance header."""
    return pd.read_csv(path, comment="#")


def report_frame(report: EvalReport) -> pd.DataFrame:
    """One row per test location: location, method, se_sum, connections, objective, se_ue_*."""
    rows = []
    for record in report.records:
        row = {
            "location": record.location,
            "method": record.method.value,
            "se_sum": record.se_sum,
            "connections": record.connections,
            "objective": record.objective,
        }
        row.update({f"se_ue_{k}": se for k, se in enumerate(record.se_per_ue)})
        rows.append(row)
    return pd.DataFrame(rows)


def _cdf_frame(cdf: EmpiricalCDF) -> pd.DataFrame:
    return pd.DataFrame({"value": cdf.values, "probability": cdf.probabilities})


def write_eval_report(report: EvalReport, output_dir: Path) -> dict[str, Path]:
    """Per-location records plus one CDF grid per reported statistic."""
    provenance = {
        "method": report.method.value,
        "config_hash": report.config_hash,
        "seed": report.seed,
    }
    stem = report.method.value
    paths = {
        "records": _write_frame(
            output_dir / f"{stem}_report.csv", report_frame(report), provenance
        ),
        "se_sum_cdf": _write_frame(
            output_dir / f"{stem}_se_sum_cdf.csv", _cdf_frame(report.se_sum_cdf), provenance
        ),
        "ue_se_cdf": _write_frame(
            output_dir / f"{stem}_ue_se_cdf.csv", _cdf_frame(report.ue_se_cdf), provenance
        ),
        "connections_cdf": _write_frame(
            output_dir / f"{stem}_connections_cdf.csv",
            _cdf_frame(report.connections_cdf),
            provenance,
        ),
    }
    logger.info(f"Wrote {stem} evaluation report to {output_dir}")
    return paths


def write_history(
    history: Sequence[EpochStats], path: Path, provenance: dict[str, object]
) -> Path:
    frame = pd.DataFrame(
        {
            "epoch": [h.epoch for h in history],
            "mean_reward": [h.mean_reward for h in history],
            "mean_se_sum": [h.mean_se_sum for h in history],
            "mean_connections": [h.mean_connections for h in history],
        }
    )
    return _write_frame(path, frame, provenance)


def write_connection_map(
    path: Path,
    scenario: Scenario,
    drop: UEDrop,
    clusters: ClusterAssignment,
    provenance: dict[str, object],
    plan: PilotPlan | None = None,
) -> Path:
    """
    Line records `AP x y`, `UE x y`, `LINK ap ue` (0-based indices).

    With a pilot plan, `PILOT ue master pilot` records follow the links.
    """
    lines = [_header_lines(provenance)]
    lines += [f"AP {x!r} {y!r}\n" for x, y in scenario.ap_positions.tolist()]
    lines += [f"UE {x!r} {y!r}\n" for x, y in drop.ue_positions.tolist()]
    lines += [f"LINK {ap} {ue}\n" for ap, ue in clusters.links()]
    if plan is not None:
        lines += [
            f"PILOT {entry['ue']} {entry['master']} {entry['pilot']}\n"
            for entry in plan.to_record()
        ]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(lines), encoding="utf-8")
    logger.info(f"Wrote connection map with {clusters.connections} links to {path}")
    return path


def _map_records(path: Path) -> list[list[str]]:
    return [
        line.split()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line and not line.startswith("#")
    ]


def read_connection_map(path: Path) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """Parse a connection map back into AP positions, UE positions and links."""
    aps, ues, links = [], [], []
    for kind, *fields in _map_records(path):
        if kind == "AP":
            aps.append((float(fields[0]), float(fields[1])))
        elif kind == "UE":
            ues.append((float(fields[0]), float(fields[1])))
        elif kind == "LINK":
            links.append((int(fields[0]), int(fields[1])))
    return np.array(aps), np.array(ues), links


def read_pilot_records(path: Path) -> list[dict[str, int]]:
    """The `PILOT` records of a connection map, in the layout of `PilotPlan.to_record`."""
    records = []
    for kind, *fields in _map_records(path):
        if kind == "PILOT":
            ue, master, pilot = (int(f) for f in fields)
            records.append({"ue": ue, "master": master, "pilot": pilot})
    return records
