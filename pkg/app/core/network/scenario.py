"""Deployment geometry: jittered-grid AP layout, uniform UE drops and 3D distances."""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from app.core.exceptions import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    """Fixed AP deployment inside a square area.

    Indices are 0-based; `ap_order` is the scheduling order used to chain the
    per-AP policy subchains.
    """

    ap_positions: np.ndarray  # (L, 2) meters
    area_side: float
    height_diff: float
    antennas: int
    ap_order: np.ndarray  # permutation of 0..L-1
    grid_side: int
    jitter_fraction: float
    seed: int | None = None

    @property
    def num_aps(self) -> int:
        return int(self.ap_positions.shape[0])

    def to_record(self) -> dict[str, Any]:
        """Plain-data record that replays the layout bit-exactly."""
        return {
            "ap_positions": self.ap_positions.tolist(),
            "area_side": self.area_side,
            "height_diff": self.height_diff,
            "antennas": self.antennas,
            "ap_order": self.ap_order.tolist(),
            "grid_side": self.grid_side,
            "jitter_fraction": self.jitter_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "Scenario":
        return cls(
            ap_positions=np.asarray(record["ap_positions"], dtype=float),
            area_side=float(record["area_side"]),
            height_diff=float(record["height_diff"]),
            antennas=int(record["antennas"]),
            ap_order=np.asarray(record["ap_order"], dtype=int),
            grid_side=int(record["grid_side"]),
            jitter_fraction=float(record["jitter_fraction"]),
            seed=record.get("seed"),
        )


@dataclass(frozen=True)
class UEDrop:
    """One realization of K UE positions."""

    ue_positions: np.ndarray  # (K, 2) meters
    area_side: float

    @property
    def num_ues(self) -> int:
        return int(self.ue_positions.shape[0])

    def to_record(self) -> dict[str, Any]:
        return {
            "ue_positions": self.ue_positions.tolist(),
            "area_side": self.area_side,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "UEDrop":
        return cls(
            ue_positions=np.asarray(record["ue_positions"], dtype=float),
            area_side=float(record["area_side"]),
        )


def place_aps(
    grid_side: int,
    area_side: float,
    jitter_fraction: float,
    rng: np.random.Generator,
    height_diff: float = 10.0,
    antennas: int = 4,
    seed: int | None = None,
) -> Scenario:
    """
    Place grid_side² APs on a jittered grid.

    Each AP starts at its cell center and is displaced per axis by
    Uniform(-j*s/2, +j*s/2), s being the grid spacing; positions are then
    clamped into the area. The scheduling order is row-major.
    """
    if grid_side < 1:
        raise ParameterError(f"grid_side must be >= 1, got {grid_side}")
    if area_side <= 0:
        raise ParameterError(f"area_side must be positive, got {area_side}")
    if not 0.0 <= jitter_fraction <= 1.0:
        raise ParameterError(f"jitter_fraction must lie in [0, 1], got {jitter_fraction}")
    if height_diff < 0:
        raise ParameterError(f"height_diff must be >= 0, got {height_diff}")
    if antennas < 1:
        raise ParameterError(f"antennas must be >= 1, got {antennas}")

    spacing = area_side / grid_side
    centers = (np.arange(grid_side) + 0.5) * spacing
    rows, cols = np.meshgrid(centers, centers, indexing="ij")
    # row-major: AP index = row * grid_side + col, x follows the column
    grid = np.column_stack([cols.ravel(), rows.ravel()])

    if jitter_fraction > 0:
        half = jitter_fraction * spacing / 2.0
        grid = grid + rng.uniform(-half, half, size=grid.shape)
    positions = np.clip(grid, 0.0, area_side)

    logger.debug(f"Placed {positions.shape[0]} APs (spacing {spacing:.1f} m)")
    return Scenario(
        ap_positions=positions,
        area_side=float(area_side),
        height_diff=float(height_diff),
        antennas=int(antennas),
        ap_order=np.arange(grid_side * grid_side),
        grid_side=int(grid_side),
        jitter_fraction=float(jitter_fraction),
        seed=seed,
    )


def sample_ue_drop(num_ues: int, area_side: float, rng: np.random.Generator) -> UEDrop:
    """Drop K UEs uniformly in the square area."""
    if num_ues < 1:
        raise ParameterError(f"K must be >= 1, got {num_ues}")
    if area_side <= 0:
        raise ParameterError(f"area_side must be positive, got {area_side}")
    positions = rng.uniform(0.0, area_side, size=(num_ues, 2))
    return UEDrop(ue_positions=positions, area_side=float(area_side))


def distance_3d(ap: np.ndarray, ue: np.ndarray, height_diff: float) -> float:
    """Euclidean AP-UE distance including the vertical offset."""
    if height_diff < 0:
        raise ParameterError(f"height_diff must be >= 0, got {height_diff}")
    planar = np.asarray(ap, dtype=float) - np.asarray(ue, dtype=float)
    return float(np.sqrt(planar @ planar + height_diff**2))


def distance_matrix(scenario: Scenario, drop: UEDrop) -> np.ndarray:
    """L x K matrix of 3D distances."""
    diff = scenario.ap_positions[:, None, :] - drop.ue_positions[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=-1) + scenario.height_diff**2)
