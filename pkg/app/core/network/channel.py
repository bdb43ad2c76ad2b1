"""Large-scale fading (3GPP microcell path loss + correlated shadowing) and Rayleigh draws."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from app.core.exceptions import NumericalError, ParameterError
from app.core.network.scenario import Scenario, UEDrop, distance_matrix

logger = logging.getLogger(__name__)

FC_VALID_RANGE_GHZ = (2.0, 6.0)
COVARIANCE_JITTER = 1e-10


@dataclass(frozen=True)
class ShadowModel:
    """Log-normal shadowing with exponential inter-UE correlation."""

    sigma_sf: float = 4.0  # dB
    delta_sf: float = 9.0  # correlation length, m

    def __post_init__(self) -> None:
        if self.sigma_sf < 0:
            raise ParameterError(f"sigma_sf must be >= 0, got {self.sigma_sf}")
        if self.delta_sf <= 0:
            raise ParameterError(f"delta_sf must be positive, got {self.delta_sf}")


@dataclass(frozen=True)
class LargeScaleRealization:
    """β (linear), shadowing and path loss (dB) between every AP and UE, shape L x K."""

    beta: np.ndarray
    shadow_db: np.ndarray
    pathloss_db: np.ndarray

    @property
    def beta_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.beta)

    @property
    def shape(self) -> tuple[int, int]:
        return self.beta.shape

    @classmethod
    def from_beta(cls, beta: np.ndarray) -> "LargeScaleRealization":
        """Wrap a hand-built β matrix (no shadowing, path loss = -β_dB)."""
        beta = np.asarray(beta, dtype=float)
        if np.any(beta <= 0):
            raise ParameterError("beta entries must be positive")
        return cls(
            beta=beta,
            shadow_db=np.zeros_like(beta),
            pathloss_db=-10.0 * np.log10(beta),
        )

    def to_csv(self, path: Path) -> None:
        """Dump linear β with one row per AP and one column per UE."""
        frame = pd.DataFrame(
            self.beta,
            index=pd.Index(range(self.beta.shape[0]), name="ap"),
            columns=[f"ue_{k}" for k in range(self.beta.shape[1])],
        )
        frame.to_csv(path)


def path_loss_db(d: float | np.ndarray, fc: float) -> float | np.ndarray:
    """3GPP urban microcell NLoS path loss in dB (distance in m, carrier in GHz)."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0):
        raise ParameterError("distance must be positive")
    if fc <= 0:
        raise ParameterError(f"carrier frequency must be positive, got {fc}")
    lo, hi = FC_VALID_RANGE_GHZ
    if not lo <= fc <= hi:
        logger.warning(f"Carrier {fc} GHz outside the model validity range {lo}-{hi} GHz")
    loss = 36.7 * np.log10(d_arr) + 22.7 + 26.0 * np.log10(fc)
    return float(loss) if np.ndim(loss) == 0 else loss


def shadow_covariance(drop: UEDrop, model: ShadowModel) -> np.ndarray:
    """K x K covariance (dB²) of the shadowing seen by the UEs at one AP."""
    if drop.num_ues < 1:
        raise ParameterError("drop must contain at least one UE")
    diff = drop.ue_positions[:, None, :] - drop.ue_positions[None, :, :]
    d = np.sqrt(np.sum(diff**2, axis=-1))
    return model.sigma_sf**2 * np.power(2.0, -d / model.delta_sf)


def sample_shadow(cov: np.ndarray, num_aps: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw L independent rows, each zero-mean Gaussian with covariance `cov`.

    UEs with identical covariance rows (co-located) share one column. A
    diagonal jitter is added only when the plain factorization fails.
    """
    cov = np.asarray(cov, dtype=float)
    num_ues = cov.shape[0]
    if not np.any(cov):
        return np.zeros((num_aps, num_ues))
    _, first, inverse = np.unique(cov, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    keep = first[order]
    reduced = cov[np.ix_(keep, keep)]
    try:
        factor = np.linalg.cholesky(reduced)
    except np.linalg.LinAlgError:
        logger.debug(f"Shadow covariance of {keep.size} UEs needs a {COVARIANCE_JITTER} jitter")
        try:
            factor = np.linalg.cholesky(reduced + COVARIANCE_JITTER * np.eye(keep.size))
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"shadow covariance is not positive semidefinite: {e}") from e
    white = rng.standard_normal((num_aps, keep.size))
    return (white @ factor.T)[:, rank[np.ravel(inverse)]]


def large_scale(
    scenario: Scenario, drop: UEDrop, shadow_db: np.ndarray, fc: float
) -> LargeScaleRealization:
    """Combine path loss at the 3D distances with a shadowing draw."""
    shadow_db = np.asarray(shadow_db, dtype=float)
    expected = (scenario.num_aps, drop.num_ues)
    if shadow_db.shape != expected:
        raise ParameterError(f"shadow shape {shadow_db.shape} does not match {expected}")
    pathloss = path_loss_db(distance_matrix(scenario, drop), fc)
    beta = np.power(10.0, (shadow_db - pathloss) / 10.0)
    return LargeScaleRealization(beta=beta, shadow_db=shadow_db, pathloss_db=pathloss)


def sample_large_scale(
    scenario: Scenario,
    drop: UEDrop,
    model: ShadowModel,
    fc: float,
    rng: np.random.Generator,
) -> LargeScaleRealization:
    """Fresh shadowing draw for a fixed drop, turned into β."""
    cov = shadow_covariance(drop, model)
    shadow = sample_shadow(cov, scenario.num_aps, rng)
    return large_scale(scenario, drop, shadow, fc)


def complex_gaussian(
    rng: np.random.Generator, shape: tuple[int, ...], variance: float = 1.0
) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_small_scale(
    beta_col: np.ndarray, antennas: int, rng: np.random.Generator
) -> np.ndarray:
    """Uncorrelated Rayleigh channels h = sqrt(β)·h̃ for one UE, shape (L, N)."""
    if antennas < 1:
        raise ParameterError(f"antennas must be >= 1, got {antennas}")
    beta_col = np.asarray(beta_col, dtype=float)
    h_tilde = complex_gaussian(rng, (beta_col.shape[0], antennas))
    return np.sqrt(beta_col)[:, None] * h_tilde
