"""Downlink power allocation, closed-form SINR / SE under MR precoding, and the clustering objective."""

import logging
from dataclasses import dataclass

import numpy as np

from app.core.exceptions import ConstraintViolationError, ParameterError
from app.core.network.access import PilotPlan

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterAssignment:
    """Binary L x K service matrix: active[ℓ, k] means AP ℓ serves UE k."""

    active: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "active", np.asarray(self.active, dtype=bool))

    @property
    def connections(self) -> int:
        return int(self.active.sum())

    def serving_aps(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.active[:, k])

    def served_ues(self, ap: int) -> np.ndarray:
        return np.flatnonzero(self.active[ap, :])

    def unserved_ues(self) -> np.ndarray:
        return np.flatnonzero(~self.active.any(axis=0))

    def check_connected(self) -> None:
        """Every UE must have at least one serving AP."""
        orphans = self.unserved_ues()
        if orphans.size:
            raise ConstraintViolationError(
                f"UEs without any serving AP: {orphans.tolist()}"
            )

    def links(self) -> list[tuple[int, int]]:
        """(ap, ue) pairs in row-major order."""
        return [(int(ap), int(ue)) for ap, ue in np.argwhere(self.active)]

    @classmethod
    def from_links(
        cls, links: list[tuple[int, int]], num_aps: int, num_ues: int
    ) -> "ClusterAssignment":
        active = np.zeros((num_aps, num_ues), dtype=bool)
        for ap, ue in links:
            active[ap, ue] = True
        return cls(active)


@dataclass(frozen=True)
class PowerAllocation:
    rho: np.ndarray  # L x K, mW


@dataclass(frozen=True)
class DownlinkConfig:
    rho_max: float  # mW
    sigma_dl2: float  # mW
    antennas: int
    tau_c: int
    tau_p: int
    tau_u: int = 0
    penalty: float = 0.0  # λ, bit/s/Hz per connection

    def __post_init__(self) -> None:
        if self.rho_max <= 0 or self.sigma_dl2 <= 0:
            raise ParameterError("rho_max and sigma_dl2 must be positive")
        if self.antennas < 1:
            raise ParameterError(f"antennas must be >= 1, got {self.antennas}")
        if self.tau_d <= 0:
            raise ParameterError(
                f"no downlink samples left: tau_c={self.tau_c}, "
                f"tau_p={self.tau_p}, tau_u={self.tau_u}"
            )
        if self.penalty < 0:
            raise ParameterError(f"penalty must be >= 0, got {self.penalty}")

    @property
    def tau_d(self) -> int:
        return self.tau_c - self.tau_p - self.tau_u

    @property
    def pre_log(self) -> float:
        return self.tau_d / self.tau_c


@dataclass(frozen=True)
class ClusterEvaluation:
    se: np.ndarray  # per-UE SE, bit/s/Hz
    connections: int
    objective: float

    @property
    def se_sum(self) -> float:
        return float(self.se.sum())


def allocate_power(
    beta: np.ndarray, clusters: ClusterAssignment, rho_max: float
) -> PowerAllocation:
    """Split each AP's budget over its served UEs proportionally to sqrt(β)."""
    weights = np.sqrt(np.asarray(beta, dtype=float)) * clusters.active
    totals = weights.sum(axis=1, keepdims=True)
    rho = np.divide(
        rho_max * weights, totals, out=np.zeros_like(weights), where=totals > 0
    )
    return PowerAllocation(rho=rho)


def sinr_all(
    clusters: ClusterAssignment,
    rho: PowerAllocation | np.ndarray,
    beta: np.ndarray,
    gamma: np.ndarray,
    plan: PilotPlan,
    cfg: DownlinkConfig,
) -> np.ndarray:
    """Effective SINR of every UE under MR precoding and channel hardening."""
    rho = rho.rho if isinstance(rho, PowerAllocation) else np.asarray(rho, dtype=float)
    rho = rho * clusters.active
    n = cfg.antennas

    coherent = np.sum(np.sqrt(rho * gamma), axis=0)
    signal = n * coherent**2

    # Σ_i Σ_{ℓ∈L_i} ρ_{ℓi} β_{ℓk}
    interference = rho.sum(axis=1) @ beta

    # cross[i, k] = Σ_{ℓ∈L_i} sqrt(ρ_{ℓi} γ_{ℓk}), restricted to co-pilot i != k
    cross = np.sqrt(rho).T @ np.sqrt(gamma)
    mask = plan.co_pilot_mask()
    np.fill_diagonal(mask, False)
    contamination = n * np.sum(np.where(mask, cross**2, 0.0), axis=0)

    return signal / (interference + contamination + cfg.sigma_dl2)


def sinr(
    k: int,
    clusters: ClusterAssignment,
    rho: PowerAllocation | np.ndarray,
    beta: np.ndarray,
    gamma: np.ndarray,
    plan: PilotPlan,
    cfg: DownlinkConfig,
) -> float:
    return float(sinr_all(clusters, rho, beta, gamma, plan, cfg)[k])


def spectral_efficiency(
    sinr_value: float | np.ndarray, cfg: DownlinkConfig
) -> float | np.ndarray:
    """Hardening-bound SE in bit/s/Hz, pre-log scaled by the downlink fraction."""
    if np.any(np.asarray(sinr_value) < 0):
        raise ParameterError("SINR must be non-negative")
    return cfg.pre_log * np.log2(1.0 + sinr_value)


def evaluate_clusters(
    clusters: ClusterAssignment,
    beta: np.ndarray,
    gamma: np.ndarray,
    plan: PilotPlan,
    cfg: DownlinkConfig,
) -> ClusterEvaluation:
    """Per-UE SE, connection count and penalized objective of one clustering."""
    clusters.check_connected()
    power = allocate_power(beta, clusters, cfg.rho_max)
    se = spectral_efficiency(sinr_all(clusters, power, beta, gamma, plan, cfg), cfg)
    connections = clusters.connections
    return ClusterEvaluation(
        se=se,
        connections=connections,
        objective=float(se.sum() - cfg.penalty * connections),
    )


def objective(
    clusters: ClusterAssignment,
    beta: np.ndarray,
    gamma: np.ndarray,
    plan: PilotPlan,
    cfg: DownlinkConfig,
) -> float:
    """Sum SE minus λ per active connection."""
    return evaluate_clusters(clusters, beta, gamma, plan, cfg).objective
