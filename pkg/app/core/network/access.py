"""Network joining: master-AP selection, pilot assignment and MMSE estimation statistics."""

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from app.core.exceptions import ParameterError
from app.core.network.channel import complex_gaussian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PilotPlan:
    """Per-UE master AP and pilot index (both 0-based)."""

    masters: np.ndarray  # (K,)
    pilots: np.ndarray  # (K,)
    tau_p: int

    @property
    def num_ues(self) -> int:
        return int(self.masters.shape[0])

    @property
    def sharing_sets(self) -> list[np.ndarray]:
        """UE indices on each pilot, ascending."""
        return [np.flatnonzero(self.pilots == t) for t in range(self.tau_p)]

    def co_pilot_mask(self) -> np.ndarray:
        """K x K boolean, True where UEs i and k share a pilot."""
        return self.pilots[:, None] == self.pilots[None, :]

    def to_record(self) -> list[dict[str, int]]:
        return [
            {"ue": k, "master": int(m), "pilot": int(t)}
            for k, (m, t) in enumerate(zip(self.masters, self.pilots))
        ]


@dataclass(frozen=True)
class UplinkConfig:
    """Pilot-phase parameters; `eta` is broadcast to every UE."""

    eta: float | np.ndarray  # mW
    sigma_ul2: float  # mW
    tau_p: int
    tau_c: int

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.eta) <= 0):
            raise ParameterError("uplink power eta must be positive")
        if self.sigma_ul2 <= 0:
            raise ParameterError(f"sigma_ul2 must be positive, got {self.sigma_ul2}")
        if not 0 < self.tau_p < self.tau_c:
            raise ParameterError(
                f"need 0 < tau_p < tau_c, got tau_p={self.tau_p}, tau_c={self.tau_c}"
            )

    def eta_per_ue(self, num_ues: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.eta, dtype=float), (num_ues,))


@dataclass
class EstimationReport:
    """Relative error of the empirical E{||ĥ||²}/N against γ, shape L x K."""

    relative_errors: np.ndarray
    trials: int
    max_relative_error: float = field(init=False)

    def __post_init__(self) -> None:
        self.max_relative_error = float(np.max(self.relative_errors))

    def to_record(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "max_relative_error": self.max_relative_error,
            "relative_errors": self.relative_errors.tolist(),
        }


def select_master(beta: np.ndarray, k: int) -> int:
    """AP with the strongest large-scale gain to UE k (lowest index on ties)."""
    column = np.asarray(beta)[:, k]
    if column.size == 0:
        raise ParameterError(f"empty beta column for UE {k}")
    return int(np.argmax(column))


def select_masters(beta: np.ndarray) -> np.ndarray:
    return np.argmax(np.asarray(beta), axis=0)


def assign_pilots(beta: np.ndarray, masters: np.ndarray, tau_p: int) -> PilotPlan:
    """
    Greedy sequential pilot assignment.

    UEs join in ascending index order; each takes the pilot whose current
    sharers interfere least at its master AP. Empty pilots count as zero and
    ties go to the lowest pilot index.
    """
    if tau_p < 1:
        raise ParameterError(f"tau_p must be >= 1, got {tau_p}")
    beta = np.asarray(beta, dtype=float)
    masters = np.asarray(masters, dtype=int)
    num_ues = beta.shape[1]
    pilots = np.full(num_ues, -1, dtype=int)
    for k in range(num_ues):
        interference = np.zeros(tau_p)
        joined = pilots[:k]
        np.add.at(interference, joined, beta[masters[k], :k])
        pilots[k] = int(np.argmin(interference))
    return PilotPlan(masters=masters.copy(), pilots=pilots, tau_p=int(tau_p))


def build_pilot_plan(beta: np.ndarray, tau_p: int) -> PilotPlan:
    """Masters by strongest channel, then pilots by least interference."""
    return assign_pilots(beta, select_masters(beta), tau_p)


def _pilot_load(beta: np.ndarray, plan: PilotPlan, eta: np.ndarray) -> np.ndarray:
    """L x K matrix of Σ_{i on UE k's pilot} η_i β_{ℓi}."""
    onehot = np.zeros((plan.num_ues, plan.tau_p))
    onehot[np.arange(plan.num_ues), plan.pilots] = 1.0
    per_pilot = (beta * eta[None, :]) @ onehot  # (L, tau_p)
    return per_pilot[:, plan.pilots]


def compute_gamma(beta: np.ndarray, plan: PilotPlan, cfg: UplinkConfig) -> np.ndarray:
    """Mean-square MMSE estimate per antenna, γ_{ℓk}, shape L x K."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape[1] != plan.num_ues:
        raise ParameterError(f"beta has {beta.shape[1]} UEs, plan has {plan.num_ues}")
    eta = cfg.eta_per_ue(plan.num_ues)
    denominator = cfg.tau_p * _pilot_load(beta, plan, eta) + cfg.sigma_ul2
    return cfg.tau_p * eta[None, :] * beta**2 / denominator


def despread_pilot(
    h: np.ndarray, noise: np.ndarray, plan: PilotPlan, cfg: UplinkConfig
) -> np.ndarray:
    """
    Received pilot signal after correlating with each UE's own pilot.

    `h` has shape (..., L, K, N) and `noise` (..., L, tau_p, N) with variance
    sigma_ul2 per entry. Orthogonal pilots reduce the correlation to the sum of
    co-pilot channels scaled by sqrt(tau_p * eta) plus the despread noise.
    Returns y with shape (..., L, K, N), one copy per UE on its pilot.
    """
    eta = cfg.eta_per_ue(plan.num_ues)
    weighted = np.sqrt(cfg.tau_p * eta)[:, None] * h
    onehot = np.zeros((plan.num_ues, plan.tau_p))
    onehot[np.arange(plan.num_ues), plan.pilots] = 1.0
    per_pilot = np.einsum("...lkn,kt->...ltn", weighted, onehot) + noise
    return per_pilot[..., plan.pilots, :]


def mmse_estimate(
    y: np.ndarray,
    beta: np.ndarray,
    gamma: np.ndarray,
    plan: PilotPlan,
    cfg: UplinkConfig,
) -> np.ndarray:
    """Scale the despread signal into the MMSE channel estimate ĥ."""
    eta = cfg.eta_per_ue(plan.num_ues)
    scale = gamma / (np.sqrt(cfg.tau_p * eta)[None, :] * beta)
    return scale[..., None] * y


def mc_validate_estimation(
    beta: np.ndarray,
    plan: PilotPlan,
    cfg: UplinkConfig,
    antennas: int,
    trials: int,
    rng: np.random.Generator,
    chunk_elements: int = 2_000_000,
) -> EstimationReport:
    """Monte-Carlo check that E{||ĥ_{kℓ}||²}/N matches γ_{ℓk}."""
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    beta = np.asarray(beta, dtype=float)
    num_aps, num_ues = beta.shape
    gamma = compute_gamma(beta, plan, cfg)

    chunk = max(1, chunk_elements // (num_aps * max(num_ues, plan.tau_p) * antennas))
    energy = np.zeros((num_aps, num_ues))
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        h = np.sqrt(beta)[None, :, :, None] * complex_gaussian(
            rng, (n, num_aps, num_ues, antennas)
        )
        noise = complex_gaussian(rng, (n, num_aps, plan.tau_p, antennas), cfg.sigma_ul2)
        h_hat = mmse_estimate(despread_pilot(h, noise, plan, cfg), beta, gamma, plan, cfg)
        energy += np.sum(np.abs(h_hat) ** 2, axis=(0, 3))
        done += n

    empirical = energy / (trials * antennas)
    report = EstimationReport(
        relative_errors=np.abs(empirical - gamma) / gamma, trials=trials
    )
    logger.info(
        f"MMSE Monte-Carlo check: {trials} trials, "
        f"max relative error {report.max_relative_error:.4f}"
    )
    return report
