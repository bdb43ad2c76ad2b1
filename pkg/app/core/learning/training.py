"""Score-function training of the clustering policy with analytic backprop through the chain."""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from app.core.exceptions import NumericalError, ParameterError
from app.core.learning.optimizer import OPTIMIZERS, OptimizerState
from app.core.learning.policy import (
    GATES,
    ChainTrace,
    FeatureNormalizer,
    PolicyParams,
    UEOrdering,
    build_features,
    cluster_log_prob_from_logits,
    forward_trace,
    link_log_likelihood,
    order_ues,
    sample_clusters,
)
from app.core.network.access import PilotPlan, UplinkConfig, build_pilot_plan, compute_gamma
from app.core.network.channel import LargeScaleRealization, ShadowModel, sample_large_scale
from app.core.network.downlink import ClusterAssignment, DownlinkConfig, evaluate_clusters
from app.core.network.scenario import Scenario, UEDrop

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """Training hyperparameters."""

    epochs: int = Field(default=200, ge=1)
    batch_size: int = Field(default=64, ge=1)
    learning_rate: float = Field(default=1e-5, gt=0)
    hidden_size: int = Field(default=512, ge=1)
    fc_hidden: list[int] = Field(default_factory=lambda: [256, 128])
    variance_reduction: bool = False
    optimizer: Literal["adam", "sgd"] = "adam"
    checkpoint_every: int = Field(default=10, ge=1)


@dataclass(frozen=True)
class TrainingContext:
    """Everything a policy update needs besides the parameters."""

    uplink: UplinkConfig
    downlink: DownlinkConfig
    normalizer: FeatureNormalizer
    ap_order: np.ndarray
    config: TrainConfig


@dataclass
class PolicySample:
    """One sampled clustering together with the chain activations that produced it."""

    trace: ChainTrace
    clusters: ClusterAssignment
    masters: np.ndarray
    reward: float
    se_sum: float
    connections: int


@dataclass(frozen=True)
class BatchStats:
    rewards: np.ndarray
    mean_se_sum: float
    mean_connections: float

    @property
    def mean_reward(self) -> float:
        return float(self.rewards.mean())


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_reward: float
    mean_se_sum: float
    mean_connections: float


@dataclass
class TrainingResult:
    params: PolicyParams
    normalizer: FeatureNormalizer
    history: list[EpochStats]


@dataclass
class GradientCheckReport:
    max_relative_error: float
    per_tensor: dict[str, float]


def _accumulate_backward(
    params: PolicyParams,
    trace: ChainTrace,
    clusters: ClusterAssignment,
    masters: np.ndarray,
    out: PolicyParams,
    weight: float = 1.0,
) -> None:
    """Add weight * d(log-likelihood)/d(params) into `out`, walking the chain backwards."""
    q = params.hidden_size
    d_upsilon_next = np.zeros(q)
    d_zeta_next = np.zeros(q)
    last = params.num_fc_layers - 1

    for cell in reversed(trace.cells):
        p = cell.probs
        free = np.ones(p.shape, dtype=bool)
        free[masters[cell.ue]] = False
        chosen = clusters.active[:, cell.ue]
        # a saturated p is fine as long as the chosen action keeps finite likelihood
        likelihood = link_log_likelihood(cell.logits, chosen)
        if not np.all(np.isfinite(likelihood[free])):
            raise NumericalError(f"chosen link of UE {cell.ue} has zero probability")

        # d/dz [a log σ(z) + (1-a) log(1-σ(z))] = a - σ(z)
        delta = weight * np.where(free, chosen.astype(float) - p, 0.0)
        for layer in range(last, -1, -1):
            out[f"fc{layer}_weight"] += np.outer(delta, cell.fc_inputs[layer])
            out[f"fc{layer}_bias"] += delta
            delta = params[f"fc{layer}_weight"].T @ delta
            if layer > 0:
                delta = delta * (cell.fc_pre[layer - 1] > 0.0)

        d_upsilon = delta + d_upsilon_next
        g = cell.gates
        d_zeta = d_upsilon * g["o"] * (1.0 - cell.tanh_zeta**2) + d_zeta_next
        d_pre = {
            "f": d_zeta * cell.zeta_prev * g["f"] * (1.0 - g["f"]),
            "i": d_zeta * g["c"] * g["i"] * (1.0 - g["i"]),
            "o": d_upsilon * cell.tanh_zeta * g["o"] * (1.0 - g["o"]),
            "c": d_zeta * g["i"] * (1.0 - g["c"] ** 2),
        }
        d_upsilon_next = np.zeros(q)
        for gate in GATES:
            out[f"W_{gate}"] += np.outer(d_pre[gate], cell.xi)
            out[f"U_{gate}"] += np.outer(d_pre[gate], cell.upsilon_prev)
            out[f"b_{gate}"] += d_pre[gate]
            d_upsilon_next += params[f"U_{gate}"].T @ d_pre[gate]
        d_zeta_next = d_zeta * g["f"]


def grad_log_prob(
    params: PolicyParams,
    ordering: UEOrdering,
    features: np.ndarray,
    clusters: ClusterAssignment,
    masters: np.ndarray,
) -> PolicyParams:
    """Exact gradient of the non-master Bernoulli log-likelihood of `clusters`."""
    if len(ordering) == 0:
        raise ParameterError("cannot differentiate an empty chain")
    trace = forward_trace(params, ordering, features)
    grads = params.zeros_like()
    _accumulate_backward(params, trace, clusters, np.asarray(masters, dtype=int), grads)
    return grads


def gradient_check(
    params: PolicyParams,
    ordering: UEOrdering,
    features: np.ndarray,
    clusters: ClusterAssignment,
    masters: np.ndarray,
    step: float = 1e-5,
    floor: float = 1e-5,
) -> GradientCheckReport:
    """
    Compare the analytic gradient with central finite differences on every entry.

    Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
    """
    analytic = grad_log_prob(params, ordering, features, clusters, masters)

    def log_prob(p: PolicyParams) -> float:
        return cluster_log_prob_from_logits(
            forward_trace(p, ordering, features).logits, clusters, masters
        )

    per_tensor = {}
    shifted = params.copy()
    for name, tensor in params.tensors.items():
        numeric = np.empty_like(tensor)
        flat = shifted[name].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step
            up = log_prob(shifted)
            flat[idx] = original - step
            down = log_prob(shifted)
            flat[idx] = original
            numeric.flat[idx] = (up - down) / (2.0 * step)
        scale = np.maximum(np.maximum(np.abs(analytic[name]), np.abs(numeric)), floor)
        per_tensor[name] = float(np.max(np.abs(analytic[name] - numeric) / scale))

    report = GradientCheckReport(max(per_tensor.values()), per_tensor)
    logger.info(f"Gradient check: max relative error {report.max_relative_error:.2e}")
    return report


def draw_policy_sample(
    params: PolicyParams,
    realization: LargeScaleRealization,
    drop: UEDrop,
    plan: PilotPlan,
    ctx: TrainingContext,
    rng: np.random.Generator,
) -> PolicySample:
    """Forward pass, Bernoulli clustering draw and penalized reward for one realization."""
    beta = realization.beta
    features = build_features(beta, drop, ctx.normalizer)
    ordering = order_ues(beta, plan.masters, ctx.ap_order)
    trace = forward_trace(params, ordering, features)
    clusters, _ = sample_clusters(trace.probs, plan.masters, rng)
    gamma = compute_gamma(beta, plan, ctx.uplink)
    evaluation = evaluate_clusters(clusters, beta, gamma, plan, ctx.downlink)
    return PolicySample(
        trace=trace,
        clusters=clusters,
        masters=plan.masters,
        reward=evaluation.objective,
        se_sum=evaluation.se_sum,
        connections=evaluation.connections,
    )


def score_function_gradient(
    params: PolicyParams, samples: Sequence[PolicySample], variance_reduction: bool
) -> PolicyParams:
    """(1/B) Σ_b (R_b - R̄) ∇log p(a_b), with R̄ the batch mean or zero."""
    if not samples:
        raise ParameterError("batch must not be empty")
    rewards = np.array([s.reward for s in samples])
    reference = float(rewards.mean()) if variance_reduction else 0.0
    estimate = params.zeros_like()
    for sample, reward in zip(samples, rewards):
        weight = (reward - reference) / len(samples)
        if weight == 0.0:
            continue
        _accumulate_backward(params, sample.trace, sample.clusters, sample.masters, estimate, weight)
    return estimate


def reinforce_step(
    params: PolicyParams,
    opt_state: OptimizerState,
    batch: Sequence[LargeScaleRealization],
    drop: UEDrop,
    plans: Sequence[PilotPlan],
    ctx: TrainingContext,
    rng: np.random.Generator,
) -> tuple[PolicyParams, OptimizerState, BatchStats]:
    """One policy-gradient ascent step on a batch of fading realizations of one drop."""
    if not batch:
        raise ParameterError("batch must not be empty")
    if len(plans) != len(batch):
        raise ParameterError(f"{len(plans)} pilot plans for {len(batch)} realizations")

    samples = [
        draw_policy_sample(params, realization, drop, plan, ctx, rng)
        for realization, plan in zip(batch, plans)
    ]
    estimate = score_function_gradient(params, samples, ctx.config.variance_reduction)
    update = OPTIMIZERS[ctx.config.optimizer]
    new_params, new_state = update(params, estimate, opt_state, ctx.config.learning_rate)

    stats = BatchStats(
        rewards=np.array([s.reward for s in samples]),
        mean_se_sum=float(np.mean([s.se_sum for s in samples])),
        mean_connections=float(np.mean([s.connections for s in samples])),
    )
    return new_params, new_state, stats


def fit_normalizer(
    scenario: Scenario,
    drops: Sequence[UEDrop],
    shadow_model: ShadowModel,
    carrier_ghz: float,
    rng: np.random.Generator,
) -> FeatureNormalizer:
    """Feature statistics from one shadowing draw per training drop."""
    betas = [
        sample_large_scale(scenario, drop, shadow_model, carrier_ghz, rng).beta
        for drop in drops
    ]
    return FeatureNormalizer.fit(betas, scenario.area_side)


def train(
    scenario: Scenario,
    train_drops: Sequence[UEDrop],
    uplink: UplinkConfig,
    downlink: DownlinkConfig,
    shadow_model: ShadowModel,
    carrier_ghz: float,
    tcfg: TrainConfig,
    rng: np.random.Generator,
    on_epoch_end: Callable[[EpochStats, PolicyParams, FeatureNormalizer], None] | None = None,
) -> TrainingResult:
    """
    Train the policy over the training drops.

    Every epoch visits the drops in a freshly shuffled order; each drop gets
    batch_size new shadowing realizations with master APs and pilots rebuilt
    per realization.
    """
    if not train_drops:
        raise ParameterError("need at least one training drop")

    normalizer = fit_normalizer(scenario, train_drops, shadow_model, carrier_ghz, rng)
    params = PolicyParams.initialize(
        tcfg.hidden_size, scenario.num_aps, rng, fc_hidden=tcfg.fc_hidden
    )
    opt_state = OptimizerState.zeros_like(params)
    ctx = TrainingContext(
        uplink=uplink,
        downlink=downlink,
        normalizer=normalizer,
        ap_order=scenario.ap_order,
        config=tcfg,
    )
    logger.info(
        f"Training: {len(train_drops)} drops, {tcfg.epochs} epochs, "
        f"batch {tcfg.batch_size}, q={tcfg.hidden_size}, {params.size} parameters"
    )

    history: list[EpochStats] = []
    for epoch in range(tcfg.epochs):
        rewards, se_sums, connections = [], [], []
        for index in rng.permutation(len(train_drops)):
            drop = train_drops[index]
            batch = [
                sample_large_scale(scenario, drop, shadow_model, carrier_ghz, rng)
                for _ in range(tcfg.batch_size)
            ]
            plans = [build_pilot_plan(r.beta, uplink.tau_p) for r in batch]
            params, opt_state, stats = reinforce_step(
                params, opt_state, batch, drop, plans, ctx, rng
            )
            rewards.append(stats.mean_reward)
            se_sums.append(stats.mean_se_sum)
            connections.append(stats.mean_connections)

        epoch_stats = EpochStats(
            epoch=epoch,
            mean_reward=float(np.mean(rewards)),
            mean_se_sum=float(np.mean(se_sums)),
            mean_connections=float(np.mean(connections)),
        )
        history.append(epoch_stats)
        logger.info(
            f"Epoch {epoch + 1}/{tcfg.epochs}: reward {epoch_stats.mean_reward:.3f}, "
            f"SE sum {epoch_stats.mean_se_sum:.3f}, "
            f"connections {epoch_stats.mean_connections:.2f}"
        )
        if on_epoch_end is not None:
            on_epoch_end(epoch_stats, params, normalizer)

    return TrainingResult(params=params, normalizer=normalizer, history=history)
