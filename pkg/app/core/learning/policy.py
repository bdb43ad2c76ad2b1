"""LSTM-chain clustering policy.

UEs are grouped under their master APs, the APs are visited in the fixed
scheduling order, and one recurrent chain runs over the resulting UE sequence.
Each cell's output goes through a shared fully connected head whose sigmoid
outputs are the per-AP connection probabilities of that UE.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from app.core.exceptions import ParameterError
from app.core.network.downlink import ClusterAssignment
from app.core.network.scenario import UEDrop

logger = logging.getLogger(__name__)

GATES = ("f", "i", "o", "c")
DEFAULT_FC_HIDDEN = (256, 128)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def tensor_shapes(
    hidden_size: int, num_aps: int, fc_hidden: Sequence[int] = DEFAULT_FC_HIDDEN
) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map of every learnable tensor."""
    input_size = num_aps + 2
    shapes: dict[str, tuple[int, ...]] = {}
    for gate in GATES:
        shapes[f"W_{gate}"] = (hidden_size, input_size)
        shapes[f"U_{gate}"] = (hidden_size, hidden_size)
        shapes[f"b_{gate}"] = (hidden_size,)
    sizes = [hidden_size, *fc_hidden, num_aps]
    for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        shapes[f"fc{layer}_weight"] = (fan_out, fan_in)
        shapes[f"fc{layer}_bias"] = (fan_out,)
    return shapes


def parameter_count(
    hidden_size: int, num_aps: int, fc_hidden: Sequence[int] = DEFAULT_FC_HIDDEN
) -> int:
    return sum(
        int(np.prod(shape))
        for shape in tensor_shapes(hidden_size, num_aps, fc_hidden).values()
    )


@dataclass
class PolicyParams:
    """All learnable tensors of the policy, keyed by name."""

    hidden_size: int
    num_aps: int
    fc_hidden: tuple[int, ...]
    tensors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        self.fc_hidden = tuple(int(n) for n in self.fc_hidden)
        expected = tensor_shapes(self.hidden_size, self.num_aps, self.fc_hidden)
        if list(self.tensors) != list(expected):
            raise ParameterError(
                f"tensor names {list(self.tensors)} do not match {list(expected)}"
            )
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ParameterError(
                    f"{name} has shape {self.tensors[name].shape}, expected {shape}"
                )

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        if self.tensors[name].shape != np.shape(value):
            raise ParameterError(f"{name} expects shape {self.tensors[name].shape}")
        self.tensors[name] = value

    @property
    def num_fc_layers(self) -> int:
        return len(self.fc_hidden) + 1

    @property
    def size(self) -> int:
        return sum(t.size for t in self.tensors.values())

    @classmethod
    def zeros(
        cls,
        hidden_size: int,
        num_aps: int,
        fc_hidden: Sequence[int] = DEFAULT_FC_HIDDEN,
    ) -> "PolicyParams":
        shapes = tensor_shapes(hidden_size, num_aps, fc_hidden)
        return cls(
            hidden_size=hidden_size,
            num_aps=num_aps,
            fc_hidden=tuple(fc_hidden),
            tensors={name: np.zeros(shape) for name, shape in shapes.items()},
        )

    @classmethod
    def initialize(
        cls,
        hidden_size: int,
        num_aps: int,
        rng: np.random.Generator,
        fc_hidden: Sequence[int] = DEFAULT_FC_HIDDEN,
    ) -> "PolicyParams":
        """Uniform ±1/sqrt(fan-in) weights, forget-gate bias 1, other biases 0."""
        params = cls.zeros(hidden_size, num_aps, fc_hidden)
        for name, tensor in params.tensors.items():
            if tensor.ndim == 2:
                bound = 1.0 / np.sqrt(tensor.shape[1])
                tensor[...] = rng.uniform(-bound, bound, size=tensor.shape)
        params.tensors["b_f"][...] = 1.0
        return params

    def zeros_like(self) -> "PolicyParams":
        return PolicyParams.zeros(self.hidden_size, self.num_aps, self.fc_hidden)

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            hidden_size=self.hidden_size,
            num_aps=self.num_aps,
            fc_hidden=self.fc_hidden,
            tensors={name: t.copy() for name, t in self.tensors.items()},
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tensors.values()])

    def from_vector(self, vector: np.ndarray) -> "PolicyParams":
        """New params with this layout filled from a flat vector."""
        if vector.shape != (self.size,):
            raise ParameterError(f"expected flat vector of {self.size}, got {vector.shape}")
        tensors = {}
        offset = 0
        for name, t in self.tensors.items():
            tensors[name] = vector[offset : offset + t.size].reshape(t.shape).copy()
            offset += t.size
        return PolicyParams(self.hidden_size, self.num_aps, self.fc_hidden, tensors)


@dataclass(frozen=True)
class FeatureNormalizer:
    """Per-AP dB standardization of β plus unit-square scaling of positions."""

    mean_db: np.ndarray  # (L,)
    std_db: np.ndarray  # (L,)
    area_side: float

    @classmethod
    def fit(cls, betas: Sequence[np.ndarray], area_side: float) -> "FeatureNormalizer":
        """Statistics over every UE column of the given (training) realizations."""
        if not betas:
            raise ParameterError("need at least one realization to fit the normalizer")
        columns = np.concatenate([10.0 * np.log10(b) for b in betas], axis=1)
        std = columns.std(axis=1)
        std = np.where(std > 0, std, 1.0)
        return cls(mean_db=columns.mean(axis=1), std_db=std, area_side=float(area_side))

    @classmethod
    def identity(cls, num_aps: int, area_side: float) -> "FeatureNormalizer":
        return cls(np.zeros(num_aps), np.ones(num_aps), float(area_side))

    def normalize_beta(self, beta: np.ndarray) -> np.ndarray:
        return (10.0 * np.log10(beta) - self.mean_db[:, None]) / self.std_db[:, None]

    def denormalize_beta_db(self, z: np.ndarray) -> np.ndarray:
        return z * self.std_db[:, None] + self.mean_db[:, None]

    def to_record(self) -> dict[str, Any]:
        return {
            "mean_db": self.mean_db.tolist(),
            "std_db": self.std_db.tolist(),
            "area_side": self.area_side,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "FeatureNormalizer":
        return cls(
            mean_db=np.asarray(record["mean_db"], dtype=float),
            std_db=np.asarray(record["std_db"], dtype=float),
            area_side=float(record["area_side"]),
        )


@dataclass(frozen=True)
class UEOrdering:
    """UE chain split into per-AP subchains, listed in the AP scheduling order."""

    ap_order: np.ndarray
    subchains: tuple[np.ndarray, ...]

    @property
    def sequence(self) -> np.ndarray:
        if not self.subchains:
            return np.zeros(0, dtype=int)
        return np.concatenate(self.subchains).astype(int)

    def __len__(self) -> int:
        return int(sum(len(s) for s in self.subchains))


@dataclass
class CellTrace:
    """Activations of one chain cell, kept for backpropagation."""

    ue: int
    xi: np.ndarray
    upsilon_prev: np.ndarray
    zeta_prev: np.ndarray
    gates: dict[str, np.ndarray]
    zeta: np.ndarray
    tanh_zeta: np.ndarray
    upsilon: np.ndarray
    fc_inputs: list[np.ndarray] = field(default_factory=list)
    fc_pre: list[np.ndarray] = field(default_factory=list)
    logits: np.ndarray | None = None
    probs: np.ndarray | None = None


@dataclass
class ChainTrace:
    cells: list[CellTrace]
    logits: np.ndarray  # K x L
    probs: np.ndarray  # K x L


def build_features(
    beta: np.ndarray, drop: UEDrop, norm: FeatureNormalizer
) -> np.ndarray:
    """Per-UE input vectors [normalized β column (dB), x/side, y/side], shape K x (L+2)."""
    beta_part = norm.normalize_beta(np.asarray(beta, dtype=float)).T
    positions = drop.ue_positions / norm.area_side
    return np.hstack([beta_part, positions])


def order_ues(
    beta: np.ndarray, masters: np.ndarray, ap_order: np.ndarray
) -> UEOrdering:
    """Group UEs under their master AP; inside a group sort by β to the master, strongest first."""
    beta = np.asarray(beta, dtype=float)
    masters = np.asarray(masters, dtype=int)
    ues = np.arange(masters.shape[0])
    gain = beta[masters, ues]
    subchains = []
    for ap in ap_order:
        mine = ues[masters == ap]
        # lexsort: last key is primary
        subchains.append(mine[np.lexsort((mine, -gain[mine]))])
    return UEOrdering(ap_order=np.asarray(ap_order, dtype=int), subchains=tuple(subchains))


def _cell(
    params: PolicyParams, xi: np.ndarray, upsilon_prev: np.ndarray, zeta_prev: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray, np.ndarray, np.ndarray]:
    gates = {}
    for gate in GATES:
        pre = params[f"W_{gate}"] @ xi + params[f"U_{gate}"] @ upsilon_prev + params[f"b_{gate}"]
        gates[gate] = np.tanh(pre) if gate == "c" else sigmoid(pre)
    zeta = gates["f"] * zeta_prev + gates["i"] * gates["c"]
    tanh_zeta = np.tanh(zeta)
    upsilon = gates["o"] * tanh_zeta
    return gates, zeta, tanh_zeta, upsilon


def lstm_step(
    params: PolicyParams,
    xi: np.ndarray,
    upsilon_prev: np.ndarray,
    zeta_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM cell: returns (upsilon, zeta)."""
    _, zeta, _, upsilon = _cell(params, xi, upsilon_prev, zeta_prev)
    return upsilon, zeta


def _head(params: PolicyParams, cell: CellTrace) -> np.ndarray:
    activation = cell.upsilon
    last = params.num_fc_layers - 1
    for layer in range(last):
        cell.fc_inputs.append(activation)
        pre = params[f"fc{layer}_weight"] @ activation + params[f"fc{layer}_bias"]
        cell.fc_pre.append(pre)
        activation = np.maximum(pre, 0.0)
    cell.fc_inputs.append(activation)
    return params[f"fc{last}_weight"] @ activation + params[f"fc{last}_bias"]


def forward_trace(
    params: PolicyParams, ordering: UEOrdering, features: np.ndarray
) -> ChainTrace:
    """Run the full chain, keeping every activation."""
    features = np.asarray(features, dtype=float)
    num_ues = features.shape[0]
    if len(ordering) != num_ues:
        raise ParameterError(f"ordering covers {len(ordering)} UEs, features {num_ues}")
    if features.shape[1] != params.num_aps + 2:
        raise ParameterError(
            f"feature size {features.shape[1]} does not match L+2={params.num_aps + 2}"
        )

    upsilon = np.zeros(params.hidden_size)
    zeta = np.zeros(params.hidden_size)
    logits = np.empty((num_ues, params.num_aps))
    probs = np.empty((num_ues, params.num_aps))
    cells = []
    for ue in ordering.sequence:
        xi = features[ue]
        gates, zeta_new, tanh_zeta, upsilon_new = _cell(params, xi, upsilon, zeta)
        cell = CellTrace(
            ue=int(ue),
            xi=xi,
            upsilon_prev=upsilon,
            zeta_prev=zeta,
            gates=gates,
            zeta=zeta_new,
            tanh_zeta=tanh_zeta,
            upsilon=upsilon_new,
        )
        cell.logits = _head(params, cell)
        cell.probs = sigmoid(cell.logits)
        logits[ue] = cell.logits
        probs[ue] = cell.probs
        cells.append(cell)
        upsilon, zeta = upsilon_new, zeta_new
    return ChainTrace(cells=cells, logits=logits, probs=probs)


def forward(params: PolicyParams, ordering: UEOrdering, features: np.ndarray) -> np.ndarray:
    """K x L connection probabilities, rows indexed by UE id."""
    return forward_trace(params, ordering, features).probs


def _free_mask(shape: tuple[int, int], masters: np.ndarray) -> np.ndarray:
    free = np.ones(shape, dtype=bool)
    free[np.arange(shape[0]), masters] = False
    return free


def cluster_log_prob(
    probs: np.ndarray, clusters: ClusterAssignment, masters: np.ndarray
) -> float:
    """Joint Bernoulli log-likelihood of the non-master links."""
    probs = np.asarray(probs, dtype=float)
    chosen = clusters.active.T
    free = _free_mask(probs.shape, np.asarray(masters, dtype=int))
    with np.errstate(divide="ignore"):
        terms = np.where(chosen, np.log(probs), np.log1p(-probs))
    return float(np.sum(np.where(free, terms, 0.0)))


def link_log_likelihood(logits: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    """Elementwise Bernoulli log-likelihood from head logits; finite wherever the logits are."""
    logits = np.asarray(logits, dtype=float)
    return np.where(chosen, -np.logaddexp(0.0, -logits), -np.logaddexp(0.0, logits))


def cluster_log_prob_from_logits(
    logits: np.ndarray, clusters: ClusterAssignment, masters: np.ndarray
) -> float:
    """Same quantity as `cluster_log_prob`, without rounding through saturated probabilities."""
    logits = np.asarray(logits, dtype=float)
    free = _free_mask(logits.shape, np.asarray(masters, dtype=int))
    terms = link_log_likelihood(logits, clusters.active.T)
    return float(np.sum(np.where(free, terms, 0.0)))


def sample_clusters(
    probs: np.ndarray, masters: np.ndarray, rng: np.random.Generator
) -> tuple[ClusterAssignment, float]:
    """Bernoulli draw of every link; master links forced and left out of the log-probability."""
    probs = np.asarray(probs, dtype=float)
    masters = np.asarray(masters, dtype=int)
    draws = rng.random(probs.shape) < probs
    draws[np.arange(probs.shape[0]), masters] = True
    clusters = ClusterAssignment(draws.T)
    return clusters, cluster_log_prob(probs, clusters, masters)


def threshold_clusters(probs: np.ndarray, masters: np.ndarray) -> ClusterAssignment:
    """Activate links with probability strictly above one half, plus master links."""
    probs = np.asarray(probs, dtype=float)
    active = probs > 0.5
    active[np.arange(probs.shape[0]), np.asarray(masters, dtype=int)] = True
    return ClusterAssignment(active.T)
