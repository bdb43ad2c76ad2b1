"""Reference clustering strategies."""

import numpy as np

from app.core.network.access import PilotPlan
from app.core.network.downlink import ClusterAssignment


def _force_masters(active: np.ndarray, plan: PilotPlan) -> ClusterAssignment:
    active[plan.masters, np.arange(plan.num_ues)] = True
    return ClusterAssignment(active)


def baseline_clusters(beta: np.ndarray, plan: PilotPlan) -> ClusterAssignment:
    """
    Per pilot, every AP serves the co-pilot UE it sees with the largest β.

    Master links are added on top so that every UE stays connected. Ties go to
    the lowest UE index.
    """
    beta = np.asarray(beta, dtype=float)
    num_aps = beta.shape[0]
    active = np.zeros(beta.shape, dtype=bool)
    for members in plan.sharing_sets:
        if members.size == 0:
            continue
        winners = members[np.argmax(beta[:, members], axis=1)]
        active[np.arange(num_aps), winners] = True
    return _force_masters(active, plan)


def master_only_clusters(plan: PilotPlan, num_aps: int) -> ClusterAssignment:
    """Each UE served by its master AP alone."""
    return _force_masters(np.zeros((num_aps, plan.num_ues), dtype=bool), plan)


def full_clusters(plan: PilotPlan, num_aps: int) -> ClusterAssignment:
    """Canonical cell-free operation: every AP serves every UE."""
    return ClusterAssignment(np.ones((num_aps, plan.num_ues), dtype=bool))
