"""Tests for the reference clustering strategies."""

import numpy as np

from app.core.network.access import PilotPlan, build_pilot_plan
from app.core.network.baseline import baseline_clusters, full_clusters, master_only_clusters


class TestBaselineClusters:
    """Test cases for the per-pilot strongest-UE heuristic."""

    def test_orthogonal_pilots_connect_everything(self, rng):
        beta = 10.0 ** rng.uniform(-12, -8, size=(25, 10))
        plan = build_pilot_plan(beta, 10)

        clusters = baseline_clusters(beta, plan)

        assert clusters.connections == 250

    def test_single_ue_served_by_every_ap(self, rng):
        beta = 10.0 ** rng.uniform(-12, -8, size=(7, 1))
        plan = build_pilot_plan(beta, 3)

        clusters = baseline_clusters(beta, plan)

        assert clusters.connections == 7

    def test_one_winner_per_pilot_per_ap(self, rng):
        beta = 10.0 ** rng.uniform(-12, -8, size=(25, 10))
        plan = build_pilot_plan(beta, 3)

        clusters = baseline_clusters(beta, plan)

        assert all(len(s) > 0 for s in plan.sharing_sets)
        assert 75 <= clusters.connections <= 75 + 10
        clusters.check_connected()
        for members in plan.sharing_sets:
            winners = members[np.argmax(beta[:, members], axis=1)]
            assert np.all(clusters.active[np.arange(25), winners])

    def test_master_link_forced(self):
        """UE 1 loses its pilot at its own master AP but keeps the master link."""
        beta = np.array([[0.9, 0.5], [0.1, 0.4]])
        plan = PilotPlan(masters=np.array([0, 0]), pilots=np.array([0, 0]), tau_p=1)

        clusters = baseline_clusters(beta, plan)

        assert clusters.active.tolist() == [[True, True], [False, True]]

    def test_tie_goes_to_lowest_ue(self):
        beta = np.array([[0.5, 0.5], [0.2, 0.2]])
        plan = PilotPlan(masters=np.array([0, 0]), pilots=np.array([0, 0]), tau_p=1)

        clusters = baseline_clusters(beta, plan)

        assert clusters.active[1].tolist() == [True, False]


class TestReferenceClusters:
    def test_master_only(self):
        plan = PilotPlan(masters=np.array([2, 0, 2]), pilots=np.array([0, 1, 2]), tau_p=3)

        clusters = master_only_clusters(plan, 4)

        assert clusters.links() == [(0, 1), (2, 0), (2, 2)]

    def test_full(self):
        plan = PilotPlan(masters=np.array([0, 1]), pilots=np.array([0, 1]), tau_p=2)

        assert full_clusters(plan, 3).connections == 6
