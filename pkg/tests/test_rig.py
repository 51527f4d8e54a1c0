import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import rig_gradcheck
from rigskin.errors import EmptyMesh, SizeMismatch
from rigskin.fixtures import make_character
from rigskin.mesh import Mesh
from rigskin.metrics import cd_j2j
from rigskin.skeleton import ground_height, scale_skeleton
from rigskin.solvers import (
    RigConfig,
    RigObjective,
    solve_rig,
    symmetrize_residual,
)
from rigskin.solvers.rig import heuristic_residual, positions_to_offsets_grad, rest_positions


@pytest.fixture(scope="module")
def biped():
    return make_character("biped_simple", seed=0)


@st.composite
def residual_sets(draw):
    n = draw(st.integers(1, 12))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    # random involution: pair up a random subset, the rest map to themselves
    perm = rng.permutation(n)
    rho = np.arange(n)
    n_pairs = draw(st.integers(0, n // 2))
    for k in range(n_pairs):
        a, b = perm[2 * k], perm[2 * k + 1]
        rho[a], rho[b] = b, a
    return rng.uniform(-10.0, 10.0, (n, 3)), rho


class TestSymmetrize:
    def test_mirrored_pair_is_fixed(self):
        d = np.array([[1.0, 2.0, 3.0], [-1.0, 2.0, 3.0]])
        np.testing.assert_array_equal(symmetrize_residual(d, [1, 0]), d)

    def test_same_sign_pair_cancels_lateral(self):
        d = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        np.testing.assert_array_equal(symmetrize_residual(d, [1, 0]), np.zeros((2, 3)))

    def test_self_paired_loses_lateral(self):
        np.testing.assert_array_equal(symmetrize_residual([[1.0, 2.0, 3.0]], [0]),
                                      [[0.0, 2.0, 3.0]])

    @given(residual_sets())
    def test_idempotent(self, case):
        d, rho = case
        once = symmetrize_residual(d, rho)
        np.testing.assert_array_equal(symmetrize_residual(once, rho), once)

    @given(residual_sets())
    def test_mirror_identity(self, case):
        d, rho = case
        out = symmetrize_residual(d, rho)
        np.testing.assert_array_equal(out[rho] * [-1.0, 1.0, 1.0], out)

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatch):
            symmetrize_residual(np.zeros((3, 3)), [0, 1])


class TestObjective:
    def test_offset_gradient_is_subtree_sum(self, biped):
        s = biped.skeleton
        rng = np.random.default_rng(0)
        gg = rng.standard_normal(s.offsets.shape)
        eps = 1e-6
        d = rng.standard_normal(s.offsets.shape)
        lin = lambda x: float(np.sum(gg * rest_positions(s, s.offsets + x)))  # noqa: E731
        num = np.zeros_like(d)
        for k in range(len(s)):
            for c in range(3):
                dp, dm = d.copy(), d.copy()
                dp[k, c] += eps
                dm[k, c] -= eps
                num[k, c] = (lin(dp) - lin(dm)) / (2 * eps)
        np.testing.assert_allclose(positions_to_offsets_grad(s, gg), num, atol=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        err, checked = rig_gradcheck(seed)
        assert checked > 0
        assert err < 1e-3

    def test_empty_mesh(self, biped):
        with pytest.raises(EmptyMesh):
            RigObjective(Mesh(np.zeros((3, 3))), biped.skeleton)


class TestSolve:
    def test_half_scale_recovery(self, biped):
        s = biped.skeleton
        h = s.height()
        t0 = time.perf_counter()
        sol = solve_rig(biped.mesh, scale_skeleton(s, 0.5), g_gt=s.g)
        assert time.perf_counter() - t0 < 30.0
        assert cd_j2j(sol.target_skeleton.g, s.g) < 1e-3 * h * h
        np.testing.assert_array_equal(symmetrize_residual(sol.delta_o, s.rho), sol.delta_o)
        assert abs(ground_height(sol.target_skeleton)) <= 1e-9

    def test_ground_truth_source_barely_moves(self, biped):
        s = biped.skeleton
        sol = solve_rig(biped.mesh, s, g_gt=s.g)
        assert np.max(np.abs(sol.delta_o)) < 1e-4 * s.height()

    def test_descent_from_perturbed_source(self, biped):
        s = biped.skeleton
        h = s.height()
        rng = np.random.default_rng(0)
        d = symmetrize_residual(rng.normal(scale=0.03 * h, size=s.offsets.shape), s.rho)
        src = s.replace(offsets=s.offsets + d)
        sol = solve_rig(biped.mesh, src, g_gt=s.g)
        assert np.all(np.diff(sol.loss_trace) <= 0)
        assert cd_j2j(sol.target_skeleton.g, s.g) < 0.1 * cd_j2j(src.g, s.g)
        np.testing.assert_array_equal(symmetrize_residual(sol.delta_o, s.rho), sol.delta_o)

    def test_mesh_only_fit_is_symmetric_and_grounded(self, biped):
        s = biped.skeleton
        sol = solve_rig(biped.mesh, scale_skeleton(s, 0.5), RigConfig(max_iter=50))
        np.testing.assert_array_equal(symmetrize_residual(sol.delta_o, s.rho), sol.delta_o)
        assert abs(ground_height(sol.target_skeleton)) <= 1e-9
        assert sol.loss_trace[-1] <= sol.loss_trace[0]

    def test_heuristic_matches_reference_extent(self, biped):
        s = biped.skeleton
        src = scale_skeleton(s, 0.5)
        g = rest_positions(src, src.offsets + heuristic_residual(biped.mesh, src, s.g))
        assert np.ptp(g[:, 1]) == pytest.approx(np.ptp(s.g[:, 1]), rel=1e-12)

    def test_deterministic(self, biped):
        s = biped.skeleton
        a = solve_rig(biped.mesh, scale_skeleton(s, 0.7), RigConfig(max_iter=30))
        b = solve_rig(biped.mesh, scale_skeleton(s, 0.7), RigConfig(max_iter=30))
        np.testing.assert_array_equal(a.delta_o, b.delta_o)
