import numpy as np
import pytest

from conftest import random_mesh, random_rotation, random_skeleton, random_stochastic
from rigskin.animation import apply_lbs
from rigskin.errors import NonFinite, ShapeMismatch, SizeMismatch, Unidentifiable
from rigskin.fixtures import deformed_frames, make_character, make_clip
from rigskin.mesh import Mesh
from rigskin.skeleton import forward_kinematics, skinning_transforms
from rigskin.solvers import (
    SkinningConfig,
    SkinningObjective,
    SkinningWeights,
    TrainingSample,
    central_difference,
    max_relative_error,
    skinning_objective_direct,
    softmax_rows,
    solve_skinning,
)
from rigskin.solvers.skinning import tied_joints


def _samples(mesh, s, weights, poses):
    rest = forward_kinematics(s)
    out = []
    for f in range(len(poses)):
        pose = poses.frame(f)
        v = apply_lbs(mesh, weights, skinning_transforms(rest, pose))
        out.append(TrainingSample(mesh, v, pose))
    return out


def _random_instance(rng, n_v=12, n_j=4, n_s=3):
    s = random_skeleton(rng, n_j)
    m = random_mesh(rng, n_v)
    w = random_stochastic(rng, n_v, n_j)
    rot = random_rotation(rng, n_s * n_j).reshape(n_s, n_j, 3, 3)
    poses = forward_kinematics(s, rot, rng.standard_normal((n_s, 3)))
    return s, m, _samples(m, s, w, poses)


@pytest.fixture(scope="module")
def cylinder():
    ch = make_character("two_bone_cylinder", seed=0)
    clip = make_clip(ch.skeleton, "random_smooth", frames=9, seed=1)
    frames = deformed_frames(ch, clip)
    samples = [TrainingSample(ch.mesh, frames[f], clip.frame(f)) for f in range(1, 9)]
    return ch, samples


class TestSoftmax:
    def test_rows_sum_to_one_for_extreme_logits(self):
        rng = np.random.default_rng(0)
        z = rng.uniform(-50, 50, size=(500, 7))
        z[0] = 50.0
        z[1] = -50.0
        z[2] = [50, -50, 50, -50, 50, -50, 50]
        w = softmax_rows(z)
        assert np.all(np.isfinite(w))
        assert np.max(np.abs(w.sum(axis=1) - 1.0)) <= 1e-9
        assert np.all(w > 0)

    def test_scale(self):
        w = softmax_rows([[0.0, np.sqrt(32) * np.log(3.0)]])
        np.testing.assert_allclose(w, [[0.25, 0.75]], atol=1e-15)

    def test_weights_recomputable_from_logits(self):
        rng = np.random.default_rng(1)
        sw = SkinningWeights(rng.standard_normal((5, 3)))
        np.testing.assert_array_equal(sw.weights, softmax_rows(sw.logits, sw.n_d))
        back = SkinningWeights.from_weights(sw.weights)
        np.testing.assert_allclose(back.weights, sw.weights, atol=1e-14)

    def test_invalid_logits(self):
        with pytest.raises(NonFinite):
            SkinningWeights(np.array([[np.inf, 0.0]]))
        with pytest.raises(ShapeMismatch):
            SkinningWeights(np.zeros(3))


class TestObjective:
    def test_quadratic_form_matches_direct_evaluation(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            s, m, samples = _random_instance(rng)
            obj = SkinningObjective(samples, s)
            z = rng.standard_normal((m.n_vertices, len(s)))
            w = softmax_rows(z)
            direct = skinning_objective_direct(w, samples, s)
            assert obj.value(z) == pytest.approx(direct, rel=1e-9, abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            s, m, samples = _random_instance(rng, n_v=8, n_j=3)
            obj = SkinningObjective(samples, s)
            z = rng.standard_normal((m.n_vertices, len(s))) * 3
            _, g = obj.value_and_grad(z)
            num = central_difference(
                lambda x: skinning_objective_direct(softmax_rows(x), samples, s), z, eps=1e-4)
            assert max_relative_error(g, num) < 1e-3

    def test_zero_at_ground_truth(self):
        rng = np.random.default_rng(4)
        s = random_skeleton(rng, 3)
        m = random_mesh(rng, 6)
        w = random_stochastic(rng, 6, 3)
        poses = forward_kinematics(s, random_rotation(rng, 6).reshape(2, 3, 3, 3))
        obj = SkinningObjective(_samples(m, s, w, poses), s)
        val, _ = obj.value_and_grad_weights(w)
        assert abs(val) < 1e-12

    def test_pose_size_mismatch(self):
        rng = np.random.default_rng(5)
        s, m, samples = _random_instance(rng)
        with pytest.raises(SizeMismatch):
            SkinningObjective(samples, random_skeleton(rng, 5))

    def test_tied_joints(self):
        t = np.broadcast_to(np.eye(4), (2, 4, 4, 4)).copy()
        t[:, 1, 0, 3] = 1.0
        np.testing.assert_array_equal(tied_joints(t), [0, 1, 0, 0])


class TestSolve:
    def test_single_joint_gives_all_ones(self):
        rng = np.random.default_rng(0)
        s = random_skeleton(rng, 1)
        m = random_mesh(rng, 10)
        poses = forward_kinematics(s, random_rotation(rng, 2).reshape(2, 1, 3, 3))
        sw = solve_skinning(_samples(m, s, np.ones((10, 1)), poses), s)
        np.testing.assert_array_equal(sw.weights, 1.0)

    def test_rest_only_warns(self):
        ch = make_character("two_bone_cylinder", seed=0)
        rest = forward_kinematics(ch.skeleton)
        smp = [TrainingSample(ch.mesh, ch.mesh.vertices, rest)]
        with pytest.warns(Unidentifiable):
            sw = solve_skinning(smp, ch.skeleton)
        assert np.all(np.isfinite(sw.weights))

    def test_recovers_cylinder_weights(self, cylinder):
        ch, samples = cylinder
        sw = solve_skinning(samples, ch.skeleton)
        l1 = np.abs(sw.weights - ch.gt_weights).sum(axis=1).mean()
        assert l1 <= 0.05
        lo, hi = ch.mesh.vertices.min(0), ch.mesh.vertices.max(0)
        diag2 = float(np.sum((hi - lo) ** 2))
        loss = np.mean([np.mean(np.sum((apply_lbs(ch.mesh, sw, skinning_transforms(
            forward_kinematics(ch.skeleton), smp.pose)) - smp.gt_deformed) ** 2, axis=1))
            for smp in samples])
        assert loss <= 1e-5 * diag2
        assert np.max(np.abs(sw.weights.sum(axis=1) - 1.0)) <= 1e-9

    def test_trace_is_monotone(self, cylinder):
        ch, samples = cylinder
        sw = solve_skinning(samples, ch.skeleton, SkinningConfig(max_iter=200))
        trace = np.array(sw.loss_trace)
        assert trace.size > 1
        assert np.all(np.diff(trace) <= 0)

    def test_sample_order_invariance(self, cylinder):
        ch, samples = cylinder
        cfg = SkinningConfig(max_iter=300)
        a = solve_skinning(samples, ch.skeleton, cfg)
        b = solve_skinning(samples[::-1], ch.skeleton, cfg)
        assert abs(a.loss_trace[-1] - b.loss_trace[-1]) <= 1e-6

    def test_deterministic(self, cylinder):
        ch, samples = cylinder
        cfg = SkinningConfig(max_iter=50)
        a = solve_skinning(samples, ch.skeleton, cfg)
        b = solve_skinning(samples, ch.skeleton, cfg)
        np.testing.assert_array_equal(a.logits, b.logits)

    def test_mismatched_rest_meshes(self):
        rng = np.random.default_rng(6)
        s, m, samples = _random_instance(rng)
        other = Mesh(np.zeros((3, 3)))
        bad = samples + [TrainingSample(other, np.zeros((3, 3)), samples[0].pose)]
        with pytest.raises(ShapeMismatch):
            solve_skinning(bad, s)
