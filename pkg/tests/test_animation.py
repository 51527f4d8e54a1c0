import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_mesh, random_rigid, random_rotation, random_skeleton, random_stochastic
from rigskin.animation import (
    ContactConfig,
    TargetPose,
    apply_lbs,
    clip_features,
    compute_frame_features,
    deform_clip,
    facing_frame_of,
    reconstruct_pose,
)
from rigskin.core_math import FacingFrame, RigidTransform, make_transform, yaw_matrix
from rigskin.errors import NonPositiveDt, NotStochastic, ShapeMismatch, SizeMismatch
from rigskin.fixtures import make_character
from rigskin.skeleton import forward_kinematics


@pytest.fixture(scope="module")
def biped():
    return make_character("biped_simple", seed=0).skeleton


def _random_pose(s, rng, spread=0.4):
    """Random but plausible pose: small joint rotations, random yaw and root position."""
    from scipy.spatial.transform import Rotation
    rot = Rotation.from_rotvec(rng.normal(scale=spread, size=(len(s), 3))).as_matrix()
    rot[0] = yaw_matrix(rng.uniform(-np.pi, np.pi)) @ rot[0]
    trans = np.array([rng.uniform(-2, 2), rng.uniform(-0.2, 0.2), rng.uniform(-2, 2)])
    return forward_kinematics(s, rot, trans)


def _moved(pose, s, g):
    """Apply a world rigid transform ``g`` (4x4) to a posed skeleton."""
    rot = np.array(pose.local_rotation)
    rot[0] = g[:3, :3] @ pose.global_rotations[0]
    root = g[:3, :3] @ pose.positions[0] + g[:3, 3]
    return forward_kinematics(s, rot, root - s.offsets[0])


class TestFrameFeatures:
    def test_static_pose(self, biped):
        pose = _random_pose(biped, np.random.default_rng(0))
        f = compute_frame_features(biped, pose, pose, 1 / 30)
        np.testing.assert_array_equal(f.v, 0.0)
        np.testing.assert_array_equal(f.r[:3], 0.0)
        assert f.r[3] == pytest.approx(pose.positions[0, 1])

    def test_translation_along_facing(self, biped):
        rest = forward_kinematics(biped)
        facing = facing_frame_of(biped, rest.positions).facing
        np.testing.assert_allclose(facing, [0, 0, 1], atol=1e-12)
        step = forward_kinematics(biped, None, [0.0, 0.0, 1.0])
        f = compute_frame_features(biped, rest, step, 1.0)
        np.testing.assert_allclose(f.r[:3], [0.0, 1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(f.p, compute_frame_features(biped, rest, rest, 1.0).p,
                                   atol=1e-12)
        # joint velocities in the current facing frame point along +z
        np.testing.assert_allclose(f.v, np.tile([0.0, 0.0, 1.0], (len(biped), 1)), atol=1e-12)

    def test_sideways_translation_is_dx(self, biped):
        rest = forward_kinematics(biped)
        step = forward_kinematics(biped, None, [0.5, 0.0, 0.0])
        f = compute_frame_features(biped, rest, step, 0.5)
        np.testing.assert_allclose(f.r[:3], [1.0, 0.0, 0.0], atol=1e-12)

    def test_turn_is_dtheta(self, biped):
        rest = forward_kinematics(biped)
        turned = _moved(rest, biped, make_transform(yaw_matrix(np.pi / 2), np.zeros(3)))
        f = compute_frame_features(biped, rest, turned, 1.0)
        assert f.r[2] == pytest.approx(np.pi / 2, abs=1e-12)
        np.testing.assert_allclose(f.facing.facing, [1, 0, 0], atol=1e-12)

    @pytest.mark.parametrize("theta", [np.pi / 2, -0.7, 2.5])
    def test_world_yaw_and_slide_invariance(self, biped, theta):
        rng = np.random.default_rng(1)
        a, b = _random_pose(biped, rng), _random_pose(biped, rng)
        g = make_transform(yaw_matrix(theta), [1.3, 0.0, -0.4])
        f0 = compute_frame_features(biped, a, b, 1 / 30)
        f1 = compute_frame_features(biped, _moved(a, biped, g), _moved(b, biped, g), 1 / 30)
        for name in ("q", "p", "p_prev", "v", "r", "c"):
            np.testing.assert_allclose(getattr(f1, name), getattr(f0, name), atol=1e-9,
                                       err_msg=name)

    def test_contact_rule(self, biped):
        rest = forward_kinematics(biped)
        f = compute_frame_features(biped, rest, rest, 1 / 30)
        lowest = np.flatnonzero(rest.positions[:, 1] < 0.05 * biped.height())
        assert lowest.size > 0
        np.testing.assert_array_equal(np.flatnonzero(f.c), lowest)
        fast = compute_frame_features(biped, rest, forward_kinematics(biped, None, [0, 0, 1.0]),
                                      1 / 30)
        assert not fast.c.any()
        loose = compute_frame_features(biped, rest, rest, 1 / 30,
                                       contact=ContactConfig(height_fraction=2.0))
        assert loose.c.all()

    def test_errors(self, biped):
        rest = forward_kinematics(biped)
        with pytest.raises(NonPositiveDt):
            compute_frame_features(biped, rest, rest, 0.0)
        other = random_skeleton(np.random.default_rng(0), 4)
        with pytest.raises(SizeMismatch):
            compute_frame_features(biped, rest, forward_kinematics(other), 1.0)
        tp = TargetPose(np.zeros((3, 6)), np.zeros(4), np.zeros(3))
        with pytest.raises(SizeMismatch):
            reconstruct_pose(biped, FacingFrame.from_yaw([0, 0, 0], 0.0), tp)

    def test_clip_features_count(self, biped):
        rng = np.random.default_rng(2)
        clip = forward_kinematics(biped, random_rotation(rng, 5 * len(biped)).reshape(
            5, len(biped), 3, 3))
        assert len(clip_features(biped, clip, 1 / 30)) == 4


class TestReconstruct:
    def test_rest_at_height(self, biped):
        h = 1.25
        tp = TargetPose(np.tile([1.0, 0, 0, 0, 1, 0], (len(biped), 1)), [0, 0, 0, h],
                        np.zeros(len(biped)))
        pose = reconstruct_pose(biped, RigidTransform(np.eye(3), np.zeros(3)), tp)
        rest = forward_kinematics(biped)
        expect = rest.positions - rest.positions[0] + [0, h, 0]
        np.testing.assert_allclose(pose.positions, expect, atol=1e-12)

    def test_quarter_turn(self, biped):
        tp = TargetPose(np.tile([1.0, 0, 0, 0, 1, 0], (len(biped), 1)),
                        [0, 0, np.pi / 2, 1.0], np.zeros(len(biped)))
        pose = reconstruct_pose(biped, FacingFrame.from_yaw([0, 0, 0], 0.0), tp)
        np.testing.assert_allclose(facing_frame_of(biped, pose.positions).facing, [1, 0, 0],
                                   atol=1e-12)

    def test_round_trip_100_frames(self, biped):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(100):
            dt = rng.uniform(0.01, 0.1)
            a, b = _random_pose(biped, rng), _random_pose(biped, rng)
            f = compute_frame_features(biped, a, b, dt)
            prev = facing_frame_of(biped, a.positions)
            back = reconstruct_pose(biped, prev, f.target(), dt)
            worst = max(worst, np.max(np.abs(back.global_transforms - b.global_transforms)))
            g = compute_frame_features(biped, a, back, dt)
            worst = max(worst, np.max(np.abs(g.q - f.q)), np.max(np.abs(g.r - f.r)))
        assert worst < 1e-6

    def test_rigid_transform_prev_root(self, biped):
        rng = np.random.default_rng(4)
        a, b = _random_pose(biped, rng), _random_pose(biped, rng)
        f = compute_frame_features(biped, a, b, 1.0)
        prev = facing_frame_of(biped, a.positions)
        as_rt = RigidTransform(prev.rotation, prev.origin)
        back = reconstruct_pose(biped, as_rt, f.target(), 1.0)
        np.testing.assert_allclose(back.positions, b.positions, atol=1e-9)


class TestLbs:
    def test_identity_transforms(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = random_mesh(rng, int(rng.integers(3, 50))).vertices
            w = random_stochastic(rng, v.shape[0], int(rng.integers(1, 7)))
            t = np.broadcast_to(np.eye(4), (w.shape[1], 4, 4))
            assert np.max(np.abs(apply_lbs(v, w, t) - v)) <= 1e-12

    def test_uniform_rigid(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            v = random_mesh(rng, int(rng.integers(3, 50))).vertices
            w = random_stochastic(rng, v.shape[0], int(rng.integers(1, 7)))
            g = random_rigid(rng)
            out = apply_lbs(v, w, np.broadcast_to(g, (w.shape[1], 4, 4)))
            assert np.max(np.abs(out - (v @ g[:3, :3].T + g[:3, 3]))) < 1e-9

    def test_half_half_translation(self):
        t = np.stack([make_transform(np.eye(3), [1, 0, 0]), make_transform(np.eye(3), [0, 1, 0])])
        out = apply_lbs(np.array([[2.0, 3.0, 4.0]]), np.array([[0.5, 0.5]]), t)
        np.testing.assert_array_equal(out, [[2.5, 3.5, 4.0]])

    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_linear_in_vertex_position(self, a, b):
        rng = np.random.default_rng(5)
        v1, v2 = rng.standard_normal((2, 6, 3))
        w = random_stochastic(rng, 6, 3)
        t = np.stack([random_rigid(rng) for _ in range(3)])
        lhs = apply_lbs(a * v1 + b * v2, w, t)
        # affine map: the translation part is carried by the weights, which sum to 1
        rhs = a * apply_lbs(v1, w, t) + b * apply_lbs(v2, w, t) + (1 - a - b) * apply_lbs(
            np.zeros_like(v1), w, t)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_errors(self):
        v = np.zeros((2, 3))
        with pytest.raises(ShapeMismatch):
            apply_lbs(v, np.ones((3, 1)), np.eye(4)[None])
        with pytest.raises(ShapeMismatch):
            apply_lbs(v, np.ones((2, 1)), np.broadcast_to(np.eye(4), (2, 4, 4)))
        with pytest.raises(NotStochastic):
            apply_lbs(v, np.full((2, 2), 0.4), np.broadcast_to(np.eye(4), (2, 4, 4)))


class TestDeformClip:
    def test_rest_clip_and_counts(self):
        ch = make_character("two_bone_cylinder", seed=0)
        s, m, w = ch.skeleton, ch.mesh, ch.gt_weights
        rest = forward_kinematics(s, np.broadcast_to(np.eye(3), (1, len(s), 3, 3)))
        out = deform_clip(m, w, s, rest)
        assert out.shape == (1, m.n_vertices, 3)
        np.testing.assert_allclose(out[0], m.vertices, atol=1e-12)
        rng = np.random.default_rng(0)
        rot = random_rotation(rng, 4 * len(s)).reshape(4, len(s), 3, 3)
        clip = forward_kinematics(s, rot)
        frames = deform_clip(m, w, s, clip)
        assert frames.shape[0] == 4
        perm = [2, 0, 3, 1]
        swapped = deform_clip(m, w, s, forward_kinematics(s, rot[perm]))
        np.testing.assert_array_equal(swapped, frames[perm])

    def test_rigid_clip(self):
        ch = make_character("two_bone_cylinder", seed=0)
        s, m, w = ch.skeleton, ch.mesh, ch.gt_weights
        r = yaw_matrix(0.8)
        rot = np.broadcast_to(np.eye(3), (1, len(s), 3, 3)).copy()
        rot[0, 0] = r
        shift = np.array([0.3, 0.1, -0.2])
        clip = forward_kinematics(s, rot, shift + s.offsets[0] - r @ s.offsets[0])
        out = deform_clip(m, w, s, clip)[0]
        np.testing.assert_allclose(out, m.vertices @ r.T + shift, atol=1e-9)
