import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rigskin.errors import NoRoot, SizeMismatch
from rigskin.fixtures import make_character, make_clip
from rigskin.retarget import (
    JointCorrespondence,
    build_correspondence,
    height_ratio,
    name_tokens,
    retarget_clip,
    retarget_pose,
)
from rigskin.skeleton import (
    AugmentConfig,
    Skeleton,
    augment_skeleton,
    forward_kinematics,
    ground_skeleton,
    insert_joint,
    remove_joint,
    scale_skeleton,
)


@pytest.fixture(scope="module")
def biped():
    ch = make_character("biped_simple", seed=0)
    return ground_skeleton(ch.skeleton), ch


def _clip(s, seed=0, frames=12):
    return make_clip(s, "random_smooth", frames=frames, seed=seed)


def _ancestors(s, j):
    out = []
    p = s.parents[j]
    while p >= 0:
        out.append(int(p))
        p = s.parents[p]
    return out


def assert_ancestry(src, tgt, corr):
    for a, b in enumerate(corr.map):
        if b < 0:
            continue
        for a2 in _ancestors(tgt, a):
            b2 = corr.map[a2]
            if b2 >= 0:
                assert b2 == b or b2 in _ancestors(src, b), (tgt.names[a], tgt.names[a2])


class TestCorrespondence:
    def test_identity(self, biped):
        s, _ = biped
        np.testing.assert_array_equal(build_correspondence(s, s).map, np.arange(len(s)))

    def test_inserted_midpoint_is_unmapped(self, biped):
        s, _ = biped
        leg = s.index("LeftLeg")
        tgt = insert_joint(s, leg, "LeftKneeHelper")
        corr = build_correspondence(s, tgt)
        for a, name in enumerate(tgt.names):
            if name == "LeftKneeHelper":
                assert corr.source_of(a) is None
            else:
                assert s.names[corr.map[a]] == name

    def test_renamed_isomorphic_chain(self):
        src = Skeleton(["A", "B", "C"], [-1, 0, 1],
                       [[0, 1, 0], [0, 0.5, 0], [0, 0.5, 0]], [0, 1, 2])
        tgt = Skeleton(["root", "mid", "tip"], [-1, 0, 1],
                       [[0, 2, 0], [0, 1, 0], [0, 1, 0]], [0, 1, 2])
        corr = build_correspondence(src, tgt)
        np.testing.assert_array_equal(corr.map, [0, 1, 2])
        assert corr.named(src, tgt) == {"root": "A", "mid": "B", "tip": "C"}

    def test_token_match(self):
        src = Skeleton(["Hips", "LeftUpLeg", "RightUpLeg"], [-1, 0, 0],
                       [[0, 1, 0], [0.1, 0, 0], [-0.1, 0, 0]], [0, 2, 1])
        tgt = Skeleton(["pelvis", "l_up_leg_jnt", "r_up_leg_jnt"], [-1, 0, 0],
                       [[0, 1, 0], [-0.1, 0, 0], [0.1, 0, 0]], [0, 2, 1])
        # offsets point the wrong way on purpose: tokens must win over direction
        np.testing.assert_array_equal(build_correspondence(src, tgt).map, [0, 1, 2])

    def test_name_tokens(self):
        assert name_tokens("mixamorig:LeftUpLeg") == {"left", "up", "leg"}
        assert name_tokens("l_hand_01") == {"l", "hand", "01"}

    def test_deterministic(self, biped):
        s, _ = biped
        tgt = augment_skeleton(s, 3)
        a = build_correspondence(s, tgt)
        b = build_correspondence(s, tgt)
        np.testing.assert_array_equal(a.map, b.map)

    def test_no_root(self, biped):
        s, _ = biped
        rootless = Skeleton.__new__(Skeleton)
        object.__setattr__(rootless, "parents", np.array([], dtype=np.int64))
        object.__setattr__(rootless, "names", ())
        with pytest.raises(NoRoot):
            build_correspondence(s, rootless)

    @given(st.integers(0, 10_000))
    def test_ancestry_on_augmented_skeletons(self, seed):
        s = make_character("biped_simple", seed=0).skeleton
        tgt = augment_skeleton(s, seed, AugmentConfig(n_insert=(0, 2), n_remove=(0, 2)))
        corr = build_correspondence(s, tgt)
        assert_ancestry(s, tgt, corr)
        back = build_correspondence(tgt, s)
        assert_ancestry(tgt, s, back)


class TestRetargetPose:
    def test_identity_is_exact(self, biped):
        s, _ = biped
        clip = _clip(s)
        out = retarget_clip(clip, s, s)
        np.testing.assert_array_equal(out.local_rotation, clip.local_rotation)
        np.testing.assert_allclose(out.positions, clip.positions, rtol=0, atol=1e-12)

    def test_half_scale_halves_root_translation(self, biped):
        s, _ = biped
        half = scale_skeleton(s, 0.5)
        clip = _clip(s, seed=1)
        out = retarget_clip(clip, s, half)
        np.testing.assert_array_equal(out.local_rotation, clip.local_rotation)
        np.testing.assert_allclose(out.positions[:, 0], 0.5 * clip.positions[:, 0],
                                   rtol=0, atol=1e-12)

    @pytest.mark.parametrize("factor", [0.37, 1.0, 1.8])
    def test_root_trajectory_follows_height_ratio(self, biped, factor):
        s, _ = biped
        tgt = ground_skeleton(augment_skeleton(scale_skeleton(s, factor), 5))
        clip = _clip(s, seed=2)
        out = retarget_clip(clip, s, tgt)
        ratio = height_ratio(s, tgt)
        np.testing.assert_allclose(out.positions[:, 0], ratio * clip.positions[:, 0],
                                   rtol=0, atol=1e-9)

    def test_rest_maps_to_rest(self, biped):
        s, _ = biped
        tgt = augment_skeleton(s, 7)
        rest = forward_kinematics(s)
        for corr in (build_correspondence(s, tgt), JointCorrespondence(np.r_[0, -np.ones(
                len(tgt) - 1, dtype=int)])):
            out = retarget_pose(rest, corr, tgt, s)
            np.testing.assert_array_equal(out.local_rotation,
                                          np.broadcast_to(np.eye(3), (len(tgt), 3, 3)))
            np.testing.assert_allclose(out.positions, tgt.g, rtol=0, atol=1e-12)

    def test_unmapped_joint_gets_identity(self, biped):
        s, _ = biped
        tgt = insert_joint(s, s.index("LeftForeArm"), "LeftElbowHelper")
        clip = _clip(s, seed=3)
        out = retarget_clip(clip, s, tgt)
        k = tgt.names.index("LeftElbowHelper")
        np.testing.assert_array_equal(out.local_rotation[:, k],
                                      np.broadcast_to(np.eye(3), (len(clip), 3, 3)))
        # the inserted joint sits on the straight bone, so world positions of the originals match
        orig = [tgt.names.index(n) for n in s.names]
        np.testing.assert_allclose(out.positions[:, orig], clip.positions, rtol=0, atol=1e-9)

    def test_removed_joint_rotation_is_composed(self, biped):
        s, _ = biped
        arm = s.index("LeftArm")
        tgt = remove_joint(s, arm)
        clip = _clip(s, seed=4)
        out = retarget_clip(clip, s, tgt)
        fore = tgt.names.index("LeftForeArm")
        want = clip.local_rotation[:, arm] @ clip.local_rotation[:, s.index("LeftForeArm")]
        np.testing.assert_allclose(out.local_rotation[:, fore], want, rtol=0, atol=1e-14)

    def test_size_mismatch(self, biped):
        s, _ = biped
        clip = _clip(s)
        tgt = augment_skeleton(s, 1)
        with pytest.raises(SizeMismatch):
            retarget_pose(clip, build_correspondence(s, s), tgt, s)
        with pytest.raises(SizeMismatch):
            retarget_pose(clip, build_correspondence(tgt, tgt), tgt, tgt)
