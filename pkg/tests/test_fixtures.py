import numpy as np
import pytest

from rigskin.animation import check_stochastic
from rigskin.asset_io import (
    from_clip,
    parse_bvh,
    parse_obj,
    parse_skeleton_json,
    parse_weights,
    write_bvh,
    write_obj,
    write_skeleton_json,
    write_weights,
)
from rigskin.errors import InvalidConfig
from rigskin.fixtures import (
    TEMPLATES,
    CharacterParams,
    deformed_frames,
    falloff_weights,
    make_character,
    make_clip,
    smoothstep,
)
from rigskin.mesh import extract_edges
from rigskin.skeleton import ground_height


def _index_map(s, back):
    """Index in ``back`` of each joint of ``s``; BVH End Sites are named after their parent."""
    return [back.index(n) if n in back.names else back.index(s.names[s.parents[k]] + "_end")
            for k, n in enumerate(s.names)]


@pytest.fixture(scope="module", params=TEMPLATES)
def character(request):
    return make_character(request.param, seed=0)


class TestCharacter:
    def test_cylinder_counts(self):
        ch = make_character("two_bone_cylinder", seed=0)
        assert ch.mesh.n_vertices == 8 * 8 == 64
        assert len(ch.skeleton) == 3
        p = CharacterParams(n_rings=5, ring_resolution=7)
        assert make_character("two_bone_cylinder", params=p).mesh.n_vertices == 35

    def test_weights_are_stochastic(self, character):
        w = character.gt_weights
        check_stochastic(w)
        assert np.all(w >= 0)
        assert np.max(np.abs(w.sum(axis=1) - 1.0)) <= 1e-12

    def test_at_most_two_owning_joints_per_vertex(self, character):
        assert np.all(np.count_nonzero(character.gt_weights, axis=1) <= 2)

    def test_mesh_within_enlarged_skeleton_box(self, character):
        g = character.skeleton.g
        lo, hi = g.min(axis=0), g.max(axis=0)
        centre, radius = 0.5 * (lo + hi), 0.5 * np.linalg.norm(hi - lo)
        dist = np.linalg.norm(character.mesh.vertices - centre, axis=1)
        assert dist.max() <= 1.2 * radius

    def test_deformed_frames_are_finite_and_non_degenerate(self, character):
        edges = extract_edges(character.mesh.faces)
        for clip in character.gt_clips:
            frames = deformed_frames(character, clip)
            assert np.all(np.isfinite(frames))
            lengths = np.linalg.norm(frames[:, edges[:, 0]] - frames[:, edges[:, 1]], axis=-1)
            assert lengths.min() > 0

    def test_deterministic(self):
        for template in TEMPLATES:
            a = make_character(template, seed=4)
            b = make_character(template, seed=4)
            np.testing.assert_array_equal(a.mesh.vertices, b.mesh.vertices)
            np.testing.assert_array_equal(a.gt_weights, b.gt_weights)
            for ca, cb in zip(a.gt_clips, b.gt_clips):
                np.testing.assert_array_equal(ca.local_rotation, cb.local_rotation)

    def test_seed_changes_proportions(self):
        a = make_character("biped_simple", seed=0).skeleton
        b = make_character("biped_simple", seed=1).skeleton
        assert not np.array_equal(a.offsets, b.offsets)

    def test_invalid_params(self):
        with pytest.raises(InvalidConfig):
            make_character("quadruped")
        with pytest.raises(InvalidConfig):
            make_character("biped_simple", params=CharacterParams(ring_resolution=7))
        with pytest.raises(InvalidConfig):
            make_character("biped_simple", params={"no_such_field": 1})
        with pytest.raises(InvalidConfig):
            make_character("two_bone_cylinder", params=CharacterParams(n_rings=1))


class TestBipedSymmetry:
    @pytest.fixture(scope="class", params=["biped_simple", "biped_branchy"])
    @staticmethod
    def biped(request):
        return make_character(request.param, seed=2)

    def test_grounded_on_toes(self, biped):
        assert abs(ground_height(biped.skeleton)) <= 1e-12

    def test_skeleton_mirror(self, biped):
        s = biped.skeleton
        np.testing.assert_array_equal(s.g[s.rho] * [-1, 1, 1], s.g)

    def test_vertex_mirror(self, biped):
        v = biped.mesh.vertices
        m = biped.vertex_mirror
        np.testing.assert_array_equal(m[m], np.arange(len(v)))
        np.testing.assert_array_equal(v[m] * [-1, 1, 1], v)

    def test_mirrored_vertices_have_mirrored_weights(self, biped):
        w = biped.gt_weights
        rho = biped.skeleton.rho
        # row of the mirror vertex, read through the joint map, is the original row
        np.testing.assert_allclose(w[biped.vertex_mirror][:, rho], w, rtol=0, atol=1e-12)


class TestFalloff:
    def test_smoothstep(self):
        np.testing.assert_array_equal(smoothstep(0.0, 1.0, [-1.0, 0.0, 0.5, 1.0, 2.0]),
                                      [0.0, 0.0, 0.5, 1.0, 1.0])

    def test_equidistant_vertex_splits_evenly(self):
        s = make_character("two_bone_cylinder", seed=0).skeleton
        # on the shared joint both bones are at distance zero
        w = falloff_weights([[0.0, 1.0, 0.0]], s, 0.3)
        np.testing.assert_array_equal(w, [[0.5, 0.5, 0.0]])

    def test_far_from_the_joint_is_rigid(self):
        s = make_character("two_bone_cylinder", seed=0).skeleton
        w = falloff_weights([[0.25, 0.2, 0.0], [0.25, 1.8, 0.0]], s, 0.3)
        np.testing.assert_array_equal(w, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

    def test_hand_computed_blend(self):
        s = make_character("two_bone_cylinder", seed=0).skeleton
        # distances: 0.25 to bone 0, sqrt(0.25^2 + 0.1^2) to bone 1
        v = [[0.25, 0.9, 0.0]]
        gap = np.hypot(0.25, 0.1) - 0.25
        wb = 0.5 * (1.0 - smoothstep(0.0, 0.3, gap))
        np.testing.assert_allclose(falloff_weights(v, s, 0.3), [[1.0 - wb, wb, 0.0]],
                                   rtol=0, atol=1e-15)


class TestClips:
    @pytest.fixture(scope="class")
    @staticmethod
    def skel():
        return make_character("biped_simple", seed=0).skeleton

    @pytest.mark.parametrize("kind", ["wave", "crouch", "random_smooth"])
    def test_single_frame_is_rest(self, skel, kind):
        clip = make_clip(skel, kind, frames=1, seed=3)
        assert len(clip) == 1
        np.testing.assert_array_equal(clip.local_rotation[0],
                                      np.broadcast_to(np.eye(3), (len(skel), 3, 3)))
        np.testing.assert_allclose(clip.positions[0], skel.g, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("bound", [0.1, 0.6, 1.5])
    def test_random_smooth_respects_angle_bound(self, skel, bound):
        clip = make_clip(skel, "random_smooth", frames=60, seed=5, max_angle=bound)
        r = clip.local_rotation
        cos = np.clip((np.trace(r, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
        assert np.arccos(cos).max() <= bound + 1e-9

    def test_same_seed_same_clip(self, skel):
        for kind in ("wave", "crouch", "random_smooth"):
            a = make_clip(skel, kind, frames=10, seed=8)
            b = make_clip(skel, kind, frames=10, seed=8)
            np.testing.assert_array_equal(a.local_rotation, b.local_rotation)
            np.testing.assert_array_equal(a.root_translation, b.root_translation)
        c = make_clip(skel, "random_smooth", frames=10, seed=9)
        assert not np.array_equal(a.local_rotation, c.local_rotation)

    def test_frames_are_smooth(self, skel):
        clip = make_clip(skel, "random_smooth", frames=120, seed=0)
        step = np.abs(np.diff(clip.positions, axis=0)).max()
        assert step < 0.1 * skel.height()

    def test_crouch_keeps_feet_on_ground(self, skel):
        clip = make_clip(skel, "crouch", frames=16, seed=0)
        toes = [skel.index("LeftToe_end"), skel.index("RightToe_end")]
        np.testing.assert_allclose(clip.positions[:, toes, 1].min(axis=1), 0.0, atol=1e-12)

    def test_invalid(self, skel):
        with pytest.raises(InvalidConfig):
            make_clip(skel, "jump")
        with pytest.raises(InvalidConfig):
            make_clip(skel, frames=0)
        with pytest.raises(InvalidConfig):
            make_clip(skel, max_angle=-1.0)


class TestAssetsRoundTrip:
    def test_obj(self, character):
        back = parse_obj(write_obj(character.mesh))
        np.testing.assert_allclose(back.vertices, character.mesh.vertices, rtol=0, atol=1e-7)
        np.testing.assert_array_equal(back.faces, character.mesh.faces)

    def test_skeleton_json(self, character):
        s = character.skeleton
        back = parse_skeleton_json(write_skeleton_json(s))
        idx = np.array([back.index(n) for n in s.names])
        np.testing.assert_allclose(back.g[idx], s.g, rtol=0, atol=1e-7)
        np.testing.assert_array_equal(back.rho[idx], idx[s.rho])
        np.testing.assert_array_equal(back.parents[idx[1:]], idx[s.parents[1:]])

    def test_weights(self, character):
        w, names = parse_weights(write_weights(character.gt_weights, character.skeleton.names))
        assert tuple(names) == character.skeleton.names
        assert np.max(np.abs(w - character.gt_weights)) < 1e-7

    def test_bvh_clips(self, character):
        s = character.skeleton
        for clip in character.gt_clips:
            back = parse_bvh(write_bvh(from_clip(s, clip, character.frame_time)))
            idx = _index_map(s, back.skeleton)
            np.testing.assert_allclose(back.to_clip().positions[:, idx], clip.positions,
                                       rtol=0, atol=1e-5)
