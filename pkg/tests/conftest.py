"""Shared helpers and random-instance builders for the test suite."""

import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.spatial.transform import Rotation

from rigskin.mesh import Mesh
from rigskin.skeleton import Skeleton

DATA = os.path.join(os.path.dirname(__file__), "data")

settings.register_profile(
    "rigskin", deadline=None, max_examples=60, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("rigskin")


def data_path(name):
    return os.path.join(DATA, name)


def random_rotation(rng, n=None):
    """Uniformly distributed rotation matrices."""
    return Rotation.random(n, random_state=rng).as_matrix()


def random_skeleton(rng, n_joints):
    """Random tree with parents preceding children and unrelated names."""
    parents = [-1] + [int(rng.integers(0, k)) for k in range(1, n_joints)]
    offsets = rng.uniform(-1.0, 1.0, (n_joints, 3))
    names = [f"j{k}" for k in range(n_joints)]
    return Skeleton(names, parents, offsets, list(range(n_joints)))


def random_stochastic(rng, n, j):
    w = rng.uniform(0.0, 1.0, (n, j)) ** 3
    w[np.arange(n), rng.integers(0, j, n)] += 0.1
    return w / w.sum(axis=1, keepdims=True)


def random_mesh(rng, n_vertices, n_faces=None):
    v = rng.uniform(-1.0, 1.0, (n_vertices, 3))
    n_faces = n_vertices if n_faces is None else n_faces
    faces = []
    while len(faces) < n_faces:
        f = rng.choice(n_vertices, 3, replace=False)
        faces.append(f)
    return Mesh(v, np.array(faces))


def random_rigid(rng):
    t = np.eye(4)
    t[:3, :3] = random_rotation(rng)
    t[:3, 3] = rng.uniform(-2.0, 2.0, 3)
    return t


def unit_cube():
    from rigskin.asset_io import read_obj

    return read_obj(data_path("cube.obj"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cube():
    return unit_cube()


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance criteria lines recorded during the run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
