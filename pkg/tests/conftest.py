import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from decomesh import fixtures
from decomesh.sdf import ComposedScene, Plane, RoomShell, SdfField, Sphere


@pytest.fixture(scope="session")
def two_sphere_bundle():
    return fixtures.generate(fixtures.two_sphere_spec())


@pytest.fixture(scope="session")
def noisy_sphere_bundle():
    return fixtures.generate(fixtures.two_sphere_spec(noise=0.1, seed=12))


@pytest.fixture(scope="session")
def twin_bundle():
    return fixtures.generate(fixtures.twin_feature_spec())


@pytest.fixture(scope="session")
def sphere_wall_scene():
    """Unit FG sphere at origin, BG wall plane z = 5 (solid beyond)."""
    fg = SdfField([Sphere((0.0, 0.0, 0.0), 1.0)])
    bg = SdfField([Plane((0.0, 0.0, -1.0), -5.0)])   # d = 5 - z
    return ComposedScene(fg, bg, beta=0.01)


@pytest.fixture(scope="session")
def room_scene():
    """4 x 4 x 3 m room shell with one FG sphere inside."""
    fg = SdfField([Sphere((0.5, -0.4, 0.6), 0.5)])
    bg = SdfField([RoomShell((0.0, 0.0, 1.5), (2.0, 2.0, 1.5))])
    return ComposedScene(fg, bg, beta=0.05)


@pytest.fixture(scope="session")
def bundle_dir(two_sphere_bundle, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    fixtures.save_bundle(two_sphere_bundle, out)
    return out
