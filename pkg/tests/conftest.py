"""Shared fixtures: small deterministic scenes sized for fast tests."""

import numpy as np
import pytest

from silstruct.camera import ring_rig
from silstruct.geometry import Box, Pose, PrimitiveShape, Template, TemplateLibrary, box_shape
from silstruct.harness import build_plant_model, default_rig
from silstruct.rasterizer import render_scene


@pytest.fixture(scope="session")
def tiny_rig():
    """Two 64x48 views around the plant workspace."""
    return ring_rig(2, radius=3.0, elevation=0.8, target=(0.0, 0.0, 0.45), image_dims=(64, 48), focal=60.0)


@pytest.fixture(scope="session")
def small_plant():
    """A 40-template plant with 3 true leaves plus its tiny rig render."""
    model = build_plant_model(3, seed=11, t_total=40)
    rig = ring_rig(2, radius=3.0, elevation=0.8, target=(0.0, 0.0, 0.45), image_dims=(100, 80), focal=300.0)
    library = model.library()
    clean = render_scene(model.true_templates(), rig)
    return model, library, rig, clean


@pytest.fixture(scope="session")
def block_library():
    """A 3x3x2 grid of unit blocks: 9 positions x 2 layers = 18 templates."""
    block = box_shape("cube", 1.0, 1.0, 1.0, symmetry=4)
    from silstruct.geometry import enumerate_library

    bounds = Box((0.0, 0.0, 0.0), (3.0, 3.0, 2.0))
    return enumerate_library([block], bounds, 1.0, 2)


@pytest.fixture(scope="session")
def block_rig():
    return ring_rig(2, radius=9.0, elevation=3.0, target=(1.5, 1.5, 1.0), image_dims=(64, 48), focal=130.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
