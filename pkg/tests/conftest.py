import numpy as np
import pytest

from stridesim.sim import JointSpec, ModelSpec


def pendulum_spec(**overrides) -> ModelSpec:
    """Base with one straight-down leg; the simplest contact-capable model."""
    defaults = dict(
        name="pendulum",
        base_mass=8.0,
        base_inertia=0.15,
        joints=[
            JointSpec(
                name="leg",
                parent=-1,
                attach_offset=(0.0, 0.0),
                link_length=0.5,
                link_mass=0.5,
                rotor_inertia=0.02,
                damping=0.2,
            )
        ],
        feet=[0],
    )
    defaults.update(overrides)
    return ModelSpec(**defaults)


def two_leg_spec() -> ModelSpec:
    """Planar biped: two hip-knee chains hanging from the base."""
    joints = []
    for side, hip_x in (("l", -0.1), ("r", 0.1)):
        hip = len(joints)
        joints.append(
            JointSpec(name=f"{side}_hip", parent=-1, attach_offset=(hip_x, 0.0), link_length=0.25)
        )
        joints.append(
            JointSpec(
                name=f"{side}_knee", parent=hip, attach_offset=(0.0, -0.25), link_length=0.25
            )
        )
    return ModelSpec(name="biped", joints=joints, feet=[1, 3])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
