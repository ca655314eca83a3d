"""Robot model description for the planar batched simulator.

A model is a floating planar base (x, z, pitch) carrying chains of revolute
joints. Each joint j hangs a link of length ``link_length`` below its pivot:
at zero joint angle the link points straight down in its parent's frame. The
pivot sits at ``attach_offset`` expressed in the parent frame, whose origin is
the parent joint's own pivot (or the base origin for base-mounted joints). A
joint whose link tip carries a contact point is listed in ``feet``.

Specs are plain data and can be loaded from / saved to a small YAML document
(see ``load_model_spec``); the file schema is versioned via ``spec_version``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

SPEC_VERSION = 1


class SpecError(ValueError):
    """Raised when a model description violates a structural constraint."""


@dataclass
class JointSpec:
    name: str
    parent: int  # -1 = base, else index of an earlier joint
    attach_offset: tuple[float, float] = (0.0, 0.0)
    link_length: float = 0.3
    link_mass: float = 0.5
    rotor_inertia: float = 0.1  # reflected gearbox inertia; also the substep stability margin
    damping: float = 0.1
    pos_limits: tuple[float, float] = (-2.5, 2.5)
    soft_limit_fraction: float = 0.9


@dataclass
class ModelSpec:
    name: str = "robot"
    base_mass: float = 8.0
    base_inertia: float = 0.15
    joints: list[JointSpec] = field(default_factory=list)
    feet: list[int] = field(default_factory=list)
    contact_stiffness: float = 2.0e4  # k_n, N/m
    contact_damping: float = 600.0  # c_n, N*s/m
    # k_t, N*s/m; kept low: it couples into joint DOFs through lever arms and
    # explicit viscous forces destabilize semi-implicit Euler when
    # dt * k_t * lever^2 / inertia approaches 2
    tangential_gain: float = 50.0
    friction: float = 1.0
    gravity: float = 9.81  # positive down
    physics_dt: float = 0.005
    decimation: int = 4
    spec_version: int = SPEC_VERSION

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @property
    def nq(self) -> int:
        return 3 + len(self.joints)

    def chain_tips(self) -> list[int]:
        """Joints that no other joint attaches to."""
        parents = {j.parent for j in self.joints}
        return [i for i in range(len(self.joints)) if i not in parents]

    def validate(self) -> None:
        def positive(value: float, what: str) -> None:
            if not value > 0.0:
                raise SpecError(f"{what} must be strictly positive, got {value}")

        positive(self.base_mass, "base_mass")
        positive(self.base_inertia, "base_inertia")
        positive(self.physics_dt, "physics_dt")
        positive(self.contact_stiffness, "contact_stiffness")
        if self.decimation < 1:
            raise SpecError(f"decimation must be >= 1, got {self.decimation}")
        names = set()
        for i, j in enumerate(self.joints):
            where = f"joint {i} ({j.name!r})"
            if j.name in names:
                raise SpecError(f"duplicate joint name {j.name!r}")
            names.add(j.name)
            if not (-1 <= j.parent < i):
                raise SpecError(f"{where}: parent must be -1 (base) or an earlier joint index")
            positive(j.link_length, f"{where}: link_length")
            positive(j.link_mass, f"{where}: link_mass")
            positive(j.rotor_inertia, f"{where}: rotor_inertia")
            if j.damping < 0.0:
                raise SpecError(f"{where}: damping must be >= 0")
            lo, hi = j.pos_limits
            if not lo < hi:
                raise SpecError(f"{where}: pos_limits must satisfy lo < hi, got ({lo}, {hi})")
            if not 0.0 < j.soft_limit_fraction <= 1.0:
                raise SpecError(f"{where}: soft_limit_fraction must be in (0, 1]")
        tips = set(self.chain_tips())
        for f_idx in self.feet:
            if f_idx not in tips:
                raise SpecError(f"feet: joint index {f_idx} is not a chain tip")


def load_model_spec(path: str) -> ModelSpec:
    """Load and validate a spec from its YAML document.

    Schema (spec_version 1)::

        spec_version: 1
        name: biped
        base_mass: 8.0
        base_inertia: 0.15
        contact: {stiffness: 2.0e4, damping: 600.0, tangential_gain: 400.0, friction: 1.0}
        gravity: 9.81
        physics_dt: 0.005
        decimation: 4
        joints:
          - {name: l_hip, parent: -1, attach_offset: [-0.1, 0.0], link_length: 0.25,
             link_mass: 0.5, rotor_inertia: 0.02, damping: 0.05,
             pos_limits: [-2.5, 2.5], soft_limit_fraction: 0.9}
        feet: [1, 3]
    """
    with open(path, "r") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise SpecError(f"model spec file {path!r} is not a mapping")
    version = doc.get("spec_version")
    if version != SPEC_VERSION:
        raise SpecError(f"unsupported spec_version {version!r} (expected {SPEC_VERSION})")
    contact = doc.get("contact", {})
    joints = [
        JointSpec(
            name=j["name"],
            parent=int(j["parent"]),
            attach_offset=tuple(j.get("attach_offset", (0.0, 0.0))),
            link_length=float(j.get("link_length", 0.3)),
            link_mass=float(j.get("link_mass", 0.5)),
            rotor_inertia=float(j.get("rotor_inertia", 0.02)),
            damping=float(j.get("damping", 0.05)),
            pos_limits=tuple(j.get("pos_limits", (-2.5, 2.5))),
            soft_limit_fraction=float(j.get("soft_limit_fraction", 0.9)),
        )
        for j in doc.get("joints", [])
    ]
    spec = ModelSpec(
        name=doc.get("name", "robot"),
        base_mass=float(doc.get("base_mass", 8.0)),
        base_inertia=float(doc.get("base_inertia", 0.15)),
        joints=joints,
        feet=[int(i) for i in doc.get("feet", [])],
        contact_stiffness=float(contact.get("stiffness", 2.0e4)),
        contact_damping=float(contact.get("damping", 600.0)),
        tangential_gain=float(contact.get("tangential_gain", 400.0)),
        friction=float(contact.get("friction", 1.0)),
        gravity=float(doc.get("gravity", 9.81)),
        physics_dt=float(doc.get("physics_dt", 0.005)),
        decimation=int(doc.get("decimation", 4)),
    )
    spec.validate()
    return spec


def save_model_spec(spec: ModelSpec, path: str) -> None:
    doc = {
        "spec_version": spec.spec_version,
        "name": spec.name,
        "base_mass": spec.base_mass,
        "base_inertia": spec.base_inertia,
        "contact": {
            "stiffness": spec.contact_stiffness,
            "damping": spec.contact_damping,
            "tangential_gain": spec.tangential_gain,
            "friction": spec.friction,
        },
        "gravity": spec.gravity,
        "physics_dt": spec.physics_dt,
        "decimation": spec.decimation,
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "attach_offset": list(j.attach_offset),
                "link_length": j.link_length,
                "link_mass": j.link_mass,
                "rotor_inertia": j.rotor_inertia,
                "damping": j.damping,
                "pos_limits": list(j.pos_limits),
                "soft_limit_fraction": j.soft_limit_fraction,
            }
            for j in spec.joints
        ],
        "feet": list(spec.feet),
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
