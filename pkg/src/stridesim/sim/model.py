"""Compiled model: chain structure plus the shared/per-world field table.

``compile_model`` turns a validated ``ModelSpec`` into flat numpy structure
arrays (parents, offsets, lengths, chains) shared by all worlds, and registers
the randomizable parameters (masses, inertias, damping, friction -- actuator
gains join the table when actuators are built) in a field table. Each table
entry starts *shared*: one value read identically by every world. Domain
randomization expands an entry to a leading-world-dimension array; expansion
is one-way and bumps the model generation so the step pipeline re-specializes
to the new layout.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .spec import ModelSpec, SpecError


class FieldError(KeyError):
    """Unknown id in the randomizable field table."""


class ModelField:
    """One randomizable parameter: compile-time base value + live storage."""

    def __init__(self, base: np.ndarray):
        self.base = np.array(base, dtype=np.float64)  # shape () or (k,)
        self.value = self.base.copy()
        self.expanded = False

    def per_world(self, n_worlds: int) -> np.ndarray:
        """View of shape (n_worlds, *base.shape) regardless of layout."""
        if self.expanded:
            return self.value
        return np.broadcast_to(self.value, (n_worlds,) + self.base.shape)


class Model:
    """Immutable chain structure + the mutable randomizable-field table."""

    def __init__(self, spec: ModelSpec, n_worlds: int):
        self.spec = spec
        self.n_worlds = n_worlds
        k = spec.num_joints
        self.nq = 3 + k
        self.num_joints = k
        self.joint_names = [j.name for j in spec.joints]
        self.parents = np.array([j.parent for j in spec.joints], dtype=np.int64)
        self.attach_offsets = np.array(
            [j.attach_offset for j in spec.joints], dtype=np.float64
        ).reshape(k, 2)
        self.link_lengths = np.array([j.link_length for j in spec.joints], dtype=np.float64)
        self.pos_limits = np.array([j.pos_limits for j in spec.joints], dtype=np.float64).reshape(
            k, 2
        )
        self.soft_limit_fraction = np.array(
            [j.soft_limit_fraction for j in spec.joints], dtype=np.float64
        )
        self.feet = np.array(spec.feet, dtype=np.int64)
        # ancestor chain (base -> joint, inclusive) per joint
        self.chains: list[list[int]] = []
        for j in range(k):
            chain: list[int] = []
            node = j
            while node != -1:
                chain.append(node)
                node = int(self.parents[node])
            self.chains.append(chain[::-1])
        self.gravity = spec.gravity
        self.physics_dt = spec.physics_dt

        self._fields: dict[str, ModelField] = {}
        self.generation = 0
        self._rebuild_hooks: list[Callable[[], None]] = []

        self.register_field("base_mass", spec.base_mass)
        self.register_field("base_inertia", spec.base_inertia)
        self.register_field("link_mass", np.array([j.link_mass for j in spec.joints]))
        self.register_field("rotor_inertia", np.array([j.rotor_inertia for j in spec.joints]))
        self.register_field("damping", np.array([j.damping for j in spec.joints]))
        self.register_field("friction", spec.friction)

    # -- field table --------------------------------------------------------

    def register_field(self, name: str, base) -> None:
        if name in self._fields:
            raise FieldError(f"field {name!r} already registered")
        self._fields[name] = ModelField(np.asarray(base, dtype=np.float64))

    def field_names(self) -> list[str]:
        return list(self._fields)

    def field(self, name: str) -> ModelField:
        try:
            return self._fields[name]
        except KeyError:
            raise FieldError(
                f"unknown randomizable field {name!r}; known: {', '.join(self._fields)}"
            ) from None

    def expand_field(self, name: str) -> int:
        """Expand a shared field to a per-world array; returns the generation.

        A second expansion of the same field is a no-op (the generation does
        not move). Must only be called between control steps.
        """
        f = self.field(name)
        if not f.expanded:
            f.value = np.broadcast_to(f.value, (self.n_worlds,) + f.base.shape).copy()
            f.expanded = True
            self.generation += 1
            for hook in self._rebuild_hooks:
                hook()
        return self.generation

    def on_layout_change(self, hook: Callable[[], None]) -> None:
        self._rebuild_hooks.append(hook)

    # -- derived quantities --------------------------------------------------

    def total_mass(self) -> np.ndarray:
        """Robot mass per world: base plus all links; shape () or (N,)."""
        base = self.field("base_mass").value
        link = self.field("link_mass").value
        return base + link.sum(axis=-1)

    def mass_diagonal(self) -> np.ndarray:
        """Diagonal generalized inertia, shape (N, nq).

        Base x/z carry the total mass (so unforced flight integrates the
        gravity parabola exactly); pitch carries the base inertia; each joint
        its rotor inertia.
        """
        n = self.n_worlds
        diag = np.empty((n, self.nq), dtype=np.float64)
        m_tot = np.broadcast_to(self.total_mass(), (n,))
        diag[:, 0] = m_tot
        diag[:, 1] = m_tot
        diag[:, 2] = np.broadcast_to(self.field("base_inertia").value, (n,))
        diag[:, 3:] = self.field("rotor_inertia").per_world(n)
        return diag


def compile_model(spec: ModelSpec, n_worlds: int) -> Model:
    """Validate ``spec`` and build a Model with all fields shared."""
    if n_worlds < 1:
        raise SpecError(f"n_worlds must be >= 1, got {n_worlds}")
    spec.validate()
    return Model(spec, n_worlds)
