import numpy as np
import pytest

from stridesim.sim import (
    BatchState,
    StepPipeline,
    compile_model,
    detect_nonfinite,
    fk_batch,
    forward_kinematics,
    physics_step,
    restore,
    snapshot,
)
from stridesim.terrain import FlatCfg, TerrainGridCfg, generate_grid

from conftest import pendulum_spec, two_leg_spec


def fk_oracle(spec, q_row):
    """Independent FK: compose 2x2 rotation matrices link by link."""

    def rotm(a):
        return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])

    base = np.array(q_row[:2])
    pitch = q_row[2]
    frames = {}
    tips = []
    for j, js in enumerate(spec.joints):
        if js.parent == -1:
            origin = base + rotm(pitch) @ np.array(js.attach_offset)
            angle = pitch + q_row[3 + j]
        else:
            p_origin, p_angle = frames[js.parent]
            origin = p_origin + rotm(p_angle) @ np.array(js.attach_offset)
            angle = p_angle + q_row[3 + j]
        tip = origin + js.link_length * (rotm(angle) @ np.array([0.0, -1.0]))
        frames[j] = (origin, angle)
        tips.append(tip)
    return np.array(tips)


# ---------------------------------------------------------------------------
# forward kinematics


def test_fk_straight_down_convention():
    model = compile_model(pendulum_spec(), 1)
    q = np.array([0.0, 1.0, 0.0, 0.0])
    base, tips = forward_kinematics(model, q)
    assert np.allclose(base, [0.0, 1.0, 0.0])
    assert np.allclose(tips[0], [0.0, 0.5])


def test_fk_quarter_turn():
    model = compile_model(pendulum_spec(), 1)
    _, tips = forward_kinematics(model, np.array([0.0, 1.0, 0.0, np.pi / 2]))
    assert np.allclose(tips[0], [0.5, 1.0])


def test_fk_matches_rotation_matrix_oracle(rng):
    spec = two_leg_spec()
    model = compile_model(spec, 1)
    for _ in range(25):
        q = rng.uniform(-2.0, 2.0, size=model.nq)
        _, tips = forward_kinematics(model, q)
        assert np.allclose(tips, fk_oracle(spec, q), atol=1e-12)


def test_fk_rejects_wrong_length():
    model = compile_model(pendulum_spec(), 1)
    with pytest.raises(ValueError, match="shape"):
        forward_kinematics(model, np.zeros(7))


def test_contact_jacobian_matches_finite_differences(rng):
    # the lever arms used for contact coupling are d(tip)/dq; check against
    # numeric differentiation of the FK map
    spec = two_leg_spec()
    model = compile_model(spec, 1)
    q = rng.uniform(-1.0, 1.0, size=(1, model.nq))
    eps = 1e-7
    for foot_idx, foot in enumerate(model.feet):
        chain = model.chains[foot]
        _, attach, tips = fk_batch(model, q)
        px, pz = tips[0, foot]
        base = q[0, 0:2]
        # analytic columns as used in the pipeline
        cols = {2: np.array([-(pz - base[1]), px - base[0]])}
        for j in chain:
            cols[3 + j] = np.array([-(pz - attach[0, j, 1]), px - attach[0, j, 0]])
        for dof, want in cols.items():
            dq = q.copy()
            dq[0, dof] += eps
            _, _, tips_p = fk_batch(model, dq)
            got = (tips_p[0, foot] - tips[0, foot]) / eps
            assert np.allclose(got, want, atol=1e-5)


# ---------------------------------------------------------------------------
# stepping


def test_free_fall_matches_scalar_recurrence():
    spec = pendulum_spec()
    model = compile_model(spec, 3)
    state = BatchState(model)
    state.q[:, 1] = 10.0  # stays clear of the ground for the whole run
    pipeline = StepPipeline(model, None)
    dt = spec.physics_dt
    m_total = spec.base_mass + spec.joints[0].link_mass
    inv = 1.0 / m_total
    z, vz = 10.0, 0.0
    for n in range(1, 201):
        pipeline.substep(state)
        a = (0.0 - m_total * spec.gravity) * inv
        vz = vz + a * dt
        z = z + vz * dt
        assert state.qd[0, 1] == vz
        assert state.q[0, 1] == z
        # velocity follows -g*n*dt to rounding
        assert abs(state.qd[0, 1] - (-spec.gravity * n * dt)) < 1e-12 * n


def test_static_equilibrium_penetration():
    spec = pendulum_spec()
    model = compile_model(spec, 1)
    state = BatchState(model)
    m_total = spec.base_mass + spec.joints[0].link_mass
    phi_expect = m_total * spec.gravity / spec.contact_stiffness
    state.q[0, 1] = 0.5  # foot exactly at ground level, then settle
    pipeline = StepPipeline(model, None)
    for _ in range(int(2.0 / spec.physics_dt)):
        pipeline.substep(state)
    phi = 0.0 - (state.q[0, 1] - 0.5)
    assert abs(phi - phi_expect) / phi_expect < 0.01
    assert abs(state.contact.normal_force[0, 0] - spec.contact_stiffness * phi) < 1.0
    assert abs(state.qd[0, 1]) < 1e-6


def test_identical_worlds_stay_identical(rng):
    model = compile_model(two_leg_spec(), 2)
    state = BatchState(model)
    row = rng.uniform(-0.5, 0.5, size=model.nq)
    state.q[:] = row
    state.qd[:] = rng.uniform(-0.5, 0.5, size=model.nq)
    physics_step(model, state)
    assert np.array_equal(state.q[0], state.q[1])
    assert np.array_equal(state.qd[0], state.qd[1])


def test_batched_step_equals_solo_step(rng):
    spec = two_leg_spec()
    batch_model = compile_model(spec, 4)
    batch = BatchState(batch_model)
    batch.q[:] = rng.uniform(-0.5, 0.8, size=(4, batch_model.nq))
    batch.qd[:] = rng.uniform(-1.0, 1.0, size=(4, batch_model.nq))
    batch.ctrl[:] = rng.uniform(-2.0, 2.0, size=(4, batch_model.num_joints))
    solo_states = []
    for w in range(4):
        solo_model = compile_model(spec, 1)
        solo = BatchState(solo_model)
        solo.q[0] = batch.q[w]
        solo.qd[0] = batch.qd[w]
        solo.ctrl[0] = batch.ctrl[w]
        for _ in range(50):
            physics_step(solo_model, solo)
        solo_states.append(solo)
    for _ in range(50):
        physics_step(batch_model, batch)
    for w in range(4):
        assert np.array_equal(batch.q[w], solo_states[w].q[0])
        assert np.array_equal(batch.qd[w], solo_states[w].qd[0])


def test_contact_complementarity_over_rollout(rng):
    spec = two_leg_spec()
    model = compile_model(spec, 8)
    state = BatchState(model)
    state.q[:, 1] = rng.uniform(0.3, 0.8, size=8)
    state.q[:, 3:] = rng.uniform(-0.4, 0.4, size=(8, 4))
    pipeline = StepPipeline(model, None)
    mu = spec.friction
    for _ in range(400):
        pipeline.substep(state)
        f_n = state.contact.normal_force
        f_t = state.contact.tangent_force
        assert (f_n >= 0.0).all()
        assert (f_n[~state.contact.in_contact] == 0.0).all()  # no force without penetration
        assert (np.abs(f_t) <= mu * f_n + 1e-12).all()


def test_ext_force_consumed_by_one_substep():
    spec = pendulum_spec()
    model = compile_model(spec, 1)
    state = BatchState(model)
    state.q[0, 1] = 5.0
    reference = BatchState(model)
    reference.q[0, 1] = 5.0
    state.ext_force[0] = (40.0, 0.0)
    physics_step(model, state)
    physics_step(model, reference)
    m_total = 8.5
    dvx = state.qd[0, 0] - reference.qd[0, 0]
    assert abs(dvx - 40.0 * spec.physics_dt / m_total) < 1e-12
    assert np.all(state.ext_force == 0.0)
    # next substep: no residual push
    qd_before = state.qd[0, 0]
    physics_step(model, state)
    assert state.qd[0, 0] == qd_before


def test_expansion_preserves_trajectories_bitwise(rng):
    spec = two_leg_spec()

    def rollout(expand_after):
        model = compile_model(spec, 3)
        state = BatchState(model)
        state.q[:, 1] = 0.48
        state.qd[:] = rng_local
        pipeline = StepPipeline(model, None)
        for i in range(60):
            if i == expand_after:
                gen = model.expand_field("friction")
                assert gen == 1
            pipeline.substep(state)
        return state.q.copy(), state.qd.copy()

    rng_local = np.random.default_rng(5).uniform(-0.5, 0.5, size=(3, 7))
    q_plain, qd_plain = rollout(expand_after=-1)
    q_expanded, qd_expanded = rollout(expand_after=30)
    assert np.array_equal(q_plain, q_expanded)
    assert np.array_equal(qd_plain, qd_expanded)


def test_step_on_generated_terrain_heights():
    cfg = TerrainGridCfg(rows=1, cols=1, patch_length=8.0, sub_terrains=[FlatCfg()])
    terrain = generate_grid(cfg, seed=0)
    model = compile_model(pendulum_spec(), 1)
    state = BatchState(model)
    state.q[0, 0] = 4.0
    state.q[0, 1] = 0.5
    pipeline = StepPipeline(model, terrain)
    for _ in range(200):
        pipeline.substep(state)
    assert abs(state.qd[0, 1]) < 1e-4  # settled on the flat patch


# ---------------------------------------------------------------------------
# nonfinite detection and snapshots


def test_detect_nonfinite_clean():
    model = compile_model(two_leg_spec(), 4)
    state = BatchState(model)
    assert not detect_nonfinite(state).any()


def test_detect_nonfinite_flags_only_injected_world():
    model = compile_model(two_leg_spec(), 5)
    state = BatchState(model)
    state.q[3, 0] = np.nan
    flags = detect_nonfinite(state)
    assert flags.tolist() == [False, False, False, True, False]
    state = BatchState(model)
    state.qd[0, 2] = np.inf
    assert detect_nonfinite(state).tolist() == [True, False, False, False, False]
    state = BatchState(model)
    state.ctrl[2, 1] = -np.inf
    assert detect_nonfinite(state).tolist() == [False, False, True, False, False]


def test_nan_propagates_without_raising():
    model = compile_model(pendulum_spec(), 2)
    state = BatchState(model)
    state.q[:, 1] = 0.4  # in contact so the terrain path runs too
    state.q[1, 0] = np.nan
    physics_step(model, state)
    flags = detect_nonfinite(state)
    assert flags.tolist() == [False, True]


def test_snapshot_restore_round_trip(rng):
    model = compile_model(two_leg_spec(), 3)
    state = BatchState(model)
    state.q[:] = rng.uniform(-1, 1, size=state.q.shape)
    state.qd[:] = rng.uniform(-1, 1, size=state.qd.shape)
    state.ctrl[:] = rng.uniform(-1, 1, size=state.ctrl.shape)
    state.sim_step = 42
    frame = snapshot(state)
    physics_step(model, state)
    restore(state, frame)
    assert np.array_equal(state.q, frame.q)
    assert np.array_equal(state.qd, frame.qd)
    assert np.array_equal(state.ctrl, frame.ctrl)
    assert state.sim_step == 42


def test_restore_then_step_equals_step(rng):
    model = compile_model(two_leg_spec(), 2)
    state = BatchState(model)
    state.q[:] = rng.uniform(-0.3, 0.6, size=state.q.shape)
    frame = snapshot(state)
    physics_step(model, state)
    q_direct = state.q.copy()
    restore(state, frame)
    physics_step(model, state)
    assert np.array_equal(state.q, q_direct)


def test_restore_rejects_wrong_shape():
    big = BatchState(compile_model(two_leg_spec(), 2))
    small = BatchState(compile_model(pendulum_spec(), 2))
    frame = snapshot(small)
    with pytest.raises(ValueError, match="does not match"):
        restore(big, frame)
