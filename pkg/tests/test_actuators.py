import numpy as np
import pytest

from stridesim.actuators import (
    ActuatorError,
    Actuator,
    DcMotorCfg,
    DelayBuffer,
    DelayedCfg,
    IdealPdCfg,
    MlpActuatorCfg,
    dc_motor_torque,
    load_mlp_weights,
    mlp_forward,
    pd_torque,
    save_mlp_weights,
)
from stridesim.rng import StreamPack
from stridesim.sim import BatchState, compile_model

from conftest import two_leg_spec


# ---------------------------------------------------------------------------
# PD


def test_pd_zero_error_zero_torque():
    assert pd_torque(50.0, 5.0, 100.0, 1.2, 0.4, 1.2, 0.4) == 0.0


def test_pd_direct_formula():
    assert pd_torque(10.0, 0.0, 100.0, 0.5, 0.0, 0.0, 0.0) == 5.0


def test_pd_saturates_at_effort_limit():
    assert pd_torque(1000.0, 0.0, 20.0, 1.0, 0.0, 0.0, 0.0) == 20.0
    assert pd_torque(1000.0, 0.0, 20.0, -1.0, 0.0, 0.0, 0.0) == -20.0


# ---------------------------------------------------------------------------
# DC motor


def test_dc_zero_speed_envelope_is_effort_limit():
    # with |pd| below the limit it matches the ideal PD exactly
    for err in (-3.0, -0.1, 0.0, 0.2, 2.5):
        got = dc_motor_torque(40.0, 1.0, 20.0, 30.0, 10.0, err, 0.0, 0.0, 0.0)
        want = pd_torque(40.0, 1.0, 20.0, err, 0.0, 0.0, 0.0)
        assert got == want


def test_dc_no_positive_torque_at_velocity_limit():
    got = dc_motor_torque(1000.0, 0.0, 20.0, 30.0, 10.0, 5.0, 0.0, 0.0, 10.0)
    assert got == 0.0


def test_dc_envelope_mid_speed():
    # saturation 30, effort 20, vel limit 10, qd = 5 -> tau_hi = min(15, 20)
    got = dc_motor_torque(1e6, 0.0, 20.0, 30.0, 10.0, 1.0, 0.0, 0.0, 5.0)
    assert got == 15.0


def envelope_oracle(sat, effort, vlim, qd):
    hi = min(max(sat * (1 - qd / vlim), 0.0), effort)
    lo = max(min(sat * (-1 - qd / vlim), 0.0), -effort)
    return lo, hi


def test_dc_envelope_matches_hand_oracle_20_points(rng):
    for _ in range(20):
        sat = rng.uniform(10.0, 60.0)
        effort = rng.uniform(5.0, sat)
        vlim = rng.uniform(2.0, 30.0)
        qd = rng.uniform(-2 * vlim, 2 * vlim)
        lo, hi = envelope_oracle(sat, effort, vlim, qd)
        big = dc_motor_torque(1e9, 0.0, effort, sat, vlim, 1.0, 0.0, 0.0, qd)
        small = dc_motor_torque(1e9, 0.0, effort, sat, vlim, -1.0, 0.0, 0.0, qd)
        assert abs(big - hi) <= 1e-12 * max(1.0, abs(hi))
        assert abs(small - lo) <= 1e-12 * max(1.0, abs(lo))


# ---------------------------------------------------------------------------
# delay buffer


def test_delay_zero_is_identity(rng):
    buf = DelayBuffer(4, 2, 3)
    for _ in range(10):
        v = rng.uniform(-1, 1, size=(2, 3))
        assert np.array_equal(buf.push_and_read(v), v)


def test_delay_constant_signal_identity_after_warmup():
    buf = DelayBuffer(5, 1, 1)
    buf.set_delays(np.array([3]))
    v = np.full((1, 1), 7.0)
    outs = [buf.push_and_read(v)[0, 0] for _ in range(8)]
    assert outs[3:] == [7.0] * 5


def test_delay_ramp_matches_hand_simulated_ring():
    buf = DelayBuffer(3, 1, 1)
    buf.set_delays(np.array([2]))
    outs = [buf.push_and_read(np.array([[float(i)]]))[0, 0] for i in range(6)]
    assert outs == [0.0, 0.0, 0.0, 1.0, 2.0, 3.0]


@pytest.mark.parametrize("n", [0, 1, 2, 5])
def test_delay_reproduces_ring_oracle(n, rng):
    buf = DelayBuffer(8, 1, 1)
    buf.set_delays(np.array([n]))
    signal = rng.uniform(-1, 1, size=30)
    history = [0.0] * 8  # prefill mirrors the zero-initialized ring
    for t, v in enumerate(signal):
        got = buf.push_and_read(np.array([[v]]))[0, 0]
        history.append(v)
        assert got == history[len(history) - 1 - n]


def test_delay_composition_adds():
    a = DelayBuffer(8, 1, 1)
    b = DelayBuffer(8, 1, 1)
    c = DelayBuffer(8, 1, 1)
    a.set_delays(np.array([2]))
    b.set_delays(np.array([3]))
    c.set_delays(np.array([5]))
    for t in range(20):
        v = np.array([[float(t + 1)]])
        assert a.push_and_read(b.push_and_read(v)) == c.push_and_read(v)


def test_delay_per_world_offsets(rng):
    buf = DelayBuffer(6, 3, 1)
    buf.set_delays(np.array([0, 1, 4]))
    seq = []
    for t in range(12):
        v = np.full((3, 1), float(t + 1))
        out = buf.push_and_read(v)
        seq.append(out[:, 0].copy())
    assert seq[-1][0] == 12.0
    assert seq[-1][1] == 11.0
    assert seq[-1][2] == 8.0


# ---------------------------------------------------------------------------
# MLP weights file


def test_mlp_round_trip(tmp_path, rng):
    layers = [
        (rng.normal(size=(6, 4)), rng.normal(size=6), "tanh"),
        (rng.normal(size=(1, 6)), rng.normal(size=1), "identity"),
    ]
    path = tmp_path / "net.mlp"
    save_mlp_weights(str(path), layers)
    loaded = load_mlp_weights(str(path))
    for (w0, b0, a0), (w1, b1, a1) in zip(layers, loaded):
        assert np.array_equal(w0, w1)
        assert np.array_equal(b0, b1)
        assert a0 == a1


def test_mlp_missing_file_errors():
    with pytest.raises(ActuatorError, match="cannot read"):
        load_mlp_weights("/nonexistent/net.mlp")


def test_mlp_shape_mismatch_names_layer(tmp_path, rng):
    layers = [
        (rng.normal(size=(6, 4)), rng.normal(size=6), "tanh"),
        (rng.normal(size=(1, 5)), rng.normal(size=1), "identity"),  # 5 != 6
    ]
    path = tmp_path / "bad.mlp"
    save_mlp_weights(str(path), layers)
    with pytest.raises(ActuatorError, match="layer 1"):
        load_mlp_weights(str(path))


def test_mlp_truncated_file_errors(tmp_path, rng):
    path = tmp_path / "trunc.mlp"
    save_mlp_weights(str(path), [(rng.normal(size=(2, 2)), rng.normal(size=2), "relu")])
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 9])
    with pytest.raises(ActuatorError, match="layer 0"):
        load_mlp_weights(str(path))


def test_mlp_forward_matches_neuron_loop_oracle(rng):
    layers = [
        (rng.normal(size=(5, 3)), rng.normal(size=5), "relu"),
        (rng.normal(size=(1, 5)), rng.normal(size=1), "identity"),
    ]
    x = rng.normal(size=(7, 3))
    got = mlp_forward(layers, x)
    for r in range(7):
        h = x[r]
        for w, b, act in layers:
            out = np.empty(w.shape[0])
            for i in range(w.shape[0]):
                acc = b[i]
                for j in range(w.shape[1]):
                    acc += w[i, j] * h[j]
                out[i] = max(acc, 0.0) if act == "relu" else acc
            h = out
        assert np.allclose(got[r], h, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# actuator wrapper over the model


def joint_state(model, n):
    state = BatchState(model)
    return state


def test_actuator_zero_weights_zero_torque(tmp_path):
    model = compile_model(two_leg_spec(), 2)
    path = tmp_path / "zero.mlp"
    save_mlp_weights(str(path), [(np.zeros((1, 4)), np.zeros(1), "identity")])
    cfg = MlpActuatorCfg(weights_path=str(path), error_history=2, velocity_history=2)
    act = Actuator("net", cfg, model, np.arange(4))
    targets = np.ones((2, 4))
    state = BatchState(model)
    tau = act.compute(targets, state.q[:, 3:], state.qd[:, 3:])
    assert np.all(tau == 0.0)


def test_actuator_identity_layer_clamps(tmp_path):
    model = compile_model(two_leg_spec(), 1)
    w = np.zeros((1, 2))
    w[0, 0] = 1.0  # torque = current position error
    path = tmp_path / "ident.mlp"
    save_mlp_weights(str(path), [(w, np.zeros(1), "identity")])
    cfg = MlpActuatorCfg(
        weights_path=str(path), error_history=1, velocity_history=1, effort_limit=0.5
    )
    act = Actuator("net", cfg, model, np.arange(4))
    state = BatchState(model)
    targets = np.full((1, 4), 2.0)
    tau = act.compute(targets, state.q[:, 3:], state.qd[:, 3:])
    assert np.all(tau == 0.5)  # 2.0 clamped to effort limit


def test_actuator_registers_gain_fields():
    model = compile_model(two_leg_spec(), 2)
    Actuator("legs", IdealPdCfg(kp=33.0, kd=0.7), model, np.arange(4))
    assert np.all(model.field("actuator.legs.kp").value == 33.0)
    assert np.all(model.field("actuator.legs.kd").value == 0.7)


def test_delayed_actuator_resamples_in_quantized_range():
    model = compile_model(two_leg_spec(), 64)
    streams = StreamPack(0, np.arange(64))
    cfg = DelayedCfg(
        inner=IdealPdCfg(), latency_range=(0.0, 0.02), resample_on_reset=True
    )
    act = Actuator("legs", cfg, model, np.arange(4), streams)
    assert act.delay is not None
    steps = act.delay.delay_steps
    assert steps.min() >= 0 and steps.max() <= 4  # 0.02 / 0.005
    before = steps.copy()
    act.reset(np.arange(64), np.zeros((64, 4)))
    assert not np.array_equal(before, act.delay.delay_steps)  # redrawn


def test_dc_motor_cfg_validation():
    with pytest.raises(ActuatorError, match="effort_limit"):
        Actuator(
            "legs",
            DcMotorCfg(effort_limit=50.0, saturation_effort=30.0),
            compile_model(two_leg_spec(), 1),
            np.arange(4),
        )
