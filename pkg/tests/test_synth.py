"""Synthetic session generator: determinism, signal structure, pair jitter.

The envelope-correlation checks recompute the per-channel drive from the
config and the documented gain layout, then compare it against the smoothed
rectified sEMG actually produced.
"""

import numpy as np
import pytest

from emgkin.errors import ConfigError
from emgkin.synth import (
    DEFAULT_AMPLITUDE_DEG,
    DEFAULT_CROSSTALK,
    P4_PHASES,
    SynthConfig,
    default_gain,
    generate,
    generate_session_pair,
)

FS = 1024.0
DOF_INDEX = {"fe": 0, "ps": 1, "ru": 2}


def smooth(x: np.ndarray, n: int = 513) -> np.ndarray:
    """Half-second moving average: long enough to suppress the carrier-noise
    variance of the rectified signal, short against the 10 s contraction."""
    return np.convolve(x, np.ones(n) / n, mode="same")


def expected_drive(config: SynthConfig, rec) -> np.ndarray:
    """Per-channel modulation recomputed from first principles: rectified
    normalized angle split into positive/negative half-waves, flexor channels
    (d, d+1, d+2 mod 6) taking the positive half plus crosstalk times the
    other, weighted by the gain matrix."""
    gain = default_gain(config.protocol)
    dofs = rec.dof_names
    t = rec.t_emg
    drive = np.zeros((len(t), 6))
    for d, name in enumerate(dofs):
        amp = DEFAULT_AMPLITUDE_DEG[name]
        theta = np.interp(t, rec.t_ang, rec.angles[:, d]) / amp
        pos = np.clip(theta, 0.0, None)
        neg = np.clip(-theta, 0.0, None)
        for n in range(6):
            flexor = (n - DOF_INDEX[name]) % 6 < 3
            assigned, opposite = (pos, neg) if flexor else (neg, pos)
            drive[:, n] += gain[n, d] * (assigned + config.crosstalk * opposite)
    return drive


def correlations(config: SynthConfig) -> np.ndarray:
    rec = generate(config)
    drive = expected_drive(config, rec)
    out = np.zeros(6)
    for n in range(6):
        env = smooth(np.abs(rec.emg[:, n]))
        out[n] = np.corrcoef(env, smooth(drive[:, n]))[0, 1]
    return out


def test_generate_is_deterministic():
    a = generate(SynthConfig(protocol="P1", duration_s=10.0, seed=3))
    b = generate(SynthConfig(protocol="P1", duration_s=10.0, seed=3))
    np.testing.assert_array_equal(a.emg, b.emg)
    np.testing.assert_array_equal(a.angles, b.angles)


def test_seed_changes_emg_not_angles():
    a = generate(SynthConfig(protocol="P1", duration_s=10.0, seed=3))
    b = generate(SynthConfig(protocol="P1", duration_s=10.0, seed=4))
    assert not np.array_equal(a.emg, b.emg)
    np.testing.assert_array_equal(a.angles, b.angles)


def test_shapes_rates_and_names():
    rec = generate(SynthConfig(protocol="P1", duration_s=12.0, seed=0))
    assert rec.emg.shape == (int(12 * 1024), 6)
    assert rec.angles.shape == (1200, 1)
    assert rec.dof_names == ["fe"]
    np.testing.assert_allclose(np.diff(rec.t_emg), 1.0 / 1024, atol=1e-12)
    np.testing.assert_allclose(np.diff(rec.t_ang), 1.0 / 100, atol=1e-12)


def test_p1_angle_is_pure_sine():
    config = SynthConfig(protocol="P1", duration_s=20.0, seed=1)
    rec = generate(config)
    expected = 40.0 * np.sin(2 * np.pi * 0.1 * rec.t_ang)
    np.testing.assert_allclose(rec.angles[:, 0], expected, atol=1e-9)


def test_p4_angles_phase_offset_sines():
    config = SynthConfig(protocol="P4", duration_s=20.0, seed=1)
    rec = generate(config)
    assert rec.dof_names == ["fe", "ps", "ru"]
    for d, name in enumerate(rec.dof_names):
        expected = DEFAULT_AMPLITUDE_DEG[name] * np.sin(
            2 * np.pi * 0.1 * rec.t_ang + P4_PHASES[name]
        )
        np.testing.assert_allclose(rec.angles[:, d], expected, atol=1e-9)


@pytest.mark.parametrize("protocol", ["P1", "P2", "P3", "P4"])
def test_channel_envelopes_track_recomputed_drive(protocol):
    corr = correlations(SynthConfig(protocol=protocol, duration_s=40.0, seed=2))
    assert corr.min() > 0.8, f"{protocol}: channel correlations {corr.round(3)}"


def test_p1_envelope_tracks_full_rectified_angle():
    # stricter check on the single-DoF protocol: every channel also follows
    # the plain rectified angle (both half-waves present via crosstalk)
    config = SynthConfig(protocol="P1", duration_s=40.0, seed=2)
    rec = generate(config)
    env = np.abs(np.interp(rec.t_emg, rec.t_ang, rec.angles[:, 0])) / 40.0
    env = smooth(env)
    for n in range(6):
        c = np.corrcoef(smooth(np.abs(rec.emg[:, n])), env)[0, 1]
        assert c > 0.8, f"channel {n}: corr {c:.3f}"


def test_mains_line_present():
    rec = generate(SynthConfig(protocol="P1", duration_s=30.0, seed=5))
    spectrum = np.abs(np.fft.rfft(rec.emg[:, 0]))
    freqs = np.fft.rfftfreq(len(rec.emg), 1.0 / FS)
    at_50 = spectrum[np.argmin(np.abs(freqs - 50.0))]
    # compare the 50 Hz bin against the local noise floor just below it
    nearby = spectrum[(freqs > 46.0) & (freqs < 49.0)]
    assert at_50 > 5.0 * nearby.mean()


def test_snr_controls_residual_noise():
    noisy = generate(SynthConfig(protocol="P1", duration_s=20.0, seed=6, snr_db=0.0))
    clean = generate(SynthConfig(protocol="P1", duration_s=20.0, seed=6, snr_db=40.0))
    # during angle zero crossings the drive is ~0, so what remains is noise
    q = np.abs(clean.angles[:, 0]) < 1.0
    quiet = np.interp(noisy.t_emg, noisy.t_ang, q.astype(float)) > 0.5
    assert np.std(noisy.emg[quiet, 0]) > 3.0 * np.std(clean.emg[quiet, 0])


def test_gain_matrix_layout():
    g = default_gain("P1")
    assert g.shape == (6, 1)
    np.testing.assert_allclose(g[:, 0], [1.0, 0.85, 0.7, 1.0, 0.85, 0.7])
    g4 = default_gain("P4")
    assert g4.shape == (6, 3)
    # ps group starts at channel 1 and carries the weakest base gain
    np.testing.assert_allclose(g4[1:4, 1], 0.5 * np.array([1.0, 0.85, 0.7]))


def test_session_pair_differs_but_is_deterministic():
    config = SynthConfig(protocol="P1", duration_s=10.0, seed=11)
    a1, b1 = generate_session_pair(config)
    a2, b2 = generate_session_pair(config)
    np.testing.assert_array_equal(a1.emg, a2.emg)
    np.testing.assert_array_equal(b1.emg, b2.emg)
    assert not np.array_equal(a1.emg, b1.emg)
    assert a1.session_id != b1.session_id
    assert b1.session_id.endswith("_b")
    # same task, same kinematics; only the recording changed
    np.testing.assert_array_equal(a1.angles, b1.angles)
    assert a1.protocol == b1.protocol == "P1"


def test_session_pair_first_equals_single_generate():
    config = SynthConfig(protocol="P2", duration_s=10.0, seed=12)
    a, _ = generate_session_pair(config)
    solo = generate(config)
    np.testing.assert_array_equal(a.emg, solo.emg)


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(protocol="P7")
    with pytest.raises(ConfigError):
        SynthConfig(duration_s=0.0)
    with pytest.raises(ConfigError):
        SynthConfig(contraction_hz=1.5)
    with pytest.raises(ConfigError):
        SynthConfig(crosstalk=1.2)
    with pytest.raises(ConfigError):
        SynthConfig(amplitude_deg={"fe": -5.0})
    with pytest.raises(ConfigError):
        SynthConfig(gain=np.ones((3, 1)))


def test_custom_amplitude_respected():
    config = SynthConfig(protocol="P1", duration_s=10.0, amplitude_deg={"fe": 15.0})
    rec = generate(config)
    assert np.max(np.abs(rec.angles)) == pytest.approx(15.0, rel=1e-3)
