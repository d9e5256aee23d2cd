import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import singular_values_via_eigen
from radiosv.dsp import AudioBuffer
from radiosv.errors import RadioSVError, TruncatedFileError
from radiosv.features import (
    LOG_FLOOR,
    FeatureMatrix,
    log_mel_fbank,
    mel_center_frequencies,
    read_feature_dump,
    svd,
    truncate_svd,
    write_feature_dump,
)

FS = 16000


def check_factors(x, f, tol=1e-8):
    r = min(x.shape)
    assert f.U.shape == (x.shape[0], r) and f.V.shape == (x.shape[1], r) and f.sigma.shape == (r,)
    np.testing.assert_allclose(f.U.T @ f.U, np.eye(r), atol=tol)
    np.testing.assert_allclose(f.V.T @ f.V, np.eye(r), atol=tol)
    assert np.all(np.diff(f.sigma) <= 0) and np.all(f.sigma >= 0)
    recon = (f.U * f.sigma) @ f.V.T
    scale = max(np.linalg.norm(x), 1e-300)
    assert np.linalg.norm(recon - x) / scale <= tol


# log-mel


def test_two_seconds_gives_198_by_80():
    x = log_mel_fbank(AudioBuffer(np.random.default_rng(0).normal(size=2 * FS), FS))
    assert x.shape == (198, 80)
    assert (x.frame_length_ms, x.frame_shift_ms, x.sample_rate_hz) == (25.0, 10.0, FS)


def test_sine_peaks_at_nearest_mel_center():
    t = np.arange(FS) / FS
    x = log_mel_fbank(AudioBuffer(0.5 * np.sin(2 * np.pi * 1000 * t), FS))
    # HTK mel scale, 80 bands between 20 Hz and 0.95 * Nyquist, computed independently
    mel = lambda f: 2595.0 * np.log10(1.0 + f / 700.0)
    inv = lambda m: 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    centers = inv(np.linspace(mel(20.0), mel(7600.0), 82))[1:-1]
    np.testing.assert_allclose(mel_center_frequencies(80, FS), centers, rtol=1e-12)
    assert np.argmax(x.values.mean(axis=0)) == np.argmin(np.abs(centers - 1000.0))


def test_silence_is_log_floor():
    x = log_mel_fbank(AudioBuffer(np.zeros(FS), FS))
    assert np.all(x.values == np.log(LOG_FLOOR))


def test_too_short_rejected():
    with pytest.raises(RadioSVError):
        log_mel_fbank(AudioBuffer(np.zeros(399), FS))
    assert log_mel_fbank(AudioBuffer(np.zeros(400), FS)).shape[0] == 1
    with pytest.raises(RadioSVError):
        log_mel_fbank(AudioBuffer(np.zeros(800), FS), n_mels=0)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(400, 6000), seed=st.integers(0, 2**32 - 1))
def test_one_more_shift_adds_one_frame(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n + 160)
    a = log_mel_fbank(AudioBuffer(x[:n], FS))
    b = log_mel_fbank(AudioBuffer(x, FS))
    assert b.shape[0] == a.shape[0] + 1
    # shared frames agree up to BLAS blocking differences in the filterbank product
    np.testing.assert_allclose(a.values, b.values[: a.shape[0]], rtol=1e-12, atol=1e-12)


def test_log_mel_deterministic(rng):
    audio = AudioBuffer(rng.normal(size=FS), FS)
    assert np.array_equal(log_mel_fbank(audio).values, log_mel_fbank(audio).values)


# SVD


def test_diag():
    f = svd(np.diag([3.0, 2.0, 1.0]))
    np.testing.assert_allclose(f.sigma, [3, 2, 1], atol=1e-14)
    check_factors(np.diag([3.0, 2.0, 1.0]), f)


def test_all_ones(backend):
    x = np.ones((4, 4))
    f = svd(x)
    np.testing.assert_allclose(f.sigma, [4, 0, 0, 0], atol=1e-12)
    check_factors(x, f)
    np.testing.assert_allclose(truncate_svd(f, 1).values, x, atol=1e-14)


def test_matches_jacobi_eigen_oracle(backend):
    x = np.random.default_rng(10).normal(size=(10, 8))
    np.testing.assert_allclose(svd(x).sigma, singular_values_via_eigen(x), atol=1e-8)


@pytest.mark.parametrize("shape", [(1, 1), (1, 7), (7, 1), (3, 9), (80, 80), (200, 80), (40, 120)])
def test_shapes(shape, backend, rng):
    x = rng.normal(size=shape)
    f = svd(x)
    check_factors(x, f)
    np.testing.assert_allclose(f.sigma, np.linalg.svd(x, compute_uv=False), atol=1e-10)


def test_rank_deficient(backend, rng):
    x = rng.normal(size=(30, 3)) @ rng.normal(size=(3, 12))
    f = svd(x)
    check_factors(x, f)
    assert np.all(f.sigma[3:] < 1e-10)


def test_zero_matrix():
    f = svd(np.zeros((5, 3)))
    check_factors(np.zeros((5, 3)), f)
    assert np.all(f.sigma == 0)


def test_sign_convention(backend, rng):
    f = svd(rng.normal(size=(20, 6)))
    idx = np.argmax(np.abs(f.V), axis=0)
    assert np.all(f.V[idx, np.arange(6)] > 0)


def test_non_finite_rejected():
    with pytest.raises(RadioSVError):
        svd(np.array([[1.0, np.inf], [0.0, 1.0]]))


def test_backends_agree(rng):
    from radiosv import _backend

    backends = _backend.available_backends()
    if len(backends) < 2:
        pytest.skip("compiled kernels not built")
    x = rng.normal(size=(50, 20))
    out = {}
    for name, impl in backends.items():
        a_t = np.ascontiguousarray(x.T).copy()
        v_t, _ = impl.jacobi_sweeps(a_t, 1e-12, 60)
        out[name] = np.sort(np.linalg.norm(a_t, axis=1))
    np.testing.assert_allclose(out["python"], out["compiled"], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    x=st.integers(1, 200).flatmap(
        lambda t: st.integers(1, 80).flatmap(
            lambda f: arrays(np.float64, (t, f), elements=st.floats(-1e3, 1e3, allow_nan=False, width=64))
        )
    )
)
def test_svd_invariants_property(x):
    f = svd(x)
    check_factors(x, f)


# truncation


def test_full_rank_truncation_reconstructs(rng):
    x = rng.normal(size=(30, 12))
    np.testing.assert_allclose(truncate_svd(svd(x), 12).values, x, atol=1e-10)


def test_eckart_young(rng):
    x = rng.normal(size=(40, 15))
    f = svd(x)
    for k in range(1, 16):
        err = np.linalg.norm(x - truncate_svd(f, k).values)
        assert err == pytest.approx(np.sqrt(np.sum(f.sigma[k:] ** 2)), abs=1e-6)


@pytest.mark.parametrize("k", [0, 13, 2.5])
def test_truncate_range(k, rng):
    with pytest.raises(RadioSVError):
        truncate_svd(svd(rng.normal(size=(20, 12))), k)


def test_truncate_keeps_frame_metadata(rng):
    fm = FeatureMatrix(rng.normal(size=(10, 4)), 20.0, 5.0, 8000)
    out = truncate_svd(svd(fm), 2)
    assert (out.frame_length_ms, out.frame_shift_ms, out.sample_rate_hz) == (20.0, 5.0, 8000)


# dumps


def test_dump_round_trip(tmp_path, rng):
    fm = FeatureMatrix(rng.normal(size=(17, 80)), 25.0, 10.0, 16000)
    write_feature_dump(tmp_path / "a.fbk", fm)
    back = read_feature_dump(tmp_path / "a.fbk")
    np.testing.assert_array_equal(back.values, fm.values.astype(np.float32))
    assert (back.frame_length_ms, back.frame_shift_ms, back.sample_rate_hz) == (25.0, 10.0, 16000)
    assert (tmp_path / "a.fbk").stat().st_size == 20 + 4 * 17 * 80


def test_dump_truncated(tmp_path, rng):
    p = tmp_path / "a.fbk"
    write_feature_dump(p, FeatureMatrix(rng.normal(size=(5, 3))))
    p.write_bytes(p.read_bytes()[:-2])
    with pytest.raises(TruncatedFileError):
        read_feature_dump(p)
    p.write_bytes(b"\x01\x00")
    with pytest.raises(TruncatedFileError):
        read_feature_dump(p)
