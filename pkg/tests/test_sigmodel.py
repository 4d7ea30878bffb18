import numpy as np
import pytest

from sparsedoa import geometry as g
from sparsedoa import sigmodel as sm
from sparsedoa.errors import BadParam


def test_steering_examples():
    arr = g.custom_array({0, 1})
    assert np.allclose(sm.steering_vector(arr, 30.0), [1, -1j], atol=1e-15)
    thin = g.thinned_coprime(5, 6)
    assert np.allclose(sm.steering_vector(thin, 0.0), 1.0)
    A = sm.steering_matrix(thin, np.linspace(-89, 89, 37))
    assert np.allclose(np.abs(A), 1.0)


def test_steering_conjugate_symmetry():
    arr = g.thinned_coprime(5, 6)
    for th in (-70.3, -12.0, 5.5, 44.0):
        assert np.allclose(sm.steering_vector(arr, -th), sm.steering_vector(arr, th).conj())


def test_scenario_validation():
    with pytest.raises(BadParam):
        sm.SourceScenario((10.0, 10.0), (1.0, 1.0), 10, 1.0)
    with pytest.raises(BadParam):
        sm.SourceScenario((10.0,), (1.0, 2.0), 10, 1.0)
    with pytest.raises(BadParam):
        sm.SourceScenario((95.0,), (1.0,), 10, 1.0)
    sc = sm.SourceScenario.from_snr([0.0], 10.0, 5)
    assert sc.noise_power == pytest.approx(0.1)


def test_determinism():
    arr = g.thinned_coprime(5, 6)
    sc = sm.SourceScenario.from_snr(sm.evenly_spaced(25), 0.0, 512)
    X1 = sm.simulate_snapshots(arr, sc, 7)
    X2 = sm.simulate_snapshots(arr, sc, 7)
    assert X1.tobytes() == X2.tobytes()
    X3 = sm.simulate_snapshots(arr, sc, sm.make_rng(7, 0, 1))
    assert not np.array_equal(X1, X3)


def test_streams_are_order_independent():
    a = sm.make_rng(3, 1, 2).standard_normal(4)
    sm.make_rng(3, 0, 0).standard_normal(100)
    b = sm.make_rng(3, 1, 2).standard_normal(4)
    assert np.array_equal(a, b)


def test_large_t_noiseless_single_source():
    arr = g.nested(3, 3)
    sc = sm.SourceScenario((20.0,), (2.0,), 100_000, 0.0)
    R = sm.sample_covariance(sm.simulate_snapshots(arr, sc, 1))
    a = sm.steering_vector(arr, 20.0)
    R0 = 2.0 * np.outer(a, a.conj())
    assert np.linalg.norm(R - R0) / np.linalg.norm(R0) < 0.02


def test_large_t_consistency_and_power():
    arr = g.thinned_coprime(5, 6)
    sc = sm.SourceScenario((-30.0, 0.0, 41.0), (1.0, 2.0, 0.5), 100_000, 0.3)
    X = sm.simulate_snapshots(arr, sc, 11)
    R = sm.sample_covariance(X)
    Rt = sm.theoretical_covariance(arr, sc)
    assert np.linalg.norm(R - Rt) / np.linalg.norm(Rt) < 0.05
    per_sensor = np.mean(np.abs(X) ** 2)
    assert per_sensor == pytest.approx(3.5 + 0.3, rel=0.03)


def test_sample_covariance_basics():
    assert np.array_equal(sm.sample_covariance(np.array([[1.0], [0.0]])), [[1, 0], [0, 0]])
    assert not sm.sample_covariance(np.zeros((3, 4))).any()
    R = sm.sample_covariance(np.random.default_rng(0).standard_normal((4, 9)) + 1j)
    assert np.array_equal(R, R.conj().T)


def test_vectorize():
    assert sm.vectorize_covariance(np.eye(2)).tolist() == [1, 0, 0, 1]
    rng = np.random.default_rng(5)
    for _ in range(5):
        a = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        z = sm.vectorize_covariance(np.outer(a, a.conj()))
        assert np.max(np.abs(z - np.kron(a.conj(), a))) < 1e-12
    with pytest.raises(BadParam):
        sm.vectorize_covariance(np.zeros((2, 3)))


def test_noiseless_single_source_vector():
    arr = g.custom_array({0, 2, 3})
    a = sm.steering_vector(arr, -17.0)
    z = sm.vectorize_covariance(1.5 * np.outer(a, a.conj()))
    assert np.allclose(z, 1.5 * np.kron(a.conj(), a))
