"""Narrowband far-field snapshot simulation and covariance vectorization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadParam
from .geometry import SensorArray


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``seed`` and a stream index.

    Each ``(seed, *stream)`` tuple gives an independent stream, so Monte-Carlo
    results do not depend on the order runs are executed in.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True)
class SourceScenario:
    """Uncorrelated narrowband sources seen by the array.

    Angles are in degrees, powers and noise power on a linear scale.
    """

    angles_deg: tuple[float, ...]
    powers: tuple[float, ...]
    snapshots: int
    noise_power: float

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles_deg)
        powers = tuple(float(p) for p in self.powers)
        object.__setattr__(self, "angles_deg", angles)
        object.__setattr__(self, "powers", powers)
        if not angles:
            raise BadParam("scenario needs at least one source")
        if len(angles) != len(powers):
            raise BadParam(f"{len(angles)} angles but {len(powers)} powers")
        if any(not -90.0 < a < 90.0 for a in angles):
            raise BadParam("source angles must lie in (-90, 90) degrees")
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise BadParam("source angles must be strictly increasing")
        if any(p <= 0 for p in powers):
            raise BadParam("source powers must be positive")
        if int(self.snapshots) < 1:
            raise BadParam("snapshots must be positive")
        if self.noise_power < 0:
            raise BadParam("noise power must be non-negative")

    @property
    def n_sources(self) -> int:
        return len(self.angles_deg)

    @classmethod
    def from_snr(cls, angles_deg: Sequence[float], snr_db: float, snapshots: int) -> "SourceScenario":
        """Unit-power sources with per-source SNR ``snr_db``."""
        return cls(
            angles_deg=tuple(angles_deg),
            powers=(1.0,) * len(angles_deg),
            snapshots=snapshots,
            noise_power=10.0 ** (-snr_db / 10.0),
        )


def evenly_spaced(n: int, lo: float = -60.0, hi: float = 60.0) -> np.ndarray:
    return np.linspace(lo, hi, n)


def steering_vector(array: SensorArray, theta_deg: float) -> np.ndarray:
    """exp(-j pi p sin(theta)) for each sensor position p."""
    pos = np.asarray(array.positions, dtype=float)
    return np.exp(-1j * np.pi * pos * np.sin(np.deg2rad(theta_deg)))


def steering_matrix(array: SensorArray, thetas_deg) -> np.ndarray:
    pos = np.asarray(array.positions, dtype=float)
    s = np.sin(np.deg2rad(np.asarray(thetas_deg, dtype=float)))
    return np.exp(-1j * np.pi * np.outer(pos, s))


def _cn(rng: np.random.Generator, shape, power) -> np.ndarray:
    g = rng.standard_normal(shape + (2,))
    return (g[..., 0] + 1j * g[..., 1]) * np.sqrt(np.asarray(power) / 2.0)


def simulate_snapshots(array: SensorArray, scenario: SourceScenario, seed) -> np.ndarray:
    """Snapshot matrix of shape (sensors, snapshots).

    ``seed`` is an int or a ``numpy.random.Generator``; an int is expanded
    with :func:`make_rng`.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    T = int(scenario.snapshots)
    A = steering_matrix(array, scenario.angles_deg)
    powers = np.asarray(scenario.powers)[:, None]
    S = _cn(rng, (scenario.n_sources, T), powers)
    X = A @ S
    if scenario.noise_power > 0:
        X = X + _cn(rng, (array.size, T), scenario.noise_power)
    return X


def theoretical_covariance(array: SensorArray, scenario: SourceScenario) -> np.ndarray:
    A = steering_matrix(array, scenario.angles_deg)
    R = (A * np.asarray(scenario.powers)) @ A.conj().T
    return R + scenario.noise_power * np.eye(array.size)


def sample_covariance(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] < 1:
        raise BadParam("snapshot matrix must be 2-D with at least one column")
    R = X @ X.conj().T / X.shape[1]
    # exact Hermitian symmetry regardless of BLAS rounding
    return 0.5 * (R + R.conj().T)


def vectorize_covariance(R: np.ndarray) -> np.ndarray:
    """Column-stacked vec(R)."""
    R = np.asarray(R)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise BadParam("covariance must be square")
    return R.ravel(order="F")
