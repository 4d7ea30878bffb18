"""Grid-based compressive-sensing DOA estimation and RMSE experiments."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sigmodel
from .errors import BadParam, InfeasibleEpsilon
from .geometry import SensorArray
from .solver import L1Problem, PreparedMatrix, SolverOptions, prepare, solve_bpdn, stack_complex


@dataclass(frozen=True)
class AngularGrid:
    start_deg: float = -90.0
    stop_deg: float = 90.0
    step_deg: float = 0.2

    def __post_init__(self):
        if not self.step_deg > 0:
            raise BadParam("grid step must be positive")
        if self.size < 2:
            raise BadParam("grid needs at least two angles")

    @property
    def size(self) -> int:
        return int(round((self.stop_deg - self.start_deg) / self.step_deg)) + 1

    @property
    def angles(self) -> np.ndarray:
        k = np.arange(self.size)
        # round away binary noise so 0.2 * k prints as the intended decimal
        return np.round(self.start_deg + k * self.step_deg, 10)

    @property
    def half_range(self) -> float:
        return (self.stop_deg - self.start_deg) / 2.0

    def snap(self, angles_deg) -> np.ndarray:
        """Nearest grid angle for each input angle."""
        a = np.asarray(angles_deg, dtype=float)
        k = np.clip(np.round((a - self.start_deg) / self.step_deg), 0, self.size - 1).astype(int)
        return self.angles[k]


@dataclass
class SpectrumEstimate:
    grid: AngularGrid
    power: np.ndarray
    noise_power_est: float
    normalized: bool = False
    converged: bool = True
    iterations: int = 0

    def normalize(self) -> "SpectrumEstimate":
        peak = float(self.power.max()) if self.power.size else 0.0
        power = self.power / peak if peak > 0 else self.power.copy()
        return SpectrumEstimate(self.grid, power, self.noise_power_est, peak > 0,
                                self.converged, self.iterations)

    def write_csv(self, path) -> None:
        peak = float(self.power.max())
        norm = self.power / peak if peak > 0 else self.power
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["angle_deg", "power", "normalized_power"])
            for a, p, q in zip(self.grid.angles, self.power, norm):
                w.writerow([f"{a:.4f}", f"{p:.10e}", f"{q:.10e}"])


@dataclass
class DoaEstimate:
    angles_deg: np.ndarray
    shortfall: bool


def build_sensing_matrix(array: SensorArray, grid: AngularGrid) -> np.ndarray:
    """Columns conj(a) kron a for every grid angle, then vec(I)."""
    a = sigmodel.steering_matrix(array, grid.angles)
    S = array.size
    # column-stacked vec(a a^H): entry (i, j) -> index j*S + i, value a_i conj(a_j)
    manifold = (a.conj()[:, None, :] * a[None, :, :]).reshape(S * S, -1)
    ident = np.eye(S).ravel(order="F")[:, None]
    return np.hstack([manifold, ident])


@dataclass
class SensingProblem:
    """Sensing matrix for one array/grid pair, with its solver factorization."""

    array: SensorArray
    grid: AngularGrid
    B: np.ndarray
    A: np.ndarray
    prepared: PreparedMatrix

    @classmethod
    def build(cls, array: SensorArray, grid: AngularGrid) -> "SensingProblem":
        B = build_sensing_matrix(array, grid)
        A = stack_complex(B)
        return cls(array, grid, B, A, prepare(A))


DEFAULT_EPS_SCALE = 3.0


def default_epsilon(R: np.ndarray, snapshots: int, scale: float = DEFAULT_EPS_SCALE) -> float:
    """Expected Frobenius norm of the covariance estimation error.

    For circular Gaussian data ``E||R_hat - R||_F^2 = tr(R)^2 / T``; the
    trace is taken from the sample covariance. ``scale`` multiplies that
    standard deviation; values below about 1 can fall under the distance
    from z to the range of the sensing matrix.
    """
    return scale * float(np.real(np.trace(R))) / math.sqrt(snapshots)


def cs_spectrum(
    array: SensorArray,
    R: np.ndarray,
    grid: AngularGrid,
    epsilon: float,
    solver_opts: SolverOptions | None = None,
    sensing: SensingProblem | None = None,
) -> SpectrumEstimate:
    if sensing is None:
        sensing = SensingProblem.build(array, grid)
    z = sigmodel.vectorize_covariance(R)
    b = np.concatenate([z.real, z.imag])
    problem = L1Problem(sensing.A, b, epsilon, solver_opts or SolverOptions())
    sol = solve_bpdn(problem, sensing.prepared)
    return SpectrumEstimate(
        grid=grid,
        power=sol.x[:-1],
        noise_power_est=float(sol.x[-1]),
        converged=sol.converged,
        iterations=sol.iterations,
    )


def extract_doas(s: SpectrumEstimate, Q: int, min_separation_deg: float = 1.0) -> DoaEstimate:
    """The Q highest local maxima, at least ``min_separation_deg`` apart."""
    p = np.asarray(s.power)
    if not 1 <= Q <= p.size:
        raise BadParam(f"Q must be in [1, {p.size}], got {Q}")
    peaks = local_maxima(p)
    order = peaks[np.argsort(-p[peaks], kind="stable")]
    angles = s.grid.angles
    chosen = []
    for k in order:
        if all(abs(angles[k] - angles[j]) >= min_separation_deg for j in chosen):
            chosen.append(k)
            if len(chosen) == Q:
                break
    est = np.sort(angles[chosen])
    return DoaEstimate(est, len(est) < Q)


def _aligned_errors(est: np.ndarray, truth: np.ndarray, penalty: float) -> np.ndarray:
    """Per-source errors of an order-preserving alignment of two sorted lists.

    Unused estimates are free; a source left without an estimate costs
    ``penalty``.
    """
    n, m = len(est), len(truth)
    if n == m:
        return est - truth
    pen2 = penalty * penalty
    cost = np.full((n + 1, m + 1), np.inf)
    cost[:, 0] = 0.0
    cost[0, :] = np.arange(m + 1) * pen2
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost[i, j] = min(
                cost[i - 1, j - 1] + (est[i - 1] - truth[j - 1]) ** 2,
                cost[i - 1, j],
                cost[i, j - 1] + pen2,
            )
    errs = np.empty(m)
    i, j = n, m
    while j > 0:
        if i > 0 and cost[i, j] == cost[i - 1, j - 1] + (est[i - 1] - truth[j - 1]) ** 2:
            errs[j - 1] = est[i - 1] - truth[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] == cost[i - 1, j]:
            i -= 1
        else:
            errs[j - 1] = penalty
            j -= 1
    return errs


def squared_errors(estimated: Sequence[float], truth: Sequence[float], penalty: float = 90.0) -> np.ndarray:
    est = np.sort(np.asarray(estimated, dtype=float))
    tru = np.sort(np.asarray(truth, dtype=float))
    if tru.size < 1:
        raise BadParam("truth must contain at least one angle")
    return _aligned_errors(est, tru, penalty) ** 2


def rmse(estimated: Sequence[float], truth: Sequence[float], penalty: float = 90.0) -> float:
    """Root mean squared angular error, in degrees, over the true sources.

    Both lists are sorted and paired in order. When there are fewer
    estimates than sources, the pairing keeps order while minimizing error
    and each missed source costs ``penalty`` degrees.
    """
    e2 = squared_errors(estimated, truth, penalty)
    return float(np.sqrt(e2.sum() / len(truth)))


@dataclass(frozen=True)
class DetectionReport:
    """How a spectrum's peaks line up with known source angles.

    ``missed`` lists true angles without a local maximum within the
    tolerance. ``spurious`` lists local maxima farther than the tolerance
    from every source and taller than half the smallest true-peak height.
    """

    estimated: np.ndarray
    missed: tuple
    spurious: tuple
    max_error: float
    tol_deg: float = 0.5

    @property
    def all_recovered(self) -> bool:
        """Every source picked, each within the tolerance of its truth."""
        return not self.missed and self.max_error <= self.tol_deg + 1e-9


def local_maxima(power: np.ndarray) -> np.ndarray:
    p = np.asarray(power)
    left = np.concatenate([[-np.inf], p[:-1]])
    right = np.concatenate([p[1:], [-np.inf]])
    return np.flatnonzero((p > 0) & (p >= left) & (p > right))


def detection_report(
    s: SpectrumEstimate, truth: Sequence[float], tol_deg: float = 0.5, min_separation_deg: float = 1.0
) -> DetectionReport:
    truth = np.sort(np.asarray(truth, dtype=float))
    angles = s.grid.angles
    peaks = local_maxima(s.power)
    pk_ang = angles[peaks]
    pk_pow = s.power[peaks]
    heights = []
    missed = []
    for t in truth:
        near = np.abs(pk_ang - t) <= tol_deg + 1e-9
        if near.any():
            heights.append(pk_pow[near].max())
        else:
            missed.append(float(t))
    floor = 0.5 * min(heights) if heights else 0.0
    far = np.array([np.abs(truth - a).min() > tol_deg + 1e-9 for a in pk_ang], dtype=bool)
    spurious = tuple(float(a) for a in pk_ang[far & (pk_pow > floor)])
    est = extract_doas(s, len(truth), min_separation_deg).angles_deg
    max_err = float(np.abs(est - truth).max()) if len(est) == len(truth) else math.inf
    return DetectionReport(est, tuple(missed), spurious, max_err, tol_deg)


@dataclass
class RmseExperiment:
    """One array's RMSE-versus-SNR Monte-Carlo setup.

    Source angles are snapped to ``grid`` so every run is on-grid. Exactly
    one of ``epsilon`` and ``eps_scale`` drives the ε choice; with
    ``epsilon=None`` it is ``eps_scale * tr(R_hat) / sqrt(T)`` per run.
    """

    array: SensorArray
    angles_deg: tuple
    snr_db: tuple
    snapshots: int = 512
    runs: int = 50
    grid: AngularGrid = field(default_factory=AngularGrid)
    eps_scale: float = DEFAULT_EPS_SCALE
    epsilon: float | None = None
    seed: int = 0
    min_separation_deg: float = 1.0
    penalty_deg: float | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    workers: int = 1

    def truth(self) -> np.ndarray:
        return self.grid.snap(self.angles_deg)


@dataclass
class RmseCurve:
    snr_points_db: list
    rmse_deg: list
    runs: int
    failures: list

    def __post_init__(self):
        if not len(self.snr_points_db) == len(self.rmse_deg) == len(self.failures):
            raise BadParam("RMSE curve lists differ in length")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["snr_db", "rmse_deg", "runs", "failures"])
            for snr, r, f in zip(self.snr_points_db, self.rmse_deg, self.failures):
                w.writerow([f"{snr:g}", f"{r:.10e}", self.runs, f])


_SENSING_CACHE: dict = {}


def _sensing_for(array: SensorArray, grid: AngularGrid) -> SensingProblem:
    key = (array, grid)
    if key not in _SENSING_CACHE:
        _SENSING_CACHE.clear()
        _SENSING_CACHE[key] = SensingProblem.build(array, grid)
    return _SENSING_CACHE[key]


def _one_run(cfg: RmseExperiment, snr_idx: int, run: int) -> float | None:
    """Mean squared error of one seeded run, or None if it failed."""
    truth = cfg.truth()
    scen = sigmodel.SourceScenario.from_snr(truth, cfg.snr_db[snr_idx], cfg.snapshots)
    rng = sigmodel.make_rng(cfg.seed, snr_idx, run)
    R = sigmodel.sample_covariance(sigmodel.simulate_snapshots(cfg.array, scen, rng))
    eps = cfg.epsilon if cfg.epsilon is not None else default_epsilon(R, cfg.snapshots, cfg.eps_scale)
    try:
        spec = cs_spectrum(cfg.array, R, cfg.grid, eps, cfg.solver, _sensing_for(cfg.array, cfg.grid))
    except InfeasibleEpsilon:
        return None
    if not spec.converged:
        return None
    est = extract_doas(spec, len(truth), cfg.min_separation_deg)
    penalty = cfg.grid.half_range if cfg.penalty_deg is None else cfg.penalty_deg
    return float(np.mean(squared_errors(est.angles_deg, truth, penalty)))


def _run_chunk(args):
    cfg, tasks = args
    return [(si, r, _one_run(cfg, si, r)) for si, r in tasks]


def run_rmse_experiment(cfg: RmseExperiment) -> RmseCurve:
    """RMSE versus SNR averaged over seeded Monte-Carlo runs.

    Run ``r`` at SNR index ``i`` draws from ``make_rng(seed, i, r)``, so the
    result does not depend on ``workers``. Failed runs (infeasible ε or no
    convergence) are counted and left out of the average. Each point is
    ``sqrt(mean over runs of the per-run mean squared error)``.
    """
    if cfg.runs < 1:
        raise BadParam("runs must be positive")
    if not cfg.snr_db:
        raise BadParam("need at least one SNR point")
    tasks = [(si, r) for si in range(len(cfg.snr_db)) for r in range(cfg.runs)]
    if cfg.workers > 1:
        chunks = [(cfg, tasks[k::cfg.workers]) for k in range(cfg.workers)]
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = [x for part in ex.map(_run_chunk, chunks) for x in part]
    else:
        results = _run_chunk((cfg, tasks))
    mse = np.full((len(cfg.snr_db), cfg.runs), np.nan)
    for si, r, v in results:
        if v is not None:
            mse[si, r] = v
    rmse_pts, failures = [], []
    for row in mse:
        ok = row[np.isfinite(row)]
        failures.append(int(row.size - ok.size))
        # fsum is exact, so the order results arrive in cannot matter
        rmse_pts.append(math.sqrt(math.fsum(ok) / ok.size) if ok.size else math.nan)
    return RmseCurve([float(x) for x in cfg.snr_db], rmse_pts, cfg.runs, failures)
