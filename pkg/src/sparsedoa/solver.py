"""Constrained l1 recovery (basis pursuit denoising).

Solves::

    minimize ||x||_1   subject to   ||A x - b||_2 <= epsilon

with an optional ``x >= 0`` constraint. Two solvers are provided.

``homotopy`` (default) follows the LASSO solution path
``argmin 1/2 ||A x - b||^2 + lam ||x||_1`` from ``lam = max|A^T b|`` downward.
The path is piecewise linear and its residual norm shrinks monotonically, so
the first point on the path whose residual reaches epsilon is the exact
constrained optimum. Exactly degenerate ties can stall the path; the
solve then falls back to ADMM.

``admm`` splits the problem as ``x = z`` and ``A x - b = u``. The z-step is
soft thresholding, the u-step is projection onto the epsilon-ball and the
x-step solves ``(I + A^T A) x = v`` through a Cholesky factor of
``I + A A^T``. Both splits share one penalty, so the factor never depends on
it and the penalty adapts freely. ADMM approaches the constraint boundary
slowly, so every few iterations the current support is handed to an
active-set polish that returns an exact optimum once signs and dual
feasibility check out.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import BadParam, DimensionMismatch, InfeasibleEpsilon


@dataclass(frozen=True)
class SolverOptions:
    method: str = "homotopy"
    max_iters: int = 5000
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    nonnegative: bool = False
    rho: float = 1.0
    feasibility_slack: float = 1e-4
    adapt_rho: bool = True
    polish_every: int = 25
    record_trace: bool = False


@dataclass(frozen=True)
class L1Problem:
    A: np.ndarray
    b: np.ndarray
    epsilon: float
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).ravel()
        if A.ndim != 2 or A.size == 0:
            raise BadParam("A must be a non-empty 2-D matrix")
        if A.shape[0] != b.shape[0]:
            raise DimensionMismatch(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if not self.epsilon > 0:
            raise BadParam(f"epsilon must be positive, got {self.epsilon}")
        if self.options.method not in ("homotopy", "admm"):
            raise BadParam(f"unknown solver method {self.options.method!r}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)


@dataclass
class L1Solution:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.x).sum())


class PreparedMatrix:
    """``A`` scaled to unit spectral norm, plus the ADMM factor on demand.

    Reusable across solves that share the same matrix.
    """

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        self.scale = float(np.linalg.norm(A, 2))
        if self.scale == 0:
            raise BadParam("A is identically zero")
        self.A = A / self.scale
        self._chol = None
        self._full_row_rank = None

    @property
    def full_row_rank(self) -> bool:
        if self._full_row_rank is None:
            self._full_row_rank = bool(np.linalg.matrix_rank(self.A) == self.A.shape[0])
        return self._full_row_rank

    def inverse_apply(self, v: np.ndarray) -> np.ndarray:
        """(I + A^T A)^{-1} v via Woodbury."""
        if self._chol is None:
            gram = self.A @ self.A.T
            gram[np.diag_indices_from(gram)] += 1.0
            self._chol = linalg.cho_factor(gram, lower=True, check_finite=False)
        w = linalg.cho_solve(self._chol, self.A @ v, check_finite=False)
        return v - self.A.T @ w


def prepare(A: np.ndarray) -> PreparedMatrix:
    return PreparedMatrix(A)


def stack_complex(B: np.ndarray, z: np.ndarray | None = None):
    """Real stacking ``[Re B; Im B]`` (and ``[Re z; Im z]`` when given)."""
    B = np.asarray(B)
    A = np.vstack([B.real, B.imag])
    if z is None:
        return A
    z = np.asarray(z)
    return A, np.concatenate([z.real, z.imag])


def complexify_check(B: np.ndarray, z: np.ndarray, r: np.ndarray) -> tuple[float, float]:
    """Residual norms of the complex and real-stacked forms for a real ``r``."""
    B = np.asarray(B)
    z = np.asarray(z).ravel()
    r = np.asarray(r, dtype=float).ravel()
    if B.ndim != 2 or B.shape[0] != z.shape[0] or B.shape[1] != r.shape[0]:
        raise DimensionMismatch(f"B {B.shape}, z {z.shape}, r {r.shape} are inconsistent")
    A, b = stack_complex(B, z)
    return float(np.linalg.norm(z - B @ r)), float(np.linalg.norm(b - A @ r))


def _project_ball(v: np.ndarray, radius: float) -> np.ndarray:
    nv = np.linalg.norm(v)
    return v if nv <= radius else v * (radius / nv)


def _fixed_support(A, b, eps, support, signs):
    """Closed-form optimum with the support and signs held fixed.

    Returns ``(x_support, residual)`` or None when the support cannot reach
    the epsilon-sphere.
    """
    As = A[:, support]
    try:
        chol = linalg.cho_factor(As.T @ As, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return None
    x_ls = linalg.cho_solve(chol, As.T @ b, check_finite=False)
    w = linalg.cho_solve(chol, signs, check_finite=False)
    fit = As @ x_ls - b
    slack = eps * eps - fit @ fit
    Aw = As @ w
    if slack <= 0 or not np.all(np.isfinite(w)) or Aw @ Aw == 0:
        return None
    t = np.sqrt(slack / (Aw @ Aw))
    return x_ls - t * w, fit - t * Aw, t


def _polish(A, b, eps, z, nonnegative, rounds=20, tol=1e-9):
    """Active-set refinement of the ADMM support; None if it does not certify."""
    support = list(np.flatnonzero(z))
    signs = list(np.sign(z[support]))
    for _ in range(rounds):
        if not support or len(support) > A.shape[0]:
            return None
        out = _fixed_support(A, b, eps, np.array(support), np.array(signs))
        if out is None:
            return None
        xs, resid, t = out
        flipped = np.sign(xs) != np.array(signs)
        if np.any(flipped):
            keep = ~flipped
            support = [k for k, f in zip(support, keep) if f]
            signs = [s for s, f in zip(signs, keep) if f]
            continue
        corr = -(A.T @ resid) / t
        viol = corr - 1.0 if nonnegative else np.abs(corr) - 1.0
        viol[support] = -np.inf
        worst = int(np.argmax(viol))
        if viol[worst] <= tol:
            x = np.zeros_like(z)
            x[support] = xs
            return x
        support.append(worst)
        signs.append(1.0 if nonnegative else float(np.sign(corr[worst])))
    return None


def _admit_ties(A, c, active, signs, candidates, nonnegative):
    """Add tied columns one at a time.

    A candidate is skipped when the direction of the current active set
    already lowers its correlation at least as fast as lambda, which also
    keeps duplicated columns out of the Gram matrix.
    """
    for j in candidates:
        j = int(j)
        if j in active:
            continue
        s = 1.0 if nonnegative else float(np.sign(c[j]))
        if active:
            AI = A[:, active]
            try:
                chol = linalg.cho_factor(AI.T @ AI, lower=True, check_finite=False)
            except linalg.LinAlgError:
                return
            d = linalg.cho_solve(chol, np.asarray(signs), check_finite=False)
            if s * float(A[:, j] @ (AI @ d)) >= 1.0 - 1e-9:
                continue
            # a column inside the active span would make the Gram singular
            aj = A[:, j]
            proj = AI @ linalg.cho_solve(chol, AI.T @ aj, check_finite=False)
            if np.linalg.norm(aj - proj) <= 1e-7 * np.linalg.norm(aj):
                continue
        active.append(j)
        signs.append(s)


def _homotopy(A, b, eps, nonnegative, max_steps, tol=1e-12):
    """LASSO homotopy from lambda = max|A^T b| down to the epsilon-sphere.

    Along the path the residual norm decreases monotonically; the first
    point where it reaches ``eps`` is the constrained optimum.
    """
    n = A.shape[1]
    x = np.zeros(n)
    r = b.copy()
    c = A.T @ r
    active: list[int] = []
    signs: list[float] = []
    lam = float(c.max() if nonnegative else np.abs(c).max())
    if lam <= 0:
        return x, 0, False
    level = c if nonnegative else np.abs(c)
    first = int(np.argmax(level))
    tied = np.flatnonzero(level >= lam * (1 - 1e-9))
    _admit_ties(A, c, active, signs, [first] + tied.tolist(), nonnegative)
    for step in range(1, max_steps + 1):
        inactive = np.ones(n, dtype=bool)
        inactive[active] = False
        if len(active) > A.shape[0]:
            return x, step, False
        AI = A[:, active]
        try:
            chol = linalg.cho_factor(AI.T @ AI, lower=True, check_finite=False)
        except linalg.LinAlgError:
            return x, step, False
        d = linalg.cho_solve(chol, np.asarray(signs), check_finite=False)
        Ad = AI @ d
        v = A.T @ Ad

        gamma = lam
        hit_in, hit_out = None, None
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = (lam - c) / (1.0 - v)
            # 0/0 marks a column that tracks lambda exactly; it never crosses
            g1[~inactive | ~(g1 > tol)] = np.inf
            cands = [g1]
            if not nonnegative:
                g2 = (lam + c) / (1.0 + v)
                g2[~inactive | ~(g2 > tol)] = np.inf
                cands.append(g2)
            g_in = np.min(np.vstack(cands), axis=0)
            xa = x[active]
            g_out = -xa / d
            g_out[~(g_out > tol)] = np.inf
        if g_in.size and g_in.min() < gamma:
            gamma = float(g_in.min())
            hit_in = int(np.argmin(g_in))
        if g_out.size and g_out.min() < gamma:
            gamma = float(g_out.min())
            hit_out = int(np.argmin(g_out))
            hit_in = None

        # ||r - g Ad|| = eps on this segment? Split r along Ad so that tiny
        # eps does not drown in the cancellation of a plain quadratic.
        nad = float(np.linalg.norm(Ad))
        if nad > 0:
            u = Ad / nad
            alpha = float(r @ u)
            perp2 = float(np.linalg.norm(r - alpha * u)) ** 2
            if perp2 <= eps * eps:
                g_eps = (alpha - np.sqrt(eps * eps - perp2)) / nad
                if 0.0 <= g_eps <= gamma:
                    x[active] += g_eps * d
                    return x, step, True
        x[active] += gamma * d
        r = r - gamma * Ad
        c = c - gamma * v
        lam -= gamma
        if hit_out is not None:
            x[active[hit_out]] = 0.0
            del active[hit_out]
            del signs[hit_out]
        elif hit_in is not None:
            # symmetric scenes produce exact ties
            level = c if nonnegative else np.abs(c)
            tied = np.flatnonzero(inactive & (level >= lam * (1 - 1e-9)))
            _admit_ties(A, c, active, signs, [hit_in] + tied.tolist(), nonnegative)
        if lam <= tol:
            return x, step, False
    return x, max_steps, False


def _range_distance(A: np.ndarray, b: np.ndarray) -> float:
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return float(np.linalg.norm(A @ coef - b))


def _admm(pm: PreparedMatrix, b, eps, opts: SolverOptions):
    An = pm.A
    m, n = An.shape
    rho = float(opts.rho)
    z = np.zeros(n)
    u = _project_ball(-b, eps)
    y1 = np.zeros(n)
    y2 = np.zeros(m)
    trace = []
    it = 0
    for it in range(1, opts.max_iters + 1):
        x = pm.inverse_apply(z - y1 + An.T @ (b + u - y2))
        Ax = An @ x
        v = x + y1
        if opts.nonnegative:
            z_new = np.maximum(v - 1.0 / rho, 0.0)
        else:
            z_new = np.sign(v) * np.maximum(np.abs(v) - 1.0 / rho, 0.0)
        u_new = _project_ball(Ax - b + y2, eps)
        r1 = x - z_new
        r2 = Ax - b - u_new
        y1 += r1
        y2 += r2
        dual = rho * np.linalg.norm((z_new - z) + An.T @ (u_new - u))
        z, u = z_new, u_new
        primal = np.sqrt(r1 @ r1 + r2 @ r2)
        eps_pri = np.sqrt(n + m) * 1e-12 + opts.tol_primal * max(
            np.sqrt(x @ x + Ax @ Ax), np.sqrt(z @ z + u @ u), 1.0
        )
        eps_dual = np.sqrt(n) * 1e-12 + opts.tol_dual * rho * np.linalg.norm(y1 + An.T @ y2)
        if opts.record_trace:
            trace.append((it, primal, dual, float(np.linalg.norm(An @ z - b))))
        done = primal <= eps_pri and dual <= eps_dual
        if done or it % opts.polish_every == 0:
            polished = _polish(An, b, eps, z, opts.nonnegative)
            if polished is not None:
                return polished, it, True, trace
        if done and np.linalg.norm(An @ z - b) <= eps * (1.0 + opts.feasibility_slack):
            return z, it, True, trace
        if opts.adapt_rho and it % 10 == 0:
            if primal > 10.0 * dual and rho < 1e6:
                rho *= 2.0
                y1 /= 2.0
                y2 /= 2.0
            elif dual > 10.0 * primal and rho > 1e-6:
                rho /= 2.0
                y1 *= 2.0
                y2 *= 2.0
    return z, it, False, trace


def solve_bpdn(problem: L1Problem, prepared: PreparedMatrix | None = None) -> L1Solution:
    """Minimize ||x||_1 subject to ||b - A x||_2 <= epsilon.

    A run that exhausts ``max_iters`` is returned with ``converged=False``
    rather than raised. :class:`InfeasibleEpsilon` is raised when epsilon is
    below the distance from b to the range of A. ``prepared`` lets repeated
    solves against one matrix share its normalization and factorization; it
    must come from :func:`prepare` applied to ``problem.A``.
    """
    opts = problem.options
    A, b, eps = problem.A, problem.b, float(problem.epsilon)
    n = A.shape[1]
    bnorm = float(np.linalg.norm(b))
    if bnorm <= eps:
        return L1Solution(np.zeros(n), bnorm, 0, True)

    # rescale to ||b|| = 1 and ||A||_2 = 1; the minimizer maps back exactly
    pm = prepared if prepared is not None else prepare(A)
    bs = b / bnorm
    es = eps / bnorm
    if not pm.full_row_rank and _range_distance(pm.A, bs) > es:
        raise InfeasibleEpsilon(f"epsilon={eps:g} is below the distance from b to range(A)")

    trace = []
    iters = 0
    ok = False
    if opts.method == "homotopy":
        z, iters, ok = _homotopy(pm.A, bs, es, opts.nonnegative, opts.max_iters)
    if not ok:
        # ADMM also covers the degenerate ties that stall the path
        z, more, ok, trace = _admm(pm, bs, es, opts)
        iters += more
        trace = [(i, p, d, r * bnorm) for i, p, d, r in trace]
    x = z * (bnorm / pm.scale)
    resid = float(np.linalg.norm(A @ x - b))
    converged = ok and resid <= eps * (1.0 + opts.feasibility_slack)
    return L1Solution(x, resid, iters, converged, trace)


def write_trace_csv(solution: L1Solution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "primal_residual", "dual_residual", "constraint_residual"])
        for row in solution.trace:
            w.writerow([row[0]] + [f"{v:.10g}" for v in row[1:]])
