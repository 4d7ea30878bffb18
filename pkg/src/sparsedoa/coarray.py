"""Difference co-array analysis and exhaustive checks of the thinning rule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import BadParam, NoClosedForm, NoConfigExists
from .geometry import (
    Family,
    SensorArray,
    build,
    conventional_coprime,
    redundant_positions,
    thinned_coprime,
)


@dataclass(frozen=True)
class CoarrayStats:
    unique: int
    consecutive: int
    aperture: int
    hole_count: int

    def as_dict(self) -> dict:
        return {
            "unique": self.unique,
            "consecutive": self.consecutive,
            "aperture": self.aperture,
            "holes": self.hole_count,
        }


@dataclass(frozen=True)
class Coarray:
    """Difference co-array with its weight function.

    ``lags`` is sorted ascending and ``weights[i]`` is the number of ordered
    sensor pairs whose difference equals ``lags[i]``.
    """

    lags: np.ndarray
    weights: np.ndarray

    def weight(self, lag: int) -> int:
        i = np.searchsorted(self.lags, lag)
        if i < len(self.lags) and self.lags[i] == lag:
            return int(self.weights[i])
        return 0

    @property
    def support(self) -> frozenset:
        return frozenset(int(v) for v in self.lags)

    @property
    def unique_count(self) -> int:
        return len(self.lags)

    @property
    def aperture(self) -> int:
        return int(self.lags[-1])

    @property
    def consecutive_count(self) -> int:
        # lags are symmetric, so the run from 0 upward determines the count
        pos = self.lags[self.lags >= 0]
        gaps = np.nonzero(pos != np.arange(len(pos)))[0]
        run = int(gaps[0]) if gaps.size else len(pos)
        return 2 * run - 1

    @property
    def holes(self) -> list[int]:
        present = set(self.lags[self.lags > 0].tolist())
        return [k for k in range(1, self.aperture + 1) if k not in present]

    def stats(self) -> CoarrayStats:
        return coarray_stats(self)


def difference_coarray(array: SensorArray) -> Coarray:
    pos = np.asarray(array.positions, dtype=np.int64)
    diffs = np.subtract.outer(pos, pos).ravel()
    lags, weights = np.unique(diffs, return_counts=True)
    return Coarray(lags=lags, weights=weights)


def coarray_stats(c: Coarray) -> CoarrayStats:
    return CoarrayStats(
        unique=c.unique_count,
        consecutive=c.consecutive_count,
        aperture=c.aperture,
        hole_count=len(c.holes),
    )


def array_stats(array: SensorArray) -> CoarrayStats:
    return coarray_stats(difference_coarray(array))


def expected_counts(family: Family | str, params: Mapping[str, int]) -> dict:
    """Closed-form lag counts where the literature states one.

    Returns a dict holding ``unique`` and/or ``consecutive``. Raises
    :class:`NoClosedForm` when no statistic is known for the parameters.
    """
    family = Family(family)
    out = {}
    if family is Family.PROTOTYPE_COPRIME:
        out["consecutive"] = 2 * (params["M"] + params["N"]) - 1
    elif family in (Family.CONVENTIONAL_COPRIME, Family.THINNED_COPRIME):
        M, N = params["M"], params["N"]
        out["consecutive"] = 2 * M * N + 2 * M - 1
    elif family is Family.NESTED:
        n = 2 * params["N2"] * (params["N1"] + 1) - 1
        out["consecutive"] = n
        out["unique"] = n
    elif family is Family.CADIS:
        M, N, L = params["M"], params["N"], params["L"]
        Mp = params.get("Mp", M // params["p"])
        if Mp == 1 and L == Mp + N:
            out["unique"] = 2 * M * N + 1
            out["consecutive"] = 2 * M * N + 1
        elif Mp > 1 and L == Mp + N:
            out["consecutive"] = M * N - (Mp - 1) * (N - 2) + 1
            out["unique"] = 2 * M * N + 2 * Mp - 1
        elif Mp > 1 and L > N * (M - 2):
            out["unique"] = 2 * M * N + 2 * M - 5
    if not out:
        raise NoClosedForm(f"no closed-form lag count for {family.value} {dict(params)}")
    return out


@dataclass(frozen=True)
class ThinningCheck:
    equal_sets: bool
    conv: CoarrayStats
    thin: CoarrayStats
    saving: int


def verify_thinning(M: int, N: int) -> ThinningCheck:
    """Compare the co-array supports of the conventional and thinned arrays."""
    report = redundant_positions(M, N)
    conv = difference_coarray(conventional_coprime(M, N))
    thin = difference_coarray(thinned_coprime(M, N))
    return ThinningCheck(
        equal_sets=conv.support == thin.support,
        conv=conv.stats(),
        thin=thin.stats(),
        saving=report.s_red,
    )


def cross_lag(M: int, N: int, n: int, m: int) -> int:
    return M * n - N * m


def conjugate_pairs(M: int, N: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Index pairs (n1, m1) <-> (N-n1, M-m1) of the cross-difference matrix.

    ``n1`` runs over 1..N-1 and ``m1`` over 0..floor(M/2).
    """
    return [
        ((n1, m1), (N - n1, M - m1))
        for m1 in range(M // 2 + 1)
        for n1 in range(1, N)
    ]


def verify_conjugate_pairs(M: int, N: int) -> bool:
    """Exhaustively check that paired cross lags are negatives of each other."""
    if M < 1 or N < 1:
        raise BadParam(f"M and N must be positive, got M={M}, N={N}")
    for (n1, m1), (n2, m2) in conjugate_pairs(M, N):
        if (n1 + n2) * M != (m1 + m2) * N:
            return False
        if cross_lag(M, N, n1, m1) != -cross_lag(M, N, n2, m2):
            return False
    return True


def _candidate_params(budget: int, family: Family, cadis_mode: str) -> list[dict]:
    out = []
    if family is Family.PROTOTYPE_COPRIME:
        for M in range(2, budget):
            N = budget + 1 - M
            if M < N and math.gcd(M, N) == 1:
                out.append({"M": M, "N": N})
    elif family is Family.CONVENTIONAL_COPRIME:
        for M in range(2, budget):
            N = budget + 1 - 2 * M
            if M < N and math.gcd(M, N) == 1:
                out.append({"M": M, "N": N})
    elif family is Family.THINNED_COPRIME:
        for M in range(4, budget):
            N = budget + 1 - 2 * M + (M + 1) // 2
            if N >= 5 and M < N and math.gcd(M, N) == 1:
                out.append({"M": M, "N": N})
    elif family is Family.NESTED:
        for N1 in range(1, budget):
            out.append({"N1": N1, "N2": budget - N1})
    elif family is Family.CADIS:
        for M in range(2, budget):
            N = budget - M
            if not (M < N and math.gcd(M, N) == 1):
                continue
            for p in range(2, M + 1):
                if M % p:
                    continue
                Mp = M // p
                if cadis_mode == "nested":
                    if Mp != 1:
                        continue
                    L = Mp + N
                elif Mp == 1:
                    continue
                elif cadis_mode == "compact":
                    L = Mp + N
                elif cadis_mode == "far":
                    L = max(N * (M - 2) + 1, Mp + N)
                else:
                    raise BadParam(f"unknown cadis_mode {cadis_mode!r}")
                out.append({"M": M, "N": N, "p": p, "L": L})
    else:
        raise BadParam(f"cannot enumerate family {family.value}")
    return out


def enumerate_configs(
    sensor_budget: int, family: Family | str, cadis_mode: str = "compact"
) -> list[tuple[dict, CoarrayStats]]:
    """All parameterizations of ``family`` with exactly ``sensor_budget`` sensors.

    Results are ranked by unique lags, then consecutive lags, then aperture,
    all descending. ``cadis_mode`` picks the CADiS variant: ``"compact"``
    (M' > 1, L = M'+N), ``"far"`` (M' > 1, L just above N(M-2)) or
    ``"nested"`` (M' = 1).
    """
    if sensor_budget < 4:
        raise BadParam(f"sensor budget must be >= 4, got {sensor_budget}")
    family = Family(family)
    rows = []
    for params in _candidate_params(sensor_budget, family, cadis_mode):
        arr = build(family, params)
        rows.append((dict(arr.params), array_stats(arr)))
    if not rows:
        raise NoConfigExists(f"no {family.value} config with {sensor_budget} sensors")
    rows.sort(key=lambda r: (-r[1].unique, -r[1].consecutive, -r[1].aperture, tuple(r[0].values())))
    return rows
