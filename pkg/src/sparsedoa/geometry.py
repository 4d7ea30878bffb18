"""Sparse linear array generators.

All positions are exact integers in units of the unit spacing d = lambda/2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import BadParam, EmptyArray, NotCoprime, TheoremOutOfRange


class Family(str, enum.Enum):
    PROTOTYPE_COPRIME = "prototype_coprime"
    CONVENTIONAL_COPRIME = "conventional_coprime"
    THINNED_COPRIME = "thinned_coprime"
    NESTED = "nested"
    CADIS = "cadis"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SensorArray:
    """An immutable linear array.

    Attributes:
        positions: Strictly increasing non-negative integer positions.
        family: Generator that produced the array.
        params: Integer parameters of the generator (``M``, ``N``, ``N1``,
            ``N2``, ``p``, ``Mp``, ``L`` as applicable).
    """

    positions: tuple[int, ...]
    family: Family = Family.CUSTOM
    params: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if not pos:
            raise EmptyArray("array has no sensors")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise BadParam("positions must be strictly increasing")
        if pos[0] < 0:
            raise BadParam("positions must be non-negative")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", dict(self.params))

    def __len__(self) -> int:
        return len(self.positions)

    def __hash__(self):
        return hash((self.positions, self.family, tuple(sorted(self.params.items()))))

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def aperture(self) -> int:
        return self.positions[-1] - self.positions[0]

    def to_line(self) -> str:
        """Serialize as ``family | k=v ... | p0 p1 ...``."""
        params = " ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.family.value} | {params} | {' '.join(map(str, self.positions))}"

    @classmethod
    def from_line(cls, line: str) -> "SensorArray":
        try:
            fam, params, pos = (part.strip() for part in line.split("|"))
            kv = dict(item.split("=") for item in params.split())
            return cls(
                positions=tuple(int(p) for p in pos.split()),
                family=Family(fam),
                params={k: int(v) for k, v in kv.items()},
            )
        except (ValueError, TypeError) as exc:
            if isinstance(exc, BadParam):
                raise
            raise BadParam(f"cannot parse array record {line!r}") from exc


@dataclass(frozen=True)
class ThinningReport:
    """Sensors of the 2M-element subarray that the thinning rule removes."""

    removed_positions: frozenset[int]
    removed_indices_m: range
    s_red: int


def _check_coprime_pair(M: int, N: int) -> None:
    if M < 1 or N < 1:
        raise BadParam(f"M and N must be positive, got M={M}, N={N}")
    if math.gcd(M, N) != 1:
        raise NotCoprime(f"gcd({M}, {N}) = {math.gcd(M, N)}")
    if M < 2 or N < 2:
        raise BadParam(f"need M >= 2 and N >= 2, got M={M}, N={N}")
    if M >= N:
        raise BadParam(f"canonical ordering requires M < N, got M={M}, N={N}")


def _check_theorem_range(M: int, N: int) -> None:
    _check_coprime_pair(M, N)
    if M < 4 or N < 5:
        raise TheoremOutOfRange(f"thinning rule holds for M >= 4 and N >= 5, got M={M}, N={N}")


def prototype_coprime(M: int, N: int) -> SensorArray:
    """M+N-1 sensors: N at multiples of M, M at multiples of N."""
    _check_coprime_pair(M, N)
    pos = {M * n for n in range(N)} | {N * m for m in range(M)}
    return SensorArray(tuple(sorted(pos)), Family.PROTOTYPE_COPRIME, {"M": M, "N": N})


def conventional_coprime(M: int, N: int) -> SensorArray:
    """2M+N-1 sensors: N at multiples of M, 2M at multiples of N."""
    _check_coprime_pair(M, N)
    pos = {M * n for n in range(N)} | {N * m for m in range(2 * M)}
    return SensorArray(tuple(sorted(pos)), Family.CONVENTIONAL_COPRIME, {"M": M, "N": N})


def redundant_positions(M: int, N: int) -> ThinningReport:
    """The ceil(M/2) contiguous redundant sensors of the 2M-element subarray.

    They sit at ``N*m`` for ``floor(M/2)+1 <= m <= M``.
    """
    _check_theorem_range(M, N)
    indices = range(M // 2 + 1, M + 1)
    return ThinningReport(
        removed_positions=frozenset(N * m for m in indices),
        removed_indices_m=indices,
        s_red=len(indices),
    )


def thinned_coprime(M: int, N: int) -> SensorArray:
    report = redundant_positions(M, N)
    parent = conventional_coprime(M, N)
    pos = tuple(p for p in parent.positions if p not in report.removed_positions)
    return SensorArray(pos, Family.THINNED_COPRIME, {"M": M, "N": N})


def nested(N1: int, N2: int) -> SensorArray:
    """Two-level nested array: dense {1..N1} plus sparse {m(N1+1), 1<=m<=N2}."""
    if N1 < 1 or N2 < 1:
        raise BadParam(f"need N1 >= 1 and N2 >= 1, got N1={N1}, N2={N2}")
    pos = set(range(1, N1 + 1)) | {m * (N1 + 1) for m in range(1, N2 + 1)}
    return SensorArray(tuple(sorted(pos)), Family.NESTED, {"N1": N1, "N2": N2})


def cadis(M: int, N: int, p: int, L: int) -> SensorArray:
    """Coprime array with displaced subarrays.

    The N-element subarray is compressed to spacing ``M' = M/p`` and occupies
    ``{M' n : 0 <= n < N}``. The M-element subarray keeps spacing N and starts
    ``L - N`` past the last compressed sensor, so the smallest admissible
    displacement ``L = M' + N`` leaves a gap of exactly ``M'``. With ``M' = 1``
    this anchor gives the hole-free nested CADiS.
    """
    if p < 2 or p > M:
        raise BadParam(f"need 2 <= p <= M, got p={p}, M={M}")
    if M % p:
        raise BadParam(f"p={p} does not divide M={M}")
    if N < 2:
        raise BadParam(f"need N >= 2, got N={N}")
    Mp = M // p
    if math.gcd(Mp, N) != 1:
        raise NotCoprime(f"gcd(M'={Mp}, N={N}) = {math.gcd(Mp, N)}")
    if L < Mp + N:
        raise BadParam(f"displacement L={L} below M'+N={Mp + N}")
    start = Mp * (N - 1) + L - N
    pos = {Mp * n for n in range(N)} | {start + N * m for m in range(M)}
    return SensorArray(
        tuple(sorted(pos)), Family.CADIS, {"M": M, "N": N, "p": p, "Mp": Mp, "L": L}
    )


def custom_array(positions: Iterable[int]) -> SensorArray:
    pos = sorted({int(p) for p in positions})
    if not pos:
        raise EmptyArray("empty position set")
    if pos[0] < 0:
        raise BadParam("positions must be non-negative")
    return SensorArray(tuple(p - pos[0] for p in pos), Family.CUSTOM, {})


def expected_size(family: Family | str, params: Mapping[str, int]) -> int:
    """Closed-form sensor count for a generator."""
    family = Family(family)
    if family is Family.PROTOTYPE_COPRIME:
        return params["M"] + params["N"] - 1
    if family is Family.CONVENTIONAL_COPRIME:
        return 2 * params["M"] + params["N"] - 1
    if family is Family.THINNED_COPRIME:
        M = params["M"]
        return 2 * M + params["N"] - 1 - (M + 1) // 2
    if family is Family.NESTED:
        return params["N1"] + params["N2"]
    if family is Family.CADIS:
        return params["M"] + params["N"]
    raise BadParam(f"no closed-form size for family {family.value}")


def build(family: Family | str, params: Mapping[str, int]) -> SensorArray:
    """Dispatch to a generator by family name."""
    family = Family(family)
    try:
        if family is Family.PROTOTYPE_COPRIME:
            return prototype_coprime(params["M"], params["N"])
        if family is Family.CONVENTIONAL_COPRIME:
            return conventional_coprime(params["M"], params["N"])
        if family is Family.THINNED_COPRIME:
            return thinned_coprime(params["M"], params["N"])
        if family is Family.NESTED:
            return nested(params["N1"], params["N2"])
        if family is Family.CADIS:
            return cadis(params["M"], params["N"], params["p"], params["L"])
    except KeyError as exc:
        raise BadParam(f"missing parameter {exc.args[0]} for {family.value}") from None
    raise BadParam("custom arrays are built from explicit positions")
