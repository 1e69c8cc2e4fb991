"""Littlewood-Paley blocks, partial sums and Besov norms on the torus.

The partition is built from one smooth step ``step(x)`` (1 for x <= 0, 0 for
x >= 1, C-infinity in between) made from the mollifier ``exp(-1/t)``:

* ``chi(r)`` falls from 1 to 0 across [3/4, 4/3];
* ``phi(r) = chi(r/2) - chi(r)``, supported in [3/4, 8/3].

With these choices ``chi + sum_j phi(2^-j .)`` telescopes to 1 and the
support constraints hold by construction.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np

from .torus import Cutoffs, SpectralField, as_cutoffs, lp_norm, wavenumber

CHI_LOW = 0.75
CHI_HIGH = 4.0 / 3.0
PHI_LOW = 0.75
PHI_HIGH = 8.0 / 3.0


class Infinity(enum.Enum):
    """Marker for an infinite integrability or summability index."""

    INF = "inf"

    def __repr__(self) -> str:
        return "INF"


INF = Infinity.INF
Exponent = Union[float, Infinity]


def parse_exponent(value) -> Exponent:
    if value is INF or (isinstance(value, str) and value.strip().lower() in {"inf", "infinity"}):
        return INF
    v = float(value)
    if math.isinf(v):
        return INF
    if v < 1:
        raise ValueError(f"exponent must lie in [1, inf], got {v}")
    return v


def _mollifier(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(x) -> np.ndarray:
    """C-infinity step: 1 on (-inf, 0], 0 on [1, inf), strictly monotone between."""
    x = np.asarray(x, dtype=float)
    a = _mollifier(1.0 - x)
    b = _mollifier(x)
    return a / (a + b)


def _chi(r) -> np.ndarray:
    return smooth_step((np.asarray(r, dtype=float) - CHI_LOW) / (CHI_HIGH - CHI_LOW))


def _phi(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return _chi(0.5 * r) - _chi(r)


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    chi: Callable[[np.ndarray], np.ndarray] = _chi
    phi: Callable[[np.ndarray], np.ndarray] = _phi

    @staticmethod
    def j_max(K) -> int:
        """Largest block index that can act on a field with these cutoffs."""
        kmax = math.sqrt(sum(k * k for k in as_cutoffs(K)))
        if kmax == 0:
            return -1
        return int(math.ceil(math.log2(kmax))) + 1

    def profile(self, j: int, r) -> np.ndarray:
        """Radial multiplier of block j."""
        r = np.asarray(r, dtype=float)
        if j < -1:
            return np.zeros_like(r)
        if j == -1:
            return self.chi(r)
        return self.phi(r / 2.0**j)

    def unity_residual(self, r) -> float:
        """sup |chi + sum_j phi(2^-j r) - 1| over the sample radii."""
        r = np.asarray(r, dtype=float)
        total = self.chi(r)
        jtop = int(math.ceil(math.log2(max(float(np.max(r)), 1.0) / PHI_LOW))) + 1
        for j in range(0, jtop + 1):
            lo, hi = PHI_LOW * 2.0**j, PHI_HIGH * 2.0**j
            mask = (r > lo) & (r < hi)
            if np.any(mask):
                total[mask] += self.phi(r[mask] / 2.0**j)
        return float(np.max(np.abs(total - 1.0)))


class PartitionError(RuntimeError):
    pass


def build_partition(check_radii: Optional[np.ndarray] = None) -> DyadicPartition:
    """Construct the partition and verify it on a dense radius sample."""
    P = DyadicPartition()
    r = np.linspace(0.0, 64.0, 20001) if check_radii is None else check_radii
    res = P.unity_residual(r)
    if res > 1e-12:
        raise PartitionError(f"partition-of-unity residual {res:.3e} exceeds 1e-12")
    return P


DEFAULT_PARTITION = build_partition()


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: Exponent = 2.0
    r: Exponent = INF

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", parse_exponent(self.p))
        object.__setattr__(self, "r", parse_exponent(self.r))


@lru_cache(maxsize=64)
def block_table(P: DyadicPartition, cutoffs: Cutoffs) -> np.ndarray:
    """Multipliers of blocks j = -1 .. j_max stacked along axis 0."""
    kabs = wavenumber(cutoffs)
    J = P.j_max(cutoffs)
    table = np.stack([P.profile(j, kabs) for j in range(-1, J + 1)])
    table.setflags(write=False)
    return table


def _table(f: SpectralField, P: Optional[DyadicPartition]) -> np.ndarray:
    return block_table(P or DEFAULT_PARTITION, f.cutoffs)


def dyadic_block(j: int, f: SpectralField, P: Optional[DyadicPartition] = None) -> SpectralField:
    table = _table(f, P)
    if j < -1 or j + 1 >= table.shape[0]:
        return SpectralField.zeros(f.cutoffs, f.batch_shape, f.real)
    return SpectralField._trusted(f.coeffs * table[j + 1], f.real)


def all_blocks(f: SpectralField, P: Optional[DyadicPartition] = None) -> np.ndarray:
    """Coefficients of every block, shape ``batch + (J, nx, ny, nz)``; index 0 is j=-1."""
    return f.coeffs[..., None, :, :, :] * _table(f, P)


def s_partial(j: int, f: SpectralField, P: Optional[DyadicPartition] = None) -> SpectralField:
    """S_j f = sum_{k=-1}^{j-1} Delta_k f, with S_{-1} f = 0."""
    table = _table(f, P)
    if j <= -1:
        return SpectralField.zeros(f.cutoffs, f.batch_shape, f.real)
    mult = np.sum(table[: min(j + 1, table.shape[0])], axis=0)
    return SpectralField._trusted(f.coeffs * mult, f.real)


def block_norms(f: SpectralField, p: Exponent = 2.0, P: Optional[DyadicPartition] = None,
                M=None) -> np.ndarray:
    """||Delta_j f||_{L^p} for j = -1 .. j_max (last axis)."""
    p = parse_exponent(p)
    blocks = SpectralField._trusted(all_blocks(f, P), f.real)
    return lp_norm(blocks, np.inf if p is INF else p, M)


def besov_norm(f: SpectralField, bp: BesovParams, P: Optional[DyadicPartition] = None,
               M=None) -> np.ndarray:
    """||f||_{B^s_{p,r}} from the dyadic block norms."""
    norms = block_norms(f, bp.p, P, M)
    j = np.arange(-1, norms.shape[-1] - 1)
    weighted = 2.0 ** (j * bp.s) * norms
    if bp.r is INF:
        return np.max(weighted, axis=-1)
    return np.sum(weighted ** bp.r, axis=-1) ** (1.0 / bp.r)
