"""Spectral cutoffs P_N^(1), P_N^(2) and the heat/mass semigroup.

Both projections are tensor-product multipliers
``psi(2^-N |k_1|) psi(2^-N |k_2|) psi(2^-N |k_3|)``:

* ``psi1`` is a smooth step, 1 on [0, 1] and 0 on [2, inf);
* ``psi2`` is a linear ramp, 1 on [0, 2] and 0 on [4, inf).

Because psi2 equals 1 wherever psi1 is nonzero, P^(1) P^(2) = P^(1) holds
bit-for-bit.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .besov import smooth_step
from .torus import Cutoffs, SpectralField, as_cutoffs, lattice, wavenumber_sq


def _psi1(r) -> np.ndarray:
    return smooth_step(np.asarray(r, dtype=float) - 1.0)


def _psi2(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.clip((4.0 - r) / 2.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class CutoffProfile:
    psi1: Callable[[np.ndarray], np.ndarray] = _psi1
    psi2: Callable[[np.ndarray], np.ndarray] = _psi2

    def psi(self, i: int) -> Callable[[np.ndarray], np.ndarray]:
        if i == 1:
            return self.psi1
        if i == 2:
            return self.psi2
        raise ValueError(f"projection index must be 1 or 2, got {i}")

    def dump_csv(self, path: Union[str, Path], r_max: float = 5.0, n: int = 501) -> None:
        r = np.linspace(0.0, r_max, n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "psi1", "psi2"])
            for row in zip(r, self.psi1(r), self.psi2(r)):
                w.writerow([repr(float(v)) for v in row])


class SampledProfile:
    """Piecewise-linear interpolant of a profile loaded from CSV."""

    def __init__(self, r: np.ndarray, v: np.ndarray):
        self.r, self.v = np.asarray(r, float), np.asarray(v, float)

    def __call__(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, float), self.r, self.v, right=self.v[-1])


def load_profile_csv(path: Union[str, Path]) -> CutoffProfile:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return CutoffProfile(SampledProfile(data["r"], data["psi1"]), SampledProfile(data["r"], data["psi2"]))


DEFAULT_PROFILE = CutoffProfile()


def support_cutoff(i: int, N: int) -> int:
    """Largest |k_j| on which P_N^(i) can be nonzero (psi vanishes from 2^i on)."""
    return 2 ** (N + i) - 1


@lru_cache(maxsize=128)
def _projection_table(prof: CutoffProfile, i: int, N: int, cutoffs: Cutoffs) -> np.ndarray:
    psi = prof.psi(i)
    scale = 2.0 ** (-N)
    kx, ky, kz = lattice(cutoffs)
    out = psi(np.abs(kx) * scale) * psi(np.abs(ky) * scale) * psi(np.abs(kz) * scale)
    out.setflags(write=False)
    return out


def projection_multiplier(i: int, N: int, K, prof: Optional[CutoffProfile] = None) -> np.ndarray:
    return _projection_table(prof or DEFAULT_PROFILE, i, N, as_cutoffs(K))


def project(i: int, N: int, f: SpectralField, prof: Optional[CutoffProfile] = None,
            truncate: bool = False) -> SpectralField:
    """P_N^(i) f. With ``truncate`` the result is cut to the projection's support box."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    out = SpectralField._trusted(f.coeffs * projection_multiplier(i, N, f.cutoffs, prof), f.real)
    if truncate:
        k = support_cutoff(i, N)
        out = out.resized(tuple(min(k, c) for c in f.cutoffs))
    return out


@lru_cache(maxsize=128)
def _semigroup_table(t: float, m0: float, cutoffs: Cutoffs) -> np.ndarray:
    out = np.exp(-t * (wavenumber_sq(cutoffs) + m0 * m0))
    out.setflags(write=False)
    return out


def semigroup_multiplier(t: float, m0: float, K) -> np.ndarray:
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    return _semigroup_table(float(t), float(m0), as_cutoffs(K))


def semigroup(t: float, m0: float, f: SpectralField) -> SpectralField:
    """exp(t(Laplacian - m0^2)) f; m0 = 0 gives the pure heat flow."""
    if m0 < 0:
        raise ValueError("mass must be nonnegative")
    return SpectralField._trusted(f.coeffs * semigroup_multiplier(t, m0, f.cutoffs), f.real)
