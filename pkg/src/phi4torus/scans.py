"""Scaling scan of the heat-semigroup commutator.

The fields depend on the first coordinate only, so the 3-d operators act as
their restriction to one axis and a wide band (K ~ 10^3) stays cheap. The
band must contain the frequencies t^(-1/2) for every scanned t; otherwise
the commutator sits in its smooth regime, where it grows linearly in t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .besov import BesovParams, besov_norm
from .ou import RNG, hermitian_normal
from .paraproducts import commutator_heat
from .projections import DEFAULT_PROFILE, CutoffProfile
from .torus import SpectralField, wavenumber


def axis_field(rng: RNG, K: int, s: float, batch=()) -> SpectralField:
    """Real fields of x_1 alone with |c_k| = |k|^(-s-1/2) and random phases.

    Their dyadic L^2 block norms scale exactly like 2^(-j s) up to the
    boundary blocks.
    """
    k = wavenumber((K, 0, 0))
    weight = np.where(k > 0, np.maximum(k, 1.0) ** (-(s + 0.5)), 1.0)
    c = hermitian_normal(rng, (K, 0, 0), batch)
    phase = np.where(np.abs(c) > 0, c / np.where(np.abs(c) > 0, np.abs(c), 1.0), 1.0)
    phase[..., K, 0, 0] = 1.0
    return SpectralField._trusted(weight * phase, True)


@dataclass
class CommutatorScan:
    t: np.ndarray
    norms: np.ndarray
    predicted_slope: float
    slope: float
    intercept: float

    @property
    def slope_error(self) -> float:
        return self.slope - self.predicted_slope

    def rows(self) -> List[dict]:
        return [{"t": float(t), "norm": float(n), "predicted_power": float(t ** self.predicted_slope)}
                for t, n in zip(self.t, self.norms)]


def commutator_scan(rng: RNG, alpha: float = 0.5, beta: float = -1.05, gamma: float = -0.5,
                    epsilon: float = 0.1, p: float = 2.0, K: int = 1024, t_min: float = 1e-4,
                    t_max: float = 1e-1, points: int = 13, realizations: int = 8, N: Optional[int] = None,
                    profile: Optional[CutoffProfile] = None) -> CommutatorScan:
    """Mean norm of the commutator in B^gamma_p over log-spaced t, with a least-squares log-log slope.

    f has regularity alpha + epsilon and g regularity beta; the norm is
    averaged over ``realizations`` independent pairs. N defaults to the
    smallest level at which P_N^(1) is the identity on the band.
    """
    if gamma < alpha + beta:
        raise ValueError("the scaling needs gamma >= alpha + beta")
    N = max(0, math.ceil(math.log2(K))) if N is None else N
    f = axis_field(rng, K, alpha + epsilon, (realizations,))
    g = axis_field(rng, K, beta, (realizations,))
    ts = np.geomspace(t_min, t_max, points)
    bp = BesovParams(gamma, p)
    profile = profile or DEFAULT_PROFILE
    norms = np.array([float(np.mean(besov_norm(commutator_heat(f, g, t, N, profile), bp))) for t in ts])
    slope, intercept = np.polyfit(np.log(ts), np.log(norms), 1)
    return CommutatorScan(ts, norms, (gamma - alpha - beta) / 2.0, float(slope), float(intercept))
