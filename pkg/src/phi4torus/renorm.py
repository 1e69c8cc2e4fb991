"""Renormalization constants C1(N) and C2(N).

C1 is the pointwise variance of P_N^(1) Z under the stationary OU law:

    C1 = 1/(2 (2pi)^3) sum_k w(k) / (|k|^2 + m0^2)

and C2 the mean of the resonant product of the second Wick power with its
heat-convolved copy:

    C2 = 1/(2 (2pi)^6) sum_{l1,l2} w(l1) w(l2) w(l1+l2)
         / [A(l1) A(l2) (A(l1) + A(l2) + A(l1+l2))]

where w is the squared P_N^(1) multiplier and A(k) = |k|^2 + m0^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .projections import DEFAULT_PROFILE, CutoffProfile, projection_multiplier, support_cutoff
from .torus import TWO_PI, wavenumber_sq

DEFAULT_TERM_BUDGET = 2_000_000_000


class TermBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class RenormConstants:
    N: int
    m0: float
    c1: float
    c2: float

    def __post_init__(self) -> None:
        if not (self.c1 >= 0 and self.c2 >= 0):
            raise ValueError("renormalization constants must be nonnegative")

    def mass_shift(self, lam: float) -> float:
        """The combination C1 - 3 lambda C2 entering energy and drift."""
        return self.c1 - 3.0 * lam * self.c2

    @classmethod
    def zero(cls, N: int = 0, m0: float = 1.0) -> "RenormConstants":
        return cls(N, m0, 0.0, 0.0)


def _weights(N: int, m0: float, prof: CutoffProfile):
    K = support_cutoff(1, N)
    w = projection_multiplier(1, N, K, prof) ** 2
    A = wavenumber_sq((K, K, K)) + m0 * m0
    return K, w, A


def renorm_c1(N: int, m0: float, prof: Optional[CutoffProfile] = None) -> float:
    if m0 <= 0:
        raise ValueError("m0 must be positive")
    _, w, A = _weights(N, m0, prof or DEFAULT_PROFILE)
    return float(np.sum(w / A) / (2.0 * TWO_PI**3))


def _c2_sum(N: int, m0: float, prof: CutoffProfile, kernel, budget: int) -> float:
    K, w, A = _weights(N, m0, prof)
    n = 2 * K + 1
    terms = n**6
    if terms > budget:
        raise TermBudgetError(f"C2 at N={N} needs {terms:.3e} terms, budget {budget:.3e}")
    # l1 + l2 lives in the doubled box; embed w and A there for shifted slicing
    W2 = np.zeros((2 * n - 1,) * 3)
    A2 = np.full((2 * n - 1,) * 3, np.inf)
    W2[K:K + n, K:K + n, K:K + n] = w
    A2[K:K + n, K:K + n, K:K + n] = A
    wf, Af = w.ravel(), A.ravel()
    idx = np.array(np.unravel_index(np.arange(n**3), (n, n, n))).T
    total_off = 0.0
    total_diag = 0.0
    # symmetric in l1 <-> l2: sum the strict upper triangle twice plus the diagonal
    for a in range(n**3):
        if wf[a] == 0.0:
            continue
        i, j, k = idx[a]
        shifted_w = W2[i:i + n, j:j + n, k:k + n].ravel()
        shifted_A = A2[i:i + n, j:j + n, k:k + n].ravel()
        b = slice(a + 1, None)
        term = wf[a] * wf[b] * shifted_w[b] * kernel(Af[a], Af[b], shifted_A[b])
        total_off += float(np.sum(term))
        total_diag += float(wf[a] * wf[a] * shifted_w[a] * kernel(Af[a], Af[a:a + 1], shifted_A[a:a + 1])[0])
    return (2.0 * total_off + total_diag) / (2.0 * TWO_PI**6)


def renorm_c2(N: int, m0: float, prof: Optional[CutoffProfile] = None,
              budget: int = DEFAULT_TERM_BUDGET) -> float:
    if m0 <= 0:
        raise ValueError("m0 must be positive")

    def kernel(a1, a2, a3):
        return 1.0 / (a1 * a2 * (a1 + a2 + a3))

    return _c2_sum(N, m0, prof or DEFAULT_PROFILE, kernel, budget)


def renorm_c2_discrete(N: int, m0: float, dt: float, prof: Optional[CutoffProfile] = None,
                       budget: int = DEFAULT_TERM_BUDGET) -> float:
    """Exact mean of the resonant product when the convolution is time-stepped.

    The tree recursion V <- e^{-dt A} V + (1 - e^{-dt A})/A * F(t + dt/2)
    replaces 1/(A1 + A2 + A3) by
    (1 - e^{-dt A3})/A3 * e^{-dt (A1+A2)/2} / (1 - e^{-dt (A1+A2+A3)}),
    which tends to it as dt -> 0.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")

    def kernel(a1, a2, a3):
        s = a1 + a2
        return (-np.expm1(-dt * a3) / a3) * np.exp(-0.5 * dt * s) / (-np.expm1(-dt * (s + a3))) / (a1 * a2)

    return _c2_sum(N, m0, prof or DEFAULT_PROFILE, kernel, budget)


@lru_cache(maxsize=64)
def _constants(N: int, m0: float, prof: CutoffProfile) -> RenormConstants:
    return RenormConstants(N, m0, renorm_c1(N, m0, prof), renorm_c2(N, m0, prof))


def renorm_constants(N: int, m0: float, prof: Optional[CutoffProfile] = None) -> RenormConstants:
    return _constants(int(N), float(m0), prof or DEFAULT_PROFILE)
