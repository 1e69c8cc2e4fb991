"""Moments of real and complex Gaussian vectors by pairing expansion.

Covariances are bilinear, Cov(Z_i, Z_j) = E[(Z_i - EZ_i)(Z_j - EZ_j)] with no
conjugation. Moments involving conjugates are obtained by augmenting the
vector with its conjugate (``GaussianSpec.with_conjugates``).

Two evaluations are provided and kept independent on purpose:

* ``isserlis_moment`` recurses on the first index, which either contributes
  its mean or pairs with one of the remaining indices (memoized on the
  remaining multiset);
* ``permutation_moment`` sums over all permutations of the indices with the
  weights 1 / ((2i)! (n-i)! 2^(n-i)), where the first 2i slots take means and
  the rest are paired consecutively.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

MAX_ORDER = 12
MAX_PERMUTATION_ORDER = 10
_CHUNK = 100_000


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Z = mean + factor @ xi with xi a standard real normal vector.

    ``factor`` may be complex; the bilinear covariance is factor @ factor.T.
    A spec built from a covariance alone (``from_cov``) can be evaluated but
    only sampled when the covariance is real.
    """
    mean: np.ndarray
    cov: np.ndarray
    factor: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean))
        cov = np.atleast_2d(np.asarray(self.cov))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match dimension {mean.size}")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-14):
            raise ValueError("covariance must be symmetric (bilinear convention)")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.mean.size

    @property
    def is_real(self) -> bool:
        return not (np.iscomplexobj(self.mean) and np.any(self.mean.imag)) and not (
            np.iscomplexobj(self.cov) and np.any(self.cov.imag)) and (
            self.factor is None or not (np.iscomplexobj(self.factor) and np.any(self.factor.imag)))

    @classmethod
    def from_factor(cls, mean, factor) -> "GaussianSpec":
        factor = np.atleast_2d(np.asarray(factor))
        return cls(np.asarray(mean), factor @ factor.T, factor)

    @classmethod
    def from_cov(cls, mean, cov) -> "GaussianSpec":
        cov = np.atleast_2d(np.asarray(cov))
        factor = None
        if not np.iscomplexobj(cov) or not np.any(cov.imag):
            cov = np.real(cov)
            w, v = np.linalg.eigh(0.5 * (cov + cov.T))
            if w.min() < -1e-10 * max(1.0, abs(w).max()):
                raise ValueError("covariance is not positive semidefinite")
            factor = v * np.sqrt(np.clip(w, 0.0, None))
        return cls(np.asarray(mean), cov, factor)

    @classmethod
    def from_real_pair(cls, mean, cov_xy) -> "GaussianSpec":
        """Complex Z = X + iY from the 2n x 2n real covariance of (X, Y)."""
        n = np.size(mean)
        real = cls.from_cov(np.zeros(2 * n), cov_xy)
        factor = real.factor[:n] + 1j * real.factor[n:]
        return cls.from_factor(np.asarray(mean, complex), factor)

    def with_conjugates(self) -> "GaussianSpec":
        """Spec of (Z, conj Z); index n + i refers to conj(Z_i)."""
        if self.factor is None:
            raise ValueError("conjugates need the factor representation")
        return GaussianSpec.from_factor(np.concatenate([self.mean, np.conj(self.mean)]),
                                        np.vstack([self.factor, np.conj(self.factor)]))

    def transformed(self, A: np.ndarray) -> "GaussianSpec":
        """Spec of A Z."""
        A = np.atleast_2d(A)
        factor = None if self.factor is None else A @ self.factor
        return GaussianSpec(A @ self.mean, A @ self.cov @ A.T, factor)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.factor is None:
            raise ValueError("sampling needs the factor representation")
        xi = rng.standard_normal((size, self.factor.shape[1]))
        return self.mean + xi @ self.factor.T


def _check(spec: GaussianSpec, indices: Sequence[int], cap: int) -> Tuple[int, ...]:
    idx = tuple(int(i) for i in indices)
    if len(idx) > cap:
        raise ValueError(f"moment order {len(idx)} exceeds the supported maximum {cap}")
    if any(i < 0 or i >= spec.n for i in idx):
        raise ValueError(f"indices {idx} out of range for dimension {spec.n}")
    return idx


def isserlis_moment(spec: GaussianSpec, indices: Sequence[int]) -> complex:
    """E[prod_j Z_{indices[j]}] by recursive pairing with memoization."""
    idx = _check(spec, indices, MAX_ORDER)
    mean, cov = spec.mean, spec.cov

    @lru_cache(maxsize=None)
    def rec(rest: Tuple[int, ...]) -> complex:
        if not rest:
            return 1.0
        first, tail = rest[0], rest[1:]
        total = mean[first] * rec(tail) if mean[first] != 0 else 0.0
        for j, other in enumerate(tail):
            c = cov[first, other]
            if c != 0:
                total += c * rec(tail[:j] + tail[j + 1:])
        return total

    value = rec(tuple(sorted(idx)))
    return complex(value) if np.iscomplexobj(np.asarray(value)) or not spec.is_real else float(np.real(value))


@lru_cache(maxsize=None)
def _permutations(m: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(m))), dtype=np.int8)


def permutation_moment(spec: GaussianSpec, indices: Sequence[int]) -> complex:
    """Same moment by the weighted sum over all permutations.

    Odd orders are evened by appending a constant variable (mean 1, variance
    0). Capped at order 10 since the sum has (order)! terms.
    """
    idx = list(_check(spec, indices, MAX_PERMUTATION_ORDER))
    mean = np.asarray(spec.mean)
    cov = np.asarray(spec.cov)
    if len(idx) % 2:
        mean = np.append(mean, 1.0)
        cov = np.pad(cov, ((0, 1), (0, 1)))
        idx.append(mean.size - 1)
    m = len(idx)
    if m == 0:
        return 1.0
    n = m // 2
    perm = np.asarray(idx)[_permutations(m)]
    total = 0.0
    for i in range(n + 1):
        means = np.prod(mean[perm[:, : 2 * i]], axis=1)
        pairs = np.prod(cov[perm[:, 2 * i::2], perm[:, 2 * i + 1::2]], axis=1)
        weight = 1.0 / (math.factorial(2 * i) * math.factorial(n - i) * 2 ** (n - i))
        total = total + weight * np.sum(means * pairs)
    return float(np.real(total)) if spec.is_real else complex(total)


def mc_moment(spec: GaussianSpec, indices: Sequence[int], samples: int,
              rng: np.random.Generator) -> Tuple[complex, complex]:
    """Empirical moment and its standard error.

    For complex specs the error is returned as se_real + 1j * se_imag.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    idx = list(_check(spec, indices, MAX_ORDER))
    s1 = 0.0
    s2r = s2i = 0.0
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        z = spec.sample(rng, size)
        prod = np.prod(z[:, idx], axis=1) if idx else np.ones(size)
        s1 = s1 + prod.sum()
        s2r += np.sum(np.real(prod) ** 2)
        s2i += np.sum(np.imag(prod) ** 2)
        done += size
    est = s1 / samples
    var_r = (s2r / samples - np.real(est) ** 2) * samples / (samples - 1)
    var_i = (s2i / samples - np.imag(est) ** 2) * samples / (samples - 1)
    se_r = math.sqrt(max(var_r, 0.0) / samples)
    se_i = math.sqrt(max(var_i, 0.0) / samples)
    if spec.is_real:
        return float(np.real(est)), se_r
    return complex(est), complex(se_r, se_i)


def moment_z(estimate: complex, se: complex, exact: complex) -> float:
    """Largest |z| over the real and imaginary components (components with SE 0 must match)."""
    z = 0.0
    for e, s, x in ((np.real(estimate), np.real(se), np.real(exact)), (np.imag(estimate), np.imag(se), np.imag(exact))):
        diff = e - x
        if s > 0:
            z = max(z, abs(diff) / s)
        elif abs(diff) > 1e-12 * max(1.0, abs(x)):
            return math.inf
    return z


def random_spec(rng: np.random.Generator, n: int, complex_valued: bool = False, centered: bool = False,
                rank: Optional[int] = None) -> GaussianSpec:
    """Random spec with entries of order one (for tests and the acceptance suite)."""
    rank = n if rank is None else rank
    factor = rng.normal(size=(n, rank)) / math.sqrt(rank)
    mean = np.zeros(n) if centered else 0.5 * rng.normal(size=n)
    if complex_valued:
        factor = factor + 1j * rng.normal(size=(n, rank)) / math.sqrt(rank)
        mean = mean + (0 if centered else 0.5j * rng.normal(size=n))
    return GaussianSpec.from_factor(mean, factor)
