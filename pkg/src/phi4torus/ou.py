"""Ornstein-Uhlenbeck field, its exact time stepping, and the stochastic trees.

Noise convention. For k in one half of the lattice the increment of
``<W, e_k>`` has independent real and imaginary parts of variance dt/2, and
``<W, e_-k>`` is its conjugate; the zero mode is real with variance dt. Hence
``Cov(<W_t,e_k>, <W_t,e_l>) = t 1{k+l=0}`` with the bilinear covariance, and the
stationary amplitudes satisfy ``E[c_k c_l] = 1{k+l=0} / (2 (|k|^2 + m0^2))``.

Counterterms. Subtracting the scalar C1 from a field lowers its zero-mode
coefficient by ``C1 (2pi)^{3/2}``, since the constant function 1 has
coefficient ``(2pi)^{3/2}`` on e_0.

Trees (P = P_N^(1), Z the OU field):

    Z1  = P Z
    Z2  = (P Z)^2 - C1
    Z3  = (P Z)^3 - 3 C1 P Z
    Z02 = int_{-inf}^t e^{(t-s)(Lap - m0^2)} P Z2(s) ds      (same for Z03 with Z3)
    Z22 = Z2 (=) P Z02 - C2
    Z23 = Z2 (=) Z03 - 3 C2 Z1

The lower limit -inf is realized by a burn-in from V = 0.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .paraproducts import paraproduct
from .projections import DEFAULT_PROFILE, CutoffProfile, projection_multiplier, support_cutoff
from .renorm import RenormConstants, renorm_constants
from .torus import NORM, SpectralField, as_cutoffs, multiply, wavenumber_sq


class NoiseStream:
    """Counter-based random stream keyed by (seed, purpose keys).

    Streams for different keys are statistically independent and do not depend
    on the order in which they are created, so runs are reproducible from the
    seed alone.
    """

    def __init__(self, seed: int, *keys: int):
        self.seed = int(seed)
        self.keys = tuple(int(k) for k in keys)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.keys)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, *keys: int) -> "NoiseStream":
        return NoiseStream(self.seed, *(self.keys + tuple(keys)))

    def __repr__(self) -> str:
        return f"NoiseStream(seed={self.seed}, keys={self.keys})"


RNG = Union[np.random.Generator, NoiseStream]


def _gen(rng: RNG) -> np.random.Generator:
    return rng.generator if isinstance(rng, NoiseStream) else rng


def hermitian_normal(rng: RNG, K, batch: Sequence[int] = ()) -> np.ndarray:
    """Hermitian complex Gaussian array with E|c_k|^2 = 1 and E[c_k c_l] = 1{k+l=0}.

    On a centered box k -> -k is the reversal of the flattened index, so one
    draw of n reals fills the n/2 free complex modes and the real zero mode.
    """
    box = tuple(2 * k + 1 for k in as_cutoffs(K))
    n = box[0] * box[1] * box[2]
    h = n // 2
    r = _gen(rng).standard_normal(tuple(batch) + (n,))
    out = np.empty(r.shape, complex)
    half = out[..., :h]
    half.real = r[..., :h]
    half.imag = r[..., h + 1:]
    half *= np.sqrt(0.5)
    out[..., h] = r[..., h]
    out[..., h + 1:] = np.conj(half[..., ::-1])
    return out.reshape(tuple(batch) + box)


def decay_rate(K, m0: float) -> np.ndarray:
    """A_k = |k|^2 + m0^2 on the cutoff box."""
    return wavenumber_sq(as_cutoffs(K)) + m0 * m0


def stationary_variance(K, m0: float) -> np.ndarray:
    return 0.5 / decay_rate(K, m0)


def ou_noise_variance(A: np.ndarray, dt: float) -> np.ndarray:
    """Variance of int_0^dt e^{-(dt-s) A} dW_s."""
    return -np.expm1(-2.0 * dt * A) / (2.0 * A)


def ou_increment(rng: RNG, K, m0: float, dt: float, batch: Sequence[int] = ()) -> np.ndarray:
    A = decay_rate(K, m0)
    return np.sqrt(ou_noise_variance(A, dt)) * hermitian_normal(rng, K, batch)


def combine_increments(first: np.ndarray, second: np.ndarray, A: np.ndarray, dt_second: float) -> np.ndarray:
    """Stochastic-convolution increment over [0, a+b] from those over [0,a] and [a,a+b]."""
    return np.exp(-dt_second * A) * first + second


def linear_update(c: np.ndarray, A: np.ndarray, dt: float, forcing: Optional[np.ndarray] = None,
                  noise: Optional[np.ndarray] = None) -> np.ndarray:
    """Exponential-integrator step c <- e^{-dt A} c + (1 - e^{-dt A})/A F + noise.

    Exact for the linear part; the forcing F is frozen over the step.
    """
    out = np.exp(-dt * A) * c
    if forcing is not None:
        out = out + (-np.expm1(-dt * A) / A) * forcing
    if noise is not None:
        out = out + noise
    return out


@dataclass(frozen=True, eq=False)
class OUEnsemble:
    z: SpectralField
    t: float
    m0: float
    N: int = 0
    profile: CutoffProfile = DEFAULT_PROFILE
    consts: Optional[RenormConstants] = None
    v02: Optional[SpectralField] = None
    v03: Optional[SpectralField] = None
    tree_t: Optional[float] = None
    burn_in: float = 0.0

    @property
    def K(self) -> int:
        return self.z.K

    @property
    def constants(self) -> RenormConstants:
        if self.consts is None:
            return renorm_constants(self.N, self.m0, self.profile)
        return self.consts

    @property
    def has_trees(self) -> bool:
        return self.v02 is not None and self.tree_t == self.t


def ou_init_stationary(K, m0: float, rng: RNG, batch: Sequence[int] = (), N: int = 0,
                       profile: Optional[CutoffProfile] = None,
                       consts: Optional[RenormConstants] = None) -> OUEnsemble:
    """Independent stationary draws: Var(c_k) = 1/(2(|k|^2 + m0^2))."""
    if m0 <= 0:
        raise ValueError("m0 must be positive")
    c = np.sqrt(stationary_variance(K, m0)) * hermitian_normal(rng, K, batch)
    profile = profile or DEFAULT_PROFILE
    return OUEnsemble(SpectralField._trusted(c, True), 0.0, float(m0), N, profile, consts)


def ou_step(ens: OUEnsemble, dt: float, rng: Optional[RNG] = None,
            noise: Optional[np.ndarray] = None) -> OUEnsemble:
    """Exact-in-law OU update over dt (tree states are not advanced)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    A = decay_rate(ens.z.cutoffs, ens.m0)
    if noise is None:
        if rng is None:
            raise ValueError("need rng or a precomputed noise increment")
        noise = ou_increment(rng, ens.z.cutoffs, ens.m0, dt, ens.z.batch_shape)
    c = linear_update(ens.z.coeffs, A, dt, None, noise)
    return replace(ens, z=SpectralField._trusted(c, True), t=ens.t + dt)


# --------------------------------------------------------------------------
# trees
# --------------------------------------------------------------------------

def projected(u: SpectralField, N: int, profile: CutoffProfile, power: int = 1) -> SpectralField:
    """P_N^(1) u (or its power), truncated to the projection's support box."""
    K1 = support_cutoff(1, N)
    v = u.resized(tuple(min(K1, c) for c in u.cutoffs))
    mult = projection_multiplier(1, N, v.cutoffs, profile) ** power
    return SpectralField._trusted(v.coeffs * mult, v.real)


def shift_constant(f: SpectralField, value) -> SpectralField:
    """f + value, with value a scalar (or per-sample array) function constant."""
    c = np.array(f.coeffs)
    Kc = f.cutoffs
    c[..., Kc[0], Kc[1], Kc[2]] += np.asarray(value) * NORM
    return SpectralField._trusted(c, f.real)


def wick_square(u: SpectralField, c1: float, cutoff=None) -> SpectralField:
    return shift_constant(multiply(u, u, cutoff=cutoff), -c1)


def wick_cube(u: SpectralField, c1: float, cutoff=None) -> SpectralField:
    cube = multiply(u, u, u, cutoff=cutoff)
    return cube - (3.0 * c1) * u.resized(cube.cutoffs)


def tree_first(ens: OUEnsemble) -> SpectralField:
    return projected(ens.z, ens.N, ens.profile)


def tree_wick2(ens: OUEnsemble) -> SpectralField:
    """(P Z)^2 - C1, full cutoff 2 K1."""
    return wick_square(tree_first(ens), ens.constants.c1)


def tree_wick3(ens: OUEnsemble) -> SpectralField:
    """(P Z)^3 - 3 C1 P Z, full cutoff 3 K1."""
    return wick_cube(tree_first(ens), ens.constants.c1)


def _tree_forcing(z: SpectralField, N: int, profile: CutoffProfile, c1: float):
    u = projected(z, N, profile)
    K1 = u.cutoffs
    w = projection_multiplier(1, N, K1, profile)
    f2 = wick_square(u, c1, cutoff=K1)
    f3 = wick_cube(u, c1, cutoff=K1)
    return (SpectralField._trusted(f2.coeffs * w, True), SpectralField._trusted(f3.coeffs * w, True))


def tree_convolved_step(ens: OUEnsemble, dt: float, rng: Optional[RNG] = None,
                        noise: Optional[tuple[np.ndarray, np.ndarray]] = None) -> OUEnsemble:
    """Advance Z and the convolution trees Z02, Z03 over dt.

    Z moves by two exact half steps; the convolutions use the exponential
    midpoint rule V <- e^{-dt A} V + (1 - e^{-dt A})/A P Z_k(t + dt/2).
    ``noise`` optionally supplies the two half-step increments.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    A = decay_rate(ens.z.cutoffs, ens.m0)
    if noise is None:
        if rng is None:
            raise ValueError("need rng or precomputed increments")
        noise = tuple(ou_increment(rng, ens.z.cutoffs, ens.m0, 0.5 * dt, ens.z.batch_shape) for _ in range(2))
    c_mid = linear_update(ens.z.coeffs, A, 0.5 * dt, None, noise[0])
    c_new = linear_update(c_mid, A, 0.5 * dt, None, noise[1])
    z_mid = SpectralField._trusted(c_mid, True)
    f2, f3 = _tree_forcing(z_mid, ens.N, ens.profile, ens.constants.c1)
    A1 = decay_rate(f2.cutoffs, ens.m0)
    v02 = ens.v02 if ens.v02 is not None and ens.tree_t == ens.t else SpectralField.zeros(f2.cutoffs, f2.batch_shape)
    v03 = ens.v03 if ens.v03 is not None and ens.tree_t == ens.t else SpectralField.zeros(f3.cutoffs, f3.batch_shape)
    v02 = SpectralField._trusted(linear_update(v02.coeffs, A1, dt, f2.coeffs), True)
    v03 = SpectralField._trusted(linear_update(v03.coeffs, A1, dt, f3.coeffs), True)
    t_new = ens.t + dt
    return replace(ens, z=SpectralField._trusted(c_new, True), t=t_new, v02=v02, v03=v03, tree_t=t_new)


def default_burn_in(m0: float) -> float:
    return 20.0 / (m0 * m0)


def burn_in_trees(ens: OUEnsemble, dt: float, rng: RNG, T_burn: Optional[float] = None) -> OUEnsemble:
    """Start the convolution trees from zero and run them for T_burn.

    The residual memory of the zero start is bounded by exp(-m0^2 T_burn).
    """
    T_burn = default_burn_in(ens.m0) if T_burn is None else float(T_burn)
    if T_burn < 10.0 / ens.m0**2:
        warnings.warn(f"burn-in {T_burn:g} is shorter than 10/m0^2; slow modes are not relaxed",
                      RuntimeWarning, stacklevel=2)
    steps = int(np.ceil(T_burn / dt - 1e-9))
    cur = replace(ens, v02=None, v03=None, tree_t=None)
    for _ in range(steps):
        cur = tree_convolved_step(cur, dt, rng)
    return replace(cur, burn_in=ens.burn_in + steps * dt)


def burn_in_bias(m0: float, T_burn: float) -> float:
    return float(np.exp(-m0 * m0 * T_burn))


def tree_resonant(ens: OUEnsemble) -> tuple[SpectralField, SpectralField]:
    """(Z22, Z23) from the current convolution trees."""
    if not ens.has_trees:
        raise ValueError("convolution trees are not current at the ensemble time")
    c = ens.constants
    z2 = tree_wick2(ens)
    w = projected(ens.v02, ens.N, ens.profile)
    z22 = shift_constant(paraproduct(z2, w, "res"), -c.c2)
    z23 = paraproduct(z2, ens.v03, "res")
    z23 = z23 - (3.0 * c.c2) * tree_first(ens).resized(z23.cutoffs)
    return z22, z23


@dataclass(frozen=True, eq=False)
class TreeSnapshot:
    """All trees at one time, for use as coefficients of the split dynamics."""

    t: float
    z1: SpectralField
    z2: SpectralField
    z3: SpectralField
    z02: SpectralField
    z03: SpectralField
    z22: SpectralField
    z23: SpectralField


def tree_snapshot(ens: OUEnsemble) -> TreeSnapshot:
    z22, z23 = tree_resonant(ens)
    return TreeSnapshot(ens.t, tree_first(ens), tree_wick2(ens), tree_wick3(ens), ens.v02, ens.v03, z22, z23)
