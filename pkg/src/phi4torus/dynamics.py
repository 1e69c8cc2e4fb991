"""Galerkin dynamics of the cutoff model and its energy.

State Y lives on the box |k_i| <= 2^{N+2} - 1 (support of P_N^(2)); only the
modes inside |k_i| <= 2^{N+1} - 1 (support of P_N^(1)) feel the interaction.

    dY = dW - (-Lap + m0^2) Y dt - lam P1[(P1 Y)^3 - 3 (C1 - 3 lam C2) P1 Y] dt

The cubic term is the L^2 gradient of

    U(phi) = int lam/4 (P1 phi)^4 - (3 lam / 2)(C1 - 3 lam C2)(P1 phi)^2 dx.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ou import RNG, decay_rate, hermitian_normal, linear_update, ou_increment, projected
from .projections import DEFAULT_PROFILE, CutoffProfile, projection_multiplier, support_cutoff
from .renorm import RenormConstants
from .torus import SpectralField, multiply

SCHEMES = ("exponential-euler", "tamed-euler")
TAMED_CEILING = 0.5


class BlowUpError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    N: int = 0
    m0: float = 1.0
    lam: float = 0.1
    dt: float = 1e-3
    T: float = 1.0
    scheme: str = "exponential-euler"
    seed: int = 0
    M: Optional[int] = None
    chains: int = 1
    burn_in: Optional[float] = None
    lambda0: float = 1.0
    blowup_ceiling: float = 1e8

    def __post_init__(self) -> None:
        if self.N < 0:
            raise ValueError("N must be nonnegative")
        if self.m0 <= 0:
            raise ValueError("m0 must be positive")
        if not (0.0 <= self.lam <= self.lambda0):
            raise ValueError(f"lambda={self.lam} outside [0, lambda0={self.lambda0}]")
        if self.dt <= 0 or self.T < 0:
            raise ValueError("need dt > 0 and T >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.chains < 1:
            raise ValueError("chains must be positive")
        if self.scheme == "tamed-euler" and self.dt * self.max_rate >= TAMED_CEILING:
            raise ValueError(
                f"tamed-euler unstable: dt*max rate = {self.dt * self.max_rate:.3g} >= {TAMED_CEILING}")

    @property
    def state_cutoff(self) -> int:
        return support_cutoff(2, self.N)

    @property
    def interaction_cutoff(self) -> int:
        return support_cutoff(1, self.N)

    @property
    def max_rate(self) -> float:
        K = self.state_cutoff
        return 3.0 * K * K + self.m0**2

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def nonlinear_force(Y: SpectralField, N: int, lam: float, consts: RenormConstants,
                    profile: Optional[CutoffProfile] = None) -> SpectralField:
    """-lam P1[(P1 Y)^3 - 3 (C1 - 3 lam C2) P1 Y] on the interaction box."""
    profile = profile or DEFAULT_PROFILE
    u = projected(Y, N, profile)
    K1 = u.cutoffs
    cube = multiply(u, u, u, cutoff=K1)
    inner = cube.coeffs - 3.0 * consts.mass_shift(lam) * u.coeffs
    out = -lam * projection_multiplier(1, N, K1, profile) * inner
    return SpectralField._trusted(out, True)


def drift(Y: SpectralField, cfg: SimConfig, consts: RenormConstants,
          profile: Optional[CutoffProfile] = None) -> SpectralField:
    """Full drift -(-Lap + m0^2) Y + nonlinear force."""
    A = decay_rate(Y.cutoffs, cfg.m0)
    lin = SpectralField._trusted(-A * Y.coeffs, Y.real)
    if cfg.lam == 0:
        return lin
    return lin + nonlinear_force(Y, cfg.N, cfg.lam, consts, profile).resized(Y.cutoffs)


def energy_U(phi: SpectralField, N: int, lam: float, consts: RenormConstants,
             profile: Optional[CutoffProfile] = None) -> np.ndarray:
    """U_N(phi), exact (the quartic integral is ||u^2||^2 by Parseval)."""
    u = projected(phi, N, profile or DEFAULT_PROFILE)
    quartic = multiply(u, u).norm_sq()
    quadratic = u.norm_sq()
    return lam / 4.0 * quartic - 1.5 * lam * consts.mass_shift(lam) * quadratic


def energy_gradient(phi: SpectralField, N: int, lam: float, consts: RenormConstants,
                    profile: Optional[CutoffProfile] = None) -> SpectralField:
    """L^2 gradient of U_N, i.e. minus the nonlinear force."""
    return -nonlinear_force(phi, N, lam, consts, profile)


def _check(Y: np.ndarray, cfg: SimConfig, t: Optional[float]) -> None:
    norms = np.sum(np.abs(Y) ** 2, axis=(-3, -2, -1))
    if not np.all(np.isfinite(norms)) or np.any(norms > cfg.blowup_ceiling):
        bad = np.flatnonzero(~np.isfinite(norms) | (norms > cfg.blowup_ceiling))
        raise BlowUpError(
            f"field norm exceeded {cfg.blowup_ceiling:g} in chain(s) {bad[:5].tolist()}"
            + (f" at t={t:g}" if t is not None else ""))


def step_sde(state: SpectralField, cfg: SimConfig, consts: RenormConstants, rng: Optional[RNG] = None,
             noise: Optional[np.ndarray] = None, profile: Optional[CutoffProfile] = None,
             noise_projection: Optional[int] = None, t: Optional[float] = None) -> SpectralField:
    """One time step of the Galerkin SDE.

    Exponential Euler integrates the linear part exactly (with the exact OU
    noise variance) and freezes the cubic force over the step; with lam = 0
    it is the OU update itself. ``noise_projection=2`` multiplies the noise
    by P_N^(2), which turns the step into one for X = P_N^(2) Y directly.
    """
    profile = profile or DEFAULT_PROFILE
    K = state.cutoffs
    A = decay_rate(K, cfg.m0)
    if noise is None:
        if rng is None:
            raise ValueError("need rng or a precomputed noise increment")
        if cfg.scheme == "exponential-euler":
            noise = ou_increment(rng, K, cfg.m0, cfg.dt, state.batch_shape)
        else:
            noise = np.sqrt(cfg.dt) * hermitian_normal(rng, K, state.batch_shape)
    if noise_projection is not None:
        noise = noise * projection_multiplier(noise_projection, cfg.N, K, profile)
    force = None
    if cfg.lam != 0:
        force = nonlinear_force(state, cfg.N, cfg.lam, consts, profile).resized(K).coeffs
    if cfg.scheme == "exponential-euler":
        out = linear_update(state.coeffs, A, cfg.dt, force, noise)
    else:
        if force is not None:
            size = np.sqrt(np.sum(np.abs(force) ** 2, axis=(-3, -2, -1)))[..., None, None, None]
            force = force / (1.0 + cfg.dt * size)
            out = state.coeffs + cfg.dt * (-A * state.coeffs + force) + noise
        else:
            out = state.coeffs + cfg.dt * (-A * state.coeffs) + noise
    _check(out, cfg, t)
    return SpectralField._trusted(out, True)
