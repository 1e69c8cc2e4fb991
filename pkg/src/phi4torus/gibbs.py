"""Sampling the cutoff Gibbs measure and checking its invariance under the dynamics.

The target is mu(dphi) ∝ exp(-beta U_N(phi)) mu0(dphi) with mu0 the Gaussian
law of covariance [2(-Lap + m0^2)]^{-1}. With unit-intensity noise the
Galerkin SDE has the gradient drift -(-Lap + m0^2) Y - grad U, so its
invariant law is the one with beta = 2 (the usual Langevin factor); beta is
kept as a parameter so that other normalizations can be examined.

Only the modes of the interaction box feel U; the remaining modes of the
state box are exactly Gaussian and are drawn directly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .dynamics import SimConfig, energy_gradient, energy_U, step_sde
from .ou import (RNG, NoiseStream, combine_increments, decay_rate, hermitian_normal, linear_update,
                 ou_increment, ou_noise_variance, projected, stationary_variance)
from .projections import DEFAULT_PROFILE, CutoffProfile, projection_multiplier
from .renorm import RenormConstants
from .torus import NORM, SpectralField, lattice, multiply, wavenumber_sq

LANGEVIN_BETA = 2.0


@dataclass(frozen=True)
class GibbsConfig:
    mala_step: float = 2.0
    n_steps: int = 200
    thinning: int = 1
    accept_band: tuple = (0.4, 0.8)
    beta: float = LANGEVIN_BETA
    method: str = "mala"

    def __post_init__(self) -> None:
        if self.mala_step <= 0:
            raise ValueError("mala_step must be positive")
        if self.n_steps < 0 or self.thinning < 1:
            raise ValueError("need n_steps >= 0 and thinning >= 1")
        if self.method not in ("mala", "rejection"):
            raise ValueError("method must be 'mala' or 'rejection'")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


def gaussian_draw(K, m0: float, rng: RNG, batch: Sequence[int] = ()) -> np.ndarray:
    return np.sqrt(stationary_variance(K, m0)) * hermitian_normal(rng, K, batch)


class PCNLangevin:
    """Preconditioned Crank-Nicolson Langevin proposal on the interaction box.

    With C = [2A]^{-1} the Gaussian covariance, the proposal is
    v = a u - b C G(u) + sqrt(1 - a^2) xi, xi ~ N(0, C),
    a = (2 - d)/(2 + d), b = 2d/(2 + d), G the L^2 gradient of beta U.
    For beta = 0 it is reversible for mu0 and every proposal is accepted.
    """

    def __init__(self, sim: SimConfig, consts: RenormConstants, step: float, beta: float,
                 profile: Optional[CutoffProfile] = None):
        self.sim, self.consts, self.beta = sim, consts, beta
        self.profile = profile or DEFAULT_PROFILE
        self.K = sim.interaction_cutoff
        self.A = decay_rate(self.K, sim.m0)
        self.a = (2.0 - step) / (2.0 + step)
        self.b = 2.0 * step / (2.0 + step)

    def potential(self, u: SpectralField) -> np.ndarray:
        if self.beta == 0 or self.sim.lam == 0:
            return np.zeros(u.batch_shape)
        return self.beta * energy_U(u, self.sim.N, self.sim.lam, self.consts, self.profile)

    def gradient(self, u: SpectralField) -> np.ndarray:
        if self.beta == 0 or self.sim.lam == 0:
            return np.zeros_like(u.coeffs)
        g = energy_gradient(u, self.sim.N, self.sim.lam, self.consts, self.profile)
        return self.beta * g.resized(u.cutoffs).coeffs

    def log_target(self, u: SpectralField, pot: Optional[np.ndarray] = None) -> np.ndarray:
        pot = self.potential(u) if pot is None else pot
        return -np.sum(self.A * np.abs(u.coeffs) ** 2, axis=(-3, -2, -1)) - pot

    def mean(self, u: SpectralField, grad: Optional[np.ndarray] = None) -> np.ndarray:
        grad = self.gradient(u) if grad is None else grad
        return self.a * u.coeffs - self.b * grad / (2.0 * self.A)

    def log_proposal(self, v: SpectralField, m: np.ndarray) -> np.ndarray:
        return -np.sum(self.A * np.abs(v.coeffs - m) ** 2, axis=(-3, -2, -1)) / (1.0 - self.a**2)

    def propose(self, u: SpectralField, rng: RNG, grad: Optional[np.ndarray] = None) -> SpectralField:
        xi = gaussian_draw(self.K, self.sim.m0, rng, u.batch_shape)
        return SpectralField._trusted(self.mean(u, grad) + np.sqrt(1.0 - self.a**2) * xi, True)

    def log_acceptance(self, u: SpectralField, v: SpectralField) -> np.ndarray:
        return (self.log_target(v) + self.log_proposal(u, self.mean(v))
                - self.log_target(u) - self.log_proposal(v, self.mean(u)))

    def run(self, u: SpectralField, n_steps: int, rng: RNG, thinning: int = 1):
        """Yield (state, acceptance rate) every ``thinning`` steps."""
        pot, grad = self.potential(u), self.gradient(u)
        gen = rng.generator if isinstance(rng, NoiseStream) else rng
        accepted = np.zeros(u.batch_shape)
        for i in range(1, n_steps + 1):
            m_u = self.mean(u, grad)
            v = self.propose(u, gen, grad)
            pot_v, grad_v = self.potential(v), self.gradient(v)
            m_v = self.mean(v, grad_v)
            log_a = (self.log_target(v, pot_v) + self.log_proposal(u, m_v)
                     - self.log_target(u, pot) - self.log_proposal(v, m_u))
            take = np.log(gen.random(u.batch_shape)) < log_a
            mask = take[..., None, None, None]
            u = SpectralField._trusted(np.where(mask, v.coeffs, u.coeffs), True)
            pot, grad = np.where(take, pot_v, pot), np.where(mask, grad_v, grad)
            accepted += take
            if i % thinning == 0:
                yield u, float(np.mean(accepted) / i)


def rejection_bound(sim: SimConfig, consts: RenormConstants, beta: float) -> float:
    """sup_phi (-beta U_N(phi)), attained at constant P1 phi with (P1 phi)^2 = 3c."""
    c = consts.mass_shift(sim.lam)
    if c <= 0 or sim.lam == 0:
        return 0.0
    return beta * (2 * np.pi) ** 3 * 9.0 * sim.lam * c * c / 4.0


def rejection_draw(n: int, sim: SimConfig, consts: RenormConstants, rng: RNG, beta: float = LANGEVIN_BETA,
                   profile: Optional[CutoffProfile] = None, max_rounds: int = 1000) -> SpectralField:
    """Exact independent draws of the interaction block by rejection from mu0."""
    gen = rng.generator if isinstance(rng, NoiseStream) else rng
    K = sim.interaction_cutoff
    bound = rejection_bound(sim, consts, beta)
    kept: List[np.ndarray] = []
    have = 0
    for _ in range(max_rounds):
        batch = max(64, int(1.2 * (n - have)) + 16)
        u = SpectralField._trusted(gaussian_draw(K, sim.m0, gen, (batch,)), True)
        log_w = -beta * energy_U(u, sim.N, sim.lam, consts, profile) - bound if sim.lam else np.zeros(batch)
        take = np.log(gen.random(batch)) < log_w
        kept.append(u.coeffs[take])
        have += int(take.sum())
        if have >= n:
            return SpectralField._trusted(np.concatenate(kept)[:n], True)
    raise RuntimeError("rejection sampler acceptance too low; use MALA")


def sample_interaction_block(n: int, sim: SimConfig, gibbs: GibbsConfig, consts: RenormConstants, rng: RNG,
                             profile: Optional[CutoffProfile] = None) -> SpectralField:
    """n independent draws of the interaction-box modes under mu_N."""
    if gibbs.method == "rejection":
        return rejection_draw(n, sim, consts, rng, gibbs.beta, profile)
    kernel = PCNLangevin(sim, consts, gibbs.mala_step, gibbs.beta, profile)
    u = SpectralField._trusted(gaussian_draw(kernel.K, sim.m0, rng, (n,)), True)
    rate = 1.0
    for u, rate in kernel.run(u, gibbs.n_steps, rng, max(gibbs.n_steps, 1)):
        pass
    _check_rate(rate, gibbs)
    return u


def _check_rate(rate: float, gibbs: GibbsConfig) -> None:
    lo, hi = gibbs.accept_band
    if rate < lo:
        warnings.warn(f"MALA acceptance {rate:.2f} below {lo}; decrease mala_step", RuntimeWarning, stacklevel=3)
    elif rate > hi and gibbs.mala_step < 2.0:
        warnings.warn(f"MALA acceptance {rate:.2f} above {hi}; increase mala_step", RuntimeWarning, stacklevel=3)


def embed(block: SpectralField, outer: SpectralField) -> SpectralField:
    """Overwrite the central box of ``outer`` with ``block``."""
    c = np.array(outer.coeffs)
    Ko, Kb = outer.cutoffs, block.cutoffs
    sl = tuple(slice(o - b, o + b + 1) for o, b in zip(Ko, Kb))
    c[(Ellipsis,) + sl] = block.coeffs
    return SpectralField._trusted(c, True)


def outer_modes(sim: SimConfig, rng: RNG, batch: Sequence[int]) -> SpectralField:
    """Gaussian draws on the state box with the interaction box zeroed."""
    K2, K1 = sim.state_cutoff, sim.interaction_cutoff
    c = gaussian_draw(K2, sim.m0, rng, batch)
    c[(Ellipsis,) + (slice(K2 - K1, K2 + K1 + 1),) * 3] = 0.0
    return SpectralField._trusted(c, True)


def gibbs_sample(gibbs: GibbsConfig, sim: SimConfig, consts: RenormConstants, rng: RNG,
                 profile: Optional[CutoffProfile] = None) -> Iterator[SpectralField]:
    """Stream of thinned samples on the state box, batched over ``sim.chains``.

    The interaction block follows a MALA chain (or exact rejection draws);
    the other modes are fresh Gaussian draws for every emitted sample.
    """
    streams = NoiseStream(sim.seed, 11) if rng is None else rng
    batch = (sim.chains,)
    if gibbs.method == "rejection":
        for _ in range(gibbs.n_steps // gibbs.thinning):
            block = rejection_draw(sim.chains, sim, consts, streams, gibbs.beta, profile)
            yield embed(block, outer_modes(sim, streams, batch))
        return
    kernel = PCNLangevin(sim, consts, gibbs.mala_step, gibbs.beta, profile)
    u = SpectralField._trusted(gaussian_draw(kernel.K, sim.m0, streams, batch), True)
    rate = 1.0
    for u, rate in kernel.run(u, gibbs.n_steps, streams, gibbs.thinning):
        yield embed(u, outer_modes(sim, streams, batch))
    _check_rate(rate, gibbs)


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------

Observable = Callable[[SpectralField], np.ndarray]


def lowest_modes(count: int = 10) -> List[tuple]:
    """The ``count`` lowest modes up to k <-> -k, ordered by |k| then lexicographically."""
    R = 3
    ks = [(x, y, z) for x in range(-R, R + 1) for y in range(-R, R + 1) for z in range(-R, R + 1)]
    half = [k for k in ks if k >= (0, 0, 0)]
    half.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2 + k[2] ** 2, k))
    return half[:count]


def l2_observable(N: int, profile: Optional[CutoffProfile] = None) -> Observable:
    def obs(y: SpectralField) -> np.ndarray:
        w = projection_multiplier(2, N, y.cutoffs, profile)
        return np.sum((w * w) * np.abs(y.coeffs) ** 2, axis=(-3, -2, -1))
    return obs


def quartic_observable(N: int, profile: Optional[CutoffProfile] = None) -> Observable:
    def obs(y: SpectralField) -> np.ndarray:
        u = projected(y, N, profile or DEFAULT_PROFILE)
        return multiply(u, u).norm_sq()
    return obs


def mode_observable(k: tuple) -> Observable:
    def obs(y: SpectralField) -> np.ndarray:
        return np.abs(y.coefficient(k)) ** 2
    return obs


def default_observables(N: int, profile: Optional[CutoffProfile] = None) -> Dict[str, Observable]:
    out: Dict[str, Observable] = {"l2_norm_sq": l2_observable(N, profile),
                                  "quartic_integral": quartic_observable(N, profile)}
    for k in lowest_modes(10):
        out["mode_%d_%d_%d" % k] = mode_observable(k)
    return out


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------

def welch_z(a: np.ndarray, b: np.ndarray) -> float:
    """(mean b - mean a) / sqrt(var a / n_a + var b / n_b)."""
    se = np.sqrt(np.var(a, ddof=1) / a.size + np.var(b, ddof=1) / b.size)
    diff = float(np.mean(b) - np.mean(a))
    return 0.0 if se == 0 and diff == 0 else diff / se


def bonferroni_threshold(n_tests: int, one_test_z: float = 3.0) -> float:
    """Two-sided z threshold keeping the familywise error at that of one |z| < one_test_z test."""
    family = 2.0 * stats.norm.sf(one_test_z)
    return float(stats.norm.isf(family / (2.0 * n_tests)))


@dataclass
class InvarianceReport:
    lam: float
    dt: float
    chains: int
    times: List[float]
    observables: List[str]
    # means[dt][name] -> array over checkpoint times (including t = 0)
    means: Dict[float, Dict[str, np.ndarray]]
    stderr: Dict[float, Dict[str, np.ndarray]]
    z_scores: Dict[str, float]
    checkpoint_z: List[float]
    residuals: Dict[str, Dict[float, float]]
    residual_se: Dict[str, Dict[float, float]]
    z_threshold: float
    reference_dt: Optional[float] = None

    @property
    def max_abs_z(self) -> float:
        return max(abs(z) for z in self.z_scores.values())

    def drift_passed(self, threshold: Optional[float] = None) -> bool:
        return self.max_abs_z < (self.z_threshold if threshold is None else threshold)

    def checkpoints_passed(self, threshold: float = 3.0) -> bool:
        return all(abs(z) < threshold for z in self.checkpoint_z)

    def monotone(self, name: str) -> bool:
        r = [self.residuals[name][d] for d in sorted(self.residuals[name], reverse=True)]
        return all(x > y for x, y in zip(r, r[1:]))

    def resolved(self, name: str, n_se: float = 3.0) -> bool:
        """Whether the residual at the coarsest step stands out of the noise.

        Residuals below 1e-10 of the observable's mean are rounding, whatever their SE.
        """
        if not self.residuals.get(name):
            return False
        d = max(self.residuals[name])
        r = self.residuals[name][d]
        scale = abs(float(self.means.get(self.dt, {}).get(name, [0.0])[-1]))
        return r > n_se * self.residual_se[name][d] and r > 1e-10 * scale

    def resolved_shrink(self, n_se: float = 3.0) -> tuple[bool, List[str]]:
        """Monotone shrinkage over every resolved residual (needs at least one)."""
        names = [n for n in self.observables if self.resolved(n, n_se)]
        return bool(names) and all(self.monotone(n) for n in names), names

    def rows(self) -> List[dict]:
        out = []
        for name in self.observables:
            m = self.means[self.dt][name]
            s = self.stderr[self.dt][name]
            out.append({"observable": name, "mean_0": m[0], "mean_T": m[-1], "se_0": s[0], "se_T": s[-1],
                        "z": self.z_scores[name],
                        **{f"residual_dt={d:g}": r for d, r in sorted(self.residuals.get(name, {}).items())}})
        return out


def _levels(dt: float, dts: Optional[Sequence[float]], reference: Optional[float]):
    levels = sorted({float(dt)} | {float(d) for d in (dts or [])}, reverse=True)
    if len(levels) > 1:
        reference = reference or min(levels) / 2.0
        levels.append(float(reference))
    fine = min(levels)
    ratios = [l / fine for l in levels]
    if any(abs(r - round(r)) > 1e-9 for r in ratios):
        raise ValueError("all step sizes must be integer multiples of the finest one")
    return levels, fine, [int(round(r)) for r in ratios], (reference if len(levels) > 1 else None)


def invariance_test(sim: SimConfig, gibbs: GibbsConfig, observables: Optional[Mapping[str, Observable]] = None,
                    rng: Optional[NoiseStream] = None, dts: Optional[Sequence[float]] = None,
                    reference_dt: Optional[float] = None, checkpoints: int = 5,
                    consts: Optional[RenormConstants] = None, profile: Optional[CutoffProfile] = None,
                    initial: Optional[SpectralField] = None, chunk: int = 2500) -> InvarianceReport:
    """Draw mu_N samples, evolve them to sim.T, and compare observable means.

    Every level in ``dts`` (plus ``sim.dt`` and a reference level at half the
    smallest step) is driven by the same Brownian path, so differences of
    means between levels isolate the time-discretization bias. The modes
    outside the interaction box evolve as exact OU processes and are shared
    by all levels.
    """
    from .renorm import renorm_constants

    profile = profile or DEFAULT_PROFILE
    consts = consts or renorm_constants(sim.N, sim.m0, profile)
    rng = rng or NoiseStream(sim.seed)
    observables = dict(observables or default_observables(sim.N, profile))
    names = list(observables)
    levels, fine, ratios, ref = _levels(sim.dt, dts, reference_dt)
    cp_len = sim.T / checkpoints
    coarse = max(levels)
    steps_per_cp = cp_len / coarse
    if abs(steps_per_cp - round(steps_per_cp)) > 1e-9 or steps_per_cp < 1:
        raise ValueError("checkpoint interval must be a positive multiple of the largest step")
    steps_per_cp = int(round(steps_per_cp))
    per_coarse = int(round(coarse / fine))
    K1, K2 = sim.interaction_cutoff, sim.state_cutoff
    A1, A2 = decay_rate(K1, sim.m0), decay_rate(K2, sim.m0)
    decay_fine = np.exp(-fine * A1)
    n = sim.chains
    cfgs = {d: _level_cfg(sim, d) for d in levels}

    shape = (len(names), checkpoints + 1)
    s1 = {d: np.zeros(shape) for d in levels}
    s2 = {d: np.zeros(shape) for d in levels}
    d1 = {d: np.zeros(len(names)) for d in levels}
    d2 = {d: np.zeros(len(names)) for d in levels}
    start_vals: List[np.ndarray] = []
    end_vals: List[np.ndarray] = []

    def evaluate(x: SpectralField) -> np.ndarray:
        return np.stack([observables[k](x) for k in names])

    for ci in range((n + chunk - 1) // chunk):
        lo, m = ci * chunk, min(chunk, n - ci * chunk)
        root = rng.child(ci)
        if initial is not None:
            X0 = SpectralField._trusted(initial.coeffs[lo:lo + m], True)
            block0 = X0.resized(K1)
            outer = embed(SpectralField.zeros(K1, (m,)), X0)
        else:
            block0 = sample_interaction_block(m, sim, gibbs, consts, root.child(0), profile)
            outer = outer_modes(sim, root.child(1), (m,))
        blocks = {d: block0 for d in levels}
        v0 = evaluate(embed(block0, outer))
        start_vals.append(v0)
        for d in levels:
            s1[d][:, 0] += v0.sum(axis=1)
            s2[d][:, 0] += (v0 * v0).sum(axis=1)
        noise_rng, outer_rng = root.child(2), root.child(3)
        for cp in range(1, checkpoints + 1):
            for _ in range(steps_per_cp):
                incs = [ou_increment(noise_rng, K1, sim.m0, fine, (m,)) for _ in range(per_coarse)]
                for d, r in zip(levels, ratios):
                    y = blocks[d]
                    for s in range(per_coarse // r):
                        acc = incs[s * r]
                        for j in range(1, r):
                            acc = decay_fine * acc + incs[s * r + j]
                        y = step_sde(y, cfgs[d], consts, noise=acc, profile=profile)
                    blocks[d] = y
            jump = np.sqrt(ou_noise_variance(A2, cp_len)) * hermitian_normal(outer_rng, K2, (m,))
            outer = SpectralField._trusted(linear_update(outer.coeffs, A2, cp_len, None, jump), True)
            outer = embed(SpectralField.zeros(K1, (m,)), outer)
            vals = {d: evaluate(embed(blocks[d], outer)) for d in levels}
            for d in levels:
                s1[d][:, cp] += vals[d].sum(axis=1)
                s2[d][:, cp] += (vals[d] ** 2).sum(axis=1)
            if cp == checkpoints:
                end_vals.append(vals[sim.dt])
                if ref is not None:
                    for d in levels:
                        diff = vals[d] - vals[ref]
                        d1[d] += diff.sum(axis=1)
                        d2[d] += (diff * diff).sum(axis=1)

    def mean_se(a: np.ndarray, b: np.ndarray):
        mu = a / n
        return mu, np.sqrt(np.maximum(b / n - mu * mu, 0.0) / (n - 1))

    means, stderr = {}, {}
    for d in levels:
        mu, se = mean_se(s1[d], s2[d])
        means[d] = {k: mu[i] for i, k in enumerate(names)}
        stderr[d] = {k: se[i] for i, k in enumerate(names)}
    first, last = np.concatenate(start_vals, axis=1), np.concatenate(end_vals, axis=1)
    z = {k: welch_z(first[i], last[i]) for i, k in enumerate(names)}
    l2 = names[0]
    m_, s_ = means[sim.dt][l2], stderr[sim.dt][l2]
    cz = [float((m_[c] - m_[0]) / np.hypot(s_[c], s_[0])) for c in range(1, checkpoints + 1)]
    residuals: Dict[str, Dict[float, float]] = {}
    residual_se: Dict[str, Dict[float, float]] = {}
    if ref is not None:
        for i, k in enumerate(names):
            residuals[k], residual_se[k] = {}, {}
            for d in levels:
                if d != ref:
                    mu, se = mean_se(d1[d][i], d2[d][i])
                    residuals[k][d], residual_se[k][d] = float(abs(mu)), float(se)
    times = [cp_len * i for i in range(checkpoints + 1)]
    return InvarianceReport(sim.lam, sim.dt, n, times, names, means, stderr, z, cz, residuals, residual_se,
                            bonferroni_threshold(len(names)), ref)


def _level_cfg(sim: SimConfig, dt: float) -> SimConfig:
    return sim if dt == sim.dt else replace(sim, dt=dt)


# --------------------------------------------------------------------------
# time averages
# --------------------------------------------------------------------------

def kb_average(trajectory: Sequence, observable: Optional[Observable] = None,
               times: Optional[Sequence[float]] = None) -> float:
    """(1/T) int_0^T obs(X_s) ds by the trapezoidal rule on the sampled path.

    ``trajectory`` holds states (or observable values when ``observable`` is
    None); ``times`` defaults to a uniform grid.
    """
    vals = np.asarray([observable(x) if observable is not None else x for x in trajectory], float)
    if vals.shape[0] < 1:
        raise ValueError("empty trajectory")
    if vals.shape[0] == 1:
        return float(vals[0])
    t = np.arange(vals.shape[0], dtype=float) if times is None else np.asarray(times, float)
    return float(np.trapezoid(vals, t, axis=0) / (t[-1] - t[0]))
