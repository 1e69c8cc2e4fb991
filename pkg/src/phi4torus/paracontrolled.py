"""Shifted fields, the paracontrolled split of the remainder, and energy diagnostics.

With X the Galerkin state (noise projected by P2) and Z the OU field on the
same noise,

    X1 = X - P2 Z,        X2 = X1 + lam Z03.

X2 solves a random PDE with no noise term. Writing a = P1 X2 - lam P1 Z03
(so that P1 X = a + Z1), its right-hand side is

    R(a) = -lam P1[a^3 + 3 Z1 a^2 + 3 Z2 a] - 9 lam^2 C2 P1 (a + Z1).

The split X2 = x_lt + x_geq puts the rough low-high part into x_lt:

    (d_t + A) x_lt  = -3 lam P1[a (<) Z2]
    (d_t + A) x_geq = R(a) - that,

and the resonant term of the second equation is rewritten through the
commutators Psi1, Psi2 so that only renormalized trees appear. With
w = P1(x_lt + x_geq), I_t = int_0^t e^{(t-s)(Lap - m0^2)} P1^2 Z2 ds and
J_t = int_0^t e^{(t-s)(Lap - m0^2)} P1^2 [a (<) Z2] ds:

    Psi1 = J - a (<) I
    Psi2 = (a (<) I) (=) Z2 - a (I (=) Z2)
    Phi1 = -3 (Z1 - lam Zh) (<=) w^2 + 3 lam [(2 Z1 - lam Zh) Zh] (<=) w
    Phi3 = the same with (>)
    Phi2 = -3 a (>) Z2 + 3 lam Z23h + 9 lam a (Z22 - Z2 (=) H) - lam^2 (3 Z1 - lam Zh) Zh^2

    (d_t + A) x_geq = -lam P1[w^3] + lam P1[Phi1 + Phi2 + Phi3]
                      - 3 lam P1[(P1 x_geq) (=) Z2] + 9 lam^2 P1[Psi1 (=) Z2] + 9 lam^2 P1 Psi2

Here Zh = P1 Z03, Z23h = Z2 (=) Zh - 3 C2 Z1, and H_t = e^{t(Lap - m0^2)} P1 Z02(0)
is the part of the convolution I that predates t = 0, so I = P1 Z02 - H.
All C2 counterterms cancel identically, and R_lt + R_geq = R(a) holds to
rounding; the exponential Euler step keeps P1 x_lt = -3 lam J exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .besov import INF, BesovParams, besov_norm
from .dynamics import BlowUpError, SimConfig, step_sde
from .ou import (NoiseStream, OUEnsemble, burn_in_trees, combine_increments, decay_rate, default_burn_in,
                 hermitian_normal, linear_update, ou_increment, ou_init_stationary, projected, tree_convolved_step,
                 tree_first, tree_resonant, tree_wick2)
from .paraproducts import paraproduct
from .projections import DEFAULT_PROFILE, CutoffProfile, project, support_cutoff
from .renorm import RenormConstants, renorm_constants
from .torus import TWO_PI, SpectralField, default_resolution, lp_norm, multiply, to_grid, wavenumber_sq


def shift_fields(X: SpectralField, Z: SpectralField, z03: SpectralField, N: int, lam: float,
                 profile: Optional[CutoffProfile] = None) -> tuple[SpectralField, SpectralField]:
    """(X1, X2) = (X - P2 Z, X - P2 Z + lam Z03) on the cutoff box of X."""
    pz = project(2, N, Z, profile).resized(X.cutoffs)
    x1 = X - pz
    return x1, x1 + lam * z03.resized(X.cutoffs)


def unshift(X2: SpectralField, Z: SpectralField, z03: SpectralField, N: int, lam: float,
            profile: Optional[CutoffProfile] = None) -> SpectralField:
    """Inverse of the second shift: X = X2 + P2 Z - lam Z03."""
    pz = project(2, N, Z, profile).resized(X2.cutoffs)
    return X2 - lam * z03.resized(X2.cutoffs) + pz


@dataclass(frozen=True)
class EnergyParams:
    eta: float = 0.4
    gamma: float = 0.1
    epsilon: float = 0.04
    q: float = 1.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must lie in [0, 1)")
        if not 0.0 < self.gamma < 0.125:
            raise ValueError("gamma must lie in (0, 1/8)")
        if not 0.0 < self.epsilon < self.gamma / 2:
            raise ValueError("epsilon must lie in (0, gamma/2)")
        if not 1.0 < self.q < 8.0 / 7.0:
            raise ValueError("q must lie in (1, 8/7)")

    @property
    def bound_applies(self) -> bool:
        """The uniform bound needs eta > gamma + 1/4."""
        return self.eta > self.gamma + 0.25


@dataclass(frozen=True, eq=False)
class SplitState:
    x_lt: SpectralField
    x_geq: SpectralField
    t: float
    N: int
    m0: float
    lam: float
    J: SpectralField
    H: SpectralField
    blowup_ceiling: float = 1e8

    @property
    def x2(self) -> SpectralField:
        return self.x_lt + self.x_geq


@dataclass(frozen=True, eq=False)
class TreeTerms:
    """Trees at one time, in the form the split equations consume."""

    z1: SpectralField
    z2: SpectralField
    zh: SpectralField
    pz02: SpectralField
    z22: SpectralField
    z23h: SpectralField
    c2: float


def tree_terms(ens: OUEnsemble) -> TreeTerms:
    if not ens.has_trees:
        raise ValueError("convolution trees are not current at the ensemble time")
    z1 = tree_first(ens)
    z2 = tree_wick2(ens)
    zh = projected(ens.v03, ens.N, ens.profile)
    z22, _ = tree_resonant(ens)
    c2 = ens.constants.c2
    z23h = paraproduct(z2, zh, "res") - (3.0 * c2) * z1.resized(z2.cutoffs)
    return TreeTerms(z1, z2, zh, projected(ens.v02, ens.N, ens.profile), z22, z23h, c2)


def split_init(X2: SpectralField, ens: OUEnsemble, lam: float, blowup_ceiling: float = 1e8) -> SplitState:
    """x_lt = 0, x_geq = X2(0), and the pre-history of the convolution I."""
    K1 = support_cutoff(1, ens.N)
    zero_k1 = SpectralField.zeros(K1, X2.batch_shape)
    H = projected(ens.v02, ens.N, ens.profile)
    return SplitState(SpectralField.zeros(X2.cutoffs, X2.batch_shape), X2, ens.t, ens.N, ens.m0, lam,
                      zero_k1, H, blowup_ceiling)


def _p1(f: SpectralField, N: int, profile: CutoffProfile) -> SpectralField:
    return projected(f, N, profile)


def unsplit_rhs(X2: SpectralField, tt: TreeTerms, N: int, lam: float,
                profile: Optional[CutoffProfile] = None) -> SpectralField:
    """R(a) on the interaction box, with a = P1 X2 - lam P1 Z03."""
    profile = profile or DEFAULT_PROFILE
    a = _p1(X2, N, profile) - lam * tt.zh
    poly = multiply(a, a, a) + 3.0 * multiply(tt.z1, a, a) + 3.0 * multiply(tt.z2, a)
    out = -lam * _p1(poly, N, profile) - (9.0 * lam * lam * tt.c2) * _p1(a + tt.z1, N, profile)
    return out


def split_rhs(state: SplitState, tt: TreeTerms, profile: Optional[CutoffProfile] = None):
    """(R_lt, R_geq, a (<) Z2) at the state's time, on the interaction box."""
    profile = profile or DEFAULT_PROFILE
    N, lam = state.N, state.lam
    P = lambda f: _p1(f, N, profile)  # noqa: E731
    w = P(state.x_lt) + P(state.x_geq)
    a = w - lam * tt.zh
    z1, z2, zh = tt.z1, tt.z2, tt.zh
    a_lt_z2 = paraproduct(a, z2, "lt")
    r_lt = -3.0 * lam * P(a_lt_z2)

    I = tt.pz02 - state.H
    a_lt_I = paraproduct(a, I, "lt")
    psi1 = state.J - a_lt_I
    psi2 = paraproduct(a_lt_I, z2, "res") - multiply(a, paraproduct(I, z2, "res"))
    w2 = multiply(w, w)
    low = z1 - lam * zh
    mix = multiply(2.0 * z1 - lam * zh, zh)
    # Phi1 + Phi3 combine (<=) and (>) into full products
    phi13 = -3.0 * multiply(low, w2) + (3.0 * lam) * multiply(mix, w)
    phi2 = (-3.0 * paraproduct(a, z2, "gt") + (3.0 * lam) * tt.z23h
            + (9.0 * lam) * multiply(a, tt.z22 - paraproduct(z2, state.H, "res"))
            - (lam * lam) * multiply(3.0 * z1 - lam * zh, zh, zh))
    geq_res = paraproduct(P(state.x_geq), z2, "res")
    r_geq = (-lam * P(multiply(w, w2)) + lam * P(phi13) + lam * P(phi2) - (3.0 * lam) * P(geq_res)
             + (9.0 * lam * lam) * P(paraproduct(psi1, z2, "res")) + (9.0 * lam * lam) * P(psi2))
    return r_lt, r_geq, a_lt_z2


def split_phi_terms(state: SplitState, tt: TreeTerms, profile: Optional[CutoffProfile] = None) -> Dict[str, SpectralField]:
    """Phi1, Phi2, Phi3, Psi1, Psi2 separately, for inspection."""
    profile = profile or DEFAULT_PROFILE
    N, lam = state.N, state.lam
    w = _p1(state.x_lt, N, profile) + _p1(state.x_geq, N, profile)
    a = w - lam * tt.zh
    z1, z2, zh = tt.z1, tt.z2, tt.zh
    I = tt.pz02 - state.H
    a_lt_I = paraproduct(a, I, "lt")
    w2 = multiply(w, w)
    low = z1 - lam * zh
    mix = multiply(2.0 * z1 - lam * zh, zh)
    return {
        "phi1": -3.0 * paraproduct(low, w2, "leq") + (3.0 * lam) * paraproduct(mix, w, "leq"),
        "phi2": (-3.0 * paraproduct(a, z2, "gt") + (3.0 * lam) * tt.z23h
                 + (9.0 * lam) * multiply(a, tt.z22 - paraproduct(z2, state.H, "res"))
                 - (lam * lam) * multiply(3.0 * z1 - lam * zh, zh, zh)),
        "phi3": -3.0 * paraproduct(low, w2, "gt") + (3.0 * lam) * paraproduct(mix, w, "gt"),
        "psi1": state.J - a_lt_I,
        "psi2": paraproduct(a_lt_I, z2, "res") - multiply(a, paraproduct(I, z2, "res")),
    }


def evolve_split(state: SplitState, trees: OUEnsemble, dt: float,
                 profile: Optional[CutoffProfile] = None) -> SplitState:
    """One exponential Euler step of both split equations (right-hand sides frozen at state.t)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if abs(trees.t - state.t) > 1e-9 * max(1.0, abs(state.t)):
        raise ValueError(f"trees at t={trees.t} but split state at t={state.t}")
    profile = profile or DEFAULT_PROFILE
    tt = tree_terms(trees)
    r_lt, r_geq, a_lt_z2 = split_rhs(state, tt, profile)
    K = state.x_lt.cutoffs
    A = decay_rate(K, state.m0)
    x_lt = linear_update(state.x_lt.coeffs, A, dt, r_lt.resized(K).coeffs)
    x_geq = linear_update(state.x_geq.coeffs, A, dt, r_geq.resized(K).coeffs)
    K1 = state.J.cutoffs
    A1 = decay_rate(K1, state.m0)
    J = linear_update(state.J.coeffs, A1, dt, _p1(_p1(a_lt_z2, state.N, profile), state.N, profile).coeffs)
    H = np.exp(-dt * A1) * state.H.coeffs
    for arr in (x_lt, x_geq):
        norms = np.sum(np.abs(arr) ** 2, axis=(-3, -2, -1))
        if not np.all(np.isfinite(norms)) or np.any(norms > state.blowup_ceiling):
            raise BlowUpError(f"split state exceeded {state.blowup_ceiling:g} at t={state.t + dt:g}")
    f = lambda c: SpectralField._trusted(c, True)  # noqa: E731
    return replace(state, x_lt=f(x_lt), x_geq=f(x_geq), J=f(J), H=f(H), t=state.t + dt)


# --------------------------------------------------------------------------
# energy functionals
# --------------------------------------------------------------------------

def grad_norm_sq(f: SpectralField) -> np.ndarray:
    return np.sum(wavenumber_sq(f.cutoffs) * np.abs(f.coeffs) ** 2, axis=(-3, -2, -1))


def l4_norm_fourth(f: SpectralField) -> np.ndarray:
    """int f^4 dx, exactly (Parseval on f^2)."""
    return multiply(f, f).norm_sq()


class DiagnosticsRecorder:
    """Streams a split trajectory and accumulates the energy functionals.

    Feed states at uniformly or nonuniformly spaced times with ``add``; all
    integrals are trapezoidal and the Hoelder supremum runs over every pair of
    recorded times (a lower bound of the continuum supremum).
    """

    def __init__(self, ep: EnergyParams, N: int, lam: float, profile: Optional[CutoffProfile] = None,
                 hoelder_p: float = 4.0 / 3.0):
        self.ep, self.N, self.lam = ep, N, lam
        self.profile = profile or DEFAULT_PROFILE
        self.hoelder_p = hoelder_p
        self.times: List[float] = []
        self.rows: List[Dict[str, np.ndarray]] = []
        self._grids: List[np.ndarray] = []
        self._M = None
        self.hoelder_sup: Optional[np.ndarray] = None

    def integrands(self, x_lt: SpectralField, x_geq: SpectralField, x2: SpectralField) -> Dict[str, np.ndarray]:
        ep = self.ep
        p1x2 = projected(x2, self.N, self.profile)
        return {
            "grad_x_geq_sq": grad_norm_sq(x_geq),
            "x2_l2_sq": x2.norm_sq(),
            "p1x2_l4_4": l4_norm_fourth(p1x2),
            "x_lt_b4_cubed": besov_norm(x_lt, BesovParams(1.0 - ep.epsilon, 4.0, INF)) ** 3,
            "x_geq_b43": besov_norm(x_geq, BesovParams(1.0 + ep.epsilon, 4.0 / 3.0, INF)),
            "x_lt_b4_2gamma_cubed": besov_norm(x_lt, BesovParams(2.0 * ep.gamma, 4.0, INF)) ** 3,
            "x_geq_b43_2gamma": besov_norm(x_geq, BesovParams(2.0 * ep.gamma, 4.0 / 3.0, INF)),
        }

    def add(self, t: float, x_lt: SpectralField, x_geq: SpectralField, x2: Optional[SpectralField] = None) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("times must increase")
        x2 = x_lt + x_geq if x2 is None else x2
        row = self.integrands(x_lt, x_geq, x2)
        if self._M is None:
            self._M = default_resolution(x2.cutoffs)
        g = to_grid(x2.coeffs, self._M, True)
        cell = TWO_PI**3 / float(np.prod(self._M))
        p = self.hoelder_p
        best = np.zeros(x2.batch_shape) if self.hoelder_sup is None else self.hoelder_sup
        for s, gs in zip(self.times, self._grids):
            if s <= 0 and self.ep.eta > 0:
                continue
            dist = (cell * np.sum(np.abs(g - gs) ** p, axis=(-3, -2, -1))) ** (1.0 / p)
            best = np.maximum(best, s**self.ep.eta * dist / (t - s) ** self.ep.gamma)
        self.hoelder_sup = best
        self.times.append(float(t))
        self.rows.append(row)
        self._grids.append(g)

    def _integral(self, key: str) -> np.ndarray:
        vals = np.stack([r[key] for r in self.rows])
        if len(self.times) < 2:
            return np.zeros(vals.shape[1:])
        return np.trapezoid(vals, np.asarray(self.times), axis=0)

    def _weighted_sup(self, key: str) -> np.ndarray:
        vals = np.stack([r[key] for r in self.rows])
        w = np.asarray(self.times) ** self.ep.eta
        return np.max(w.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals, axis=0)

    def energy_X(self) -> np.ndarray:
        integral = (self._integral("grad_x_geq_sq") + self._integral("x2_l2_sq")
                    + self.lam * self._integral("p1x2_l4_4"))
        hs = self.hoelder_sup if self.hoelder_sup is not None else 0.0
        return integral + hs

    def energy_Y(self) -> np.ndarray:
        return self._integral("x_lt_b4_cubed") + self._integral("x_geq_b43")

    def sup_terms(self) -> tuple[np.ndarray, np.ndarray]:
        return self._weighted_sup("x_lt_b4_2gamma_cubed"), self._weighted_sup("x_geq_b43_2gamma")

    def summary(self) -> Dict[str, np.ndarray]:
        s_lt, s_geq = self.sup_terms()
        return {"energy_X": self.energy_X(), "energy_Y": self.energy_Y(),
                "energy_Y_q": self.energy_Y() ** self.ep.q, "sup_x_lt": s_lt, "sup_x_geq": s_geq}

    def integrand_table(self) -> List[Dict[str, float]]:
        """Per-time integrand values averaged over the batch."""
        return [{"t": t, **{k: float(np.mean(v)) for k, v in r.items()}} for t, r in zip(self.times, self.rows)]


@dataclass(frozen=True, eq=False)
class SplitTrajectory:
    times: Sequence[float]
    x_lt: Sequence[SpectralField]
    x_geq: Sequence[SpectralField]
    x2: Optional[Sequence[SpectralField]] = None


def _record(traj: SplitTrajectory, ep: EnergyParams, N: int, lam: float,
            profile: Optional[CutoffProfile]) -> DiagnosticsRecorder:
    rec = DiagnosticsRecorder(ep, N, lam, profile)
    x2s = traj.x2 if traj.x2 is not None else [None] * len(traj.times)
    for t, a, b, c in zip(traj.times, traj.x_lt, traj.x_geq, x2s):
        rec.add(t, a, b, c)
    return rec


def energy_X(traj: SplitTrajectory, ep: EnergyParams, N: int, lam: float,
             profile: Optional[CutoffProfile] = None) -> np.ndarray:
    """Time integral of grad/L2/L4 norms plus the weighted Hoelder supremum of X2 in L^{4/3}."""
    return _record(traj, ep, N, lam, profile).energy_X()


def energy_Y(traj: SplitTrajectory, ep: EnergyParams, N: int, lam: float = 0.0,
             profile: Optional[CutoffProfile] = None) -> np.ndarray:
    """int ||x_lt||^3_{B^{1-eps}_4} + int ||x_geq||_{B^{1+eps}_{4/3}}."""
    return _record(traj, ep, N, lam, profile).energy_Y()


# --------------------------------------------------------------------------
# split versus unsplit on a common noise path
# --------------------------------------------------------------------------

@dataclass
class ConsistencyResult:
    """Per-path mean-square gaps (averaged over the shared coarse time grid)."""
    dts: List[float]
    path_msq: np.ndarray  # shape (len(dts), paths)
    times: np.ndarray

    @property
    def gaps(self) -> List[float]:
        return [float(np.sqrt(m.mean())) for m in self.path_msq]

    @property
    def ratios(self) -> List[float]:
        g = self.gaps
        return [a / b for a, b in zip(g, g[1:])]

    def ratio_stderr(self) -> List[float]:
        """Jackknife standard error of each consecutive gap ratio, leaving out one path."""
        n = self.path_msq.shape[1]
        out = []
        for a, b in zip(self.path_msq, self.path_msq[1:]):
            loo = np.sqrt((a.sum() - a) / (b.sum() - b))
            out.append(float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))))
        return out


def _fine_increment(noise: NoiseStream, r: int, K2: int, m0: float, fine: float, paths: int,
                    A: np.ndarray) -> np.ndarray:
    acc = ou_increment(noise, K2, m0, fine, (paths,))
    for _ in range(r - 1):
        acc = combine_increments(acc, ou_increment(noise, K2, m0, fine, (paths,)), A, fine)
    return acc


@dataclass(frozen=True, eq=False)
class CoupledStart:
    """Burned-in trees and a stationary free-field X0, shared across runs."""
    trees: OUEnsemble
    X0: SpectralField
    consts: RenormConstants
    stream: NoiseStream


def coupled_start(N: int, m0: float, seed: int, paths: int, burn_dt: float, burn_in: Optional[float] = None,
                  profile: Optional[CutoffProfile] = None, key: int = 31) -> CoupledStart:
    profile = profile or DEFAULT_PROFILE
    consts = renorm_constants(N, m0, profile)
    K2 = support_cutoff(2, N)
    root = NoiseStream(seed, key)
    ens = ou_init_stationary(K2, m0, root.child(0), (paths,), N=N, profile=profile, consts=consts)
    burn_in = default_burn_in(m0) if burn_in is None else burn_in
    ens = burn_in_trees(ens, burn_dt, root.child(1), burn_in)
    ens = replace(ens, t=0.0, tree_t=0.0)
    X0 = SpectralField._trusted(np.sqrt(0.5 / decay_rate(K2, m0)) * hermitian_normal(root.child(2), K2, (paths,)),
                                True)
    return CoupledStart(ens, X0, consts, root)


def coupled_evolution(start: CoupledStart, lam: float, dt: float, n_steps: int, fine: Optional[float] = None,
                      profile: Optional[CutoffProfile] = None):
    """Yield (split state, X, trees) after each step of the three coupled evolutions.

    The split equations, the Galerkin SDE for X (noise projected by P2) and the
    trees all see one Brownian path. Its increments are drawn on a grid of
    width ``fine`` (default dt/2, which must divide dt/2) and combined exactly,
    so runs with different dt on the same ``start`` share the path.
    """
    profile = profile or DEFAULT_PROFILE
    ens, X = start.trees, start.X0
    N, m0 = ens.N, ens.m0
    K2 = X.cutoffs
    A = decay_rate(K2, m0)
    fine = dt / 2.0 if fine is None else fine
    r = int(round(dt / 2.0 / fine))
    if abs(r * fine - dt / 2.0) > 1e-9 * dt:
        raise ValueError(f"fine step {fine} does not divide dt/2 = {dt / 2}")
    cfg = SimConfig(N=N, m0=m0, lam=lam, dt=dt, T=n_steps * dt, lambda0=max(1.0, lam))
    noise = start.stream.child(3)
    st = split_init(shift_fields(X, ens.z, ens.v03, N, lam, profile)[1], ens, lam)
    for _ in range(n_steps):
        halves = (_fine_increment(noise, r, K2[0], m0, fine, X.batch_shape[0], A),
                  _fine_increment(noise, r, K2[0], m0, fine, X.batch_shape[0], A))
        st = evolve_split(st, ens, dt, profile)
        X = step_sde(X, cfg, start.consts, noise=combine_increments(*halves, A, dt / 2.0),
                     profile=profile, noise_projection=2, t=st.t)
        ens = tree_convolved_step(ens, dt, noise=halves)
        yield st, X, ens


def split_consistency(N: int, m0: float, lam: float, dts: Sequence[float], T: float, seed: int,
                      paths: int = 4, burn_dt: Optional[float] = None, burn_in: Optional[float] = None,
                      profile: Optional[CutoffProfile] = None) -> ConsistencyResult:
    """Gap between (x_lt + x_geq) and X2 = shift of the Galerkin solution.

    The squared L^2 gap is averaged over the multiples of max(dts) in (0, T]
    and kept per path; every step size runs on the same Brownian path.
    """
    profile = profile or DEFAULT_PROFILE
    start = coupled_start(N, m0, seed, paths, burn_dt or max(dts), burn_in, profile)
    coarse, fine = max(dts), min(dts) / 2.0
    n_coarse = int(round(T / coarse))
    msq = np.zeros((len(dts), paths))
    for level, dt in enumerate(dts):
        per_coarse = int(round(coarse / dt))
        run = coupled_evolution(start, lam, dt, n_coarse * per_coarse, fine, profile)
        for i, (st, X, ens) in enumerate(run, 1):
            if i % per_coarse == 0:
                x2 = shift_fields(X, ens.z, ens.v03, N, lam, profile)[1]
                msq[level] += (st.x2 - x2).norm_sq() / n_coarse
    return ConsistencyResult(list(dts), msq, coarse * np.arange(1, n_coarse + 1))


@dataclass
class DiagnosticsRun:
    """Energy functionals of one seed; arrays run over the chains of that seed."""
    N: int
    seed: int
    summary: Dict[str, np.ndarray]
    table: List[Dict[str, float]]


def diagnostics_run(N: int, m0: float, lam: float, dt: float, T: float, seed: int, chains: int = 8,
                    ep: Optional[EnergyParams] = None, record_every: int = 5, burn_dt: float = 0.05,
                    burn_in: Optional[float] = None, profile: Optional[CutoffProfile] = None) -> DiagnosticsRun:
    """Evolve the split from stationary start and stream it into a DiagnosticsRecorder."""
    ep = ep or EnergyParams()
    profile = profile or DEFAULT_PROFILE
    start = coupled_start(N, m0, seed, chains, burn_dt, burn_in, profile, key=37)
    rec = DiagnosticsRecorder(ep, N, lam, profile)
    st0 = split_init(shift_fields(start.X0, start.trees.z, start.trees.v03, N, lam, profile)[1], start.trees, lam)
    rec.add(0.0, st0.x_lt, st0.x_geq, st0.x2)
    n_steps = int(round(T / dt))
    for i, (st, _, _) in enumerate(coupled_evolution(start, lam, dt, n_steps, profile=profile), 1):
        if i % record_every == 0 or i == n_steps:
            rec.add(st.t, st.x_lt, st.x_geq, st.x2)
    return DiagnosticsRun(N, seed, rec.summary(), rec.integrand_table())


@dataclass
class SweepRow:
    N: int
    functional: str
    mean: float
    seed_std: float
    relative_spread: float
    seeds: int

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.mean) and np.isfinite(self.seed_std))


def diagnostics_sweep(Ns: Sequence[int], seeds: Sequence[int], m0: float = 1.0, lam: float = 0.1,
                      dt: float = 0.01, T: float = 1.0, chains: int = 8, ep: Optional[EnergyParams] = None,
                      **kw) -> List[SweepRow]:
    """Per-seed chain means of every functional, summarized across seeds.

    relative_spread is the across-seed standard deviation of the per-seed
    means divided by their average.
    """
    rows = []
    for N in Ns:
        per_seed: Dict[str, List[float]] = {}
        for seed in seeds:
            run = diagnostics_run(N, m0, lam, dt, T, seed, chains, ep, **kw)
            for name, vals in run.summary.items():
                per_seed.setdefault(name, []).append(float(np.mean(vals)))
        for name, vals in per_seed.items():
            v = np.asarray(vals)
            mean = float(v.mean())
            sd = float(v.std(ddof=1)) if len(v) > 1 else float("nan")
            rows.append(SweepRow(N, name, mean, sd, sd / abs(mean) if mean else float("inf"), len(v)))
    return rows
