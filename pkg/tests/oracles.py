"""Reference computations written without the package's code paths.

Everything here uses explicit loops or closed forms, so agreement with the
vectorized implementation is a genuine cross-check.
"""
import itertools
import math

import numpy as np

NORM = (2.0 * math.pi) ** 1.5


def step(x: float) -> float:
    """Scalar C-infinity step: 1 for x <= 0, 0 for x >= 1."""
    if x <= 0.0:
        return 1.0
    if x >= 1.0:
        return 0.0
    a = math.exp(-1.0 / (1.0 - x))
    b = math.exp(-1.0 / x)
    return a / (a + b)


def chi(r: float) -> float:
    return step((r - 0.75) / (4.0 / 3.0 - 0.75))


def phi(r: float) -> float:
    return chi(r / 2.0) - chi(r)


def block_weight(j: int, r: float) -> float:
    return chi(r) if j == -1 else phi(r / 2.0**j)


def psi1(r: float) -> float:
    return step(r - 1.0)


def psi2(r: float) -> float:
    return min(1.0, max(0.0, (4.0 - r) / 2.0))


def cutoff_weight(k, N: int, which: int = 1) -> float:
    psi = psi1 if which == 1 else psi2
    s = 2.0 ** (-N)
    return psi(abs(k[0]) * s) * psi(abs(k[1]) * s) * psi(abs(k[2]) * s)


def c1_direct(N: int, m0: float) -> float:
    R = 2 ** (N + 1)
    total = 0.0
    for k in itertools.product(range(-R, R + 1), repeat=3):
        w = cutoff_weight(k, N) ** 2
        if w:
            total += w / (k[0] ** 2 + k[1] ** 2 + k[2] ** 2 + m0 * m0)
    return total / (2.0 * (2.0 * math.pi) ** 3)


def c2_direct(N: int, m0: float) -> float:
    """Full double sum (no symmetry reduction); the l2 loop is vectorized."""
    R = 2 ** (N + 1)
    big = 2 * R
    n = 2 * big + 1
    W = np.zeros((n, n, n))
    A = np.zeros((n, n, n))
    for k in itertools.product(range(-big, big + 1), repeat=3):
        idx = (k[0] + big, k[1] + big, k[2] + big)
        W[idx] = cutoff_weight(k, N) ** 2
        A[idx] = k[0] ** 2 + k[1] ** 2 + k[2] ** 2 + m0 * m0
    inner = slice(big - R, big + R + 1)
    W2, A2 = W[inner, inner, inner], A[inner, inner, inner]
    total = 0.0
    for l1 in itertools.product(range(-R, R + 1), repeat=3):
        i1 = (l1[0] + big, l1[1] + big, l1[2] + big)
        w1, a1 = W[i1], A[i1]
        if w1 == 0.0:
            continue
        # l1 + l2 for every l2 in the inner box
        sl = tuple(slice(c - R, c + R + 1) for c in i1)
        w3, a3 = W[sl], A[sl]
        total += float(np.sum(w1 * W2 * w3 / (a1 * A2 * (a1 + A2 + a3))))
    return total / (2.0 * (2.0 * math.pi) ** 6)


def modes(K):
    Kc = (K,) * 3 if np.isscalar(K) else tuple(K)
    return list(itertools.product(*(range(-k, k + 1) for k in Kc))), Kc


def coefficient_dict(coeffs: np.ndarray) -> dict:
    Kc = tuple((n - 1) // 2 for n in coeffs.shape)
    ks, _ = modes(Kc)
    return {k: complex(coeffs[k[0] + Kc[0], k[1] + Kc[1], k[2] + Kc[2]]) for k in ks}


def convolution(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Coefficients of the product: sum_m f_m g_{k-m} / (2pi)^{3/2}."""
    fd, gd = coefficient_dict(f), coefficient_dict(g)
    Kf = tuple((n - 1) // 2 for n in f.shape)
    Kg = tuple((n - 1) // 2 for n in g.shape)
    Ko = tuple(a + b for a, b in zip(Kf, Kg))
    out = np.zeros(tuple(2 * k + 1 for k in Ko), complex)
    for m, fm in fd.items():
        if fm == 0:
            continue
        for n, gn in gd.items():
            if gn == 0:
                continue
            out[m[0] + n[0] + Ko[0], m[1] + n[1] + Ko[1], m[2] + n[2] + Ko[2]] += fm * gn / NORM
    return out


def synthesize(coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """sum_k c_k e^{i k.x} / (2pi)^{3/2} at each row of ``points``."""
    fd = coefficient_dict(coeffs)
    ks = np.array(list(fd.keys()), float)
    cs = np.array(list(fd.values()))
    return np.exp(1j * points @ ks.T) @ cs / NORM


def grid_points(M: int) -> np.ndarray:
    x = 2.0 * math.pi * np.arange(M) / M
    return np.array(list(itertools.product(x, x, x)))


def energy_direct(phi_coeffs: np.ndarray, N: int, lam: float, c1: float, c2: float) -> float:
    """Riemann sum of the quartic-minus-quadratic density; exact for the band-limited integrand."""
    fd = coefficient_dict(phi_coeffs)
    K1 = 2 ** (N + 1) - 1
    u = np.zeros((2 * K1 + 1,) * 3, complex)
    for k, v in fd.items():
        if max(abs(x) for x in k) <= K1:
            u[k[0] + K1, k[1] + K1, k[2] + K1] = cutoff_weight(k, N) * v
    M = 4 * K1 + 1
    vals = synthesize(u, grid_points(M)).real
    shift = c1 - 3.0 * lam * c2
    density = lam / 4.0 * vals**4 - 1.5 * lam * shift * vals**2
    return float(np.sum(density) * (2.0 * math.pi / M) ** 3)


def drift_direct(Y: np.ndarray, N: int, m0: float, lam: float, c1: float, c2: float) -> np.ndarray:
    """Mode-by-mode drift with the cubic term as an explicit triple convolution."""
    K = tuple((n - 1) // 2 for n in Y.shape)
    yd = coefficient_dict(Y)
    K1 = 2 ** (N + 1) - 1
    low = {k: cutoff_weight(k, N) * v for k, v in yd.items() if max(abs(x) for x in k) <= K1}
    low = {k: v for k, v in low.items() if v != 0}
    shift = c1 - 3.0 * lam * c2
    out = np.zeros_like(Y)
    for k, v in yd.items():
        idx = (k[0] + K[0], k[1] + K[1], k[2] + K[2])
        out[idx] = -(k[0] ** 2 + k[1] ** 2 + k[2] ** 2 + m0 * m0) * v
        w = cutoff_weight(k, N)
        if w == 0 or lam == 0:
            continue
        cube = 0.0
        for l1, a in low.items():
            for l2, b in low.items():
                l3 = (k[0] - l1[0] - l2[0], k[1] - l1[1] - l2[1], k[2] - l1[2] - l2[2])
                c = low.get(l3)
                if c is not None:
                    cube += a * b * c
        cube /= (2.0 * math.pi) ** 3
        out[idx] += -lam * w * (cube - 3.0 * shift * low.get(k, 0.0))
    return out


def evaluation_factor(K, N: int, m0: float, points: np.ndarray) -> np.ndarray:
    """Matrix F with (P_N Z)(x_p) = F[p] @ xi for Z the stationary OU field, xi iid N(0,1).

    For each mode pair {k, -k} (k in the upper half lattice) the amplitude is
    sqrt(v_k/2)(xi_a + i xi_b); the zero mode is sqrt(v_0) xi_0.
    """
    ks, _ = modes(K)
    half = [k for k in ks if k > (0, 0, 0)]
    cols = []
    for k in [(0, 0, 0)] + half:
        v = 0.5 / (k[0] ** 2 + k[1] ** 2 + k[2] ** 2 + m0 * m0)
        w = cutoff_weight(k, N)
        phase = points @ np.array(k, float)
        if k == (0, 0, 0):
            cols.append(w * math.sqrt(v) * np.ones(len(points)) / NORM)
        else:
            # c e^{ikx} + conj(c) e^{-ikx} = 2 Re(c e^{ikx})
            s = math.sqrt(v / 2.0)
            cols.append(2.0 * w * s * np.cos(phase) / NORM)
            cols.append(-2.0 * w * s * np.sin(phase) / NORM)
    return np.array(cols).T


def convolution_integral_cos(t: float, a: float, omega: float) -> float:
    """int_0^t e^{-(t-s) a} cos(omega s) ds in closed form."""
    d = a * a + omega * omega
    return (a * math.cos(omega * t) + omega * math.sin(omega * t) - a * math.exp(-a * t)) / d
