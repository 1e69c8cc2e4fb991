"""Bony paraproducts and two commutators built from them.

All sums are finite for band-limited inputs: blocks above ``j_max`` vanish,
so the results are exact. Each paraproduct is assembled on a single padded
grid (every block of both factors is synthesized once, the products are
summed in a fixed order, and one forward transform returns to Fourier space).
"""
from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.fft as sfft

from .besov import DEFAULT_PARTITION, DyadicPartition, all_blocks
from .projections import DEFAULT_PROFILE, CutoffProfile, projection_multiplier, semigroup_multiplier
from .torus import SpectralField, as_cutoffs, from_grid, pointwise_product, to_grid

KINDS = ("lt", "res", "gt", "leq", "geq")


def _grid_blocks(f: SpectralField, M, P: DyadicPartition, nblocks: int) -> np.ndarray:
    blocks = all_blocks(f, P)
    vals = to_grid(blocks, M, f.real)
    have = vals.shape[-4]
    if have < nblocks:
        pad = np.zeros(vals.shape[:-4] + (nblocks - have,) + vals.shape[-3:], vals.dtype)
        vals = np.concatenate([vals, pad], axis=-4)
    return vals


def _lt_grid(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """sum_j S_j f * Delta_{j+1} g with block index 0 meaning j = -1."""
    partial = np.cumsum(F, axis=-4)  # partial[m] holds S_m f
    out = np.zeros(np.broadcast_shapes(F.shape[:-4], G.shape[:-4]) + F.shape[-3:], np.result_type(F, G))
    n = G.shape[-4]
    # block index b of g corresponds to j = b-1; it pairs with blocks of f up to j-2, i.e. index b-2
    for b in range(2, n):
        out = out + partial[..., b - 2, :, :, :] * G[..., b, :, :, :]
    return out


def _res_grid(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(F.shape[:-4], G.shape[:-4]) + F.shape[-3:], np.result_type(F, G))
    n = F.shape[-4]
    for b in range(n):
        near = G[..., max(b - 1, 0): min(b + 2, n), :, :, :].sum(axis=-4)
        out = out + F[..., b, :, :, :] * near
    return out


def paraproduct(f: SpectralField, g: SpectralField, kind: str = "lt",
                P: Optional[DyadicPartition] = None, cutoff=None) -> SpectralField:
    """Paraproduct of ``kind`` in {lt, res, gt, leq, geq}.

    ``lt`` is f (<) g = sum_{j>=0} S_j f Delta_{j+1} g, ``res`` the resonant
    part, ``gt`` the mirror of ``lt``; ``leq = lt + res`` and ``geq = gt + res``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown paraproduct kind {kind!r}; expected one of {KINDS}")
    P = P or DEFAULT_PARTITION
    full = tuple(a + b for a, b in zip(f.cutoffs, g.cutoffs))
    out = full if cutoff is None else as_cutoffs(cutoff)
    real = f.real and g.real
    M = tuple(sfft.next_fast_len(s + o + 1, real=real) for s, o in zip(full, out))
    n = max(P.j_max(f.cutoffs), P.j_max(g.cutoffs)) + 2
    F = _grid_blocks(f, M, P, n)
    G = _grid_blocks(g, M, P, n)
    if kind == "lt":
        vals = _lt_grid(F, G)
    elif kind == "gt":
        vals = _lt_grid(G, F)
    elif kind == "res":
        vals = _res_grid(F, G)
    elif kind == "leq":
        vals = _lt_grid(F, G) + _res_grid(F, G)
    else:
        vals = _lt_grid(G, F) + _res_grid(F, G)
    return SpectralField._trusted(from_grid(vals, out), real)


def commutator_res(f: SpectralField, g: SpectralField, h: SpectralField,
                   P: Optional[DyadicPartition] = None) -> SpectralField:
    """(f (<) g) (=) h - f (g (=) h)."""
    left = paraproduct(paraproduct(f, g, "lt", P), h, "res", P)
    right = pointwise_product(f, paraproduct(g, h, "res", P))
    return left - right


def commutator_heat(f: SpectralField, g: SpectralField, t: float, N: int,
                    profile: Optional[CutoffProfile] = None, m0: float = 0.0,
                    P: Optional[DyadicPartition] = None) -> SpectralField:
    """exp(t Lap) (P_N^(1))^2 (f (<) g) - f (<) (exp(t Lap) (P_N^(1))^2 g)."""
    if t <= 0:
        raise ValueError("commutator_heat needs t > 0")
    profile = profile or DEFAULT_PROFILE

    def smooth(u: SpectralField) -> SpectralField:
        mult = semigroup_multiplier(t, m0, u.cutoffs) * projection_multiplier(1, N, u.cutoffs, profile) ** 2
        return SpectralField._trusted(u.coeffs * mult, u.real)

    return smooth(paraproduct(f, g, "lt", P)) - paraproduct(f, smooth(g), "lt", P)
