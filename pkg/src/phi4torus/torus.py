"""Fourier representation of fields on the periodic box [0, 2pi)^3.

Conventions used throughout the package:

* basis ``e_k(x) = exp(i k.x) / (2pi)^{3/2}``, orthonormal in L^2;
* a field is stored by its coefficients ``c_k = <f, e_k>`` on the box
  ``|k_i| <= K_i`` as a dense complex array of shape ``(2Kx+1, 2Ky+1, 2Kz+1)``
  with index offset ``+K_i`` (``kx`` varies slowest);
* leading axes of the coefficient array are batch axes, so one
  ``SpectralField`` can carry a whole ensemble of fields.

Products are computed on zero-padded grids large enough that no aliasing
reaches the retained modes, so every nonlinear term is exact.
"""
from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi
NORM = TWO_PI ** 1.5  # (2pi)^{3/2}
SYMMETRY_TOL = 1e-10

Cutoffs = tuple[int, int, int]


class ResolutionError(ValueError):
    """Grid too coarse for the requested cutoff."""


class SymmetryError(ValueError):
    """A field flagged real violates Hermitian symmetry."""


def as_cutoffs(K: Union[int, Sequence[int]]) -> Cutoffs:
    if np.isscalar(K):
        K = (int(K),) * 3
    K = tuple(int(k) for k in K)
    if len(K) != 3 or min(K) < 0:
        raise ValueError(f"cutoff must be a nonnegative int or 3-tuple, got {K!r}")
    return K  # type: ignore[return-value]


def as_resolution(M: Union[int, Sequence[int]]) -> Cutoffs:
    return as_cutoffs(M)


@lru_cache(maxsize=256)
def lattice(cutoffs: Cutoffs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Broadcastable integer wavevector components for a cutoff box."""
    kx, ky, kz = (np.arange(-K, K + 1) for K in cutoffs)
    out = (kx[:, None, None], ky[None, :, None], kz[None, None, :])
    for a in out:
        a.setflags(write=False)
    return out


@lru_cache(maxsize=256)
def wavenumber_sq(cutoffs: Cutoffs) -> np.ndarray:
    """|k|^2 on the cutoff box."""
    kx, ky, kz = lattice(cutoffs)
    out = (kx**2 + ky**2 + kz**2).astype(float)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=256)
def wavenumber(cutoffs: Cutoffs) -> np.ndarray:
    out = np.sqrt(wavenumber_sq(cutoffs))
    out.setflags(write=False)
    return out


def _flip(c: np.ndarray) -> np.ndarray:
    """Coefficient array re-indexed k -> -k."""
    return c[..., ::-1, ::-1, ::-1]


def hermitian_defect(c: np.ndarray) -> float:
    if c.size == 0:
        return 0.0
    return float(np.max(np.abs(c - np.conj(_flip(c)))))


def symmetrize(c: np.ndarray) -> np.ndarray:
    """Exact Hermitian projection (c_k + conj c_{-k}) / 2."""
    return 0.5 * (c + np.conj(_flip(c)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a (batch of) field(s) on the torus.

    ``coeffs`` has shape ``batch + (2Kx+1, 2Ky+1, 2Kz+1)``. When ``real`` is set,
    Hermitian symmetry is checked to ``SYMMETRY_TOL`` (relative to the largest
    amplitude) and then imposed exactly. The stored array is read-only.
    """

    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim < 3 or any(n % 2 == 0 for n in c.shape[-3:]):
            raise ValueError(f"coefficient array needs odd trailing 3 dims, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite Fourier amplitude")
        if self.real:
            scale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
            defect = hermitian_defect(c)
            if defect > SYMMETRY_TOL * scale:
                raise SymmetryError(f"Hermitian defect {defect:.3e} on a real-flagged field")
            c = symmetrize(c)
        elif c is self.coeffs:
            c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def _trusted(cls, coeffs: np.ndarray, real: bool) -> "SpectralField":
        # internal constructor for arrays already known to be finite and symmetric
        obj = object.__new__(cls)
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        coeffs.setflags(write=False)
        object.__setattr__(obj, "coeffs", coeffs)
        object.__setattr__(obj, "real", real)
        return obj

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, K, batch: tuple[int, ...] = (), real: bool = True) -> "SpectralField":
        Kc = as_cutoffs(K)
        return cls._trusted(np.zeros(tuple(batch) + tuple(2 * k + 1 for k in Kc), complex), real)

    @classmethod
    def basis(cls, k: Sequence[int], K=None) -> "SpectralField":
        """The single basis function e_k (complex unless k = 0)."""
        k = tuple(int(v) for v in k)
        Kc = as_cutoffs(K if K is not None else max(abs(v) for v in k))
        c = np.zeros(tuple(2 * m + 1 for m in Kc), complex)
        c[k[0] + Kc[0], k[1] + Kc[1], k[2] + Kc[2]] = 1.0
        return cls(c, real=not any(k))

    @classmethod
    def from_modes(cls, modes: dict, K, real: bool = True) -> "SpectralField":
        Kc = as_cutoffs(K)
        c = np.zeros(tuple(2 * m + 1 for m in Kc), complex)
        for k, v in modes.items():
            c[k[0] + Kc[0], k[1] + Kc[1], k[2] + Kc[2]] = v
        return cls(c, real=real)

    @classmethod
    def constant(cls, value: float, K=0) -> "SpectralField":
        """The constant function x -> value."""
        Kc = as_cutoffs(K)
        c = np.zeros(tuple(2 * m + 1 for m in Kc), complex)
        c[Kc] = value * NORM
        return cls(c, real=np.isrealobj(value) or np.imag(value) == 0)

    # -- shape ------------------------------------------------------------
    @property
    def cutoffs(self) -> Cutoffs:
        return tuple((n - 1) // 2 for n in self.coeffs.shape[-3:])  # type: ignore[return-value]

    @property
    def K(self) -> int:
        Kc = self.cutoffs
        if Kc[0] != Kc[1] or Kc[1] != Kc[2]:
            raise ValueError(f"anisotropic cutoffs {Kc} have no single K")
        return Kc[0]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-3]

    def __getitem__(self, idx) -> "SpectralField":
        if not isinstance(idx, tuple):
            idx = (idx,)
        c = self.coeffs[idx + (Ellipsis, slice(None), slice(None), slice(None))]
        return SpectralField._trusted(c, self.real)

    def coefficient(self, k: Sequence[int]) -> np.ndarray:
        Kc = self.cutoffs
        if any(abs(int(v)) > m for v, m in zip(k, Kc)):
            return np.zeros(self.batch_shape, complex)[()]
        return self.coeffs[..., k[0] + Kc[0], k[1] + Kc[1], k[2] + Kc[2]]

    def resized(self, K) -> "SpectralField":
        """Zero-pad or truncate to a new cutoff box."""
        new = as_cutoffs(K)
        old = self.cutoffs
        if new == old:
            return self
        out = np.zeros(self.batch_shape + tuple(2 * k + 1 for k in new), complex)
        m = [min(a, b) for a, b in zip(new, old)]
        src = tuple(slice(o - mm, o + mm + 1) for o, mm in zip(old, m))
        dst = tuple(slice(n - mm, n + mm + 1) for n, mm in zip(new, m))
        out[(Ellipsis,) + dst] = self.coeffs[(Ellipsis,) + src]
        return SpectralField._trusted(out, self.real)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(coeffs, real=self.real)

    # -- arithmetic ---------------------------------------------------------
    def _align(self, other: "SpectralField") -> tuple[np.ndarray, np.ndarray]:
        K = tuple(max(a, b) for a, b in zip(self.cutoffs, other.cutoffs))
        return self.resized(K).coeffs, other.resized(K).coeffs

    def __add__(self, other):
        if isinstance(other, SpectralField):
            a, b = self._align(other)
            return SpectralField._trusted(a + b, self.real and other.real)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            a, b = self._align(other)
            return SpectralField._trusted(a - b, self.real and other.real)
        return NotImplemented

    def __neg__(self):
        return SpectralField._trusted(-self.coeffs, self.real)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return NotImplemented
        s = np.asarray(scalar)
        if s.ndim:
            # per-sample scalars broadcast against the batch axes
            s = s.reshape(s.shape + (1, 1, 1))
        real = self.real and np.isrealobj(s)
        return SpectralField._trusted(self.coeffs * s, real)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / np.asarray(scalar))

    def norm_sq(self) -> np.ndarray:
        """Squared L^2 norm (Parseval), one value per batch member."""
        return np.sum(np.abs(self.coeffs) ** 2, axis=(-3, -2, -1))

    def mean_value(self) -> np.ndarray:
        """Spatial average of the field."""
        return self.coefficient((0, 0, 0)) / NORM


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a field on the uniform grid x_j = 2pi j / M per axis."""

    values: np.ndarray

    @property
    def M(self) -> Cutoffs:
        return tuple(self.values.shape[-3:])  # type: ignore[return-value]

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(  # type: ignore[return-value]
            (TWO_PI * np.arange(m) / m).reshape(s)
            for m, s in zip(self.M, [(-1, 1, 1), (1, -1, 1), (1, 1, -1)])
        )


# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------

def _check_resolution(M: Cutoffs, K: Cutoffs) -> None:
    for m, k in zip(M, K):
        if m < 2 * k + 1:
            raise ResolutionError(f"grid resolution {M} too small for cutoff {K} (need M >= 2K+1)")


def _fft_axes():
    return (-3, -2, -1)


# Tiny transforms are faster as one dense matrix product than as batched FFTs.
_FLAT_LIMIT = 20_000


@lru_cache(maxsize=256)
def _axis_matrix(K: int, M: int) -> np.ndarray:
    """E[j, k] = exp(i k x_j) for one axis."""
    x = TWO_PI * np.arange(M) / M
    E = np.exp(1j * np.outer(x, np.arange(-K, K + 1)))
    E.setflags(write=False)
    return E


@lru_cache(maxsize=128)
def _flat_matrix(K: Cutoffs, M: Cutoffs) -> np.ndarray:
    """Synthesis matrix of shape (n_modes, n_points) for the flattened arrays."""
    Ex, Ey, Ez = (_axis_matrix(k, m) for k, m in zip(K, M))
    full = np.einsum("ia,jb,kc->abcijk", Ex, Ey, Ez)
    out = np.ascontiguousarray(full.reshape(int(np.prod([2 * k + 1 for k in K])), int(np.prod(M))))
    out.setflags(write=False)
    return out


def _method(K: Cutoffs, M: Cutoffs) -> str:
    n = int(np.prod([2 * k + 1 for k in K]))
    return "flat" if n * int(np.prod(M)) <= _FLAT_LIMIT else "fft"


def to_grid(coeffs: np.ndarray, M: Cutoffs, real: bool) -> np.ndarray:
    """Synthesis sum_k c_k e_k(x_j) on an M-grid (no resolution check)."""
    K = tuple((n - 1) // 2 for n in coeffs.shape[-3:])
    M = tuple(M)
    batch = coeffs.shape[:-3]
    method = _method(K, M)
    if method == "flat":
        out = (coeffs.reshape(batch + (-1,)) @ _flat_matrix(K, M)).reshape(batch + M)
        return (out.real if real else out) / NORM
    if real:
        buf = np.zeros(batch + (M[0], M[1], M[2] // 2 + 1), complex)
        last = ((slice(K[2], None), slice(0, K[2] + 1)),)
        _scatter(buf, coeffs, [_wrap_slices(K[0]), _wrap_slices(K[1]), last])
        out = sfft.irfftn(buf, s=M, axes=_fft_axes(), norm="forward")
    else:
        buf = np.zeros(batch + M, complex)
        _scatter(buf, coeffs, [_wrap_slices(k) for k in K])
        out = sfft.ifftn(buf, axes=_fft_axes(), norm="forward")
    return out / NORM


def _wrap_slices(K: int):
    """(source, target) slice pairs placing indices 0..K and -K..-1 at their FFT slots."""
    pairs = [(slice(K, 2 * K + 1), slice(0, K + 1))]
    if K:
        pairs.append((slice(0, K), slice(-K, None)))
    return pairs


def _scatter(buf: np.ndarray, coeffs: np.ndarray, axis_pairs) -> None:
    for combo in itertools.product(*axis_pairs):
        buf[(Ellipsis,) + tuple(d for _, d in combo)] = coeffs[(Ellipsis,) + tuple(s for s, _ in combo)]


def from_grid(values: np.ndarray, K: Cutoffs) -> np.ndarray:
    """Coefficients <g, e_k> of grid samples, exact for band-limited g."""
    M = tuple(values.shape[-3:])
    K = tuple(K)
    batch = values.shape[:-3]
    scale = NORM / float(np.prod(M))
    real = np.isrealobj(values)
    method = _method(K, M)
    if method == "flat":
        flat = values.reshape(batch + (-1,)) @ np.conj(_flat_matrix(K, M)).T
        out = flat.reshape(batch + tuple(2 * k + 1 for k in K)) * scale
        return symmetrize(out) if real else out
    ix = np.arange(-K[0], K[0] + 1) % M[0]
    iy = np.arange(-K[1], K[1] + 1) % M[1]
    if real:
        spec = sfft.rfftn(values, axes=_fft_axes())
        pos = spec[(Ellipsis,) + np.ix_(ix, iy, np.arange(0, K[2] + 1))]
        neg = np.conj(pos[..., ::-1, ::-1, :0:-1])
        out = np.concatenate([neg, pos], axis=-1) * scale
        return symmetrize(out)
    spec = sfft.fftn(values, axes=_fft_axes())
    iz = np.arange(-K[2], K[2] + 1) % M[2]
    return spec[(Ellipsis,) + np.ix_(ix, iy, iz)] * scale


def forward_transform(g: GridField, K) -> SpectralField:
    """Fourier coefficients c_k = <g, e_k> of grid data."""
    Kc = as_cutoffs(K)
    _check_resolution(g.M, Kc)
    real = np.isrealobj(g.values)
    return SpectralField._trusted(from_grid(g.values, Kc), real)


def inverse_transform(f: SpectralField, M) -> GridField:
    """Evaluate the (real or complex) field on an M-grid."""
    Mc = as_resolution(M)
    _check_resolution(Mc, f.cutoffs)
    if f.real and hermitian_defect(f.coeffs) > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(f.coeffs)))):
        raise SymmetryError("real-flagged field is not Hermitian")
    return GridField(to_grid(f.coeffs, Mc, f.real))


def default_resolution(K, factor: int = 2) -> Cutoffs:
    return tuple(factor * (2 * k + 1) for k in as_cutoffs(K))  # type: ignore[return-value]


def inner_product(f: SpectralField, g: SpectralField) -> np.ndarray:
    """<f, g> = sum_k f_k conj(g_k)."""
    a, b = f._align(g)
    return np.sum(a * np.conj(b), axis=(-3, -2, -1))


# --------------------------------------------------------------------------
# multipliers and products
# --------------------------------------------------------------------------

Multiplier = Union[np.ndarray, Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]]


def multiplier_values(h: Multiplier, cutoffs: Cutoffs) -> np.ndarray:
    if callable(h):
        vals = np.broadcast_to(np.asarray(h(*lattice(cutoffs))), tuple(2 * k + 1 for k in cutoffs))
    else:
        vals = np.asarray(h)
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier is not finite on the lattice")
    return vals


def apply_multiplier(h: Multiplier, f: SpectralField) -> SpectralField:
    """h(nabla) f: coefficient-wise product with h(k).

    The result keeps the real flag only if h(-k) = conj(h(k)) on the lattice.
    """
    vals = multiplier_values(h, f.cutoffs)
    out = f.coeffs * vals
    if not f.real:
        return SpectralField._trusted(out, False)
    full = np.broadcast_to(vals, f.coeffs.shape[-3:]) if vals.ndim < 3 else vals
    if hermitian_defect(full) > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(full)))):
        return SpectralField._trusted(out, False)
    if np.iscomplexobj(vals):
        out = symmetrize(out)
    return SpectralField._trusted(out, True)


def _product_resolution(cutoff_lists: Iterable[Cutoffs], out: Cutoffs, real: bool) -> Cutoffs:
    total = np.sum(np.array(list(cutoff_lists)), axis=0)
    return tuple(  # type: ignore[return-value]
        sfft.next_fast_len(int(s + o + 1), real=real) for s, o in zip(total, out)
    )


def multiply(*fields: SpectralField, cutoff=None) -> SpectralField:
    """Exact pointwise product of several fields.

    The output cutoff defaults to the sum of the input cutoffs (the full
    product); a smaller ``cutoff`` truncates. The padded grid satisfies
    ``M >= sum K + K_out + 1`` so aliasing never touches retained modes.
    """
    if not fields:
        raise ValueError("need at least one factor")
    full = tuple(int(s) for s in np.sum([f.cutoffs for f in fields], axis=0))
    out = full if cutoff is None else as_cutoffs(cutoff)
    real = all(f.real for f in fields)
    M = _product_resolution([f.cutoffs for f in fields], out, real)
    cache: dict[int, np.ndarray] = {}
    vals = None
    for f in fields:
        g = cache.get(id(f))
        if g is None:
            g = cache[id(f)] = to_grid(f.coeffs, M, real)
        vals = g if vals is None else vals * g
    return SpectralField._trusted(from_grid(vals, out), real)


def pointwise_product(f: SpectralField, g: SpectralField, cutoff=None) -> SpectralField:
    """Coefficients of the pointwise product f*g, alias-free."""
    return multiply(f, g, cutoff=cutoff)


def power(f: SpectralField, n: int, cutoff=None) -> SpectralField:
    return multiply(*([f] * n), cutoff=cutoff)


def integral(f: SpectralField) -> np.ndarray:
    """Integral over the torus: (2pi)^{3/2} c_0."""
    return f.coefficient((0, 0, 0)) * NORM


def lp_norm(f: SpectralField, p, M=None) -> np.ndarray:
    """L^p norm; exact for p=2, grid-based otherwise (``p=inf`` gives the grid max)."""
    if p == 2:
        return np.sqrt(f.norm_sq())
    Mc = default_resolution(f.cutoffs) if M is None else as_resolution(M)
    vals = np.abs(to_grid(f.coeffs, Mc, f.real))
    if np.isinf(p):
        return np.max(vals, axis=(-3, -2, -1))
    cell = TWO_PI**3 / float(np.prod(Mc))
    return (cell * np.sum(vals**p, axis=(-3, -2, -1))) ** (1.0 / p)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

MAGIC = b"PHI4"
META_MAGIC = b"META"
_HEADER = struct.Struct("<4sIIB")
_HEADER_V2 = struct.Struct("<4sIIIIB")


def write_snapshot(path: Union[str, Path], f: SpectralField, meta: str = "") -> None:
    """Binary snapshot, little-endian.

    Version 1 (isotropic): magic, u32 version, u32 K, u8 real flag, then
    (2K+1)^3 complex128 amplitudes with kx slowest. Version 2 stores three
    u32 cutoffs instead of one. A nonempty ``meta`` string is appended after
    the amplitudes as b"META", u32 length, UTF-8 text.
    """
    if f.batch_shape:
        raise ValueError("snapshots hold a single field, not a batch")
    Kc = f.cutoffs
    if Kc[0] == Kc[1] == Kc[2]:
        header = _HEADER.pack(MAGIC, 1, Kc[0], int(f.real))
    else:
        header = _HEADER_V2.pack(MAGIC, 2, *Kc, int(f.real))
    body = np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes()
    trailer = b""
    if meta:
        text = meta.encode()
        trailer = META_MAGIC + struct.pack("<I", len(text)) + text
    Path(path).write_bytes(header + body + trailer)


def _split_trailer(raw: bytes, end: int, path) -> str:
    if end == len(raw):
        return ""
    if raw[end:end + 4] != META_MAGIC or end + 8 > len(raw):
        raise ValueError(f"{path}: truncated or oversized snapshot")
    (n,) = struct.unpack_from("<I", raw, end + 4)
    if end + 8 + n != len(raw):
        raise ValueError(f"{path}: corrupt snapshot metadata")
    return raw[end + 8:].decode()


def read_snapshot(path: Union[str, Path]) -> SpectralField:
    return read_snapshot_with_meta(path)[0]


def read_snapshot_with_meta(path: Union[str, Path]) -> tuple[SpectralField, str]:
    raw = Path(path).read_bytes()
    magic, version = struct.unpack_from("<4sI", raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a field snapshot")
    if version == 1:
        _, _, K, real = _HEADER.unpack_from(raw)
        Kc, off = (K, K, K), _HEADER.size
    elif version == 2:
        _, _, kx, ky, kz, real = _HEADER_V2.unpack_from(raw)
        Kc, off = (kx, ky, kz), _HEADER_V2.size
    else:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    shape = tuple(2 * k + 1 for k in Kc)
    n = int(np.prod(shape))
    if off + 16 * n > len(raw):
        raise ValueError(f"{path}: truncated or oversized snapshot")
    meta = _split_trailer(raw, off + 16 * n, path)
    body = np.frombuffer(raw, dtype="<c16", count=n, offset=off)
    return SpectralField(body.reshape(shape).astype(np.complex128), real=bool(real)), meta


def write_csv(path: Union[str, Path], f: SpectralField, header_lines: Sequence[str] = ()) -> None:
    """CSV export with columns kx, ky, kz, re, im."""
    if f.batch_shape:
        raise ValueError("CSV export holds a single field")
    kx, ky, kz = np.meshgrid(*(np.arange(-k, k + 1) for k in f.cutoffs), indexing="ij")
    c = f.coeffs
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("kx,ky,kz,re,im\n")
        for row in zip(kx.ravel().tolist(), ky.ravel().tolist(), kz.ravel().tolist(), c.real.ravel().tolist(),
                       c.imag.ravel().tolist()):
            fh.write(f"{row[0]},{row[1]},{row[2]},{row[3]!r},{row[4]!r}\n")
