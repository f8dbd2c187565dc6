"""Truncated Fourier representation of mean-zero vorticity on the 2-torus.

Real coordinates
----------------
A state is a real vector ``x`` of length ``dim = 2h`` where ``h`` is the
number of retained half-plane modes.  Entry ``j < h`` is the coefficient of
the normalized ``sin(k_j . x)`` and entry ``h + j`` that of ``cos(k_j . x)``;
both basis functions have unit L2 norm on ``[-pi, pi]^2``, so the Euclidean
norm of ``x`` is the L2 norm of the field.  Index ``h + j`` is associated
with the lattice point ``-k_j``.

The complex amplitude ``c_k`` is the inner product with
``exp(i k.x) / (2 pi)``; in these terms ``c_{k_j} = (b_j - i a_j) / sqrt 2``.

Every array-valued function accepts a leading batch shape.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

SQRT2 = math.sqrt(2.0)
TWO_PI = 2.0 * math.pi


class ConfigurationError(ValueError):
    pass


def _half_plane(k1: int, k2: int) -> bool:
    return k2 > 0 or (k2 == 0 and k1 > 0)


class SpectralGrid:
    """Index bookkeeping for a truncation level ``N``.

    ``shape="box"`` keeps ``0 < max(|k1|, |k2|) <= N``; ``shape="disc"``
    keeps ``0 < |k| <= N``.  Half-plane modes are ordered by ``|k|^2`` and
    then lexicographically, so low indices are low wavenumbers.
    """

    def __init__(self, N: int, shape: str = "box", fft_size: int | None = None):
        if N < 1:
            raise ConfigurationError("truncation N must be >= 1")
        if shape not in ("box", "disc"):
            raise ConfigurationError(f"unknown truncation shape {shape!r}")
        self.N = int(N)
        self.shape = shape
        half = []
        for k2 in range(0, N + 1):
            for k1 in range(-N, N + 1):
                if not _half_plane(k1, k2):
                    continue
                if shape == "disc" and k1 * k1 + k2 * k2 > N * N:
                    continue
                half.append((k1, k2))
        half.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k[1], k[0]))
        self.h = len(half)
        self.dim = 2 * self.h
        hm = np.array(half, dtype=np.int64).reshape(-1, 2)
        self.half_modes = hm
        self.modes = np.concatenate([hm, -hm])
        self.ksq = (self.modes ** 2).sum(axis=1).astype(float)
        self.ksq_half = self.ksq[: self.h]
        self.index = {(int(a), int(b)): i for i, (a, b) in enumerate(self.modes)}

        min_size = 3 * N + 1
        if fft_size is None:
            fft_size = sfft.next_fast_len(min_size)
        if fft_size < min_size:
            raise ConfigurationError(
                f"transform size {fft_size} too small to dealias N={N}; need >= {min_size}"
            )
        self.M = int(fft_size)
        self._build_fft_maps()

    def __repr__(self) -> str:
        return f"SpectralGrid(N={self.N}, shape={self.shape!r}, dim={self.dim}, M={self.M})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpectralGrid)
            and other.N == self.N
            and other.shape == self.shape
        )

    def __hash__(self) -> int:
        return hash((self.N, self.shape))

    def _build_fft_maps(self):
        M = self.M
        hm = self.half_modes
        # rfft layout: rows k1 mod M, columns k2 in [0, M//2]
        self.rows_half = hm[:, 0] % M
        self.cols_half = hm[:, 1]
        # modes -k_j with k2 == 0 also live in the stored column
        z = np.nonzero(hm[:, 1] == 0)[0]
        self.zero_col = z
        self.rows_neg0 = (-hm[z, 0]) % M
        kx = np.fft.fftfreq(M, 1.0 / M)
        ky = np.arange(M // 2 + 1, dtype=float)
        self.KX, self.KY = np.meshgrid(kx, ky, indexing="ij")

    def contains(self, k) -> bool:
        return (int(k[0]), int(k[1])) in self.index

    def mode_of(self, idx: int) -> tuple:
        return tuple(int(v) for v in self.modes[idx])

    def low_mask(self, cut: int, norm: str = "max") -> np.ndarray:
        """Boolean mask over real indices of modes with 0 < |k| <= cut."""
        if norm == "max":
            size = np.abs(self.modes).max(axis=1)
        else:
            size = np.sqrt(self.ksq)
        return size <= cut

    def heat(self, nu: float, t: float) -> np.ndarray:
        return np.exp(-nu * self.ksq * t)

    def zeros(self, *batch) -> np.ndarray:
        return np.zeros(batch + (self.dim,))


@functools.lru_cache(maxsize=32)
def get_grid(N: int, shape: str = "box") -> SpectralGrid:
    return SpectralGrid(N, shape)


# --------------------------------------------------------------------------
# coordinate changes


def to_complex(grid: SpectralGrid, x: np.ndarray) -> np.ndarray:
    """Complex amplitudes on the half-plane modes."""
    x = np.asarray(x, dtype=float)
    h = grid.h
    return (x[..., h:] - 1j * x[..., :h]) / SQRT2


def to_complex_full(grid: SpectralGrid, x: np.ndarray) -> np.ndarray:
    c = to_complex(grid, x)
    return np.concatenate([c, np.conj(c)], axis=-1)


def from_complex(grid: SpectralGrid, c: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_complex` (imaginary noise is discarded)."""
    c = np.asarray(c)
    return np.concatenate([-SQRT2 * c.imag, SQRT2 * c.real], axis=-1)


def from_complex_full(grid: SpectralGrid, c_full: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a full complex coefficient vector onto real fields."""
    h = grid.h
    c = 0.5 * (c_full[..., :h] + np.conj(c_full[..., h:]))
    return from_complex(grid, c)


def unitary_matrix(grid: SpectralGrid) -> np.ndarray:
    """Matrix ``U`` with ``to_complex_full(x) = U @ x``."""
    h = grid.h
    I = np.eye(h)
    return np.block([[-1j * I, I], [1j * I, I]]) / SQRT2


# --------------------------------------------------------------------------
# physical space


def _spectrum(grid: SpectralGrid, c: np.ndarray) -> np.ndarray:
    M = grid.M
    F = np.zeros(c.shape[:-1] + (M, M // 2 + 1), dtype=complex)
    F[..., grid.rows_half, grid.cols_half] = c
    if grid.zero_col.size:
        F[..., grid.rows_neg0, 0] = np.conj(c[..., grid.zero_col])
    return F


def _field_from_spectrum(grid: SpectralGrid, F: np.ndarray, workers=None) -> np.ndarray:
    M = grid.M
    return sfft.irfft2(F, s=(M, M), workers=workers) * (M * M / TWO_PI)


def _project(grid: SpectralGrid, f: np.ndarray, workers=None) -> np.ndarray:
    """Half-plane complex amplitudes of a real grid function."""
    M = grid.M
    G = sfft.rfft2(f, workers=workers)
    return G[..., grid.rows_half, grid.cols_half] * (TWO_PI / (M * M))


def to_physical(grid: SpectralGrid, x: np.ndarray, workers=None) -> np.ndarray:
    """Values on the uniform ``M x M`` grid ``x_j = 2 pi j / M``."""
    return _field_from_spectrum(grid, _spectrum(grid, to_complex(grid, x)), workers)


def from_physical(grid: SpectralGrid, f: np.ndarray, workers=None) -> np.ndarray:
    return from_complex(grid, _project(grid, np.asarray(f, dtype=float), workers))


def to_physical_complex(grid: SpectralGrid, x: np.ndarray) -> np.ndarray:
    """Full complex inverse transform; its imaginary part measures reality."""
    M = grid.M
    c = to_complex_full(grid, x)
    F = np.zeros(c.shape[:-1] + (M, M), dtype=complex)
    F[..., grid.modes[:, 0] % M, grid.modes[:, 1] % M] = c
    return sfft.ifft2(F) * (M * M / TWO_PI)


def evaluate_at(grid: SpectralGrid, x: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Direct trigonometric sum at arbitrary points, shape (P, 2)."""
    c = to_complex_full(grid, x)
    phase = np.exp(1j * (pts @ grid.modes.T))
    return (phase @ c).real / TWO_PI


# --------------------------------------------------------------------------
# operators


def biot_savart(grid: SpectralGrid, x: np.ndarray) -> tuple:
    """Complex half-plane amplitudes of the velocity components of ``K w``."""
    c = to_complex(grid, x)
    k1 = grid.half_modes[:, 0]
    k2 = grid.half_modes[:, 1]
    ksq = grid.ksq_half
    return -1j * k2 * c / ksq, 1j * k1 * c / ksq


def sobolev_norm(grid: SpectralGrid, x: np.ndarray, alpha: float = 0.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.sum(grid.ksq ** alpha * x * x, axis=-1))


def sobolev_norm_sq(grid: SpectralGrid, x: np.ndarray, alpha: float = 0.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sum(grid.ksq ** alpha * x * x, axis=-1)


def _vel_grad(grid: SpectralGrid, c: np.ndarray, workers=None):
    """Physical velocity and vorticity gradient for half-plane amplitudes c."""
    k1 = grid.half_modes[:, 0]
    k2 = grid.half_modes[:, 1]
    ksq = grid.ksq_half
    parts = np.stack(
        [-1j * k2 * c / ksq, 1j * k1 * c / ksq, 1j * k1 * c, 1j * k2 * c], axis=-2
    )
    f = _field_from_spectrum(grid, _spectrum(grid, parts), workers)
    return f[..., 0, :, :], f[..., 1, :, :], f[..., 2, :, :], f[..., 3, :, :]


def nonlinearity_fft(grid: SpectralGrid, x: np.ndarray, workers=None) -> np.ndarray:
    """Galerkin projection of ``-(u . grad) w`` with ``u = K w`` (dealiased)."""
    c = to_complex(grid, x)
    u1, u2, w1, w2 = _vel_grad(grid, c, workers)
    return from_complex(grid, _project(grid, -(u1 * w1 + u2 * w2), workers))


def symmetrized_fft(grid: SpectralGrid, x: np.ndarray, y: np.ndarray, workers=None) -> np.ndarray:
    """Symmetric bilinear form with ``symmetrized(x, x) = 2 nonlinearity(x)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    cx = to_complex(grid, x)
    cy = to_complex(grid, y)
    a1, a2, ax, ay = _vel_grad(grid, cx, workers)
    b1, b2, bx, by = _vel_grad(grid, cy, workers)
    prod = -(a1 * bx + a2 * by + b1 * ax + b2 * ay)
    return from_complex(grid, _project(grid, prod, workers))


def transport_fft(grid: SpectralGrid, xi: np.ndarray, v: np.ndarray, workers=None) -> np.ndarray:
    """``-(K xi . grad) v`` projected: the bilinear map with divergence-free first slot."""
    a1, a2, _, _ = _vel_grad(grid, to_complex(grid, xi), workers)
    _, _, bx, by = _vel_grad(grid, to_complex(grid, v), workers)
    return from_complex(grid, _project(grid, -(a1 * bx + a2 * by), workers))


def linearization_adjoint_fft(grid: SpectralGrid, w: np.ndarray, eta: np.ndarray, workers=None) -> np.ndarray:
    """Transpose of ``xi -> symmetrized(w, xi)`` in the real orthonormal basis."""
    w = np.asarray(w, float)
    eta = np.asarray(eta, float)
    u1, u2, wx, wy = _vel_grad(grid, to_complex(grid, w), workers)
    _, _, ex, ey = _vel_grad(grid, to_complex(grid, eta), workers)
    e = to_physical(grid, eta, workers)
    # transport part: -<u.grad xi, eta> = <xi, u.grad eta>
    first = _project(grid, u1 * ex + u2 * ey, workers)
    # velocity part: -<K xi . grad w, eta> = -<xi, K^T(eta grad w)>
    g1 = _project(grid, e * wx, workers)
    g2 = _project(grid, e * wy, workers)
    k1 = grid.half_modes[:, 0]
    k2 = grid.half_modes[:, 1]
    second = -1j * (k2 * g1 - k1 * g2) / grid.ksq_half
    return from_complex(grid, first + second)


# --------------------------------------------------------------------------
# direct double sum


@functools.lru_cache(maxsize=16)
def _triads(grid: SpectralGrid):
    """All (j, l, k = j + l) over retained modes with k a retained half-plane mode.

    Indices refer to the full mode list ``grid.modes``.  The weight is the
    non-symmetrized coefficient of ``c_j c_l`` in the transport term.
    """
    modes = grid.modes
    n = len(modes)
    J, L = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    J = J.ravel()
    L = L.ravel()
    S = modes[J] + modes[L]
    # membership of k via a dense lookup table
    N = grid.N
    side = 4 * N + 1
    table = -np.ones((side, side), dtype=np.int64)
    table[grid.half_modes[:, 0] + 2 * N, grid.half_modes[:, 1] + 2 * N] = np.arange(grid.h)
    K = table[S[:, 0] + 2 * N, S[:, 1] + 2 * N]
    keep = K >= 0
    J, L, K = J[keep], L[keep], K[keep]
    jm, lm = modes[J].astype(float), modes[L].astype(float)
    jperp_dot_l = jm[:, 1] * lm[:, 0] - jm[:, 0] * lm[:, 1]
    weight = -jperp_dot_l / grid.ksq[J] / TWO_PI
    return J, L, K, weight


def nonlinearity_direct(grid: SpectralGrid, x: np.ndarray) -> np.ndarray:
    """Exact convolution sum; slow reference for :func:`nonlinearity_fft`."""
    J, L, K, wt = _triads(grid)
    c = to_complex_full(grid, x)
    terms = wt * c[..., J] * c[..., L]
    out = np.zeros(c.shape[:-1] + (grid.h,), dtype=complex)
    if out.ndim == 1:
        np.add.at(out, K, terms)
    else:
        flat = out.reshape(-1, grid.h)
        tflat = terms.reshape(-1, terms.shape[-1])
        for i in range(flat.shape[0]):
            np.add.at(flat[i], K, tflat[i])
    return from_complex(grid, out)


def symmetrized_direct(grid: SpectralGrid, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    J, L, K, wt = _triads(grid)
    cx = to_complex_full(grid, x)
    cy = to_complex_full(grid, y)
    terms = wt * (cx[J] * cy[L] + cy[J] * cx[L])
    out = np.zeros(grid.h, dtype=complex)
    np.add.at(out, K, terms)
    return from_complex(grid, out)


def transport_direct(grid: SpectralGrid, xi: np.ndarray, v: np.ndarray) -> np.ndarray:
    J, L, K, wt = _triads(grid)
    cx = to_complex_full(grid, xi)
    cv = to_complex_full(grid, v)
    out = np.zeros(grid.h, dtype=complex)
    np.add.at(out, K, wt * cx[J] * cv[L])
    return from_complex(grid, out)


@functools.lru_cache(maxsize=16)
def bilinear_tensor(grid: SpectralGrid) -> sp.csr_matrix:
    """Sparse real tensor ``T`` with ``symmetrized(x, y) = (T @ x).reshape(dim, dim) @ y``.

    Rows are indexed ``r * dim + q`` (output r, second argument q) and
    columns by the first argument p.
    """
    J, L, K, wt = _triads(grid)
    h, dim = grid.h, grid.dim
    # complex coefficient of c_j c_l in the half-plane output k, symmetrized in (j, l)
    # out_k = sum wt (x_j y_l + y_j x_l);  x_j = sum_p U[j, p] x_p
    U = unitary_matrix(grid)
    # U has exactly two nonzeros per row: row j < h -> (j, j+h); row j >= h -> (j-h, j)
    jj = np.arange(dim)
    base = jj % h
    cols = np.stack([base, base + h], axis=1)
    vals = U[jj[:, None], cols]
    # real output r from complex half amplitude o_k: a = -sqrt2 Im o, b = sqrt2 Re o
    rows_r = []
    cols_p = []
    cols_q = []
    data = []
    for (A, Bi) in ((J, L), (L, J)):
        for s in range(2):
            for t in range(2):
                p = cols[A, s]
                q = cols[Bi, t]
                z = wt * vals[A, s] * vals[Bi, t]
                rows_r.append(K)
                cols_p.append(p)
                cols_q.append(q)
                data.append(-SQRT2 * z.imag)
                rows_r.append(K + h)
                cols_p.append(p)
                cols_q.append(q)
                data.append(SQRT2 * z.real)
    r = np.concatenate(rows_r)
    p = np.concatenate(cols_p)
    q = np.concatenate(cols_q)
    d = np.concatenate(data)
    T = sp.coo_matrix((d, (r * dim + q, p)), shape=(dim * dim, dim)).tocsr()
    T.sum_duplicates()
    T.eliminate_zeros()
    return T


def linearization_matrix(grid: SpectralGrid, w: np.ndarray) -> np.ndarray:
    """Dense matrix of ``xi -> symmetrized(w, xi)``."""
    T = bilinear_tensor(grid)
    return np.asarray(T @ np.asarray(w, float)).reshape(grid.dim, grid.dim)


# --------------------------------------------------------------------------
# value type


@dataclass(frozen=True)
class VorticityField:
    grid: SpectralGrid
    x: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.shape != (self.grid.dim,):
            raise ValueError(f"expected {self.grid.dim} real coordinates, got {x.shape}")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @classmethod
    def zeros(cls, grid: SpectralGrid) -> "VorticityField":
        return cls(grid, np.zeros(grid.dim))

    @classmethod
    def from_modes(cls, grid: SpectralGrid, amplitudes: dict) -> "VorticityField":
        """Build from ``{(k1, k2): complex c_k}``; negative half-plane keys are conjugated."""
        c = np.zeros(grid.h, dtype=complex)
        for k, val in amplitudes.items():
            k = (int(k[0]), int(k[1]))
            if not grid.contains(k):
                raise ValueError(f"mode {k} outside truncation N={grid.N}")
            i = grid.index[k]
            if i < grid.h:
                c[i] += val
            else:
                c[i - grid.h] += np.conj(val)
        return cls(grid, from_complex(grid, c))

    @property
    def coeffs(self) -> np.ndarray:
        return to_complex(self.grid, self.x)

    def coeff(self, k) -> complex:
        i = self.grid.index[(int(k[0]), int(k[1]))]
        c = self.coeffs
        return c[i] if i < self.grid.h else np.conj(c[i - self.grid.h])

    def norm(self, alpha: float = 0.0) -> float:
        return float(sobolev_norm(self.grid, self.x, alpha))

    def physical(self) -> np.ndarray:
        return to_physical(self.grid, self.x)

    def velocity(self) -> tuple:
        return biot_savart(self.grid, self.x)

    def nonlinearity(self) -> "VorticityField":
        return VorticityField(self.grid, nonlinearity_fft(self.grid, self.x))

    def __add__(self, other):
        _check_same(self, other)
        return VorticityField(self.grid, self.x + other.x)

    def __sub__(self, other):
        _check_same(self, other)
        return VorticityField(self.grid, self.x - other.x)

    def __mul__(self, s: float):
        return VorticityField(self.grid, self.x * s)

    __rmul__ = __mul__

    def to_json(self) -> str:
        c = self.coeffs
        rows = [
            [int(k[0]), int(k[1]), float(v.real), float(v.imag)]
            for k, v in zip(self.grid.half_modes, c)
        ]
        return json.dumps({"N": self.grid.N, "shape": self.grid.shape, "modes": rows})

    @classmethod
    def from_json(cls, text: str) -> "VorticityField":
        d = json.loads(text)
        grid = get_grid(int(d["N"]), d.get("shape", "box"))
        amps = {(r[0], r[1]): complex(r[2], r[3]) for r in d["modes"]}
        return cls.from_modes(grid, amps)


def _check_same(a: VorticityField, b: VorticityField):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def symmetrized_nonlinearity(w: VorticityField, v: VorticityField) -> VorticityField:
    _check_same(w, v)
    return VorticityField(w.grid, symmetrized_fft(w.grid, w.x, v.x))


def random_field(grid: SpectralGrid, rng: np.random.Generator, decay: float = 1.0, *batch) -> np.ndarray:
    """Random real coordinates with amplitude ``|k|^-decay``."""
    return rng.standard_normal(batch + (grid.dim,)) * grid.ksq ** (-decay / 2)
