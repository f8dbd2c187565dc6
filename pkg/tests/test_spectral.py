import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ns2dlab.spectral import (
    ConfigurationError, SpectralGrid, VorticityField, biot_savart, evaluate_at, from_complex,
    from_physical, get_grid, linearization_adjoint_fft, linearization_matrix, nonlinearity_direct,
    nonlinearity_fft, random_field, sobolev_norm_sq, symmetrized_direct, symmetrized_fft,
    symmetrized_nonlinearity, to_complex, to_complex_full, to_physical, to_physical_complex,
    transport_direct, transport_fft, unitary_matrix,
)

seeds = st.integers(0, 2 ** 31 - 1)


def field(N, seed, decay=1.0):
    g = get_grid(N)
    return g, random_field(g, np.random.default_rng(seed), decay)


# ---------------------------------------------------------------- oracle helpers


def conv_oracle(grid, x):
    """Brute-force -(u . grad w) over all pairs j + l = k, written from the per-mode formulas."""
    cf = to_complex_full(grid, x)
    amp = {grid.mode_of(i): cf[i] for i in range(grid.dim)}
    out = {}
    for j, cj in amp.items():
        jsq = j[0] ** 2 + j[1] ** 2
        u1 = -1j * j[1] * cj / jsq
        u2 = 1j * j[0] * cj / jsq
        for l, cl in amp.items():
            k = (j[0] + l[0], j[1] + l[1])
            if not grid.contains(k):
                continue
            # u_j . (i l) w_l times the product normalisation 1/(2 pi)
            out[k] = out.get(k, 0) - (u1 * 1j * l[0] + u2 * 1j * l[1]) * cl / (2 * math.pi)
    c = np.array([out.get(tuple(k), 0) for k in grid.half_modes])
    return from_complex(grid, c)


def physical_fd_oracle(grid, x, n=96):
    """Evaluate w and u by explicit sums on an n x n grid, differentiate w by
    fourth-order finite differences and project the product back by quadrature."""
    h = 2 * math.pi / n
    s = np.arange(n) * h
    X, Y = np.meshgrid(s, s, indexing="ij")
    cf = to_complex_full(grid, x)
    w = np.zeros((n, n))
    u1 = np.zeros((n, n))
    u2 = np.zeros((n, n))
    for i in range(grid.dim):
        k1, k2 = grid.mode_of(i)
        e = np.exp(1j * (k1 * X + k2 * Y)) / (2 * math.pi)
        ksq = k1 * k1 + k2 * k2
        w += (cf[i] * e).real
        u1 += (-1j * k2 * cf[i] / ksq * e).real
        u2 += (1j * k1 * cf[i] / ksq * e).real

    def d(f, ax):
        return (-np.roll(f, -2, ax) + 8 * np.roll(f, -1, ax) - 8 * np.roll(f, 1, ax) + np.roll(f, 2, ax)) / (12 * h)

    f = -(u1 * d(w, 0) + u2 * d(w, 1))
    c = np.array([
        np.sum(f * np.exp(-1j * (k[0] * X + k[1] * Y))) / (2 * math.pi) * h * h for k in grid.half_modes
    ])
    return from_complex(grid, c)


# ---------------------------------------------------------------- grid and coordinates


class TestGrid:
    def test_dimensions(self):
        g = get_grid(3)
        assert g.h == ((2 * 3 + 1) ** 2 - 1) // 2
        assert g.dim == 2 * g.h
        assert g.M >= 3 * 3 + 1

    def test_disc_shape(self):
        g = SpectralGrid(3, "disc")
        assert all(k[0] ** 2 + k[1] ** 2 <= 9 for k in g.modes)
        assert (2, 2) in g.index and (3, 1) not in g.index

    def test_too_small_transform(self):
        with pytest.raises(ConfigurationError):
            SpectralGrid(4, fft_size=12)

    def test_bad_truncation(self):
        with pytest.raises(ConfigurationError):
            SpectralGrid(0)

    def test_negative_index_pairing(self):
        g = get_grid(4)
        for j in range(g.h):
            assert tuple(g.modes[g.h + j]) == tuple(-g.modes[j])

    def test_low_mask(self):
        g = get_grid(4)
        m = g.low_mask(1)
        assert m.sum() == 8
        assert m.sum() == sum(1 for k in g.modes if max(abs(k[0]), abs(k[1])) <= 1)


class TestCoordinates:
    def test_unitary(self):
        U = unitary_matrix(get_grid(3))
        assert np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-14)

    @given(seeds)
    def test_complex_roundtrip(self, seed):
        g, x = field(4, seed)
        assert np.allclose(from_complex(g, to_complex(g, x)), x, atol=1e-14)

    @given(seeds)
    def test_physical_roundtrip(self, seed):
        g, x = field(4, seed)
        assert np.allclose(from_physical(g, to_physical(g, x)), x, atol=1e-13)

    @given(seeds)
    def test_parseval(self, seed):
        # the real coordinates are orthonormal: Euclidean norm equals the L2 norm of the field
        g, x = field(4, seed)
        f = to_physical(g, x)
        l2 = np.sum(f * f) * (2 * math.pi / g.M) ** 2
        assert l2 == pytest.approx(float(x @ x), rel=1e-12)

    def test_reality(self):
        g, x = field(5, 3)
        f = to_physical_complex(g, x)
        assert np.max(np.abs(f.imag)) < 1e-14 * np.max(np.abs(f.real))

    def test_point_evaluation_matches_grid(self):
        g, x = field(3, 4)
        f = to_physical(g, x)
        idx = np.array([[0, 0], [1, 5], [7, 2]])
        pts = idx * 2 * math.pi / g.M
        assert np.allclose(evaluate_at(g, x, pts), f[idx[:, 0], idx[:, 1]], atol=1e-13)

    def test_sine_cosine_layout(self):
        # x[j] multiplies sin(k.x)/(sqrt2 pi), x[h+j] multiplies cos(k.x)/(sqrt2 pi)
        g = get_grid(2)
        j = g.index[(1, 1)]
        pts = np.array([[0.3, 1.1], [2.0, -0.7]])
        xs = np.zeros(g.dim)
        xs[j] = 1.0
        xc = np.zeros(g.dim)
        xc[g.h + j] = 1.0
        norm = math.sqrt(2) * math.pi
        assert np.allclose(evaluate_at(g, xs, pts), np.sin(pts.sum(1)) / norm, atol=1e-14)
        assert np.allclose(evaluate_at(g, xc, pts), np.cos(pts.sum(1)) / norm, atol=1e-14)


# ---------------------------------------------------------------- Biot-Savart and norms


class TestOperators:
    def test_biot_savart_single_mode(self):
        g = get_grid(2)
        w = VorticityField.from_modes(g, {(1, 0): 1.0})
        u1, u2 = biot_savart(g, w.x)
        j = g.index[(1, 0)]
        assert u1[j] == 0
        assert u2[j] == pytest.approx(1j)

    @given(seeds, st.sampled_from([-1.0, 0.0, 0.5, 1.0, 2.0]))
    def test_velocity_norm_shift(self, seed, alpha):
        g, x = field(4, seed)
        u1, u2 = biot_savart(g, x)
        lhs = 2 * np.sum(g.ksq_half ** alpha * (np.abs(u1) ** 2 + np.abs(u2) ** 2))
        assert lhs == pytest.approx(sobolev_norm_sq(g, x, alpha - 1), rel=1e-12)

    def test_zero_velocity(self):
        g = get_grid(3)
        u1, u2 = biot_savart(g, g.zeros())
        assert not u1.any() and not u2.any()

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -1.0, 2.5])
    def test_sobolev_pair(self, alpha):
        g = get_grid(3)
        w = VorticityField.from_modes(g, {(2, 1): 1.0})
        assert w.norm(alpha) ** 2 == pytest.approx(2 * 5 ** alpha, rel=1e-14)

    def test_sobolev_zero(self):
        assert VorticityField.zeros(get_grid(2)).norm(1.0) == 0.0

    @given(seeds, st.sampled_from([0.1, 0.5, 1.0]))
    def test_interpolation_inequality(self, seed, eps):
        g, x = field(5, seed, decay=0.5)
        a, b, c = 0.0, 1.0, 2.0
        lhs = sobolev_norm_sq(g, x, b)
        rhs = eps * sobolev_norm_sq(g, x, a) + eps ** (-2 * (c - b) / (b - a)) * sobolev_norm_sq(g, x, c)
        assert lhs <= rhs * (1 + 1e-12)

    def test_interpolation_constant_fails_for_large_eps(self):
        # without a constant the inequality cannot hold for eps > 1: a single mode with
        # |k|^2 = 50 gives 50 on the left and 10 + 50^2/100 = 35 on the right at eps = 10
        g = get_grid(7)
        w = VorticityField.from_modes(g, {(7, 1): 1.0})
        eps = 10.0
        lhs = w.norm(1.0) ** 2
        rhs = eps * w.norm(0.0) ** 2 + eps ** -2 * w.norm(2.0) ** 2
        assert lhs == pytest.approx(100.0)
        assert rhs == pytest.approx(70.0)
        assert lhs > rhs


# ---------------------------------------------------------------- nonlinearity


class TestNonlinearity:
    def test_hand_expanded_pair(self):
        # modes (1,0) and (1,1) with unit amplitudes: only (2,1) and (0,1) are hit,
        # with amplitudes +-1/(4 pi) from the two ordered pairs of each triad
        g = get_grid(3)
        w = VorticityField.from_modes(g, {(1, 0): 1.0, (1, 1): 1.0})
        b = VorticityField(g, nonlinearity_direct(g, w.x))
        c = b.coeffs
        hit = {tuple(g.half_modes[i]) for i in np.nonzero(np.abs(c) > 1e-14)[0]}
        assert hit == {(2, 1), (0, 1)}
        assert b.coeff((2, 1)) == pytest.approx(1 / (4 * math.pi), abs=1e-15)
        assert b.coeff((0, 1)) == pytest.approx(-1 / (4 * math.pi), abs=1e-15)
        assert b.coeff((-2, -1)) == pytest.approx(1 / (4 * math.pi), abs=1e-15)
        assert np.allclose(nonlinearity_fft(g, w.x), b.x, atol=1e-15)

    def test_single_shell_vanishes(self):
        g = get_grid(4)
        w = VorticityField.from_modes(g, {(2, 1): 0.7 - 0.2j})
        assert np.max(np.abs(nonlinearity_fft(g, w.x))) < 1e-15
        assert np.max(np.abs(nonlinearity_direct(g, w.x))) < 1e-15

    def test_zero_field(self):
        g = get_grid(4)
        assert not nonlinearity_fft(g, g.zeros()).any()

    @given(seeds)
    def test_matches_convolution_oracle(self, seed):
        g, x = field(3, seed)
        assert np.allclose(nonlinearity_fft(g, x), conv_oracle(g, x), atol=1e-13)

    def test_physical_finite_differences(self):
        # sign and normalisation against a calculation that never touches Fourier space for products
        g, x = field(3, 7)
        ref = physical_fd_oracle(g, x)
        got = nonlinearity_fft(g, x)
        assert np.linalg.norm(got - ref) < 1e-4 * np.linalg.norm(got)

    def test_fft_vs_direct_n8(self):
        g = get_grid(8)
        rng = np.random.default_rng(8)
        X = random_field(g, rng, 1.0, 20)
        a = nonlinearity_fft(g, X)
        b = nonlinearity_direct(g, X)
        assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-11

    @given(seeds)
    def test_energy_and_enstrophy_neutral(self, seed):
        g, x = field(5, seed)
        b = nonlinearity_fft(g, x)
        scale = np.linalg.norm(x) ** 2 * np.linalg.norm(x * g.ksq)
        assert abs(b @ x) < 1e-12 * scale
        assert abs(b @ (x / g.ksq)) < 1e-12 * scale


class TestSymmetrized:
    @given(seeds)
    def test_polarization(self, seed):
        g, x = field(4, seed)
        assert np.allclose(symmetrized_fft(g, x, x), 2 * nonlinearity_fft(g, x), atol=1e-13)

    @given(seeds, seeds)
    def test_symmetric(self, s1, s2):
        g, x = field(4, s1)
        _, y = field(4, s2)
        assert np.array_equal(symmetrized_direct(g, x, y), symmetrized_direct(g, y, x))
        assert np.allclose(symmetrized_fft(g, x, y), symmetrized_fft(g, y, x), atol=1e-14)

    @given(seeds, st.floats(-3, 3), st.floats(-3, 3))
    def test_bilinear(self, seed, a, b):
        rng = np.random.default_rng(seed)
        g = get_grid(4)
        w, v1, v2 = random_field(g, rng, 1.0, 3)
        lhs = symmetrized_fft(g, w, a * v1 + b * v2)
        rhs = a * symmetrized_fft(g, w, v1) + b * symmetrized_fft(g, w, v2)
        assert np.allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)))

    def test_direct_and_fft_agree(self):
        g, x = field(5, 1)
        _, y = field(5, 2)
        assert np.allclose(symmetrized_fft(g, x, y), symmetrized_direct(g, x, y), atol=1e-13)

    def test_transport(self):
        g, x = field(4, 5)
        _, y = field(4, 6)
        assert np.allclose(transport_fft(g, x, y), transport_direct(g, x, y), atol=1e-13)
        assert np.allclose(transport_fft(g, x, y) + transport_fft(g, y, x), symmetrized_fft(g, x, y), atol=1e-13)

    def test_value_type_grid_check(self):
        a = VorticityField.zeros(get_grid(2))
        b = VorticityField.zeros(get_grid(3))
        with pytest.raises(ValueError):
            symmetrized_nonlinearity(a, b)


class TestLinearization:
    @given(seeds)
    def test_matrix_matches_fft(self, seed):
        g, w = field(4, seed)
        _, xi = field(4, seed + 1)
        assert np.allclose(linearization_matrix(g, w) @ xi, symmetrized_fft(g, w, xi), atol=1e-13)

    @given(seeds)
    def test_adjoint_pairing(self, seed):
        rng = np.random.default_rng(seed)
        g = get_grid(5)
        w, xi, eta = random_field(g, rng, 1.0, 3)
        lhs = eta @ symmetrized_fft(g, w, xi)
        rhs = linearization_adjoint_fft(g, w, eta) @ xi
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-13)


class TestValueType:
    def test_json_roundtrip(self):
        g, x = field(3, 9)
        w = VorticityField(g, x)
        back = VorticityField.from_json(w.to_json())
        assert back.grid == g
        assert np.allclose(back.x, x, atol=1e-15)

    def test_arithmetic(self):
        g, x = field(2, 1)
        w = VorticityField(g, x)
        assert np.allclose((w + w - 0.5 * w).x, 1.5 * x)

    def test_immutable(self):
        g, x = field(2, 1)
        w = VorticityField(g, x)
        with pytest.raises(ValueError):
            w.x[0] = 1.0

    def test_outside_truncation(self):
        with pytest.raises(ValueError):
            VorticityField.from_modes(get_grid(2), {(3, 0): 1.0})
