import math

import numpy as np
import pytest
from scipy import integrate, stats

from ns2dlab.forcing import FORCING_SPANNING
from ns2dlab.integrator import IntegratorConfig, NoiseModel
from ns2dlab.probes import (
    OU_KMAX, TanhTest, _clip_mean, asf_gamma_scan, asf_probe_toy, fit_decomposition, mollified_sign_table,
    nse_coupling_distance, ou_chain_bounds, ou_chain_distance, ou_chain_rates, ou_chain_sample,
    ou_chain_variance, simulate_toy2d,
)
from ns2dlab.spectral import get_grid, random_field


def sde1_gradient(phi, x0, xi, t):
    """Exact directional derivative of the sde1 semigroup by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(80)
    sd = math.sqrt((1 - math.exp(-2 * t)) / 2)
    X = np.stack([x0[0] * math.exp(-t) + sd * nodes, np.full_like(nodes, x0[1] * math.exp(-t))], axis=1)
    g = phi.grad(X) @ (math.exp(-t) * np.asarray(xi))
    return float(weights @ g / weights.sum())


class TestToySystems:
    @pytest.mark.parametrize("xi", [(0.0, 1.0), (1.0, 0.0), (0.6, -0.8)])
    def test_sde1_matches_quadrature(self, xi):
        times = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
        x0 = (0.4, -0.3)
        tab = asf_probe_toy("sde1", x0, times, n_paths=20000, xi=xi, seed=3)
        exact = np.array([abs(sde1_gradient(TanhTest(np.array([0.3, 1.0])), x0, xi, t)) for t in times])
        assert np.all(np.abs(tab.estimate - exact) <= 3 * tab.stderr + 1e-12)
        assert tab.within_bound(2.0)

    def test_sde1_bound_form(self):
        tab = asf_probe_toy("sde1", (0, 0), [0.0, 1.0], n_paths=100)
        assert tab.analytic_bound == pytest.approx(tab.lip_phi * np.exp(-np.array([0.0, 1.0])))

    def test_sde2_tangent_matches_pathwise_difference(self):
        h, t = 1e-5, [0.7, 1.5]
        _, J = simulate_toy2d("sde2", (0.2, 0.5), t, 500, seed=9)
        up, _ = simulate_toy2d("sde2", (0.2 + h, 0.5), t, 500, seed=9)
        dn, _ = simulate_toy2d("sde2", (0.2 - h, 0.5), t, 500, seed=9)
        fd = (up[..., 0] - dn[..., 0]) / (2 * h)
        assert np.allclose(J[..., 0, 0], fd, rtol=1e-6, atol=1e-9)
        assert np.allclose(J[..., 1, 1], np.exp(-np.array(t))[:, None])

    def test_shared_noise_shifts_sde1(self):
        a, _ = simulate_toy2d("sde1", (0.0, 0.0), [1.0], 50, seed=2)
        b, _ = simulate_toy2d("sde1", (1.0, 0.0), [1.0], 50, seed=2)
        assert np.allclose(b[0, :, 0] - a[0, :, 0], math.exp(-1.0))

    def test_unknown_system(self):
        with pytest.raises(ValueError, match="unknown system"):
            asf_probe_toy("sde9", (0, 0), [1.0])
        with pytest.raises(ValueError, match="unknown system"):
            simulate_toy2d("ouchain", (0, 0), [1.0], 2)

    def test_scale_count_checked(self):
        with pytest.raises(ValueError):
            asf_probe_toy("sde1", (0, 0), [1.0, 2.0], epsilons=[0.1])

    def test_distances_shrink_in_time(self):
        tab = asf_probe_toy("sde1", (0, 0), [0.5, 3.0], epsilons=[0.1, 0.1], n_paths=200, xi=(1.0, 0.0),
                            n_coupling=200)
        d = [row[2] for row in tab.distances]
        # with shared noise every path moves by exactly e^-t, so pairing paths is one admissible coupling
        sync = [min(1.0, math.exp(-t) / 0.1) for t in (0.5, 3.0)]
        assert d[0] <= sync[0] + 1e-12 and d[1] <= sync[1] + 1e-12
        assert d[1] < d[0]

    def test_fit_recovers_decay(self):
        t = np.linspace(0, 5, 11)
        fit = fit_decomposition(t, 0.02 + 0.8 * 2.0 * np.exp(-1.3 * t), 1.0, 2.0)
        assert fit["ok"]
        assert fit["delta"] == pytest.approx(1.3, rel=1e-4)
        assert fit["a"] == pytest.approx(0.02, abs=1e-5)

    def test_mollified_sign(self):
        rows = mollified_sign_table([1.0, 0.1, 0.01, 0.001], t=1.0)
        gaps = [r[1] for r in rows]
        slopes = [r[2] for r in rows]
        assert np.all(np.diff(gaps) < 0) and gaps[-1] < 1e-10
        assert slopes == pytest.approx([math.exp(-1) / w for w in (1.0, 0.1, 0.01, 0.001)])

    def test_gamma_scan(self):
        rows = asf_gamma_scan("sde1", (0, 0), [0.0, 0.5, 2.0], t=1.0, eps=0.5, n_paths=100)
        assert rows[0][1] == 0.0
        assert rows[1][1] <= rows[2][1]


class TestOUChain:
    def test_variance_matches_samples(self):
        t = 0.3
        S = ou_chain_sample(np.zeros(2 * OU_KMAX + 1, complex), t, 20000, seed=1)
        var = ou_chain_variance(t)
        emp = S[:, :33].var(axis=0) + S[:, 33:].var(axis=0)
        low = np.abs(np.arange(-OU_KMAX, OU_KMAX + 1)) <= 1
        assert np.allclose(emp[low], var[low], rtol=0.05)

    def test_clip_mean_quadrature(self):
        for mu, s, eps in [(0.2, 0.5, 1.0), (-1.0, 0.1, 0.3), (3.0, 2.0, 0.5)]:
            f = lambda z: min(max(z, 0.0), eps) / eps * stats.norm.pdf(z, mu, s)
            ref = integrate.quad(f, mu - 12 * s, mu + 12 * s, points=[0.0, eps], limit=200)[0]
            assert _clip_mean(mu, s, eps) == pytest.approx(ref, abs=1e-9)
        assert _clip_mean(0.5, 0.0, 1.0) == 0.5

    def test_tv_closed_form(self):
        delta = np.zeros(2 * OU_KMAX + 1, complex)
        delta[OU_KMAX] = 0.3
        t = 0.5
        out = ou_chain_bounds(delta, t, 0.1)
        # k = 0: rate 1, amplitude 1, so each real part has variance (1 - e^-2t)/4
        sd = math.sqrt((1 - math.exp(-2 * t)) / 4)
        gap = 0.3 * math.exp(-t)
        assert out["tv"] == pytest.approx(2 * stats.norm.cdf(gap / sd / 2) - 1, rel=1e-12)
        assert out["mean_gap"] == pytest.approx(gap)

    @pytest.mark.parametrize("kdir", [0, 1, 5, 12])
    @pytest.mark.parametrize("t,eps", [(0.1, 0.01), (1.0, 0.1), (5.0, 0.5)])
    def test_bounds_ordered(self, kdir, t, eps):
        delta = np.zeros(2 * OU_KMAX + 1, complex)
        delta[OU_KMAX + kdir] = 1.0
        out = ou_chain_bounds(delta, t, eps)
        assert 0.0 <= out["lower"] <= min(out["upper"], out["tv"]) + 1e-12

    def test_high_mode_short_time_near_one(self):
        delta = np.zeros(2 * OU_KMAX + 1, complex)
        delta[OU_KMAX + 12] = 1.0
        out = ou_chain_bounds(delta, 0.01, 0.01)
        assert out["tv"] == pytest.approx(1.0) and out["lower"] > 0.9

    def test_decays_in_time(self):
        delta = np.zeros(2 * OU_KMAX + 1, complex)
        delta[OU_KMAX + 3] = 1.0
        ups = [ou_chain_bounds(delta, t, 0.1)["upper"] for t in (1.0, 2.0, 4.0)]
        assert np.all(np.diff(ups) < 0) and ups[-1] < 1e-10

    def test_empirical_between_bounds(self):
        delta = np.zeros(2 * OU_KMAX + 1, complex)
        delta[OU_KMAX] = 0.5
        t, eps = 0.5, 0.2
        out = ou_chain_bounds(delta, t, eps)
        d = ou_chain_distance(delta, t, eps, n=400, seed=4)
        assert out["lower"] - 0.1 <= d <= out["upper"] + 1e-12

    def test_asf_default_direction(self):
        tab = asf_probe_toy("ouchain", None, [0.5, 1.0], n_paths=2000)
        assert np.all(tab.estimate > 0) and tab.within_bound(3.0)
        k, lam, amp = ou_chain_rates()
        assert lam[OU_KMAX] == 1.0 and amp[OU_KMAX] == 1.0 and k[OU_KMAX] == 0


class TestNSEDistance:
    def test_identical_starts(self):
        g = get_grid(2)
        w0 = random_field(g, np.random.default_rng(0), 1.0)
        rows = nse_coupling_distance(g, w0, w0, [0.5, 1.0], [1.0, 0.01], IntegratorConfig(0.3, 0.05),
                                     NoiseModel.uniform(FORCING_SPANNING), 20)
        assert len(rows) == 4 and all(r.distance == 0.0 for r in rows)

    def test_decreasing_in_time(self):
        g = get_grid(2)
        rng = np.random.default_rng(1)
        a, b = random_field(g, rng, 2.0), random_field(g, rng, 2.0)
        rows = nse_coupling_distance(g, a, b, [0.5, 2.0, 5.0], [0.1], IntegratorConfig(0.3, 0.05, seed=3),
                                     NoiseModel.uniform(FORCING_SPANNING), 40)
        d = [r.distance for r in rows]
        assert d[0] >= d[1] >= d[2]

    def test_strong_dissipation_mixes(self):
        g = get_grid(2)
        rng = np.random.default_rng(2)
        a, b = random_field(g, rng, 2.0), random_field(g, rng, 2.0)
        rows = nse_coupling_distance(g, a, b, [5.0], [0.01], IntegratorConfig(2.0, 0.05, seed=5),
                                     NoiseModel.uniform(FORCING_SPANNING), 30)
        assert rows[0].distance < 0.1

    def test_cap_limits_samples(self):
        g = get_grid(2)
        w0 = np.zeros(g.dim)
        rows = nse_coupling_distance(g, w0, w0, [0.2], [1.0], IntegratorConfig(0.3, 0.1),
                                     NoiseModel.uniform(FORCING_SPANNING), 50, cap=10)
        assert rows[0].nsamples == 10

    def test_independent_ensembles(self):
        g = get_grid(2)
        w0 = np.zeros(g.dim)
        rows = nse_coupling_distance(g, w0, w0, [1.0], [0.01], IntegratorConfig(0.3, 0.1),
                                     NoiseModel.uniform(FORCING_SPANNING), 20, common_noise=False)
        assert rows[0].distance > 0.5
