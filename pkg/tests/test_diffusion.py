import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from liftlab.acceptance import fp_lifted_run
from liftlab.diffusion import (
    FourierSeries,
    Grid,
    LiftedDensity,
    PeriodicField,
    TorusDensity,
    constant_field,
    curl_check,
    density_covariance,
    evolve_fp_lifted,
    evolve_fp_torus,
    gaussian_entropy_bound,
    reconstruct_potential,
    stationary_density,
    torus_epr,
)
from liftlab.diffusion.grid import discrete_affinity
from liftlab.errors import (
    ConfigError,
    CurlObstruction,
    ExcessiveLeak,
    NonPSD,
    StepTooLarge,
    ValidationError,
)
from liftlab.io import load_field

from conftest import FIXTURES

TWO_PI = 2 * np.pi


def field_1d(drift, diffusion, N):
    return PeriodicField.from_json({"dim": 1, "drift": [drift], "diffusion": [[diffusion]], "grid_n": N})


def variable_drift(N):
    return field_1d({"const": 1.0, "sin": [[1, 0.5]]}, {"const": 1.0}, N)


def variable_drift_oracle(x):
    """Stationary law of b = 1 + 0.5 sin(2 pi x), D = 1: rho ~ e^V(x) int_x^{x+1} e^-V, V' = b."""
    V = lambda y: y - 0.5 * np.cos(TWO_PI * y) / TWO_PI
    raw = np.array([np.exp(V(a)) * quad(lambda y: np.exp(-V(y)), a, a + 1, epsabs=1e-14, epsrel=1e-13)[0] for a in x])
    Z = quad(lambda a: np.exp(V(a)) * quad(lambda y: np.exp(-V(y)), a, a + 1, epsabs=1e-14)[0], 0, 1, epsabs=1e-14)[0]
    flux = (1 - np.exp(-1.0)) / Z  # J = b rho - rho' with the normalized rho
    return raw / Z, flux


class TestFieldParsing:
    def test_fixture_roundtrip(self):
        f = load_field(FIXTURES / "gradient_2d.json")
        assert PeriodicField.from_json(f.to_json()) == f

    @pytest.mark.parametrize(
        "obj",
        [
            {"dim": 1, "drift": [{"const": 1.0}], "diffusion": [[{"const": 1.0}]], "colour": 1},
            {"dim": 1, "drift": [{"cos": [[0.5, 1.0]]}], "diffusion": [[{"const": 1.0}]]},
            {"dim": 1, "drift": [{"cos": [[9, 1.0]]}], "diffusion": [[{"const": 1.0}]]},
            {"dim": 1, "drift": [{"const": 1.0}]},
            {"dim": 1, "drift": [{"const": 1.0}], "diffusion": [[{"const": 1.0}]], "grid_n": 2},
        ],
    )
    def test_rejects_malformed(self, obj):
        with pytest.raises(ConfigError):
            PeriodicField.from_json(obj)

    def test_rejects_asymmetric_diffusion(self):
        one, zero = {"const": 1.0}, {"const": 0.0}
        with pytest.raises(ValidationError):
            PeriodicField.from_json({"dim": 2, "drift": [zero, zero], "diffusion": [[one, {"const": 0.3}], [zero, one]]})

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.floats(-1, 1)), max_size=3),
        st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.floats(-1, 1)), max_size=3),
        st.floats(0, 1),
        st.floats(0, 1),
    )
    def test_series_gradient_matches_finite_differences(self, cos, sin, x, y):
        s = FourierSeries(2, 0.3, tuple(((a, b), c) for a, b, c in cos), tuple(((a, b), c) for a, b, c in sin))
        X = np.array([x, y])
        eps = 1e-6
        fd = [(s(X + eps * e) - s(X - eps * e)) / (2 * eps) for e in np.eye(2)]
        np.testing.assert_allclose(s.grad(X), fd, atol=1e-6)


class TestDiscreteAffinity:
    def test_small_cell_limit(self):
        assert discrete_affinity(np.array([1.0]), 1e-4)[0] == pytest.approx(1.0, rel=1e-8)

    def test_cell_peclet_limit(self):
        with pytest.raises(ValidationError):
            discrete_affinity(np.array([2.0]), 1.0)


class TestStationary:
    @pytest.mark.parametrize("dim", [1, 2])
    def test_constant_coefficients_give_uniform(self, dim):
        rho = stationary_density(constant_field(np.linspace(0.5, 1.0, dim), 1.0, 16))
        np.testing.assert_allclose(rho.values, 1.0, atol=1e-10)

    def test_zero_drift_is_inverse_diffusion(self):
        N = 128
        f = field_1d({"const": 0.0}, {"const": 1.0, "cos": [[1, 0.5]]}, N)
        rho = stationary_density(f)
        x = Grid(1, N).centers[:, 0]
        Z = quad(lambda y: 1 / (1 + 0.5 * np.cos(TWO_PI * y)), 0, 1)[0]
        exact = 1 / (1 + 0.5 * np.cos(TWO_PI * x)) / Z
        assert np.abs(rho.values - exact).max() <= 5 * (1 / N) ** 2

    def test_variable_drift_second_order(self):
        errs = []
        for N in (32, 64, 128):
            rho = stationary_density(variable_drift(N))
            exact, _ = variable_drift_oracle(Grid(1, N).centers[:, 0])
            errs.append(np.abs(rho.values - exact).max())
        assert errs[-1] <= 1e-3
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert orders.min() >= 1.8

    def test_gradient_field_is_exp_potential(self):
        f = load_field(FIXTURES / "gradient_2d.json")
        rho = stationary_density(f)
        X = Grid(2, f.grid_n).centers
        g0 = (0.05 * np.cos(TWO_PI * X[:, 0]) + 0.05 * np.sin(TWO_PI * X[:, 1])
              + 0.025 * np.cos(TWO_PI * (X[:, 0] + X[:, 1])))
        exact = np.exp(g0) / (np.exp(g0).sum() / f.grid_n**2)
        assert np.abs(rho.values - exact).max() <= (1 / f.grid_n) ** 2


class TestEntropyProductionRate:
    @pytest.mark.parametrize("b, D, expected", [(1.0, 1.0, 1.0), (2.0, 0.5, 8.0), ((1.0, 0.5), 1.0, 1.25)])
    def test_constant_coefficients(self, b, D, expected):
        f = constant_field(b, D, 256 if np.ndim(b) == 0 else 64)
        assert torus_epr(f, stationary_density(f)) == pytest.approx(expected, rel=2e-3)

    def test_variable_drift_against_quadrature(self):
        _, J = variable_drift_oracle(np.zeros(0))
        V = lambda y: y - 0.5 * np.cos(TWO_PI * y) / TWO_PI
        Z = quad(lambda a: np.exp(V(a)) * quad(lambda y: np.exp(-V(y)), a, a + 1, epsabs=1e-14)[0], 0, 1, epsabs=1e-14)[0]
        inv_rho = quad(lambda a: Z / (np.exp(V(a)) * quad(lambda y: np.exp(-V(y)), a, a + 1, epsabs=1e-14)[0]), 0, 1,
                       epsabs=1e-13)[0]
        exact = J**2 * inv_rho  # int J^2 / (D rho)
        errs = [abs(torus_epr(variable_drift(N), stationary_density(variable_drift(N))) - exact) for N in (64, 128)]
        assert errs[1] <= 1e-4
        assert errs[0] / errs[1] >= 3.5

    def test_equilibrium_is_zero(self):
        f = load_field(FIXTURES / "gradient_2d.json")
        assert abs(torus_epr(f, stationary_density(f))) <= 1e-12

    def test_non_negative_away_from_stationarity(self):
        f = variable_drift(64)
        bump = TorusDensity.from_function(1, 64, lambda X: 1 + 0.9 * np.sin(TWO_PI * X[:, 0]))
        assert torus_epr(f, bump) > 0


class TestPotential:
    def test_curl_of_shear(self):
        rep = curl_check(load_field(FIXTURES / "shear_2d.json"))
        assert rep.max_curl == pytest.approx(TWO_PI, rel=0.01)

    def test_shear_has_no_potential(self):
        with pytest.raises(CurlObstruction) as info:
            reconstruct_potential(load_field(FIXTURES / "shear_2d.json"))
        assert info.value.max_curl == pytest.approx(TWO_PI, rel=0.05)

    def test_gradient_reconstruction(self):
        f = load_field(FIXTURES / "gradient_2d.json")
        pot = reconstruct_potential(f)
        X = Grid(2, f.grid_n).centers
        g0 = (0.05 * np.cos(TWO_PI * X[:, 0]) + 0.05 * np.sin(TWO_PI * X[:, 1])
              + 0.025 * np.cos(TWO_PI * (X[:, 0] + X[:, 1])))
        assert pot.periodic
        assert np.abs(pot.g - (g0 - g0[0])).max() <= (1 / f.grid_n) ** 2
        assert pot.flux_residual <= 1e-6

    def test_constant_drift_has_a_tilted_potential(self):
        pot = reconstruct_potential(constant_field(1.0, 1.0, 256))
        assert not pot.periodic
        assert pot.loop[0] == pytest.approx(1.0, rel=1e-5)
        assert pot.flux_residual <= 1e-12

    def test_1d_fields_are_always_gradients(self):
        assert curl_check(variable_drift(64)).max_curl == 0.0


class TestGaussianBound:
    def test_unit_variance(self):
        assert gaussian_entropy_bound(np.eye(1), 1) == pytest.approx(0.5 * (1 + np.log(2 * np.pi)), abs=1e-15)

    def test_zero_covariance(self):
        assert gaussian_entropy_bound(np.zeros((2, 2)), 2) == float("-inf")

    @pytest.mark.parametrize("cov", [[[1.0, 0.0], [0.0, -1.0]], [[1.0, 0.5], [0.0, 1.0]], [[1.0]]])
    def test_rejects_bad_covariance(self, cov):
        with pytest.raises(NonPSD):
            gaussian_entropy_bound(np.array(cov), 2)

    def test_gaussian_density_nearly_attains_bound(self):
        f0 = LiftedDensity.gaussian(1, 32, 12, 2.0)
        grid = f0.grid
        w = f0.values * grid.cell_volume
        S = -np.sum(w * np.log(f0.values))
        bound = gaussian_entropy_bound(density_covariance(grid, f0.values), 1)
        assert S <= bound and bound - S <= 1e-4

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=36, max_size=36).filter(lambda v: sum(v) > 0.1))
    def test_bound_holds_for_any_density(self, vals):
        grid = Grid(1, 4, 4)
        v = np.array(vals)
        f = v / (v.sum() * grid.cell_volume)
        pos = f > 0
        S = -np.sum(f[pos] * np.log(f[pos])) * grid.cell_volume
        assert S <= gaussian_entropy_bound(density_covariance(grid, f), 1) + 1e-12


@pytest.fixture(scope="module")
def run():
    f = variable_drift(64)
    f0 = TorusDensity.from_function(1, 64, lambda X: np.exp(2 * np.cos(TWO_PI * X[:, 0])))
    return evolve_fp_torus(f, f0, 2.0, every=20)


class TestTorusEvolution:
    def test_mass_conserved(self, run):
        assert np.abs(run.mass - 1).max() <= 1e-12

    def test_decomposition(self, run):
        s = run.series
        assert np.abs(s["e_p"] - s["Qhk_pi"] + s["dF_pi"]).max() <= 1e-8 * max(1.0, s["e_p"].max())

    def test_free_energy_decreases(self, run):
        assert np.diff(run.series["F_pi"]).max() <= 1e-12

    def test_relaxes_to_stationary(self, run):
        assert run.series["F_pi"][-1] <= 1e-8
        assert run.series["e_p"][-1] == pytest.approx(torus_epr(variable_drift(64), run.rho), rel=1e-6)

    def test_gradient_field_relaxes_with_mu(self):
        f = load_field(FIXTURES / "gradient_2d.json")
        f0 = TorusDensity.from_function(2, f.grid_n, lambda X: 1 + 0.5 * np.cos(TWO_PI * X[:, 0]))
        run = evolve_fp_torus(f, f0, 0.2, every=50)
        s = run.series
        assert run.potential is not None
        assert np.abs(s["Qhk_mu"]).max() <= 1e-10
        assert np.abs(s["e_p"] + s["dF_mu"]).max() <= 1e-8

    def test_step_too_large(self):
        f = variable_drift(32)
        with pytest.raises(StepTooLarge):
            evolve_fp_torus(f, TorusDensity.uniform(1, 32), 0.1, dt=0.01)


class TestLiftedEvolution:
    def test_fold_matches_torus_run(self):
        f = variable_drift(16)
        lifted0 = LiftedDensity.gaussian(1, 16, 14, 0.2)
        lifted = evolve_fp_lifted(f, lifted0, 1.0, every=1000)
        torus0 = TorusDensity(lifted0.fold(), 16, 1)
        torus = evolve_fp_torus(f, torus0, 1.0, dt=lifted.dt, every=1000)
        assert np.abs(lifted.final.fold() - torus.final.values).max() <= 1e-10

    def test_small_window_leaks(self):
        f = constant_field(1.0, 1.0, 16)
        with pytest.raises(ExcessiveLeak):
            evolve_fp_lifted(f, LiftedDensity.gaussian(1, 16, 2, 0.3), 5.0, every=20)

    def test_mass_plus_leak_conserved(self):
        run, _ = fp_lifted_run()
        assert np.abs(run.mass - 1).max() <= 1e-12
        assert run.series["lost_mass"][-1] <= 1e-6

    def test_entropy_below_gaussian_bound(self):
        s = fp_lifted_run()[0].series
        assert np.max(s["H"] - s["S_bound"]) <= 1e-12

    def test_energy_slope_and_mu_free_energy(self):
        s = fp_lifted_run()[0].series
        np.testing.assert_allclose(s["F_mu"], s["E"] - s["H"], atol=1e-8)
        assert np.abs(s["Qhk_mu"]).max() <= 1e-9

    def test_entropy_over_time_small_and_decreasing(self):
        s = fp_lifted_run()[0].series
        t, S = s.t, s["H"]
        late = t >= 10.0
        ratio = S[late] / t[late]
        assert np.all(np.diff(ratio) <= 0)
        assert S[-1] / t[-1] <= 0.05
