import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftlab.chain import (
    ChainSpec,
    as_distribution,
    balance_residual,
    base_epr,
    base_thermo,
    evolve_base,
    relative_entropy,
    stationary_distribution,
    stationary_epr,
    validate_chain,
)
from liftlab.errors import (
    Disconnected,
    DuplicateEdge,
    RateSignMismatch,
    SelfLoop,
    StepTooLarge,
    SupportMismatch,
    ValidationError,
)

from strategies import chains, distributions

LOG2, LOG3 = np.log(2), np.log(3)


def ring(k, fwd, bwd):
    return ChainSpec.from_rates(k, [(i, (i + 1) % k, fwd, bwd) for i in range(k)])


def brute_epr(spec, p):
    """Independent evaluation over ordered pairs: (1/2) sum (p_i q_ij - p_j q_ji) log(p_i q_ij / p_j q_ji)."""
    Q = spec.rate_matrix
    total = 0.0
    for i in range(spec.k):
        for j in range(spec.k):
            if i != j and Q[i, j] > 0:
                a, b = p[i] * Q[i, j], p[j] * Q[j, i]
                total += 0.5 * (a - b) * np.log(a / b)
    return total


class TestValidation:
    def test_symmetric_two_state_is_valid(self):
        validate_chain(ChainSpec.from_rates(2, [(0, 1, 1.0, 1.0)]))

    def test_one_sided_rate(self):
        with pytest.raises(RateSignMismatch):
            validate_chain(ChainSpec.from_rates(3, [(0, 1, 1.0, 0.0), (1, 2, 1.0, 1.0)]))

    def test_disjoint_edges(self):
        with pytest.raises(Disconnected):
            validate_chain(ChainSpec.from_rates(4, [(0, 1, 1.0, 1.0), (2, 3, 1.0, 1.0)]))

    def test_self_loop(self):
        with pytest.raises(SelfLoop):
            validate_chain(ChainSpec.from_rates(2, [(0, 1, 1.0, 1.0), (1, 1, 1.0, 1.0)]))

    def test_duplicate_edge_in_either_orientation(self):
        with pytest.raises(DuplicateEdge):
            validate_chain(ChainSpec.from_rates(2, [(0, 1, 1.0, 1.0), (1, 0, 2.0, 2.0)]))

    def test_reorientation_swaps_rates(self):
        spec = ChainSpec.from_rates(2, [(1, 0, 3.0, 5.0)])
        e = spec.edges[0]
        assert (e.i, e.j, e.q_ij, e.q_ji) == (0, 1, 5.0, 3.0)

    def test_distribution_checks(self):
        with pytest.raises(ValidationError):
            as_distribution([0.5, 0.6])
        with pytest.raises(ValidationError):
            as_distribution([1.5, -0.5])


class TestStationary:
    def test_two_state_symmetric(self):
        pi = stationary_distribution(ChainSpec.from_rates(2, [(0, 1, 1.0, 1.0)]))
        np.testing.assert_allclose(pi, [0.5, 0.5], atol=1e-14)

    def test_two_state_biased(self):
        pi = stationary_distribution(ChainSpec.from_rates(2, [(0, 1, 2.0, 1.0)]))
        np.testing.assert_allclose(pi, [1 / 3, 2 / 3], atol=1e-14)

    def test_biased_ring_is_uniform(self):
        np.testing.assert_allclose(stationary_distribution(ring(3, 2.0, 1.0)), np.full(3, 1 / 3), atol=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(chains())
    def test_balance_residual_vanishes(self, spec):
        pi = stationary_distribution(spec)
        assert abs(pi.sum() - 1) < 1e-12
        assert np.all(pi > 0)
        assert np.abs(balance_residual(spec, pi)).max() < 1e-12 * max(1.0, spec.exit_rates.max())


class TestEvolution:
    @settings(max_examples=25, deadline=None)
    @given(chains(max_k=5))
    def test_stationary_start_does_not_move(self, spec):
        pi = stationary_distribution(spec)
        _, traj = evolve_base(spec, pi, 5.0, spec.max_step())
        assert np.abs(traj - pi).max() <= 1e-10

    def test_biased_ring_converges(self):
        _, traj = evolve_base(ring(3, 2.0, 1.0), [1.0, 0, 0], 20.0, 0.01)
        assert np.abs(traj[-1] - 1 / 3).max() <= 1e-8

    def test_symmetric_two_state_limit(self):
        _, traj = evolve_base(ChainSpec.from_rates(2, [(0, 1, 1.0, 1.0)]), [1.0, 0.0], 20.0, 0.05)
        np.testing.assert_allclose(traj[-1], [0.5, 0.5], atol=1e-12)

    def test_matches_matrix_exponential(self):
        from scipy.linalg import expm

        spec = ring(4, 3.0, 1.0)
        p0 = np.array([0.7, 0.1, 0.1, 0.1])
        _, traj = evolve_base(spec, p0, 2.0, 0.005)
        exact = expm(2.0 * spec.forward_generator().toarray()) @ p0
        assert np.abs(traj[-1] - exact).max() < 1e-10

    def test_step_bound(self):
        spec = ring(3, 2.0, 1.0)
        with pytest.raises(StepTooLarge):
            evolve_base(spec, [1.0, 0, 0], 1.0, 2 * spec.max_step())

    @settings(max_examples=25, deadline=None)
    @given(chains(max_k=5), st.data())
    def test_mass_and_convergence(self, spec, data):
        p0 = data.draw(distributions(spec.k))
        times, traj = evolve_base(spec, p0, 3.0, spec.max_step(), every=5)
        assert np.abs(traj.sum(axis=1) - 1).max() <= 1e-12
        assert traj.min() >= -1e-14


class TestRelativeEntropy:
    def test_identity(self):
        assert relative_entropy([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_delta_against_uniform(self):
        assert relative_entropy([1.0, 0.0], [0.5, 0.5]) == pytest.approx(LOG2, abs=1e-15)

    def test_against_measure_can_be_negative(self):
        assert relative_entropy([0.5, 0.5], [1.0, 1.0]) == pytest.approx(-LOG2, abs=1e-15)

    def test_support_mismatch(self):
        with pytest.raises(SupportMismatch):
            relative_entropy([0.5, 0.5], [1.0, 0.0])


class TestEntropyProduction:
    def test_detailed_balance_gives_zero(self):
        spec = ChainSpec.from_rates(3, [(0, 1, 1.0, 2.0), (1, 2, 2.0, 1.0), (0, 2, 1.0, 1.0)])
        assert abs(stationary_epr(spec)) < 1e-14

    def test_biased_three_ring(self):
        assert stationary_epr(ring(3, 2.0, 1.0)) == pytest.approx(LOG2, abs=1e-10)
        assert base_epr(ring(3, 2.0, 1.0), np.full(3, 1 / 3)) == pytest.approx(LOG2, abs=1e-14)

    def test_two_state_at_uniform(self):
        spec = ChainSpec.from_rates(2, [(0, 1, 2.0, 1.0)])
        assert base_epr(spec, [0.5, 0.5]) == pytest.approx(0.5 * LOG2, abs=1e-15)

    def test_biased_four_ring(self):
        assert stationary_epr(ring(4, 3.0, 1.0)) == pytest.approx(2 * LOG3, abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(chains(), st.data())
    def test_matches_ordered_pair_formula(self, spec, data):
        p = data.draw(distributions(spec.k))
        assert base_epr(spec, p) == pytest.approx(brute_epr(spec, p), rel=1e-12, abs=1e-14)


class TestThermoSample:
    def test_at_stationarity(self):
        spec = ring(3, 2.0, 1.0)
        s = base_thermo(spec, np.full(3, 1 / 3))
        assert abs(s.F) < 1e-15 and abs(s.dF_dt) < 1e-14
        assert s.q_hk == pytest.approx(s.e_p, abs=1e-14)

    def test_delta_on_ring_signs(self):
        s = base_thermo(ring(3, 2.0, 1.0), [1.0, 0.0, 0.0])
        assert s.e_p >= 0 and s.q_hk >= 0 and -s.dF_dt >= 0
        assert s.decomposition_error() <= 1e-8 * max(1.0, s.e_p)

    @settings(max_examples=60, deadline=None)
    @given(chains(), st.data())
    def test_detailed_balance_has_no_housekeeping_heat(self, spec, data):
        # force detailed balance: q_ji = q_ij * w_i / w_j for a random positive w
        w = np.exp(np.array(data.draw(st.lists(st.floats(-1, 1), min_size=spec.k, max_size=spec.k))))
        db = ChainSpec.from_rates(spec.k, [(e.i, e.j, e.q_ij, e.q_ij * w[e.i] / w[e.j]) for e in spec.edges])
        p = data.draw(distributions(spec.k))
        assert abs(base_thermo(db, p).q_hk) <= 1e-10

    @settings(max_examples=60, deadline=None)
    @given(chains(), st.data())
    def test_decomposition_and_signs(self, spec, data):
        p = data.draw(distributions(spec.k))
        s = base_thermo(spec, p)
        assert s.decomposition_error() <= 1e-8
        assert s.e_p >= -1e-10 and s.q_hk >= -1e-10 and -s.dF_dt >= -1e-10

    @settings(max_examples=20, deadline=None)
    @given(chains(max_k=5), st.data())
    def test_free_energy_decreases(self, spec, data):
        p0 = data.draw(distributions(spec.k))
        _, traj = evolve_base(spec, p0, 2.0, spec.max_step(), every=2)
        pi = stationary_distribution(spec)
        F = np.array([relative_entropy(p, pi) for p in traj])
        assert np.diff(F).max() <= 1e-10
