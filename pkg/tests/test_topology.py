import numpy as np
import pytest
from hypothesis import given, settings

from liftlab.chain import ChainSpec
from liftlab.errors import NotAdjacent
from liftlab.io import load_chain
from liftlab.topology import (
    betti_number,
    build_cycle_basis,
    has_global_potential,
    potential_gain,
    winding_vector,
)

from strategies import chains, cyclic_chains
from conftest import FIXTURES


def ring(k, fwd, bwd):
    return ChainSpec.from_rates(k, [(i, (i + 1) % k, fwd, bwd) for i in range(k)])


def test_tree_has_no_cycles():
    spec = ChainSpec.from_rates(4, [(0, 1, 1.0, 2.0), (1, 2, 1.0, 1.0), (1, 3, 3.0, 1.0)])
    basis = build_cycle_basis(spec)
    assert betti_number(spec) == 0 and basis.n == 0
    assert has_global_potential(basis)


def test_biased_ring_gain():
    basis = build_cycle_basis(ring(3, 2.0, 1.0))
    assert basis.n == 1
    # loop 0 -> 1 -> 2 -> 0 collects -log 2 per step; the special edge is oriented low to high
    assert abs(abs(basis.cycle_gains[0]) - 3 * np.log(2)) < 1e-14
    assert not has_global_potential(basis)


def test_two_cycle_fixture():
    spec = load_chain(FIXTURES / "two_cycle_graph.json")
    assert betti_number(spec) == 2
    assert build_cycle_basis(spec).n == 2


def test_detailed_balanced_ring_has_zero_gain():
    spec = ChainSpec.from_rates(3, [(0, 1, 2.0, 1.0), (1, 2, 2.0, 1.0), (0, 2, 4.0, 1.0)])
    assert has_global_potential(build_cycle_basis(spec))


def test_potential_gain_along_loop():
    spec = ring(3, 2.0, 1.0)
    assert potential_gain(spec, [0, 1, 2, 0]) == pytest.approx(-3 * np.log(2), abs=1e-14)
    assert potential_gain(spec, [0, 1, 0]) == 0.0


def test_winding_counts_signed_crossings():
    spec = ring(3, 2.0, 1.0)
    basis = build_cycle_basis(spec)
    s = basis.special_edges[0]
    there = winding_vector(spec, basis, [s.u, s.v])
    back = winding_vector(spec, basis, [s.u, s.v, s.u])
    assert there.tolist() == [1] and back.tolist() == [0]


def test_non_adjacent_step():
    spec = ChainSpec.from_rates(3, [(0, 1, 1.0, 1.0), (1, 2, 1.0, 1.0)])
    basis = build_cycle_basis(spec)
    with pytest.raises(NotAdjacent):
        winding_vector(spec, basis, [0, 2])
    with pytest.raises(NotAdjacent):
        potential_gain(spec, [0, 0])


@settings(max_examples=60, deadline=None)
@given(chains())
def test_betti_matches_basis(spec):
    basis = build_cycle_basis(spec)
    assert basis.n == betti_number(spec) == len(spec.edges) - spec.k + 1
    assert len(basis.tree_edges) == spec.k - 1
    assert basis.tree_potential[0] == 0.0


@settings(max_examples=60, deadline=None)
@given(chains())
def test_tree_potential_is_consistent(spec):
    basis = build_cycle_basis(spec)
    Q = spec.rate_matrix
    for idx in basis.tree_edges:
        e = spec.edges[idx]
        step = np.log(Q[e.j, e.i] / Q[e.i, e.j])
        assert basis.tree_potential[e.j] - basis.tree_potential[e.i] == pytest.approx(step, abs=1e-12)


def tree_path(basis, a, b):
    """Vertex path a -> b inside the BFS tree."""
    def to_root(v):
        out = [v]
        while basis.parent[out[-1]] != -1:
            out.append(basis.parent[out[-1]])
        return out

    up, down = to_root(a), to_root(b)
    common = next(v for v in up if v in set(down))
    return up[: up.index(common) + 1] + down[: down.index(common)][::-1]


@settings(max_examples=60, deadline=None)
@given(cyclic_chains())
def test_cycle_gain_is_loop_sum(spec):
    """Each gain equals the log rate-ratio sum around its fundamental cycle."""
    basis = build_cycle_basis(spec)
    for m, s in enumerate(basis.special_edges):
        loop = [s.u, *tree_path(basis, s.v, s.u)]
        assert loop[1] == s.v and loop[-1] == s.u
        assert potential_gain(spec, loop) == pytest.approx(basis.cycle_gains[m], abs=1e-11)
        w = winding_vector(spec, basis, loop)
        assert w[m] == 1 and np.count_nonzero(w) == 1
