import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_fields.errors import (
    NotARegionOfC,
    NotSeparated,
    UnboundedQuery,
)
from causal_fields.order import (
    Window,
    build_explicit,
    future_domain,
    lattice,
    materialize,
    region_between,
    reverse,
)
from causal_fields.slices import (
    all_slices_category,
    enumerate_slices,
    foliation_category,
    foliation_to_json,
    is_cauchy,
    is_slice,
    make_slice_morphism,
    maximal_slices,
    monoidal_morphism_product,
    pullback_category,
    restrict_to_region,
    reverse_category,
    slice_leads_to,
    slice_to_json,
    space_like_separated,
    tensor_slices,
    validate_foliation,
    validate_slice_category,
)

from helpers import all_subsets, random_dag

CHAIN = build_explicit(["a", "b"], [("a", "b")])
CHAIN3 = build_explicit(["a", "b", "c"], [("a", "b"), ("b", "c")])
FORK = build_explicit(["a", "b", "c"], [("a", "c"), ("b", "c")])


def ev(t, *xs):
    return (t, tuple(xs))


# -- predicates -----------------------------------------------------------------

def test_is_slice_empty():
    assert is_slice(CHAIN, frozenset())


def test_is_slice_related_pair():
    assert not is_slice(CHAIN, {"a", "b"})


def test_is_slice_lattice():
    assert is_slice(lattice(1), {ev(0, 0), ev(0, 2)})


def test_separated_antichain_singletons():
    anti = build_explicit(["a", "b"], [])
    assert space_like_separated(anti, {"a"}, {"b"})


def test_separated_chain_fails():
    assert not space_like_separated(CHAIN3, {"a"}, {"c"})


def test_separated_lattice_cone():
    assert space_like_separated(lattice(1), {ev(0, 0)}, {ev(1, 3)})


def test_leads_to_subslice():
    assert slice_leads_to(FORK, {"a", "b"}, {"a"})


def test_leads_to_empty_target():
    assert slice_leads_to(FORK, {"a"}, frozenset())


def test_leads_to_fork():
    assert not slice_leads_to(FORK, {"a"}, {"c"})
    assert slice_leads_to(FORK, {"a", "b"}, {"c"})


# -- tensor -----------------------------------------------------------------------

def test_tensor_unit_law():
    cat = all_slices_category(FORK)
    assert tensor_slices(cat, {"a"}, frozenset()) == {"a"}


def test_tensor_lattice_pair():
    cat = all_slices_category(lattice(1))
    assert tensor_slices(cat, {ev(0, 0)}, {ev(0, 2)}) == {ev(0, 0), ev(0, 2)}


def test_tensor_not_separated():
    cat = all_slices_category(CHAIN3)
    with pytest.raises(NotSeparated):
        tensor_slices(cat, {"a"}, {"c"})


def test_tensor_associative_commutative():
    anti = build_explicit(["a", "b", "c"], [])
    cat = all_slices_category(anti)
    ab_c = tensor_slices(cat, tensor_slices(cat, {"a"}, {"b"}), {"c"})
    a_bc = tensor_slices(cat, {"a"}, tensor_slices(cat, {"b"}, {"c"}))
    assert ab_c == a_bc == {"a", "b", "c"}
    assert tensor_slices(cat, {"a"}, {"b"}) == tensor_slices(cat, {"b"}, {"a"})


def test_morphism_product():
    anti = build_explicit(["a", "b", "c", "d"], [("a", "c"), ("b", "d")])
    cat = all_slices_category(anti)
    m1 = make_slice_morphism(anti, {"a"}, {"c"})
    m2 = make_slice_morphism(anti, {"b"}, {"d"})
    prod = monoidal_morphism_product(cat, m1, m2)
    assert prod.source == {"a", "b"} and prod.target == {"c", "d"}


def test_morphism_product_identities():
    anti = build_explicit(["a", "b"], [])
    cat = all_slices_category(anti)
    m1 = make_slice_morphism(anti, {"a"}, {"a"})
    m2 = make_slice_morphism(anti, {"b"}, {"b"})
    prod = monoidal_morphism_product(cat, m1, m2)
    assert prod.source == prod.target == {"a", "b"}


def test_morphism_product_discards():
    anti = build_explicit(["a", "b"], [])
    cat = all_slices_category(anti)
    m1 = make_slice_morphism(anti, {"a"}, frozenset())
    m2 = make_slice_morphism(anti, {"b"}, frozenset())
    prod = monoidal_morphism_product(cat, m1, m2)
    assert prod.source == {"a", "b"} and prod.target == frozenset()


# -- enumeration ---------------------------------------------------------------------

def test_enumerate_two_chain():
    got = sorted(enumerate_slices(CHAIN), key=sorted)
    assert got == [frozenset(), frozenset({"a"}), frozenset({"b"})]
    assert sorted(maximal_slices(CHAIN), key=sorted) == [frozenset({"a"}), frozenset({"b"})]


def test_enumerate_two_antichain():
    anti = build_explicit(["a", "b"], [])
    assert len(list(enumerate_slices(anti))) == 4
    assert list(maximal_slices(anti)) == [frozenset({"a", "b"})]


def test_enumerate_fork_maximal():
    got = sorted(maximal_slices(FORK), key=sorted)
    assert got == [frozenset({"a", "b"}), frozenset({"c"})]


def test_enumerate_unique():
    omega = random_dag(np.random.default_rng(3), max_events=7, p=0.3)
    got = list(enumerate_slices(omega))
    assert len(got) == len(set(got))
    for s in got:
        assert is_slice(omega, s)


def test_enumerate_lattice_needs_window():
    with pytest.raises(UnboundedQuery):
        list(enumerate_slices(lattice(1)))


def test_every_slice_extends_to_maximal():
    omega = random_dag(np.random.default_rng(4), max_events=7, p=0.3)
    maxes = list(maximal_slices(omega))
    for s in enumerate_slices(omega):
        assert any(s <= m for m in maxes)


# -- cauchy + foliations ------------------------------------------------------------------

def test_cauchy_fork():
    assert is_cauchy(FORK, {"a", "b"})
    assert is_cauchy(FORK, {"c"})
    assert not is_cauchy(FORK, {"a"})


def test_cauchy_empty_on_nonempty_order():
    assert not is_cauchy(FORK, frozenset())


def test_cauchy_lattice_constant_time():
    win = Window(0, 2, (-2,), (2,))
    d1 = lattice(1)
    leaf = frozenset((1, (x,)) for x in (-1, 1))
    assert is_cauchy(d1, leaf, win)


def test_validate_foliation_lattice_window():
    win = Window(0, 3, (-3,), (3,))
    d1 = lattice(1)
    fin = materialize(d1, win)
    leaves = [
        frozenset(e for e in fin.events if e[0] == t)
        for t in range(4)
    ]
    rep = validate_foliation(d1, leaves, win)
    assert rep.ok


def test_validate_foliation_duplicate_leaf_fails():
    rep = validate_foliation(FORK, [{"a", "b"}, {"a", "b"}, {"c"}])
    assert not rep.ok
    assert any("disjoint" in v["witness"]["reason"] for v in rep.violations)


def test_validate_foliation_fork():
    assert validate_foliation(FORK, [{"a", "b"}, {"c"}]).ok


def test_foliation_category_members():
    cat = foliation_category(FORK, [{"a", "b"}, {"c"}])
    members = sorted(cat.object_list(), key=sorted)
    assert members == sorted(
        [frozenset(), frozenset({"a"}), frozenset({"b"}), frozenset({"a", "b"}), frozenset({"c"})],
        key=sorted,
    )
    assert frozenset() in cat


def test_foliation_category_common_leaf_rule():
    cat = foliation_category(FORK, [{"a", "b"}, {"c"}])
    assert cat.tensor_defined({"a"}, {"b"})
    assert not cat.tensor_defined({"a"}, {"c"})


def test_validate_slice_category_all_slices():
    for omega in (CHAIN3, FORK):
        assert validate_slice_category(all_slices_category(omega)).ok


def test_validate_slice_category_foliation():
    cat = foliation_category(FORK, [{"a", "b"}, {"c"}])
    assert validate_slice_category(cat).ok


def test_validate_slice_category_missing_empty():
    cat = all_slices_category(FORK)
    broken = type(cat)(
        order=cat.order,
        contains=lambda s: bool(s) and cat.contains(s),
        product_rule=cat.product_rule,
        objects=lambda: [o for o in cat.object_list() if o],
        label="broken",
    )
    rep = validate_slice_category(broken)
    assert not rep.ok
    assert any("empty" in v["witness"]["reason"] for v in rep.violations)


# -- restriction ------------------------------------------------------------------------------

def test_restrict_to_whole_order():
    cat = all_slices_category(FORK)
    sub = restrict_to_region(cat, {"a", "b", "c"})
    assert sorted(sub.object_list(), key=sorted) == sorted(cat.object_list(), key=sorted)


def test_restrict_to_diamond():
    cat = all_slices_category(FORK)
    box = region_between(FORK, {"a"}, {"c"})
    sub = restrict_to_region(cat, box)
    assert sorted(sub.object_list(), key=sorted) == sorted(
        [frozenset(), frozenset({"a"}), frozenset({"c"})], key=sorted
    )
    assert validate_slice_category(sub).ok


def test_restrict_to_empty_region():
    cat = all_slices_category(FORK)
    sub = restrict_to_region(cat, frozenset())
    assert sub.object_list() == [frozenset()]


def test_restrict_rejects_non_region():
    cat = foliation_category(CHAIN3, [{"a"}, {"b"}, {"c"}])
    with pytest.raises(NotARegionOfC):
        restrict_to_region(cat, {"a", "c"})


def test_restriction_passes_validation_on_random_orders():
    rng = np.random.default_rng(9)
    for _ in range(10):
        omega = random_dag(rng, max_events=6, p=0.35)
        cat = all_slices_category(omega)
        events = list(omega.events)
        x = events[int(rng.integers(len(events)))]
        y = events[int(rng.integers(len(events)))]
        box = region_between(omega, {x}, {y}) | region_between(omega, {x}, {x}) \
            | region_between(omega, {y}, {y})
        try:
            sub = restrict_to_region(cat, box)
        except NotARegionOfC:
            continue
        assert validate_slice_category(sub).ok


# -- reversal ----------------------------------------------------------------------------------

def test_reverse_category_all_slices():
    cat = all_slices_category(FORK)
    rev = reverse_category(cat)
    assert rev.order == reverse(FORK)
    assert validate_slice_category(rev).ok


def test_reverse_category_foliation_cauchy_duality():
    cat = foliation_category(FORK, [{"a", "b"}, {"c"}])
    rev = reverse_category(cat)
    # for Cauchy leaves, Delta ->> Sigma iff Sigma ->>^rev Delta
    assert slice_leads_to(FORK, frozenset({"a", "b"}), frozenset({"c"}))
    assert slice_leads_to(rev.order, frozenset({"c"}), frozenset({"a", "b"}))


def test_reverse_category_degenerate():
    one = build_explicit(["x"], [])
    cat = all_slices_category(one)
    assert reverse_category(cat) is not None


def test_validate_with_constructive_witnesses():
    from causal_fields.cca import cone_pair_witness, foliation_category_of_lattice

    cat = foliation_category_of_lattice(1)
    pairs = [((0, (0,)), (2, (0,))), ((0, (0,)), (1, (1,))), ((0, (0,)), (0, (0,)))]
    rep = validate_slice_category(
        cat, pair_witnesses=cone_pair_witness(1), event_pairs=pairs
    )
    assert rep.ok


def test_validate_non_enumerable_without_witnesses():
    cat = all_slices_category(lattice(1))
    rep = validate_slice_category(cat)
    assert not rep.ok


# -- pullback categories -------------------------------------------------------------------------

def test_pullback_category_membership():
    from causal_fields.order import OrderMorphism

    anti = build_explicit(["a", "b"], [])
    point = build_explicit(["p"], [])
    f = OrderMorphism(anti, point, {"a": "p", "b": "p"})
    cat = pullback_category(f, all_slices_category(point))
    assert sorted(cat.object_list(), key=sorted) == sorted(
        [frozenset(), frozenset({"a"}), frozenset({"b"}), frozenset({"a", "b"})],
        key=sorted,
    )


# -- json ----------------------------------------------------------------------------------------

def test_slice_json():
    assert slice_to_json(frozenset({"b", "a"})) == {"events": ["a", "b"]}
    assert foliation_to_json([{"a"}, {"b"}]) == {"leaves": [["a"], ["b"]]}


# -- property tests --------------------------------------------------------------------------------

dags = st.builds(
    lambda seed, p: random_dag(np.random.default_rng(seed), max_events=6, p=p),
    st.integers(0, 10_000),
    st.floats(0.1, 0.6),
)


@given(dags)
@settings(max_examples=40, deadline=None)
def test_prop_leads_to_reflexive_transitive(omega):
    slices = list(enumerate_slices(omega))
    for s in slices:
        assert slice_leads_to(omega, s, s)
    for a, b, c in itertools.product(slices[:12], repeat=3):
        if slice_leads_to(omega, a, b) and slice_leads_to(omega, b, c):
            assert slice_leads_to(omega, a, c)


@given(dags)
@settings(max_examples=40, deadline=None)
def test_prop_separation_stable_under_evolution(omega):
    slices = [s for s in enumerate_slices(omega) if s]
    for sigma, gamma in itertools.product(slices[:10], repeat=2):
        if not space_like_separated(omega, sigma, gamma):
            continue
        dplus = future_domain(omega, sigma)
        for sp in all_subsets(dplus, max_size=2):
            if slice_leads_to(omega, sigma, sp):
                assert space_like_separated(omega, sp, gamma)


@given(dags, st.integers(0, 100_000))
@settings(max_examples=30, deadline=None)
def test_prop_foliation_category_is_slice_category(omega, seed):
    # build a layered foliation greedily: repeatedly peel minimal elements
    layers = []
    remaining = set(omega.events)
    sub = omega
    while remaining:
        layer = frozenset(sub.minimal_elements())
        layers.append(layer)
        remaining -= layer
        if not remaining:
            break
        sub = omega.suborder(remaining)
    rep = validate_foliation(omega, layers)
    if not rep.ok:
        return  # peeled layers of an arbitrary DAG need not be Cauchy
    cat = foliation_category(omega, layers)
    assert validate_slice_category(cat).ok


@given(dags)
@settings(max_examples=30, deadline=None)
def test_prop_cauchy_unique_intersection(omega):
    from causal_fields.order import maximal_chains

    for sigma in maximal_slices(omega):
        if not is_cauchy(omega, sigma):
            continue
        for chain in maximal_chains(omega):
            assert len(set(chain) & sigma) == 1
