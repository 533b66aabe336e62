"""Causal field theories and machine checks of their laws.

A field theory assigns a backend object to each slice of a slice category
and a backend morphism to each slice ordering, and is supposed to be a
(partially) monoidal functor.  Nothing here assumes it is one: the
``check_*`` functions evaluate the laws on samples and report violations.

Slot bookkeeping: each theory exposes ``slots(sigma)``, the list of labels
of the tensor factors of the object assigned to ``sigma``.  The monoidal
product of slices is the *merged* canonical object, so the monoidality
checks wire the compared morphisms through the induced slot permutations.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import process as P
from .errors import NonEnumerableRegion, NotAReversal, NotCauchy, NotInCategory
from .order import region_between
from .report import Report
from .slices import Slice, SliceCategory

DEFAULT_TOL = 1e-10


def _max_workers() -> int:
    try:
        return max(1, int(os.environ.get("CAUSAL_FIELDS_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    workers = _max_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# field theories
# ---------------------------------------------------------------------------

@dataclass
class FieldTheory:
    """A slice-indexed assignment of objects and morphisms.

    ``obj_fn`` and ``mor_fn`` must be pure functions of their slice
    arguments.  ``slots_fn`` returns the per-factor labels of an object in
    the same order as its factor list.
    """

    category: SliceCategory
    backend: str
    obj_fn: Callable[[Slice], P.ProcObject]
    mor_fn: Callable[[Slice, Slice], P.ProcMorphism]
    slots_fn: Callable[[Slice], list] | None = None
    label: str = "field-theory"
    _objs: dict = field(default_factory=dict, repr=False)
    _mors: dict = field(default_factory=dict, repr=False)

    def obj(self, sigma: Iterable) -> P.ProcObject:
        sigma = frozenset(sigma)
        if sigma not in self._objs:
            self._objs[sigma] = self.obj_fn(sigma)
        return self._objs[sigma]

    def mor(self, sigma: Iterable, gamma: Iterable, check: bool = True) -> P.ProcMorphism:
        sigma, gamma = frozenset(sigma), frozenset(gamma)
        key = (sigma, gamma)
        if key not in self._mors:
            if check and not self.category.hom(sigma, gamma):
                raise NotInCategory(f"no morphism {sorted(sigma, key=repr)} ->> {sorted(gamma, key=repr)}")
            self._mors[key] = self.mor_fn(sigma, gamma)
        return self._mors[key]

    def slots(self, sigma: Iterable) -> list:
        if self.slots_fn is None:
            raise NotInCategory(f"theory {self.label!r} exposes no slot labels")
        return self.slots_fn(frozenset(sigma))

    def discard_effect(self, sigma: Iterable) -> P.ProcMorphism:
        """The induced environment effect: the image of sigma ->> empty."""
        return self.mor(sigma, frozenset())


def merge_permutations(theory: FieldTheory, sigma: Slice, gamma: Slice):
    """Wiring between the merged object of a union slice and the
    concatenated tensor object.

    Returns (p_split, p_merge): p_split maps the merged object to the
    concatenation slots(sigma) + slots(gamma); p_merge is its inverse.
    """
    merged = theory.slots(sigma | gamma)
    concat = theory.slots(sigma) + theory.slots(gamma)
    obj_merged = theory.obj(sigma | gamma)
    split = tuple(merged.index(s) for s in concat)
    p_split = P.permute_factors(obj_merged, split)
    obj_concat = p_split.cod
    unsplit = tuple(concat.index(s) for s in merged)
    p_merge = P.permute_factors(obj_concat, unsplit)
    return p_split, p_merge


# ---------------------------------------------------------------------------
# functoriality and monoidality
# ---------------------------------------------------------------------------

def check_functoriality(
    theory: FieldTheory,
    triples: Sequence[tuple[Slice, Slice, Slice]],
    tol: float = DEFAULT_TOL,
) -> Report:
    """Psi(id) = id and Psi(g . f) = Psi(g) . Psi(f) on the given chains."""
    report = Report("functoriality")
    seen = set()

    def one(chain):
        sigma, gamma, delta = (frozenset(s) for s in chain)
        direct = theory.mor(sigma, delta)
        step = P.compose(theory.mor(gamma, delta), theory.mor(sigma, gamma))
        return chain, P.deviation(step, direct)

    for chain, dev in _map(one, triples):
        report.count()
        if dev > tol:
            report.record({"chain": chain, "law": "composition"}, dev)
        for s in chain:
            seen.add(frozenset(s))
    for s in seen:
        report.count()
        dev = P.deviation(theory.mor(s, s), P.identity(theory.obj(s)))
        if dev > tol:
            report.record({"slice": s, "law": "identity"}, dev)
    return report


def check_monoidality(
    theory: FieldTheory,
    quads: Sequence[tuple[Slice, Slice, Slice, Slice]],
    tol: float = DEFAULT_TOL,
) -> Report:
    """Objects and morphisms factorise over separated products.

    Each sample is (sigma, sigma', gamma, gamma') with sigma ->> sigma',
    gamma ->> gamma' and both products defined.
    """
    report = Report("monoidality")

    def one(quad):
        sigma, sigma_p, gamma, gamma_p = (frozenset(s) for s in quad)
        f = theory.mor(sigma, sigma_p)
        g = theory.mor(gamma, gamma_p)
        p_split, _ = merge_permutations(theory, sigma, gamma)
        _, p_merge_out = merge_permutations(theory, sigma_p, gamma_p)
        wired = P.compose_all(p_split, P.tensor_mor(f, g), p_merge_out)
        union_mor = theory.mor(sigma | gamma, sigma_p | gamma_p)
        dev = P.deviation(wired, union_mor)
        obj_ok = sorted(theory.slots(sigma | gamma)) == sorted(
            theory.slots(sigma) + theory.slots(gamma)
        ) and p_split.cod == P.tensor_obj(theory.obj(sigma), theory.obj(gamma))
        return quad, dev, obj_ok

    for quad, dev, obj_ok in _map(one, quads):
        report.count()
        if not obj_ok:
            report.record({"quad": quad, "law": "object equation"}, float("nan"))
        if dev > tol:
            report.record({"quad": quad, "law": "morphism factorisation"}, dev)
    return report


def check_environment(
    theory: FieldTheory,
    morphisms: Sequence[tuple[Slice, Slice]],
    products: Sequence[tuple[Slice, Slice]],
    tol: float = DEFAULT_TOL,
) -> Report:
    """The no-signalling equations of the induced discard family:
    compatibility with evolution and with the partial products."""
    report = Report("no-signalling")

    def evo(pair):
        sigma, gamma = (frozenset(s) for s in pair)
        lhs = P.compose(theory.discard_effect(gamma), theory.mor(sigma, gamma))
        return pair, P.deviation(lhs, theory.discard_effect(sigma))

    def prod(pair):
        sigma, gamma = (frozenset(s) for s in pair)
        p_split, _ = merge_permutations(theory, sigma, gamma)
        tensored = P.compose(
            P.tensor_mor(theory.discard_effect(sigma), theory.discard_effect(gamma)),
            p_split,
        )
        return pair, P.deviation(tensored, theory.discard_effect(sigma | gamma))

    for pair, dev in _map(evo, morphisms):
        report.count()
        if dev > tol:
            report.record({"pair": pair, "law": "discard after evolution"}, dev)
    for pair, dev in _map(prod, products):
        report.count()
        if dev > tol:
            report.record({"pair": pair, "law": "discard of product"}, dev)
    return report


def discard_family(theory: FieldTheory, slices: Iterable[Slice]) -> dict:
    return {frozenset(s): theory.discard_effect(s) for s in slices}


# ---------------------------------------------------------------------------
# regions of the category, state families, the presheaf of states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CategoryRegion:
    """A region of a slice category, kept as its generating family of
    bounded regions (pairs of member slices)."""

    generators: tuple[tuple[Slice, Slice], ...]

    @staticmethod
    def bounded(sigma: Iterable, gamma: Iterable) -> "CategoryRegion":
        return CategoryRegion(((frozenset(sigma), frozenset(gamma)),))

    def union(self, other: "CategoryRegion") -> "CategoryRegion":
        return CategoryRegion(self.generators + other.generators)

    def events(self, order) -> frozenset:
        out: set = set()
        for sigma, gamma in self.generators:
            out |= region_between(order, sigma, gamma)
        return frozenset(out)

    def includes(self, other: "CategoryRegion", order) -> bool:
        return other.events(order) <= self.events(order)


@dataclass
class StateFamily:
    """A region plus one state per member slice inside it."""

    region: CategoryRegion
    states: dict

    def state(self, sigma: Iterable) -> P.ProcState:
        return self.states[frozenset(sigma)]

    def slices(self) -> list:
        return list(self.states)


def region_slices(theory: FieldTheory, region: CategoryRegion) -> list:
    events = region.events(theory.category.order)
    if not isinstance(events, frozenset) or len(events) > 1 << 14:
        raise NonEnumerableRegion("region too large to enumerate")
    return theory.category.slices_within(events)


def push_forward_family(
    theory: FieldTheory,
    region: CategoryRegion,
    sigma: Iterable,
    rho: P.ProcState,
) -> StateFamily:
    """The family obtained by evolving one state to every slice in the
    region; requires sigma ->> every member slice."""
    sigma = frozenset(sigma)
    states = {}
    for delta in region_slices(theory, region):
        if not theory.category.hom(sigma, delta):
            raise NotInCategory(
                f"{sorted(sigma, key=repr)} does not lead to {sorted(delta, key=repr)}"
            )
        states[delta] = P.apply(theory.mor(sigma, delta), rho)
    return StateFamily(region, states)


def is_stable_family(
    theory: FieldTheory,
    family: StateFamily,
    tol: float = DEFAULT_TOL,
) -> bool:
    """Whether the family is stable under the action of the theory on all
    slice orderings inside its region."""
    slices = family.slices()
    for delta, delta_p in itertools.product(slices, repeat=2):
        if not theory.category.hom(delta, delta_p):
            continue
        pushed = P.apply(theory.mor(delta, delta_p), family.state(delta))
        if not P.states_equal(pushed, family.state(delta_p), tol):
            return False
    return True


def restrict_states(
    theory: FieldTheory,
    sub_region: CategoryRegion,
    family: StateFamily,
) -> StateFamily:
    """The presheaf restriction map: component-wise reindexing of a stable
    family along an inclusion of regions."""
    order = theory.category.order
    if not CategoryRegion(family.region.generators).includes(sub_region, order):
        raise NotInCategory("sub region is not included in the family's region")
    keep = set(region_slices(theory, sub_region))
    states = {s: family.states[s] for s in family.states if s in keep}
    return StateFamily(sub_region, states)


# ---------------------------------------------------------------------------
# reversal and global states
# ---------------------------------------------------------------------------

def zigzag_composite(
    theory: FieldTheory,
    reversal: FieldTheory,
    chain: Sequence[Slice],
) -> P.ProcMorphism:
    """The image of an alternating chain: forward steps through the theory,
    odd steps through the reversal."""
    chain = [frozenset(s) for s in chain]
    out = None
    for i, (a, b) in enumerate(itertools.pairwise(chain)):
        step = theory.mor(a, b) if i % 2 == 0 else reversal.mor(a, b)
        out = step if out is None else P.compose(step, out)
    if out is None:
        out = P.identity(theory.obj(chain[0]))
    return out


def check_reversal(
    theory: FieldTheory,
    reversal: FieldTheory,
    chain_pairs: Sequence[tuple[Sequence[Slice], Sequence[Slice]]],
    tol: float = DEFAULT_TOL,
) -> Report:
    """Compare the composites of pairs of alternating chains with equal
    endpoints (sound but bounded: the caller fixes the chain lengths)."""
    report = Report("reversal")
    for a, b in chain_pairs:
        a = [frozenset(s) for s in a]
        b = [frozenset(s) for s in b]
        if a[0] != b[0] or a[-1] != b[-1]:
            raise NotAReversal("chain pair endpoints differ")
        for s in itertools.chain(a, b):
            if theory.obj(s) != reversal.obj(s):
                raise NotAReversal("reversal disagrees with the theory on objects")
        report.count()
        dev = P.deviation(
            zigzag_composite(theory, reversal, a),
            zigzag_composite(theory, reversal, b),
        )
        if dev > tol:
            report.record({"chains": (a, b)}, dev)
    return report


@dataclass
class GlobalState:
    """A state on every foliation leaf, determined by one Cauchy datum."""

    theory: FieldTheory
    reversal: FieldTheory | None
    leaf_states: dict

    def state(self, sigma: Iterable) -> P.ProcState:
        """The state on any member slice contained in a stored leaf."""
        sigma = frozenset(sigma)
        if sigma in self.leaf_states:
            return self.leaf_states[sigma]
        for leaf, rho in self.leaf_states.items():
            if sigma <= leaf:
                return P.apply(self.theory.mor(leaf, sigma), rho)
        raise NotInCategory("slice is not contained in any stored leaf")


def global_state_from_cauchy(
    theory: FieldTheory,
    reversal: FieldTheory | None,
    sigma: Iterable,
    rho: P.ProcState,
    leaves: Sequence[Slice],
) -> GlobalState:
    """Reconstruct the state on a family of slices from one datum: future
    slices by evolution, past slices through the reversal.

    A past slice is reconstructible exactly when the reversed category has
    a morphism onto it (for honest Cauchy slices that is the same as the
    forward comparability; for finite windowed slices it further requires
    the target to sit inside the backward cone of the datum, since edge
    data outside that cone is genuinely lost)."""
    sigma = frozenset(sigma)
    if not P.is_normalised_state(rho):
        raise NotCauchy("the Cauchy datum must be a normalised state")
    leaf_states = {}
    for leaf in (frozenset(l) for l in leaves):
        if theory.category.hom(sigma, leaf):
            leaf_states[leaf] = P.apply(theory.mor(sigma, leaf), rho)
        elif theory.category.hom(leaf, sigma) or reversal is not None and reversal.category.hom(sigma, leaf):
            if reversal is None:
                raise NotAReversal("a past slice needs a causal reversal")
            if reversal.obj(leaf) != theory.obj(leaf):
                raise NotAReversal("reversal disagrees with the theory on objects")
            if not reversal.category.hom(sigma, leaf):
                raise NotCauchy(
                    "slice lies outside the backward cone of the datum "
                    "(not reconstructible from finite data)"
                )
            leaf_states[leaf] = P.apply(reversal.mor(sigma, leaf), rho)
        else:
            raise NotCauchy("slice is not comparable with the given slice")
    return GlobalState(theory, reversal, leaf_states)


# ---------------------------------------------------------------------------
# enumeration helpers for finite categories
# ---------------------------------------------------------------------------

def enumerate_hom_pairs(cat: SliceCategory, limit: int | None = None) -> list:
    objs = cat.object_list()
    out = []
    for s, g in itertools.product(objs, repeat=2):
        if cat.hom(s, g):
            out.append((s, g))
            if limit is not None and len(out) >= limit:
                return out
    return out


def enumerate_hom_triples(cat: SliceCategory, limit: int | None = None) -> list:
    pairs = enumerate_hom_pairs(cat)
    by_source: dict = {}
    for s, g in pairs:
        by_source.setdefault(s, []).append(g)
    out = []
    for s, g in pairs:
        for d in by_source.get(g, ()):
            out.append((s, g, d))
            if limit is not None and len(out) >= limit:
                return out
    return out
