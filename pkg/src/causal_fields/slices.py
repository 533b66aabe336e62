"""Slices (finite antichains) and categories of slices.

A slice is represented as a frozenset of events of an ambient causal order.
A slice category bundles the ambient order with a membership predicate and
a partial-product definedness predicate; the ordering between slices is
always ``slice_leads_to`` (containment of the target in the future domain
of dependence of the source).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

from .errors import (
    InvalidFoliation,
    NonEnumerableRegion,
    NotARegionOfC,
    NotInCategory,
    NotReversible,
    NotSeparated,
    UnboundedQuery,
)
from .order import (
    CausalOrder,
    ExplicitOrder,
    Window,
    future_domain,
    materialize,
    maximal_chains,
    region_between,
    reverse,
)
from .report import Report

Slice = frozenset


# ---------------------------------------------------------------------------
# basic predicates
# ---------------------------------------------------------------------------

def is_slice(omega: CausalOrder, a: Iterable) -> bool:
    """An antichain: no two distinct members are causally related."""
    a = list(a)
    for e in a:
        omega.require_event(e)
    return all(
        not omega.leq(x, y)
        for x, y in itertools.combinations(a, 2)
    ) and all(
        not omega.leq(y, x)
        for x, y in itertools.combinations(a, 2)
    )


def space_like_separated(omega: CausalOrder, a: Iterable, b: Iterable) -> bool:
    """A and (future(B) | past(B)) are disjoint; symmetric in A and B."""
    a, b = frozenset(a), frozenset(b)
    return all(
        not omega.leq(x, y) and not omega.leq(y, x)
        for x in a
        for y in b
    )


def slice_leads_to(omega: CausalOrder, sigma: Iterable, gamma: Iterable) -> bool:
    """The slice ordering: gamma lies in the future domain of dependence
    of sigma."""
    sigma, gamma = frozenset(sigma), frozenset(gamma)
    if not gamma:
        return True
    return gamma <= future_domain(omega, sigma)


@dataclass(frozen=True)
class SliceMorphism:
    """A witnessed pair sigma ->> gamma."""

    source: Slice
    target: Slice


def make_slice_morphism(omega: CausalOrder, sigma: Iterable, gamma: Iterable) -> SliceMorphism:
    sigma, gamma = frozenset(sigma), frozenset(gamma)
    if not slice_leads_to(omega, sigma, gamma):
        raise NotInCategory("target is not in the future domain of the source")
    return SliceMorphism(sigma, gamma)


# ---------------------------------------------------------------------------
# slice categories
# ---------------------------------------------------------------------------

@dataclass
class SliceCategory:
    """A category of slices: ambient order + membership + partial product.

    ``objects`` is an optional thunk returning the full (finite) object
    list; predicate-only categories leave it as None.
    """

    order: CausalOrder
    contains: Callable[[Slice], bool]
    product_rule: Callable[[Slice, Slice], bool]
    objects: Callable[[], list] | None = None
    label: str = "slices"

    def __contains__(self, s: Iterable) -> bool:
        return self.contains(frozenset(s))

    def tensor_defined(self, sigma: Iterable, gamma: Iterable) -> bool:
        sigma, gamma = frozenset(sigma), frozenset(gamma)
        return (
            self.contains(sigma)
            and self.contains(gamma)
            and space_like_separated(self.order, sigma, gamma)
            and self.product_rule(sigma, gamma)
        )

    def hom(self, sigma: Iterable, gamma: Iterable) -> bool:
        sigma, gamma = frozenset(sigma), frozenset(gamma)
        return (
            self.contains(sigma)
            and self.contains(gamma)
            and slice_leads_to(self.order, sigma, gamma)
        )

    def object_list(self) -> list:
        if self.objects is None:
            raise UnboundedQuery(f"category {self.label!r} is not enumerable")
        return self.objects()

    def slices_within(self, region_events: Iterable) -> list:
        """All member slices contained in a finite set of events."""
        region_events = frozenset(region_events)
        if self.objects is not None:
            return [o for o in self.object_list() if o <= region_events]
        events = sorted(region_events, key=repr)
        sub = ExplicitOrder(
            events,
            [
                (a, b)
                for a in events
                for b in events
                if a != b and self.order.leq(a, b)
            ],
        )
        return [s for s in enumerate_slices(sub) if self.contains(s)]


def tensor_slices(cat: SliceCategory, sigma: Iterable, gamma: Iterable) -> Slice:
    """The monoidal product: the disjoint union, where defined."""
    sigma, gamma = frozenset(sigma), frozenset(gamma)
    if not (cat.contains(sigma) and cat.contains(gamma)):
        raise NotInCategory("operands are not objects of the category")
    if not space_like_separated(cat.order, sigma, gamma):
        raise NotSeparated("operands are not space-like separated")
    if sigma & gamma:
        raise NotSeparated("operands overlap")
    if not cat.product_rule(sigma, gamma):
        raise NotInCategory("the partial product is undefined in this category")
    out = sigma | gamma
    if not cat.contains(out):
        raise NotInCategory("the union is not an object of the category")
    return out


def monoidal_morphism_product(
    cat: SliceCategory, m1: SliceMorphism, m2: SliceMorphism
) -> SliceMorphism:
    src = tensor_slices(cat, m1.source, m2.source)
    tgt = tensor_slices(cat, m1.target, m2.target)
    return make_slice_morphism(cat.order, src, tgt)


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _finite_view(omega: CausalOrder, window: Window | None) -> ExplicitOrder:
    if omega.is_finite:
        return omega
    if window is None:
        raise UnboundedQuery("lattice orders need a window here")
    return materialize(omega, window)


def enumerate_slices(omega: CausalOrder, window: Window | None = None) -> Iterator[Slice]:
    """Every antichain exactly once (depth-first, canonical event order)."""
    fin = _finite_view(omega, window)
    events = list(fin.events)

    def extend(prefix: list, start: int) -> Iterator[Slice]:
        yield frozenset(prefix)
        for k in range(start, len(events)):
            e = events[k]
            if all(not fin.leq(e, p) and not fin.leq(p, e) for p in prefix):
                yield from extend(prefix + [e], k + 1)

    yield from extend([], 0)


def maximal_slices(omega: CausalOrder, window: Window | None = None) -> Iterator[Slice]:
    """Every maximal antichain: the slices nothing can be added to."""
    fin = _finite_view(omega, window)
    events = list(fin.events)
    for s in enumerate_slices(fin):
        if all(
            any(fin.leq(e, x) or fin.leq(x, e) for x in s)
            for e in events
            if e not in s
        ):
            yield s


def is_cauchy(omega: CausalOrder, sigma: Iterable, window: Window | None = None) -> bool:
    """Whether every inextendible causal path meets the slice."""
    sigma = frozenset(sigma)
    fin = _finite_view(omega, window)
    if not is_slice(fin, sigma):
        return False
    return all(set(c) & sigma for c in maximal_chains(fin))


# ---------------------------------------------------------------------------
# foliations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Foliation:
    order: CausalOrder
    leaves: tuple

    def __iter__(self):
        return iter(self.leaves)


def validate_foliation(
    omega: CausalOrder, leaves: Sequence[Iterable], window: Window | None = None
) -> Report:
    """Check the foliation conditions: each leaf Cauchy, the family totally
    ordered by ->>, covering, and pairwise disjoint."""
    report = Report("foliation")
    leaves = [frozenset(l) for l in leaves]
    fin = _finite_view(omega, window)
    for i, leaf in enumerate(leaves):
        report.count()
        if not is_slice(fin, leaf):
            report.record({"leaf": i, "reason": "not an antichain"})
        elif not is_cauchy(fin, leaf):
            report.record({"leaf": i, "reason": "not a Cauchy slice"})
    for i, j in itertools.combinations(range(len(leaves)), 2):
        report.count()
        fwd = slice_leads_to(fin, leaves[i], leaves[j])
        bwd = slice_leads_to(fin, leaves[j], leaves[i])
        if not (fwd or bwd):
            report.record({"leaves": (i, j), "reason": "not ordered by ->>"})
        if leaves[i] & leaves[j]:
            report.record({"leaves": (i, j), "reason": "not disjoint"})
    covered = frozenset().union(*leaves) if leaves else frozenset()
    for e in fin.events:
        if e not in covered:
            report.record({"event": e, "reason": "not covered by any leaf"})
    report.count()
    return report


def foliation_category(
    omega: CausalOrder, leaves: Sequence[Iterable], window: Window | None = None,
    validate: bool = True,
) -> SliceCategory:
    """The category generated by all subsets of the foliation's leaves.

    The product of two members is defined exactly when they are disjoint
    subsets of one common Cauchy slice.
    """
    leaves = tuple(frozenset(l) for l in leaves)
    if validate:
        rep = validate_foliation(omega, leaves, window)
        if not rep.ok:
            raise InvalidFoliation(str(rep.violations[:3]))

    def contains(s: Slice) -> bool:
        return not s or any(s <= leaf for leaf in leaves)

    def product_rule(a: Slice, b: Slice) -> bool:
        if not a or not b:
            return True
        return not (a & b) and any(a <= leaf and b <= leaf for leaf in leaves)

    def objects() -> list:
        seen = {frozenset()}
        out = [frozenset()]
        for leaf in leaves:
            members = sorted(leaf, key=repr)
            for k in range(1, len(members) + 1):
                for combo in itertools.combinations(members, k):
                    s = frozenset(combo)
                    if s not in seen:
                        seen.add(s)
                        out.append(s)
        return out

    total = sum(2 ** len(l) for l in leaves)
    return SliceCategory(
        order=omega,
        contains=contains,
        product_rule=product_rule,
        objects=objects if total <= 1 << 16 else None,
        label="foliation",
    )


def all_slices_category(omega: CausalOrder, window: Window | None = None) -> SliceCategory:
    """Slice(Omega): every slice, with products defined whenever separated."""

    def contains(s: Slice) -> bool:
        return is_slice(omega, s)

    def product_rule(a: Slice, b: Slice) -> bool:
        return True

    objects = None
    if omega.is_finite:
        def objects() -> list:  # noqa: F811
            return list(enumerate_slices(omega))
    elif window is not None:
        fin = materialize(omega, window)

        def objects() -> list:  # noqa: F811
            return list(enumerate_slices(fin))

    return SliceCategory(omega, contains, product_rule, objects, label="all-slices")


# ---------------------------------------------------------------------------
# validation of the category-of-slices conditions
# ---------------------------------------------------------------------------

def validate_slice_category(
    cat: SliceCategory,
    samples: int | None = None,
    rng=None,
    pair_witnesses: Callable[[object, object], tuple[Slice, Slice]] | None = None,
    event_pairs: Sequence[tuple] | None = None,
) -> Report:
    """Check the three defining conditions of a category of slices.

    (1) every causally related event pair is covered by a hom between
        member slices, (2) members are closed under restriction to bounded
        regions, (3) the partial monoidal structure is respected (the empty
        slice is a member; defined products are separated unions that stay
        in the category).

    Enumerable categories are checked exhaustively unless ``samples`` caps
    the work.  Condition (1) on a non-enumerable category is undecidable by
    search, so the caller must supply ``pair_witnesses``: a constructive
    map sending a related event pair to a witnessing hom, checked on the
    given ``event_pairs``.
    """
    report = Report("slice-category")
    omega = cat.order

    if not cat.contains(frozenset()):
        report.record({"reason": "empty slice is not a member"})
    report.count()

    if cat.objects is None and pair_witnesses is None:
        report.record({"reason": "category is not enumerable and no witnesses supplied"})
        return report

    if pair_witnesses is not None:
        for x, y in event_pairs or ():
            if not omega.leq(x, y):
                continue
            report.count()
            sigma, gamma = (frozenset(s) for s in pair_witnesses(x, y))
            if not (x in sigma and y in gamma and cat.hom(sigma, gamma)):
                report.record({"pair": (x, y), "reason": "witness fails condition (1)"})

    if cat.objects is not None:
        objs = cat.object_list()
        if rng is not None and samples is not None and len(objs) > samples:
            idx = rng.choice(len(objs), size=samples, replace=False)
            objs = [objs[i] for i in idx]
        if omega.is_finite:
            for x in omega.events:
                for y in omega.events:
                    if not omega.leq(x, y):
                        continue
                    report.count()
                    if not any(
                        x in s and y in g and cat.hom(s, g)
                        for s in objs
                        for g in objs
                    ):
                        report.record({"pair": (x, y), "reason": "condition (1) fails"})
        for sigma, gamma, delta in itertools.product(objs, repeat=3):
            report.count()
            boxed = delta & region_between(omega, sigma, gamma)
            if not cat.contains(boxed):
                report.record(
                    {"triple": (sigma, gamma, delta), "reason": "condition (2) fails"}
                )
        for sigma, gamma in itertools.product(objs, repeat=2):
            report.count()
            if cat.tensor_defined(sigma, gamma):
                if not space_like_separated(omega, sigma, gamma):
                    report.record(
                        {"pair": (sigma, gamma), "reason": "product defined but not separated"}
                    )
                elif not cat.contains(sigma | gamma):
                    report.record(
                        {"pair": (sigma, gamma), "reason": "product leaves the category"}
                    )
    else:
        # witness-driven condition (1) only
        report.count()
    return report


# ---------------------------------------------------------------------------
# restriction to regions and reversal
# ---------------------------------------------------------------------------

def restrict_to_region(
    cat: SliceCategory,
    region: Iterable,
    generators: Sequence[tuple[Iterable, Iterable]] | None = None,
) -> SliceCategory:
    """The full subcategory of slices contained in a region of the category.

    The region must be generated by bounded regions between member slices:
    it has to equal the union of those bounded regions, and every causally
    related pair inside it must fit in a single one.  With ``generators``
    the check uses the given slice pairs; otherwise the category must be
    enumerable.
    """
    region = frozenset(region)
    omega = cat.order
    for e in region:
        omega.require_event(e)
    if generators is not None:
        bounded = [
            region_between(omega, frozenset(s), frozenset(g))
            for s, g in generators
        ]
        bounded = [b for b in bounded if b <= region]
    elif cat.objects is not None:
        objs = [o for o in cat.object_list() if o <= region]
        bounded = [
            rb
            for s in objs
            for g in objs
            if (rb := region_between(omega, s, g)) <= region
        ]
    else:
        raise NonEnumerableRegion(
            "restriction of a non-enumerable category needs generating slice pairs"
        )
    union = frozenset().union(*bounded) if bounded else frozenset()
    if union != region:
        raise NotARegionOfC("region is not a union of bounded regions of the category")
    for x in region:
        for y in region:
            if omega.leq(x, y) and not any(x in b and y in b for b in bounded):
                raise NotARegionOfC(
                    f"related pair {x!r} <= {y!r} not inside one bounded region"
                )

    def contains(s: Slice) -> bool:
        return cat.contains(s) and s <= region

    objects = None
    if cat.objects is not None:
        base_objects = cat.object_list

        def objects() -> list:  # noqa: F811
            return [o for o in base_objects() if o <= region]

    # The restriction lives on the region as a causal order in its own
    # right: the slice ordering is recomputed inside the (convex) region.
    if omega.is_finite:
        sub_order = omega.suborder(region)
    else:
        events = sorted(region)
        sub_order = ExplicitOrder(
            events,
            [(a, b) for a in events for b in events if a != b and omega.leq(a, b)],
        )
    return SliceCategory(
        order=sub_order,
        contains=contains,
        product_rule=cat.product_rule,
        objects=objects,
        label=f"{cat.label}|region",
    )


def reverse_category(cat: SliceCategory, check: bool = True) -> SliceCategory:
    """The same objects over the reversed order.

    Reversibility is a property, not a given: for enumerable categories the
    category-of-slices conditions are re-checked on the reverse and a
    failure raises NotReversible.
    """
    rev_order = reverse(cat.order)
    out = SliceCategory(
        order=rev_order,
        contains=cat.contains,
        product_rule=cat.product_rule,
        objects=cat.objects,
        label=f"{cat.label}^rev",
    )
    if check and cat.objects is not None:
        report = validate_slice_category(out)
        if not report.ok:
            raise NotReversible(str(report.violations[:3]))
    return out


# ---------------------------------------------------------------------------
# pullback categories (ordering computed by the generic D+ test only)
# ---------------------------------------------------------------------------

def pullback_category(f, cat: SliceCategory) -> SliceCategory:
    """Slices of the domain suborder lying over some member of ``cat``."""
    from .order import OrderMorphism  # local import to avoid a cycle

    assert isinstance(f, OrderMorphism)

    def contains(s: Slice) -> bool:
        s = frozenset(s)
        if not is_slice(f.dom, s):
            return False
        image = frozenset(f.mapping[e] for e in s)
        if cat.objects is not None:
            return any(image <= sigma for sigma in cat.object_list())
        return cat.contains(image)

    def product_rule(a: Slice, b: Slice) -> bool:
        return True

    objects = None
    if f.dom.is_finite:
        def objects() -> list:  # noqa: F811
            return [s for s in enumerate_slices(f.dom) if contains(s)]

    return SliceCategory(f.dom, contains, product_rule, objects, label="pullback")


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def slice_to_json(s: Slice) -> dict:
    from .order import event_id

    return {"events": sorted(event_id(e) for e in s)}


def foliation_to_json(leaves: Sequence[Iterable]) -> dict:
    from .order import event_id

    return {"leaves": [sorted(event_id(e) for e in leaf) for leaf in leaves]}
