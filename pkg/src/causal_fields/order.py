"""Causal orders: finite explicit posets and the implicit diamond lattice.

Events of an explicit order are arbitrary hashable values (strings when
loaded from JSON).  Events of the ``(1+d)`` diamond lattice are pairs
``(t, xs)`` with ``t`` an integer and ``xs`` a length-``d`` tuple of
integers satisfying the parity constraint ``xs[i] == t (mod 2)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, Sequence

from .errors import (
    CycleDetected,
    DuplicateEvent,
    InfinitePreimage,
    InvalidMorphism,
    UnboundedQuery,
    UnknownEvent,
)

Event = Hashable


# ---------------------------------------------------------------------------
# explicit finite orders
# ---------------------------------------------------------------------------

class ExplicitOrder:
    """A finite poset stored as events + Hasse edges + reachability closure.

    Reachability is kept as one bitset per event, so ``leq`` is O(1).  The
    stored edge list is the transitive reduction of whatever edges were
    supplied, which makes Hasse-adjacency queries (and hence maximal-chain
    enumeration) reliable even for redundant input.
    """

    is_finite = True
    kind = "explicit-finite"

    def __init__(self, events: Sequence[Event], hasse_edges: Iterable[tuple[Event, Event]]):
        events = list(events)
        if len(set(events)) != len(events):
            raise DuplicateEvent("duplicate event in event list")
        self.events: tuple = tuple(events)
        self._index = {e: i for i, e in enumerate(events)}
        n = len(events)
        adj = [set() for _ in range(n)]
        for a, b in hasse_edges:
            if a not in self._index or b not in self._index:
                raise UnknownEvent(f"edge endpoint {a!r} or {b!r} not an event")
            if a == b:
                raise CycleDetected(f"self-loop at {a!r}")
            adj[self._index[a]].add(self._index[b])
        self._topo = self._toposort(adj)
        self._up = self._closure(adj, self._topo)
        self._down = self._transpose_closure(self._up, n)
        self._succ, self._pred = self._reduction(n)

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def _toposort(adj: list[set[int]]) -> list[int]:
        n = len(adj)
        indeg = [0] * n
        for outs in adj:
            for b in outs:
                indeg[b] += 1
        queue = [i for i in range(n) if indeg[i] == 0]
        order = []
        while queue:
            x = queue.pop()
            order.append(x)
            for b in adj[x]:
                indeg[b] -= 1
                if indeg[b] == 0:
                    queue.append(b)
        if len(order) != n:
            raise CycleDetected("edges admit a directed cycle")
        return order

    @staticmethod
    def _closure(adj: list[set[int]], topo: list[int]) -> list[int]:
        up = [0] * len(adj)
        for x in reversed(topo):
            acc = 1 << x
            for b in adj[x]:
                acc |= up[b]
            up[x] = acc
        return up

    @staticmethod
    def _transpose_closure(up: list[int], n: int) -> list[int]:
        down = [0] * n
        for x in range(n):
            bits = up[x]
            while bits:
                b = bits & -bits
                down[b.bit_length() - 1] |= 1 << x
                bits ^= b
        return down

    def _reduction(self, n: int) -> tuple[list[tuple], list[tuple]]:
        succ = [[] for _ in range(n)]
        pred = [[] for _ in range(n)]
        for x in range(n):
            strict_up = self._up[x] & ~(1 << x)
            bits = strict_up
            while bits:
                b = bits & -bits
                y = b.bit_length() - 1
                bits ^= b
                if not (strict_up & (self._down[y] & ~(1 << y))):
                    succ[x].append(y)
                    pred[y].append(x)
        return ([tuple(s) for s in succ], [tuple(p) for p in pred])

    # -- queries ---------------------------------------------------------------

    def has_event(self, e: Event) -> bool:
        return e in self._index

    def require_event(self, e: Event) -> int:
        try:
            return self._index[e]
        except KeyError:
            raise UnknownEvent(f"{e!r} is not an event of this order") from None

    def leq(self, x: Event, y: Event) -> bool:
        return bool(self._up[self.require_event(x)] & (1 << self.require_event(y)))

    def immediate_successors(self, x: Event) -> tuple:
        return tuple(self.events[i] for i in self._succ[self.require_event(x)])

    def immediate_predecessors(self, x: Event) -> tuple:
        return tuple(self.events[i] for i in self._pred[self.require_event(x)])

    def minimal_elements(self) -> tuple:
        return tuple(e for i, e in enumerate(self.events) if not self._pred[i])

    def maximal_elements(self) -> tuple:
        return tuple(e for i, e in enumerate(self.events) if not self._succ[i])

    def hasse_edges(self) -> list[tuple[Event, Event]]:
        return [
            (self.events[x], self.events[y])
            for x in range(len(self.events))
            for y in self._succ[x]
        ]

    def topological_order(self) -> list:
        return [self.events[i] for i in self._topo]

    def _bits_to_events(self, bits: int) -> set:
        out = set()
        while bits:
            b = bits & -bits
            out.add(self.events[b.bit_length() - 1])
            bits ^= b
        return out

    def up_set(self, x: Event) -> set:
        return self._bits_to_events(self._up[self.require_event(x)])

    def down_set(self, x: Event) -> set:
        return self._bits_to_events(self._down[self.require_event(x)])

    def suborder(self, subset: Iterable[Event]) -> "ExplicitOrder":
        """The causal sub-order induced on a subset of events."""
        subset = [e for e in self.events if e in set(subset)]
        edges = [
            (a, b)
            for a in subset
            for b in subset
            if a != b and self.leq(a, b)
        ]
        return ExplicitOrder(subset, edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExplicitOrder):
            return NotImplemented
        if set(self.events) != set(other.events):
            return False
        return all(
            self.leq(a, b) == other.leq(a, b)
            for a in self.events
            for b in self.events
        )

    def __hash__(self):
        return hash(frozenset(self.events))

    def __repr__(self):
        return f"ExplicitOrder({len(self.events)} events, {len(self.hasse_edges())} hasse edges)"


def build_explicit(events: Sequence[Event], hasse_edges: Iterable[tuple[Event, Event]]) -> ExplicitOrder:
    """Build a finite order whose relation is the reflexive-transitive
    closure of the given edges."""
    return ExplicitOrder(events, hasse_edges)


# ---------------------------------------------------------------------------
# the (1+d) diamond lattice and its reverse
# ---------------------------------------------------------------------------

def neighbourhood(d: int) -> list[tuple[int, ...]]:
    """The set {+-1}^d of immediate-step displacements."""
    return [tuple(s) for s in itertools.product((-1, 1), repeat=d)]


def iterated_neighbourhood(k: int, d: int) -> list[tuple[int, ...]]:
    """The k-fold sumset of the neighbourhood; {0}^d for k = 0."""
    if k < 0:
        raise ValueError("k must be >= 0")
    line = list(range(-k, k + 1, 2)) if k else [0]
    return [tuple(s) for s in itertools.product(line, repeat=d)]


class DiamondLattice:
    """The infinite diamond lattice on {(t, xs) : xs == (t,...,t) mod 2}."""

    is_finite = False
    kind = "diamond-lattice"

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.d = d
        self._nbhd = neighbourhood(d)

    def has_event(self, e: Event) -> bool:
        if not (isinstance(e, tuple) and len(e) == 2):
            return False
        t, xs = e
        if not (isinstance(t, int) and isinstance(xs, tuple) and len(xs) == self.d):
            return False
        return all(isinstance(x, int) and (x - t) % 2 == 0 for x in xs)

    def require_event(self, e: Event) -> Event:
        if not self.has_event(e):
            raise UnknownEvent(f"{e!r} is not an event of the d={self.d} lattice")
        return e

    def level(self, e: Event) -> int:
        return e[0]

    def leq(self, x: Event, y: Event) -> bool:
        (t, a), (s, b) = self.require_event(x), self.require_event(y)
        k = s - t
        if k < 0:
            return False
        return all(abs(b[i] - a[i]) <= k for i in range(self.d))

    def immediate_successors(self, x: Event) -> tuple:
        t, a = self.require_event(x)
        return tuple((t + 1, tuple(a[i] + dlt[i] for i in range(self.d))) for dlt in self._nbhd)

    def immediate_predecessors(self, x: Event) -> tuple:
        t, a = self.require_event(x)
        return tuple((t - 1, tuple(a[i] - dlt[i] for i in range(self.d))) for dlt in self._nbhd)

    def __eq__(self, other):
        if isinstance(other, DiamondLattice):
            return self.d == other.d
        return NotImplemented

    def __hash__(self):
        return hash(("diamond", self.d))

    def __repr__(self):
        return f"DiamondLattice(d={self.d})"


class ReversedLattice:
    """The causal reverse of a diamond lattice (time runs backwards)."""

    is_finite = False
    kind = "diamond-lattice-reversed"

    def __init__(self, base: DiamondLattice):
        self.base = base
        self.d = base.d

    def has_event(self, e):
        return self.base.has_event(e)

    def require_event(self, e):
        return self.base.require_event(e)

    def level(self, e) -> int:
        return -e[0]

    def leq(self, x, y):
        return self.base.leq(y, x)

    def immediate_successors(self, x):
        return self.base.immediate_predecessors(x)

    def immediate_predecessors(self, x):
        return self.base.immediate_successors(x)

    def __eq__(self, other):
        if isinstance(other, ReversedLattice):
            return self.base == other.base
        return NotImplemented

    def __hash__(self):
        return hash(("diamond-rev", self.d))

    def __repr__(self):
        return f"ReversedLattice(d={self.d})"


CausalOrder = ExplicitOrder | DiamondLattice | ReversedLattice


def lattice(d: int) -> DiamondLattice:
    return DiamondLattice(d)


def reverse(omega: CausalOrder) -> CausalOrder:
    """The same events with the order relation transposed."""
    if isinstance(omega, ExplicitOrder):
        return ExplicitOrder(omega.events, [(b, a) for a, b in omega.hasse_edges()])
    if isinstance(omega, DiamondLattice):
        return ReversedLattice(omega)
    if isinstance(omega, ReversedLattice):
        return omega.base
    raise TypeError(f"not a causal order: {omega!r}")


# ---------------------------------------------------------------------------
# windows: bounded views of infinite lattices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Window:
    """A time interval and coordinate bounding box on a lattice order."""

    t0: int
    t1: int
    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def expanded(self, pad: int) -> "Window":
        return Window(
            self.t0,
            self.t1,
            tuple(a - pad for a in self.lo),
            tuple(b + pad for b in self.hi),
        )


def window_events(omega: DiamondLattice | ReversedLattice, window: Window) -> Iterator[Event]:
    d = omega.d
    for t in range(window.t0, window.t1 + 1):
        ranges = []
        for i in range(d):
            lo = window.lo[i] + ((window.lo[i] - t) % 2)
            ranges.append(range(lo, window.hi[i] + 1, 2))
        for xs in itertools.product(*ranges):
            yield (t, xs)


def materialize(omega: DiamondLattice | ReversedLattice, window: Window) -> ExplicitOrder:
    """The explicit finite order induced on a window of a lattice."""
    events = list(window_events(omega, window))
    have = set(events)
    edges = [
        (e, s)
        for e in events
        for s in omega.immediate_successors(e)
        if s in have
    ]
    return ExplicitOrder(events, edges)


# ---------------------------------------------------------------------------
# futures, pasts, domains of dependence
# ---------------------------------------------------------------------------

def _require_all(omega: CausalOrder, a: Iterable[Event]):
    for e in a:
        omega.require_event(e)


def future(omega: CausalOrder, a: Iterable[Event], window: Window | None = None) -> frozenset:
    """The up-closure of a set of events (within a window, on lattices)."""
    a = frozenset(a)
    _require_all(omega, a)
    if omega.is_finite:
        out: set = set()
        for e in a:
            out |= omega.up_set(e)
        return frozenset(out)
    if window is None:
        raise UnboundedQuery("future on a lattice order needs a window")
    return frozenset(
        w for w in window_events(omega, window) if any(omega.leq(x, w) for x in a)
    )


def past(omega: CausalOrder, a: Iterable[Event], window: Window | None = None) -> frozenset:
    return future(reverse(omega), a, window)


def future_domain(omega: CausalOrder, a: Iterable[Event]) -> frozenset:
    """The future domain of dependence: events x such that every causal
    path from the infinite past to x intersects the given set.

    Computed by the recursion "x is in the domain iff x is in the set, or x
    is non-minimal and all its immediate predecessors are in the domain".
    On lattices the recursion is run level by level; it grounds out because
    the domain is contained in the up-closure of a finite set and each
    level's slice of the domain shrinks above the set's maximal time.
    """
    a = frozenset(a)
    _require_all(omega, a)
    if not a:
        return frozenset()
    if omega.is_finite:
        out: set = set()
        for x in omega.topological_order():
            if x in a:
                out.add(x)
            else:
                preds = omega.immediate_predecessors(x)
                if preds and all(p in out for p in preds):
                    out.add(x)
        return frozenset(out)
    levels = sorted({omega.level(e) for e in a})
    lo = levels[0]
    hi = levels[-1]
    by_level: dict[int, set] = {}
    for e in a:
        by_level.setdefault(omega.level(e), set()).add(e)
    current: set = set(by_level.get(lo, set()))
    out: set = set(current)
    lvl = lo
    while current or lvl < hi:
        lvl += 1
        candidates = set(by_level.get(lvl, set()))
        for e in current:
            candidates.update(omega.immediate_successors(e))
        nxt = set()
        for x in candidates:
            if x in by_level.get(lvl, set()):
                nxt.add(x)
            elif all(p in current for p in omega.immediate_predecessors(x)):
                nxt.add(x)
        out |= nxt
        current = nxt
    return frozenset(out)


def past_domain(omega: CausalOrder, a: Iterable[Event]) -> frozenset:
    return future_domain(reverse(omega), a)


# ---------------------------------------------------------------------------
# paths, diamonds, regions
# ---------------------------------------------------------------------------

def diamond(omega: CausalOrder, x: Event, y: Event) -> frozenset:
    """The causal diamond {z : x <= z <= y}."""
    omega.require_event(x)
    omega.require_event(y)
    if omega.is_finite:
        xi, yi = omega._index[x], omega._index[y]
        return frozenset(omega._bits_to_events(omega._up[xi] & omega._down[yi]))
    if not omega.leq(x, y):
        return frozenset()
    if isinstance(omega, ReversedLattice):
        return diamond(omega.base, y, x)
    (t, a), (s, b) = x, y
    out = []
    for lvl in range(t, s + 1):
        ranges = []
        for i in range(omega.d):
            lo = max(a[i] - (lvl - t), b[i] - (s - lvl))
            hi = min(a[i] + (lvl - t), b[i] + (s - lvl))
            lo += (lo - lvl) % 2
            ranges.append(range(lo, hi + 1, 2))
        out.extend((lvl, xs) for xs in itertools.product(*ranges))
    return frozenset(out)


def causal_paths(omega: CausalOrder, x: Event, y: Event) -> Iterator[tuple]:
    """All causal paths (maximal chains) from x to y.

    A chain between fixed endpoints is maximal exactly when consecutive
    members are Hasse-adjacent, so paths are depth-first walks along
    immediate successors inside the diamond from x to y.
    """
    omega.require_event(x)
    omega.require_event(y)
    if not omega.leq(x, y):
        return
    box = diamond(omega, x, y)

    def walk(prefix: list) -> Iterator[tuple]:
        last = prefix[-1]
        if last == y:
            yield tuple(prefix)
            return
        for s in omega.immediate_successors(last):
            if s in box:
                yield from walk(prefix + [s])

    yield from walk([x])


def maximal_chains(omega: ExplicitOrder) -> Iterator[tuple]:
    """All inextendible chains of a finite order (minimal to maximal)."""

    def walk(prefix: list) -> Iterator[tuple]:
        succ = omega.immediate_successors(prefix[-1])
        if not succ:
            yield tuple(prefix)
            return
        for s in succ:
            yield from walk(prefix + [s])

    for m in omega.minimal_elements():
        yield from walk([m])


def is_region(omega: CausalOrder, s: Iterable[Event]) -> bool:
    """Convexity: every diamond between members stays inside the set."""
    s = frozenset(s)
    _require_all(omega, s)
    return all(diamond(omega, x, y) <= s for x in s for y in s)


def region_between(omega: CausalOrder, sigma: Iterable[Event], gamma: Iterable[Event]) -> frozenset:
    """The union of the diamonds from members of sigma to members of gamma."""
    sigma, gamma = frozenset(sigma), frozenset(gamma)
    out: set = set()
    for x in sigma:
        for y in gamma:
            out |= diamond(omega, x, y)
    return frozenset(out)


# ---------------------------------------------------------------------------
# morphisms of causal orders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderMorphism:
    """A function between causal orders, stored pointwise (finite domains)."""

    dom: CausalOrder
    cod: CausalOrder
    mapping: dict

    def __call__(self, e: Event) -> Event:
        try:
            return self.mapping[e]
        except KeyError:
            raise UnknownEvent(f"{e!r} not in the domain of the morphism") from None

    @property
    def image(self) -> frozenset:
        return frozenset(self.mapping.values())

    def is_injective(self) -> bool:
        return len(self.image) == len(self.mapping)


def check_morphism(f: OrderMorphism) -> bool:
    """Monotone and strict-order-reflecting, checked on all event pairs."""
    if not f.dom.is_finite:
        raise UnboundedQuery("morphism checking needs a finite domain")
    if set(f.mapping) != set(f.dom.events):
        return False
    for e in f.mapping.values():
        f.cod.require_event(e)
    for a in f.dom.events:
        for b in f.dom.events:
            fa, fb = f.mapping[a], f.mapping[b]
            if f.dom.leq(a, b) and not f.cod.leq(fa, fb):
                return False
            if f.cod.leq(fa, fb) and fa != fb and not f.dom.leq(a, b):
                return False
    return True


def compose_morphisms(g: OrderMorphism, f: OrderMorphism) -> OrderMorphism:
    if f.cod != g.dom:
        raise InvalidMorphism("codomain/domain mismatch")
    return OrderMorphism(f.dom, g.cod, {e: g(f(e)) for e in f.mapping})


def identity_morphism(omega: ExplicitOrder) -> OrderMorphism:
    return OrderMorphism(omega, omega, {e: e for e in omega.events})


def epi_mono_factor(f: OrderMorphism) -> tuple[OrderMorphism, OrderMorphism]:
    """Factor f as a causal quotient onto its image followed by the
    inclusion of the image as a causal sub-order."""
    if not (f.dom.is_finite and f.cod.is_finite):
        raise UnboundedQuery("epi-mono factorisation needs finite orders")
    if not check_morphism(f):
        raise InvalidMorphism("not a valid causal-order morphism")
    image_order = f.cod.suborder(f.image)
    quotient = OrderMorphism(f.dom, image_order, dict(f.mapping))
    embedding = OrderMorphism(image_order, f.cod, {e: e for e in image_order.events})
    return quotient, embedding


def region_refinement_factor(i: OrderMorphism) -> tuple[OrderMorphism, OrderMorphism]:
    """Factor an injective morphism through the smallest region containing
    its image (the union of diamonds between image points)."""
    if not (i.dom.is_finite and i.cod.is_finite):
        raise UnboundedQuery("factorisation needs finite orders")
    if not check_morphism(i) or not i.is_injective():
        raise InvalidMorphism("input must be an injective causal-order morphism")
    img = i.image
    theta_events: set = set()
    for x in img:
        for y in img:
            theta_events |= diamond(i.cod, x, y)
    theta = i.cod.suborder(theta_events)
    refinement = OrderMorphism(i.dom, theta, dict(i.mapping))
    region_mor = OrderMorphism(theta, i.cod, {e: e for e in theta.events})
    return refinement, region_mor


def _antichains(omega: ExplicitOrder, universe: Sequence[Event]) -> Iterator[frozenset]:
    universe = list(universe)

    def extend(prefix: list, start: int) -> Iterator[frozenset]:
        yield frozenset(prefix)
        for k in range(start, len(universe)):
            e = universe[k]
            if all(not omega.leq(e, p) and not omega.leq(p, e) for p in prefix):
                yield from extend(prefix + [e], k + 1)

    yield from extend([], 0)


def pullback_slice(f: OrderMorphism, sigma: Iterable[Event]) -> tuple[ExplicitOrder, list[frozenset]]:
    """The sub-order over the preimage of a slice, together with all its
    slices, enumerated as disjoint unions of per-fibre antichains."""
    sigma = frozenset(sigma)
    if not f.dom.is_finite:
        raise InfinitePreimage("pullbacks need a finite domain")
    preimage = [e for e in f.dom.events if f.mapping[e] in sigma]
    sub = f.dom.suborder(preimage)
    fibre_choices = []
    for x in sorted(sigma, key=repr):
        fibre = [e for e in preimage if f.mapping[e] == x]
        fibre_choices.append(list(_antichains(sub, fibre)))
    slices = [
        frozenset().union(*choice) if choice else frozenset()
        for choice in itertools.product(*fibre_choices)
    ]
    return sub, slices


# ---------------------------------------------------------------------------
# JSON and DOT interchange
# ---------------------------------------------------------------------------

def event_id(e: Event) -> str:
    """Serialise an event id: lattice events as "t,x1,...,xd"."""
    if isinstance(e, tuple) and len(e) == 2 and isinstance(e[1], tuple):
        return ",".join(str(v) for v in (e[0], *e[1]))
    return str(e)


def parse_lattice_event(s: str) -> Event:
    parts = [int(p) for p in s.split(",")]
    return (parts[0], tuple(parts[1:]))


def order_to_json(omega: ExplicitOrder) -> dict:
    return {
        "events": [event_id(e) for e in omega.events],
        "hasse": [[event_id(a), event_id(b)] for a, b in omega.hasse_edges()],
    }


def order_from_json(obj: dict) -> CausalOrder:
    if "lattice" in obj:
        return DiamondLattice(int(obj["lattice"]["d"]))
    return build_explicit(obj["events"], [tuple(e) for e in obj["hasse"]])


def order_to_dot(omega: ExplicitOrder, name: str = "causal_order") -> str:
    """A DOT digraph of the Hasse diagram, nodes listed in a linear extension."""
    lines = [f"digraph {name} {{", "  rankdir=BT;"]
    for e in omega.topological_order():
        lines.append(f'  "{event_id(e)}";')
    for a, b in omega.hasse_edges():
        lines.append(f'  "{event_id(a)}" -> "{event_id(b)}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
