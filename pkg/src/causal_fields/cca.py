"""The partitioned causal cellular automaton on the diamond lattice.

The field assigns to each event a cell of ``2^d`` tensor factors, one per
past-neighbourhood direction; a single scattering map acts homogeneously.
Slice objects are indexed canonically: events sorted by coordinate, inner
factors by direction (lexicographic sign order).

Wiring convention: the scattering matrix is applied together with the
direction-reversal permutation, and the factor kept from direction ``dlt``
at event ``y`` becomes the incoming-from-``dlt`` factor of ``y - dlt``.
Of the two index conventions the scattering matrix admits, this is the one
under which the mass-zero Dirac automaton transports excitations one site
per step (and under which the inverse-scattering construction below is an
actual causal reversal).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import process as P
from .errors import (
    BadParams,
    NegativeTimeGap,
    NotInvertible,
    NotStochastic,
    NotSubset,
    NotUnitary,
    WrongPredecessorSet,
)
from .field_theory import FieldTheory
from .order import (
    DiamondLattice,
    ReversedLattice,
    iterated_neighbourhood,
    lattice,
    neighbourhood,
    reverse,
)
from .report import Report
from .slices import SliceCategory

Coord = tuple
Sites = frozenset


def _add(x: Coord, d: Coord) -> Coord:
    return tuple(a + b for a, b in zip(x, d))


def _sub(x: Coord, d: Coord) -> Coord:
    return tuple(a - b for a, b in zip(x, d))


# ---------------------------------------------------------------------------
# lattice slices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeSlice:
    """A finite constant-time slice: a time plus a set of space coordinates."""

    t: int
    sites: Sites

    def events(self) -> frozenset:
        return frozenset((self.t, x) for x in self.sites)

    @staticmethod
    def from_events(events) -> "LatticeSlice | None":
        events = frozenset(events)
        if not events:
            return None
        times = {e[0] for e in events}
        if len(times) != 1:
            raise BadParams("events do not share one time coordinate")
        (t,) = times
        return LatticeSlice(t, frozenset(e[1] for e in events))


def lattice_slice(t: int, sites) -> frozenset:
    return LatticeSlice(t, frozenset(tuple(x) if isinstance(x, (tuple, list)) else (x,) for x in sites)).events()


def expand_sites(sites: Sites, k: int, d: int) -> Sites:
    """All coordinates reachable by k backward steps: the k-fold sumset
    with the neighbourhood."""
    out = set()
    for x in sites:
        for dlt in iterated_neighbourhood(k, d):
            out.add(_add(x, dlt))
    return frozenset(out)


def lattice_slice_leq(sigma: LatticeSlice, gamma: LatticeSlice, d: int) -> bool:
    """The closed-form cone test for the slice ordering on the lattice:
    the iterated-neighbourhood cast of the target lies inside the source."""
    k = gamma.t - sigma.t
    if k < 0:
        raise NegativeTimeGap(f"target is {-k} steps in the past")
    return expand_sites(gamma.sites, k, d) <= sigma.sites


# ---------------------------------------------------------------------------
# the slice category of the constant-time foliation
# ---------------------------------------------------------------------------

@dataclass
class LatticeSliceCategory(SliceCategory):
    """Finite constant-time slices of the diamond lattice (or its reverse),
    with the slice ordering decided by the closed-form cone test."""

    d: int = 1

    def hom(self, sigma, gamma) -> bool:
        sigma, gamma = frozenset(sigma), frozenset(gamma)
        if not (self.contains(sigma) and self.contains(gamma)):
            return False
        if not gamma:
            return True
        if not sigma:
            return False
        s = LatticeSlice.from_events(sigma)
        g = LatticeSlice.from_events(gamma)
        if isinstance(self.order, ReversedLattice):
            s, g = LatticeSlice(-s.t, s.sites), LatticeSlice(-g.t, g.sites)
        if g.t < s.t:
            return False
        return lattice_slice_leq(s, g, self.d)


def cone_pair_witness(d: int):
    """A constructive witness for the event-pair-covering condition of the
    constant-time foliation category: the past-cone slice through the lower
    event leading onto the singleton upper slice."""

    def witness(x, y):
        (t, _a), (s, b) = x, y
        k = s - t
        sigma = frozenset(
            (t, _add(b, dlt)) for dlt in iterated_neighbourhood(k, d)
        )
        return sigma, frozenset({y})

    return witness


def foliation_category_of_lattice(d: int, reversed_: bool = False) -> LatticeSliceCategory:
    omega = reverse(lattice(d)) if reversed_ else lattice(d)

    def contains(s) -> bool:
        s = frozenset(s)
        if not s:
            return True
        if not all(omega.has_event(e) for e in s):
            return False
        return len({e[0] for e in s}) == 1

    def product_rule(a, b) -> bool:
        if not a or not b:
            return True
        return not (a & b) and len({e[0] for e in a | b}) == 1

    return LatticeSliceCategory(
        order=omega,
        contains=contains,
        product_rule=product_rule,
        objects=None,
        label="lattice-foliation" + ("-rev" if reversed_ else ""),
        d=d,
    )


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PartitionedCCAConfig:
    """Spatial dimension, cell dimension, and the scattering matrix acting
    on the cell (one tensor factor per neighbourhood direction)."""

    d: int
    cell_dim: int
    scattering: np.ndarray
    scattering_inv: np.ndarray | None = None
    backend: str = P.QUANTUM

    def __post_init__(self):
        if self.d < 1 or self.cell_dim < 1:
            raise BadParams("d and cell_dim must be >= 1")
        m = self.cell_dim ** (2 ** self.d)
        u = np.asarray(self.scattering)
        if u.shape != (m, m):
            raise BadParams(f"scattering must be {m}x{m} for d={self.d}, cell_dim={self.cell_dim}")
        if self.backend == P.QUANTUM:
            if np.max(np.abs(u.conj().T @ u - np.eye(m))) > P.VALIDITY_TOL:
                raise NotUnitary("quantum scattering must be unitary")
        elif self.backend == P.CLASSICAL:
            if np.min(u) < -P.VALIDITY_TOL or np.max(np.abs(u.sum(axis=0) - 1)) > P.VALIDITY_TOL:
                raise NotStochastic("classical scattering must be column-stochastic")
        else:
            raise BadParams(f"unknown backend {self.backend!r}")

    @property
    def directions(self) -> list[Coord]:
        return neighbourhood(self.d)

    @property
    def cell_factors(self) -> int:
        return 2 ** self.d


def _direction_reversal(h: int, d: int) -> np.ndarray:
    """The permutation matrix sending the factor for direction dlt to the
    factor for -dlt (factor order reversal on the cell)."""
    m = 2 ** d
    dim = h ** m
    perm = np.arange(dim).reshape((h,) * m).transpose(tuple(reversed(range(m)))).reshape(-1)
    out = np.zeros((dim, dim))
    out[perm, np.arange(dim)] = 1.0
    return out


def effective_scattering(config: PartitionedCCAConfig) -> np.ndarray:
    return _direction_reversal(config.cell_dim, config.d) @ np.asarray(config.scattering)


def cca_config_to_json(config: PartitionedCCAConfig) -> dict:
    out = {
        "d": config.d,
        "cell_dim": config.cell_dim,
        "U": P.matrix_to_json(np.asarray(config.scattering)),
        "backend": config.backend,
    }
    if config.scattering_inv is not None:
        out["U_inv"] = P.matrix_to_json(np.asarray(config.scattering_inv))
    return out


def cca_config_from_json(obj: dict) -> PartitionedCCAConfig:
    u = P.matrix_from_json(obj["U"])
    backend = obj.get("backend", P.QUANTUM)
    if backend == P.CLASSICAL:
        u = u.real
    u_inv = None
    if "U_inv" in obj:
        u_inv = P.matrix_from_json(obj["U_inv"])
        if backend == P.CLASSICAL:
            u_inv = u_inv.real
    return PartitionedCCAConfig(
        d=int(obj["d"]),
        cell_dim=int(obj["cell_dim"]),
        scattering=u,
        scattering_inv=u_inv,
        backend=backend,
    )


# ---------------------------------------------------------------------------
# slice objects and kernels
# ---------------------------------------------------------------------------

def slice_slots(config: PartitionedCCAConfig, sites: Sites) -> list:
    return [(x, dlt) for x in sorted(sites) for dlt in config.directions]


def slice_object(config: PartitionedCCAConfig, sites: Sites) -> P.ProcObject:
    return P.ProcObject(config.backend, (config.cell_dim,) * (config.cell_factors * len(sites)))


def _cell_matrix_step(config: PartitionedCCAConfig, obj: P.ProcObject, mat, idx) -> P.ProcMorphism:
    if config.backend == P.QUANTUM:
        return P.unitary_channel(obj, mat, idx)
    return P.stochastic_map(obj, mat, idx)


def restriction_kernel(config: PartitionedCCAConfig, xs: Sites, ys: Sites) -> P.ProcMorphism:
    """Marginalisation: discard the field over the events left out."""
    xs, ys = frozenset(xs), frozenset(ys)
    if not ys <= xs:
        raise NotSubset("restriction target must be a subset")
    slots = slice_slots(config, xs)
    drop = [i for i, (x, _) in enumerate(slots) if x not in ys]
    return P.discard(slice_object(config, xs), drop)


def one_step_kernel(config: PartitionedCCAConfig, ys: Sites, xs: Sites) -> P.ProcMorphism:
    """One synchronous step: scatter at every source event, discard the
    outputs not aimed at the target slice, and re-index the kept factors
    by their destination events."""
    ys, xs = frozenset(ys), frozenset(xs)
    if ys != expand_sites(xs, 1, config.d):
        raise WrongPredecessorSet("source must be the exact predecessor set of the target")
    dom = slice_object(config, ys)
    slots = slice_slots(config, ys)
    ueff = effective_scattering(config)
    m = config.cell_factors
    prog = P.identity(dom)
    for i, _y in enumerate(sorted(ys)):
        prog = P.compose(_cell_matrix_step(config, dom, ueff, range(i * m, (i + 1) * m)), prog)
    keep, labels = [], []
    for i, (y, dlt) in enumerate(slots):
        if _sub(y, dlt) in xs:
            keep.append(i)
            labels.append((_sub(y, dlt), dlt))
    drop = [i for i in range(len(slots)) if i not in set(keep)]
    prog = P.compose(P.discard(prog.cod, drop), prog)
    want = slice_slots(config, xs)
    perm = tuple(labels.index(s) for s in want)
    return P.compose(P.permute_factors(prog.cod, perm), prog)


def reverse_one_step_kernel(
    config: PartitionedCCAConfig, v_inv: np.ndarray, ys: Sites, xs: Sites
) -> P.ProcMorphism:
    """One reverse step: for each reconstructed event, apply the inverse of
    the effective scattering to the factors that its forward scattering
    produced (the incoming-from-``dlt`` factors of the events ``x - dlt``),
    and discard the rest."""
    ys, xs = frozenset(ys), frozenset(xs)
    if ys != expand_sites(xs, 1, config.d):
        raise WrongPredecessorSet("source must be the exact reverse predecessor set")
    dom = slice_object(config, ys)
    slots = slice_slots(config, ys)
    pos = {s: i for i, s in enumerate(slots)}
    prog = P.identity(dom)
    used, labels_at = set(), {}
    for x in sorted(xs):
        idx = [pos[(_sub(x, dlt), dlt)] for dlt in config.directions]
        prog = P.compose(_cell_matrix_step(config, dom, v_inv, idx), prog)
        for j, dlt in enumerate(config.directions):
            used.add(idx[j])
            labels_at[idx[j]] = (x, dlt)
    drop = [i for i in range(len(slots)) if i not in used]
    prog = P.compose(P.discard(prog.cod, drop), prog)
    kept_labels = [labels_at[i] for i in sorted(used)]
    want = slice_slots(config, xs)
    perm = tuple(kept_labels.index(s) for s in want)
    return P.compose(P.permute_factors(prog.cod, perm), prog)


# ---------------------------------------------------------------------------
# morphism factorisation and the field theory
# ---------------------------------------------------------------------------

def factorize_morphism(config: PartitionedCCAConfig, sigma, gamma) -> list:
    """The canonical factorisation of a slice morphism into one restriction
    followed by full one-step evolutions."""
    sigma, gamma = frozenset(sigma), frozenset(gamma)
    s = LatticeSlice.from_events(sigma)
    if s is None:
        if gamma:
            raise BadParams("no morphism out of the empty slice")
        return []
    g = LatticeSlice.from_events(gamma)
    if g is None:
        return [("restrict", s.sites, frozenset(), s.t)]
    k = g.t - s.t
    if k < 0 or not lattice_slice_leq(s, g, config.d):
        raise BadParams("not a lattice slice morphism")
    first = expand_sites(g.sites, k, config.d)
    steps = [("restrict", s.sites, first, s.t)]
    cur = first
    for i in range(1, k + 1):
        nxt = expand_sites(g.sites, k - i, config.d)
        steps.append(("step", cur, nxt, s.t + i))
        cur = nxt
    return steps


def build_cca(config: PartitionedCCAConfig) -> FieldTheory:
    """The partitioned automaton as a field theory on the constant-time
    foliation category of the diamond lattice."""
    cat = foliation_category_of_lattice(config.d)

    def obj_fn(sigma) -> P.ProcObject:
        s = LatticeSlice.from_events(sigma)
        return slice_object(config, s.sites if s else frozenset())

    def slots_fn(sigma) -> list:
        s = LatticeSlice.from_events(sigma)
        return slice_slots(config, s.sites if s else frozenset())

    def mor_fn(sigma, gamma) -> P.ProcMorphism:
        prog = P.identity(obj_fn(sigma))
        for kind, src, tgt, _t in factorize_morphism(config, sigma, gamma):
            if kind == "restrict":
                prog = P.compose(restriction_kernel(config, src, tgt), prog)
            else:
                prog = P.compose(one_step_kernel(config, src, tgt), prog)
        return prog

    return FieldTheory(
        category=cat,
        backend=config.backend,
        obj_fn=obj_fn,
        mor_fn=mor_fn,
        slots_fn=slots_fn,
        label="partitioned-cca",
    )


def scattering_inverse(config: PartitionedCCAConfig, tol: float = P.VALIDITY_TOL) -> np.ndarray:
    """The validated inverse of the scattering map; invertibility means
    invertibility as a backend morphism (unitary / permutation)."""
    u = np.asarray(config.scattering)
    m = u.shape[0]
    if config.backend == P.QUANTUM:
        u_inv = config.scattering_inv
        u_inv = u.conj().T if u_inv is None else np.asarray(u_inv)
    else:
        is_perm = np.all(np.isin(np.round(u, 12), (0.0, 1.0))) and np.all(
            np.abs(u.sum(axis=1) - 1) <= tol
        )
        if not is_perm:
            raise NotInvertible("classical scattering is invertible only for permutations")
        u_inv = config.scattering_inv
        u_inv = u.T if u_inv is None else np.asarray(u_inv)
    if np.max(np.abs(u @ u_inv - np.eye(m))) > tol:
        raise NotInvertible("scattering inverse does not invert the scattering")
    return u_inv


def reversal_theory(config: PartitionedCCAConfig, v_inv: np.ndarray) -> FieldTheory:
    """The reverse-time field theory built from a given inverse of the
    *effective* scattering (no validation: see build_reversal)."""
    cat = foliation_category_of_lattice(config.d, reversed_=True)

    def obj_fn(sigma) -> P.ProcObject:
        s = LatticeSlice.from_events(sigma)
        return slice_object(config, s.sites if s else frozenset())

    def slots_fn(sigma) -> list:
        s = LatticeSlice.from_events(sigma)
        return slice_slots(config, s.sites if s else frozenset())

    def mor_fn(sigma, gamma) -> P.ProcMorphism:
        sigma, gamma = frozenset(sigma), frozenset(gamma)
        s = LatticeSlice.from_events(sigma)
        g = LatticeSlice.from_events(gamma)
        prog = P.identity(obj_fn(sigma))
        if s is None:
            if gamma:
                raise BadParams("no morphism out of the empty slice")
            return prog
        if g is None:
            return restriction_kernel(config, s.sites, frozenset())
        k = s.t - g.t
        if k < 0:
            raise BadParams("reverse morphisms run backwards in time")
        first = expand_sites(g.sites, k, config.d)
        if not first <= s.sites:
            raise BadParams("not a reverse lattice slice morphism")
        prog = restriction_kernel(config, s.sites, first)
        cur = first
        for i in range(1, k + 1):
            nxt = expand_sites(g.sites, k - i, config.d)
            prog = P.compose(reverse_one_step_kernel(config, v_inv, cur, nxt), prog)
            cur = nxt
        return prog

    return FieldTheory(
        category=cat,
        backend=config.backend,
        obj_fn=obj_fn,
        mor_fn=mor_fn,
        slots_fn=slots_fn,
        label="partitioned-cca-reversal",
    )


def build_reversal(config: PartitionedCCAConfig) -> FieldTheory:
    """The causal reversal of the automaton: the reverse-time construction
    using the inverse scattering map."""
    u_inv = scattering_inverse(config)
    r = _direction_reversal(config.cell_dim, config.d)
    v_inv = u_inv @ r.T  # inverse of (reversal . scattering)
    return reversal_theory(config, v_inv)


# ---------------------------------------------------------------------------
# symmetries and invariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryAction:
    """A group action given by generators (and their inverses) on events."""

    label: str
    generators: dict
    inverses: dict

    def apply_word(self, word, event):
        for name, sign in word:
            fn = self.generators[name] if sign >= 0 else self.inverses[name]
            event = fn(event)
        return event

    def act(self, word, sl) -> frozenset:
        return frozenset(self.apply_word(word, e) for e in sl)


def translation_action(d: int) -> SymmetryAction:
    gens, invs = {}, {}
    for dlt in neighbourhood(d):
        name = "tau_" + "".join("p" if s > 0 else "m" for s in dlt)
        gens[name] = (lambda dd: lambda e: (e[0] + 1, _sub(e[1], dd)))(dlt)
        invs[name] = (lambda dd: lambda e: (e[0] - 1, _add(e[1], dd)))(dlt)
    return SymmetryAction("lattice-translations", gens, invs)


def sample_words(action: SymmetryAction, rng, count: int, max_len: int = 3) -> list:
    names = sorted(action.generators)
    out = []
    for _ in range(count):
        k = int(rng.integers(1, max_len + 1))
        word = tuple(
            (names[int(rng.integers(len(names)))], 1 if rng.random() < 0.5 else -1)
            for _ in range(k)
        )
        out.append(word)
    return out


def check_symmetry_action(
    action: SymmetryAction,
    omega,
    cat: SliceCategory,
    slice_samples,
    morphism_samples,
    event_pairs,
    words=None,
) -> Report:
    """Automorphism property plus the three slice-category conditions of a
    symmetry, on samples; for lattice translations also checks that the
    generators shift whole foliation leaves forward."""
    report = Report("symmetry-action")
    words = words or [((name, 1),) for name in sorted(action.generators)]
    for word in words:
        for x, y in event_pairs:
            report.count()
            gx, gy = action.apply_word(word, x), action.apply_word(word, y)
            if omega.leq(x, y) != omega.leq(gx, gy):
                report.record({"word": word, "pair": (x, y), "law": "automorphism"})
        for s in slice_samples:
            report.count()
            if cat.contains(frozenset(s)) and not cat.contains(action.act(word, s)):
                report.record({"word": word, "slice": s, "law": "slice preservation"})
        for s, g in morphism_samples:
            report.count()
            if cat.hom(s, g) and not cat.hom(action.act(word, s), action.act(word, g)):
                report.record({"word": word, "pair": (s, g), "law": "ordering preservation"})
            if cat.tensor_defined(s, g):
                gs, gg = action.act(word, s), action.act(word, g)
                if not cat.tensor_defined(gs, gg) or action.act(word, frozenset(s) | frozenset(g)) != gs | gg:
                    report.record({"word": word, "pair": (s, g), "law": "product preservation"})
    if isinstance(omega, (DiamondLattice, ReversedLattice)):
        for name in sorted(action.generators):
            for s in slice_samples:
                s = frozenset(s)
                if not s:
                    continue
                report.count()
                times = {e[0] for e in action.act(((name, 1),), s)}
                if times != {next(iter(s))[0] + 1}:
                    report.record({"generator": name, "law": "leaf transitivity"})
    return report


def identity_invariance(theory: FieldTheory):
    """The invariance witness for a translation-homogeneous theory: every
    component of every natural isomorphism is an identity."""

    def alpha(word, sigma) -> P.ProcMorphism:
        return P.identity(theory.obj(sigma))

    return alpha


def check_invariance(
    theory: FieldTheory,
    action: SymmetryAction,
    alpha,
    words,
    morphism_samples,
    word_pairs=None,
    slice_samples=None,
    tol: float = 1e-10,
) -> Report:
    """Naturality squares of the invariance data, plus the composition rule
    for the natural isomorphisms on sampled word pairs."""
    report = Report("invariance")
    for word in words:
        for s, g in morphism_samples:
            report.count()
            s, g = frozenset(s), frozenset(g)
            gs, gg = action.act(word, s), action.act(word, g)
            lhs = P.compose(alpha(word, g), theory.mor(s, g))
            rhs = P.compose(theory.mor(gs, gg), alpha(word, s))
            dev = P.deviation(lhs, rhs)
            if dev > tol:
                report.record({"word": word, "pair": (s, g), "law": "naturality"}, dev)
    for h, g in word_pairs or []:
        for s in slice_samples or []:
            report.count()
            s = frozenset(s)
            lhs = alpha(tuple(g) + tuple(h), s)
            rhs = P.compose(alpha(h, action.act(g, s)), alpha(g, s))
            dev = P.deviation(lhs, rhs)
            if dev > tol:
                report.record({"words": (h, g), "slice": s, "law": "cocycle"}, dev)
    return report


def translated_kernels_identical(theory: FieldTheory, action: SymmetryAction, word, sigma, gamma) -> bool:
    """Exact structural equality of the kernels assigned to a morphism and
    to its translate (homogeneity as kernel-level equality)."""
    f = theory.mor(sigma, gamma)
    g = theory.mor(action.act(word, sigma), action.act(word, gamma))
    return P.kernels_identical(f, g)


# ---------------------------------------------------------------------------
# samplers over finite windows (for the law-check suites)
# ---------------------------------------------------------------------------

def window_leaf_sites(t: int, lo: int, hi: int) -> list:
    lo = lo + ((lo - t) % 2)
    return [(x,) for x in range(lo, hi + 1, 2)]


def window_slices(d1_t: int, lo: int, hi: int, max_sites: int) -> list:
    """All d=1 constant-time slices in a site box, as event sets."""
    sites = window_leaf_sites(d1_t, lo, hi)
    out = []
    for k in range(0, max_sites + 1):
        for combo in itertools.combinations(sites, k):
            out.append(frozenset((d1_t, x) for x in combo))
    return out


def window_morphisms(t0: int, t1: int, lo: int, hi: int, max_sites: int, d: int = 1) -> list:
    """Every slice morphism between windowed d=1 slices (including into
    the empty slice)."""
    cat = foliation_category_of_lattice(d)
    all_slices = []
    for t in range(t0, t1 + 1):
        all_slices.extend(window_slices(t, lo, hi, max_sites))
    pairs = []
    for s in all_slices:
        for g in all_slices:
            if not s and g:
                continue
            if cat.hom(s, g):
                pairs.append((s, g))
    return pairs


def sample_separated_quads(rng, count: int, t0: int = 0, lo: int = -6, hi: int = 6) -> list:
    """Random (sigma, sigma', gamma, gamma') with both products defined and
    both morphisms present (d=1).  Mixes same-time restrictions with
    one-step evolutions, keeping the union slices at desk scale."""
    out = []
    sites = [x for (x,) in window_leaf_sites(t0, lo, hi)]
    while len(out) < count:
        kind = int(rng.integers(0, 3))
        if kind == 0:
            # restrictions of a small split union
            u = int(rng.integers(2, 5))
            picks = sorted(int(x) for x in rng.choice(sites, size=min(u, len(sites)), replace=False))
            split = int(rng.integers(1, len(picks)))
            left, right = picks[:split], picks[split:]
            sig = frozenset((t0, (x,)) for x in left)
            gam = frozenset((t0, (x,)) for x in right)
            sig_p = frozenset(e for e in sig if rng.random() < 0.7)
            gam_p = frozenset(e for e in gam if rng.random() < 0.7)
        elif kind == 1:
            # one-step evolution on one side, a discard on the other
            anchors = [x for x in sites if x + 2 in sites]
            if not anchors:
                continue
            a = int(rng.choice(anchors))
            others = [x for x in sites if x < a - 1 or x > a + 3]
            if not others:
                continue
            b = int(rng.choice(others))
            sig = frozenset({(t0, (a,)), (t0, (a + 2,))})
            gam = frozenset({(t0, (b,))})
            sig_p = frozenset({(t0 + 1, (a + 1,))})
            gam_p = frozenset()
        else:
            # one-step evolutions on both sides
            anchors = [x for x in sites if x + 2 in sites]
            if len(anchors) < 2:
                continue
            a, b = sorted(int(x) for x in rng.choice(anchors, size=2, replace=False))
            if b - a < 4:
                continue
            sig = frozenset({(t0, (a,)), (t0, (a + 2,))})
            gam = frozenset({(t0, (b,)), (t0, (b + 2,))})
            sig_p = frozenset({(t0 + 1, (a + 1,))}) if rng.random() < 0.8 else frozenset()
            gam_p = frozenset({(t0 + 1, (b + 1,))}) if rng.random() < 0.8 else frozenset()
        out.append((sig, sig_p, gam, gam_p))
    return out


def sample_zigzag_chain_pairs(rng, count: int, max_zigzag: int = 2, t0: int = 0) -> list:
    """Pairs of alternating forward/reverse chains with equal endpoints.

    Chains are built from nested site intervals so every cone condition
    holds by construction; reverse steps of time-gap zero (restrictions in
    the reversed category) keep the interval widths small.
    """

    def interval(t, centre, n_sites):
        start = centre - (n_sites - 1)
        start = start + ((start - t) % 2)
        return frozenset((t, (start + 2 * i,)) for i in range(n_sites))

    def build_chain(n_zigzag, gaps, final_sites, centre):
        # pattern: up g0 | down g1 | up g2 | ... (2*n_zigzag + 1 segments)
        total = sum(gaps)
        sizes = [final_sites]
        for g in reversed(gaps):
            sizes.append(sizes[-1] + g)
        sizes.reverse()  # sizes[i] = width before segment i
        t = t0
        chain = [interval(t, centre, sizes[0])]
        for i, g in enumerate(gaps):
            t = t + g if i % 2 == 0 else t - g
            chain.append(interval(t, centre, sizes[i + 1]))
        assert total == sum(gaps)
        return chain

    out = []
    while len(out) < count:
        n = int(rng.integers(0, max_zigzag + 1))
        m = int(rng.integers(0, max_zigzag + 1))
        final = int(rng.integers(1, 3))
        centre = int(rng.integers(-2, 3)) * 2
        budget = 3  # cap on nonzero time gaps, keeps dimensions small

        def gaps_for(nz, net):
            segs = 2 * nz + 1
            gaps = [0] * segs
            ups = list(range(0, segs, 2))
            downs = list(range(1, segs, 2))
            # net time change = sum(up gaps) - sum(down gaps) must equal `net`
            up_total = net
            down_total = 0
            extra = int(rng.integers(0, max(1, budget - net + 1)))
            if downs and extra > 0:
                up_total += extra
                down_total += extra
            for _ in range(up_total):
                gaps[ups[int(rng.integers(len(ups)))]] += 1
            for _ in range(down_total):
                gaps[downs[int(rng.integers(len(downs)))]] += 1
            return gaps

        net = int(rng.integers(0, 2))
        ga = gaps_for(n, net)
        gb = gaps_for(m, net)
        if sum(ga) > 4 or sum(gb) > 4:
            continue
        wa = final + sum(ga)
        wb = final + sum(gb)
        width = max(wa, wb)
        if width > 4:
            continue
        chain_a = build_chain(n, ga, final + (width - wa), centre)
        chain_b = build_chain(m, gb, final + (width - wb), centre)
        # equal endpoints: rebuild with a common start width and final slice
        start = interval(t0, centre, width)
        chain_a[0] = start
        chain_b[0] = start
        end_t = t0 + net
        end = interval(end_t, centre, final)
        chain_a[-1] = end
        chain_b[-1] = end
        if _chain_valid(chain_a) and _chain_valid(chain_b):
            out.append((chain_a, chain_b))
    return out


def _chain_valid(chain, d: int = 1) -> bool:
    fwd = foliation_category_of_lattice(d)
    rev = foliation_category_of_lattice(d, reversed_=True)
    for i, (a, b) in enumerate(itertools.pairwise(chain)):
        cat = fwd if i % 2 == 0 else rev
        if not cat.hom(a, b):
            return False
    return True


# ---------------------------------------------------------------------------
# the Dirac automaton and its single-particle sector
# ---------------------------------------------------------------------------

def dirac_scattering(m: float, eps: float) -> np.ndarray:
    """The 4x4 scattering unitary of the Dirac automaton at mesh ``eps``:
    identity on the empty and doubly occupied cell, and the Pauli-X times
    its own exponential on the one-particle block."""
    theta = m * eps
    mid = np.array(
        [[-1j * np.sin(theta), np.cos(theta)], [np.cos(theta), -1j * np.sin(theta)]]
    )
    u = np.eye(4, dtype=complex)
    u[1:3, 1:3] = mid
    return u


def dirac_config(m: float, eps: float) -> PartitionedCCAConfig:
    return PartitionedCCAConfig(d=1, cell_dim=2, scattering=dirac_scattering(m, eps))


def mass_coin(m: float, eps: float) -> np.ndarray:
    """The one-particle block of the effective scattering: exp(-i m eps X)."""
    theta = m * eps
    return np.array(
        [[np.cos(theta), -1j * np.sin(theta)], [-1j * np.sin(theta), np.cos(theta)]]
    )


def single_particle_step(psi: np.ndarray, coin: np.ndarray) -> np.ndarray:
    """One automaton step in the one-particle sector on a ring.

    ``psi`` has shape (2, sites): component 0 is the incoming-from-the-left
    factor (a right mover), component 1 the incoming-from-the-right factor.
    """
    mixed = coin @ psi.reshape(2, -1)
    out = np.empty_like(mixed)
    out[0] = np.roll(mixed[0], 1)
    out[1] = np.roll(mixed[1], -1)
    return out


def run_single_particle(psi0: np.ndarray, coin: np.ndarray, steps: int) -> list[np.ndarray]:
    states = [np.asarray(psi0, dtype=complex)]
    for _ in range(steps):
        states.append(single_particle_step(states[-1], coin))
    return states


def site_probabilities(psi: np.ndarray) -> np.ndarray:
    return np.abs(psi[0]) ** 2 + np.abs(psi[1]) ** 2


# ---------------------------------------------------------------------------
# ring evolution of the full automaton (small rings, any backend)
# ---------------------------------------------------------------------------

def ring_object(config: PartitionedCCAConfig, sites: int) -> P.ProcObject:
    return P.ProcObject(config.backend, (config.cell_dim,) * (config.cell_factors * sites))


def ring_step_morphism(config: PartitionedCCAConfig, sites: int) -> P.ProcMorphism:
    """One synchronous step on a d=1 ring: scatter everywhere, then route
    each direction factor to its destination site (no discards)."""
    if config.d != 1:
        raise BadParams("ring evolution is implemented for d=1")
    if sites % 2:
        raise BadParams("ring size must be even to respect the parity of the lattice")
    obj = ring_object(config, sites)
    ueff = effective_scattering(config)
    m = config.cell_factors
    prog = P.identity(obj)
    for i in range(sites):
        prog = P.compose(_cell_matrix_step(config, obj, ueff, range(i * m, (i + 1) * m)), prog)
    slots = [(x, dlt) for x in range(sites) for dlt in ((-1,), (1,))]
    routed = {(( (x - dlt[0]) % sites), dlt): (x, dlt) for x, dlt in slots}
    perm = tuple(slots.index(routed[s]) for s in slots)
    return P.compose(P.permute_factors(obj, perm), prog)


def ring_site_marginals(config: PartitionedCCAConfig, state: P.ProcState, sites: int) -> np.ndarray:
    """Per-site occupation: one minus the weight of the local all-zero state."""
    m = config.cell_factors
    out = np.zeros(sites)
    for i in range(sites):
        keep = list(range(i * m, (i + 1) * m))
        drop = [j for j in range(len(state.obj.factors)) if j not in keep]
        local = P.apply(P.discard(state.obj, drop), state)
        if config.backend == P.QUANTUM:
            out[i] = 1.0 - float(np.real(local.data[0, 0]))
        else:
            out[i] = 1.0 - float(local.data[0])
    return out
