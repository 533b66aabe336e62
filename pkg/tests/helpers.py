"""Shared test utilities: independent oracles and random-order generators.

The oracles here deliberately re-derive everything from first principles
(path enumeration, brute-force reachability, dense linear algebra) so that
library results are checked against an independent route.
"""

from __future__ import annotations

import itertools

import numpy as np

from causal_fields.order import ExplicitOrder, build_explicit


def random_dag(rng, max_events: int = 10, p: float = 0.3) -> ExplicitOrder:
    n = int(rng.integers(1, max_events + 1))
    names = [f"e{i}" for i in range(n)]
    edges = [
        (names[i], names[j])
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < p
    ]
    return build_explicit(names, edges)


def chains_to(omega: ExplicitOrder, x) -> list[tuple]:
    """All maximal chains ending at x (paths from the infinite past)."""

    def walk(suffix):
        preds = omega.immediate_predecessors(suffix[0])
        if not preds:
            yield tuple(suffix)
            return
        for p in preds:
            yield from walk([p] + suffix)

    return list(walk([x]))


def future_domain_oracle(omega: ExplicitOrder, a) -> frozenset:
    """x is in D+(A) iff every maximal chain ending at x intersects A."""
    a = frozenset(a)
    out = set()
    for x in omega.events:
        if all(set(c) & a for c in chains_to(omega, x)):
            out.add(x)
    return frozenset(out)


def reachable_oracle(omega, x, y, max_depth: int = 64) -> bool:
    """Breadth-first search over immediate successors."""
    frontier = {x}
    seen = {x}
    for _ in range(max_depth):
        if y in frontier:
            return True
        frontier = {
            s for e in frontier for s in omega.immediate_successors(e)
        } - seen
        if not frontier:
            break
        seen |= frontier
    return y in seen


def all_subsets(items, max_size=None):
    items = list(items)
    hi = len(items) if max_size is None else min(max_size, len(items))
    for k in range(hi + 1):
        yield from (frozenset(c) for c in itertools.combinations(items, k))


# -- finite-difference Dirac oracle (convergence reference) --------------------

def upwind_coin(m: float, eps: float) -> np.ndarray:
    """First-order finite-difference mass coupling: forward Euler,
    normalised to stay in the probability-preserving class.  Transport is
    upwind differencing at unit Courant number, i.e. the exact shift."""
    c = np.array([[1.0, -1j * m * eps], [-1j * m * eps, 1.0]])
    return c / np.sqrt(1.0 + (m * eps) ** 2)


def dirac_packet(eps: float, length: float, width: float, kick: float) -> np.ndarray:
    """A right-moving Gaussian packet sampled on a ring of physical size
    ``length`` at mesh ``eps``."""
    sites = int(round(length / eps))
    x = np.arange(sites) * eps
    env = np.exp(-((x - length / 2) ** 2) / (2 * width ** 2))
    psi = np.zeros((2, sites), dtype=complex)
    psi[0] = env * np.exp(1j * kick * x)
    return psi / np.linalg.norm(psi)


def dirac_dressed_run(eps, coin, m, t_phys, length, width, kick) -> np.ndarray:
    """Evolve a packet to the fixed physical time and return the physical
    amplitude field in the symmetrised (half-coin dressed) frame.

    The one-step operator is shift-after-coin; conjugating by half a coin
    turns it into the symmetric splitting, which is the frame in which the
    lattice state is compared against the continuum field.
    """
    from causal_fields.cca import mass_coin, single_particle_step

    half = mass_coin(m, eps / 2)
    psi = np.linalg.inv(half) @ dirac_packet(eps, length, width, kick).reshape(2, -1)
    for _ in range(int(round(t_phys / eps))):
        psi = single_particle_step(psi, coin)
    return (half @ psi.reshape(2, -1)) / np.sqrt(eps)


def dirac_convergence_deviations(
    m: float = 1.0,
    t_phys: float = 4.0,
    eps0: float = 0.2,
    halvings: int = 3,
    length: float = 51.2,
    width: float = 2.0,
    kick: float = 1.0,
) -> list[float]:
    """Max-norm deviation of the automaton from the finite-difference
    oracle run at a fixed fine mesh (the reference solution), at fixed
    physical time, for successive halvings of the automaton mesh."""
    from causal_fields.cca import mass_coin

    eps_min = eps0 / (2 ** halvings)
    eps_ref = eps_min / 8
    phi_ref = dirac_dressed_run(eps_ref, upwind_coin(m, eps_ref), m, t_phys, length, width, kick)
    out = []
    for h in range(halvings + 1):
        eps = eps0 / (2 ** h)
        phi = dirac_dressed_run(eps, mass_coin(m, eps), m, t_phys, length, width, kick)
        stride = int(round(eps / eps_ref))
        out.append(float(np.max(np.abs(phi - phi_ref[:, ::stride]))))
    return out


# -- dense quantum oracle ------------------------------------------------------

def random_unitary(rng, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, d: int) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def dense_superoperator(f) -> np.ndarray:
    """Column-stacked superoperator built by evaluating a morphism on every
    matrix unit (or basis vector) via the step interpreter."""
    from causal_fields import process as P

    d = f.dom.dim
    if f.backend == "quantum":
        cols = []
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                cols.append(P.apply(f, P.ProcState(f.dom, e)).data.reshape(-1))
        return np.array(cols).T
    cols = []
    for i in range(d):
        v = np.zeros(d)
        v[i] = 1.0
        cols.append(P.apply(f, P.ProcState(f.dom, v)).data)
    return np.array(cols).T
