"""Process backends: symmetric monoidal composition with discarding.

Two concrete backends share one morphism representation:

* ``quantum``  -- finite-dimensional channels acting on density operators;
* ``classical`` -- stochastic maps acting on probability vectors.

Morphisms are lazy kernel programs (sequences of elementary steps), never
dense superoperators.  ``apply`` interprets a program step by step on a
state; equality checking evaluates both programs on the full operator
basis (quantum) or the standard basis (classical) via a compiled Kraus /
matrix form of the program, and compares the results entrywise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Sequence

import numpy as np

from .errors import (
    BackendMismatch,
    BadFactorIndex,
    NotStochastic,
    NotUnitary,
    ShapeMismatch,
)

QUANTUM = "quantum"
CLASSICAL = "classical"

#: tolerance for validity predicates (unitarity, normalisation, ...)
VALIDITY_TOL = 1e-10
#: tolerance for oracle agreement in tests
ORACLE_TOL = 1e-12

#: refuse to compile programs on spaces larger than this
_MAX_COMPILE_DIM = 4096
#: switch basis-sweep comparisons to the Frobenius bound above this size
_MAX_ENTRYWISE_DIM = 4096


# ---------------------------------------------------------------------------
# objects and states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcObject:
    """A backend object: an ordered list of atomic tensor factors."""

    backend: str
    factors: tuple[int, ...]

    def __post_init__(self):
        if self.backend not in (QUANTUM, CLASSICAL):
            raise BackendMismatch(f"unknown backend {self.backend!r}")
        if any(d < 1 for d in self.factors):
            raise ShapeMismatch("factor dimensions must be >= 1")

    @property
    def dim(self) -> int:
        return prod(self.factors)

    @property
    def is_unit(self) -> bool:
        return len(self.factors) == 0


def unit(backend: str) -> ProcObject:
    return ProcObject(backend, ())


def tensor_obj(a: ProcObject, b: ProcObject) -> ProcObject:
    if a.backend != b.backend:
        raise BackendMismatch(f"{a.backend} vs {b.backend}")
    return ProcObject(a.backend, a.factors + b.factors)


@dataclass(frozen=True)
class ProcState:
    """A state on a ProcObject: density operator or probability vector."""

    obj: ProcObject
    data: np.ndarray

    def __post_init__(self):
        d = self.obj.dim
        want = (d, d) if self.obj.backend == QUANTUM else (d,)
        if self.data.shape != want:
            raise ShapeMismatch(f"state data {self.data.shape}, expected {want}")

    @property
    def norm(self) -> float:
        if self.obj.backend == QUANTUM:
            return float(np.real(np.trace(self.data)))
        return float(np.sum(self.data))


def state(obj: ProcObject, data) -> ProcState:
    arr = np.asarray(data, dtype=complex if obj.backend == QUANTUM else float)
    return ProcState(obj, arr)


def basis_state(obj: ProcObject, index: int) -> ProcState:
    d = obj.dim
    if not 0 <= index < d:
        raise ShapeMismatch(f"basis index {index} out of range for dim {d}")
    if obj.backend == QUANTUM:
        rho = np.zeros((d, d), dtype=complex)
        rho[index, index] = 1.0
        return ProcState(obj, rho)
    p = np.zeros(d)
    p[index] = 1.0
    return ProcState(obj, p)


# ---------------------------------------------------------------------------
# kernel steps
#
# A step is a tuple, interpreted against the current factor list:
#   ("matrix", M, idx)   apply M (unitary / stochastic) in place on factors idx
#   ("kraus", Ms, idx)   apply the Kraus family in place on factors idx
#   ("discard", idx)     partial trace / marginal sum over factors idx
#   ("permute", perm)    reorder all factors: new[i] = old[perm[i]]
# ---------------------------------------------------------------------------

def _step_out_factors(factors: tuple[int, ...], step) -> tuple[int, ...]:
    kind = step[0]
    n = len(factors)
    if kind in ("matrix", "kraus"):
        idx = step[2]
        if len(set(idx)) != len(idx) or any(not 0 <= i < n for i in idx):
            raise BadFactorIndex(f"bad factor indices {idx} for {n} factors")
        m = prod(factors[i] for i in idx)
        mat = step[1] if kind == "matrix" else step[1][0]
        if mat.shape != (m, m):
            raise ShapeMismatch(f"matrix {mat.shape} on factors of total dim {m}")
        return factors
    if kind == "discard":
        idx = step[1]
        if len(set(idx)) != len(idx) or any(not 0 <= i < n for i in idx):
            raise BadFactorIndex(f"bad factor indices {idx} for {n} factors")
        return tuple(d for i, d in enumerate(factors) if i not in set(idx))
    if kind == "permute":
        perm = step[1]
        if sorted(perm) != list(range(n)):
            raise BadFactorIndex(f"{perm} is not a permutation of {n} factors")
        return tuple(factors[p] for p in perm)
    raise ShapeMismatch(f"unknown step kind {kind!r}")


@dataclass(frozen=True)
class ProcMorphism:
    """A morphism as a kernel program from ``dom`` to ``cod``."""

    dom: ProcObject
    cod: ProcObject
    steps: tuple = ()
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        facs = self.dom.factors
        for step in self.steps:
            facs = _step_out_factors(facs, step)
        if facs != self.cod.factors:
            raise ShapeMismatch(
                f"program produces factors {facs}, declared cod {self.cod.factors}"
            )

    @property
    def backend(self) -> str:
        return self.dom.backend


def identity(obj: ProcObject) -> ProcMorphism:
    return ProcMorphism(obj, obj, ())


def discard(obj: ProcObject, which: Sequence[int] | None = None) -> ProcMorphism:
    """Discard the chosen factors (all of them by default)."""
    if which is None:
        which = range(len(obj.factors))
    idx = tuple(sorted(which))
    if not idx:
        return identity(obj)
    keep = tuple(d for i, d in enumerate(obj.factors) if i not in set(idx))
    return ProcMorphism(obj, ProcObject(obj.backend, keep), (("discard", idx),))


def unitary_channel(obj: ProcObject, u, factors: Sequence[int] | None = None,
                    tol: float = VALIDITY_TOL) -> ProcMorphism:
    """The channel rho -> U rho U^dag on the chosen factors of a quantum object."""
    if obj.backend != QUANTUM:
        raise BackendMismatch("unitary_channel needs a quantum object")
    u = np.asarray(u, dtype=complex)
    if factors is None:
        factors = range(len(obj.factors))
    idx = tuple(factors)
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > tol:
        raise NotUnitary("matrix is not unitary within tolerance")
    return ProcMorphism(obj, obj, (("matrix", u, idx),))


def kraus_channel(obj: ProcObject, kraus_ops, factors: Sequence[int] | None = None) -> ProcMorphism:
    """A completely positive map given by a Kraus family on the chosen factors."""
    if obj.backend != QUANTUM:
        raise BackendMismatch("kraus_channel needs a quantum object")
    ks = tuple(np.asarray(k, dtype=complex) for k in kraus_ops)
    if factors is None:
        factors = range(len(obj.factors))
    return ProcMorphism(obj, obj, (("kraus", ks, tuple(factors)),))


def stochastic_map(obj: ProcObject, s, factors: Sequence[int] | None = None) -> ProcMorphism:
    """A (sub)stochastic matrix acting on the chosen factors of a classical object."""
    if obj.backend != CLASSICAL:
        raise BackendMismatch("stochastic_map needs a classical object")
    s = np.asarray(s, dtype=float)
    if np.min(s) < -VALIDITY_TOL:
        raise NotStochastic("negative entries in stochastic matrix")
    if factors is None:
        factors = range(len(obj.factors))
    return ProcMorphism(obj, obj, (("matrix", s, tuple(factors)),))


def permute_factors(obj: ProcObject, perm: Sequence[int]) -> ProcMorphism:
    perm = tuple(perm)
    cod = ProcObject(obj.backend, tuple(obj.factors[p] for p in perm))
    if perm == tuple(range(len(perm))):
        return identity(obj)
    return ProcMorphism(obj, cod, (("permute", perm),))


def compose(g: ProcMorphism, f: ProcMorphism) -> ProcMorphism:
    """g after f (kernel concatenation)."""
    if f.cod != g.dom:
        raise ShapeMismatch(f"cannot compose: cod {f.cod} != dom {g.dom}")
    return ProcMorphism(f.dom, g.cod, f.steps + g.steps)


def compose_all(*morphisms: ProcMorphism) -> ProcMorphism:
    """Compose left to right: compose_all(f, g, h) = h . g . f."""
    out = morphisms[0]
    for m in morphisms[1:]:
        out = compose(m, out)
    return out


def _shift_step(step, offset: int, n_other_after: int, n_self: int):
    """Reindex a step acting on the block of ``n_self`` factors at ``offset``."""
    kind = step[0]
    if kind in ("matrix", "kraus"):
        return (kind, step[1], tuple(i + offset for i in step[2]))
    if kind == "discard":
        return (kind, tuple(i + offset for i in step[1]))
    if kind == "permute":
        perm = step[1]
        if offset == 0:
            return (kind, perm + tuple(range(n_self, n_self + n_other_after)))
        return (kind, tuple(range(offset)) + tuple(p + offset for p in perm))
    raise ShapeMismatch(f"unknown step kind {kind!r}")


def tensor_mor(f: ProcMorphism, g: ProcMorphism) -> ProcMorphism:
    """f tensor g; runs f on the left block, then g on the right block."""
    if f.backend != g.backend:
        raise BackendMismatch(f"{f.backend} vs {g.backend}")
    dom = tensor_obj(f.dom, g.dom)
    cod = tensor_obj(f.cod, g.cod)
    n_b = len(g.dom.factors)
    steps = []
    facs = f.dom.factors
    for step in f.steps:
        steps.append(_shift_step(step, 0, n_b, len(facs)))
        facs = _step_out_factors(facs, step)
    offset = len(f.cod.factors)
    gfacs = g.dom.factors
    for step in g.steps:
        steps.append(_shift_step(step, offset, 0, len(gfacs)))
        gfacs = _step_out_factors(gfacs, step)
    return ProcMorphism(dom, cod, tuple(steps))


# ---------------------------------------------------------------------------
# interpretation of kernel programs on states
# ---------------------------------------------------------------------------

def _apply_on_axes(t: np.ndarray, m: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract the matrix ``m`` onto the given tensor axes, in place."""
    k = len(axes)
    dims = tuple(t.shape[a] for a in axes)
    mt = m.reshape(dims + dims)
    out = np.tensordot(mt, t, axes=(tuple(range(k, 2 * k)), tuple(axes)))
    return np.moveaxis(out, range(k), axes)


def apply(f: ProcMorphism, rho: ProcState) -> ProcState:
    """Evaluate the kernel program left to right on a state."""
    if rho.obj != f.dom:
        raise ShapeMismatch(f"state on {rho.obj}, morphism from {f.dom}")
    facs = list(f.dom.factors)
    quantum = f.backend == QUANTUM
    t = rho.data.reshape(tuple(facs) * 2 if quantum else tuple(facs))
    for step in f.steps:
        kind = step[0]
        n = len(facs)
        if kind == "matrix":
            m, idx = step[1], step[2]
            if quantum:
                t = _apply_on_axes(t, m, idx)
                t = _apply_on_axes(t, m.conj(), [i + n for i in idx])
            else:
                t = _apply_on_axes(t, m, idx)
        elif kind == "kraus":
            ks, idx = step[1], step[2]
            acc = None
            for k in ks:
                term = _apply_on_axes(t, k, idx)
                term = _apply_on_axes(term, k.conj(), [i + n for i in idx])
                acc = term if acc is None else acc + term
            t = acc
        elif kind == "discard":
            for i in sorted(step[1], reverse=True):
                if quantum:
                    t = np.trace(t, axis1=i, axis2=i + n)
                    n -= 1
                else:
                    t = np.sum(t, axis=i)
            facs = [d for j, d in enumerate(facs) if j not in set(step[1])]
            continue
        elif kind == "permute":
            perm = step[1]
            if quantum:
                t = t.transpose(tuple(perm) + tuple(p + n for p in perm))
            else:
                t = t.transpose(perm)
            facs = [facs[p] for p in perm]
            continue
        facs = list(_step_out_factors(tuple(facs), step))
    d = f.cod.dim
    t = t.reshape((d, d) if quantum else (d,))
    return ProcState(f.cod, t)


# ---------------------------------------------------------------------------
# compiled form: defer discards to the end
#
# Discarding a factor commutes with every later step that does not touch it,
# so a program is equivalent to a branch of full-space operators followed by
# one partial trace / marginal sum.  The compiled form of a quantum program
# is the Kraus family of the channel; of a classical program, its matrix.
# ---------------------------------------------------------------------------

def _embed_full(m: np.ndarray, positions: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Extend an operator on the chosen tensor positions to the full space."""
    n = len(dims)
    pos = list(positions)
    rest = [i for i in range(n) if i not in set(pos)]
    rest_dim = prod(dims[i] for i in rest)
    big = np.kron(m, np.eye(rest_dim, dtype=m.dtype))
    order = pos + rest
    shape = tuple(dims[i] for i in order)
    big = big.reshape(shape + shape)
    inv = np.argsort(order)
    big = big.transpose(tuple(inv) + tuple(inv + n))
    d = prod(dims)
    return big.reshape(d, d)


def compile_kernel(f: ProcMorphism) -> np.ndarray:
    """Compile a program to its channel form.

    Quantum: an ndarray of shape (r, cod.dim, dom.dim) holding the Kraus
    family.  Classical: an ndarray of shape (cod.dim, dom.dim).  The result
    is cached on the morphism.
    """
    cached = f._cache.get("kernel")
    if cached is not None:
        return cached
    d = f.dom.dim
    if d > _MAX_COMPILE_DIM:
        raise ShapeMismatch(f"refusing to compile a program on dimension {d}")
    dims = f.dom.factors
    n = len(dims)
    quantum = f.backend == QUANTUM
    alive = list(range(n))
    discarded: list[int] = []
    dtype = complex if quantum else float
    mats = [np.eye(d, dtype=dtype)]
    for step in f.steps:
        kind = step[0]
        if kind == "matrix":
            m_full = _embed_full(step[1].astype(dtype), [alive[i] for i in step[2]], dims)
            mats = [m_full @ a for a in mats]
        elif kind == "kraus":
            embedded = [_embed_full(k, [alive[i] for i in step[2]], dims) for k in step[1]]
            mats = [e @ a for e in embedded for a in mats]
        elif kind == "discard":
            idx = set(step[1])
            discarded.extend(alive[i] for i in sorted(idx))
            alive = [w for i, w in enumerate(alive) if i not in idx]
        elif kind == "permute":
            alive = [alive[p] for p in step[1]]
    k_dim = prod(dims[w] for w in alive)
    e_dim = prod(dims[w] for w in discarded)
    order = tuple(alive) + tuple(discarded) + (n,)
    branches = []
    for a in mats:
        t = a.reshape(dims + (d,)).transpose(order).reshape(k_dim, e_dim, d)
        branches.append(t)
    if quantum:
        out = np.concatenate([t.transpose(1, 0, 2) for t in branches], axis=0)
        out = np.ascontiguousarray(out)
    else:
        if len(branches) != 1:
            raise ShapeMismatch("classical programs cannot contain kraus steps")
        out = branches[0].sum(axis=1)
    f._cache["kernel"] = out
    return out


def kraus_family(f: ProcMorphism) -> np.ndarray:
    if f.backend != QUANTUM:
        raise BackendMismatch("kraus_family needs a quantum morphism")
    return compile_kernel(f)


def transfer_matrix(f: ProcMorphism) -> np.ndarray:
    if f.backend != CLASSICAL:
        raise BackendMismatch("transfer_matrix needs a classical morphism")
    return compile_kernel(f)


def _choi_maxdiff(ms: np.ndarray, ns: np.ndarray, chunk: int = 512) -> float:
    """Max entrywise deviation between the operator-basis sweeps of two
    Kraus families (equivalently between their Choi matrices)."""
    v = ms.reshape(ms.shape[0], -1).T  # (cod*dom, r1)
    w = ns.reshape(ns.shape[0], -1).T
    rows = v.shape[0]
    worst = 0.0
    for r0 in range(0, rows, chunk):
        r1 = min(r0 + chunk, rows)
        block = v[r0:r1] @ v.conj().T - w[r0:r1] @ w.conj().T
        worst = max(worst, float(np.max(np.abs(block))))
    return worst


def _choi_frobdiff(ms: np.ndarray, ns: np.ndarray) -> float:
    """Frobenius norm of the Choi difference via Gram matrices: an upper
    bound on the entrywise deviation that never materialises the Choi."""
    v = ms.reshape(ms.shape[0], -1)
    w = ns.reshape(ns.shape[0], -1)
    gvv = np.abs(v @ v.conj().T) ** 2
    gww = np.abs(w @ w.conj().T) ** 2
    gvw = np.abs(v @ w.conj().T) ** 2
    val = float(np.sum(gvv) + np.sum(gww) - 2.0 * np.sum(gvw))
    return float(np.sqrt(max(val, 0.0)))


def deviation(f: ProcMorphism, g: ProcMorphism) -> float:
    """Max entrywise deviation of the two programs over a basis sweep.

    Quantum morphisms are evaluated on the full operator basis E_ij of the
    input space (the sweep outputs are compared entrywise; they are exactly
    the entries of the Choi matrices).  Classical morphisms are evaluated on
    the standard basis.  Above ``_MAX_ENTRYWISE_DIM`` the reported value is
    the Frobenius norm of the Choi difference instead, which bounds the
    entrywise deviation from above.
    """
    if f.dom != g.dom or f.cod != g.cod:
        raise ShapeMismatch("morphisms must share dom and cod")
    if f.backend == QUANTUM:
        ms, ns = kraus_family(f), kraus_family(g)
        if f.dom.dim * f.cod.dim > _MAX_ENTRYWISE_DIM:
            return _choi_frobdiff(ms, ns)
        return _choi_maxdiff(ms, ns)
    a, b = transfer_matrix(f), transfer_matrix(g)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def morphisms_equal(f: ProcMorphism, g: ProcMorphism, tol: float = VALIDITY_TOL) -> bool:
    return deviation(f, g) <= tol


def kernels_identical(f: ProcMorphism, g: ProcMorphism) -> bool:
    """Exact structural equality of two kernel programs (no tolerance)."""
    if f.dom != g.dom or f.cod != g.cod or len(f.steps) != len(g.steps):
        return False
    for s, t in zip(f.steps, g.steps):
        if s[0] != t[0]:
            return False
        if s[0] in ("matrix", "kraus"):
            if s[2] != t[2]:
                return False
            if s[0] == "matrix":
                if not np.array_equal(s[1], t[1]):
                    return False
            else:
                if len(s[1]) != len(t[1]) or any(
                    not np.array_equal(a, b) for a, b in zip(s[1], t[1])
                ):
                    return False
        else:
            if s[1] != t[1]:
                return False
    return True


def is_normalised(f: ProcMorphism, tol: float = VALIDITY_TOL) -> bool:
    """Whether discard-after equals discard-before.

    Evaluated on the operator basis of the input space (quantum: the
    condition reads sum_e M_e^dag M_e = I on the compiled family) or on all
    basis vectors (classical: unit column sums).
    """
    if f.backend == QUANTUM:
        ms = kraus_family(f)
        s = np.einsum("rki,rkj->ij", ms.conj(), ms)
        return float(np.max(np.abs(s - np.eye(f.dom.dim)))) <= tol
    t = transfer_matrix(f)
    return float(np.max(np.abs(t.sum(axis=0) - 1.0))) <= tol


def is_normalised_state(rho: ProcState, tol: float = VALIDITY_TOL) -> bool:
    return abs(rho.norm - 1.0) <= tol


def states_equal(a: ProcState, b: ProcState, tol: float = VALIDITY_TOL) -> bool:
    if a.obj != b.obj:
        return False
    return float(np.max(np.abs(a.data - b.data))) <= tol


# ---------------------------------------------------------------------------
# Choi cross-validation (small dimensions only)
# ---------------------------------------------------------------------------

def choi_matrix(f: ProcMorphism) -> np.ndarray:
    """The Choi matrix of a quantum program, for cross-validation.

    Only sensible at small total dimension; entries are indexed
    Choi[(a, i), (b, j)] = <a| f(|i><j|) |b>.
    """
    ms = kraus_family(f)
    v = ms.reshape(ms.shape[0], -1)
    return v.T @ v.conj()


def is_completely_positive(f: ProcMorphism, tol: float = VALIDITY_TOL) -> bool:
    """Positivity of the Choi matrix; holds by construction for programs
    built from the generators in this module."""
    if f.dom.dim * f.cod.dim > 256:
        raise ShapeMismatch("Choi cross-validation is limited to small dimensions")
    eigs = np.linalg.eigvalsh(choi_matrix(f))
    return float(eigs.min()) >= -tol


# ---------------------------------------------------------------------------
# matrix JSON interchange
# ---------------------------------------------------------------------------

def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m)
    return {
        "shape": list(m.shape),
        "data": [[float(np.real(x)), float(np.imag(x))] for x in m.reshape(-1)],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    shape = tuple(obj["shape"])
    flat = np.array([complex(re, im) for re, im in obj["data"]])
    if flat.size != prod(shape):
        raise ShapeMismatch("matrix data does not match declared shape")
    return flat.reshape(shape)
