import numpy as np
import pytest

from causal_fields import process as P
from causal_fields.errors import (
    BackendMismatch,
    BadFactorIndex,
    NotStochastic,
    NotUnitary,
    ShapeMismatch,
)

from helpers import dense_superoperator, random_density, random_unitary

RNG = np.random.default_rng(42)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def qobj(*factors):
    return P.ProcObject(P.QUANTUM, factors)


def cobj(*factors):
    return P.ProcObject(P.CLASSICAL, factors)


# -- objects ------------------------------------------------------------------

def test_tensor_obj_unit_law():
    a = qobj(2, 3)
    assert P.tensor_obj(a, P.unit(P.QUANTUM)) == a
    assert P.tensor_obj(P.unit(P.QUANTUM), a) == a


def test_tensor_obj_dims():
    assert P.tensor_obj(qobj(2), qobj(3)).dim == 6


def test_tensor_obj_backend_mismatch():
    with pytest.raises(BackendMismatch):
        P.tensor_obj(qobj(2), cobj(2))


# -- composition --------------------------------------------------------------

def test_identity_unit_for_compose():
    a = qobj(2, 2)
    u = random_unitary(RNG, 4)
    f = P.unitary_channel(a, u)
    assert P.morphisms_equal(P.compose(P.identity(a), f), f)
    assert P.morphisms_equal(P.compose(f, P.identity(a)), f)


def test_discard_all_after_unitary_is_discard_all():
    a = qobj(2, 2)
    u = random_unitary(RNG, 4)
    lhs = P.compose(P.discard(a), P.unitary_channel(a, u))
    assert P.morphisms_equal(lhs, P.discard(a))


def test_permutations_compose():
    a = qobj(2, 3, 4)
    p1 = P.permute_factors(a, (1, 2, 0))
    p2 = P.permute_factors(p1.cod, (2, 0, 1))
    comp = P.compose(p2, p1)
    assert comp.cod == a
    assert P.morphisms_equal(comp, P.identity(a))


def test_compose_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        P.compose(P.identity(qobj(2)), P.identity(qobj(3)))


# -- discarding ----------------------------------------------------------------

def test_discard_all_normalised_state_gives_scalar_one():
    a = qobj(2, 2)
    rho = P.state(a, random_density(RNG, 4))
    out = P.apply(P.discard(a), rho)
    assert out.obj.is_unit
    assert abs(out.data[0, 0] - 1.0) < 1e-12


def test_partial_trace_of_product_state():
    a = qobj(2, 2)
    r1 = random_density(RNG, 2)
    r2 = random_density(RNG, 2)
    rho = P.state(a, np.kron(r1, r2))
    out = P.apply(P.discard(a, [1]), rho)
    assert np.max(np.abs(out.data - r1)) < 1e-12
    out0 = P.apply(P.discard(a, [0]), rho)
    assert np.max(np.abs(out0.data - r2)) < 1e-12


def test_discard_unit_is_scalar_one():
    f = P.discard(P.unit(P.QUANTUM))
    out = P.apply(f, P.state(P.unit(P.QUANTUM), [[1.0]]))
    assert out.data[0, 0] == 1.0


def test_discard_respects_tensor():
    a, b = qobj(2), qobj(3)
    lhs = P.discard(P.tensor_obj(a, b))
    rhs = P.tensor_mor(P.discard(a), P.discard(b))
    assert P.morphisms_equal(lhs, rhs)


def test_bad_factor_index():
    with pytest.raises(BadFactorIndex):
        P.discard(qobj(2), [3])


# -- unitary channels --------------------------------------------------------------

def test_identity_matrix_is_identity_channel():
    a = qobj(2, 2)
    f = P.unitary_channel(a, np.eye(4))
    assert P.morphisms_equal(f, P.identity(a))


def test_pauli_x_flips_basis_state():
    a = qobj(2)
    f = P.unitary_channel(a, SX)
    out = P.apply(f, P.basis_state(a, 0))
    assert np.max(np.abs(out.data - np.array([[0, 0], [0, 1]]))) < 1e-12


def test_random_unitary_channel_preserves_trace_and_positivity():
    a = qobj(2, 2)
    u = random_unitary(RNG, 4)
    f = P.unitary_channel(a, u)
    for _ in range(5):
        rho = P.state(a, random_density(RNG, 4))
        out = P.apply(f, rho)
        assert abs(out.norm - 1.0) < 1e-12
        assert np.linalg.eigvalsh(out.data).min() > -1e-12


def test_not_unitary_rejected():
    with pytest.raises(NotUnitary):
        P.unitary_channel(qobj(2), np.array([[1, 0], [0, 0.5]]))


# -- evaluation ----------------------------------------------------------------------

def test_apply_identity():
    a = qobj(2, 2)
    rho = P.state(a, random_density(RNG, 4))
    out = P.apply(P.identity(a), rho)
    assert np.array_equal(out.data, rho.data)


def test_apply_agrees_with_dense_superoperator():
    a = qobj(2, 2)
    u = random_unitary(RNG, 4)
    v = random_unitary(RNG, 2)
    f = P.compose_all(
        P.unitary_channel(a, u),
        P.permute_factors(a, (1, 0)),
        P.unitary_channel(a, v, [0]),
        P.discard(a, [1]),
    )
    s = dense_superoperator(f)
    ms = P.kraus_family(f)
    s_kraus = np.einsum("rai,rbj->abij", ms, ms.conj()).reshape(s.shape[0], -1)
    # dense_superoperator columns are indexed (i, j); match layouts
    d = f.dom.dim
    s_cols = s_kraus.reshape(f.cod.dim ** 2, d, d).reshape(s.shape[0], d * d)
    assert np.max(np.abs(s - s_cols)) < 1e-12


def test_apply_agrees_with_dense_superoperator_dim16():
    a = qobj(2, 2, 2, 2)
    f = P.compose_all(
        P.unitary_channel(a, random_unitary(RNG, 4), [1, 3]),
        P.discard(a, [0]),
        P.unitary_channel(a.__class__(a.backend, (2, 2, 2)), random_unitary(RNG, 2), [2]),
    )
    s = dense_superoperator(f)
    ms = P.kraus_family(f)
    d = f.dom.dim
    s_kraus = np.einsum("rai,rbj->abij", ms, ms.conj()).reshape(f.cod.dim ** 2, d * d)
    assert np.max(np.abs(s - s_kraus)) < 1e-12


def test_composition_of_normalised_is_normalised():
    a = qobj(2, 2)
    f = P.unitary_channel(a, random_unitary(RNG, 4))
    g = P.discard(a, [1])
    h = P.unitary_channel(g.cod, random_unitary(RNG, 2))
    comp = P.compose_all(f, g, h)
    assert P.is_normalised(f) and P.is_normalised(g) and P.is_normalised(h)
    assert P.is_normalised(comp)


def test_interchange_law():
    a, b = qobj(2), qobj(2, 2)
    f1 = P.unitary_channel(a, random_unitary(RNG, 2))
    g1 = P.unitary_channel(a, random_unitary(RNG, 2))
    f2 = P.compose(P.discard(b, [0]), P.unitary_channel(b, random_unitary(RNG, 4)))
    g2 = P.unitary_channel(f2.cod, random_unitary(RNG, 2))
    lhs = P.compose(P.tensor_mor(g1, g2), P.tensor_mor(f1, f2))
    rhs = P.tensor_mor(P.compose(g1, f1), P.compose(g2, f2))
    assert P.morphisms_equal(lhs, rhs, tol=1e-12)


def test_tensor_on_product_states_is_componentwise():
    a, b = qobj(2), qobj(3)
    u = random_unitary(RNG, 2)
    v = random_unitary(RNG, 3)
    f, g = P.unitary_channel(a, u), P.unitary_channel(b, v)
    ra, rb = random_density(RNG, 2), random_density(RNG, 3)
    joint = P.apply(P.tensor_mor(f, g), P.state(P.tensor_obj(a, b), np.kron(ra, rb)))
    want = np.kron(P.apply(f, P.state(a, ra)).data, P.apply(g, P.state(b, rb)).data)
    assert np.max(np.abs(joint.data - want)) < 1e-12


# -- normalisation and equality ----------------------------------------------------------

def test_unitary_channel_is_normalised():
    assert P.is_normalised(P.unitary_channel(qobj(2, 2), random_unitary(RNG, 4)))


def test_discard_is_normalised():
    assert P.is_normalised(P.discard(qobj(2, 3)))


def test_scaled_kernel_not_normalised():
    a = qobj(2)
    f = P.kraus_channel(a, [np.sqrt(0.5) * np.eye(2)])
    assert not P.is_normalised(f)


def test_morphisms_equal_self_and_distinct():
    a = qobj(2)
    f = P.unitary_channel(a, SX)
    assert P.morphisms_equal(f, f)
    assert not P.morphisms_equal(f, P.identity(a))


def test_equal_programs_different_steps():
    a = qobj(2, 2)
    # swapping via a permutation step vs via the SWAP unitary
    p = P.permute_factors(a, (1, 0))
    u = P.unitary_channel(a, SWAP)
    assert P.morphisms_equal(p, u, tol=1e-12)


def test_morphisms_equal_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        P.morphisms_equal(P.identity(qobj(2)), P.identity(qobj(3)))


# -- kraus channels -------------------------------------------------------------------------

def test_kraus_channel_matches_dense():
    a = qobj(2, 2)
    k0 = np.sqrt(0.3) * random_unitary(RNG, 2)
    k1 = np.sqrt(0.7) * random_unitary(RNG, 2)
    f = P.kraus_channel(a, [k0, k1], [1])
    rho = P.state(a, random_density(RNG, 4))
    out = P.apply(f, rho)
    big0 = np.kron(np.eye(2), k0)
    big1 = np.kron(np.eye(2), k1)
    want = big0 @ rho.data @ big0.conj().T + big1 @ rho.data @ big1.conj().T
    assert np.max(np.abs(out.data - want)) < 1e-12
    assert P.is_normalised(f)


def test_choi_cross_validation():
    a = qobj(2, 2)
    f = P.compose(P.discard(a, [0]), P.unitary_channel(a, random_unitary(RNG, 4)))
    assert P.is_completely_positive(f)
    choi = P.choi_matrix(f)
    # trace of the Choi matrix equals the input dimension for a channel
    assert abs(np.trace(choi) - a.dim) < 1e-10


# -- classical backend ------------------------------------------------------------------------

def test_stochastic_map_and_marginal():
    a = cobj(2, 2)
    s = np.array([[0.9, 0.2], [0.1, 0.8]])
    f = P.stochastic_map(a, s, [0])
    p = P.state(a, np.array([0.5, 0.0, 0.5, 0.0]))
    out = P.apply(f, p)
    assert abs(np.sum(out.data) - 1.0) < 1e-12
    marg = P.apply(P.discard(a, [1]), p)
    assert np.allclose(marg.data, [0.5, 0.5])


def test_negative_stochastic_rejected():
    with pytest.raises(NotStochastic):
        P.stochastic_map(cobj(2), np.array([[1.0, -0.1], [0.0, 1.1]]))


def test_classical_embedding_of_permutation():
    # a permutation unitary acting on diagonal states equals the stochastic map
    aq, ac = qobj(2, 2), cobj(2, 2)
    perm_u = SWAP
    fq = P.unitary_channel(aq, perm_u)
    fc = P.stochastic_map(ac, np.abs(perm_u) ** 2)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    out_q = P.apply(fq, P.state(aq, np.diag(p.astype(complex))))
    out_c = P.apply(fc, P.state(ac, p))
    assert np.max(np.abs(np.diag(out_q.data).real - out_c.data)) < 1e-12


def test_classical_transfer_matrix_agrees_with_dense():
    a = cobj(2, 3)
    s = RNG.random((6, 6))
    s /= s.sum(axis=0, keepdims=True)
    f = P.compose(P.discard(a, [1]), P.stochastic_map(a, s))
    assert np.max(np.abs(P.transfer_matrix(f) - dense_superoperator(f))) < 1e-12


def test_classical_normalised():
    a = cobj(2, 2)
    s = RNG.random((4, 4))
    s /= s.sum(axis=0, keepdims=True)
    assert P.is_normalised(P.stochastic_map(a, s))


# -- environment equations ----------------------------------------------------------------------

def test_discard_tensor_equations_random_shapes():
    for _ in range(5):
        nf_a = int(RNG.integers(1, 3))
        nf_b = int(RNG.integers(1, 3))
        a = qobj(*(int(RNG.integers(2, 4)) for _ in range(nf_a)))
        b = qobj(*(int(RNG.integers(2, 4)) for _ in range(nf_b)))
        lhs = P.discard(P.tensor_obj(a, b))
        rhs = P.tensor_mor(P.discard(a), P.discard(b))
        assert P.morphisms_equal(lhs, rhs, tol=1e-12)


def test_discard_of_unit_is_one():
    f = P.discard(P.unit(P.QUANTUM))
    assert f.dom.is_unit and f.cod.is_unit
    assert P.morphisms_equal(f, P.identity(P.unit(P.QUANTUM)))


# -- matrix json ------------------------------------------------------------------------------------

def test_matrix_json_roundtrip():
    m = random_unitary(RNG, 3)
    again = P.matrix_from_json(P.matrix_to_json(m))
    assert np.max(np.abs(again - m)) < 1e-15
