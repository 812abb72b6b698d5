import numpy as np
import pytest
from hypothesis import given, strategies as st

from noetherq import random_maps as rm
from noetherq.channels import channel_super, check_flags, transpose_map
from noetherq.linalg_core import (
    DEFAULT_TOL, ConvergenceError, DimensionMismatch, OperatorSubspace, PreconditionError,
    SuperOperator, Tolerances, algebra_closure, apply_super, containment_residual, full_space,
    is_hermitian, is_projection, is_psd, kernel_subspace, matrix_unit, multiplication_closure_residual,
    pairing_residual, psd_sqrt, span_subspace, subspace_contains, subspace_distance,
    subspace_intersect, trace_dual, unvec, vec,
)
from noetherq.semigroups import LindbladGenerator, lindblad_super

from oracles import exact_fixed_space_dim_m3, is_in_span, kernel_dim, m3_map, superop_matrix

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 4)

SZ = np.diag([1.0, -1.0]).astype(complex)
E11, E12, E21, E22 = (matrix_unit(i, j, 2) for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
DIAGONALS = span_subspace([E11, E22], 2)


# ---------------------------------------------------------------- tolerances

def test_default_tolerances():
    assert (DEFAULT_TOL.rank_tol, DEFAULT_TOL.eq_tol, DEFAULT_TOL.psd_tol) == (1e-10, 1e-9, 1e-9)


@pytest.mark.parametrize("field", ["rank_tol", "eq_tol", "psd_tol"])
@pytest.mark.parametrize("bad", [0.0, -1e-3, float("nan"), float("inf")])
def test_tolerances_must_be_positive(field, bad):
    with pytest.raises(ValueError):
        Tolerances(**{field: bad})


# ---------------------------------------------------------------- predicates

def test_predicates_are_nested():
    P = np.diag([1.0, 0.0])
    H = np.array([[0.0, 1.0], [1.0, 0.0]])
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert is_projection(P) and is_hermitian(P) and is_psd(P)
    assert is_hermitian(H) and not is_psd(H) and not is_projection(H)
    assert not is_hermitian(N) and not is_psd(N) and not is_projection(N)


def test_psd_sqrt_of_projection_is_itself():
    P = np.diag([1.0, 0.0, 1.0])
    assert np.allclose(psd_sqrt(P), P)
    assert np.allclose(psd_sqrt(np.diag([1.0, 4.0])), np.diag([1.0, 2.0]))


@given(seeds, dims)
def test_psd_sqrt_squares_back(seed, d):
    A = rm.random_psd(d, seed)
    R = psd_sqrt(A)
    assert is_hermitian(R) and is_psd(R)
    assert np.linalg.norm(R @ R - A) <= 1e-9 * max(1, np.linalg.norm(A))


# ---------------------------------------------------------------- vectorization

@given(seeds, dims)
def test_vec_unvec_round_trip(seed, d):
    X = rm.random_operator(d, seed)
    assert np.array_equal(unvec(vec(X), d), X)
    assert np.array_equal(unvec(vec(X)), X)


def test_vec_is_column_stacking():
    X = np.array([[1, 2], [3, 4]])
    assert list(vec(X)) == [1, 3, 2, 4]


@given(seeds, dims)
def test_left_and_right_multiplication_superoperators(seed, d):
    rng = np.random.default_rng(seed)
    A, B, X = (rm.random_operator(d, rng) for _ in range(3))
    assert np.allclose(apply_super(SuperOperator.left(A), X), A @ X, atol=1e-9)
    assert np.allclose(apply_super(SuperOperator.right(B), X), X @ B, atol=1e-9)
    assert np.allclose(apply_super(SuperOperator.sandwich(A, B), X), A @ X @ B, atol=1e-9)
    # vec(A X B) = (B^T kron A) vec(X), written out independently
    assert np.allclose(np.kron(B.T, A) @ X.reshape(-1, order="F"), (A @ X @ B).reshape(-1, order="F"))


@given(seeds, dims)
def test_from_function_matches_matrix_unit_oracle(seed, d):
    A = rm.random_operator(d, seed)
    fn = lambda X: A @ X.T @ A.conj().T
    assert np.allclose(SuperOperator.from_function(fn, d).matrix, superop_matrix(fn, d))


# ---------------------------------------------------------------- apply_super

def test_apply_identity():
    X = rm.random_operator(3, 1)
    assert np.array_equal(apply_super(SuperOperator.identity(3), X), X)


def test_apply_left_multiplication_to_identity():
    A = np.diag([2.0, 3.0])
    assert np.allclose(apply_super(SuperOperator.left(A), np.eye(2)), np.diag([2.0, 3.0]))


def test_apply_transpose_to_matrix_unit():
    assert np.array_equal(apply_super(transpose_map(2), E12), E21)


def test_apply_rejects_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        apply_super(SuperOperator.identity(2), np.eye(3))
    with pytest.raises(DimensionMismatch):
        SuperOperator.identity(2) @ SuperOperator.identity(3)


def test_cached_flags_are_audited_against_recomputation():
    assert check_flags(SuperOperator(np.zeros((4, 4)), {"unital": True})) == {"unital": True}
    S = SuperOperator.identity(2)
    assert S.flags["unital"] and S.flags["completely_positive"]
    assert check_flags(S) == {}
    with pytest.raises(ValueError):
        SuperOperator(np.eye(4), {"bogus": True})


# ---------------------------------------------------------------- trace_dual

def test_dual_of_identity():
    assert np.array_equal(trace_dual(SuperOperator.identity(3)).matrix, np.eye(9))


@given(seeds, dims)
def test_dual_of_kraus_channel_is_adjoint_kraus_form(seed, d):
    ch = rm.random_kraus_channel(d, 3, "schrodinger", seed)
    expected = superop_matrix(lambda S: sum(A.conj().T @ S @ A for A in ch.kraus_ops), d)
    assert np.allclose(trace_dual(channel_super(ch)).matrix, expected, atol=1e-12)


@given(seeds, dims)
def test_dual_is_an_involution_and_satisfies_the_pairing(seed, d):
    rng = np.random.default_rng(seed)
    # hermiticity-preserving: a real combination of sandwich maps X -> B X B^dagger
    S = SuperOperator(sum(rng.normal() * np.kron(B.conj(), B) for B in
                          (rm.random_operator(d, rng) for _ in range(3))))
    D = trace_dual(S)
    assert np.linalg.norm(trace_dual(D).matrix - S.matrix) <= DEFAULT_TOL.eq_tol
    assert pairing_residual(S, D, rng) <= DEFAULT_TOL.eq_tol * max(1, S.norm()) * 10


def test_dual_rejects_non_hermiticity_preserving():
    with pytest.raises(PreconditionError):
        trace_dual(SuperOperator.left(np.diag([1j, 2.0])))


# ---------------------------------------------------------------- kernels

def test_kernel_of_identity_is_empty():
    assert kernel_subspace(np.eye(9)).size == 0


def test_kernel_of_zero_is_everything():
    assert kernel_subspace(np.zeros((4, 4))).size == 4


def test_kernel_for_diagonal_unitary_conjugation():
    U = np.diag([1.0, -1.0])
    dual = SuperOperator(superop_matrix(lambda X: U.conj().T @ X @ U, 2))
    K = kernel_subspace(dual.matrix - np.eye(4))
    assert K.size == 2 == kernel_dim(dual.matrix - np.eye(4))
    for X in (E11, E22, np.eye(2)):
        assert subspace_contains(K, X)[0]
    assert not subspace_contains(K, E12)[0]


def test_kernel_for_dephasing_generator():
    dual = lindblad_super(LindbladGenerator(2, (SZ,), None, "heisenberg"))
    K = kernel_subspace(dual)
    assert K.size == 2
    # direct elementwise solve of sz T sz - T = 0: off-diagonals vanish
    assert all(abs(B[0, 1]) < 1e-12 and abs(B[1, 0]) < 1e-12 for B in K.basis)


def test_kernel_is_hermitized_when_star_closed():
    K = kernel_subspace(superop_matrix(m3_map, 3) - np.eye(9))
    assert K.size == 4 == exact_fixed_space_dim_m3()
    assert all(is_hermitian(B) for B in K.basis)
    assert K.gram_residual() < 1e-10


@given(seeds, dims)
def test_kernel_vectors_are_annihilated(seed, d):
    rng = np.random.default_rng(seed)
    # random matrix of prescribed rank
    r = int(rng.integers(0, d * d))
    M = rng.normal(size=(d * d, r)) @ rng.normal(size=(r, d * d)) if r else np.zeros((d * d, d * d))
    K = kernel_subspace(M)
    smax = np.linalg.norm(M, 2)
    assert K.size == d * d - r
    assert K.gram_residual() < 1e-9
    for B in K.basis:
        assert np.linalg.norm(M @ vec(B)) <= 10 * DEFAULT_TOL.rank_tol * max(smax, 1e-300) + 1e-300


def test_kernel_rejects_non_square_operand_space():
    with pytest.raises(DimensionMismatch):
        kernel_subspace(np.zeros((3, 5)))


# ---------------------------------------------------------------- membership and intersection

def test_full_space_contains_everything():
    ok, r = subspace_contains(full_space(3), rm.random_operator(3, 2))
    assert ok and r < 1e-12


def test_diagonals_do_not_contain_off_diagonal_unit():
    ok, r = subspace_contains(DIAGONALS, E12)
    assert not ok
    assert r == pytest.approx(1.0)


def test_m3_fixed_space_contains_witness():
    K = kernel_subspace(superop_matrix(m3_map, 3) - np.eye(9))
    A = np.diag([1.0, 0.0, 0.5])
    assert np.allclose(m3_map(A), A)
    assert subspace_contains(K, A)[0]
    assert not subspace_contains(K, A @ A)[0]


def test_intersect_with_itself():
    V = span_subspace([rm.random_hermitian(3, k) for k in range(4)], 3)
    assert subspace_distance(subspace_intersect(V, V), V) < 1e-9


def test_diagonals_meet_scalars_in_scalars():
    W = subspace_intersect(DIAGONALS, span_subspace([np.eye(2)], 2))
    assert W.size == 1 and subspace_contains(W, np.eye(2))[0]


@given(seeds, st.integers(2, 3))
def test_intersection_dimension_bound(seed, d):
    rng = np.random.default_rng(seed)
    n = d * d
    V = span_subspace([rm.random_operator(d, rng) for _ in range(int(rng.integers(1, n)))], d)
    W = span_subspace([rm.random_operator(d, rng) for _ in range(int(rng.integers(1, n)))], d)
    X = subspace_intersect(V, W)
    assert X.size >= V.size + W.size - n
    for B in X.basis:
        assert subspace_contains(V, B)[0] and subspace_contains(W, B)[0]


def test_subspace_rejects_too_many_elements():
    with pytest.raises(DimensionMismatch):
        OperatorSubspace(1, np.ones((2, 1, 1)))


def test_distance_of_unequal_dimensions_is_one():
    assert subspace_distance(DIAGONALS, full_space(2)) == 1.0


# ---------------------------------------------------------------- algebra closure

def test_closure_of_identity_is_scalars():
    assert algebra_closure([np.eye(3)]).size == 1


def test_closure_of_diagonal_with_distinct_eigenvalues():
    V = algebra_closure([np.diag([1.0, 2.0])])
    assert V.size == 2
    assert subspace_distance(V, DIAGONALS) < 1e-10


def test_closure_of_off_diagonal_unit_is_everything():
    assert algebra_closure([E12]).size == 4


def test_non_unital_closure_of_nilpotent():
    # E12 generates span{E12, E21, E11, E22} as a *-algebra even without the unit
    assert algebra_closure([E12], unital=False).size == 4
    assert algebra_closure([E11], unital=False).size == 1


def test_closure_needs_generators():
    with pytest.raises(ValueError):
        algebra_closure([])


def test_closure_cap_signals_instability():
    with pytest.raises(ConvergenceError):
        algebra_closure([E12], max_rounds=0)


@given(seeds, dims, st.integers(1, 2))
def test_closure_is_closed(seed, d, n_gens):
    rng = np.random.default_rng(seed)
    gens = []
    for _ in range(n_gens):
        # block-diagonal generators keep the closure a proper subalgebra
        k = int(rng.integers(1, d + 1))
        G = np.zeros((d, d), dtype=complex)
        G[:k, :k] = rm.random_operator(k, rng)
        gens.append(G)
    V = algebra_closure(gens)
    assert multiplication_closure_residual(V) <= 10 * DEFAULT_TOL.eq_tol
    for g in gens:
        assert subspace_contains(V, g)[0]
    # independent check: the products also lie in the least-squares span
    B = list(V.basis)
    assert all(is_in_span(X @ Y, B, 1e-8) for X in B[:3] for Y in B[:3])


def test_containment_residual_dimension_check():
    with pytest.raises(DimensionMismatch):
        containment_residual(DIAGONALS, np.eye(3))
