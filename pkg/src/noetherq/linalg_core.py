"""Complex matrices, superoperators and operator subspaces.

Operators are plain ``(d, d)`` complex numpy arrays. Linear maps on ``M_d``
are stored as ``(d**2, d**2)`` matrices acting on column-stacked vectors, so
that ``vec(A X B) = (B.T kron A) vec(X)``. Under this convention left
multiplication by ``A`` is ``kron(I, A)`` and right multiplication by ``B``
is ``kron(B.T, I)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Tolerances", "DEFAULT_TOL", "MAX_DIM",
    "NoetherqError", "DimensionMismatch", "PreconditionError", "ConvergenceError",
    "NearThresholdWarning",
    "vec", "unvec", "matrix_unit", "matrix_units", "dagger", "hs_norm",
    "is_hermitian", "is_psd", "is_projection", "is_unitary", "is_normal",
    "psd_sqrt", "min_eigenvalue",
    "SuperOperator", "apply_super", "trace_dual", "pairing_residual",
    "OperatorSubspace", "kernel_subspace", "span_subspace", "subspace_contains",
    "subspace_intersect", "subspace_distance", "containment_residual",
    "algebra_closure", "multiplication_closure_residual", "full_space",
]

MAX_DIM = 32


class NoetherqError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatch(NoetherqError, ValueError):
    pass


class PreconditionError(NoetherqError, ValueError):
    """An operation was called on an object violating its preconditions."""


class ConvergenceError(NoetherqError, RuntimeError):
    pass


class NearThresholdWarning(UserWarning):
    """A singular value sits close to the rank cutoff; a dimension may be fragile."""


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by all analyses.

    ``rank_tol`` is relative to the largest singular value of the matrix
    whose kernel is being computed. ``eq_tol`` and ``psd_tol`` are absolute
    (scaled by ``max(1, norm)`` where a norm is available).
    """

    rank_tol: float = 1e-10
    eq_tol: float = 1e-9
    psd_tol: float = 1e-9

    def __post_init__(self):
        for name in ("rank_tol", "eq_tol", "psd_tol"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")

    @property
    def clause_tol(self) -> float:
        # products and commutators amplify basis error by a bounded factor at desk scale
        return 10 * self.eq_tol


DEFAULT_TOL = Tolerances()


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------

def _as_operator(X, dim: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {X.shape}")
    if dim is not None and X.shape[0] != dim:
        raise DimensionMismatch(f"expected a {dim}x{dim} operator, got {X.shape[0]}x{X.shape[1]}")
    return X


def vec(X) -> np.ndarray:
    """Column-stack a matrix into a flat vector."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise DimensionMismatch(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape((dim, dim), order="F")


def matrix_unit(i: int, j: int, dim: int) -> np.ndarray:
    """``E_ij``: maps ``e_j`` to ``e_i`` and kills every other basis vector."""
    E = np.zeros((dim, dim), dtype=complex)
    E[i, j] = 1.0
    return E


def matrix_units(dim: int) -> list[tuple[int, int, np.ndarray]]:
    return [(i, j, matrix_unit(i, j, dim)) for i in range(dim) for j in range(dim)]


def dagger(X) -> np.ndarray:
    return np.asarray(X).conj().T


def hs_norm(X) -> float:
    return float(np.linalg.norm(X))


def is_hermitian(X, tol: Tolerances = DEFAULT_TOL) -> bool:
    X = np.asarray(X)
    return hs_norm(X - dagger(X)) <= tol.eq_tol * max(1.0, hs_norm(X))


def min_eigenvalue(X) -> float:
    """Smallest eigenvalue of the hermitian part of ``X``."""
    X = np.asarray(X)
    return float(np.linalg.eigvalsh((X + dagger(X)) / 2)[0])


def is_psd(X, tol: Tolerances = DEFAULT_TOL) -> bool:
    return is_hermitian(X, tol) and min_eigenvalue(X) >= -tol.psd_tol


def is_projection(X, tol: Tolerances = DEFAULT_TOL) -> bool:
    X = np.asarray(X)
    return is_hermitian(X, tol) and hs_norm(X @ X - X) <= tol.eq_tol * max(1.0, hs_norm(X))


def is_unitary(X, tol: Tolerances = DEFAULT_TOL) -> bool:
    X = np.asarray(X)
    return hs_norm(dagger(X) @ X - np.eye(X.shape[0])) <= tol.eq_tol * X.shape[0]


def is_normal(X, tol: Tolerances = DEFAULT_TOL) -> bool:
    X = np.asarray(X)
    return hs_norm(X @ dagger(X) - dagger(X) @ X) <= tol.eq_tol * max(1.0, hs_norm(X) ** 2)


def psd_sqrt(X, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Principal square root of a PSD matrix.

    Eigenvalues within ``psd_tol * max(1, ||X||)`` of zero are set to zero
    (the square root would otherwise inflate roundoff of order 1e-16 to
    1e-8); anything more negative raises :class:`PreconditionError`.
    """
    X = _as_operator(X)
    if not is_hermitian(X, tol):
        raise PreconditionError("square root requested for a non-hermitian matrix")
    w, U = np.linalg.eigh((X + dagger(X)) / 2)
    if w[0] < -tol.psd_tol:
        raise PreconditionError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    w = np.where(w <= tol.psd_tol * max(1.0, float(np.abs(w).max())), 0.0, w)
    return (U * np.sqrt(w)) @ dagger(U)


# --------------------------------------------------------------------------
# superoperators
# --------------------------------------------------------------------------

FLAG_NAMES = ("trace_preserving", "unital", "hermiticity_preserving", "completely_positive")


@dataclass(frozen=True)
class SuperOperator:
    """A linear map on ``dim x dim`` matrices.

    ``flags`` optionally caches capability booleans (see ``FLAG_NAMES``); they
    are never trusted blindly, :func:`noetherq.channels.check_flags` recomputes
    them from ``matrix``.
    """

    matrix: np.ndarray
    flags: Mapping[str, bool] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=complex)
        n = M.shape[0] if M.ndim == 2 else -1
        d = int(round(np.sqrt(max(n, 0))))
        if M.ndim != 2 or M.shape[0] != M.shape[1] or d * d != n or d == 0:
            raise DimensionMismatch(f"superoperator matrix must be d^2 x d^2, got {M.shape}")
        if d > MAX_DIM:
            raise DimensionMismatch(f"operator dimension {d} exceeds the cap {MAX_DIM}")
        unknown = set(self.flags) - set(FLAG_NAMES)
        if unknown:
            raise ValueError(f"unknown flags: {sorted(unknown)}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "flags", dict(self.flags))

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    # constructors -------------------------------------------------------
    @classmethod
    def identity(cls, dim: int) -> "SuperOperator":
        return cls(np.eye(dim * dim), {
            "trace_preserving": True, "unital": True,
            "hermiticity_preserving": True, "completely_positive": True})

    @classmethod
    def zero(cls, dim: int) -> "SuperOperator":
        return cls(np.zeros((dim * dim, dim * dim)))

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], dim: int) -> "SuperOperator":
        """Tabulate a linear map by its action on matrix units."""
        M = np.zeros((dim * dim, dim * dim), dtype=complex)
        for i, j, E in matrix_units(dim):
            M[:, j * dim + i] = vec(fn(E))
        return cls(M)

    @classmethod
    def left(cls, A) -> "SuperOperator":
        """``L_A(X) = A X``."""
        A = _as_operator(A)
        return cls(np.kron(np.eye(A.shape[0]), A))

    @classmethod
    def right(cls, B) -> "SuperOperator":
        """``R_B(X) = X B``."""
        B = _as_operator(B)
        return cls(np.kron(B.T, np.eye(B.shape[0])))

    @classmethod
    def sandwich(cls, A, B) -> "SuperOperator":
        """``X -> A X B``."""
        A, B = _as_operator(A), _as_operator(B)
        return cls(np.kron(B.T, A))

    # algebra ------------------------------------------------------------
    def apply(self, X) -> np.ndarray:
        return apply_super(self, X)

    def __call__(self, X) -> np.ndarray:
        return apply_super(self, X)

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        """Composition: ``(S @ T)(X) = S(T(X))``."""
        self._check_same(other)
        return SuperOperator(self.matrix @ other.matrix)

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        self._check_same(other)
        return SuperOperator(self.matrix + other.matrix)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        self._check_same(other)
        return SuperOperator(self.matrix - other.matrix)

    def __mul__(self, c) -> "SuperOperator":
        return SuperOperator(complex(c) * self.matrix)

    __rmul__ = __mul__

    def __neg__(self) -> "SuperOperator":
        return SuperOperator(-self.matrix)

    def power(self, n: int) -> "SuperOperator":
        return SuperOperator(np.linalg.matrix_power(self.matrix, n))

    def hs_adjoint(self) -> "SuperOperator":
        """Adjoint with respect to ``<X, Y> = tr(X^dagger Y)``."""
        return SuperOperator(self.matrix.conj().T)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def with_flags(self, **flags: bool) -> "SuperOperator":
        merged = dict(self.flags)
        merged.update(flags)
        return SuperOperator(self.matrix, merged)

    def _check_same(self, other: "SuperOperator"):
        if not isinstance(other, SuperOperator):
            raise TypeError(f"expected SuperOperator, got {type(other).__name__}")
        if other.dim != self.dim:
            raise DimensionMismatch(f"superoperators act on M_{self.dim} and M_{other.dim}")

    # cheap structural checks --------------------------------------------
    def trace_preservation_residual(self) -> float:
        d = self.dim
        # tr(S(X)) = vec(I)^dagger S vec(X) must equal vec(I)^dagger vec(X)
        row = vec(np.eye(d)).conj() @ self.matrix
        return float(np.linalg.norm(row - vec(np.eye(d))))

    def unitality_residual(self) -> float:
        d = self.dim
        return hs_norm(self.apply(np.eye(d)) - np.eye(d))

    def hermiticity_residual(self) -> float:
        d = self.dim
        worst = 0.0
        for i, j, E in matrix_units(d):
            if i > j:
                continue
            img = self.apply(E)
            worst = max(worst, hs_norm(self.apply(dagger(E)) - dagger(img)))
        return worst

    def is_trace_preserving(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return self.trace_preservation_residual() <= tol.eq_tol * max(1.0, self.dim)

    def is_unital(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return self.unitality_residual() <= tol.eq_tol * max(1.0, self.dim)

    def is_hermiticity_preserving(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return self.hermiticity_residual() <= tol.eq_tol * max(1.0, self.norm())


def apply_super(S: SuperOperator, X) -> np.ndarray:
    """Apply ``S`` to the operator ``X``: ``unvec(S.matrix @ vec(X))``."""
    X = np.asarray(X, dtype=complex)
    if X.shape != (S.dim, S.dim):
        raise DimensionMismatch(f"superoperator on M_{S.dim} applied to a matrix of shape {X.shape}")
    return unvec(S.matrix @ vec(X), S.dim)


def trace_dual(S: SuperOperator, tol: Tolerances = DEFAULT_TOL) -> SuperOperator:
    """Dual of ``S`` under the bilinear pairing ``<T, X> = tr(T X)``.

    For hermiticity-preserving maps this is the Hilbert-Schmidt adjoint,
    which is what gets computed. Other maps are rejected.
    """
    if not S.is_hermiticity_preserving(tol):
        raise PreconditionError(
            f"trace dual requires a hermiticity-preserving map "
            f"(residual {S.hermiticity_residual():.3e})")
    flags = {}
    swap = {"trace_preserving": "unital", "unital": "trace_preserving"}
    for name, value in S.flags.items():
        flags[swap.get(name, name)] = value
    return SuperOperator(S.matrix.conj().T, flags)


def pairing_residual(S: SuperOperator, S_dual: SuperOperator, rng=None, samples: int = 8) -> float:
    """Max of ``|tr(S(T) X) - tr(T S_dual(X))|`` over random ``T, X``."""
    rng = np.random.default_rng(rng)
    d = S.dim
    worst = 0.0
    for _ in range(samples):
        T = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        lhs = np.trace(S.apply(T) @ X)
        rhs = np.trace(T @ S_dual.apply(X))
        worst = max(worst, abs(lhs - rhs) / max(1.0, hs_norm(T) * hs_norm(X)))
    return worst


# --------------------------------------------------------------------------
# subspaces
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorSubspace:
    """Subspace of ``M_dim`` with a Hilbert-Schmidt orthonormal basis.

    ``basis`` has shape ``(k, dim, dim)``. ``warnings`` records
    near-threshold singular values met while the basis was computed.
    """

    dim: int
    basis: np.ndarray
    tol: Tolerances = DEFAULT_TOL
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        B = np.array(self.basis, dtype=complex).reshape(-1, self.dim, self.dim)
        if B.shape[0] > self.dim ** 2:
            raise DimensionMismatch("more basis elements than the dimension of M_d")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    def __len__(self) -> int:
        return self.basis.shape[0]

    @property
    def size(self) -> int:
        return self.basis.shape[0]

    def vectors(self) -> np.ndarray:
        """Basis as columns of a ``(dim**2, k)`` matrix of vecs."""
        if self.size == 0:
            return np.zeros((self.dim ** 2, 0), dtype=complex)
        return np.stack([vec(B) for B in self.basis], axis=1)

    def projector(self) -> np.ndarray:
        Q = self.vectors()
        return Q @ Q.conj().T

    def project(self, X) -> np.ndarray:
        Q = self.vectors()
        return unvec(Q @ (Q.conj().T @ vec(np.asarray(X, dtype=complex))), self.dim)

    def gram_residual(self) -> float:
        Q = self.vectors()
        return float(np.linalg.norm(Q.conj().T @ Q - np.eye(self.size)))

    def is_star_closed(self) -> bool:
        return all(subspace_contains(self, dagger(B))[0] for B in self.basis)

    def hermitian_basis(self) -> np.ndarray:
        """Orthonormal hermitian basis; only valid for ``*``-closed subspaces."""
        return _hermitian_basis(self.basis, self.dim, self.tol)

    def canonical_basis(self) -> list[np.ndarray]:
        """Reduced-row-echelon basis in matrix-unit coordinates, hermitized.

        Pivots are taken in column-stacking order, so diagonal pivots come
        first for each column. Each element ``X`` contributes its hermitian
        and anti-hermitian parts ``(X + X^dagger)/2``, ``(X - X^dagger)/2i``
        when nonzero. Deterministic, which makes reported witnesses stable.
        """
        if self.size == 0:
            return []
        R = _rref(self.vectors().T, self.tol.eq_tol)
        out = []
        for row in R:
            X = unvec(row, self.dim)
            for part in ((X + dagger(X)) / 2, (X - dagger(X)) / 2j):
                if hs_norm(part) > self.tol.eq_tol:
                    part = part.real.astype(complex) if hs_norm(part.imag) <= self.tol.eq_tol else part
                    out.append(part)
        return out


def full_space(dim: int, tol: Tolerances = DEFAULT_TOL) -> OperatorSubspace:
    return OperatorSubspace(dim, np.stack([E for _, _, E in matrix_units(dim)]), tol)


def _rref(A: np.ndarray, tol: float) -> np.ndarray:
    A = np.array(A, dtype=complex)
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(A[r:, c])))
        if abs(A[p, c]) <= tol:
            continue
        A[[r, p]] = A[[p, r]]
        A[r] = A[r] / A[r, c]
        for k in range(rows):
            if k != r:
                A[k] = A[k] - A[k, c] * A[r]
        r += 1
    A = A[:r]
    A[np.abs(A) < tol * 1e-3] = 0
    return A


def _threshold_warnings(s: np.ndarray, cutoff: float) -> tuple[str, ...]:
    if cutoff <= 0:
        return ()
    near = s[(s > cutoff / 100) & (s < cutoff * 100)]
    if near.size:
        return (f"{near.size} singular value(s) within two decades of the rank cutoff "
                f"{cutoff:.3e}: {', '.join(f'{x:.3e}' for x in near)}",)
    return ()


def _hermitian_basis(basis: np.ndarray, dim: int, tol: Tolerances) -> np.ndarray:
    if len(basis) == 0:
        return np.zeros((0, dim, dim), dtype=complex)
    herm = []
    for X in basis:
        herm.append((X + dagger(X)) / 2)
        herm.append((X - dagger(X)) / 2j)
    # hermitian matrices form a real space; tr(XY) = real dot of (Re vec, Im vec)
    R = np.stack([np.concatenate([vec(H).real, vec(H).imag]) for H in herm], axis=1)
    U, s, _ = np.linalg.svd(R, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((0, dim, dim), dtype=complex)
    rank = int(np.sum(s > tol.rank_tol * s[0]))
    n = dim * dim
    out = [unvec(U[:n, k] + 1j * U[n:, k], dim) for k in range(rank)]
    out = [(H + dagger(H)) / 2 for H in out]
    return np.stack(out) if out else np.zeros((0, dim, dim), dtype=complex)


def _as_matrix(M) -> np.ndarray:
    if isinstance(M, SuperOperator):
        return M.matrix
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got an array of shape {M.shape}")
    return M


def kernel_subspace(M, tol: Tolerances = DEFAULT_TOL, hermitize: bool | None = None,
                    dim: int | None = None, scale: float | None = None) -> OperatorSubspace:
    """Numerical kernel of ``M`` as a subspace of ``M_d``.

    ``M`` is a superoperator or any matrix with ``d**2`` columns (stacked
    linear conditions are allowed, which is how joint kernels are formed).
    Right singular vectors with ``sigma <= rank_tol * sigma_max`` span the
    kernel. ``scale`` is an optional reference magnitude for the conditions
    (e.g. the norm of the map they were built from); the cutoff becomes
    ``rank_tol * max(sigma_max, scale)``, so a constraint matrix made only
    of roundoff yields the full space instead of an empty one. With
    ``hermitize=None`` the basis is rebuilt from hermitian elements whenever
    the kernel turns out to be ``*``-closed.
    """
    A = _as_matrix(M)
    n = A.shape[1]
    d = dim if dim is not None else int(round(np.sqrt(n)))
    if d * d != n:
        raise DimensionMismatch(f"matrix with {n} columns does not act on a space of square matrices")
    if A.shape[0] == 0:
        return full_space(d, tol)
    _, s, Vh = np.linalg.svd(A, full_matrices=True)
    smax = s[0] if s.size else 0.0
    cutoff = tol.rank_tol * max(smax, scale or 0.0)
    if smax == 0.0:
        return full_space(d, tol)
    rank = int(np.sum(s > cutoff))
    null = Vh[rank:].conj()
    notes = _threshold_warnings(s, cutoff)
    for note in notes:
        warnings.warn(note, NearThresholdWarning, stacklevel=2)
    basis = np.stack([unvec(v, d) for v in null]) if len(null) else np.zeros((0, d, d), dtype=complex)
    V = OperatorSubspace(d, basis, tol, notes)
    if V.size and hermitize is not False:
        if hermitize or V.is_star_closed():
            H = V.hermitian_basis()
            if H.shape[0] == V.size:
                V = OperatorSubspace(d, H, tol, notes)
    return V


def span_subspace(ops: Iterable, dim: int, tol: Tolerances = DEFAULT_TOL) -> OperatorSubspace:
    """Orthonormal basis of the span of ``ops`` (each normalized first)."""
    vecs = []
    for X in ops:
        X = _as_operator(X, dim)
        nrm = hs_norm(X)
        if nrm > 0:
            vecs.append(vec(X) / nrm)
    if not vecs:
        return OperatorSubspace(dim, np.zeros((0, dim, dim)), tol)
    A = np.stack(vecs, axis=1)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > tol.rank_tol * s[0]))
    return OperatorSubspace(dim, np.stack([unvec(U[:, k], dim) for k in range(rank)]), tol)


def containment_residual(V: OperatorSubspace, X) -> float:
    X = _as_operator(X, V.dim)
    return hs_norm(X - V.project(X))


def subspace_contains(V: OperatorSubspace, X, tol: Tolerances | None = None) -> tuple[bool, float]:
    """Membership test with residual ``||X - proj_V(X)||_HS``."""
    tol = tol or V.tol
    X = _as_operator(X, V.dim)
    r = containment_residual(V, X)
    return r <= tol.eq_tol * max(1.0, hs_norm(X)), r


def subspace_intersect(V: OperatorSubspace, W: OperatorSubspace,
                       tol: Tolerances | None = None) -> OperatorSubspace:
    """``V cap W`` as the joint kernel of ``I - P_V`` and ``I - P_W``."""
    if V.dim != W.dim:
        raise DimensionMismatch(f"subspaces of M_{V.dim} and M_{W.dim}")
    tol = tol or V.tol
    n = V.dim ** 2
    stacked = np.vstack([np.eye(n) - V.projector(), np.eye(n) - W.projector()])
    return kernel_subspace(stacked, tol, dim=V.dim, scale=1.0)


def subspace_distance(V: OperatorSubspace, W: OperatorSubspace) -> float:
    """Spectral norm of the difference of orthogonal projectors (sine of the largest angle)."""
    if V.dim != W.dim:
        raise DimensionMismatch(f"subspaces of M_{V.dim} and M_{W.dim}")
    if V.size != W.size:
        return 1.0
    return float(np.linalg.norm(V.projector() - W.projector(), 2))


def multiplication_closure_residual(V: OperatorSubspace, basis: Sequence[np.ndarray] | None = None) -> float:
    """Worst containment residual over all pairwise products (squares included) and adjoints."""
    if basis is None:
        basis = V.hermitian_basis() if V.is_star_closed() else V.basis
    worst = 0.0
    for X in basis:
        worst = max(worst, containment_residual(V, dagger(X)))
        for Y in basis:
            worst = max(worst, containment_residual(V, X @ Y))
    return worst


def algebra_closure(generators: Sequence, unital: bool = True, tol: Tolerances = DEFAULT_TOL,
                    max_rounds: int | None = None) -> OperatorSubspace:
    """Smallest ``*``-closed, multiplication-closed subspace containing ``generators``.

    Adjoints and all pairwise products are adjoined until the dimension
    stops growing. In finite dimensions this is ``C*(I, a)`` (with
    ``unital=True``) and equals the generated von Neumann algebra.
    """
    gens = [_as_operator(g) for g in generators]
    if not gens:
        raise ValueError("algebra_closure needs at least one generator")
    d = gens[0].shape[0]
    for g in gens:
        _as_operator(g, d)
    seed = gens + [dagger(g) for g in gens]
    if unital:
        seed.append(np.eye(d))
    V = span_subspace(seed, d, tol)
    cap = max_rounds if max_rounds is not None else d * d + 1
    for _ in range(cap):
        elems = list(V.basis)
        products = [X @ Y for X in elems for Y in elems]
        W = span_subspace(elems + products + [dagger(X) for X in elems], d, tol)
        if W.size == V.size:
            H = _hermitian_basis(W.basis, d, tol)
            return OperatorSubspace(d, H if H.shape[0] == W.size else W.basis, tol)
        V = W
    raise ConvergenceError(f"algebra closure did not stabilize within {cap} rounds")
