"""Fixed points, multiplicative and bimodule domains, and discrete Noether verdicts."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .channels import is_completely_positive, positivity_profile, schwarz_defect
from .linalg_core import (
    DEFAULT_TOL, DimensionMismatch, OperatorSubspace, PreconditionError, SuperOperator, Tolerances,
    algebra_closure, containment_residual, dagger, hs_norm, is_hermitian, is_normal, is_psd,
    kernel_subspace, matrix_units, multiplication_closure_residual, psd_sqrt, subspace_contains,
    subspace_intersect, trace_dual,
)

__all__ = [
    "NoetherVerdict", "FixedStructureReport",
    "fixed_point_space", "multiplicative_domain", "bimodule_domain", "constants_scale",
    "propagation_check", "measurement_superop", "noether_discrete", "noether_measurement",
    "spanning_states", "spectral_projections", "mutual_containment_residual",
    "compression_defect", "find_square_witness",
]


@dataclass
class NoetherVerdict:
    """Per-clause outcome of one equivalence theorem applied to one operator.

    ``clauses`` maps a clause label to ``True``/``False`` or ``None`` when the
    clause does not apply (e.g. it needs complete positivity). ``groups``
    lists clause labels the theorem declares equivalent; the verdict is
    ``consistent`` when every group is internally unanimous. ``details``
    holds informational sub-results that are not themselves clauses.
    """

    theorem: str
    subject: np.ndarray
    clauses: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    groups: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def add(self, label: str, holds: bool | None, residual: float | None = None):
        self.clauses[label] = None if holds is None else bool(holds)
        self.residuals[label] = None if residual is None else float(residual)

    def detail(self, label: str, holds: bool, residual: float):
        self.details[label] = {"holds": bool(holds), "residual": float(residual)}

    @property
    def consistent(self) -> bool:
        for group in self.groups:
            values = {self.clauses[c] for c in group if self.clauses.get(c) is not None}
            if len(values) > 1:
                return False
        return True

    def group_value(self, index: int = 0) -> bool | None:
        values = [self.clauses[c] for c in self.groups[index] if self.clauses.get(c) is not None]
        return values[0] if values and len(set(values)) == 1 else None


@dataclass
class FixedStructureReport:
    fix: OperatorSubspace
    mult_domain: OperatorSubspace
    bimodule: OperatorSubspace
    constants2: OperatorSubspace
    fix_is_algebra: bool
    fix_closure_residual: float
    constants2_closure_residual: float
    bimodule_vs_constants2: float
    witnesses: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        """The scale-of-constants identities, checked on this instance."""
        tol = self.fix.tol.clause_tol
        scale_ok = self.fix_is_algebra == (self.fix.size == self.constants2.size)
        return (self.bimodule_vs_constants2 <= tol and self.constants2_closure_residual <= tol
                and scale_ok)


def _holds(residual: float, tol: Tolerances, scale: float = 1.0) -> bool:
    return residual <= tol.clause_tol * max(1.0, scale)


def mutual_containment_residual(V: OperatorSubspace, W: OperatorSubspace) -> float:
    """Largest residual of either basis projected onto the other subspace.

    Subspaces of different dimension cannot be mutually contained; the
    containment residual then still reports the worst basis element.
    """
    r = 0.0
    for B in V.basis:
        r = max(r, containment_residual(W, B))
    for B in W.basis:
        r = max(r, containment_residual(V, B))
    return r


def fixed_point_space(S: SuperOperator, tol: Tolerances = DEFAULT_TOL) -> OperatorSubspace:
    """``{X : S(X) = X}`` as the kernel of ``S - id``."""
    return kernel_subspace(S.matrix - np.eye(S.dim ** 2), tol, scale=1.0)


def _require_unital_cp(S: SuperOperator, tol: Tolerances, what: str):
    if not S.is_unital(tol):
        raise PreconditionError(f"{what} requires a unital map (residual {S.unitality_residual():.3e})")
    if not is_completely_positive(S, tol):
        raise PreconditionError(f"{what} requires a completely positive map")


def _left(X):
    return np.kron(np.eye(X.shape[0]), X)


def _right(X):
    return np.kron(X.T, np.eye(X.shape[0]))


def multiplicative_domain(S: SuperOperator, tol: Tolerances = DEFAULT_TOL,
                          check: bool = True) -> OperatorSubspace:
    """Joint kernel of ``a -> S(b a) - S(b) S(a)`` and ``a -> S(a b) - S(a) S(b)`` over matrix units ``b``."""
    if check:
        _require_unital_cp(S, tol, "multiplicative_domain")
    M = S.matrix
    rows = []
    for _, _, E in matrix_units(S.dim):
        SE = S.apply(E)
        rows.append(M @ _left(E) - _left(SE) @ M)
        rows.append(M @ _right(E) - _right(SE) @ M)
    return kernel_subspace(np.vstack(rows), tol, dim=S.dim, scale=max(1.0, S.norm()) ** 2)


def bimodule_domain(S: SuperOperator, tol: Tolerances = DEFAULT_TOL) -> OperatorSubspace:
    """Joint kernel of ``a -> S(a b) - a S(b)`` and ``a -> S(b a) - S(b) a`` over matrix units ``b``."""
    M = S.matrix
    rows = []
    for _, _, E in matrix_units(S.dim):
        SE = S.apply(E)
        rows.append(M @ _right(E) - _right(SE))
        rows.append(M @ _left(E) - _left(SE))
    return kernel_subspace(np.vstack(rows), tol, dim=S.dim, scale=max(1.0, S.norm()))


def find_square_witness(V: OperatorSubspace, seed=0, trials: int = 200):
    """A hermitian ``a`` in ``V`` with ``a @ a`` outside ``V``, or ``None``.

    The canonical (row-echelon, hermitized) basis is scanned first, then
    pairwise sums, then random hermitian combinations; among random
    candidates the one with the largest square residual wins.
    """
    tol = V.tol
    canon = V.canonical_basis()

    def failing(a):
        ok, r = subspace_contains(V, a @ a)
        return (not ok and r > tol.clause_tol * max(1.0, hs_norm(a) ** 2)), r

    for a in canon:
        bad, _ = failing(a)
        if bad:
            return a
    for a, b in combinations(canon, 2):
        bad, _ = failing(a + b)
        if bad:
            return a + b
    if not canon:
        return None
    rng = np.random.default_rng(seed)
    best, best_r = None, 0.0
    H = np.stack(canon)
    for _ in range(trials):
        c = rng.normal(size=len(canon))
        a = np.tensordot(c, H, axes=1)
        a = (a + dagger(a)) / 2
        a /= hs_norm(a)
        bad, r = failing(a)
        if bad and r > best_r:
            best, best_r = a, r
    return best


def constants_scale(S: SuperOperator, tol: Tolerances = DEFAULT_TOL, seed=0) -> FixedStructureReport:
    """Fixed space, multiplicative domain, bimodule domain and ``C_2 = Fix cap M`` of a unital CP map."""
    _require_unital_cp(S, tol, "constants_scale")
    fix = fixed_point_space(S, tol)
    mult = multiplicative_domain(S, tol, check=False)
    bim = bimodule_domain(S, tol)
    c2 = subspace_intersect(fix, mult, tol)
    fix_res = multiplication_closure_residual(fix)
    c2_res = multiplication_closure_residual(c2)
    fix_alg = fix_res <= tol.clause_tol
    witnesses = []
    if not fix_alg:
        w = find_square_witness(fix, seed)
        if w is not None:
            witnesses.append(w)
    return FixedStructureReport(
        fix=fix, mult_domain=mult, bimodule=bim, constants2=c2,
        fix_is_algebra=fix_alg, fix_closure_residual=fix_res,
        constants2_closure_residual=c2_res,
        bimodule_vs_constants2=mutual_containment_residual(bim, c2),
        witnesses=witnesses)


def propagation_check(S: SuperOperator, a, tol: Tolerances = DEFAULT_TOL) -> NoetherVerdict:
    """Does being fixed propagate from ``a`` to the unital C*-algebra it generates?"""
    _require_unital_cp(S, tol, "propagation_check")
    a = np.asarray(a, dtype=complex)
    if a.shape != (S.dim, S.dim):
        raise DimensionMismatch(f"operator of shape {a.shape} for a map on M_{S.dim}")
    v = NoetherVerdict("fixed-point propagation", a)
    scale = hs_norm(a) ** 2
    fix_res = {
        "a": hs_norm(S.apply(a) - a),
        "a*a": hs_norm(S.apply(dagger(a) @ a) - dagger(a) @ a),
        "aa*": hs_norm(S.apply(a @ dagger(a)) - a @ dagger(a)),
    }
    for k, r in fix_res.items():
        v.detail(f"{k} fixed", _holds(r, tol, scale), r)
    r1 = max(fix_res.values())
    v.add("(i) a, a*a, aa* fixed", _holds(r1, tol, scale), r1)

    d1 = hs_norm(schwarz_defect(S, a, tol, check=False))
    d2 = hs_norm(schwarz_defect(S, dagger(a), tol, check=False))
    r2 = max(fix_res["a"], d1, d2)
    v.detail("Schwarz defect of a vanishes", _holds(d1, tol, scale), d1)
    v.detail("Schwarz defect of a* vanishes", _holds(d2, tol, scale), d2)
    v.add("(ii) a fixed and in the multiplicative domain", _holds(r2, tol, scale), r2)

    alg = algebra_closure([a], unital=True, tol=tol)
    r3 = max(hs_norm(S.apply(B) - B) for B in alg.basis)
    v.add("(iii) C*(I, a) fixed", _holds(r3, tol), r3)
    v.details["C*(I, a) dimension"] = alg.size
    v.groups.append(["(i) a, a*a, aa* fixed", "(ii) a fixed and in the multiplicative domain",
                     "(iii) C*(I, a) fixed"])
    if is_normal(a, tol):
        r4 = max(fix_res["a"], fix_res["a*a"])
        v.add("normal: a, a*a fixed", _holds(r4, tol, scale), r4)
        v.groups.append(["normal: a, a*a fixed", "(iii) C*(I, a) fixed"])
    return v


def measurement_superop(B) -> SuperOperator:
    """One-element measurement ``X -> B^dagger X B``."""
    B = np.asarray(B, dtype=complex)
    return SuperOperator.sandwich(dagger(B), B)


def spanning_states(dim: int) -> list[np.ndarray]:
    """``dim**2`` density matrices whose span is all of ``M_dim``."""
    states = []
    e = np.eye(dim)
    for i in range(dim):
        states.append(np.outer(e[i], e[i]).astype(complex))
    for i in range(dim):
        for j in range(i + 1, dim):
            for phase in (1.0, 1j):
                v = (e[i] + phase * e[j]) / np.sqrt(2)
                states.append(np.outer(v, v.conj()))
    return states


def _random_states(dim: int, n: int, rng) -> list[np.ndarray]:
    out = []
    for _ in range(n):
        G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = G @ dagger(G)
        out.append(rho / np.trace(rho).real)
    return out


def _commutator_norm(X: SuperOperator, Y: SuperOperator) -> float:
    return float(np.linalg.norm(X.matrix @ Y.matrix - Y.matrix @ X.matrix))


def spectral_projections(A, tol: Tolerances = DEFAULT_TOL, rel_gap: float = 1e-6):
    """Eigenvalue clusters of a hermitian ``A`` and their spectral projections."""
    A = np.asarray(A, dtype=complex)
    w, U = np.linalg.eigh((A + dagger(A)) / 2)
    gap = rel_gap * max(np.abs(w).max(), 1e-300)
    clusters = [[0]]
    for k in range(1, len(w)):
        if w[k] - w[k - 1] < gap:
            clusters[-1].append(k)
        else:
            clusters.append([k])
    out = []
    for idx in clusters:
        Q = U[:, idx]
        out.append((float(np.mean(w[idx])), Q @ dagger(Q)))
    return out


def _expectation_residuals(Psi: SuperOperator, states, X) -> float:
    return max(abs(np.trace(Psi.apply(rho) @ X) - np.trace(rho @ X)) for rho in states)


def noether_discrete(S: SuperOperator, A, tol: Tolerances = DEFAULT_TOL, seed=0,
                     n_random_states: int = 8, positivity_samples: int = 500) -> NoetherVerdict:
    """Symmetry versus conservation for a trace-preserving map ``S`` (Schroedinger picture).

    Evaluates the left-multiplication theorem (``[L_A, S] = 0`` ... ``A, A*A``
    fixed by the dual), its right-multiplication mirror with ``AA*``, and for
    hermitian ``A`` the expectation/standard-deviation form. When ``S`` is
    positive but not CP, commutator clauses are marked not applicable.
    """
    A = np.asarray(A, dtype=complex)
    d = S.dim
    if A.shape != (d, d):
        raise DimensionMismatch(f"observable of shape {A.shape} for a map on M_{d}")
    if not S.is_trace_preserving(tol):
        raise PreconditionError("noether_discrete needs a trace-preserving map")
    cp = is_completely_positive(S, tol)
    if not cp:
        prof = positivity_profile(S, k_max=1, samples=positivity_samples, seed=seed, tol=tol)
        if prof.positive is False:
            raise PreconditionError("map is not positive; no Noether theorem applies")
    rng = np.random.default_rng(seed)
    dual = trace_dual(S, tol)
    states = spanning_states(d) + _random_states(d, n_random_states, rng)
    v = NoetherVerdict("discrete quantum Noether", A)
    if not cp:
        v.notes.append("map is positive but not completely positive: commutator clauses not applicable")
    a_norm = hs_norm(A)
    scale = max(1.0, a_norm ** 2) * max(1.0, S.norm())

    def family(tag: str, quad, L_sym, R_dual, quad_name: str):
        r_comm = _commutator_norm(L_sym, S)
        r_dual_comm = _commutator_norm(R_dual, dual)
        const_A = _expectation_residuals(S, states, A)
        const_Q = _expectation_residuals(S, states, quad)
        fix_A = hs_norm(dual.apply(A) - A)
        fix_Q = hs_norm(dual.apply(quad) - quad)
        v.detail("A constant", _holds(const_A, tol, a_norm), const_A)
        v.detail(f"{quad_name} constant", _holds(const_Q, tol, a_norm ** 2), const_Q)
        v.detail("A fixed by dual", _holds(fix_A, tol, a_norm), fix_A)
        v.detail(f"{quad_name} fixed by dual", _holds(fix_Q, tol, a_norm ** 2), fix_Q)
        sym, dual_sym = ("L_A", "R_A") if tag == "L" else ("R_A", "L_A")
        labels = [f"{tag}(i) [{sym}, Psi] = 0", f"{tag}(ii) A, {quad_name} constants",
                  f"{tag}(iii) [{dual_sym}, Psi#] = 0", f"{tag}(iv) A, {quad_name} fixed by Psi#"]
        v.add(labels[0], _holds(r_comm, tol, scale) if cp else None, r_comm)
        v.add(labels[1], _holds(max(const_A, const_Q), tol, a_norm ** 2), max(const_A, const_Q))
        v.add(labels[2], _holds(r_dual_comm, tol, scale) if cp else None, r_dual_comm)
        v.add(labels[3], _holds(max(fix_A, fix_Q), tol, a_norm ** 2), max(fix_A, fix_Q))
        return labels

    left = family("L", dagger(A) @ A, SuperOperator.left(A), SuperOperator.right(A), "A*A")
    right = family("R", A @ dagger(A), SuperOperator.right(A), SuperOperator.left(A), "AA*")
    if is_hermitian(A, tol):
        r_mean = max(abs(np.trace(S.apply(rho) @ A) - np.trace(rho @ A)) for rho in states)
        var = lambda rho: np.trace(rho @ A @ A).real - np.trace(rho @ A).real ** 2
        r_var = max(abs(var(S.apply(rho)) - var(rho)) for rho in states)
        r_std = max(abs(np.sqrt(max(var(S.apply(rho)), 0)) - np.sqrt(max(var(rho), 0))) for rho in states)
        v.detail("standard deviation constant", _holds(r_var, tol, a_norm ** 2), r_std)
        r = max(r_mean, r_var)
        v.add("herm: expectation and standard deviation constant", _holds(r, tol, a_norm ** 2), r)
        v.groups.append(left + right + ["herm: expectation and standard deviation constant"])
    else:
        v.groups.extend([left, right])
    return v


def _is_stochastic(S: SuperOperator, tol: Tolerances, samples: int, seed) -> bool:
    if not S.is_trace_preserving(tol) or not S.is_hermiticity_preserving(tol):
        return False
    if is_completely_positive(S, tol):
        return True
    return positivity_profile(S, k_max=1, samples=samples, seed=seed, tol=tol).positive is not False


def noether_measurement(S: SuperOperator, A, tol: Tolerances = DEFAULT_TOL, seed=0,
                        n_functions: int = 3, positivity_samples: int = 500) -> NoetherVerdict:
    """Measurement-form Noether theorem for a stochastic map and a PSD observable.

    Clauses: ``[S, M_{A^1/2}] = 0``; ``[S#, M_{A^1/2}] = 0``; ``S#(A) = A`` and
    ``S#(A^2) = A^2``; ``[M_E, S] = 0`` for every spectral projection ``E``;
    ``[M_{f(A)}, S] = 0`` for sampled nonnegative functions ``f`` on the spectrum.
    """
    A = np.asarray(A, dtype=complex)
    d = S.dim
    if A.shape != (d, d):
        raise DimensionMismatch(f"observable of shape {A.shape} for a map on M_{d}")
    if not is_psd(A, tol):
        raise PreconditionError("noether_measurement needs a PSD observable")
    if not _is_stochastic(S, tol, positivity_samples, seed):
        raise PreconditionError("noether_measurement needs a stochastic (positive, trace-preserving) map")
    rng = np.random.default_rng(seed)
    dual = trace_dual(S, tol)
    root = psd_sqrt(A, tol)
    M_root = measurement_superop(root)
    a_norm = hs_norm(A)
    scale = max(1.0, a_norm) * max(1.0, S.norm())
    v = NoetherVerdict("measurement Noether (stochastic maps)", A)

    r = _commutator_norm(S, M_root)
    v.add("(i) [Psi, M_sqrtA] = 0", _holds(r, tol, scale), r)
    r = _commutator_norm(dual, M_root)
    v.add("(ii) [Psi#, M_sqrtA] = 0", _holds(r, tol, scale), r)
    rA = hs_norm(dual.apply(A) - A)
    rA2 = hs_norm(dual.apply(A @ A) - A @ A)
    v.detail("A fixed by Psi#", _holds(rA, tol, a_norm), rA)
    v.detail("A^2 fixed by Psi#", _holds(rA2, tol, a_norm ** 2), rA2)
    v.add("(iii) A, A^2 fixed by Psi#", _holds(max(rA, rA2), tol, a_norm ** 2), max(rA, rA2))

    projections = spectral_projections(A, tol)
    r = max(_commutator_norm(measurement_superop(E), S) for _, E in projections)
    v.add("spectral: [M_E, Psi] = 0 for all spectral projections", _holds(r, tol, S.norm()), r)
    v.details["spectral projections"] = len(projections)

    # f >= 0 with distinct values on the spectral clusters, so f(A) generates the same algebra as A
    worst, worst_scale = 0.0, 1.0
    for _ in range(n_functions):
        values = rng.uniform(0.5, 2.0, size=len(projections))
        fA = sum(c * E for c, (_, E) in zip(values, projections))
        r = _commutator_norm(measurement_superop(fA), S)
        s = max(1.0, hs_norm(fA) ** 2) * max(1.0, S.norm())
        if r / s >= worst / worst_scale:
            worst, worst_scale = r, s
    v.add("functional calculus: [M_f(A), Psi] = 0", _holds(worst, tol, worst_scale), worst)
    v.groups.append(list(v.clauses))
    return v


def compression_defect(S: SuperOperator, E, X) -> float:
    """``||S#(E X E) - E S#(X) E||`` where ``S#`` is the trace dual of ``S``."""
    dual = trace_dual(S)
    E = np.asarray(E, dtype=complex)
    X = np.asarray(X, dtype=complex)
    return hs_norm(dual.apply(E @ X @ E) - E @ dual.apply(X) @ E)
