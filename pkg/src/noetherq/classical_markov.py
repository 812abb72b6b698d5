"""Finite-state Markov chains: conservation laws and their diagonal quantum embedding.

Distributions are column vectors and chains act on them from the left, so
a stochastic matrix has unit column sums and a rate matrix zero column
sums. Observables are real vectors; the dual of a chain acts on them by the
transpose.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np
import scipy.linalg

from .channels import KrausChannel, channel_super
from .fixed_structure import NoetherVerdict, noether_discrete
from .linalg_core import DEFAULT_TOL, DimensionMismatch, PreconditionError, Tolerances
from .semigroups import LindbladGenerator, SemigroupSpec, noether_continuous

__all__ = [
    "ClassicalChain", "InvalidChain", "ChainReport", "validate_chain",
    "classical_noether_discrete", "classical_noether_continuous", "embed_diagonal",
    "counterexample_search_classical", "SearchResult", "COUNTEREXAMPLE_3", "COUNTEREXAMPLE_3_OBSERVABLE",
    "DEFAULT_STEPS", "DEFAULT_CLASSICAL_TIMES", "CLAUSE_CORRESPONDENCE", "embedding_agreement",
]

DEFAULT_STEPS = (1, 2, 3, 5, 10)
DEFAULT_CLASSICAL_TIMES = (0.1, 1.0, 10.0)

# columns (1,0,0), (0,1,0), (1/2,1/2,0): state 3 splits evenly into two absorbing states
COUNTEREXAMPLE_3 = np.array([[1.0, 0.0, 0.5],
                             [0.0, 1.0, 0.5],
                             [0.0, 0.0, 0.0]])
COUNTEREXAMPLE_3_OBSERVABLE = np.array([1.0, -1.0, 0.0])


class InvalidChain(PreconditionError):
    def __init__(self, message: str, column: int | None = None):
        super().__init__(message)
        self.column = column


@dataclass(frozen=True)
class ClassicalChain:
    matrix: np.ndarray
    kind: str = "stochastic_matrix"

    def __post_init__(self):
        if self.kind not in ("stochastic_matrix", "rate_matrix"):
            raise ValueError(f"unknown chain kind {self.kind!r}")
        M = np.array(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
            raise DimensionMismatch(f"chain matrix must be square, got shape {M.shape}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def step(self, t: float = 1.0) -> np.ndarray:
        """Transition matrix over time ``t`` (``exp(tH)`` for rate matrices, ``U^t`` otherwise)."""
        if self.kind == "rate_matrix":
            return scipy.linalg.expm(t * self.matrix)
        return np.linalg.matrix_power(self.matrix, int(t))


@dataclass
class ChainReport:
    kind: str
    n_states: int
    column_residual: float
    min_entry: float
    sampled_times: dict = field(default_factory=dict)


def _check_columns(M: np.ndarray, target: float, off_diagonal_only: bool, tol: Tolerances):
    n = M.shape[0]
    sums = M.sum(axis=0)
    for j in range(n):
        col = np.delete(M[:, j], j) if off_diagonal_only else M[:, j]
        if col.size and col.min() < -tol.eq_tol:
            raise InvalidChain(f"column {j} has a negative entry {col.min():.6g}", j)
        if abs(sums[j] - target) > tol.eq_tol:
            raise InvalidChain(f"column {j} sums to {sums[j]:.12g}, expected {target}", j)
    return float(np.abs(sums - target).max())


def validate_chain(c: ClassicalChain, tol: Tolerances = DEFAULT_TOL,
                   times=DEFAULT_CLASSICAL_TIMES) -> ChainReport:
    """Check column sums and signs; for rate matrices also that ``exp(tH)`` is stochastic."""
    M = c.matrix
    if c.kind == "stochastic_matrix":
        res = _check_columns(M, 1.0, False, tol)
        return ChainReport(c.kind, c.n_states, res, float(M.min()))
    res = _check_columns(M, 0.0, True, tol)
    off = M[~np.eye(c.n_states, dtype=bool)]
    report = ChainReport(c.kind, c.n_states, res, float(off.min()) if off.size else 0.0)
    for t in times:
        U = c.step(t)
        col = float(np.abs(U.sum(axis=0) - 1).max())
        if col > 10 * tol.eq_tol or U.min() < -10 * tol.eq_tol:
            raise InvalidChain(f"exp({t} H) is not stochastic (column error {col:.3e}, min {U.min():.3e})")
        report.sampled_times[t] = {"column_residual": col, "min_entry": float(U.min())}
    return report


def _holds(r: float, tol: Tolerances, scale: float = 1.0) -> bool:
    return r <= tol.clause_tol * max(1.0, scale)


def _observable(c: ClassicalChain, O) -> np.ndarray:
    O = np.asarray(O, dtype=float).reshape(-1)
    if O.shape[0] != c.n_states:
        raise DimensionMismatch(f"observable of length {O.shape[0]} for a {c.n_states}-state chain")
    if not np.all(np.isfinite(O)):
        raise ValueError("observable has non-finite entries")
    return O


def _comm(O: np.ndarray, M: np.ndarray) -> float:
    D = np.diag(O)
    return float(np.linalg.norm(D @ M - M @ D))


def classical_noether_discrete(c: ClassicalChain, O, tol: Tolerances = DEFAULT_TOL,
                               steps=DEFAULT_STEPS) -> NoetherVerdict:
    """Commutation of ``O`` with ``U`` versus conservation of ``O`` and ``O^2``."""
    if c.kind != "stochastic_matrix":
        raise PreconditionError("classical_noether_discrete needs a stochastic matrix")
    validate_chain(c, tol)
    O = _observable(c, O)
    U = c.matrix
    O2 = O * O
    scale = max(1.0, float(np.abs(O).max()) ** 2)
    v = NoetherVerdict("discrete classical Noether", np.diag(O).astype(complex))

    # <X, U g> = <X, g> over the point masses g = e_j
    cons_O = float(np.abs(O @ U - O).max())
    cons_O2 = float(np.abs(O2 @ U - O2).max())
    v.detail("O conserved", _holds(cons_O, tol, scale), cons_O)
    v.detail("O^2 conserved", _holds(cons_O2, tol, scale), cons_O2)
    powers = {n: np.linalg.matrix_power(U, n) for n in steps}
    r = _comm(O, U)
    v.add("(i) [O, U] = 0", _holds(r, tol, scale), r)
    r = max(cons_O, cons_O2)
    v.add("(ii) O, O^2 expectations conserved", _holds(r, tol, scale), r)
    r = max(_comm(O, P) for P in powers.values())
    v.add("(i)' [O, U^n] = 0", _holds(r, tol, scale), r)
    r = max(float(np.abs(X @ P - X).max()) for P in powers.values() for X in (O, O2))
    v.add("(ii)' n-step expectations of O, O^2 constant", _holds(r, tol, scale), r)
    r = _comm(O, U.T)
    v.add("(i)'' [O, U#] = 0", _holds(r, tol, scale), r)
    fO, fO2 = float(np.abs(U.T @ O - O).max()), float(np.abs(U.T @ O2 - O2).max())
    v.detail("U#(O) = O", _holds(fO, tol, scale), fO)
    v.detail("U#(O^2) = O^2", _holds(fO2, tol, scale), fO2)
    r = max(fO, fO2)
    v.add("(ii)'' U#(O) = O and U#(O^2) = O^2", _holds(r, tol, scale), r)
    v.groups.append(list(v.clauses))
    return v


def classical_noether_continuous(c: ClassicalChain, O, tol: Tolerances = DEFAULT_TOL,
                                 times=DEFAULT_CLASSICAL_TIMES) -> NoetherVerdict:
    """Commutation of ``O`` with ``exp(tH)`` and ``H`` versus ``H^T O = H^T O^2 = 0``."""
    if c.kind != "rate_matrix":
        raise PreconditionError("classical_noether_continuous needs a rate matrix")
    validate_chain(c, tol)
    O = _observable(c, O)
    H = c.matrix
    O2 = O * O
    scale = max(1.0, float(np.abs(O).max()) ** 2) * max(1.0, float(np.abs(H).max()))
    v = NoetherVerdict("continuous classical Noether", np.diag(O).astype(complex))
    flows = {t: c.step(t) for t in times}
    r = max(_comm(O, U) for U in flows.values())
    v.add("(i) [O, U_t] = 0", _holds(r, tol, scale), r)
    r = max(float(np.abs(X @ U - X).max()) for U in flows.values() for X in (O, O2))
    v.add("(ii) expectations of O, O^2 constant in t", _holds(r, tol, scale), r)
    r = _comm(O, H)
    v.add("(iii) [O, H] = 0", _holds(r, tol, scale), r)
    r = max(_comm(O, U.T) for U in flows.values())
    v.add("(i)' [O, U_t#] = 0", _holds(r, tol, scale), r)
    r = max(float(np.abs(U.T @ X - X).max()) for U in flows.values() for X in (O, O2))
    v.add("(ii)' U_t#(O) = O and U_t#(O^2) = O^2", _holds(r, tol, scale), r)
    kO, kO2 = float(np.abs(H.T @ O).max()), float(np.abs(H.T @ O2).max())
    v.detail("H#(O) = 0", _holds(kO, tol, scale), kO)
    v.detail("H#(O^2) = 0", _holds(kO2, tol, scale), kO2)
    r = max(kO, kO2)
    v.add("(iii)' O, O^2 in ker H#", _holds(r, tol, scale), r)
    v.groups.append(list(v.clauses))
    return v


def embed_diagonal(c: ClassicalChain, tol: Tolerances = DEFAULT_TOL, times=None):
    """Quantum object acting on diagonal matrices as the chain acts on distributions.

    A stochastic matrix ``U`` becomes the Schroedinger channel with Kraus
    operators ``sqrt(U_ij) |i><j|``; a rate matrix ``H`` becomes the Lindblad
    semigroup with jump operators ``sqrt(H_ij) |i><j|`` (``i != j``) and no
    Hamiltonian. Coherences are destroyed in both cases.
    """
    validate_chain(c, tol)
    n = c.n_states
    M = np.clip(c.matrix, 0.0, None) if c.kind == "stochastic_matrix" else c.matrix
    ops = []
    for i, j in product(range(n), range(n)):
        if c.kind == "rate_matrix" and i == j:
            continue
        w = max(M[i, j], 0.0)
        if w > 0:
            K = np.zeros((n, n), dtype=complex)
            K[i, j] = np.sqrt(w)
            ops.append(K)
    if c.kind == "stochastic_matrix":
        return KrausChannel(n, tuple(ops), "schrodinger", tol)
    g = LindbladGenerator(n, tuple(ops), None, "schrodinger")
    return SemigroupSpec.from_lindblad(g, times if times is not None else (0.0,) + tuple(DEFAULT_CLASSICAL_TIMES))


# classical clause -> clause of the quantum verdict for diag(O) on the embedded object
CLAUSE_CORRESPONDENCE = {
    "stochastic_matrix": {
        "(i) [O, U] = 0": "L(i) [L_A, Psi] = 0",
        "(ii) O, O^2 expectations conserved": "L(ii) A, A*A constants",
        "(i)'' [O, U#] = 0": "L(iii) [R_A, Psi#] = 0",
        "(ii)'' U#(O) = O and U#(O^2) = O^2": "L(iv) A, A*A fixed by Psi#",
    },
    "rate_matrix": {
        "(i) [O, U_t] = 0": "L(i) [L_A, Psi_t] = 0",
        "(ii) expectations of O, O^2 constant in t": "L(ii) A, A*A constants",
        "(iii) [O, H] = 0": "L(v) [L_A, psi] = 0",
        "(i)' [O, U_t#] = 0": "L(iii) [R_A, Psi_t#] = 0",
        "(ii)' U_t#(O) = O and U_t#(O^2) = O^2": "L(iv) A, A*A joint fixed points",
        "(iii)' O, O^2 in ker H#": "L(vi) A, A*A in ker psi#",
    },
}


def embedding_agreement(c: ClassicalChain, O, tol: Tolerances = DEFAULT_TOL, seed=0) -> dict:
    """Classical verdict next to the quantum verdict for ``diag(O)`` on the embedded object.

    Returns ``{classical_label: (classical_value, quantum_label, quantum_value)}``.
    """
    O = _observable(c, O)
    A = np.diag(O).astype(complex)
    if c.kind == "stochastic_matrix":
        cv = classical_noether_discrete(c, O, tol)
        qv = noether_discrete(channel_super(embed_diagonal(c, tol)), A, tol, seed=seed)
    else:
        cv = classical_noether_continuous(c, O, tol)
        qv = noether_continuous(embed_diagonal(c, tol), A, tol, seed=seed)
    return {cl: (cv.clauses[cl], ql, qv.clauses[ql]) for cl, ql in CLAUSE_CORRESPONDENCE[c.kind].items()}


@dataclass
class SearchResult:
    chain: ClassicalChain
    observable: np.ndarray
    source: str  # "search" or "fallback"
    notes: list = field(default_factory=list)


def _is_counterexample(U: np.ndarray, O: np.ndarray, tol: float) -> bool:
    O2 = O * O
    return (np.abs(U.T @ O - O).max() <= tol
            and np.abs(U.T @ O2 - O2).max() > 1e3 * tol)


def _two_state_grid_has_counterexample(resolution: int = 64) -> bool:
    """Exhaustive scan of 2-state chains with entries on a ``1/resolution`` grid.

    For each ``U = [[a, b], [1-a, 1-b]]`` the harmonic observables
    (solutions of ``U^T O = O``) are found in exact rational arithmetic and
    every spanning direction ``w`` is tested: ``O = c w`` is a counterexample
    iff ``U^T (w*w) != w*w``.
    """
    grid = [Fraction(k, resolution) for k in range(resolution + 1)]
    for a, b in product(grid, repeat=2):
        U = ((a, b), (1 - a, 1 - b))
        # rows of U^T - I
        A = ((U[0][0] - 1, U[1][0]), (U[0][1], U[1][1] - 1))
        nonzero = [row for row in A if row != (0, 0)]
        if not nonzero:
            directions = [(Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)), (Fraction(1), Fraction(1))]
        else:
            p, q = nonzero[0]
            w = (-q, p)
            if any(r[0] * w[0] + r[1] * w[1] != 0 for r in nonzero):
                continue  # only O = 0
            directions = [w]
        for w in directions:
            sq = (w[0] * w[0], w[1] * w[1])
            image = (U[0][0] * sq[0] + U[1][0] * sq[1], U[0][1] * sq[0] + U[1][1] * sq[1])
            if image != sq:
                return True
    return False


def counterexample_search_classical(n_max: int, seed=0, trials: int = 200,
                                    tol: Tolerances = DEFAULT_TOL) -> SearchResult:
    """A chain and observable with ``U^T O = O`` but ``U^T O^2 != O^2``.

    ``n_max < 3``: an exhaustive rational grid over 2-state chains confirms
    no instance exists, and the 3-state instance is returned with a note.
    ``n_max = 3``: the minimal 3-state instance. ``n_max >= 4``: random
    ``n_max``-state chains with two absorbing states are searched, falling
    back to the 3-state instance. Results are re-verified before return.
    """
    notes = []
    if n_max < 3:
        if _two_state_grid_has_counterexample():
            raise AssertionError("two-state grid produced a counterexample")
        notes.append("no 2-state counterexample on the 1/64 grid; returning the 3-state instance")
    result = None
    if n_max >= 4:
        rng = np.random.default_rng(seed)
        n = n_max
        for _ in range(trials):
            U = rng.random((n, n))
            U[:, :2] = 0.0
            U[0, 0] = U[1, 1] = 1.0  # two absorbing states
            U[:, 2:] /= U[:, 2:].sum(axis=0)
            # harmonic observables: kernel of U^T - I
            _, s, Vh = np.linalg.svd(U.T - np.eye(n))
            null = Vh[int(np.sum(s > tol.rank_tol * s[0])):]
            if null.shape[0] < 2:
                continue
            O = rng.normal(size=null.shape[0]) @ null
            O = np.real(O)
            if _is_counterexample(U, O, 10 * tol.eq_tol):
                result = SearchResult(ClassicalChain(U), O, "search")
                break
        if result is None:
            notes.append("random search found nothing; returning the 3-state instance")
    if result is None:
        result = SearchResult(ClassicalChain(COUNTEREXAMPLE_3.copy()),
                              COUNTEREXAMPLE_3_OBSERVABLE.copy(), "fallback")
    result.notes.extend(notes)
    if not _is_counterexample(result.chain.matrix, result.observable, 10 * tol.eq_tol):
        raise AssertionError("returned instance failed re-verification")
    return result
