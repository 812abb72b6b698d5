"""Quantum dynamical semigroups: generators, evolution, constants of motion, ergodic projections."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .channels import choi_matrix
from .fixed_structure import (
    NoetherVerdict, _commutator_norm, _holds, _random_states, fixed_point_space,
    measurement_superop, multiplication_closure_residual,
    spanning_states,
)
from .linalg_core import (
    DEFAULT_TOL, ConvergenceError, DimensionMismatch, OperatorSubspace, PreconditionError,
    SuperOperator, Tolerances, dagger, hs_norm, is_hermitian, is_psd, kernel_subspace,
    matrix_units, min_eigenvalue, psd_sqrt, subspace_distance, subspace_intersect, trace_dual,
)

__all__ = [
    "LindbladGenerator", "SemigroupSpec", "DEFAULT_TIMES", "lindblad_super", "evolve",
    "growth_bound", "yosida_approx", "constants_of_motion", "constants_crosscheck",
    "stationarity_residual", "ErgodicProjection", "ergodic_projection",
    "ConditionalExpectationReport", "conditional_expectation_check", "noether_continuous",
    "quantum_stats", "expm",
]

DEFAULT_TIMES = (0.0, 0.1, 0.5, 1.0, 2.0, 10.0)


@dataclass(frozen=True)
class LindbladGenerator:
    dim: int
    lindblad_ops: tuple = ()
    hamiltonian: np.ndarray | None = None
    picture: str = "schrodinger"

    def __post_init__(self):
        if self.picture not in ("schrodinger", "heisenberg"):
            raise ValueError(f"unknown picture {self.picture!r}")
        ops = tuple(np.array(L, dtype=complex) for L in self.lindblad_ops)
        for L in ops:
            if L.shape != (self.dim, self.dim):
                raise DimensionMismatch(f"Lindblad operator of shape {L.shape} on M_{self.dim}")
        H = np.zeros((self.dim, self.dim), dtype=complex) if self.hamiltonian is None \
            else np.array(self.hamiltonian, dtype=complex)
        if H.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"Hamiltonian of shape {H.shape} on M_{self.dim}")
        if not is_hermitian(H):
            raise PreconditionError("Hamiltonian must be hermitian")
        object.__setattr__(self, "lindblad_ops", ops)
        object.__setattr__(self, "hamiltonian", H)


def lindblad_super(g: LindbladGenerator, picture: str | None = None) -> SuperOperator:
    """Generator matrix in the requested picture (defaults to ``g.picture``).

    Schroedinger: ``sum (L S L* - S L*L/2 - L*L S/2) + i[S, H]``.
    Heisenberg:  ``sum (L* T L - L*L T/2 - T L*L/2) - i[T, H]``.
    """
    picture = picture or g.picture
    d = g.dim
    I = np.eye(d)
    H = g.hamiltonian
    M = np.zeros((d * d, d * d), dtype=complex)
    for L in g.lindblad_ops:
        LL = dagger(L) @ L
        if picture == "schrodinger":
            M += np.kron(L.conj(), L)
        else:
            M += np.kron(L.T, dagger(L))
        M -= 0.5 * (np.kron(LL.T, I) + np.kron(I, LL))
    comm = np.kron(H.T, I) - np.kron(I, H)  # X -> XH - HX
    M += 1j * comm if picture == "schrodinger" else -1j * comm
    return SuperOperator(M)


@dataclass(frozen=True)
class SemigroupSpec:
    """A norm-continuous semigroup given by its generator.

    ``source`` is a :class:`LindbladGenerator` or a channel superoperator
    ``Psi``; in the second case the generator is ``Psi - id``. Channels given
    in the Heisenberg picture (unital) are dualized to get ``Psi``.
    """

    source: object
    times: tuple = DEFAULT_TIMES
    channel_picture: str = "schrodinger"

    @classmethod
    def from_lindblad(cls, g: LindbladGenerator, times: Sequence[float] = DEFAULT_TIMES):
        return cls(g, tuple(times))

    @classmethod
    def from_channel(cls, channel: SuperOperator, picture: str = "schrodinger",
                     times: Sequence[float] = DEFAULT_TIMES):
        if picture not in ("schrodinger", "heisenberg"):
            raise ValueError(f"unknown picture {picture!r}")
        return cls(channel, tuple(times), picture)

    @property
    def dim(self) -> int:
        return self.source.dim

    @property
    def generator(self) -> SuperOperator:
        """Schroedinger-picture generator ``psi``."""
        if isinstance(self.source, LindbladGenerator):
            return lindblad_super(self.source, "schrodinger")
        Psi = self.source if self.channel_picture == "schrodinger" else trace_dual(self.source)
        return Psi - SuperOperator.identity(self.dim)

    @property
    def dual_generator(self) -> SuperOperator:
        """Heisenberg-picture generator ``psi#``."""
        if isinstance(self.source, LindbladGenerator):
            return lindblad_super(self.source, "heisenberg")
        Phi = self.source if self.channel_picture == "heisenberg" else trace_dual(self.source)
        return Phi - SuperOperator.identity(self.dim)

    def sample_times(self, positive: bool = True) -> list[float]:
        return [t for t in self.times if t > 0] if positive else list(self.times)


def expm(M: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Matrix exponential; diagonalizes normal matrices, Pade scaling-and-squaring otherwise."""
    M = np.asarray(M, dtype=complex)
    if hs_norm(M @ dagger(M) - dagger(M) @ M) <= tol.eq_tol * max(1.0, hs_norm(M)) ** 2:
        T, Z = scipy.linalg.schur(M, output="complex")
        return (Z * np.exp(np.diag(T))) @ dagger(Z)
    return scipy.linalg.expm(M)


def evolve(spec: SemigroupSpec, t: float, picture: str = "schrodinger",
           tol: Tolerances = DEFAULT_TOL) -> SuperOperator:
    """``exp(t psi)`` (or ``exp(t psi#)`` for ``picture='heisenberg'``)."""
    if t < 0:
        raise ValueError(f"evolution time must be nonnegative, got {t}")
    if t == 0:
        return SuperOperator.identity(spec.dim)
    G = spec.generator if picture == "schrodinger" else spec.dual_generator
    return SuperOperator(expm(t * G.matrix, tol))


def growth_bound(spec: SemigroupSpec) -> float:
    """Spectral abscissa ``max Re spec(psi)``."""
    return float(np.max(np.linalg.eigvals(spec.generator.matrix).real))


def yosida_approx(spec: SemigroupSpec, t: float, lam: float, tol: Tolerances = DEFAULT_TOL,
                  max_cond: float = 1e12) -> SuperOperator:
    """``exp(-lam t) sum_n (lam^2 t)^n (lam - psi)^{-n} / n!`` summed until the tail is below ``eq_tol``.

    The series is evaluated at ``tau = t / 2**s`` with ``lam * tau <= 1`` and
    then squared ``s`` times; as a function of ``t`` the expression is a
    semigroup, so this is exact and avoids overflow of ``exp(lam t)``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    psi = spec.generator.matrix
    n = psi.shape[0]
    omega = growth_bound(spec)
    if lam <= max(omega, 0.0):
        raise PreconditionError(f"lambda = {lam} does not exceed the growth bound {max(omega, 0.0)}")
    shifted = lam * np.eye(n) - psi
    cond = np.linalg.cond(shifted)
    if cond > max_cond:
        raise PreconditionError(f"resolvent is ill-conditioned (condition number {cond:.3e})")
    R = np.linalg.inv(shifted)
    if t == 0:
        return SuperOperator.identity(spec.dim)
    s = max(0, math.ceil(math.log2(lam * t))) if lam * t > 1 else 0
    tau = t / 2 ** s
    X = lam * lam * tau * R
    x = np.linalg.norm(X, 2)
    term = np.eye(n, dtype=complex)
    total = term.copy()
    k = 0
    while True:
        k += 1
        term = term @ X / k
        total += term
        # remainder of the exponential series beyond k is at most x^(k+1)/(k+1)! * e^x
        if k > x and x ** (k + 1) / math.factorial(k + 1) * math.exp(x) < tol.eq_tol * 1e-3:
            break
        if k > 10_000:
            raise ConvergenceError("Yosida series did not converge")
    Y = math.exp(-lam * tau) * total
    for _ in range(s):
        Y = Y @ Y
    return SuperOperator(Y)


def stationarity_residual(g: LindbladGenerator, T) -> float:
    """Residual of ``sum (L* T L - L*L T/2 - T L*L/2) - i[T, H]``, written out directly."""
    T = np.asarray(T, dtype=complex)
    out = -1j * (T @ g.hamiltonian - g.hamiltonian @ T)
    for L in g.lindblad_ops:
        LL = dagger(L) @ L
        out = out + dagger(L) @ T @ L - 0.5 * LL @ T - 0.5 * T @ LL
    return hs_norm(out)


def constants_of_motion(spec: SemigroupSpec, tol: Tolerances = DEFAULT_TOL) -> OperatorSubspace:
    """``ker(psi#)``: observables whose expectation is constant along the evolution."""
    return kernel_subspace(spec.dual_generator, tol)


def constants_crosscheck(spec: SemigroupSpec, constants: OperatorSubspace | None = None,
                         tol: Tolerances = DEFAULT_TOL) -> dict:
    """Compare ``ker(psi#)`` with the fixed spaces of ``exp(t psi#)`` at the sampled times.

    Returns per-time subspace distances, the distance to the joint fixed
    space, and (for Lindblad generators) the worst stationarity residual of
    the basis.
    """
    K = constants if constants is not None else constants_of_motion(spec, tol)
    per_time = {}
    joint = None
    for t in spec.sample_times():
        F = fixed_point_space(evolve(spec, t, "heisenberg", tol), tol)
        per_time[t] = subspace_distance(K, F)
        joint = F if joint is None else subspace_intersect(joint, F, tol)
    out = {"per_time": per_time,
           "joint": subspace_distance(K, joint) if joint is not None else 0.0}
    if isinstance(spec.source, LindbladGenerator):
        out["stationarity"] = max((stationarity_residual(spec.source, B) for B in K.basis), default=0.0)
    else:
        out["stationarity"] = max((hs_norm(spec.dual_generator.apply(B)) for B in K.basis), default=0.0)
    return out


# --------------------------------------------------------------------------
# ergodic projections
# --------------------------------------------------------------------------

@dataclass
class ErgodicProjection:
    projection: SuperOperator
    mode: str
    method: str
    spectral_gap: float
    iterations: int = 0
    crosscheck_distance: float | None = None
    range_space: OperatorSubspace | None = None
    notes: list = field(default_factory=list)

    def idempotency_residual(self) -> float:
        P = self.projection.matrix
        return float(np.linalg.norm(P @ P - P))

    def unitality_residual(self) -> float:
        return self.projection.unitality_residual()

    def choi_min_eigenvalue(self) -> float:
        return min_eigenvalue(choi_matrix(self.projection))


def _null_basis(M: np.ndarray, tol: Tolerances) -> np.ndarray:
    _, s, Vh = np.linalg.svd(M)
    if s[0] == 0:
        return np.eye(M.shape[1], dtype=complex)
    rank = int(np.sum(s > tol.rank_tol * s[0]))
    return Vh[rank:].conj().T


def _spectral_projection(G: np.ndarray, tol: Tolerances) -> np.ndarray:
    """Projection onto ``ker G`` along ``ran G`` (eigenvalue 0 assumed semisimple)."""
    K = _null_basis(G, tol)
    W = _null_basis(G.conj().T, tol)
    if K.shape[1] != W.shape[1]:
        raise ConvergenceError("left and right kernels differ in dimension; eigenvalue is not semisimple")
    if K.shape[1] == 0:
        return np.zeros_like(G)
    return K @ np.linalg.solve(W.conj().T @ K, W.conj().T)


def ergodic_projection(obj, mode: str = "discrete", tol: Tolerances = DEFAULT_TOL,
                       max_iter: int = 100_000, horizon: float | None = None) -> ErgodicProjection:
    """Idempotent unital CP map onto the (joint) fixed space.

    ``mode='discrete'``: ``obj`` is a unital CP superoperator ``Phi``.
    Richardson-accelerated Cesaro means ``2 C_2n - C_n`` are doubled until
    they settle or ``max_iter`` powers have been averaged; otherwise the
    spectral projection onto the eigenvalue-1 eigenspace is used.

    ``mode='continuous'``: ``obj`` is a :class:`SemigroupSpec`. The spectral
    projection onto ``ker(psi#)`` along ``ran(psi#)`` is returned and
    compared with the time average of ``exp(t psi#)`` over ``[0, horizon]``.
    """
    if mode == "discrete":
        Phi = obj
        if not isinstance(Phi, SuperOperator):
            raise TypeError("discrete mode expects a SuperOperator")
        if not Phi.is_unital(tol):
            raise PreconditionError("ergodic projection expects a unital (Heisenberg-picture) map")
        M = Phi.matrix
        n = M.shape[0]
        ev = np.linalg.eigvals(M)
        others = np.abs(ev[np.abs(ev - 1) > 1e-6])
        gap = float(1 - others.max()) if others.size else 1.0
        spectral = _spectral_projection(M - np.eye(n), tol)
        # S_m = sum_{k<m} Phi^k, doubled via S_2m = S_m + Phi^m S_m
        S, Pm, m = np.eye(n, dtype=complex), M.copy(), 1
        prev_est, est, used, converged = None, None, 0, False
        while 2 * m <= max_iter:
            S2 = S + Pm @ S
            est = 2 * (S2 / (2 * m)) - S / m
            if prev_est is not None and np.linalg.norm(est - prev_est) <= tol.eq_tol:
                converged = True
                used = 2 * m
                break
            prev_est = est
            S, Pm, m = S2, Pm @ Pm, 2 * m
            used = m
        if converged:
            P, method = est, "cesaro"
        else:
            P, method = spectral, "spectral"
        out = ErgodicProjection(SuperOperator(P), "discrete", method, gap, used,
                                crosscheck_distance=float(np.linalg.norm(est - spectral)) if est is not None else None)
        if not converged:
            out.notes.append(f"Cesaro means not settled after {used} powers (spectral gap {gap:.3e}); "
                             f"spectral projection used")
        out.range_space = fixed_point_space(Phi, tol)
        return out
    if mode == "continuous":
        spec = obj
        if not isinstance(spec, SemigroupSpec):
            raise TypeError("continuous mode expects a SemigroupSpec")
        G = spec.dual_generator.matrix
        n = G.shape[0]
        ev = np.linalg.eigvals(G)
        others = ev.real[np.abs(ev) > 1e-6]
        gap = float(-others.max()) if others.size else np.inf
        P = _spectral_projection(G, tol)
        T = horizon if horizon is not None else (50.0 / gap if np.isfinite(gap) and gap > 0 else 50.0)
        avg = _time_average(G, T)
        out = ErgodicProjection(SuperOperator(P), "continuous", "spectral", gap,
                                crosscheck_distance=float(np.linalg.norm(avg - P)))
        out.range_space = kernel_subspace(G, tol)
        return out
    raise ValueError(f"unknown mode {mode!r}")


def _time_average(G: np.ndarray, T: float, nodes: int = 8, max_doublings: int = 24) -> np.ndarray:
    """``(1/T) int_0^T exp(t G) dt`` by composite Gauss-Legendre quadrature.

    ``[0, T]`` is cut into ``2^p`` panels so that each panel is short on the
    scale of the spectrum; the sum over panels ``sum_k exp(k h G)`` is built
    by doubling. The averages over ``[0, T]`` and ``[0, 2T]`` are combined as
    ``2 avg(2T) - avg(T)``, which cancels the ``1/T`` bias of the plain mean.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    radius = max(float(np.max(np.abs(np.linalg.eigvals(G)))), 1e-12)
    p = int(min(max_doublings, max(6, np.ceil(np.log2(2.0 * T * radius)))))
    n_panels = 2 ** p
    h = T / n_panels
    n = G.shape[0]
    panel = sum(wi / 2 * scipy.linalg.expm((xi + 1) / 2 * h * G) for xi, wi in zip(x, w))
    # S = sum_{k < m} step^k, Pm = step^m; doubled p times to m = n_panels
    S, Pm = np.eye(n, dtype=complex), scipy.linalg.expm(h * G)
    for _ in range(p):
        S, Pm = S + Pm @ S, Pm @ Pm
    first = S @ panel / n_panels
    S2 = S + Pm @ S
    second = S2 @ panel / (2 * n_panels)
    return 2 * second - first


@dataclass
class ConditionalExpectationReport:
    passed: bool
    max_residual: float
    range_dimension: int
    range_closure_residual: float
    witness: np.ndarray | None = None

    @property
    def range_is_algebra(self) -> bool:
        return self.range_closure_residual <= DEFAULT_TOL.clause_tol


def conditional_expectation_check(P: SuperOperator, tol: Tolerances = DEFAULT_TOL) -> ConditionalExpectationReport:
    """Bimodule property ``P(a r) = P(a) r``, ``P(r a) = r P(a)`` over ``r`` in the range of ``P``."""
    M = P.matrix
    if np.linalg.norm(M @ M - M) > tol.clause_tol * max(1.0, np.linalg.norm(M)):
        raise PreconditionError("conditional_expectation_check needs an idempotent map")
    rng_space = fixed_point_space(P, tol)
    worst, witness = 0.0, None
    for r in rng_space.canonical_basis():
        r_worst = 0.0
        for _, _, E in matrix_units(P.dim):
            r_worst = max(r_worst,
                          hs_norm(P.apply(E @ r) - P.apply(E) @ r),
                          hs_norm(P.apply(r @ E) - r @ P.apply(E)))
        if witness is None and r_worst > tol.clause_tol * max(1.0, hs_norm(r)):
            witness = r
        worst = max(worst, r_worst)
    return ConditionalExpectationReport(
        passed=worst <= tol.clause_tol, max_residual=worst, range_dimension=rng_space.size,
        range_closure_residual=multiplication_closure_residual(rng_space), witness=witness)


# --------------------------------------------------------------------------
# continuous Noether verdicts
# --------------------------------------------------------------------------

def noether_continuous(spec: SemigroupSpec, A, tol: Tolerances = DEFAULT_TOL, seed=0,
                       n_random_states: int = 8) -> NoetherVerdict:
    """Symmetry versus conservation along a continuous semigroup.

    Commutators with ``Psi_t`` are sampled on ``spec.times``; commutators with
    the generator are exact. ``dom(psi)`` is all of ``M_d`` here, so the
    domain-invariance parts of the generator clauses hold trivially.
    """
    A = np.asarray(A, dtype=complex)
    d = spec.dim
    if A.shape != (d, d):
        raise DimensionMismatch(f"observable of shape {A.shape} for a semigroup on M_{d}")
    rng = np.random.default_rng(seed)
    psi, psi_d = spec.generator, spec.dual_generator
    times = spec.sample_times()
    flows = {t: evolve(spec, t, "schrodinger", tol) for t in times}
    duals = {t: evolve(spec, t, "heisenberg", tol) for t in times}
    states = spanning_states(d) + _random_states(d, n_random_states, rng)
    a_norm = hs_norm(A)
    scale = max(1.0, a_norm ** 2) * max(1.0, psi.norm())
    v = NoetherVerdict("continuous quantum Noether", A)
    v.notes.append("dom(psi) is the whole space in finite dimensions; domain clauses hold trivially")

    def family(tag, quad, quad_name, sym, dual_sym):
        S_sym, S_dual = sym(A), dual_sym(A)
        r_i = max(_commutator_norm(S_sym, F) for F in flows.values())
        r_ii = max(max(abs(np.trace(F.apply(rho) @ X) - np.trace(rho @ X)) for rho in states)
                   for F in flows.values() for X in (A, quad))
        r_iii = max(_commutator_norm(S_dual, F) for F in duals.values())
        r_iv = max(hs_norm(F.apply(X) - X) for F in duals.values() for X in (A, quad))
        r_v = _commutator_norm(S_sym, psi)
        rA, rQ = hs_norm(psi_d.apply(A)), hs_norm(psi_d.apply(quad))
        v.detail("A in ker psi#", _holds(rA, tol, a_norm), rA)
        v.detail(f"{quad_name} in ker psi#", _holds(rQ, tol, a_norm ** 2), rQ)
        s_name = "L_A" if tag == "L" else "R_A"
        d_name = "R_A" if tag == "L" else "L_A"
        labels = [f"{tag}(i) [{s_name}, Psi_t] = 0", f"{tag}(ii) A, {quad_name} constants",
                  f"{tag}(iii) [{d_name}, Psi_t#] = 0", f"{tag}(iv) A, {quad_name} joint fixed points",
                  f"{tag}(v) [{s_name}, psi] = 0", f"{tag}(vi) A, {quad_name} in ker psi#"]
        for label, r, s in zip(labels, (r_i, r_ii, r_iii, r_iv, r_v, max(rA, rQ)),
                               (scale, a_norm ** 2, scale, a_norm ** 2, scale, a_norm ** 2)):
            v.add(label, _holds(r, tol, s), r)
        return labels

    left = family("L", dagger(A) @ A, "A*A", SuperOperator.left, SuperOperator.right)
    right = family("R", A @ dagger(A), "AA*", SuperOperator.right, SuperOperator.left)
    if is_hermitian(A, tol):
        A2 = A @ A
        r_mean = max(abs(np.trace(psi.apply(rho) @ A)) for rho in states)
        # d/dt Var = tr(psi(rho) A^2) - 2 <A> tr(psi(rho) A)
        r_var = max(abs(np.trace(psi.apply(rho) @ A2) - 2 * np.trace(rho @ A) * np.trace(psi.apply(rho) @ A))
                    for rho in states)
        r = max(r_mean, r_var)
        v.add("herm: d/dt expectation and standard deviation = 0", _holds(r, tol, a_norm ** 2), r)
        group = left + right + ["herm: d/dt expectation and standard deviation = 0"]
        if is_psd(A, tol):
            M_root = measurement_superop(psd_sqrt(A, tol))
            r_m = [max(_commutator_norm(M_root, F) for F in flows.values()),
                   max(_commutator_norm(M_root, F) for F in duals.values()),
                   _commutator_norm(M_root, psi), _commutator_norm(M_root, psi_d)]
            labels = ["psd: [M_sqrtA, Psi_t] = 0", "psd: [M_sqrtA, Psi_t#] = 0",
                      "psd: [M_sqrtA, psi] = 0", "psd: [M_sqrtA, psi#] = 0"]
            m_scale = max(1.0, a_norm) * max(1.0, psi.norm())
            for label, r in zip(labels, r_m):
                v.add(label, _holds(r, tol, m_scale), r)
            group += labels
        v.groups.append(group)
    else:
        v.groups.extend([left, right])
    return v


def quantum_stats(A, rho, tol: Tolerances = DEFAULT_TOL) -> tuple[float, float, float]:
    """Expected value, variance and standard deviation of ``A`` in the state ``rho``."""
    A = np.asarray(A, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if A.shape != rho.shape:
        raise DimensionMismatch(f"observable {A.shape} and state {rho.shape}")
    if not is_hermitian(A, tol):
        raise PreconditionError("observable must be hermitian")
    if not is_psd(rho, tol) or abs(np.trace(rho) - 1) > tol.eq_tol:
        raise PreconditionError("rho is not a density matrix")
    mean = float(np.trace(rho @ A).real)
    var = float(np.trace(rho @ A @ A).real) - mean ** 2
    if var < -tol.psd_tol:
        raise PreconditionError(f"negative variance {var:.3e}")
    return mean, var, math.sqrt(max(var, 0.0))
