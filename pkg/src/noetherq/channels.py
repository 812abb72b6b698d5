"""Quantum operations, stochastic maps and their dilations.

Every Kraus channel here has the form ``X -> sum_k A_k X A_k^dagger``. In
the Schroedinger picture the family satisfies ``sum A_k^dagger A_k = I``
(trace preservation); in the Heisenberg picture ``sum A_k A_k^dagger = I``
(unitality). The trace dual of a Schroedinger channel with operators
``A_k`` is the Heisenberg channel with operators ``A_k^dagger``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .linalg_core import (
    DEFAULT_TOL, DimensionMismatch, PreconditionError, SuperOperator, Tolerances,
    dagger, hs_norm, is_psd, matrix_units, min_eigenvalue, psd_sqrt, trace_dual,
)

__all__ = [
    "KrausChannel", "TRANSPOSE", "StochasticMapSpec", "StinespringTriple",
    "build_luders", "unitary_channel", "channel_super", "choi_matrix", "capability_flags",
    "check_flags", "amplify", "PositivityProfile", "KPositivity", "positivity_profile",
    "transpose_map", "stinespring_dilation", "schwarz_defect", "is_completely_positive",
]

PICTURES = ("schrodinger", "heisenberg")


@dataclass(frozen=True)
class KrausChannel:
    dim: int
    kraus_ops: tuple
    picture: str = "schrodinger"
    tol: Tolerances = field(default=DEFAULT_TOL, compare=False, repr=False)

    def __post_init__(self):
        if self.picture not in PICTURES:
            raise ValueError(f"picture must be one of {PICTURES}, got {self.picture!r}")
        ops = tuple(np.array(A, dtype=complex) for A in self.kraus_ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        for A in ops:
            if A.shape != (self.dim, self.dim):
                raise DimensionMismatch(f"Kraus operator of shape {A.shape} in a channel on M_{self.dim}")
            A.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)
        r = self.normalization_residual()
        if r > self.tol.eq_tol * max(1, self.dim):
            which = "sum A^dagger A" if self.picture == "schrodinger" else "sum A A^dagger"
            raise PreconditionError(f"{self.picture} channel requires {which} = I (residual {r:.3e})")

    def normalization_residual(self) -> float:
        if self.picture == "schrodinger":
            total = sum(dagger(A) @ A for A in self.kraus_ops)
        else:
            total = sum(A @ dagger(A) for A in self.kraus_ops)
        return hs_norm(total - np.eye(self.dim))

    def dual(self) -> "KrausChannel":
        other = "heisenberg" if self.picture == "schrodinger" else "schrodinger"
        return KrausChannel(self.dim, tuple(dagger(A) for A in self.kraus_ops), other, self.tol)

    def superoperator(self) -> SuperOperator:
        return channel_super(self)

    def apply(self, X) -> np.ndarray:
        return sum(A @ X @ dagger(A) for A in self.kraus_ops)


class _Transpose:
    """Pipeline stage standing for the transpose map."""

    def __repr__(self):
        return "TRANSPOSE"


TRANSPOSE = _Transpose()

Stage = Union[KrausChannel, _Transpose]


@dataclass(frozen=True)
class StochasticMapSpec:
    """Convex mixture of pipelines; each pipeline applies its stages left to right.

    A single pipeline is written ``StochasticMapSpec(d, ((ch, TRANSPOSE),))``.
    Kraus stages must be Schroedinger-picture channels.
    """

    dim: int
    pipelines: tuple
    weights: tuple | None = None

    def __post_init__(self):
        pipes = tuple(tuple(p) for p in self.pipelines)
        if not pipes:
            raise ValueError("at least one pipeline is required")
        for pipe in pipes:
            for stage in pipe:
                if isinstance(stage, KrausChannel):
                    if stage.dim != self.dim:
                        raise DimensionMismatch(f"stage on M_{stage.dim} in a pipeline on M_{self.dim}")
                    if stage.picture != "schrodinger":
                        raise PreconditionError("pipeline stages must be Schroedinger-picture channels")
                elif stage is not TRANSPOSE:
                    raise TypeError(f"unknown pipeline stage {stage!r}")
        w = self.weights
        if w is None:
            w = (1.0 / len(pipes),) * len(pipes)
        w = tuple(float(x) for x in w)
        if len(w) != len(pipes):
            raise ValueError("need exactly one weight per pipeline")
        if min(w) < 0 or abs(sum(w) - 1) > DEFAULT_TOL.eq_tol:
            raise ValueError(f"weights must be nonnegative and sum to 1, got {w}")
        object.__setattr__(self, "pipelines", pipes)
        object.__setattr__(self, "weights", w)

    def compile(self, tol: Tolerances = DEFAULT_TOL) -> SuperOperator:
        """Single superoperator for the mixture; capability flags recomputed from scratch."""
        total = np.zeros((self.dim ** 2,) * 2, dtype=complex)
        for w, pipe in zip(self.weights, self.pipelines):
            M = np.eye(self.dim ** 2, dtype=complex)
            for stage in pipe:
                S = transpose_map(self.dim) if stage is TRANSPOSE else channel_super(stage)
                M = S.matrix @ M
            total += w * M
        S = SuperOperator(total)
        return S.with_flags(**capability_flags(S, tol))


@dataclass(frozen=True)
class StinespringTriple:
    """``Phi(a) = V^dagger (a kron I_m) V`` with ``V : C^d -> C^d kron C^m``."""

    V: np.ndarray
    dims: tuple[int, int]

    def rep(self, a) -> np.ndarray:
        return np.kron(np.asarray(a, dtype=complex), np.eye(self.dims[1]))

    def compress(self, a) -> np.ndarray:
        return dagger(self.V) @ self.rep(a) @ self.V

    def contraction_defect(self) -> float:
        """Minimum eigenvalue of ``I - V^dagger V`` (nonnegative iff ``||V|| <= 1``)."""
        return min_eigenvalue(np.eye(self.dims[0]) - dagger(self.V) @ self.V)

    def co_contraction_defect(self) -> float:
        """Minimum eigenvalue of ``I_K - V V^dagger``."""
        n = self.dims[0] * self.dims[1]
        return min_eigenvalue(np.eye(n) - self.V @ dagger(self.V))

    def reconstruction_error(self, S: SuperOperator) -> float:
        d = self.dims[0]
        return max(hs_norm(self.compress(E) - S.apply(E)) for _, _, E in matrix_units(d))


def build_luders(effects: Sequence, tol: Tolerances = DEFAULT_TOL) -> KrausChannel:
    """Lueders operation ``T -> sum A_n^{1/2} T A_n^{1/2}`` from PSD effects summing to I."""
    effects = [np.asarray(A, dtype=complex) for A in effects]
    if not effects:
        raise ValueError("no effects given")
    d = effects[0].shape[0]
    for n, A in enumerate(effects):
        if A.shape != (d, d):
            raise DimensionMismatch(f"effect {n} has shape {A.shape}, expected {(d, d)}")
        if not is_psd(A, tol):
            raise PreconditionError(f"effect {n} is not PSD (min eigenvalue {min_eigenvalue(A):.3e})")
    r = hs_norm(sum(effects) - np.eye(d))
    if r > tol.eq_tol * d:
        raise PreconditionError(f"effects do not sum to the identity (residual {r:.3e})")
    return KrausChannel(d, tuple(psd_sqrt(A, tol) for A in effects), "schrodinger", tol)


def unitary_channel(U, picture: str = "schrodinger") -> KrausChannel:
    U = np.asarray(U, dtype=complex)
    return KrausChannel(U.shape[0], (U,), picture)


def channel_super(ch: KrausChannel) -> SuperOperator:
    """``sum_k conj(A_k) kron A_k``, i.e. ``X -> sum A_k X A_k^dagger``."""
    M = sum(np.kron(A.conj(), A) for A in ch.kraus_ops)
    flags = {"hermiticity_preserving": True, "completely_positive": True}
    flags["trace_preserving" if ch.picture == "schrodinger" else "unital"] = True
    return SuperOperator(M, flags)


def choi_matrix(S: SuperOperator) -> np.ndarray:
    """``C = sum_ij E_ij kron S(E_ij)`` on ``C^d kron C^d``."""
    d = S.dim
    C = np.zeros((d * d, d * d), dtype=complex)
    for i, j, E in matrix_units(d):
        C[i * d:(i + 1) * d, j * d:(j + 1) * d] = S.apply(E)
    return C


def is_completely_positive(S: SuperOperator, tol: Tolerances = DEFAULT_TOL) -> bool:
    C = choi_matrix(S)
    return is_psd(C, tol)


def capability_flags(S: SuperOperator, tol: Tolerances = DEFAULT_TOL) -> dict[str, bool]:
    herm = S.is_hermiticity_preserving(tol)
    return {
        "trace_preserving": S.is_trace_preserving(tol),
        "unital": S.is_unital(tol),
        "hermiticity_preserving": herm,
        "completely_positive": herm and is_completely_positive(S, tol),
    }


def check_flags(S: SuperOperator, tol: Tolerances = DEFAULT_TOL) -> dict[str, bool]:
    """Return the cached flags that disagree with recomputation (empty when all agree)."""
    fresh = capability_flags(S, tol)
    return {k: v for k, v in S.flags.items() if fresh[k] != v}


def transpose_map(dim: int) -> SuperOperator:
    """``X -> X^T`` in the standard basis."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    n = dim * dim
    M = np.zeros((n, n))
    for i in range(dim):
        for j in range(dim):
            # vec index of E_ij is j*dim + i; its image E_ji sits at i*dim + j
            M[i * dim + j, j * dim + i] = 1.0
    return SuperOperator(M, {"trace_preserving": True, "unital": True,
                             "hermiticity_preserving": True, "completely_positive": dim == 1})


def amplify(S: SuperOperator, X: np.ndarray, k: int) -> np.ndarray:
    """Apply ``id_k kron S`` to a batch of ``(kd, kd)`` block matrices.

    ``X`` may be a single matrix or an array of shape ``(N, kd, kd)``.
    """
    d = S.dim
    X = np.asarray(X, dtype=complex)
    single = X.ndim == 2
    if single:
        X = X[None]
    N = X.shape[0]
    if X.shape[1:] != (k * d, k * d):
        raise DimensionMismatch(f"expected blocks of total size {k * d}, got {X.shape[1:]}")
    # (N, a, i, b, j) -> block (a, b) holds the d x d matrix indexed by (i, j)
    blocks = X.reshape(N, k, d, k, d).transpose(0, 1, 3, 2, 4)
    vecs = blocks.transpose(0, 1, 2, 4, 3).reshape(N, k, k, d * d)  # column stacking
    out = vecs @ S.matrix.T
    out = out.reshape(N, k, k, d, d).transpose(0, 1, 2, 4, 3)
    Y = out.transpose(0, 1, 3, 2, 4).reshape(N, k * d, k * d)
    return Y[0] if single else Y


@dataclass(frozen=True)
class KPositivity:
    k: int
    status: str  # "violated" or "no-violation-found"
    min_eigenvalue: float
    witness: np.ndarray | None = None
    samples: int = 0

    @property
    def violated(self) -> bool:
        return self.status == "violated"


@dataclass(frozen=True)
class PositivityProfile:
    trace_preserving: bool
    unital: bool
    hermiticity_preserving: bool
    completely_positive: bool
    choi_min_eigenvalue: float
    k_positive: dict
    warnings: tuple[str, ...] = ()

    @property
    def positive(self) -> bool | None:
        """``True`` if CP; ``False`` with a witness; ``None`` when only sampling supports positivity."""
        if self.completely_positive:
            return True
        first = self.k_positive.get(1)
        if first is not None and first.violated:
            return False
        return None


def _canonical_witnesses(k: int, d: int) -> list[np.ndarray]:
    """Block matrices ``[E_ij]`` over pairs of basis indices; all PSD."""
    out = []
    if k < 2:
        return out
    m = min(k, d)
    # full matrix-unit witness sum_{ab} E_ab kron E_ab restricted to the first m indices
    W = np.zeros((k * d, k * d), dtype=complex)
    for a in range(m):
        for b in range(m):
            W[a * d + a, b * d + b] = 1.0
    out.append(W)
    for i in range(d):
        for j in range(i + 1, d):
            # the 2x2 witness [[E_ii, E_ij], [E_ji, E_jj]] padded into k blocks
            W = np.zeros((k * d, k * d), dtype=complex)
            idx = {0: i, 1: j}
            for a in range(2):
                for b in range(2):
                    W[a * d + idx[a], b * d + idx[b]] = 1.0
            out.append(W)
    return out


def _random_psd_batch(rng, n: int, size: int) -> np.ndarray:
    G = rng.normal(size=(n, size, size)) + 1j * rng.normal(size=(n, size, size))
    half = n // 2
    # rank-one samples are extreme points of the PSD cone, the rest full rank
    v = G[:half, :, :1]
    out = np.empty((n, size, size), dtype=complex)
    out[:half] = v @ v.conj().transpose(0, 2, 1)
    out[half:] = G[half:] @ G[half:].conj().transpose(0, 2, 1)
    norms = np.trace(out, axis1=1, axis2=2).real
    return out / norms[:, None, None]


def positivity_profile(S: SuperOperator, k_max: int = 2, samples: int = 1000,
                       seed=0, tol: Tolerances = DEFAULT_TOL) -> PositivityProfile:
    """Classify ``S``: exact flags, exact complete positivity, sampled k-positivity.

    k-positivity is only ever certified negatively (a witness is returned)
    or reported as ``no-violation-found`` after the canonical matrix-unit
    witnesses and ``samples`` random PSD inputs have been tried.
    """
    rng = np.random.default_rng(seed)
    herm = S.is_hermiticity_preserving(tol)
    choi_min = min_eigenvalue(choi_matrix(S))
    cp = herm and choi_min >= -tol.psd_tol
    d = S.dim
    kpos = {}
    for k in range(1, k_max + 1):
        worst, witness = np.inf, None
        candidates = _canonical_witnesses(k, d)
        tried = 0
        if candidates:
            out = amplify(S, np.stack(candidates), k)
            mins = np.linalg.eigvalsh((out + out.conj().transpose(0, 2, 1)) / 2)[:, 0]
            i = int(np.argmin(mins))
            worst, witness = float(mins[i]), candidates[i]
            tried += len(candidates)
        remaining = samples
        while remaining > 0 and not (worst < -tol.psd_tol):
            n = min(remaining, 2000)
            batch = _random_psd_batch(rng, n, k * d)
            out = amplify(S, batch, k)
            mins = np.linalg.eigvalsh((out + out.conj().transpose(0, 2, 1)) / 2)[:, 0]
            i = int(np.argmin(mins))
            if mins[i] < worst:
                worst, witness = float(mins[i]), batch[i]
            remaining -= n
            tried += n
        status = "violated" if worst < -tol.psd_tol else "no-violation-found"
        kpos[k] = KPositivity(k, status, worst, witness if status == "violated" else None, tried)
    notes = []
    if not cp:
        notes.extend(f"{k}-positivity inconclusive: no violation in {p.samples} inputs"
                     for k, p in kpos.items() if not p.violated)
    return PositivityProfile(
        trace_preserving=S.is_trace_preserving(tol), unital=S.is_unital(tol),
        hermiticity_preserving=herm, completely_positive=cp,
        choi_min_eigenvalue=choi_min, k_positive=kpos, warnings=tuple(notes))


def stinespring_dilation(ch, tol: Tolerances = DEFAULT_TOL) -> StinespringTriple:
    """Stinespring triple for a Heisenberg-picture Kraus family.

    For ``Phi(a) = sum_k A_k a A_k^dagger`` the dilation is
    ``V h = sum_k (A_k^dagger h) kron e_k`` and ``pi(a) = a kron I_m``.
    Sub-unital families (``||Phi(I)|| <= 1``) are accepted, so ``ch`` may
    also be a plain sequence of Kraus operators.
    """
    ops = ch.kraus_ops if isinstance(ch, KrausChannel) else tuple(np.asarray(A, dtype=complex) for A in ch)
    if isinstance(ch, KrausChannel) and ch.picture != "heisenberg":
        raise PreconditionError("stinespring_dilation expects a Heisenberg-picture channel; use ch.dual()")
    d, m = ops[0].shape[0], len(ops)
    unit_image = sum(A @ dagger(A) for A in ops)
    norm = float(np.linalg.norm(unit_image, 2))
    if norm > 1 + tol.eq_tol:
        raise PreconditionError(f"||Phi(I)|| = {norm:.6g} exceeds 1")
    V = np.zeros((d * m, d), dtype=complex)
    for k, A in enumerate(ops):
        e = np.zeros((m, 1))
        e[k] = 1.0
        V += np.kron(dagger(A), e)
    return StinespringTriple(V, (d, m))


def schwarz_defect(S: SuperOperator, a, tol: Tolerances = DEFAULT_TOL,
                   check: bool = True) -> np.ndarray:
    """``S(a^dagger a) - S(a)^dagger S(a)``; PSD for unital CP ``S``."""
    if check:
        if not S.is_unital(tol):
            raise PreconditionError("Schwarz defect needs a unital map")
        if not is_completely_positive(S, tol):
            raise PreconditionError("Schwarz defect needs a completely positive map")
    a = np.asarray(a, dtype=complex)
    Sa = S.apply(a)
    return S.apply(dagger(a) @ a) - dagger(Sa) @ Sa


def heisenberg_super(S: SuperOperator, tol: Tolerances = DEFAULT_TOL) -> SuperOperator:
    """The Heisenberg-picture map associated with ``S``.

    Unital maps are returned unchanged; trace-preserving ones are dualized.
    """
    if S.is_unital(tol):
        return S
    if S.is_trace_preserving(tol):
        return trace_dual(S, tol)
    raise PreconditionError("map is neither unital nor trace-preserving")
