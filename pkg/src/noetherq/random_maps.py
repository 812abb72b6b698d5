"""Seeded random instances for the property and acceptance suites.

Generic random channels have trivial fixed-point structure, which makes most
equivalence checks hold vacuously. The generators here mix generic draws
with structured families (block decompositions, commuting symmetries,
non-algebraic fixed spaces, absorbing Markov classes) so that every clause
is exercised in both directions.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import ortho_group, unitary_group

from .channels import KrausChannel, StochasticMapSpec, TRANSPOSE, channel_super
from .classical_markov import ClassicalChain
from .linalg_core import SuperOperator, dagger, psd_sqrt
from .semigroups import LindbladGenerator, SemigroupSpec

__all__ = [
    "random_unitary", "random_orthogonal", "random_operator", "random_hermitian", "random_psd",
    "random_state", "random_projection", "random_kraus_channel", "random_unital_cp",
    "random_lindblad", "random_pipeline", "random_chain", "random_observable",
    "UNITAL_CP_KINDS", "LINDBLAD_KINDS", "CHAIN_KINDS", "PIPELINE_MODES",
]

UNITAL_CP_KINDS = ("generic", "automorphism", "unitary_mixture", "block", "non_algebra", "pinching")
LINDBLAD_KINDS = ("generic", "block", "dephasing", "from_channel")
CHAIN_KINDS = ("generic", "block", "absorbing")


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_unitary(d: int, seed=None) -> np.ndarray:
    if d == 1:
        return np.exp(2j * np.pi * _rng(seed).random()) * np.ones((1, 1))
    return unitary_group.rvs(d, random_state=_rng(seed))


def random_orthogonal(d: int, seed=None) -> np.ndarray:
    if d == 1:
        return np.ones((1, 1))
    return ortho_group.rvs(d, random_state=_rng(seed))


def random_operator(d: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    return (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)


def random_hermitian(d: int, seed=None) -> np.ndarray:
    X = random_operator(d, seed)
    return (X + dagger(X)) / 2


def random_psd(d: int, seed=None, rank: int | None = None) -> np.ndarray:
    rng = _rng(seed)
    G = random_operator(d, rng)[:, : (rank or d)]
    return G @ dagger(G)


def random_state(d: int, seed=None, rank: int | None = None) -> np.ndarray:
    rho = random_psd(d, seed, rank)
    return rho / np.trace(rho).real


def random_projection(d: int, seed=None, rank: int | None = None) -> np.ndarray:
    rng = _rng(seed)
    r = rank if rank is not None else int(rng.integers(1, d))
    U = random_unitary(d, rng)[:, :r]
    return U @ dagger(U)


def _normalize(ops, picture: str):
    """Rescale ``ops`` so that they satisfy the normalization of ``picture``."""
    total = sum((dagger(K) @ K if picture == "schrodinger" else K @ dagger(K)) for K in ops)
    root_inv = np.linalg.inv(psd_sqrt(total))
    if picture == "schrodinger":
        return [K @ root_inv for K in ops]
    return [root_inv @ K for K in ops]


def random_kraus_channel(d: int, n_ops: int = 2, picture: str = "schrodinger", seed=None) -> KrausChannel:
    rng = _rng(seed)
    ops = _normalize([random_operator(d, rng) for _ in range(n_ops)], picture)
    return KrausChannel(d, tuple(ops), picture)


def _partition(d: int, rng, min_blocks: int = 2) -> list[int]:
    """Random composition of ``d`` into at least ``min_blocks`` positive parts (when possible)."""
    if d < min_blocks:
        return [d]
    cuts = sorted(rng.choice(np.arange(1, d), size=int(rng.integers(min_blocks - 1, d)), replace=False))
    edges = [0, *cuts, d]
    return [b - a for a, b in zip(edges, edges[1:])]


def _block_diag(blocks) -> np.ndarray:
    d = sum(b.shape[0] for b in blocks)
    out = np.zeros((d, d), dtype=complex)
    k = 0
    for b in blocks:
        n = b.shape[0]
        out[k:k + n, k:k + n] = b
        k += n
    return out


def _heisenberg_kraus(kind: str, d: int, rng) -> list[np.ndarray]:
    if kind == "generic":
        ops = [random_operator(d, rng) for _ in range(int(rng.integers(1, 4)))]
        return _normalize(ops, "heisenberg")
    if kind == "automorphism":
        return [random_unitary(d, rng)]
    if kind == "unitary_mixture":
        # unitaries sharing a block structure: the fixed space is their commutant
        sizes = _partition(d, rng)
        W = random_unitary(d, rng)
        p = rng.dirichlet(np.ones(int(rng.integers(2, 4))))
        return [np.sqrt(pk) * W @ _block_diag([random_unitary(n, rng) for n in sizes]) @ dagger(W) for pk in p]
    if kind == "block":
        # independent generic channels on the diagonal blocks; off-diagonal blocks decay
        sizes = _partition(d, rng)
        m = int(rng.integers(1, 3))
        per_block = [_normalize([random_operator(n, rng) for _ in range(m)], "heisenberg") for n in sizes]
        ops = [_block_diag([blk[k] for blk in per_block]) for k in range(m)]
        W = random_unitary(d, rng)
        return [W @ K @ dagger(W) for K in ops]
    if kind == "non_algebra":
        # a -> P a P + tr(sigma P a P) Q; fixed space {B + tr(sigma B) Q}
        if d < 2:
            return [np.eye(1, dtype=complex)]
        r = int(rng.integers(1, d)) if d > 2 else 1
        if d >= 3 and r == 1:
            r = 2
        sigma = np.diag(rng.dirichlet(np.ones(r)))
        P = np.zeros((d, d), dtype=complex)
        P[:r, :r] = np.eye(r)
        ops = [P]
        for i in range(r):
            for j in range(r, d):
                A = np.zeros((d, d), dtype=complex)
                A[j, i] = np.sqrt(sigma[i, i])
                ops.append(A)
        W = random_unitary(d, rng)
        return [W @ K @ dagger(W) for K in ops]
    if kind == "pinching":
        W = random_unitary(d, rng)
        sizes = _partition(d, rng)
        ops, k = [], 0
        for n in sizes:
            P = np.zeros((d, d), dtype=complex)
            P[k:k + n, k:k + n] = np.eye(n)
            ops.append(W @ P @ dagger(W))
            k += n
        return ops
    raise ValueError(f"unknown unital CP kind {kind!r}")


def random_unital_cp(d: int, seed=None, kind: str | None = None) -> SuperOperator:
    """Random unital CP map (Heisenberg picture) from one of ``UNITAL_CP_KINDS``."""
    rng = _rng(seed)
    kind = kind or UNITAL_CP_KINDS[int(rng.integers(len(UNITAL_CP_KINDS)))]
    ops = _heisenberg_kraus(kind, d, rng)
    return channel_super(KrausChannel(d, tuple(ops), "heisenberg"))


def random_lindblad(d: int, seed=None, kind: str | None = None, max_ops: int = 3) -> SemigroupSpec:
    """Random semigroup spec from one of ``LINDBLAD_KINDS``.

    ``from_channel`` exponentiates ``Phi - id`` for a structured random
    unital CP map, which can have a fixed space that is not an algebra.
    """
    rng = _rng(seed)
    kind = kind or LINDBLAD_KINDS[int(rng.integers(len(LINDBLAD_KINDS)))]
    n_ops = int(rng.integers(1, max_ops + 1))
    H = random_hermitian(d, rng) * rng.uniform(0, 1)
    if kind == "generic":
        Ls = [random_operator(d, rng) * rng.uniform(0.3, 1) for _ in range(n_ops)]
    elif kind == "block":
        sizes = _partition(d, rng)
        W = random_unitary(d, rng)
        Ls = [W @ _block_diag([random_operator(n, rng) for n in sizes]) @ dagger(W) * rng.uniform(0.3, 1)
              for _ in range(n_ops)]
        H = W @ _block_diag([random_hermitian(n, rng) for n in sizes]) @ dagger(W) * rng.uniform(0, 1)
    elif kind == "dephasing":
        W = random_unitary(d, rng)
        Ls = [W @ np.diag(rng.normal(size=d)) @ dagger(W) for _ in range(n_ops)]
        H = W @ np.diag(rng.normal(size=d)) @ dagger(W)
    elif kind == "from_channel":
        sub = UNITAL_CP_KINDS[1:][int(rng.integers(len(UNITAL_CP_KINDS) - 1))]
        return SemigroupSpec.from_channel(random_unital_cp(d, rng, sub), "heisenberg")
    else:
        raise ValueError(f"unknown Lindblad kind {kind!r}")
    return SemigroupSpec.from_lindblad(LindbladGenerator(d, tuple(Ls), H, "schrodinger"))


PIPELINE_MODES = ("compatible", "generic", "half_fixed")

_M3_SCHRODINGER = (
    np.diag([1.0, 1.0, 0.0]).astype(complex),
    np.sqrt(0.5) * np.eye(3, dtype=complex)[:, [0]] @ np.eye(3, dtype=complex)[[2], :],
    np.sqrt(0.5) * np.eye(3, dtype=complex)[:, [1]] @ np.eye(3, dtype=complex)[[2], :],
)


def random_pipeline(d: int, seed=None, mode: str | None = None) -> tuple[StochasticMapSpec, np.ndarray]:
    """Random convex mixture of Kraus/transpose pipelines together with a PSD observable.

    ``compatible``: ``A`` is real symmetric with a degenerate spectrum and
    every Kraus stage is block-diagonal in its eigenbasis, so ``A`` and
    ``A^2`` are fixed by the dual. ``generic``: unrelated random stages and
    ``A``. ``half_fixed`` (``d = 3``): stages are rotated copies of the
    three-level map whose dual fixes ``A = diag(1, 0, 1/2)`` but not ``A^2``.
    All observables are real symmetric, so the transpose fixes them.
    """
    rng = _rng(seed)
    if mode is None:
        modes = PIPELINE_MODES if d == 3 else PIPELINE_MODES[:2]
        mode = modes[int(rng.integers(len(modes)))]
    if mode == "half_fixed" and d != 3:
        raise ValueError("half_fixed pipelines are three-dimensional")
    O = random_orthogonal(d, rng)
    if mode == "compatible":
        levels = rng.integers(0, 3, size=d).astype(float)
        levels[0], levels[-1] = 0.0, 2.0
        A = O @ np.diag(levels) @ O.T
    elif mode == "half_fixed":
        A = O @ np.diag([1.0, 0.0, 0.5]) @ O.T
    elif mode == "generic":
        G = rng.normal(size=(d, d))
        A = G @ G.T
    else:
        raise ValueError(f"unknown pipeline mode {mode!r}")
    A = A.astype(complex)

    def stage():
        if mode == "compatible":
            w, V = np.linalg.eigh(A)
            groups = np.unique(np.round(w, 8), return_inverse=True)[1]
            ops = []
            for _ in range(int(rng.integers(1, 3))):
                K = np.zeros((d, d), dtype=complex)
                for g in np.unique(groups):
                    Vg = V[:, groups == g]
                    K += Vg @ random_operator(Vg.shape[1], rng) @ dagger(Vg)
                ops.append(K)
            # the normalizing factor is block-diagonal too
            return KrausChannel(d, tuple(_normalize(ops, "schrodinger")), "schrodinger")
        if mode == "half_fixed":
            return KrausChannel(d, tuple(O @ K @ O.T for K in _M3_SCHRODINGER), "schrodinger")
        return random_kraus_channel(d, int(rng.integers(1, 3)), "schrodinger", rng)

    n_pipes = int(rng.integers(1, 4))
    pipelines = []
    for _ in range(n_pipes):
        shape = int(rng.integers(3))
        if shape == 0:
            pipelines.append((stage(), TRANSPOSE))
        elif shape == 1:
            pipelines.append((TRANSPOSE, stage()))
        else:
            pipelines.append((stage(),))
    weights = tuple(rng.dirichlet(np.ones(n_pipes)))
    return StochasticMapSpec(d, tuple(pipelines), weights), A


def random_chain(n: int, seed=None, kind: str | None = None,
                 chain_kind: str = "stochastic_matrix") -> tuple[ClassicalChain, np.ndarray]:
    """Random chain together with an observable that exercises the chain's structure.

    ``generic``: dense chain with a random observable. ``block``: transitions
    stay inside the level sets of the observable, so it is conserved.
    ``absorbing``: several absorbing states and an observable drawn from the
    harmonic functions of the chain (``O`` conserved, ``O^2`` usually not).
    """
    rng = _rng(seed)
    kind = kind or CHAIN_KINDS[int(rng.integers(len(CHAIN_KINDS)))]
    rate = chain_kind == "rate_matrix"
    if kind == "generic":
        M = rng.random((n, n)) * (rng.random((n, n)) < 0.7)
        O = rng.normal(size=n)
    elif kind == "block":
        sizes = _partition(n, rng)
        mask = _block_diag([np.ones((s, s)) for s in sizes]).real
        M = rng.random((n, n)) * mask
        O = np.concatenate([np.full(s, rng.normal()) for s in sizes])
        perm = rng.permutation(n)
        M, O = M[np.ix_(perm, perm)], O[perm]
    elif kind == "absorbing":
        k = int(rng.integers(1, max(2, n - 1))) if n > 2 else 1
        k = max(k, 2) if n >= 3 else k
        M = rng.random((n, n))
        M[:, :k] = 0.0
        O = None
    else:
        raise ValueError(f"unknown chain kind {kind!r}")
    if rate:
        M = M.copy()
        np.fill_diagonal(M, 0.0)
        if kind == "absorbing":
            M[:, :k] = 0.0
        M -= np.diag(M.sum(axis=0))
    else:
        if kind == "absorbing":
            M[:k, :k] = np.eye(k)
        M = M + np.diag((M.sum(axis=0) == 0).astype(float))
        M = M / M.sum(axis=0)
    chain = ClassicalChain(M, chain_kind)
    if O is None:
        O = random_observable(chain, rng)
    return chain, O


def random_observable(chain: ClassicalChain, seed=None) -> np.ndarray:
    """Random element of the harmonic functions (``U^T O = O``, or ``H^T O = 0``)."""
    rng = _rng(seed)
    M = chain.matrix
    G = M.T - np.eye(chain.n_states) if chain.kind == "stochastic_matrix" else M.T
    _, s, Vh = np.linalg.svd(G)
    null = Vh[int(np.sum(s > 1e-10 * max(s[0], 1e-300))):]
    if null.shape[0] == 0:
        return rng.normal(size=chain.n_states)
    return rng.normal(size=null.shape[0]) @ null
