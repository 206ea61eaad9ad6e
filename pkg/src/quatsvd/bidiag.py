"""Partial Lanczos bidiagonalization of quaternion matrices.

Runs the two-sided recurrence entirely in compact storage: each step costs
one matvec, one adjoint matvec and two reorthogonalization sweeps.  The
produced bases are orthonormal in the quaternion inner product and satisfy

    M P_k = Q_k B_k,      M* Q_k = P_k B_k' + f e_k'

with B_k upper bidiagonal (alphas on the diagonal, betas above) and f the
residual vector orthogonal to P_k.  Exact breakdowns deflate: the
recurrence continues with a fresh random unit vector orthogonalized
against the current basis, and the zero coefficient is kept in B_k.

The same stepping routine also extends restarted factorizations whose
leading projected block is an arrow or triangular matrix; only the trailing
rows/columns it appends are bidiagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quatlin import (
    DEFAULT_TOL,
    CompactBasis,
    CompactVector,
    QuatMatrix,
    Tolerances,
    orthogonalize_against_basis,
    random_unit_vector,
    structured_matvec,
    vec_norm,
)


@dataclass
class KrylovState:
    """Working state of a (possibly restarted) partial factorization.

    ``B`` is the dense projected matrix (upper triangular throughout this
    package), ``f`` the continuation residual with ``beta_last = ||f||``.
    """

    P: CompactBasis
    Q: CompactBasis
    B: np.ndarray
    f: CompactVector
    beta_last: float
    rng: np.random.Generator
    matvecs: int = 0
    deflations: list = field(default_factory=list)
    tol: Tolerances = DEFAULT_TOL

    @property
    def steps(self) -> int:
        return len(self.P)

    def scale(self) -> float:
        """Magnitude reference for breakdown tests."""
        if self.B.size == 0:
            return 0.0
        return float(np.abs(self.B).max())


@dataclass
class BidiagFactorization:
    """Result of :func:`lanczos_bidiag`.

    ``betas`` holds the k-1 superdiagonal entries followed by the trailing
    beta_k = ||residual||.
    """

    P: CompactBasis
    Q: CompactBasis
    alphas: np.ndarray
    betas: np.ndarray
    residual: CompactVector
    steps: int
    deflations: list

    @property
    def B(self) -> np.ndarray:
        k = self.steps
        B = np.zeros((k, k))
        np.fill_diagonal(B, self.alphas)
        for j in range(k - 1):
            B[j, j + 1] = self.betas[j]
        return B


def _matvec(M: QuatMatrix, x: CompactVector, state: KrylovState,
            adjoint: bool = False) -> CompactVector:
    state.matvecs += 1
    return structured_matvec(M, x, adjoint=adjoint)


def _fresh_direction(n: int, basis: CompactBasis, rng: np.random.Generator) -> CompactVector:
    """Random unit vector orthogonal to ``basis`` (deflation restart)."""
    for _ in range(8):
        v = random_unit_vector(n, rng)
        v = orthogonalize_against_basis(v, basis)
        nv = vec_norm(v)
        if nv > 1e-6:
            return v.scaled(1.0 / nv)
    raise RuntimeError("could not draw a direction orthogonal to the basis")


def _grow(B: np.ndarray) -> np.ndarray:
    s = B.shape[0]
    out = np.zeros((s + 1, s + 1))
    out[:s, :s] = B
    return out


def lanczos_extend(M: QuatMatrix, state: KrylovState, to_step: int) -> KrylovState:
    """Append standard Lanczos steps until ``B`` has ``to_step`` columns.

    The leading block of ``B`` (arrow or triangular after a restart) is
    left untouched; new coefficients land on the diagonal and first
    superdiagonal.  Breakdowns deflate as in :func:`lanczos_bidiag`.
    """
    if to_step > min(M.rows, M.cols):
        raise ValueError("cannot extend past min(m, n)")
    tol = state.tol
    while state.steps < to_step:
        s = state.steps
        scale = state.scale()
        beta = vec_norm(state.f)
        if beta <= tol.breakdown * scale or beta == 0.0:
            beta = 0.0
            p_new = _fresh_direction(M.cols, state.P, state.rng) if s else \
                random_unit_vector(M.cols, state.rng)
            state.deflations.append((s, "beta"))
        else:
            p_new = state.f.scaled(1.0 / beta)

        w = _matvec(M, p_new, state)
        if s and beta > 0.0:
            w = w - state.Q.vector(s - 1).scaled(beta)
        if s:
            w = orthogonalize_against_basis(w, state.Q)
        alpha = vec_norm(w)
        scale = max(scale, alpha)
        if alpha <= tol.breakdown * scale or alpha == 0.0:
            alpha = 0.0
            q_new = _fresh_direction(M.rows, state.Q, state.rng) if s else \
                random_unit_vector(M.rows, state.rng)
            state.deflations.append((s, "alpha"))
        else:
            q_new = w.scaled(1.0 / alpha)

        state.B = _grow(state.B)
        if s:
            state.B[s - 1, s] = beta
        state.B[s, s] = alpha
        state.P.append(p_new)
        state.Q.append(q_new)

        f = _matvec(M, q_new, state, adjoint=True) - p_new.scaled(alpha)
        state.f = orthogonalize_against_basis(f, state.P)
        state.beta_last = vec_norm(state.f)
    return state


def start_state(M: QuatMatrix, p1: CompactVector, rng: np.random.Generator,
                tol: Tolerances = DEFAULT_TOL) -> KrylovState:
    """Empty factorization seeded with the start vector ``p1``."""
    if p1.n != M.cols:
        raise ValueError(f"start vector length {p1.n} != cols {M.cols}")
    if abs(vec_norm(p1) - 1.0) > 1e-14:
        raise ValueError("start vector must have unit norm")
    return KrylovState(
        P=CompactBasis(M.cols),
        Q=CompactBasis(M.rows),
        B=np.zeros((0, 0)),
        f=p1.copy(),
        beta_last=1.0,
        rng=rng,
        tol=tol,
    )


def lanczos_bidiag(M: QuatMatrix, p1: CompactVector, k: int,
                   rng: np.random.Generator,
                   tol: Tolerances = DEFAULT_TOL) -> BidiagFactorization:
    """Run k steps of structure-preserving Lanczos bidiagonalization."""
    if not 1 <= k <= min(M.rows, M.cols):
        raise ValueError(f"k={k} out of range 1..{min(M.rows, M.cols)}")
    state = start_state(M, p1, rng, tol)
    lanczos_extend(M, state, k)
    alphas = np.diag(state.B).copy()
    betas = np.empty(k)
    betas[:k - 1] = np.diag(state.B, 1) if k > 1 else []
    betas[k - 1] = state.beta_last
    return BidiagFactorization(
        P=state.P,
        Q=state.Q,
        alphas=alphas,
        betas=betas,
        residual=state.f,
        steps=k,
        deflations=list(state.deflations),
    )


# ---------------------------------------------------------------------------
# verification helpers (used by tests and the CLI `verify` command)
# ---------------------------------------------------------------------------

def basis_orthogonality_error(basis: CompactBasis) -> float:
    """max_ij |quat_dot(b_i, b_j) - delta_ij| over all quaternion components."""
    worst = 0.0
    for i in range(len(basis)):
        dots = basis.dot_all(basis.vector(i))
        dots[i, 0] -= 1.0
        worst = max(worst, float(np.abs(dots).max()))
    return worst


def factorization_errors(M: QuatMatrix, P: CompactBasis, Q: CompactBasis,
                         B: np.ndarray, f: CompactVector) -> dict:
    """Frobenius residuals of the two factorization identities.

    Returns ``direct`` = ||M P - Q B||_F, ``adjoint`` =
    ||M* Q - P B' - f e_last'||_F and ``f_orth`` = max_i |quat_dot(p_i, f)|,
    all in compact arithmetic.
    """
    s = len(P)
    direct = 0.0
    adjoint = 0.0
    for i in range(s):
        e1 = structured_matvec(M, P.vector(i)) - Q.combine_real(B[:, i])
        direct += vec_norm(e1) ** 2
        e2 = structured_matvec(M, Q.vector(i), adjoint=True) - P.combine_real(B[i, :])
        if i == s - 1:
            e2 = e2 - f
        adjoint += vec_norm(e2) ** 2
    f_orth = float(np.abs(P.dot_all(f)).max()) if s else 0.0
    return {
        "direct": float(np.sqrt(direct)),
        "adjoint": float(np.sqrt(adjoint)),
        "f_orth": f_orth,
        "P_orth": basis_orthogonality_error(P),
        "Q_orth": basis_orthogonality_error(Q),
    }
