"""Covariance-matrix calculus for zero-mean Gaussian states without q-p correlations.

Convention: ``gamma_kl = Re Tr[rho X_k X_l]`` scaled so that the ground state of
``V = 1`` has covariance ``1``. Symplectic eigenvalues are then ``>= 1`` and a
thermal mode with mean occupation ``n`` has ``nu = 2n + 1``. All logarithms are
natural.

A state is stored as its position block ``Q`` and momentum block ``P``; the
q-p cross block is zero for every state handled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .lattice import LatticeSpec, matrix_function

# Williamson eigenvalues this close below 1 are rounding noise.
CLIP_TOL = 1e-9
# Anything further below 1 is an unphysical state.
UNPHYSICAL_TOL = 1e-6
_SERIES_CUTOFF = 1e-6


class UnphysicalStateError(ValueError):
    """Raised when a covariance matrix violates the uncertainty relation."""


def _frozen(a: NDArray[np.float64]) -> NDArray[np.float64]:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Position block ``Q`` and momentum block ``P`` of a Gaussian state."""

    Q: NDArray[np.float64]
    P: NDArray[np.float64]

    def __post_init__(self) -> None:
        Q, P = np.atleast_2d(self.Q), np.atleast_2d(self.P)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape != P.shape:
            raise ValueError(f"Q and P must be square of equal order, got {Q.shape} and {P.shape}")
        object.__setattr__(self, "Q", _frozen(Q))
        object.__setattr__(self, "P", _frozen(P))

    @property
    def n_modes(self) -> int:
        return self.Q.shape[0]

    def full(self) -> NDArray[np.float64]:
        """The ``2n x 2n`` covariance matrix in (q..., p...) ordering."""
        return sla.block_diag(self.Q, self.P)


@dataclass(frozen=True)
class Partition:
    """Bipartition of the modes of a state into ``block`` and ``rest``."""

    block: tuple[int, ...]
    rest: tuple[int, ...]

    def __post_init__(self) -> None:
        block, rest = tuple(int(i) for i in self.block), tuple(int(i) for i in self.rest)
        if not block or not rest:
            raise ValueError("both sides of a partition must be nonempty")
        if set(block) & set(rest):
            raise ValueError("block and rest overlap")
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "rest", rest)

    @classmethod
    def from_block(cls, block: Sequence[int], n_modes: int) -> "Partition":
        chosen = set(int(i) for i in block)
        return cls(tuple(block), tuple(i for i in range(n_modes) if i not in chosen))

    def check(self, n_modes: int) -> None:
        if sorted(self.block + self.rest) != list(range(n_modes)):
            raise ValueError(f"partition does not cover the {n_modes} modes exactly once")


def coth_occupation(x: NDArray[np.float64] | float) -> NDArray[np.float64]:
    """``1 + 2 / (exp(x) - 1) = coth(x / 2)``, finite for large ``x``."""
    x = np.asarray(x, dtype=float)
    return 1.0 + 2.0 / np.expm1(x)


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if math.isnan(beta) or beta <= 0.0:
        raise ValueError(f"inverse temperature must be > 0 or inf, got {beta}")
    return beta


def thermal_covariance(potential: LatticeSpec | NDArray[np.float64], beta: float) -> CovarianceMatrix:
    """Thermal covariance ``Q = V^{-1/2} W``, ``P = V^{1/2} W``, ``W = coth(beta V^{1/2} / 2)``.

    Parameters
    ----------
    potential:
        Either a :class:`LatticeSpec`, handled through its analytic Fourier
        spectrum, or an explicit symmetric positive definite matrix, handled
        by dense eigendecomposition.
    beta:
        Inverse temperature; ``math.inf`` gives the ground state.
    """
    beta = _check_beta(beta)

    def w(lam):
        if math.isinf(beta):
            return np.ones_like(lam)
        return coth_occupation(beta * np.sqrt(lam))

    if isinstance(potential, LatticeSpec):
        Q = matrix_function(potential, lambda lam: w(lam) / np.sqrt(lam))
        P = matrix_function(potential, lambda lam: w(lam) * np.sqrt(lam))
        return CovarianceMatrix(Q, P)

    V = np.atleast_2d(np.asarray(potential, dtype=float))
    if V.shape[0] != V.shape[1] or not np.allclose(V, V.T, rtol=1e-12, atol=1e-12 * np.abs(V).max()):
        raise ValueError("potential must be a symmetric square matrix")
    lam, U = np.linalg.eigh(0.5 * (V + V.T))
    if lam[0] <= 0.0:
        raise ValueError(f"potential is not positive definite (min eigenvalue {lam[0]:.3e})")
    wl = w(lam)
    Q = (U * (wl / np.sqrt(lam))) @ U.T
    P = (U * (wl * np.sqrt(lam))) @ U.T
    return CovarianceMatrix(0.5 * (Q + Q.T), 0.5 * (P + P.T))


def reduce(cm: CovarianceMatrix, modes: Sequence[int]) -> CovarianceMatrix:
    """Partial trace onto ``modes`` (kept in the given order)."""
    idx = np.asarray(modes, dtype=int).ravel()
    if idx.size == 0:
        raise ValueError("cannot reduce to an empty set of modes")
    if len(set(idx.tolist())) != idx.size:
        raise ValueError("duplicate mode indices")
    if idx.min() < 0 or idx.max() >= cm.n_modes:
        raise IndexError(f"mode indices out of range for {cm.n_modes} modes")
    sel = np.ix_(idx, idx)
    return CovarianceMatrix(cm.Q[sel], cm.P[sel])


def _squared_williamson(Q: NDArray[np.float64], P: NDArray[np.float64]) -> NDArray[np.float64]:
    """Eigenvalues of ``Q P`` via the symmetric form ``L^T P L`` with ``Q = L L^T``."""
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise UnphysicalStateError("position block is not positive definite") from exc
    M = L.T @ P @ L
    return np.linalg.eigvalsh(0.5 * (M + M.T))


def _nu_from_squares(sq: NDArray[np.float64]) -> NDArray[np.float64]:
    if sq.min() < (1.0 - UNPHYSICAL_TOL) ** 2:
        raise UnphysicalStateError(
            f"symplectic eigenvalue {math.sqrt(max(sq.min(), 0.0)):.9f} violates the uncertainty relation"
        )
    nu = np.sqrt(sq)
    nu[(nu < 1.0) & (nu >= 1.0 - CLIP_TOL)] = 1.0
    return np.sort(nu)[::-1]


def symplectic_spectrum(cm: CovarianceMatrix) -> NDArray[np.float64]:
    """Williamson eigenvalues ``sqrt(eig(Q P))``, sorted descending."""
    return _nu_from_squares(_squared_williamson(cm.Q, cm.P))


def entropy_function(nu: NDArray[np.float64] | float) -> NDArray[np.float64]:
    """Entropy in nats of a thermal mode with symplectic eigenvalue ``nu``."""
    nu = np.asarray(nu, dtype=float)
    x = 0.5 * (nu - 1.0)
    out = np.empty_like(x)
    small = x < 0.5 * _SERIES_CUTOFF
    xs = np.maximum(x[small], 0.0)
    # (x+1)ln(x+1) - x ln x  ~  x - x ln x + x^2/2
    with np.errstate(divide="ignore", invalid="ignore"):
        out[small] = np.where(xs > 0.0, xs - xs * np.log(xs) + 0.5 * xs**2, 0.0)
    xl = x[~small]
    out[~small] = (xl + 1.0) * np.log1p(xl) - xl * np.log(xl)
    return out


def entropy(cm: CovarianceMatrix) -> float:
    """Von Neumann entropy (nats)."""
    return float(entropy_function(symplectic_spectrum(cm)).sum())


def mutual_information(cm: CovarianceMatrix, part: Partition) -> float:
    """``S(block) + S(rest) - S(total)``."""
    part.check(cm.n_modes)
    value = entropy(reduce(cm, part.block)) + entropy(reduce(cm, part.rest)) - entropy(cm)
    return max(value, 0.0)


def log_negativity(cm: CovarianceMatrix, part: Partition) -> float:
    """Logarithmic negativity across ``part`` via momentum sign flip of the block."""
    part.check(cm.n_modes)
    d = np.ones(cm.n_modes)
    d[list(part.block)] = -1.0
    P_t = cm.P * d[:, None] * d[None, :]
    sq = _squared_williamson(cm.Q, P_t)
    nu_t = np.sqrt(np.clip(sq, 0.0, None))
    with np.errstate(divide="ignore"):
        return float(np.sum(np.maximum(0.0, -np.log(nu_t))))


def _chol_logdet(M: NDArray[np.float64]) -> float:
    try:
        L = np.linalg.cholesky(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise UnphysicalStateError("fidelity formula met a matrix that is not positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _excess_factor(M: NDArray[np.float64]) -> NDArray[np.float64]:
    """Return ``R`` with ``R R^T = M - 1/4`` for symmetric ``M >= 1/4``.

    Eigenvalues of ``M - 1/4`` below the rounding level of the subtraction are
    set to zero, so pure modes stay exactly on the branch point.
    """
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    floor = M.shape[0] * np.finfo(float).eps * np.abs(w).max()
    excess = w - 0.25
    excess[excess <= floor] = 0.0
    return U * np.sqrt(excess)


def fidelity(cm1: CovarianceMatrix, cm2: CovarianceMatrix) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))`` of two zero-mean states.

    Uses the closed form of Banchi, Braunstein and Pirandola
    in the vacuum-is-1/2 normalisation ``sigma = gamma / 2``:

        F^4 = det[2 (sqrt(1 + (V_aux Omega)^{-2} / 4) + 1) V_aux] / det(sigma1 + sigma2)

    With no q-p correlations the auxiliary matrix splits as ``V_aux = B (+) A``,

        A = Sq^{-1} (1/4 + q2 p1),  B = Sp^{-1} (1/4 + p2 q1),

    with ``Sq = q1 + q2``, ``Sp = p1 + p2``, and ``(V_aux Omega)^2 = -BA (+) -AB``.
    The matrix square root then only enters through the eigenvalues ``mu_k`` of
    ``A B``:

        F^4 = prod_k [2 (1 + sqrt(1 - 1/(4 mu_k)))]^2 * det(A) det(B) / (det Sq det Sp)

    Eigenvalues close to 1/4 sit on the square-root branch point, so the excess
    ``lambda = mu - 1/4`` is taken from the exact factorisation

        A B - 1/4 = Sq^{-1} (q2 p2 - 1/4) Sp^{-1} (p1 q1 - 1/4)

    in which both purity excesses are brought to symmetric positive semidefinite
    form ``R R^T`` by Cholesky congruence.  The excess is then the spectrum of
    ``Z W`` with ``Z = R1^T G R2`` and ``W = R2^T H R1``, so a tiny excess comes
    from small factors rather than from a cancellation.  Determinants use
    symmetric Cholesky forms.
    """
    if cm1.n_modes != cm2.n_modes:
        raise ValueError(f"mode count mismatch: {cm1.n_modes} vs {cm2.n_modes}")
    for cm in (cm1, cm2):
        symplectic_spectrum(cm)
    eye = np.eye(cm1.n_modes)
    q1, p1 = 0.5 * cm1.Q, 0.5 * cm1.P
    q2, p2 = 0.5 * cm2.Q, 0.5 * cm2.P
    Sq, Sp = q1 + q2, p1 + p2

    # p1 q1 - 1/4 = Lp Y1 Lp^{-1} and q2 p2 - 1/4 = Lq2 Y2 Lq2^{-1}
    Lp = np.linalg.cholesky(p1)
    Lq = np.linalg.cholesky(q1)
    Lq2 = np.linalg.cholesky(q2)
    R1 = _excess_factor(Lp.T @ q1 @ Lp)
    R2 = _excess_factor(Lq2.T @ p2 @ Lq2)
    G = np.linalg.solve(Lp, np.linalg.solve(Sq, Lq2))
    H = np.linalg.solve(Lq2, np.linalg.solve(Sp, Lp))
    excess = np.linalg.eigvals((R1.T @ G @ R2) @ (R2.T @ H @ R1)).real
    excess = np.maximum(excess, 0.0)  # mu - 1/4 >= 0 for physical states

    # det(1/4 + q2 p1) = det(1/4 + Lp^T q2 Lp), likewise for the momenta
    logdet_Nq = _chol_logdet(0.25 * eye + Lp.T @ q2 @ Lp)
    logdet_Np = _chol_logdet(0.25 * eye + Lq.T @ p2 @ Lq)

    log_f4 = (
        2.0 * np.sum(np.log(2.0 * (1.0 + np.sqrt(excess / (0.25 + excess)))))
        + logdet_Nq
        + logdet_Np
        - 2.0 * (_chol_logdet(Sq) + _chol_logdet(Sp))
    )
    return float(min(1.0, math.exp(log_f4 / 4.0)))
