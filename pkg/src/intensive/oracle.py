"""Truncated Fock-space reference for one- and two-mode oscillator systems.

Everything here is plain dense linear algebra on density matrices, with no
Gaussian formulas involved, so it certifies the covariance-matrix calculus
independently.

Quadratures are ``q = (a + a^dag)/sqrt(2)``, ``p = i(a^dag - a)/sqrt(2)``, so
``[q, p] = i``. The Hamiltonian is ``scale * (sum V_ij q_i q_j + sum p_i^2)``.
With the default ``scale = 1/2`` the normal-mode frequencies are
``sqrt(lambda_k)`` and the thermal second moments ``2<q q>`` are exactly
``V^{-1/2} coth(beta V^{1/2} / 2)``; ``scale = 1`` doubles every frequency,
which is the same as evaluating the default at ``2 beta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

TOP_WEIGHT_TOL = 1e-8


class CutoffWarning(UserWarning):
    """The Fock cutoff leaves non-negligible weight in the highest level."""


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    """Density matrix of ``n_modes`` oscillators, each truncated to ``cutoff`` levels."""

    rho: NDArray
    n_modes: int
    cutoff: int

    def __post_init__(self) -> None:
        dim = self.cutoff**self.n_modes
        if self.rho.shape != (dim, dim):
            raise ValueError(f"density matrix must be {dim}x{dim}, got {self.rho.shape}")

    def top_level_weight(self) -> float:
        """Largest population of the highest Fock level over all modes."""
        diag = np.real(np.diag(self.rho)).reshape((self.cutoff,) * self.n_modes)
        weights = []
        for axis in range(self.n_modes):
            marginal = diag.sum(axis=tuple(i for i in range(self.n_modes) if i != axis))
            weights.append(marginal[-1])
        return float(max(weights))


def _ladder(cutoff: int) -> NDArray[np.float64]:
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1)


def _single_mode_ops(cutoff: int) -> dict[str, NDArray[np.float64]]:
    """``q``, ``-i p`` and the exact projections of ``q^2`` and ``p^2``.

    Squares are built one level higher and then truncated; squaring the
    truncated matrices would misplace the top level's energy.
    """
    a = _ladder(cutoff + 1)
    q = (a + a.T) / math.sqrt(2.0)
    # p = i (a^dag - a)/sqrt(2); store p / i, which is real
    pt = (a.T - a) / math.sqrt(2.0)
    n = slice(0, cutoff)
    return {"q": q[n, n], "p": pt[n, n], "qq": (q @ q)[n, n], "pp": -(pt @ pt)[n, n]}


def quadrature_products(n_modes: int, cutoff: int) -> tuple[NDArray, NDArray]:
    """Arrays ``QQ[i, j] = q_i q_j`` and ``PP[i, j] = p_i p_j`` on the truncated space."""
    if n_modes not in (1, 2):
        raise ValueError("the Fock oracle handles one or two modes")
    ops = _single_mode_ops(cutoff)
    dim = cutoff**n_modes
    QQ = np.empty((n_modes, n_modes, dim, dim))
    PP = np.empty((n_modes, n_modes, dim, dim))
    if n_modes == 1:
        QQ[0, 0], PP[0, 0] = ops["qq"], ops["pp"]
        return QQ, PP
    eye = np.eye(cutoff)
    QQ[0, 0], QQ[1, 1] = np.kron(ops["qq"], eye), np.kron(eye, ops["qq"])
    PP[0, 0], PP[1, 1] = np.kron(ops["pp"], eye), np.kron(eye, ops["pp"])
    QQ[0, 1] = QQ[1, 0] = np.kron(ops["q"], ops["q"])
    # (i pt) (x) (i pt) = -(pt (x) pt)
    PP[0, 1] = PP[1, 0] = -np.kron(ops["p"], ops["p"])
    return QQ, PP


def hamiltonian(V: NDArray[np.float64], cutoff: int, scale: float = 0.5) -> NDArray[np.float64]:
    V = np.atleast_2d(np.asarray(V, dtype=float))
    n = V.shape[0]
    QQ, PP = quadrature_products(n, cutoff)
    H = np.zeros((cutoff**n, cutoff**n))
    for i in range(n):
        H += PP[i, i]
        for j in range(n):
            H += V[i, j] * QQ[i, j]
    H = scale * H
    return 0.5 * (H + H.T)


def fock_thermal(V: NDArray[np.float64], beta: float, cutoff: int, scale: float = 0.5) -> FockDensityMatrix:
    """Normalised ``exp(-beta H)``; ``beta = inf`` gives the ground-state projector."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] > 2:
        raise ValueError("the Fock oracle handles one or two modes")
    if np.linalg.eigvalsh(V)[0] <= 0.0:
        raise ValueError("potential must be positive definite")
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if cutoff < 10:
        raise ValueError(f"cutoff must be at least 10, got {cutoff}")
    energies, U = np.linalg.eigh(hamiltonian(V, cutoff, scale))
    if math.isinf(beta):
        w = np.zeros_like(energies)
        w[0] = 1.0
    else:
        w = np.exp(-beta * (energies - energies[0]))
        w /= w.sum()
    rho = (U * w) @ U.T
    state = FockDensityMatrix(0.5 * (rho + rho.T), V.shape[0], cutoff)
    top = state.top_level_weight()
    if top > TOP_WEIGHT_TOL:
        warnings.warn(f"cutoff {cutoff} leaves weight {top:.2e} in the top level", CutoffWarning, stacklevel=2)
    return state


def second_moments(state: FockDensityMatrix) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """``(Q, P)`` with ``Q_ij = 2 Re Tr[rho q_i q_j]`` and likewise for momenta."""
    QQ, PP = quadrature_products(state.n_modes, state.cutoff)
    # Tr[rho M] = sum(rho * M^T)
    Q = 2.0 * np.real(np.einsum("kl,ijlk->ij", state.rho, QQ))
    P = 2.0 * np.real(np.einsum("kl,ijlk->ij", state.rho, PP))
    return Q, P


def _check_pair(s1: FockDensityMatrix, s2: FockDensityMatrix) -> None:
    if (s1.n_modes, s1.cutoff) != (s2.n_modes, s2.cutoff):
        raise ValueError("states must share mode count and cutoff")


def _psd_sqrt(rho: NDArray) -> NDArray:
    w, U = np.linalg.eigh(rho)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T


def fock_fidelity(s1: FockDensityMatrix, s2: FockDensityMatrix) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))``."""
    _check_pair(s1, s2)
    r = _psd_sqrt(s1.rho)
    M = r @ s2.rho @ r
    ev = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    return float(np.sum(np.sqrt(np.clip(ev, 0.0, None))))


def fock_entropy(state: FockDensityMatrix) -> float:
    """Von Neumann entropy in nats."""
    ev = np.linalg.eigvalsh(state.rho)
    ev = ev[ev > 1e-300]
    return float(-np.sum(ev * np.log(ev)))


def fock_reduce(state: FockDensityMatrix, mode: int) -> FockDensityMatrix:
    """Keep ``mode`` of a two-mode state, tracing out the other."""
    if state.n_modes != 2 or mode not in (0, 1):
        raise ValueError("fock_reduce keeps one mode of a two-mode state")
    N = state.cutoff
    r = state.rho.reshape(N, N, N, N)
    reduced = np.einsum("ijkj->ik", r) if mode == 0 else np.einsum("jijk->ik", r)
    return FockDensityMatrix(reduced, 1, N)


def partial_transpose(state: FockDensityMatrix, mode: int) -> NDArray:
    if state.n_modes != 2 or mode not in (0, 1):
        raise ValueError("partial transpose needs a two-mode state and mode 0 or 1")
    N = state.cutoff
    r = state.rho.reshape(N, N, N, N)
    # indices (i, j, k, l) = <i j| rho |k l>
    r = r.transpose(2, 1, 0, 3) if mode == 0 else r.transpose(0, 3, 2, 1)
    return r.reshape(N * N, N * N)


def fock_negativity(state: FockDensityMatrix, mode: int = 0) -> float:
    """Logarithmic negativity ``ln ||rho^{T_mode}||_1`` in nats."""
    pt = partial_transpose(state, mode)
    ev = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    return float(max(0.0, math.log(np.sum(np.abs(ev)))))
