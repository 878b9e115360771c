"""Potential matrices of periodic harmonic lattices.

The 1D chain has potential ``circ{1, -c, 0, ..., 0, -c}``; the 2D square
lattice is block-circulant with ``V_1`` on the diagonal blocks and ``-c I``
on the neighbouring blocks. Modes of the 2D lattice are indexed row-major,
``k = x + l_S * y``.

Both matrices are diagonalised by discrete Fourier modes, so their spectra
and any matrix function ``f(V)`` are synthesised analytically instead of
going through a dense eigensolver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

# Eigenvalues this small make V^{-1/2} meaningless in double precision.
CRITICAL_FLOOR = 1e-13


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic lattice of ``l_S**dim`` unit-frequency oscillators."""

    dim: int
    linear_size: int
    coupling: float

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if int(self.linear_size) != self.linear_size or self.linear_size < 3:
            raise ValueError(f"linear_size must be an integer >= 3, got {self.linear_size}")
        c = float(self.coupling)
        if not np.isfinite(c) or c < 0.0 or c >= self.critical_coupling:
            raise ValueError(
                f"coupling must lie in [0, {self.critical_coupling}) for dim={self.dim}, got {c}"
            )
        object.__setattr__(self, "linear_size", int(self.linear_size))
        object.__setattr__(self, "coupling", c)
        if self.min_eigenvalue < CRITICAL_FLOOR:
            raise ValueError(
                f"coupling {c} is numerically critical (min eigenvalue {self.min_eigenvalue:.3e})"
            )

    @property
    def critical_coupling(self) -> float:
        return 0.5**self.dim

    @property
    def n_modes(self) -> int:
        return self.linear_size**self.dim

    @property
    def min_eigenvalue(self) -> float:
        return 1.0 - 2.0 * self.dim * self.coupling

    def coords(self, k: int) -> tuple[int, ...]:
        """Lattice coordinates of mode ``k``."""
        if self.dim == 1:
            return (k,)
        return (k % self.linear_size, k // self.linear_size)

    def index(self, x: int, y: int = 0) -> int:
        """Mode index of the site ``(x, y)`` (periodically wrapped)."""
        l = self.linear_size
        if self.dim == 1:
            return x % l
        return (x % l) + l * (y % l)


def build_potential(spec: LatticeSpec) -> NDArray[np.float64]:
    """Dense potential matrix ``V`` of order ``n_S``."""
    l, c = spec.linear_size, spec.coupling
    ring = np.eye(l) - c * (np.roll(np.eye(l), 1, axis=1) + np.roll(np.eye(l), -1, axis=1))
    if spec.dim == 1:
        return ring
    shift = np.roll(np.eye(l), 1, axis=1) + np.roll(np.eye(l), -1, axis=1)
    # V_2 = I (x) V_1 - c * shift (x) I in the row-major layout k = x + l*y.
    return np.kron(np.eye(l), ring) - c * np.kron(shift, np.eye(l))


def _fourier_eigenvalues(spec: LatticeSpec) -> NDArray[np.float64]:
    """Eigenvalues on the Fourier grid, unsorted (shape ``(l,)`` or ``(l, l)``)."""
    l, c = spec.linear_size, spec.coupling
    cosines = np.cos(2.0 * np.pi * np.arange(l) / l)
    if spec.dim == 1:
        return 1.0 - 2.0 * c * cosines
    # axis 0 is the y wavenumber, axis 1 the x wavenumber
    return 1.0 - 2.0 * c * cosines[:, None] - 2.0 * c * cosines[None, :]


def potential_spectrum(spec: LatticeSpec) -> NDArray[np.float64]:
    """Sorted eigenvalues ``lambda_k`` of the potential matrix."""
    return np.sort(_fourier_eigenvalues(spec).ravel())


def circulant_kernel(spec: LatticeSpec, f: Callable[[NDArray[np.float64]], NDArray[np.float64]]) -> NDArray[np.float64]:
    """First row of ``f(V)`` reshaped onto the lattice.

    ``kernel[dy, dx]`` (2D) or ``kernel[dx]`` (1D) is the matrix element between
    sites separated by the displacement ``(dx, dy)``.
    """
    lam = _fourier_eigenvalues(spec)
    values = np.asarray(f(lam), dtype=float)
    if values.shape != lam.shape:
        values = np.broadcast_to(values, lam.shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("matrix function is not finite on the spectrum of V")
    # spectrum is even in k, so the inverse transform is real
    if spec.dim == 1:
        return np.fft.ifft(values).real
    return np.fft.ifft2(values).real


def matrix_function(spec: LatticeSpec, f: Callable[[NDArray[np.float64]], NDArray[np.float64]]) -> NDArray[np.float64]:
    """Dense ``f(V)`` built from the analytic Fourier spectrum.

    ``f`` must be vectorised over numpy arrays.
    """
    kernel = circulant_kernel(spec, f)
    l = spec.linear_size
    if spec.dim == 1:
        dx = (np.arange(l)[None, :] - np.arange(l)[:, None]) % l
        out = kernel[dx]
    else:
        k = np.arange(spec.n_modes)
        x, y = k % l, k // l
        dx = (x[None, :] - x[:, None]) % l
        dy = (y[None, :] - y[:, None]) % l
        out = kernel[dy, dx]
    # the kernel is even, but symmetrise against rounding in the transform
    return 0.5 * (out + out.T)
