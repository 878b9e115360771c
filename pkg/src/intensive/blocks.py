"""Block geometry, core/shell layering and reference thermal states of a block.

The reference state of a block ``B`` is the thermal state of the effective
potential ``V' = V_B - V_BR V_R^{-1} V_BR^T`` (Schur complement of the rest).
It is temperature independent and reproduces the high-temperature covariance
of the true block state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .gaussian import CovarianceMatrix, reduce, thermal_covariance
from .lattice import LatticeSpec


@dataclass(frozen=True)
class BlockSelection:
    """A contiguous segment (1D) or ``l_B x l_B`` square (2D) of a lattice.

    ``block_size`` is ``n_B`` in 1D and ``l_B`` in 2D. ``origin`` places the
    block's lower corner; the block never wraps the periodic boundary.
    """

    spec: LatticeSpec
    block_size: int
    origin: tuple[int, ...] | int = 0

    def __post_init__(self) -> None:
        size = int(self.block_size)
        l = self.spec.linear_size
        origin = self.origin
        if isinstance(origin, (int, np.integer)):
            origin = (int(origin),) * self.spec.dim
        origin = tuple(int(o) for o in origin)
        if len(origin) != self.spec.dim:
            raise ValueError(f"origin must have {self.spec.dim} coordinates")
        if size < 1:
            raise ValueError(f"block_size must be positive, got {size}")
        if size**self.spec.dim >= self.spec.n_modes:
            raise ValueError(f"block of size {size} leaves no rest in a lattice of {self.spec.n_modes} modes")
        if any(o < 0 or o + size > l for o in origin):
            raise ValueError(f"block at {origin} of size {size} does not fit without wrapping (l_S={l})")
        object.__setattr__(self, "block_size", size)
        object.__setattr__(self, "origin", origin)

    @property
    def n_block(self) -> int:
        return self.block_size**self.spec.dim

    @cached_property
    def block(self) -> NDArray[np.intp]:
        """Mode indices of the block, row-major within the block."""
        r = np.arange(self.block_size)
        if self.spec.dim == 1:
            return self.origin[0] + r
        ox, oy = self.origin
        l = self.spec.linear_size
        return ((ox + r)[None, :] + l * (oy + r)[:, None]).ravel()

    @cached_property
    def rest(self) -> NDArray[np.intp]:
        mask = np.ones(self.spec.n_modes, dtype=bool)
        mask[self.block] = False
        return np.flatnonzero(mask)

    def boundary_distance(self) -> NDArray[np.intp]:
        """Distance of each block site (block order) to the nearest block edge.

        1D: distance to the nearer segment end; 2D: Chebyshev distance to the
        square's boundary, so that ``0`` marks the outermost frame.
        """
        r = np.arange(self.block_size)
        d = np.minimum(r, self.block_size - 1 - r)
        if self.spec.dim == 1:
            return d
        return np.minimum(d[None, :], d[:, None]).ravel()

    def grown(self, layers: int) -> "BlockSelection":
        """The block enlarged by ``layers`` sites on every side."""
        if layers < 0:
            raise ValueError("layers must be nonnegative")
        origin = tuple(o - layers for o in self.origin)
        return BlockSelection(self.spec, self.block_size + 2 * layers, origin)


@dataclass(frozen=True)
class CoreShellSplit:
    """Core and shell of a block after peeling ``layers`` boundary layers.

    ``core``/``shell`` are lattice mode indices; ``core_local``/``shell_local``
    are positions within the block ordering, which is what the reduced block
    state and the reference state are indexed by.
    """

    layers: int
    core: NDArray[np.intp]
    shell: NDArray[np.intp]
    core_local: NDArray[np.intp]
    shell_local: NDArray[np.intp]


def core_shell_split(sel: BlockSelection, layers: int) -> CoreShellSplit:
    if layers < 1:
        raise ValueError(f"layers must be >= 1, got {layers}")
    if sel.block_size - 2 * layers < 1:
        raise ValueError(f"{layers} layers leave no core in a block of size {sel.block_size}")
    dist = sel.boundary_distance()
    core_local = np.flatnonzero(dist >= layers)
    shell_local = np.flatnonzero(dist < layers)
    return CoreShellSplit(
        layers=layers,
        core=sel.block[core_local],
        shell=sel.block[shell_local],
        core_local=core_local,
        shell_local=shell_local,
    )


def effective_potential(V: NDArray[np.float64], sel: BlockSelection | NDArray[np.intp]) -> NDArray[np.float64]:
    """Schur complement ``V_B - V_BR V_R^{-1} V_BR^T`` of the rest in ``V``.

    ``sel`` may also be a plain array of block indices into ``V``.
    """
    V = np.asarray(V, dtype=float)
    if isinstance(sel, BlockSelection):
        block, rest = sel.block, sel.rest
    else:
        block = np.asarray(sel, dtype=int)
        mask = np.ones(V.shape[0], dtype=bool)
        mask[block] = False
        rest = np.flatnonzero(mask)
    if rest.size == 0:
        raise ValueError("the rest of the system is empty")
    V_B = V[np.ix_(block, block)]
    V_BR = V[np.ix_(block, rest)]
    V_R = V[np.ix_(rest, rest)]
    try:
        factor = sla.cho_factor(V_R, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("rest potential V_R is not positive definite") from exc
    Vp = V_B - V_BR @ sla.cho_solve(factor, V_BR.T)
    return 0.5 * (Vp + Vp.T)


def bare_potential(V: NDArray[np.float64], sel: BlockSelection) -> NDArray[np.float64]:
    """The sub-block ``V_B``, kept for comparison with the effective potential."""
    V = np.asarray(V, dtype=float)
    return V[np.ix_(sel.block, sel.block)].copy()


def reference_thermal(Vprime: NDArray[np.float64], beta: float) -> CovarianceMatrix:
    """Thermal state of the standalone block potential ``Vprime``."""
    return thermal_covariance(np.asarray(Vprime, dtype=float), beta)


def padded_reference(
    V: NDArray[np.float64],
    sel: BlockSelection,
    pad_layers: int,
    beta: float,
    hamiltonian: str = "effective",
) -> CovarianceMatrix:
    """Reference state of ``B + eps`` traced down to ``B``.

    ``hamiltonian="effective"`` uses the Schur-complement potential of the
    padded region; ``"bare"`` uses the plain sub-block ``V_{B+eps}``.
    """
    if pad_layers < 0:
        raise ValueError("pad_layers must be nonnegative")
    try:
        padded = sel.grown(pad_layers)
    except ValueError as exc:
        raise ValueError(f"padded block (eps={pad_layers}) does not fit: {exc}") from exc
    if hamiltonian == "effective":
        Vp = effective_potential(V, padded)
    elif hamiltonian == "bare":
        Vp = bare_potential(V, padded)
    else:
        raise ValueError(f"unknown hamiltonian {hamiltonian!r}")
    state = reference_thermal(Vp, beta)
    # positions of the inner block within the padded block ordering
    inner = np.searchsorted(padded.block, sel.block)
    return reduce(state, inner)
