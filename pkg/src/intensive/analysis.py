"""Experiments built on the Gaussian primitives.

Intensive fidelity of a block, block-size sweeps of fidelity / mutual
information / negativity, slope and saturation fits, the two-point
correlation length, and (c, beta) phase diagrams of the fitted slopes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from .blocks import (
    BlockSelection,
    core_shell_split,
    effective_potential,
    padded_reference,
    reference_thermal,
)
from .gaussian import (
    CovarianceMatrix,
    Partition,
    coth_occupation,
    fidelity,
    log_negativity,
    mutual_information,
    reduce,
    thermal_covariance,
)
from .lattice import LatticeSpec, build_potential, circulant_kernel

OBSERVABLES = ("F_I", "I", "E_N", "fidelity-of-cores", "fidelity-of-shells")
DEFAULT_OBSERVABLES = ("F_I", "I", "E_N")
# F decreases with block size, correlations grow; slopes are reported as magnitudes.
SLOPE_SIGN = {"F_I": -1, "I": +1, "E_N": +1, "fidelity-of-cores": -1, "fidelity-of-shells": -1}
UNITS = {"F_I": "1", "I": "nats", "E_N": "nats", "fidelity-of-cores": "1", "fidelity-of-shells": "1"}

NEAR_CRITICAL_FLOOR = 1e-10
CORRELATION_FLOOR = 1e-12


def map_ordered(func: Callable[[Any], Any], tasks: Sequence[Any], workers: int = 1) -> list[Any]:
    """``[func(t) for t in tasks]``, optionally on a bounded process pool.

    Results come back in task order regardless of completion order.
    """
    workers = max(1, int(workers))
    if workers == 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(func, tasks))


def default_workers() -> int:
    return int(os.environ.get("INTENSIVE_WORKERS", "1"))


# --------------------------------------------------------------------------
# single block


@dataclass(frozen=True, eq=False)
class BlockStates:
    """True block state, its effective thermal reference, and the full state."""

    selection: BlockSelection
    full: CovarianceMatrix
    block: CovarianceMatrix
    reference: CovarianceMatrix

    @property
    def partition(self) -> Partition:
        return Partition(tuple(self.selection.block), tuple(self.selection.rest))


def block_states(
    spec: LatticeSpec,
    sel: BlockSelection,
    beta: float,
    V: NDArray[np.float64] | None = None,
    full: CovarianceMatrix | None = None,
) -> BlockStates:
    if V is None:
        V = build_potential(spec)
    if full is None:
        full = thermal_covariance(spec, beta)
    block = reduce(full, sel.block)
    reference = reference_thermal(effective_potential(V, sel), beta)
    return BlockStates(sel, full, block, reference)


def intensive_fidelity(spec: LatticeSpec, sel: BlockSelection, beta: float) -> float:
    """Fidelity between the reduced thermal block and its effective thermal state."""
    st = block_states(spec, sel, beta)
    return fidelity(st.block, st.reference)


def core_shell_fidelities(states: BlockStates, layers: int) -> tuple[float, float]:
    """Fidelities restricted to the core and to the shell of ``layers`` layers."""
    split = core_shell_split(states.selection, layers)
    core = fidelity(reduce(states.block, split.core_local), reduce(states.reference, split.core_local))
    shell = fidelity(reduce(states.block, split.shell_local), reduce(states.reference, split.shell_local))
    return core, shell


def block_observables(
    states: BlockStates, observables: Iterable[str], layers: int = 1
) -> dict[str, float]:
    out: dict[str, float] = {}
    want = list(observables)
    unknown = set(want) - set(OBSERVABLES)
    if unknown:
        raise ValueError(f"unknown observables {sorted(unknown)}")
    if "F_I" in want:
        out["F_I"] = fidelity(states.block, states.reference)
    if "I" in want:
        out["I"] = mutual_information(states.full, states.partition)
    if "E_N" in want:
        out["E_N"] = log_negativity(states.full, states.partition)
    if "fidelity-of-cores" in want or "fidelity-of-shells" in want:
        core, shell = core_shell_fidelities(states, layers)
        if "fidelity-of-cores" in want:
            out["fidelity-of-cores"] = core
        if "fidelity-of-shells" in want:
            out["fidelity-of-shells"] = shell
    return {k: out[k] for k in want}


def padded_fidelity(
    spec: LatticeSpec, sel: BlockSelection, beta: float, pad_layers: int, hamiltonian: str = "effective"
) -> float:
    """Fidelity of the true block state with the padded reference state."""
    V = build_potential(spec)
    block = reduce(thermal_covariance(spec, beta), sel.block)
    return fidelity(block, padded_reference(V, sel, pad_layers, beta, hamiltonian))


# --------------------------------------------------------------------------
# sweeps and fits


@dataclass(frozen=True)
class FitResult:
    """Linear fit (2D) or saturation estimate (1D) of a sweep series.

    ``alpha`` is the slope magnitude; ``residual`` is the RMS deviation from the
    fitted line, ``relative_residual`` that value over the mean ``|value|`` in
    the window. For saturation fits ``spread`` is the max-min over the window.
    """

    kind: str
    window: tuple[float, ...]
    alpha: float | None = None
    intercept: float | None = None
    residual: float | None = None
    relative_residual: float | None = None
    saturation: float | None = None
    spread: float | None = None

    def as_dict(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class SweepSeries:
    """Values of one observable against block size (``n_B`` in 1D, ``l_B`` in 2D)."""

    observable: str
    dim: int
    coupling: float
    beta: float
    abscissa: tuple[int, ...]
    values: tuple[float, ...]
    linear_sizes: tuple[int, ...]
    fit: FitResult | None = field(default=None)

    def __post_init__(self) -> None:
        if len(self.abscissa) != len(self.values):
            raise ValueError("abscissa and values differ in length")
        if any(b <= a for a, b in zip(self.abscissa, self.abscissa[1:])):
            raise ValueError("abscissa must be strictly increasing")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError(f"non-finite values in {self.observable} series")


def _fit_window(x: NDArray[np.float64]) -> NDArray[np.bool_]:
    """Upper half of the abscissa range, widened to at least three points."""
    mid = 0.5 * (x.min() + x.max())
    mask = x >= mid
    if mask.sum() < 3:
        mask = np.zeros_like(mask)
        mask[-3:] = True
    return mask


def slope_fit(series: SweepSeries) -> FitResult:
    x = np.asarray(series.abscissa, dtype=float)
    y = np.asarray(series.values, dtype=float)
    if x.size < 4:
        raise ValueError(f"slope_fit needs at least 4 points, got {x.size}")
    if series.dim == 1:
        tail = y[-3:]
        return FitResult(
            kind="saturation",
            window=tuple(x[-3:].tolist()),
            saturation=float(tail.mean()),
            spread=float(tail.max() - tail.min()),
        )
    mask = _fit_window(x)
    xw, yw = x[mask], y[mask]
    slope, intercept = np.polyfit(xw, yw, 1)
    resid = yw - (slope * xw + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    scale = float(np.mean(np.abs(yw)))
    if scale > 0.0:
        rel = rms / scale
    else:
        rel = 0.0 if rms == 0.0 else math.inf
    return FitResult(
        kind="slope",
        window=tuple(xw.tolist()),
        alpha=float(abs(slope)),
        intercept=float(intercept),
        residual=rms,
        relative_residual=rel,
    )


def sweep_lattice(dim: int, coupling: float, size: int, linear_size: int | None) -> LatticeSpec:
    """Lattice for one sweep point; 2D without ``linear_size`` uses ``l_S = 2 l_B``."""
    if linear_size is None:
        if dim == 1:
            raise ValueError("1D sweeps need a fixed linear_size")
        linear_size = 2 * size
    return LatticeSpec(dim, linear_size, coupling)


def _sweep_point(task: tuple) -> dict[str, float]:
    dim, coupling, size, linear_size, beta, observables, layers = task
    spec = sweep_lattice(dim, coupling, size, linear_size)
    sel = BlockSelection(spec, size)
    return block_observables(block_states(spec, sel, beta), observables, layers)


def block_size_sweep(
    dim: int,
    coupling: float,
    betas: Sequence[float],
    sizes: Sequence[int],
    observables: Sequence[str] = DEFAULT_OBSERVABLES,
    linear_size: int | None = None,
    layers: int = 1,
    workers: int = 1,
    fit: bool = True,
) -> list[SweepSeries]:
    """One series per (beta, observable), in that nesting order.

    In 1D ``linear_size`` is fixed; in 2D it defaults to the family rule
    ``l_S = 2 l_B`` (``n_S = 4 n_B``) applied per point.
    """
    sizes = [int(s) for s in sizes]
    if sorted(set(sizes)) != sizes:
        raise ValueError("sizes must be strictly increasing")
    observables = tuple(observables)
    # validate every lattice before starting work
    specs = [sweep_lattice(dim, coupling, s, linear_size) for s in sizes]
    for s, spec in zip(sizes, specs):
        BlockSelection(spec, s)
    tasks = [(dim, coupling, s, linear_size, float(b), observables, layers) for b in betas for s in sizes]
    results = map_ordered(_sweep_point, tasks, workers)
    series = []
    for ib, beta in enumerate(betas):
        chunk = results[ib * len(sizes) : (ib + 1) * len(sizes)]
        for obs in observables:
            s = SweepSeries(
                observable=obs,
                dim=dim,
                coupling=float(coupling),
                beta=float(beta),
                abscissa=tuple(sizes),
                values=tuple(float(r[obs]) for r in chunk),
                linear_sizes=tuple(spec.linear_size for spec in specs),
            )
            if fit and len(sizes) >= 4:
                s = replace(s, fit=slope_fit(s))
            series.append(s)
    return series


# --------------------------------------------------------------------------
# correlation length


def correlation_length(spec: LatticeSpec, beta: float) -> float | None:
    """Decay length of ``|<q_0 q_r>|`` along a lattice axis.

    Returns ``None`` when the lattice is uncorrelated (every ``|g(r)|`` is at
    most 1e-12).
    """
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")

    def position_block(lam):
        w = np.ones_like(lam) if math.isinf(beta) else coth_occupation(beta * np.sqrt(lam))
        return w / np.sqrt(lam)

    kernel = circulant_kernel(spec, position_block)
    g = kernel if spec.dim == 1 else kernel[0]
    r = np.arange(1, spec.linear_size // 4 + 1)
    gr = np.abs(g[r])
    usable = gr > CORRELATION_FLOOR
    if not usable.any():
        return None
    if usable.sum() < 3:
        raise ValueError(f"only {usable.sum()} usable correlation points; need 3")
    slope, _ = np.polyfit(r[usable], np.log(gr[usable]), 1)
    if slope >= 0.0:
        raise ValueError("two-point function does not decay")
    return float(-1.0 / slope)


# --------------------------------------------------------------------------
# phase diagram


@dataclass(frozen=True)
class PhaseCell:
    coupling: float
    beta: float
    alpha_F: float | None = None
    alpha_I: float | None = None
    alpha_E: float | None = None
    xi: float | None = None
    uncorrelated: bool = False
    fits: dict[str, dict[str, Any]] | None = None
    error: str | None = None
    flagged: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.flagged is None


@dataclass(frozen=True)
class PhaseDiagram:
    """Cells keyed by ``(i, j)`` = (coupling index, beta index)."""

    dim: int
    couplings: tuple[float, ...]
    betas: tuple[float, ...]
    sizes: tuple[int, ...]
    linear_size: int | None
    cells: dict[tuple[int, int], PhaseCell]

    def __post_init__(self) -> None:
        for name, grid in (("couplings", self.couplings), ("betas", self.betas)):
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} grid must be strictly increasing")

    def grid(self, name: str) -> NDArray[np.float64]:
        """``(len(couplings), len(betas))`` array of a cell attribute, NaN where missing."""
        out = np.full((len(self.couplings), len(self.betas)), np.nan)
        for (i, j), cell in self.cells.items():
            v = getattr(cell, name)
            if v is not None:
                out[i, j] = v
        return out

    def inverse_xi(self) -> NDArray[np.float64]:
        """``1/xi`` with uncorrelated cells mapped to 0."""
        out = np.full((len(self.couplings), len(self.betas)), np.nan)
        for (i, j), cell in self.cells.items():
            if cell.uncorrelated:
                out[i, j] = 0.0
            elif cell.xi is not None:
                out[i, j] = 1.0 / cell.xi
        return out


def _phase_cell(task: tuple) -> PhaseCell:
    dim, coupling, beta, sizes, linear_size = task
    bare = dict(coupling=coupling, beta=beta)
    if 1.0 - 2.0 * dim * coupling < NEAR_CRITICAL_FLOOR:
        return PhaseCell(**bare, flagged="near-critical: min eigenvalue below 1e-10")
    try:
        series = block_size_sweep(dim, coupling, [beta], sizes, DEFAULT_OBSERVABLES, linear_size)
        fits = {s.observable: s.fit for s in series}
        diagnostics = {s.observable: {**s.fit.as_dict(), "values": list(s.values)} for s in series}
        spec = LatticeSpec(dim, linear_size if linear_size is not None else 2 * max(sizes), coupling)
        xi = correlation_length(spec, beta)
        return PhaseCell(
            **bare,
            alpha_F=fits["F_I"].alpha,
            alpha_I=fits["I"].alpha,
            alpha_E=fits["E_N"].alpha,
            xi=xi,
            uncorrelated=xi is None,
            fits=diagnostics,
        )
    except (ValueError, np.linalg.LinAlgError) as exc:
        return PhaseCell(**bare, error=f"{type(exc).__name__}: {exc}")


def phase_diagram(
    couplings: Sequence[float],
    betas: Sequence[float],
    sizes: Sequence[int] = (4, 6, 8, 10),
    linear_size: int | None = 20,
    dim: int = 2,
    workers: int = 1,
) -> PhaseDiagram:
    """Fitted slopes of F_I, I, E_N and the correlation length over a (c, beta) grid.

    ``linear_size=None`` switches to the ``l_S = 2 l_B`` family for the sweeps
    (the correlation length then uses the largest lattice).
    """
    couplings = tuple(float(c) for c in couplings)
    betas = tuple(float(b) for b in betas)
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 4:
        raise ValueError("phase diagrams need at least 4 block sizes for the slope fit")
    if any(c < 0 or c >= 0.5**dim for c in couplings):
        raise ValueError(f"couplings must lie in [0, {0.5 ** dim})")
    if any(not b > 0 for b in betas):
        raise ValueError("betas must be positive")
    keys = [(i, j) for i in range(len(couplings)) for j in range(len(betas))]
    tasks = [(dim, couplings[i], betas[j], sizes, linear_size) for i, j in keys]
    cells = dict(zip(keys, map_ordered(_phase_cell, tasks, workers)))
    return PhaseDiagram(dim, couplings, betas, sizes, linear_size, cells)


def rank_correlation(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    """Spearman correlation over cells where both values are finite."""
    a, b = np.ravel(a), np.ravel(b)
    ok = np.isfinite(a) & np.isfinite(b)
    rho = stats.spearmanr(a[ok], b[ok]).statistic
    return float(rho)


def concordance(diagram: PhaseDiagram) -> dict[str, float]:
    """Rank correlations of ``alpha_F`` with ``alpha_E``, ``alpha_I`` and ``1/xi``."""
    aF = diagram.grid("alpha_F")
    return {
        "alpha_E": rank_correlation(aF, diagram.grid("alpha_E")),
        "alpha_I": rank_correlation(aF, diagram.grid("alpha_I")),
        "inverse_xi": rank_correlation(aF, diagram.inverse_xi()),
    }
