"""Cross-check of the Gaussian calculus against the truncated Fock oracle."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from . import gaussian as g
from . import oracle as o


@dataclass(frozen=True)
class Check:
    quantity: str
    beta: float
    coupling: float
    gaussian: float
    oracle: float
    tolerance: float
    top_weight: float

    @property
    def error(self) -> float:
        return abs(self.gaussian - self.oracle)

    @property
    def status(self) -> str:
        if self.error <= self.tolerance:
            return "pass"
        # a failed comparison at an unconverged cutoff proves nothing
        return "inconclusive" if self.top_weight > o.TOP_WEIGHT_TOL else "fail"

    def as_dict(self) -> dict:
        return {**asdict(self), "error": self.error, "status": self.status}


def two_mode_potential(c: float) -> np.ndarray:
    return np.array([[1.0, -c], [-c, 1.0]])


def check_pair(beta: float, c: float, cutoff: int = 40, tol: float = 1e-4) -> list[Check]:
    """All certified quantities for the two-mode chain ``V = [[1, -c], [-c, 1]]``."""
    V = two_mode_potential(c)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", o.CutoffWarning)
        rho = o.fock_thermal(V, beta, cutoff)
        # single-mode reference with the Schur-complement potential 1 - c^2
        ref = o.fock_thermal([[1.0 - c * c]], beta, cutoff)
        other_V = two_mode_potential(0.5 * c)
        other = o.fock_thermal(other_V, 1.3 * beta, cutoff)
    top = max(rho.top_level_weight(), ref.top_level_weight(), other.top_level_weight())

    gam = g.thermal_covariance(V, beta)
    gam_ref = g.thermal_covariance([[1.0 - c * c]], beta)
    gam_other = g.thermal_covariance(other_V, 1.3 * beta)
    part = g.Partition((0,), (1,))
    Q, P = o.second_moments(rho)
    rho_0 = o.fock_reduce(rho, 0)

    def check(name, gv, ov):
        return Check(name, float(beta), float(c), float(gv), float(ov), tol, top)

    return [
        check("Q max entry error", 0.0, float(np.abs(Q - gam.Q).max())),
        check("P max entry error", 0.0, float(np.abs(P - gam.P).max())),
        check("entropy (2 modes)", g.entropy(gam), o.fock_entropy(rho)),
        check("entropy (mode 0)", g.entropy(g.reduce(gam, [0])), o.fock_entropy(rho_0)),
        check(
            "mutual information",
            g.mutual_information(gam, part),
            o.fock_entropy(rho_0) + o.fock_entropy(o.fock_reduce(rho, 1)) - o.fock_entropy(rho),
        ),
        check("log negativity", g.log_negativity(gam, part), o.fock_negativity(rho, 0)),
        check("fidelity (block vs effective)", g.fidelity(g.reduce(gam, [0]), gam_ref), o.fock_fidelity(rho_0, ref)),
        check("fidelity (2 modes)", g.fidelity(gam, gam_other), o.fock_fidelity(rho, other)),
    ]


def certification_suite(
    betas: Sequence[float] = (0.5, 1.0, 2.0, 5.0),
    couplings: Iterable[float] | None = None,
    cutoff: int = 40,
    tol: float = 1e-4,
    seed: int = 0,
    n_random: int = 2,
) -> list[Check]:
    """Run :func:`check_pair` over ``betas`` x couplings.

    Without explicit couplings, ``c = 0`` plus ``n_random`` draws from
    ``[0, 0.4]`` are used.
    """
    if couplings is None:
        rng = np.random.default_rng(seed)
        couplings = [0.0, *rng.uniform(0.0, 0.4, n_random).tolist()]
    checks = []
    for beta in betas:
        for c in couplings:
            checks.extend(check_pair(beta, c, cutoff, tol))
    return checks


def format_table(checks: Sequence[Check]) -> str:
    lines = [f"{'quantity':32s} {'beta':>6s} {'c':>7s} {'gaussian':>14s} {'oracle':>14s} {'error':>9s}  status"]
    for ch in checks:
        lines.append(
            f"{ch.quantity:32s} {ch.beta:6.2f} {ch.coupling:7.4f} {ch.gaussian:14.9f} "
            f"{ch.oracle:14.9f} {ch.error:9.2e}  {ch.status}"
        )
    return "\n".join(lines)
