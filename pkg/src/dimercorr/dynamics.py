"""Two-emitter master equation: generator, steady state, correlators, tomography.

Basis ordering is |gg>, |ge>, |eg>, |ee> with the second slot belonging to
emitter 2 (index = 2*s1 + s2).  Density matrices are vectorised column by
column, so vec(A rho B) = (B^T kron A) vec(rho).
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .couplings import CouplingSet
from .model import DriveConfig

log = logging.getLogger(__name__)

BASIS = ("gg", "ge", "eg", "ee")
_SM = np.array([[0.0, 1.0], [0.0, 0.0]])     # lowering |g><e|, with |g> = 0, |e> = 1
_I2 = np.eye(2)
SIGMA = (np.kron(_SM, _I2), np.kron(_I2, _SM))
_I4 = np.eye(4)


class DegenerateSteadyState(RuntimeError):
    """The generator kernel is more than one-dimensional."""


class IntegrationDrift(RuntimeError):
    pass


def _vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def _unvec(v):
    return np.asarray(v).reshape(4, 4, order="F")


def hamiltonian(couplings: CouplingSet, drive: DriveConfig) -> np.ndarray:
    """Rotating-frame Hamiltonian (hbar = 1, frequencies in gamma0)."""
    drv = drive.resolved(couplings.g12)
    s1, s2 = SIGMA
    h = -drv.detuning * (s1.T @ s1 + s2.T @ s2)
    h = h + couplings.g12 * (s1.T @ s2 + s2.T @ s1)
    for om, s in ((drv.omega1, s1), (drv.omega2, s2)):
        h = h + om * s + np.conj(om) * s.T
    return h.astype(complex)


def build_generator(couplings: CouplingSet, drive: DriveConfig) -> np.ndarray:
    """16x16 Liouvillian acting on column-stacked rho."""
    if not couplings.is_psd():
        warnings.warn("dissipation matrix is not positive semidefinite", RuntimeWarning)
    h = hamiltonian(couplings, drive)
    gam = couplings.dissipation_matrix
    L = -1j * (np.kron(_I4, h) - np.kron(h.T, _I4))
    for i in range(2):
        for j in range(2):
            g = gam[i, j]
            if g == 0:
                continue
            si, sj = SIGMA[i], SIGMA[j]
            sdag_i = si.T
            prod = sdag_i @ sj
            # 2 s_j rho s_i^dag - {s_i^dag s_j, rho}
            D = (2 * np.kron(sdag_i.T, sj) - np.kron(_I4, prod) - np.kron(prod.T, _I4))
            L = L + 0.5 * g * D
    return L


def steady_state(L: np.ndarray, kernel_tol: float = 1e-10) -> np.ndarray:
    """Unit-trace kernel element of ``L``.

    One row of the generator is replaced by the trace condition and the
    dense system solved.  A kernel of dimension > 1 raises
    :class:`DegenerateSteadyState`.
    """
    sv = np.linalg.svd(L, compute_uv=False)
    scale = max(sv[0], 1.0)
    if sv[-2] < kernel_tol * scale:
        raise DegenerateSteadyState(
            f"generator kernel has dimension >= 2 (singular values {sv[-2]:.2e}, {sv[-1]:.2e})")
    A = L.copy()
    b = np.zeros(16, dtype=complex)
    A[0, :] = _vec(_I4)
    b[0] = 1.0
    rho = _unvec(np.linalg.solve(A, b))
    dev = np.abs(rho - rho.conj().T).max()
    if dev > 1e-12:
        log.info("steady state hermiticity deviation %.2e symmetrised", dev)
    return 0.5 * (rho + rho.conj().T)


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> dict:
    """Residuals of the density-matrix invariants."""
    herm = float(np.abs(rho - rho.conj().T).max())
    tr = float(abs(np.trace(rho) - 1))
    eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    return {"hermiticity": herm, "trace": tr, "min_eigenvalue": eig,
            "ok": herm < tol and tr < tol and eig > -tol}


def residual(L: np.ndarray, rho: np.ndarray) -> float:
    return float(np.abs(L @ _vec(rho)).max())


@dataclass(frozen=True)
class CorrelatorSet:
    """<sigma_i^dag sigma_j> as a 2x2 matrix and the double-excitation correlator."""

    first_order: np.ndarray
    ee: float

    @classmethod
    def from_excitations(cls, n1: float, n2: float, coherence: complex = 0.0, ee: float = 0.0):
        m = np.array([[n1, coherence], [np.conj(coherence), n2]], dtype=complex)
        return cls(m, float(ee))


def correlators(rho: np.ndarray) -> CorrelatorSet:
    m = np.empty((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            m[i, j] = np.trace(SIGMA[i].T @ SIGMA[j] @ rho)
    return CorrelatorSet(m, float(np.real(rho[3, 3])))


def rk4_propagator(L: np.ndarray, step: float) -> np.ndarray:
    hl = step * L
    hl2 = hl @ hl
    hl3 = hl2 @ hl
    return np.eye(L.shape[0]) + hl + hl2 / 2 + hl3 / 6 + hl3 @ hl / 24


def evolve_oracle(L: np.ndarray, rho0: np.ndarray, horizon: float, step: float | None = None,
                  drift_tol: float = 1e-9) -> np.ndarray:
    """rho(horizon) by classical RK4 with a fixed step.

    Since the equation is linear and autonomous, N RK4 steps equal the N-th
    power of the single-step propagator.
    """
    if horizon == 0:
        return np.array(rho0, dtype=complex)
    norm = np.linalg.norm(L, 2)
    if step is None:
        step = 0.25 / norm
    if step * norm >= 1:
        raise ValueError("RK4 step too large: step * ||L|| must be < 1")
    n = int(np.ceil(horizon / step))
    step = horizon / n
    P = rk4_propagator(L, step)
    v = np.linalg.matrix_power(P, n) @ _vec(np.asarray(rho0, dtype=complex))
    rho = _unvec(v)
    if abs(np.trace(rho) - np.trace(rho0)) > drift_tol:
        raise IntegrationDrift("trace drift above tolerance")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-8:
        raise IntegrationDrift("positivity lost during integration")
    return rho


def relaxation_horizon(L: np.ndarray, factor: float = 40.0) -> float:
    """A time after which transients have decayed by ~exp(-factor)."""
    ev = np.linalg.eigvals(L)
    rates = -ev.real
    gap = np.sort(rates[rates > 1e-9])
    return factor / gap[0]


# --------------------------------------------------------------------------
# tomography
# --------------------------------------------------------------------------

def tomography_export(rho: np.ndarray) -> dict:
    """Modulus and phase tables over the 4x4 product basis."""
    return {"basis": list(BASIS), "modulus": np.abs(rho).tolist(),
            "phase": np.angle(rho).tolist()}


def tomography_csv_text(rho: np.ndarray) -> str:
    lines = ["row,col,modulus,phase"]
    for a in range(4):
        for b in range(4):
            lines.append(f"{BASIS[a]},{BASIS[b]},{float(abs(rho[a, b]))!r},"
                         f"{float(np.angle(rho[a, b]))!r}")
    return "\n".join(lines) + "\n"


def write_tomography_csv(rho: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write(tomography_csv_text(rho))


def write_tomography_json(rho: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        json.dump(tomography_export(rho), fh, indent=1, sort_keys=True)
        fh.write("\n")


def basis_state(label: str) -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[BASIS.index(label)] = 1
    return np.outer(v, v.conj())


def bell_state(sign: int = +1) -> np.ndarray:
    """|S> (sign=+1) or |A> (sign=-1) as a density matrix."""
    v = np.zeros(4, dtype=complex)
    v[1], v[2] = 1 / np.sqrt(2), sign / np.sqrt(2)
    return np.outer(v, v.conj())
