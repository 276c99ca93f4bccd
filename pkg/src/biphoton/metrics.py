"""Fidelity, concurrence and purity of two-qubit density matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnphysicalStateError
from .states import check_density_matrix

CLAMP_TOL = 1e-9
_EIG_FLOOR = 1e-12
_REJECT_BELOW = -1e-6

_Y = np.array([[0, -1j], [1j, 0]])
YY = np.kron(_Y, _Y)


@dataclass(frozen=True)
class MetricReport:
    fidelity: float
    concurrence: float
    purity: float
    eigenvalues: tuple[float, float, float, float]
    target_label: str

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "concurrence": self.concurrence,
            "purity": self.purity,
            "eigenvalues": list(self.eigenvalues),
            "target_label": self.target_label,
        }


def _clamp(x: float, lo: float, hi: float) -> float:
    if x < lo - CLAMP_TOL or x > hi + CLAMP_TOL:
        # outside tolerance means a real numerical problem, keep it visible
        return float(x)
    return float(min(hi, max(lo, x)))


def matrix_sqrt_hermitian(m) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix via eigendecomposition."""
    m = np.asarray(m, dtype=complex)
    if np.max(np.abs(m - m.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(m))):
        raise UnphysicalStateError("matrix is not Hermitian")
    lam, v = np.linalg.eigh(m)
    if lam[0] < _REJECT_BELOW * max(1.0, lam[-1]):
        raise UnphysicalStateError(f"matrix has negative eigenvalue {lam[0]:.3g}")
    lam = np.where(lam < _EIG_FLOOR, 0.0, lam)
    r = (v * np.sqrt(lam)) @ v.conj().T
    return (r + r.conj().T) / 2


def fidelity(rho1, rho0) -> float:
    """Tr( sqrt( sqrt(rho1) rho0 sqrt(rho1) ) )^2."""
    rho1 = check_density_matrix(rho1, name="rho1")
    rho0 = check_density_matrix(rho0, name="rho0")
    s1 = matrix_sqrt_hermitian(rho1)
    inner = s1 @ rho0 @ s1
    inner = (inner + inner.conj().T) / 2
    lam = np.linalg.eigvalsh(inner)
    lam = np.where(lam < _EIG_FLOOR, 0.0, lam)
    return _clamp(float(np.sum(np.sqrt(lam)) ** 2), 0.0, 1.0)


def concurrence(rho) -> float:
    """Wootters concurrence, spin flip taken in the (|GG>, |GR>, |RG>, |RR>) basis."""
    rho = check_density_matrix(rho)
    flipped = YY @ rho.conj() @ YY
    # rho @ flipped is similar to sqrt(rho) flipped sqrt(rho), which is Hermitian PSD
    s = matrix_sqrt_hermitian(rho)
    h = s @ flipped @ s
    h = (h + h.conj().T) / 2
    lam = np.linalg.eigvalsh(h)
    lam = np.sqrt(np.where(lam < _EIG_FLOOR, 0.0, lam))[::-1]
    c = lam[0] - lam[1] - lam[2] - lam[3]
    return _clamp(max(0.0, float(c)), 0.0, 1.0)


def purity(rho) -> float:
    rho = check_density_matrix(rho)
    return _clamp(float(np.real(np.trace(rho @ rho))), 0.25, 1.0)


def metric_report(rho, target, target_label: str = "bell") -> MetricReport:
    rho = check_density_matrix(rho)
    lam = np.linalg.eigvalsh(rho)[::-1]
    return MetricReport(
        fidelity=fidelity(rho, target),
        concurrence=concurrence(rho),
        purity=purity(rho),
        eigenvalues=tuple(float(v) for v in lam),
        target_label=target_label,
    )
