"""Two-qubit OAM states and the four vortex-phase-plate projection modes.

Single-photon basis is (|G>, |R>) = (l=0, l=+1); two-photon basis is ordered
(|GG>, |GR>, |RG>, |RR>) with the Stokes photon first.
"""

from __future__ import annotations

import enum
import itertools

import numpy as np

from .errors import UnphysicalStateError, ValidationError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_TOL = 1e-9

_S2 = 1 / np.sqrt(2)


class MeasurementMode(enum.Enum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"

    @property
    def ket(self) -> np.ndarray:
        return _KETS[self].copy()

    @classmethod
    def parse(cls, name: str) -> MeasurementMode:
        try:
            return cls(name.strip().upper())
        except ValueError:
            raise ValidationError(f"unknown measurement mode {name!r}") from None


_KETS = {
    MeasurementMode.P1: np.array([1, 0], dtype=complex),
    MeasurementMode.P2: np.array([0, 1], dtype=complex),
    MeasurementMode.P3: np.array([1, 1], dtype=complex) * _S2,
    MeasurementMode.P4: np.array([1, -1j], dtype=complex) * _S2,
}

Setting = tuple[MeasurementMode, MeasurementMode]

#: The 16 (Stokes, anti-Stokes) settings in row-major P1..P4 order.
ALL_SETTINGS: list[Setting] = list(itertools.product(MeasurementMode, repeat=2))
#: The four settings built from the computational basis; their probabilities sum to 1.
COMPUTATIONAL_SETTINGS: list[Setting] = list(
    itertools.product([MeasurementMode.P1, MeasurementMode.P2], repeat=2))


def parse_setting(text: str) -> Setting | None:
    """``"P2,P2"`` -> (P2, P2); ``"none"`` -> None."""
    text = text.strip()
    if text.lower() in ("", "none"):
        return None
    parts = [p for p in text.replace(" ", ",").split(",") if p]
    if len(parts) != 2:
        raise ValidationError(f"setting must name two modes, got {text!r}")
    return MeasurementMode.parse(parts[0]), MeasurementMode.parse(parts[1])


def format_setting(setting: Setting | None) -> str:
    if setting is None:
        return "none"
    return f"{setting[0].value},{setting[1].value}"


def single_projector(mode: MeasurementMode) -> np.ndarray:
    k = _KETS[mode]
    return np.outer(k, k.conj())


def projector(setting: Setting) -> np.ndarray:
    """Rank-1 projector |m_s><m_s| (x) |m_as><m_as|."""
    return np.kron(single_projector(setting[0]), single_projector(setting[1]))


# --- states -----------------------------------------------------------------

def pure(ket) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return np.outer(ket, ket.conj())


BELL_KET = np.array([1, 0, 0, 1], dtype=complex) * _S2


def bell() -> np.ndarray:
    """(|GG> + |RR>)/sqrt(2), the post-beam-splitter target in detector coordinates."""
    return pure(BELL_KET)


def maximally_mixed() -> np.ndarray:
    return np.eye(4, dtype=complex) / 4


def werner(p: float) -> np.ndarray:
    """p |Bell><Bell| + (1 - p) I/4."""
    if not 0 <= p <= 1:
        raise ValidationError(f"Werner weight must lie in [0, 1], got {p}")
    return p * bell() + (1 - p) * maximally_mixed()


def product(a: MeasurementMode, b: MeasurementMode) -> np.ndarray:
    return pure(np.kron(_KETS[a], _KETS[b]))


# Targets carry the coordinate frame they are written in. In the source frame the
# anti-Stokes qubit is (|G>, |L>); the beam splitter reflection maps L -> R, so
# both targets share the same 4-vector.
TARGETS = {
    "bell": ("detector", "(|G_s G_as> + |R_s R_as>)/sqrt(2)"),
    "bell-source": ("source", "(|G_s G_as> + |R_s L_as>)/sqrt(2)"),
}


def target_state(label: str) -> np.ndarray:
    if label not in TARGETS:
        raise ValidationError(f"unknown target {label!r}; choose from {sorted(TARGETS)}")
    return bell()


def parse_state(spec: str) -> np.ndarray:
    """State from a config label.

    ``bell``, ``bell-source``, ``mixed``, ``werner:<p>``, ``product:<m_s>,<m_as>``
    (modes P1..P4, e.g. ``product:P1,P1`` for |GG>).
    """
    spec = spec.strip()
    name, _, arg = spec.partition(":")
    name = name.lower()
    if name in TARGETS:
        return target_state(name)
    if name == "mixed":
        return maximally_mixed()
    if name == "werner":
        try:
            return werner(float(arg))
        except ValueError:
            raise ValidationError(f"bad Werner weight in {spec!r}") from None
    if name == "product":
        s = parse_setting(arg)
        if s is None:
            raise ValidationError(f"product state needs two modes: {spec!r}")
        return product(*s)
    raise ValidationError(f"unknown state label {spec!r}")


def check_density_matrix(rho, *, name: str = "rho") -> np.ndarray:
    """Return ``rho`` as a complex 4x4 array or raise UnphysicalStateError."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise UnphysicalStateError(f"{name} must be 4x4, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise UnphysicalStateError(f"{name} has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise UnphysicalStateError(f"{name} is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL:
        raise UnphysicalStateError(f"{name} has trace {tr!r}, expected 1")
    lam = np.linalg.eigvalsh(rho)
    if lam[0] < -EIG_TOL:
        raise UnphysicalStateError(f"{name} has negative eigenvalue {lam[0]:.3g}")
    return rho


def random_density_matrix(rng: np.random.Generator, rank: int = 4) -> np.ndarray:
    """Random state from the Ginibre ensemble (used by tests and scripts)."""
    g = rng.standard_normal((4, rank)) + 1j * rng.standard_normal((4, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real
