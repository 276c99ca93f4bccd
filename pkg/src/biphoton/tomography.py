"""Two-qubit state reconstruction from the 16 VPP coincidence settings.

Two estimators are provided. :func:`linear_inversion` solves the linear
forward model directly and may return a non-positive matrix.
:func:`mle_reconstruct` maximizes a Poisson likelihood over a
Cholesky-parametrized density matrix ``rho = T^dag T / Tr[T^dag T]`` (``T``
lower triangular, 16 real parameters) with the total flux as a 17th nuisance
parameter, so its output is physical by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import minimize

from .errors import ValidationError
from .states import (
    ALL_SETTINGS,
    COMPUTATIONAL_SETTINGS,
    MeasurementMode,
    Setting,
    check_density_matrix,
    maximally_mixed,
    projector,
)

PROJECTORS = np.array([projector(s) for s in ALL_SETTINGS])  # (16, 4, 4)
_COMP_IDX = [ALL_SETTINGS.index(s) for s in COMPUTATIONAL_SETTINGS]

_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
#: Hermitian operator basis sigma_a (x) sigma_b; rho = sum_k r_k B_k / 4.
PAULI_BASIS = np.array([np.kron(a, b) for a in _PAULI for b in _PAULI])

_TRIL = [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)]
_TRIL_ROWS = np.array([i for i, _ in _TRIL])
_TRIL_COLS = np.array([j for _, j in _TRIL])
_EXCHANGE = np.eye(4)[::-1]


@dataclass(frozen=True)
class TomographyInput:
    """Coincidence counts for all 16 (Stokes mode, anti-Stokes mode) settings."""

    counts: Mapping[Setting, int]
    accumulation_s: float = 160.0

    def __post_init__(self):
        missing = [s for s in ALL_SETTINGS if s not in self.counts]
        if missing:
            names = ", ".join(f"({a.value},{b.value})" for a, b in missing)
            raise ValidationError(f"missing tomography setting(s): {names}")
        extra = set(self.counts) - set(ALL_SETTINGS)
        if extra:
            raise ValidationError(f"unexpected settings: {sorted(map(str, extra))}")
        clean = {}
        for s in ALL_SETTINGS:
            c = self.counts[s]
            if int(c) != c or c < 0:
                raise ValidationError(f"count for {s[0].value},{s[1].value} must be a "
                                      f"non-negative integer, got {c!r}")
            clean[s] = int(c)
        object.__setattr__(self, "counts", clean)

    @classmethod
    def from_vector(cls, values, accumulation_s: float = 160.0) -> TomographyInput:
        values = list(values)
        if len(values) != 16:
            raise ValidationError(f"need 16 counts, got {len(values)}")
        return cls(dict(zip(ALL_SETTINGS, values)), accumulation_s)

    def vector(self) -> np.ndarray:
        return np.array([self.counts[s] for s in ALL_SETTINGS], dtype=float)


@dataclass(frozen=True, eq=False)
class TomographyResult:
    rho: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    linear_inversion_rho: np.ndarray
    flux: float
    likelihood: str = "poisson"
    n_starts: int = 1
    start_spread: float = 0.0  # max trace distance of other converged starts to the best
    diagnostics: dict = field(default_factory=dict)


def expected_probabilities(rho, settings=ALL_SETTINGS) -> np.ndarray:
    """Tr[rho Pi_i] for each setting, clamped to [0, 1]."""
    rho = check_density_matrix(rho)
    ops = np.array([projector(s) for s in settings])
    p = np.einsum("kij,ji->k", ops, rho).real
    return np.clip(p, 0.0, 1.0)


def forward_counts(rho, scale: float) -> TomographyInput:
    """Noise-free counts ``scale * Tr[rho Pi_i]`` rounded to integers."""
    return TomographyInput.from_vector(np.rint(scale * expected_probabilities(rho)).astype(int))


def sample_counts(rho, scale: float, rng: np.random.Generator) -> TomographyInput:
    """Poisson counts with means ``scale * Tr[rho Pi_i]``."""
    return TomographyInput.from_vector(rng.poisson(scale * expected_probabilities(rho)))


def design_matrix() -> np.ndarray:
    """Real 16x16 map from Pauli coefficients r to probabilities: p = M r."""
    return np.einsum("kij,lji->kl", PROJECTORS, PAULI_BASIS).real / 4


def linear_inversion(data: TomographyInput) -> np.ndarray:
    """Hermitian solution of Tr[rho Pi_i] = counts_i / N, N the computational-basis total.

    The result has unit trace but may have negative eigenvalues.
    """
    c = data.vector()
    n_hat = c[_COMP_IDX].sum()
    if n_hat == 0:
        raise ValidationError("linear inversion needs counts in the P1/P2 settings")
    r = np.linalg.solve(design_matrix(), c / n_hat)
    rho = np.einsum("k,kij->ij", r, PAULI_BASIS) / 4
    return (rho + rho.conj().T) / 2


# --- Cholesky parametrization --------------------------------------------------

def params_to_tmatrix(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    T = np.zeros((4, 4), dtype=complex)
    T[np.arange(4), np.arange(4)] = t[:4]
    T[_TRIL_ROWS, _TRIL_COLS] = t[4:10] + 1j * t[10:16]
    return T


def tmatrix_to_params(T) -> np.ndarray:
    off = T[_TRIL_ROWS, _TRIL_COLS]
    return np.concatenate([T[np.arange(4), np.arange(4)].real, off.real, off.imag])


def params_to_rho(t) -> np.ndarray:
    T = params_to_tmatrix(t)
    m = T.conj().T @ T
    m = (m + m.conj().T) / 2
    return m / np.trace(m).real


def rho_to_params(rho, floor: float = 1e-6) -> np.ndarray:
    """Lower-triangular T with T^dag T = rho (eigenvalues clamped to ``floor``)."""
    rho = np.asarray(rho, dtype=complex)
    rho = (rho + rho.conj().T) / 2
    lam, v = np.linalg.eigh(rho)
    lam = np.maximum(lam, floor)
    rho = (v * lam) @ v.conj().T
    rho /= np.trace(rho).real
    # T^dag T = rho with T lower  <=>  (J T^dag J)(J T J) ... reduce to ordinary Cholesky of J rho J
    L = np.linalg.cholesky(_EXCHANGE @ rho @ _EXCHANGE)
    T = _EXCHANGE @ L.conj().T @ _EXCHANGE
    return tmatrix_to_params(T)


# --- likelihood -------------------------------------------------------------------

_P_FLOOR = 1e-300


def _probs(rho) -> np.ndarray:
    return np.einsum("kij,ji->k", PROJECTORS, rho).real


def log_likelihood(x, counts, likelihood: str = "poisson") -> float:
    """Log-likelihood of ``counts`` at parameters ``x = (t_1..t_16, ln N)``.

    Poisson: sum_i c_i ln(N p_i) - N p_i. Gaussian: -sum_i (c_i - N p_i)^2 / (2 max(c_i, 1)).
    """
    x = np.asarray(x, dtype=float)
    counts = np.asarray(counts, dtype=float)
    p = _probs(params_to_rho(x[:16]))
    flux = np.exp(x[16])
    mu = flux * np.maximum(p, _P_FLOOR)
    if likelihood == "poisson":
        pos = counts > 0
        return float(np.sum(counts[pos] * np.log(mu[pos])) - np.sum(mu))
    if likelihood == "gaussian":
        return float(-np.sum((counts - mu) ** 2 / (2 * np.maximum(counts, 1.0))))
    raise ValidationError(f"unknown likelihood {likelihood!r}")


def log_likelihood_grad(x, counts, likelihood: str = "poisson") -> np.ndarray:
    """Analytic gradient of :func:`log_likelihood` with respect to ``x``."""
    x = np.asarray(x, dtype=float)
    counts = np.asarray(counts, dtype=float)
    T = params_to_tmatrix(x[:16])
    m = T.conj().T @ T
    tr = np.trace(m).real
    p = _probs(m / tr)
    flux = np.exp(x[16])
    pf = np.maximum(p, _P_FLOOR)
    if likelihood == "poisson":
        dl_dp = counts / pf - flux
        dl_dlogn = counts.sum() - flux * pf.sum()
    elif likelihood == "gaussian":
        var = np.maximum(counts, 1.0)
        resid = (counts - flux * pf) / var
        dl_dp = flux * resid
        dl_dlogn = flux * np.sum(pf * resid)
    else:
        raise ValidationError(f"unknown likelihood {likelihood!r}")
    # dp_i = Tr[(Pi_i - p_i I) dM] / tr,  dM = dT^dag T + T^dag dT
    G = (np.einsum("k,kij->ij", dl_dp, PROJECTORS) - np.sum(dl_dp * p) * np.eye(4)) / tr
    X = G @ T.conj().T  # dL = 2 Re Tr[X dT]
    g = np.empty(17)
    g[:4] = 2 * X[np.arange(4), np.arange(4)].real
    g[4:10] = 2 * X[_TRIL_COLS, _TRIL_ROWS].real
    g[10:16] = -2 * X[_TRIL_COLS, _TRIL_ROWS].imag
    g[16] = dl_dlogn
    return g


def trace_distance(a, b) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b)))))


def _initial_params(data: TomographyInput) -> tuple[np.ndarray, np.ndarray | None]:
    try:
        lin = linear_inversion(data)
        t0 = rho_to_params(lin)
    except (ValidationError, np.linalg.LinAlgError):
        lin = None
        t0 = rho_to_params(maximally_mixed())
    return t0, lin


def _run_lbfgs(x0, counts, likelihood, rel_tol, max_rounds, maxiter):
    scale = max(float(np.sum(counts)), 1.0)

    def fun(x):
        return -log_likelihood(x, counts, likelihood) / scale, \
               -log_likelihood_grad(x, counts, likelihood) / scale

    x = np.asarray(x0, dtype=float)
    f_prev = fun(x)[0]
    iterations = 0
    converged = False
    # L-BFGS restarts rebuild the curvature model; near rank-deficient optima
    # a single run can stall on a stale one.
    for _ in range(max_rounds):
        r = minimize(fun, x, jac=True, method="L-BFGS-B",
                     options={"maxiter": maxiter, "ftol": 1e-16, "gtol": 1e-14,
                              "maxcor": 30})
        iterations += int(r.nit)
        x = r.x
        improvement = (f_prev - r.fun) / max(abs(r.fun), abs(f_prev), 1.0)
        f_prev = r.fun
        # a round cut off by the iteration cap says nothing about the optimum
        if 0 <= improvement < rel_tol and r.nit < maxiter:
            converged = True
            break
    return x, -f_prev * scale, iterations, converged


def mle_reconstruct(data: TomographyInput, likelihood: str = "poisson", n_starts: int = 1,
                    seed: int = 0, rel_tol: float = 1e-10, max_rounds: int = 50,
                    maxiter: int = 10_000) -> TomographyResult:
    """Maximum-likelihood density matrix for the 16 coincidence counts.

    The first start comes from the linear-inversion estimate (eigenvalues
    clamped to 1e-6); further starts are random. The best likelihood wins.
    """
    counts = data.vector()
    if counts.sum() == 0:
        raise ValidationError("all tomography counts are zero")
    t0, lin = _initial_params(data)
    n0 = counts[_COMP_IDX].sum() or counts.sum()
    rng = np.random.default_rng(seed)
    starts = [np.append(t0, np.log(n0))]
    for _ in range(n_starts - 1):
        starts.append(np.append(rng.standard_normal(16), np.log(n0)))

    runs = [_run_lbfgs(x0, counts, likelihood, rel_tol, max_rounds, maxiter) for x0 in starts]
    best = max(runs, key=lambda r: r[1])
    x, ll, iterations, converged = best
    rho = params_to_rho(x[:16])
    spread = max((trace_distance(rho, params_to_rho(r[0][:16])) for r in runs if r[3]),
                 default=0.0)
    return TomographyResult(
        rho=rho,
        log_likelihood=float(ll),
        iterations=sum(r[2] for r in runs),
        converged=bool(converged),
        linear_inversion_rho=lin if lin is not None else np.full((4, 4), np.nan),
        flux=float(np.exp(x[16])),
        likelihood=likelihood,
        n_starts=n_starts,
        start_spread=float(spread),
        diagnostics={"min_eig_linear": float(np.linalg.eigvalsh(lin)[0]) if lin is not None
                     else float("nan")},
    )


def informational_completeness() -> tuple[int, float]:
    """Rank and condition number of the 16-setting forward map."""
    m = design_matrix()
    return int(np.linalg.matrix_rank(m)), float(np.linalg.cond(m))


def relabel_g_r(data: TomographyInput) -> TomographyInput:
    """Swap P1 <-> P2 on both arms (G <-> R), leaving P3 and P4 in place."""
    swap = {MeasurementMode.P1: MeasurementMode.P2, MeasurementMode.P2: MeasurementMode.P1,
            MeasurementMode.P3: MeasurementMode.P3, MeasurementMode.P4: MeasurementMode.P4}
    return TomographyInput({(swap[a], swap[b]): c for (a, b), c in data.counts.items()},
                           data.accumulation_s)
