"""Sum-rate bound, MSE-plus-leakage objective and the analytic FLOP model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

_REAL_TOL = 1e-10

# Constants of the FLOP model, per unit of "one regularized solve":
#   solve  : c_solve * n^3  (factorization of the n x n system)
#   build  : c_mul * n * M^2 (matrix products, complex multiply-add = 8 real flops)
#   traces : c_trace * n^2  (trace terms for the multiplier / normalization)
FLOP_CONSTANTS = {"c_solve": 2.0 / 3.0, "c_mul": 8.0, "c_trace": 8.0}
METHODS = ("zf", "mmse", "robust")


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class RateReport:
    sum_rate: float
    eigenvalues: np.ndarray  # of the whitened R_UC + I


@dataclass(frozen=True)
class FlopReport:
    method: str
    flops: float
    breakdown: dict


def error_variance(beta_s, mask, alpha: float) -> np.ndarray:
    """Per-entry variance of the masked error channel, alpha * beta_mk * mask_mk (M x n)."""
    return alpha * np.asarray(beta_s, dtype=float) * np.asarray(mask)


def residual_covariance(P, err_var, rho_f: float, sigma_w2: float) -> np.ndarray:
    """Closed form of E[rho_f G~^T P P^H conj(G~)] + sigma_w2 I.

    With independent zero-mean entries of variance ``err_var`` only the
    diagonal survives: R_kk = rho_f sum_m err_var_mk [P P^H]_mm + sigma_w2.
    """
    row_power = np.sum(np.abs(np.asarray(P)) ** 2, axis=1)
    diag = rho_f * (np.asarray(err_var).T @ row_power) + sigma_w2
    return np.diag(diag).astype(complex)


def sum_rate(G_hat_s, P, rho_f: float, R_tilde) -> RateReport:
    """log2 det(R_UC + I) with R_UC = rho_f G^T P P^H conj(G) R~^-1.

    Evaluated as log2 det(I + L^-1 S L^-H) where R~ = L L^H, so the argument
    stays Hermitian positive definite and Cholesky gives the log-determinant.
    """
    F = np.asarray(G_hat_s).T @ np.asarray(P)
    S = rho_f * (F @ F.conj().T)
    try:
        chol = scipy.linalg.cholesky(np.asarray(R_tilde), lower=True)
        W = scipy.linalg.solve_triangular(chol, F, lower=True) * math.sqrt(rho_f)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"residual covariance is not positive definite: {exc}") from exc
    X = W @ W.conj().T
    X = 0.5 * (X + X.conj().T)
    X[np.diag_indices_from(X)] += 1.0
    try:
        cx = scipy.linalg.cholesky(X, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"R_UC + I not positive definite (cond(R~)={np.linalg.cond(R_tilde):.3e})") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(cx).real)))
    rate = logdet / math.log(2.0)
    if not math.isfinite(rate):
        raise NumericalError(f"non-finite log-determinant (cond(R~)={np.linalg.cond(R_tilde):.3e}, |S|={np.linalg.norm(S):.3e})")
    return RateReport(max(rate, 0.0), np.linalg.eigvalsh(X))


def mse_objective(P, h: float, G_hat_s, psi, rho_f: float, sigma_w2: float, n: int) -> float:
    """Desired-signal MSE plus error leakage, all six terms as derived.

    ``psi`` is either the diagonal of Psi (1-D) or the full M x M matrix.
    """
    P = np.asarray(P)
    G_hat_s = np.asarray(G_hat_s)
    psi = np.asarray(psi)
    F = G_hat_s.T @ P
    sq = math.sqrt(rho_f)
    cross = np.trace(F) * sq / h
    cross_h = np.trace(P.conj().T @ G_hat_s.conj()) * sq / h
    signal = rho_f / h**2 * np.vdot(F, F)
    if psi.ndim == 1:
        leak = rho_f * np.sum(psi[:, None] * np.abs(P) ** 2)
    else:
        leak = rho_f * np.trace(P.conj().T @ psi @ P)
    J = n + sigma_w2 * n / h**2 - cross - cross_h + signal + leak
    J = complex(J)
    assert abs(J.imag) <= _REAL_TOL * max(abs(J.real), 1.0), f"objective has imaginary residue {J.imag:.3e}"
    return J.real


def _unit(M: int, n: int) -> dict:
    c = FLOP_CONSTANTS
    # whole operations, so multiples of a unit stay exact in floating point
    return {
        "build": float(round(c["c_mul"] * n * M**2)),
        "solve": float(round(c["c_solve"] * n**3)),
        "traces": float(round(c["c_trace"] * n**2)),
    }


def flop_count(method: str, M: int, n: int, i_max: int = 4, init_units: float = 1.0) -> FlopReport:
    """Model-based operation count.

    zf and mmse cost one unit. robust costs ``i_max`` units for the loop plus
    ``init_units`` for its MMSE-type initialization.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if not M >= n >= 1:
        raise ValueError("need M >= n >= 1")
    if i_max < 1:
        raise ValueError("i_max must be >= 1")
    units = 1.0 if method != "robust" else i_max + init_units
    breakdown = {k: units * v for k, v in _unit(M, n).items()}
    return FlopReport(method, sum(breakdown.values()), breakdown)
