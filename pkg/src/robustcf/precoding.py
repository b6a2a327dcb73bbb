"""Linear downlink precoders: ZF, MMSE and the robust MSE-plus-leakage design.

Conventions: ``G_hat_s`` is the masked M x n estimated channel and the UEs see
``G_hat_s.T @ P``. The robust system matrix is built in its Hermitian form

    A = rho_f conj(G) G^T + h^2 rho_f Psi + h^2 lam I,

so that the first-order condition reads ``A @ P = h sqrt(rho_f) conj(G)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .evaluation import mse_objective

log = logging.getLogger(__name__)

LAMBDA_RULES = ("stationary", "signal_offset")
_REAL_TOL = 1e-10


class PrecoderError(RuntimeError):
    """A precoder could not be computed for this channel instance."""


class RankDeficientChannelError(PrecoderError):
    pass


class IndefiniteSystemError(PrecoderError):
    def __init__(self, iteration: int, min_eig: float):
        super().__init__(f"indefinite system matrix at iteration {iteration} (min eigenvalue {min_eig:.3e})")
        self.iteration = iteration
        self.min_eig = min_eig


@dataclass(frozen=True)
class ErrorStatistics:
    """Closed-form Psi = E[conj(G_tilde_s) G_tilde_s^T]; diagonal, stored as its diagonal."""

    diag: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)

    def scaled(self, factor: float) -> "ErrorStatistics":
        return ErrorStatistics(self.diag * factor)


@dataclass(frozen=True)
class RobustSettings:
    """Iteration controls.

    ``jitter`` is relative: the absolute diagonal floor is ``jitter * tr(A) / M``.
    ``lambda_rule`` picks the multiplier update. ``"stationary"`` follows from
    setting dJ/dh = 0; ``"signal_offset"`` additionally subtracts
    ``2 rho_f tr(P^H conj(G) G^T P) / (h^2 P_budget)``, which moves the fixed
    point off the stationary one and is kept for comparison only.
    """

    i_max: int = 4
    epsilon: float = 1e-3
    jitter: float = 1e-12
    lambda_rule: str = "stationary"

    def __post_init__(self):
        if self.i_max < 1:
            raise ValueError(f"i_max must be >= 1, got {self.i_max}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")
        if self.lambda_rule not in LAMBDA_RULES:
            raise ValueError(f"lambda_rule must be one of {LAMBDA_RULES}")


@dataclass(frozen=True)
class IterationRecord:
    h: float
    lam: float
    objective: float
    rel_change: float
    jittered: bool = False


@dataclass
class PrecoderOutput:
    P: np.ndarray
    h: float
    lam: float
    method: str
    iterations_run: int = 0
    trace: list[IterationRecord] = field(default_factory=list)

    @property
    def power(self) -> float:
        return float(np.vdot(self.P, self.P).real)

    @property
    def converged_change(self) -> float:
        """Relative precoder change of the last iterate (inf when no iterate ran)."""
        return self.trace[-1].rel_change if self.iterations_run else math.inf


@dataclass
class RobustState:
    B: np.ndarray
    h: float
    P: np.ndarray
    lam: float
    iteration: int = 0
    jittered: bool = False


def error_covariance_psi(lsf_scheduled, mask, alpha: float) -> ErrorStatistics:
    """[Psi]_mm = alpha * sum_k mask_mk beta_mk; exact, no sampling."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    weighted = np.asarray(lsf_scheduled, dtype=float) * np.asarray(mask)
    return ErrorStatistics(alpha * weighted.sum(axis=1))


def _real(value, what: str) -> float:
    value = complex(value)
    scale = max(abs(value.real), 1.0)
    assert abs(value.imag) <= _REAL_TOL * scale, f"{what} has imaginary residue {value.imag:.3e}"
    return value.real


def _gain(B: np.ndarray, rho_f: float, P_budget: float) -> float:
    return math.sqrt(P_budget / float(np.vdot(B, B).real)) / math.sqrt(rho_f)


def _gram(G_hat_s: np.ndarray) -> np.ndarray:
    return G_hat_s.conj() @ G_hat_s.T


def zf_precoder(G_hat_s: np.ndarray, P_budget: float) -> PrecoderOutput:
    """Right pseudo-inverse conj(G) (G^T conj(G))^-1, globally scaled to tr(P^H P) = P_budget."""
    G_hat_s = np.asarray(G_hat_s)
    M, n = G_hat_s.shape
    gram = G_hat_s.T @ G_hat_s.conj()
    if n > M or np.linalg.cond(gram) > 1e12:
        raise RankDeficientChannelError(f"rank-deficient channel (M={M}, n={n}, cond={np.linalg.cond(gram):.3e})")
    try:
        # conj(G) gram^-1 == conj(gram^-1 G^T)^T because gram is Hermitian
        raw = scipy.linalg.solve(gram, G_hat_s.T, assume_a="pos").T.conj()
    except np.linalg.LinAlgError as exc:
        raise RankDeficientChannelError(f"rank-deficient channel (M={M}, n={n})") from exc
    scale = math.sqrt(P_budget / float(np.vdot(raw, raw).real))
    return PrecoderOutput(scale * raw, h=scale, lam=0.0, method="zf")


def _mmse_b(G_hat_s, rho_f, sigma_w2, n, P_budget):
    M = G_hat_s.shape[0]
    system = rho_f * _gram(G_hat_s) + (sigma_w2 * n / P_budget) * np.eye(M)
    return scipy.linalg.solve(system, G_hat_s.conj(), assume_a="pos")


def mmse_precoder(G_hat_s, rho_f, sigma_w2, n, P_budget) -> PrecoderOutput:
    """Regularized inverse used as the robust initialization.

    ``lam`` is reported as the implicit loading sigma_w2 n / (h^2 P_budget).
    """
    G_hat_s = np.asarray(G_hat_s)
    B = _mmse_b(G_hat_s, rho_f, sigma_w2, n, P_budget)
    h = _gain(B, rho_f, P_budget)
    lam = sigma_w2 * n / (h * h * P_budget)
    return PrecoderOutput(h * math.sqrt(rho_f) * B, h=h, lam=lam, method="mmse")


def lambda_update(P, h, G_hat_s, psi: ErrorStatistics, rho_f, sigma_w2, n, P_budget, rule="stationary") -> float:
    signal = _real(np.vdot(G_hat_s.T @ P, G_hat_s.T @ P), "tr(P^H conj(G) G^T P)")
    leak = _real(np.sum(psi.diag[:, None] * np.abs(P) ** 2), "tr(P^H Psi P)")
    lam = sigma_w2 * n / (h * h * P_budget) - rho_f * leak / P_budget
    if rule == "signal_offset":
        lam -= 2.0 * rho_f * signal / (h * h * P_budget)
    elif rule != "stationary":
        raise ValueError(f"unknown lambda rule {rule!r}")
    return lam


def robust_init(G_hat_s, psi: ErrorStatistics, rho_f, sigma_w2, n, P_budget, rule="stationary") -> RobustState:
    G_hat_s = np.asarray(G_hat_s)
    B = _mmse_b(G_hat_s, rho_f, sigma_w2, n, P_budget)
    h = _gain(B, rho_f, P_budget)
    P = h * math.sqrt(rho_f) * B
    lam = lambda_update(P, h, G_hat_s, psi, rho_f, sigma_w2, n, P_budget, rule)
    return RobustState(B=B, h=h, P=P, lam=lam)


def system_matrix(G_hat_s, psi: ErrorStatistics, rho_f, h, lam) -> np.ndarray:
    A = rho_f * _gram(G_hat_s)
    A[np.diag_indices_from(A)] += h * h * (rho_f * psi.diag + lam)
    return A


def robust_iterate(state: RobustState, G_hat_s, psi, rho_f, sigma_w2, n, P_budget, settings=RobustSettings()):
    """One alternating update: solve for B with (h, lam) fixed, renormalize h, refresh lam."""
    G_hat_s = np.asarray(G_hat_s)
    i = state.iteration + 1
    A = system_matrix(G_hat_s, psi, rho_f, state.h, state.lam)
    M = A.shape[0]
    eigs = np.linalg.eigvalsh(A)
    floor = settings.jitter * abs(float(np.trace(A).real)) / M
    jittered = bool(eigs[0] < floor)
    if jittered:
        # lam < 0 can make A indefinite; keep lam as computed and only load the diagonal
        A[np.diag_indices_from(A)] += floor
        eigs = eigs + floor
        log.debug("iteration %d: min eigenvalue %.3e below floor %.3e, jitter applied", i, eigs[0] - floor, floor)
    scale = float(np.max(np.abs(eigs)))
    if scale == 0.0 or float(np.min(np.abs(eigs))) <= 1e-13 * scale:
        raise IndefiniteSystemError(i, float(eigs[0]))
    B = scipy.linalg.solve(A, G_hat_s.conj(), assume_a="her")
    h = _gain(B, rho_f, P_budget)
    P = h * math.sqrt(rho_f) * B
    lam = lambda_update(P, h, G_hat_s, psi, rho_f, sigma_w2, n, P_budget, settings.lambda_rule)
    return RobustState(B=B, h=h, P=P, lam=lam, iteration=i, jittered=jittered)


def robust_precoder(G_hat_s, psi: ErrorStatistics, rho_f, sigma_w2, n, P_budget, settings=RobustSettings()):
    """Alternating optimization from the MMSE start; stops on i_max or relative change < epsilon."""
    G_hat_s = np.asarray(G_hat_s)
    state = robust_init(G_hat_s, psi, rho_f, sigma_w2, n, P_budget, settings.lambda_rule)
    trace = []
    for _ in range(settings.i_max):
        prev = state.P
        state = robust_iterate(state, G_hat_s, psi, rho_f, sigma_w2, n, P_budget, settings)
        change = float(np.linalg.norm(state.P - prev) / np.linalg.norm(prev))
        J = mse_objective(state.P, state.h, G_hat_s, psi.diag, rho_f, sigma_w2, n)
        trace.append(IterationRecord(state.h, state.lam, J, change, state.jittered))
        if change < settings.epsilon:
            break
    return PrecoderOutput(state.P, state.h, state.lam, "robust", state.iteration, trace)


def stationarity_residual(out: PrecoderOutput, G_hat_s, psi: ErrorStatistics, rho_f) -> float:
    """||A P - h sqrt(rho_f) conj(G)||_F / ||h sqrt(rho_f) G||_F at the returned (P, h, lam)."""
    G_hat_s = np.asarray(G_hat_s)
    A = system_matrix(G_hat_s, psi, rho_f, out.h, out.lam)
    rhs = out.h * math.sqrt(rho_f) * G_hat_s.conj()
    return float(np.linalg.norm(A @ out.P - rhs) / np.linalg.norm(rhs))
