"""Network geometry, large-scale fading and imperfect-CSI channel draws.

All randomness comes from an explicit ``numpy.random.Generator``; nothing here
touches global RNG state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration violates its invariants."""


@dataclass(frozen=True)
class SystemConfig:
    """System dimensions, power levels and propagation parameters.

    Distances are in meters. ``pl_const_db`` is calibrated for distances in
    kilometers, so the pathloss formula converts before taking logarithms.
    With ``normalize_lsf`` the LSF coefficients are divided by the pathloss
    gain of the near plateau (d <= d0), which makes ``rho_f / sigma_w2`` the
    SNR of an unshadowed link at the plateau.
    """

    L: int = 16
    N: int = 4
    K: int = 128
    n: int = 16
    area_side: float = 400.0
    alpha: float = 0.15
    rho_f: float = 10.0
    sigma_w2: float = 1.0
    P_budget: float = 1.0
    ap_selection_delta: float = 0.05
    d0: float = 10.0
    d1: float = 50.0
    pl_const_db: float = 140.7
    shadow_std_db: float = 8.0
    min_distance: float = 1.0
    ap_layout: str = "grid"
    normalize_lsf: bool = True
    rng_seed: int = 0

    @property
    def M(self) -> int:
        return self.L * self.N

    def validate(self) -> "SystemConfig":
        if min(self.L, self.N, self.K, self.n) < 1:
            raise ConfigError("L, N, K and n must all be >= 1")
        if self.n > self.M:
            raise ConfigError(f"n={self.n} exceeds the antenna count M={self.M}")
        if self.K < self.n:
            raise ConfigError(f"K={self.K} is smaller than n={self.n}")
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in [0, 1), got {self.alpha}")
        for name in ("area_side", "rho_f", "sigma_w2", "P_budget", "d0", "d1", "min_distance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be finite and > 0, got {value}")
        if not self.d0 < self.d1:
            raise ConfigError("pathloss breakpoints need d0 < d1")
        if not 0.0 < self.ap_selection_delta <= 1.0:
            raise ConfigError("ap_selection_delta must lie in (0, 1]")
        if self.shadow_std_db < 0:
            raise ConfigError("shadow_std_db must be >= 0")
        if self.ap_layout not in ("grid", "random"):
            raise ConfigError(f"unknown ap_layout {self.ap_layout!r}")
        return self

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes).validate()


def config_fields(cls) -> dict[str, type]:
    return {f.name: f.type for f in fields(cls)}


@dataclass(frozen=True)
class NetworkLayout:
    ap_positions: np.ndarray  # (M, 2), N identical rows per AP
    ue_positions: np.ndarray  # (K, 2)
    N: int

    @property
    def ap_sites(self) -> np.ndarray:
        return self.ap_positions[:: self.N]


@dataclass(frozen=True)
class LsfMatrix:
    beta: np.ndarray  # (M, K), linear scale
    N: int
    n_clamped: int = 0

    @property
    def per_ap(self) -> np.ndarray:
        return self.beta[:: self.N]


@dataclass(frozen=True)
class ChannelSet:
    G: np.ndarray
    G_hat: np.ndarray
    G_tilde: np.ndarray
    mask: np.ndarray
    scheduled_ues: np.ndarray
    beta_s: np.ndarray = field(repr=False)

    @property
    def G_s(self) -> np.ndarray:
        return self.G * self.mask

    @property
    def G_hat_s(self) -> np.ndarray:
        return self.G_hat * self.mask

    @property
    def G_tilde_s(self) -> np.ndarray:
        return self.G_tilde * self.mask


def generate_layout(cfg: SystemConfig, rng: np.random.Generator) -> NetworkLayout:
    """Place APs (grid when L is a perfect square) and drop UEs uniformly."""
    side = cfg.area_side
    root = math.isqrt(cfg.L)
    if cfg.ap_layout == "grid" and root * root == cfg.L:
        centers = (np.arange(root) + 0.5) * side / root
        xx, yy = np.meshgrid(centers, centers, indexing="ij")
        sites = np.column_stack([xx.ravel(), yy.ravel()])
    else:
        sites = rng.uniform(0.0, side, size=(cfg.L, 2))
    ues = rng.uniform(0.0, side, size=(cfg.K, 2))
    return NetworkLayout(np.repeat(sites, cfg.N, axis=0), ues, cfg.N)


def pathloss_db(d_m, cfg: SystemConfig) -> np.ndarray:
    """Three-slope pathloss in dB (positive = loss) for distances in meters."""
    d = np.asarray(d_m, dtype=float) / 1000.0
    d0, d1 = cfg.d0 / 1000.0, cfg.d1 / 1000.0
    far = cfg.pl_const_db + 35.0 * np.log10(d)
    mid = cfg.pl_const_db + 15.0 * math.log10(d1) + 20.0 * np.log10(d)
    near = cfg.pl_const_db + 15.0 * math.log10(d1) + 20.0 * math.log10(d0)
    return np.where(d > d1, far, np.where(d > d0, mid, near))


def compute_lsf(layout: NetworkLayout, cfg: SystemConfig, rng: np.random.Generator) -> LsfMatrix:
    """Large-scale fading per (antenna, UE); shadowing only beyond d1, shared by an AP's antennas."""
    diff = layout.ap_sites[:, None, :] - layout.ue_positions[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    clamped = int(np.count_nonzero(dist < cfg.min_distance))
    dist = np.maximum(dist, cfg.min_distance)
    shadow = cfg.shadow_std_db * rng.standard_normal(dist.shape)
    shadow = np.where(dist > cfg.d1, shadow, 0.0)
    gain_db = -pathloss_db(dist, cfg) + shadow
    if cfg.normalize_lsf:
        gain_db = gain_db + float(pathloss_db(cfg.d0, cfg))
    beta = 10.0 ** (gain_db / 10.0)
    return LsfMatrix(np.repeat(beta, cfg.N, axis=0), cfg.N, clamped)


def schedule_users(lsf: LsfMatrix, cfg: SystemConfig) -> np.ndarray:
    """Greedy top-n by total LSF; ties go to the lower UE index. Returned in index order."""
    totals = lsf.beta.sum(axis=0)
    # stable sort on the negated totals keeps lower indices first among equals
    order = np.argsort(-totals, kind="stable")
    return np.sort(order[: cfg.n])


def select_aps(lsf_scheduled: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """User-centric AP selection: AP l serves UE k iff beta_lk >= delta * max_l' beta_l'k."""
    per_ap = np.asarray(lsf_scheduled)[:: cfg.N]
    best = per_ap.max(axis=0, keepdims=True)
    active = per_ap >= cfg.ap_selection_delta * best
    active |= per_ap == best
    return np.repeat(active, cfg.N, axis=0).astype(np.int8)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples, CN(0, 1)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)


def draw_estimate_and_error(beta_s: np.ndarray, alpha: float, rng: np.random.Generator, size=None):
    """Draw (G_hat, G_tilde) for LSF ``beta_s``; ``size`` prepends a batch axis."""
    shape = beta_s.shape if size is None else (size, *beta_s.shape)
    amp = np.sqrt(beta_s)
    h = complex_normal(rng, shape)
    h_err = complex_normal(rng, shape)
    return math.sqrt(1.0 - alpha) * amp * h, math.sqrt(alpha) * amp * h_err


def draw_channel(lsf: LsfMatrix, scheduled, mask, cfg: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    scheduled = np.asarray(scheduled)
    beta_s = lsf.beta[:, scheduled]
    G_hat, G_tilde = draw_estimate_and_error(beta_s, cfg.alpha, rng)
    return ChannelSet(
        G=G_hat + G_tilde,
        G_hat=G_hat,
        G_tilde=G_tilde,
        mask=np.asarray(mask),
        scheduled_ues=scheduled,
        beta_s=beta_s,
    )
