"""
One drop, three precoders
=========================

Builds a single user-centric network, draws an imperfect channel estimate and
compares ZF, MMSE and the robust design on it.
"""

import numpy as np

import robustcf as rc

cfg = rc.SystemConfig(rho_f=10.0)  # 10 dB link SNR, alpha = 0.15
rng = np.random.default_rng(3)

# geometry and large-scale fading
layout = rc.generate_layout(cfg, rng)
lsf = rc.compute_lsf(layout, cfg, rng)
print("APs x antennas:", cfg.L, "x", cfg.N, "-> M =", cfg.M)

# pick the strongest n users, then let each AP serve the ones it hears well
sched = rc.schedule_users(lsf, cfg)
mask = rc.select_aps(lsf.beta[:, sched], cfg)
print("scheduled UEs:", sched)
print("serving antennas per UE:", mask.sum(axis=0))

ch = rc.draw_channel(lsf, sched, mask, cfg, rng)
psi = rc.error_covariance_psi(ch.beta_s, mask, cfg.alpha)
err_var = rc.error_variance(ch.beta_s, mask, cfg.alpha)

G = ch.G_hat_s
outs = {
    "zf": rc.zf_precoder(G, cfg.P_budget),
    "mmse": rc.mmse_precoder(G, cfg.rho_f, cfg.sigma_w2, cfg.n, cfg.P_budget),
    "robust": rc.robust_precoder(G, psi, cfg.rho_f, cfg.sigma_w2, cfg.n, cfg.P_budget),
}

# the rate bound treats the estimation error as extra noise
for name, out in outs.items():
    R = rc.residual_covariance(out.P, err_var, cfg.rho_f, cfg.sigma_w2)
    rate = rc.sum_rate(G, out.P, cfg.rho_f, R).sum_rate
    print(f"{name:6s}  sum rate {rate:7.3f} bit/s/Hz  power {out.power:.12f}")
