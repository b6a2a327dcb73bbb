"""
Watching the alternating updates
================================

Runs the robust precoder step by step and prints the gain h, the multiplier
lam, the objective and the relative precoder change after each iteration.
Two multiplier rules are shown side by side.
"""

import numpy as np

import robustcf as rc
from robustcf.precoding import RobustSettings, robust_init, robust_iterate

cfg = rc.SystemConfig(rho_f=10.0)
rng = np.random.default_rng(11)
layout = rc.generate_layout(cfg, rng)
lsf = rc.compute_lsf(layout, cfg, rng)
sched = rc.schedule_users(lsf, cfg)
mask = rc.select_aps(lsf.beta[:, sched], cfg)
ch = rc.draw_channel(lsf, sched, mask, cfg, rng)
psi = rc.error_covariance_psi(ch.beta_s, mask, cfg.alpha)
G = ch.G_hat_s
args = (G, psi, cfg.rho_f, cfg.sigma_w2, cfg.n, cfg.P_budget)

for rule in ("stationary", "signal_offset"):
    settings = RobustSettings(i_max=8, lambda_rule=rule)
    state = robust_init(*args, rule=rule)
    J0 = rc.mse_objective(state.P, state.h, G, psi.diag, cfg.rho_f, cfg.sigma_w2, cfg.n)
    print(f"\n{rule}: start  h={state.h:.4g}  lam={state.lam:+.4g}  J={J0:.5f}")
    for _ in range(settings.i_max):
        prev = state.P
        try:
            state = robust_iterate(state, *args, settings)
        except rc.PrecoderError as exc:
            print("   stopped:", exc)
            break
        J = rc.mse_objective(state.P, state.h, G, psi.diag, cfg.rho_f, cfg.sigma_w2, cfg.n)
        change = np.linalg.norm(state.P - prev) / np.linalg.norm(prev)
        print(f"   it {state.iteration}  h={state.h:.4g}  lam={state.lam:+.4g}  J={J:.5f}  change={change:.2e}")
