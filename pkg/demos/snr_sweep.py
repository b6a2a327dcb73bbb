"""
Sum rate against SNR
====================

A reduced sweep (fewer drops than the default) that prints a text table of the
mean sum-rate bound per precoder, plus the analytic operation counts.
Set n_drops=200 to get the full-size curves.
"""

import robustcf as rc

cfg = rc.ExperimentConfig(n_drops=20, snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0))
result = rc.run_sweep(cfg)

print("snr_db " + " ".join(f"{p:>16s}" for p in cfg.precoders))
for snr in cfg.snr_grid_db:
    cells = [r for r in result.rows if r.snr_db == snr]
    print(f"{snr:6.1f} " + " ".join(f"{r.mean_sum_rate:8.3f} +- {r.std_err:5.2f}" for r in cells))

# operation counts do not depend on the drop, only on M and n
M, n = cfg.system.M, cfg.system.n
for p in cfg.precoders:
    print(f"{p:6s} {rc.flop_count(p, M, n, cfg.robust.i_max).flops:12.0f} flops")
