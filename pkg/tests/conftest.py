import numpy as np
import pytest

from robustcf import (
    SystemConfig,
    compute_lsf,
    draw_channel,
    error_covariance_psi,
    generate_layout,
    schedule_users,
    select_aps,
)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def make_drop(cfg, seed):
    """Layout -> LSF -> scheduling -> AP mask -> channel, the same chain the harness runs."""
    rng = np.random.default_rng(seed)
    layout = generate_layout(cfg, rng)
    lsf = compute_lsf(layout, cfg, rng)
    sched = schedule_users(lsf, cfg)
    mask = select_aps(lsf.beta[:, sched], cfg)
    ch = draw_channel(lsf, sched, mask, cfg, rng)
    psi = error_covariance_psi(ch.beta_s, mask, cfg.alpha)
    return ch, psi


@pytest.fixture
def default_cfg():
    return SystemConfig()


@pytest.fixture
def small_cfg():
    return SystemConfig(L=4, N=2, K=16, n=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
