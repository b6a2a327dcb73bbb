"""Robust downlink precoding for user-centric cell-free massive MIMO."""

__version__ = "0.1.0"

from .network import (  # noqa: E402
    ChannelSet,
    ConfigError,
    LsfMatrix,
    NetworkLayout,
    SystemConfig,
    compute_lsf,
    draw_channel,
    generate_layout,
    pathloss_db,
    schedule_users,
    select_aps,
)
from .evaluation import (  # noqa: E402
    FlopReport,
    NumericalError,
    RateReport,
    error_variance,
    flop_count,
    mse_objective,
    residual_covariance,
    sum_rate,
)
from .precoding import (  # noqa: E402
    ErrorStatistics,
    IndefiniteSystemError,
    PrecoderError,
    PrecoderOutput,
    RankDeficientChannelError,
    RobustSettings,
    error_covariance_psi,
    mmse_precoder,
    robust_init,
    robust_iterate,
    robust_precoder,
    stationarity_residual,
    zf_precoder,
)
from .harness import (  # noqa: E402
    ExperimentConfig,
    SweepResult,
    SweepRow,
    emit_csv,
    load_config,
    read_csv,
    run_drop,
    run_sweep,
)
