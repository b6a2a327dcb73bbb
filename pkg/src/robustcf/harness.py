"""Seeded Monte Carlo driver: drops, SNR/alpha sweeps, CSV and manifest output."""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import error_variance, flop_count, residual_covariance, sum_rate
from .network import (
    ConfigError,
    SystemConfig,
    compute_lsf,
    draw_channel,
    generate_layout,
    schedule_users,
    select_aps,
)
from .precoding import (
    PrecoderError,
    RobustSettings,
    error_covariance_psi,
    mmse_precoder,
    robust_precoder,
    zf_precoder,
)

log = logging.getLogger(__name__)

CSV_HEADER = ["snr_db", "alpha", "precoder", "mean_sum_rate", "std_err", "mean_iterations", "flops"]
PRECODERS = ("zf", "mmse", "robust")
OUTPUT_DIR_ENV = "ROBUSTCF_OUTPUT_DIR"


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    snr_grid_db: tuple[float, ...] = tuple(float(s) for s in range(0, 21, 2))
    alpha_grid: tuple[float, ...] = (0.15,)
    n_drops: int = 200
    precoders: tuple[str, ...] = PRECODERS
    robust: RobustSettings = field(default_factory=RobustSettings)
    output_path: str = "results/sweep.csv"
    master_seed: int = 0

    def validate(self) -> "ExperimentConfig":
        self.system.validate()
        if self.n_drops < 1:
            raise ConfigError("n_drops must be >= 1")
        if not self.snr_grid_db or not self.alpha_grid:
            raise ConfigError("SNR and alpha grids must be nonempty")
        if not all(math.isfinite(s) for s in self.snr_grid_db):
            raise ConfigError("SNR values must be finite")
        for a in self.alpha_grid:
            if not 0.0 <= a < 1.0:
                raise ConfigError(f"alpha {a} outside [0, 1)")
        bad = set(self.precoders) - set(PRECODERS)
        if bad or not self.precoders:
            raise ConfigError(f"unknown or empty precoder selection: {sorted(bad)}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        return self

    def system_at(self, snr_db: float, alpha: float) -> SystemConfig:
        """SNR = rho_f / sigma_w2 with sigma_w2 fixed to 1."""
        return replace(self.system, rho_f=10.0 ** (snr_db / 10.0), sigma_w2=1.0, alpha=alpha)


# -- flat key=value configuration ------------------------------------------------

def _coerce(kind, text: str):
    kind = str(kind)
    if "bool" in kind:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if "tuple[float" in kind:
        return tuple(float(x) for x in text.split(",") if x.strip())
    if "tuple[str" in kind:
        return tuple(x.strip() for x in text.split(",") if x.strip())
    if kind.startswith("int"):
        return int(text, 0)
    if kind.startswith("float"):
        return float(text)
    return text


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


def config_items(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Flatten a config into (key, text) pairs, e.g. ``("system.L", "16")``."""
    items = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in ("system", "robust"):
            items += [(f"{f.name}.{g.name}", _format(getattr(value, g.name))) for g in fields(value)]
        else:
            items.append((f.name, _format(value)))
    return items


def apply_overrides(cfg: ExperimentConfig, overrides: dict[str, str]) -> ExperimentConfig:
    top, nested = {}, {"system": {}, "robust": {}}
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    for key, text in overrides.items():
        head, _, tail = key.strip().partition(".")
        try:
            if tail and head in nested:
                sub = {g.name: g.type for g in fields(getattr(cfg, head))}
                if tail not in sub:
                    raise ConfigError(f"unknown config key {key!r}")
                nested[head][tail] = _coerce(sub[tail], text.strip())
            elif not tail and head in kinds and head not in nested:
                top[head] = _coerce(kinds[head], text.strip())
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    try:
        system = replace(cfg.system, **nested["system"])
        robust = replace(cfg.robust, **nested["robust"])
        return replace(cfg, system=system, robust=robust, **top).validate()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _manifest_only(key: str) -> bool:
    return key == "code_version" or key.startswith("cell.")


def load_config(path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Read a config file (a run manifest works too) and apply overrides on top."""
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    values = {k: v for k, v in values.items() if not _manifest_only(k)}
    values.update(overrides or {})
    return apply_overrides(ExperimentConfig(), values)


# -- drops -------------------------------------------------------------------------

@dataclass
class PrecoderResult:
    sum_rate: float | None
    iterations: int = 0
    skipped: str | None = None
    diagnostics: dict = field(default_factory=dict)


def drop_rng(master_seed: int, grid_point: tuple[int, int], trial: int) -> np.random.Generator:
    """Independent substream for (grid point, trial) spawned from the master seed."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(int(grid_point[0]), int(grid_point[1]), int(trial)))
    return np.random.default_rng(seq)


def run_drop(cfg: ExperimentConfig, grid_point: tuple[int, int], trial_index: int) -> dict[str, PrecoderResult]:
    """One channel drop at grid point (snr_index, alpha_index); every configured precoder sees it."""
    snr_db = cfg.snr_grid_db[grid_point[0]]
    alpha = cfg.alpha_grid[grid_point[1]]
    sys_cfg = cfg.system_at(snr_db, alpha)
    rng = drop_rng(cfg.master_seed, grid_point, trial_index)

    layout = generate_layout(sys_cfg, rng)
    lsf = compute_lsf(layout, sys_cfg, rng)
    scheduled = schedule_users(lsf, sys_cfg)
    mask = select_aps(lsf.beta[:, scheduled], sys_cfg)
    ch = draw_channel(lsf, scheduled, mask, sys_cfg, rng)
    psi = error_covariance_psi(ch.beta_s, mask, alpha)
    R_err = error_variance(ch.beta_s, mask, alpha)
    G = ch.G_hat_s
    rho, s2, n, Pb = sys_cfg.rho_f, sys_cfg.sigma_w2, sys_cfg.n, sys_cfg.P_budget

    results = {}
    for name in cfg.precoders:
        try:
            if name == "zf":
                out = zf_precoder(G, Pb)
            elif name == "mmse":
                out = mmse_precoder(G, rho, s2, n, Pb)
            else:
                out = robust_precoder(G, psi, rho, s2, n, Pb, cfg.robust)
            R = residual_covariance(out.P, R_err, rho, s2)
            rate = sum_rate(G, out.P, rho, R).sum_rate
        except (PrecoderError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.info("drop %s/%d: %s skipped (%s)", grid_point, trial_index, name, exc)
            results[name] = PrecoderResult(None, skipped=f"{type(exc).__name__}: {exc}")
            continue
        diag = {"h": out.h, "lam": out.lam, "clamped": lsf.n_clamped}
        if out.trace:
            diag["final_change"] = out.trace[-1].rel_change
            diag["jittered"] = any(r.jittered for r in out.trace)
        results[name] = PrecoderResult(rate, out.iterations_run, diagnostics=diag)
    return results


# -- sweeps ------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    alpha: float
    precoder: str
    mean_sum_rate: float
    std_err: float
    mean_iterations: float
    flops: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    manifest: dict[str, str]
    samples: dict = field(default_factory=dict, repr=False)


def _drop_job(args):
    cfg, gp, trial = args
    return run_drop(cfg, gp, trial)


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Full grid x n_drops; reduction always happens in (grid, trial) order."""
    cfg.validate()
    jobs = [
        (cfg, (si, ai), t)
        for si in range(len(cfg.snr_grid_db))
        for ai in range(len(cfg.alpha_grid))
        for t in range(cfg.n_drops)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            drops = list(pool.map(_drop_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        drops = [_drop_job(j) for j in jobs]

    M, n = cfg.system.M, cfg.system.n
    flops = {p: flop_count(p, M, n, cfg.robust.i_max).flops for p in cfg.precoders}
    rows, samples = [], {}
    manifest = dict(config_items(cfg))
    manifest["code_version"] = __version__
    it = iter(drops)
    for si, snr in enumerate(cfg.snr_grid_db):
        for ai, alpha in enumerate(cfg.alpha_grid):
            cell = [next(it) for _ in range(cfg.n_drops)]
            for p in cfg.precoders:
                rates = [d[p].sum_rate for d in cell if d[p].skipped is None]
                iters = [d[p].iterations for d in cell if d[p].skipped is None]
                skipped = cfg.n_drops - len(rates)
                samples[(snr, alpha, p)] = rates
                key = f"cell.snr={_format(snr)}.alpha={_format(alpha)}.{p}"
                manifest[f"{key}.recorded"] = str(len(rates))
                manifest[f"{key}.skipped"] = str(skipped)
                if not rates:
                    continue
                arr = np.asarray(rates)
                se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
                rows.append(SweepRow(snr, alpha, p, float(arr.mean()), se, float(np.mean(iters)), flops[p]))
    return SweepResult(rows, manifest, samples)


# -- output ------------------------------------------------------------------------

def _num(x: float) -> str:
    return format(float(x), ".17g")


def format_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in result.rows:
        writer.writerow([_num(r.snr_db), _num(r.alpha), r.precoder, _num(r.mean_sum_rate),
                         _num(r.std_err), _num(r.mean_iterations), _num(r.flops)])
    return buf.getvalue()


def format_manifest(manifest: dict[str, str]) -> str:
    return "".join(f"{k}={v}\n" for k, v in manifest.items())


def manifest_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".manifest.txt")


def resolve_output(path) -> Path:
    """Relative output paths are placed under $ROBUSTCF_OUTPUT_DIR when it is set."""
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    return Path(base) / p if base and not p.is_absolute() else p


def emit_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_csv(result))
        with open(manifest_path(path), "w", encoding="utf-8", newline="") as fh:
            fh.write(format_manifest(result.manifest))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results: {exc.strerror}", str(path)) from exc
    return path


def read_csv(path) -> list[SweepRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [SweepRow(float(a), float(b), c, float(d), float(e), float(f), float(g))
                for a, b, c, d, e, f, g in reader]
