import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustcf import ConfigError, ExperimentConfig, SystemConfig, emit_csv, read_csv, run_drop, run_sweep
from robustcf import cli
from robustcf.harness import (
    CSV_HEADER,
    OUTPUT_DIR_ENV,
    SweepResult,
    apply_overrides,
    config_items,
    drop_rng,
    format_csv,
    load_config,
    manifest_path,
    parse_config_text,
    resolve_output,
)

SMOKE = SystemConfig(L=4, N=2, K=16, n=4)


def smoke(**kw):
    base = dict(system=SMOKE, snr_grid_db=(0.0, 10.0), n_drops=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_run_drop_is_deterministic():
    cfg = smoke()
    a = run_drop(cfg, (1, 0), 2)
    b = run_drop(cfg, (1, 0), 2)
    assert a.keys() == b.keys()
    for k in a:
        assert a[k].sum_rate == b[k].sum_rate
        assert a[k].iterations == b[k].iterations


def test_run_drop_respects_precoder_filter():
    res = run_drop(smoke(precoders=("zf",)), (0, 0), 0)
    assert list(res) == ["zf"]


def test_different_trials_give_different_drops():
    cfg = smoke()
    assert run_drop(cfg, (0, 0), 0)["mmse"].sum_rate != run_drop(cfg, (0, 0), 1)["mmse"].sum_rate


def test_minimal_sweep_has_one_row_per_precoder():
    cfg = smoke(snr_grid_db=(5.0,), n_drops=1)
    result = run_sweep(cfg)
    assert [r.precoder for r in result.rows] == list(cfg.precoders)
    assert all(r.std_err == 0.0 for r in result.rows)


def test_aggregate_matches_recomputed_drops():
    cfg = smoke(snr_grid_db=(10.0,), n_drops=4)
    result = run_sweep(cfg)
    for row in result.rows:
        rates = [run_drop(cfg, (0, 0), t)[row.precoder].sum_rate for t in range(cfg.n_drops)]
        assert row.mean_sum_rate == pytest.approx(np.mean(rates), rel=1e-14)
        assert row.std_err == pytest.approx(np.std(rates, ddof=1) / math.sqrt(len(rates)), rel=1e-12)
        assert row.mean_sum_rate >= 0 and row.std_err >= 0


def test_rows_cover_grid_in_order():
    cfg = smoke(alpha_grid=(0.1, 0.3), n_drops=2)
    rows = run_sweep(cfg).rows
    keys = [(r.snr_db, r.alpha, r.precoder) for r in rows]
    assert keys == [(s, a, p) for s in cfg.snr_grid_db for a in cfg.alpha_grid for p in cfg.precoders]


def test_skipped_accounting_sums_to_n_drops():
    cfg = smoke(n_drops=4)
    m = run_sweep(cfg).manifest
    cells = {k.rsplit(".", 1)[0] for k in m if k.startswith("cell.")}
    assert len(cells) == len(cfg.snr_grid_db) * len(cfg.precoders)
    for c in cells:
        assert int(m[c + ".recorded"]) + int(m[c + ".skipped"]) == cfg.n_drops


def test_precoder_failures_are_skipped_not_raised(monkeypatch):
    from robustcf import harness
    from robustcf.precoding import RankDeficientChannelError

    def broken(*a, **k):
        raise RankDeficientChannelError("forced")

    monkeypatch.setattr(harness, "zf_precoder", broken)
    cfg = smoke(n_drops=2, snr_grid_db=(0.0,))
    res = run_drop(cfg, (0, 0), 0)
    assert "forced" in res["zf"].skipped and res["zf"].sum_rate is None
    assert res["mmse"].skipped is None
    result = run_sweep(cfg)
    assert result.manifest["cell.snr=0.0.alpha=0.15.zf.skipped"] == "2"
    assert result.manifest["cell.snr=0.0.alpha=0.15.zf.recorded"] == "0"
    assert [r.precoder for r in result.rows] == ["mmse", "robust"]


def test_results_independent_of_worker_count():
    cfg = smoke(n_drops=3)
    assert format_csv(run_sweep(cfg, workers=1)) == format_csv(run_sweep(cfg, workers=2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**64 - 1), st.lists(st.tuples(st.integers(0, 20), st.integers(0, 5), st.integers(0, 500)),
                                           min_size=2, max_size=6, unique=True))
def test_substreams_are_disjoint(seed, points):
    firsts = {drop_rng(seed, p[:2], p[2]).integers(0, 2**63) for p in points}
    assert len(firsts) == len(points)


def test_empty_result_writes_header_only(tmp_path):
    path = emit_csv(SweepResult([], {"master_seed": "0"}), tmp_path / "e.csv")
    assert path.read_bytes() == (",".join(CSV_HEADER) + "\n").encode()
    assert read_csv(path) == []


def test_csv_round_trip_is_exact(tmp_path):
    result = run_sweep(smoke())
    path = emit_csv(result, tmp_path / "r.csv")
    assert read_csv(path) == result.rows
    raw = path.read_bytes()
    assert b"\r" not in raw


def test_manifest_echoes_config_and_seed(tmp_path):
    cfg = smoke(master_seed=77)
    path = emit_csv(run_sweep(cfg), tmp_path / "r.csv")
    text = manifest_path(path).read_text()
    assert "master_seed=77\n" in text
    assert "system.L=4\n" in text
    assert "code_version=" in text
    # the echo parses back into the same config
    echo = {k: v for k, v in parse_config_text(text).items() if not k.startswith("cell.") and k != "code_version"}
    assert apply_overrides(ExperimentConfig(), echo) == cfg


def test_reruns_are_byte_identical(tmp_path):
    cfg = smoke()
    a = emit_csv(run_sweep(cfg), tmp_path / "a" / "r.csv")
    b = emit_csv(run_sweep(cfg), tmp_path / "b" / "r.csv")
    assert a.read_bytes() == b.read_bytes()
    assert manifest_path(a).read_bytes() == manifest_path(b).read_bytes()


def test_unwritable_path_raises_with_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="cannot write"):
        emit_csv(SweepResult([], {}), blocker / "sub" / "r.csv")


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# smoke\nsystem.L = 4\nsystem.N=2\nsystem.K=16\nsystem.n=4\nsnr_grid_db=0,5\n"
                 "robust.lambda_rule=signal_offset\nprecoders=zf,mmse\n")
    cfg = load_config(p, {"n_drops": "7"})
    assert cfg.system.M == 8 and cfg.n_drops == 7
    assert cfg.snr_grid_db == (0.0, 5.0)
    assert cfg.robust.lambda_rule == "signal_offset"
    assert cfg.precoders == ("zf", "mmse")


def test_manifest_reloads_as_config(tmp_path):
    cfg = smoke(master_seed=5)
    path = emit_csv(run_sweep(cfg), tmp_path / "r.csv")
    assert load_config(manifest_path(path)) == cfg


def test_readme_config_example(tmp_path):
    text = Path(__file__).resolve().parents[1].joinpath("README.md").read_text()
    block = text.split("# smoke run\n", 1)[1].split("```", 1)[0]
    p = tmp_path / "smoke.cfg"
    p.write_text(block)
    cfg = load_config(p)
    assert cfg.system.M == 8 and cfg.n_drops == 50 and cfg.snr_grid_db == (0.0, 5.0, 10.0, 15.0, 20.0)


def test_config_items_round_trip():
    cfg = smoke(alpha_grid=(0.0, 0.2))
    assert apply_overrides(ExperimentConfig(), dict(config_items(cfg))) == cfg


@pytest.mark.parametrize("overrides", [
    {"n_drops": "0"},
    {"snr_grid_db": ""},
    {"snr_grid_db": "0,inf"},
    {"alpha_grid": "1.0"},
    {"precoders": "zf,magic"},
    {"system.bogus": "1"},
    {"bogus": "1"},
    {"system.L": "four"},
    {"system.n": "999"},
    {"robust.i_max": "0"},
    {"robust.lambda_rule": "other"},
    {"master_seed": "-1"},
])
def test_invalid_config_rejected(overrides):
    with pytest.raises(ConfigError):
        apply_overrides(ExperimentConfig(), overrides)


def test_malformed_config_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("n_drops=3\nnot a pair\n")


def test_output_env_only_affects_relative_paths(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert resolve_output("r/s.csv") == tmp_path / "r" / "s.csv"
    assert resolve_output("/abs/s.csv") == Path("/abs/s.csv")
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    assert resolve_output("r/s.csv") == Path("r/s.csv")


SMOKE_ARGS = ["-s", "system.L=4", "-s", "system.N=2", "-s", "system.K=16", "-s", "system.n=4",
              "-s", "n_drops=2", "-s", "snr_grid_db=0,10"]


def test_cli_sweep_writes_csv(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert cli.main(["sweep", *SMOKE_ARGS, "-o", "out.csv"]) == cli.EXIT_OK
    rows = read_csv(tmp_path / "out.csv")
    assert len(rows) == 6
    assert (tmp_path / "out.manifest.txt").exists()


def test_cli_config_error_exit_code(capsys):
    assert cli.main(["sweep", "-s", "system.L=0"]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert cli.main(["flops", "-s", "nonsense"]) == cli.EXIT_CONFIG


def test_cli_missing_config_file_is_io_error(tmp_path):
    assert cli.main(["flops", "-c", str(tmp_path / "missing.cfg")]) == cli.EXIT_IO


def test_cli_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["sweep", *SMOKE_ARGS, "-o", str(blocker / "r.csv")]) == cli.EXIT_IO


def test_cli_drop_and_grid_bounds(capsys):
    assert cli.main(["drop", *SMOKE_ARGS, "--snr-index", "1", "--trial", "3"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "snr_db=10.0" in out and "robust" in out
    assert cli.main(["drop", *SMOKE_ARGS, "--snr-index", "9"]) == cli.EXIT_CONFIG


def test_cli_flops_table(capsys):
    assert cli.main(["flops", "--n", "4", "16"]) == cli.EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[1] == "n,zf,mmse,robust"
    n16 = [float(x) for x in lines[3].split(",")]
    assert n16[0] == 16 and n16[3] == pytest.approx(5 * n16[2])
