import json
import logging
import math

import pytest

from support import BOX, box_grid, bus, car, frames_trace
from zoneclust.cli import main
from zoneclust.runner import (
    SWEEP_COLUMNS,
    TICK_COLUMNS,
    ConfigError,
    RunConfig,
    emit_plot_series,
    execute,
    grid_for,
    read_sweep_csv,
    read_ticks_csv,
    run,
    sweep,
    weight_grid,
)
from zoneclust.state import WeightVector
from zoneclust.synth import SynthSpec, synth_trace
from zoneclust.trace import dumps


@pytest.fixture
def trace_file(tmp_path):
    path = tmp_path / "trace.txt"
    path.write_text(dumps(synth_trace(SynthSpec(duration_s=20), seed=7)))
    return path


def test_weight_grid_enumeration():
    ws = weight_grid()
    oracle = {(a, b, 10 - a - b) for a in range(11) for b in range(11) if a + b <= 10}
    assert len(ws) == len(oracle) == 66
    assert {tuple(round(x * 10) for x in w.as_tuple()) for w in ws} == oracle
    assert all(math.isclose(sum(w.as_tuple()), 1.0, abs_tol=1e-9) for w in ws)
    assert WeightVector(0.0, 0.0, 1.0) in ws
    assert WeightVector(0.9, 0.1, 0.0) in ws


def test_config_round_trip(tmp_path):
    cfg = RunConfig(trace="t.txt", window=[1601, 1660], lambda_=3, rsus=[{"lat": 43.87, "long": -79.45}])
    path = tmp_path / "c.json"
    path.write_text(cfg.dumps())
    assert RunConfig.load(path) == cfg
    assert json.loads(cfg.dumps())["lambda"] == 3


@pytest.mark.parametrize(
    "data",
    [
        {"alpah": 0.5},
        {"window": [10, 5]},
        {"weights": [0.5, 0.5, 0.5]},
        {"lambda": 0},
        {"rsus": [{"lat": 1.0}]},
        {"alpha": -1},
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_alpha_outside_guidance_warns(caplog):
    t = frames_trace([[car("a", 0.0)]] * 2)
    with caplog.at_level(logging.WARNING):
        grid_for(t, RunConfig(alpha=0.8, bbox=BOX, pad_rows=0, pad_cols=0))
    assert "suggested" in caplog.text


def test_default_bbox_covers_trace():
    t = synth_trace(SynthSpec(duration_s=5), seed=1)
    g = grid_for(t, RunConfig())
    assert all(g.contains(r.loc) for s in t.snapshots for r in s.records)
    assert g.pad_rows == g.pad_cols == 2


def test_single_run_files(tmp_path, trace_file):
    cfg = RunConfig(trace=str(trace_file), out=str(tmp_path / "out"))
    rep = run(cfg)
    out = tmp_path / "out"
    body = json.loads((out / "report.json").read_text())
    assert body["vcsm"] == rep.vcsm
    assert body["config"]["weights"] == [0.6, 0.2, 0.2]
    rows = read_ticks_csv(out / "ticks.csv")
    assert (out / "ticks.csv").read_text().splitlines()[0] == ",".join(TICK_COLUMNS)
    assert rows == [(c.t, c.n_ch, c.n_sav, c.n_cm, c.components) for c in rep.ticks]


def test_ideal_pair_run_scores_one(tmp_path):
    frames = [[bus("b", 10.0 * k, ve=10.0), car("c", 10.0 * k + 20.0, ve=10.0)] for k in range(20)]
    t = frames_trace(frames)
    cfg = RunConfig(bbox=BOX, pad_rows=0, pad_cols=0, out=str(tmp_path))
    for w in ([0.6, 0.2, 0.2], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]):
        cfg.weights = w
        assert run(cfg, t).vcsm == 1.0


def test_larger_range_never_adds_components():
    t = synth_trace(SynthSpec(duration_s=59), seed=3)
    g = box_grid()
    narrow = execute(t, g, RunConfig(common_tr_m=100.0))
    wide = execute(t, g, RunConfig(common_tr_m=300.0))
    assert all(b.components <= a.components for a, b in zip(narrow.ticks, wide.ticks))


def test_repeat_runs_are_byte_identical(tmp_path, trace_file):
    files = ("report.json", "ticks.csv", "sweep.csv")
    cfg = RunConfig(trace=str(trace_file), out=str(tmp_path / "o"))
    run(cfg)
    first = [(tmp_path / "o" / f).read_bytes() for f in files]
    run(cfg)
    assert [(tmp_path / "o" / f).read_bytes() for f in files] == first


def test_window_applied(tmp_path, trace_file):
    rep = run(RunConfig(trace=str(trace_file), window=[5, 14], out=str(tmp_path)))
    assert len(rep.ticks) == 10
    assert rep.ticks[0].t == 0


def test_emit_empty_set(tmp_path):
    emit_plot_series([], tmp_path)
    assert (tmp_path / "sweep.csv").read_text() == ",".join(SWEEP_COLUMNS) + "\n"
    assert (tmp_path / "ticks.csv").read_text() == ",".join(TICK_COLUMNS) + "\n"


def test_sweep_outputs_and_round_trip(tmp_path):
    t = synth_trace(SynthSpec(duration_s=15), seed=2)
    cfg = RunConfig(sweep=True, out=str(tmp_path))
    rep = run(cfg, t)
    rows = read_sweep_csv(tmp_path / "sweep.csv")
    assert len(rows) == 66
    assert rows == [(*w.as_tuple(), r.vcsm) for w, r in rep.points]
    ticks_dir = tmp_path / "ticks"
    assert len(list(ticks_dir.iterdir())) == 66
    w0, r0 = rep.points[0]
    assert read_ticks_csv(next(ticks_dir.glob("w_0.00_0.00_1.00.csv"))) == [
        (c.t, c.n_ch, c.n_sav, c.n_cm, c.components) for c in r0.ticks
    ]
    body = json.loads((tmp_path / "report.json").read_text())["sweep"]
    vals = [r.vcsm for _, r in rep.points]
    assert body["quantiles"]["min"] == min(vals)
    assert body["quantiles"]["max"] == max(vals)
    best = body["best"]
    assert max(vals) == dict((tuple(w.as_tuple()), r.vcsm) for w, r in rep.points)[tuple(best)]


def test_parallel_sweep_matches_serial():
    t = synth_trace(SynthSpec(duration_s=10), seed=4)
    g = box_grid()
    serial = sweep(t, g, RunConfig())
    parallel = sweep(t, g, RunConfig(jobs=2))
    assert [r.vcsm for _, r in serial.points] == [r.vcsm for _, r in parallel.points]


# command line


def test_cli_synth_then_run(tmp_path, capsys):
    tr = tmp_path / "t.txt"
    assert main(["synth", "--out", str(tr), "--duration", "10", "--seed", "3"]) == 0
    out = tmp_path / "o"
    assert main(["run", "--trace", str(tr), "--out", str(out), "--weights", "0.2,0.3,0.5",
                 "--tr", "150", "--lambda", "3"]) == 0
    body = json.loads((out / "report.json").read_text())
    assert body["config"]["weights"] == [0.2, 0.3, 0.5]
    assert body["config"]["common_tr_m"] == 150.0
    assert body["config"]["lambda"] == 3
    assert "VCSM" in capsys.readouterr().out


def test_cli_flags_override_config(tmp_path, trace_file):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trace": str(trace_file), "alpha": 0.5, "seed": 4, "window": [0, 10]}))
    out = tmp_path / "o"
    rsu = "43.87,-79.45,500"
    assert main(["run", "--config", str(cfg), "--seed", "9", "--end", "8", "--rsu", rsu, "--out", str(out)]) == 0
    echo = json.loads((out / "report.json").read_text())["config"]
    assert echo["seed"] == 9
    assert echo["window"] == [0, 8]
    assert echo["rsus"] == [{"lat": 43.87, "long": -79.45, "tr": 500.0}]


@pytest.mark.parametrize(
    "argv, message",
    [
        (["run", "--trace", "missing.txt"], "cannot read trace"),
        (["run", "--trace", "x", "--start", "5"], "--start and --end"),
    ],
)
def test_cli_errors(argv, message, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert message in capsys.readouterr().err


def test_cli_rejects_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"tyop": 1}')
    assert main(["run", "--config", str(cfg)]) == 2
    assert "unknown config keys: tyop" in capsys.readouterr().err


def test_cli_rejects_bad_trace(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 a car 43.87 -79.45 1 0\n")
    assert main(["run", "--trace", str(bad), "--out", str(tmp_path)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_cli_bad_weights_exit_nonzero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--weights", "0.5,0.5,0.5"])
    assert exc.value.code != 0
