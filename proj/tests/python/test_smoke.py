"""End-to-end smoke checks for the Python bindings and the CLI binary."""

import math
import os
import subprocess
import tempfile

import pytest

import mmaf


def test_version_string():
    assert isinstance(mmaf.__version__, str) and mmaf.__version__


def test_grid_and_driving_paths():
    grid = mmaf.make_grid(1.0, 100)
    assert grid.steps == 100
    assert grid.dt == pytest.approx(0.01)
    assert grid.time(100) == 1.0
    assert grid.index_of(0.25) == 25
    assert grid.index_of(0.2501) is None

    ens = mmaf.sample_driving(-3, 3, grid, 7, 0)
    assert ens.index_lo == -3 and ens.index_hi == 3
    for k in range(-3, 4):
        path = ens.path(k)
        assert len(path) == 101
        assert path[0] == float(k)
    assert not ens.contains(4)

    # Counter-based streams: resampling reproduces every value bit for bit.
    again = mmaf.sample_driving(-3, 3, grid, 7, 0)
    for k in range(-3, 4):
        assert again.path(k) == ens.path(k)


def test_flow_map_ordering_and_mass():
    grid = mmaf.make_grid(1.0, 200)
    ens = mmaf.sample_driving(-5, 5, grid, 12345, 3)
    fl = mmaf.apply_flow_map(ens, mmaf.IndexInterval(-5, 5), mmaf.Variant.full)

    # Ordering is preserved at every grid point.
    for i in range(0, 201, 20):
        xs = [fl.position(k, i) for k in range(-5, 6)]
        assert xs == sorted(xs)

    # Masses count merged particles and never exceed the domain size.
    distinct = len({fl.position(k, 200) for k in range(-5, 6)})
    assert 1 <= distinct <= 11
    for k in range(-5, 6):
        m = mmaf.mass_at(fl, k, 1.0)
        assert 1 <= m <= 11
        qv = mmaf.quadratic_variation(fl, k, 1.0)
        assert 0.0 < qv <= 1.0 + 1e-12

    # Merge events carry consistent member intervals.
    for ev in fl.events:
        assert ev.left_members.hi + 1 == ev.right_members.lo
        assert ev.new_mass >= ev.left_members.size() + ev.right_members.size()


def test_occupation_functionals():
    with pytest.raises(Exception):
        mmaf.make_grid(0.0, 1)  # degenerate horizon is rejected

    grid = mmaf.make_grid(0.25, 50)
    ens = mmaf.sample_driving(-4, 8, grid, 99, 1)
    fl = mmaf.apply_flow_map(ens, mmaf.IndexInterval(-4, 8), mmaf.Variant.full)

    # At t = 0 every particle sits at its own integer, one per cell.
    sample = mmaf.occupation_sample(fl, 0, 4, 0.0, "one")
    assert sample.values == [1.0] * 5
    assert mmaf.occupation_count(fl, -0.5, 4.5, 0.0) == 5

    # sin(2 pi k) vanishes at integers.
    s2 = mmaf.occupation_sample(fl, 0, 4, 0.0, "sin2pi")
    assert all(v == 0.0 for v in s2.values)

    # clt_statistic matches its definition.
    y = mmaf.clt_statistic(sample, 5, 1.0)
    assert y == pytest.approx(0.0, abs=1e-15)

    assert mmaf.sigma_series(2.0, [0.5, -0.25], 2) == pytest.approx(2.5)


def test_gap_events_and_exact_probability():
    assert mmaf.exact_gap_prob(0, 1.0) == pytest.approx(0.1466314963084, abs=1e-10)

    grid = mmaf.make_grid(1.0, 64)
    hits_stored = 0
    hits_streamed = 0
    for rep in range(40):
        ens = mmaf.sample_driving(-2, 4, grid, 424242, rep)
        a = mmaf.gap_event(ens, 0, 1, 1.0, mmaf.Side.plus, True)
        b = mmaf.gap_event_streamed(424242, rep, grid, 0, 1, mmaf.Side.plus, True)
        assert a == b
        hits_stored += a
        hits_streamed += b
    assert hits_stored == hits_streamed


def test_run_clt_deterministic_across_workers():
    cfg = mmaf.ExperimentConfig()
    cfg.T = 0.25
    cfg.M = 20
    cfg.n = 8
    cfg.reps = 60
    cfg.k_max = 3
    cfg.master_seed = 2024

    cfg.workers = 1
    rep1 = mmaf.run_clt(cfg)
    cfg.workers = 2
    rep2 = mmaf.run_clt(cfg)

    assert len(rep1.Y) == 60
    assert rep1.Y == rep2.Y  # bitwise identical regardless of worker count
    assert abs(sum(rep1.Y)) < 1e-9  # exact centering
    assert rep1.var_Y.reps == 60
    assert math.isfinite(rep1.sigma_value)


def test_run_gap_probabilities_bridged():
    cfg = mmaf.ExperimentConfig()
    cfg.reps = 800
    cfg.master_seed = 77
    cfg.bridge = True
    rows = mmaf.run_gap_probabilities(cfg, [mmaf.GapCase(0, 1.0, 64)])
    assert len(rows) == 1
    row = rows[0]
    assert row.exact == pytest.approx(0.1466314963084, abs=1e-10)
    assert abs(row.est_coarse - row.exact) < 4.0 * row.se_coarse
    assert abs(row.est_fine - row.exact) < 4.0 * row.se_fine


def test_run_coupling_agrees():
    cfg = mmaf.ExperimentConfig()
    cfg.T = 0.25
    cfg.M = 50
    cfg.reps = 150
    cfg.master_seed = 5150
    report = mmaf.run_coupling(cfg, 1)
    assert len(report.rows) == 4  # 2 sides x width 1 x particle offsets {0,1}
    for row in report.rows:
        assert row.agreements == row.occurrences


def cli_binary():
    path = os.environ.get("MMAF_CLI")
    if not path or not os.path.exists(path):
        pytest.skip("MMAF_CLI not set; CLI smoke check needs the built binary")
    return path


def test_cli_reproducible_report():
    exe = cli_binary()
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "clt.csv")
        args = [
            exe, "clt", "--seed", "321", "--reps", "40", "--M", "20",
            "--T", "0.25", "--n", "8", "--kmax", "3",
            "--workers", "2", "--out", out,
        ]
        subprocess.run(args, check=True, capture_output=True, text=True)
        with open(out, "rb") as fh:
            first = fh.read()
        assert first.startswith(b"rep,Y\n")
        assert os.path.exists(out + ".manifest.json")

        subprocess.run(args, check=True, capture_output=True, text=True)
        with open(out, "rb") as fh:
            second = fh.read()
        assert first == second
