"""Quantum-jump trajectories: determinism, analytics, segmentation."""

import io
import json

import numpy as np
import pytest
from numpy.random import SeedSequence, default_rng

from conftest import make_config, sup_of
from nscheme.dynamics import evolve
from nscheme.errors import MotionUnsupported, NoJumps, ZeroFluorescence
from nscheme.mcwf import (
    TrajectoryRecord,
    bright_dark_statistics,
    default_dark_threshold,
    ensemble_populations,
    photon_records_to_csv,
    run_trajectory,
    statistics_to_json,
)
from nscheme.model import pure_state


def test_trajectories_are_deterministic():
    c = make_config()
    a = run_trajectory(c, "S", 30.0, 42)
    b = run_trajectory(c, "S", 30.0, 42)
    assert np.array_equal(a.jump_times, b.jump_times)
    assert a.jump_channels == b.jump_channels
    other = run_trajectory(c, "S", 30.0, 43)
    assert not np.array_equal(a.jump_times, other.jump_times)


def test_no_drive_no_jumps():
    c = make_config(ob=0.0, orr=0.0, oc=0.0, gq=0.0)
    rec = run_trajectory(c, "S", 100.0, 1)
    assert rec.jump_times.size == 0
    assert len(rec.jump_channels) == 0


def test_bare_metastable_decay_time_is_analytic():
    """One undriven decay: the jump time inverts the first uniform draw."""
    gamma = 0.05
    c = make_config(ob=0.0, orr=0.0, oc=0.0, gq=gamma)
    rec = run_trajectory(c, "Q", 400.0, 7)
    u0 = default_rng(SeedSequence(7)).random()
    assert rec.jump_times.size == 1
    assert tuple(rec.jump_channels) == ("Q->S",)
    assert rec.jump_times[0] == pytest.approx(-np.log(u0) / gamma, rel=1e-6)


def test_jump_times_sorted_and_in_range():
    c = make_config()
    rec = run_trajectory(c, "S", 40.0, 3)
    assert rec.jump_times.size > 50
    assert np.all(np.diff(rec.jump_times) > 0)
    assert rec.jump_times[0] > 0.0
    assert rec.jump_times[-1] <= 40.0
    assert set(rec.jump_channels) <= {"P->S", "P->D", "Q->S"}


def test_sampled_states_are_normalized():
    c = make_config()
    sample = np.linspace(0.0, 20.0, 11)
    rec = run_trajectory(c, "S", 20.0, 5, sample_times=sample)
    assert len(rec.sampled_states) == 11
    stamps = np.array([t for t, _ in rec.sampled_states])
    states = np.array([s for _, s in rec.sampled_states])
    assert np.array_equal(stamps, sample)
    assert states.shape == (11, 4)
    norms = np.linalg.norm(states, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-9


def test_motion_unsupported():
    with pytest.raises(MotionUnsupported):
        run_trajectory(make_config(motion=True), "S", 1.0, 0)
    with pytest.raises(MotionUnsupported):
        ensemble_populations(make_config(motion=True), "S", np.linspace(0, 1, 2), 2, 0)


def test_ensemble_tracks_master_equation():
    # Rare-jump components are missed entirely by a small sample, which
    # collapses the naive standard error; floor it at the binomial scale
    # of one event so the z-test stays meaningful.
    c = make_config()
    t_grid = np.linspace(0.0, 50.0, 11)
    n = 200
    trace = ensemble_populations(c, "S", t_grid, n, 2026)
    exact = evolve(sup_of(c), pure_state("S"), t_grid).populations
    se = np.maximum(trace.standard_errors, 1.0 / n)
    z = np.abs(trace.populations - exact) / se
    assert z.max() < 5.0


def test_ensemble_is_deterministic_per_seed():
    c = make_config()
    t_grid = np.linspace(0.0, 10.0, 3)
    a = ensemble_populations(c, "S", t_grid, 4, 11)
    b = ensemble_populations(c, "S", t_grid, 4, 11)
    assert np.array_equal(a.populations, b.populations)


def test_single_trajectory_ensemble_has_zero_errors():
    c = make_config()
    trace = ensemble_populations(c, "S", np.linspace(0.0, 5.0, 3), 1, 0)
    assert np.all(trace.standard_errors == 0.0)


def test_default_dark_threshold_frozen():
    thr = default_dark_threshold(make_config())
    assert thr == pytest.approx(12.542318043947526, rel=1e-9)


def test_default_dark_threshold_requires_fluorescence():
    # With the B drive off the bright manifold drains into S, so the
    # reference steady state emits nothing.
    with pytest.raises(ZeroFluorescence):
        default_dark_threshold(make_config(ob=0.0, orr=2.5, oc=0.05))


def _synthetic_record():
    # 1000 photons at 0.1 us spacing, a 1000 us gap, 1000 more photons
    first = 0.1 * np.arange(1000)
    second = first[-1] + 1000.0 + 0.1 * np.arange(1000)
    times = np.concatenate([first, second])
    return TrajectoryRecord(seed=0, t_max=float(times[-1]) + 1.0,
                            jump_times=times,
                            jump_channels=["P->S"] * times.size,
                            sampled_states=None)


def test_bright_dark_segmentation():
    stats = bright_dark_statistics([_synthetic_record()], 10.0)
    assert stats.n_bright == 2
    assert stats.n_dark == 1
    assert stats.mean_bright_photons == pytest.approx(1000.0)
    assert stats.se_bright_photons == pytest.approx(0.0, abs=1e-9)
    assert stats.mean_dark_duration == pytest.approx(1000.0, rel=1e-9)
    assert stats.threshold == 10.0


def test_threshold_above_all_gaps_means_one_bright_period():
    stats = bright_dark_statistics([_synthetic_record()], 2000.0)
    assert stats.n_bright == 1
    assert stats.n_dark == 0
    assert stats.mean_bright_photons == pytest.approx(2000.0)


def test_statistics_require_photons():
    rec = TrajectoryRecord(seed=0, t_max=1.0, jump_times=np.array([]),
                           jump_channels=[], sampled_states=None)
    with pytest.raises(NoJumps):
        bright_dark_statistics([rec], 1.0)


def test_photon_csv_format():
    c = make_config()
    rec = run_trajectory(c, "S", 5.0, 9)
    buf = io.StringIO()
    photon_records_to_csv([rec, rec], buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "trajectory_id,jump_time_us,channel"
    assert len(lines) == 1 + 2 * rec.jump_times.size
    tid, t, ch = lines[1].split(",")
    assert tid == "0"
    assert float(t) == pytest.approx(rec.jump_times[0])
    assert ch in ("P->S", "P->D", "Q->S")


def test_statistics_json_keys():
    stats = bright_dark_statistics([_synthetic_record()], 10.0)
    data = json.loads(statistics_to_json(stats))
    assert set(data) == {
        "mean_bright_photons", "se_bright_photons", "mean_dark_duration_us",
        "se_dark_duration_us", "n_bright", "n_dark", "dark_threshold_us",
    }
