import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlslab.dynamics import (
    EvolveOptions, detect_blowup, evolve, load_trajectory_csv, step_strang, write_trajectory,
)
from nlslab.grid import ComplexField, field_from_function, make_grid
from nlslab.groundstate import solve_stationary
from nlslab.model import KernelSpec, LocalNonlinearitySpec, ModelSpec, PotentialSpec

from conftest import gaussian

QUINTIC = ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, 2))


@given(m=st.integers(-6, 6), dt=st.floats(1e-3, 0.5))
def test_plane_wave_free_flow(m, dt):
    L = 2 * math.pi
    g = make_grid(1, L, 16)
    k0 = 2 * math.pi * m / L
    u = field_from_function(g, lambda x: np.exp(1j * k0 * x))
    out = step_strang(u, ModelSpec(1), dt)
    assert np.allclose(out.values, u.values * np.exp(-1j * k0**2 * dt), atol=1e-13)


def test_oscillator_ground_state_rotates():
    g = make_grid(2, 16, 64)
    u = gaussian(g, 1 / math.sqrt(math.pi))
    m = ModelSpec(2, PotentialSpec("harmonic", 1.0))
    log = evolve(u, m, 1.0, EvolveOptions(dt_init=1e-3, t_final=0.5, record_every=0.5))
    t = log.t_end
    assert np.max(np.abs(np.abs(log.final.values) - np.abs(u.values))) < 1e-6
    phase = log.final.values[32, 32] / u.values[32, 32]
    assert phase == pytest.approx(np.exp(-2j * t), abs=1e-6)


def test_cubic_constant_exact():
    g = make_grid(1, 10, 16)
    A, dt = 0.8, 0.37
    m = ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, 1))
    out = step_strang(ComplexField(g, np.full(16, A + 0j)), m, dt)
    assert np.max(np.abs(out.values - A * np.exp(1j * A * A * dt))) < 1e-15


def test_step_needs_positive_dt():
    g = make_grid(1, 10, 16)
    with pytest.raises(ValueError):
        step_strang(gaussian(g), ModelSpec(1), 0.0)


def test_free_gaussian(oracle):
    g = make_grid(1, 80, 2048)
    u0 = gaussian(g)
    log = evolve(u0, ModelSpec(1), 1.0, EvolveOptions(dt_init=0.05, t_final=1.0, record_every=0.25))
    assert log.outcome == "completed"
    assert abs(log.final.norm_sq() - u0.norm_sq()) <= 1e-12 * u0.norm_sq()
    assert np.abs(log.final.values).max() == pytest.approx(oracle["free_peak"]["peak"], abs=1e-6)
    # closed form: |u(0,t)| = (1 + 4t^2)^(-1/4)
    assert oracle["free_peak"]["peak"] == pytest.approx(5 ** -0.25, rel=1e-12)


def test_quintic_negative_energy_blows_up(oracle):
    g = make_grid(1, 20, 1024)
    u0 = field_from_function(g, lambda x: 2 * np.exp(-x * x))
    # M = 1024 resolves a gradient growth of about 80, so ask for 30
    o = EvolveOptions(dt_init=1e-3, t_final=1.0, adapt=True, adapt_tolerance=1e-6, blowup_gradient_factor=30)
    log = evolve(u0, QUINTIC, 1.0, o)
    assert log.records[0].energy == pytest.approx(oracle["quintic_energy"]["2.0"], rel=1e-8)
    assert log.outcome == "blowup_detected" and log.t_end < 1.0


def test_quintic_small_data_global():
    g = make_grid(1, 80, 512)
    u0 = field_from_function(g, lambda x: 0.1 * np.exp(-x * x))
    log = evolve(u0, QUINTIC, 1.0, EvolveOptions(dt_init=1e-2, t_final=10.0, record_every=0.5))
    assert log.outcome == "completed" and log.t_end >= 10 - 1e-12
    sig = [r.sigma_norm_sq for r in log.records]
    assert max(sig) <= 1.01 * sig[0]


def test_soliton_never_triggers():
    g = make_grid(1, 40, 256)
    m = ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, 1))
    w = solve_stationary(m, 1.0, grid=g).field
    log = evolve(w, m, 1.0, EvolveOptions(dt_init=2e-3, t_final=10.0, record_every=0.5))
    assert log.outcome == "completed"
    assert max(r.kinetic for r in log.records) <= 1.01 * log.records[0].kinetic


def test_linear_run_never_triggers():
    g = make_grid(1, 40, 256)
    log = evolve(gaussian(g), ModelSpec(1), 1.0,
                 EvolveOptions(dt_init=1e-2, t_final=5, blowup_gradient_factor=1.0001))
    assert log.outcome == "completed"


def test_detect_blowup_rules():
    o = EvolveOptions(blowup_gradient_factor=10, blowup_sigma_cap=100)
    assert detect_blowup(100.0, 1.0, 1.0, o)
    assert not detect_blowup(99.0, 1.0, 1.0, o)
    assert detect_blowup(1.0, 1.0, 100.0, o)


def test_step_underflow_reported():
    g = make_grid(1, 20, 256)
    u0 = field_from_function(g, lambda x: 2 * np.exp(-x * x))
    o = EvolveOptions(dt_init=1e-2, dt_min=5e-3, t_final=1.0, adapt=True, adapt_tolerance=1e-14)
    log = evolve(u0, QUINTIC, 1.0, o)
    assert log.outcome in ("step_underflow", "blowup_detected")
    assert log.t_end < 1.0 and log.rejected_steps > 0


@pytest.mark.parametrize("bad", [dict(dt_min=0), dict(dt_min=1, dt_init=0.1), dict(t_final=0),
                                 dict(blowup_gradient_factor=1), dict(record_every=-1)])
def test_options_validated(bad):
    with pytest.raises(ValueError):
        EvolveOptions(**bad)


@given(record=st.sampled_from([0.03, 0.1, 0.07]), T=st.floats(0.05, 0.5))
def test_log_invariants(record, T):
    g = make_grid(1, 20, 128)
    m = ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, 1), kernel=KernelSpec("gaussian", 0.5))
    log = evolve(gaussian(g, 0.7), m, 1.0, EvolveOptions(dt_init=1e-2, t_final=T, record_every=record))
    ts = [r.t for r in log.records]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    assert (log.outcome == "completed") == (log.t_end >= T - 1e-12)
    assert ts[-1] == pytest.approx(log.t_end)


def test_mass_conserved_with_everything_on():
    g = make_grid(2, 12, 64)
    m = ModelSpec(2, PotentialSpec("harmonic", 1.0), LocalNonlinearitySpec.power(1.0, 0.4), KernelSpec("gaussian", 1.0))
    log = evolve(gaussian(g, 1.5), m, 1.0, EvolveOptions(dt_init=1e-2, t_final=1.0, record_every=0.1))
    masses = [r.mass_sq for r in log.records]
    assert (max(masses) - min(masses)) / masses[0] <= 1e-11


def test_trajectory_files(tmp_path):
    g = make_grid(1, 20, 64)
    log = evolve(gaussian(g), ModelSpec(1), 1.0, EvolveOptions(dt_init=0.05, t_final=0.2, record_every=0.1),
                 keep_snapshots=True)
    files = write_trajectory(log, tmp_path, "demo")
    names = sorted(p.name for p in files)
    assert names == ["demo_t0.000000.nlsf", "demo_t0.100000.nlsf", "demo_t0.200000.nlsf", "demo_traj.csv"]
    rows = load_trajectory_csv(tmp_path / "demo_traj.csv")
    assert [r["t"] for r in rows] == [0.0, 0.1, 0.2]
    assert rows[1]["kinetic"] == log.records[1].kinetic
