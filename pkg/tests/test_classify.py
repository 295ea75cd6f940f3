import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlslab.classify import (
    PREDICTIONS, SET_LABELS, TABLE_COLUMNS, classify_initial_data, cross_label, dichotomy_experiment,
    monitor_invariance, quadratic_phase, table_header,
)
from nlslab.dynamics import EvolveOptions, evolve
from nlslab.functionals import diagnostics
from nlslab.grid import ComplexField, field_from_function, make_grid
from nlslab.groundstate import solve_stationary
from nlslab.hypotheses import check_hypotheses
from nlslab.model import KernelSpec, LocalNonlinearitySpec, ModelSpec, PotentialSpec
from nlslab.thresholds import SearchOptions, estimate_d_I, estimate_d_II

from conftest import gaussian

HARM_CUBIC = ModelSpec(1, PotentialSpec("harmonic", 1.0), LocalNonlinearitySpec.power(1.0, 3))
FREE_CUBIC = ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, 3))
GRID = make_grid(1, 16, 128)


@pytest.fixture(scope="module")
def harm():
    d = estimate_d_II(HARM_CUBIC, GRID, 1.0, SearchOptions(n_perturb=2, refine_steps=40))
    w = solve_stationary(HARM_CUBIC, 1.0, grid=GRID).field
    return d, w


def test_quintic_negative_energy_predicts_blowup():
    g = make_grid(1, 20, 512)
    m = ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, 2))
    rep = classify_initial_data(m, field_from_function(g, lambda x: 2 * np.exp(-x * x)), 1.0)
    assert rep.prediction == "blowup" and rep.route == "virial_blowup"
    assert rep.values["energy"] < 0


def test_subcritical_model_predicts_global():
    g = make_grid(2, 16, 64)
    m = ModelSpec(2, PotentialSpec("harmonic", 1.0), LocalNonlinearitySpec.power(1.0, 0.4), KernelSpec("gaussian", 1.0))
    rep = classify_initial_data(m, gaussian(g, 2.0), 1.0)
    assert rep.prediction == "global" and rep.route == "global_subcritical"


def test_half_ground_state_is_R_plus(harm):
    d, w = harm
    rep = classify_initial_data(HARM_CUBIC, w * 0.5, 1.0, {"d_II": d})
    assert (rep.set_label, rep.prediction, rep.route) == ("R_plus", "global", "threshold_cross")


def test_scaled_ground_state_is_K(harm):
    d, w = harm
    neg = classify_initial_data(HARM_CUBIC, w * 1.2, 1.0, {"d_II": d})
    assert (neg.set_label, neg.prediction, neg.route) == ("K", "blowup", "virial_blowup")
    assert neg.values["energy"] < 0
    rep = classify_initial_data(HARM_CUBIC, w * 1.05, 1.0, {"d_II": d})
    assert (rep.set_label, rep.prediction, rep.route) == ("K", "blowup", "threshold_cross")
    # real data has J'(0) = 0, which is flagged but does not change the prediction
    assert rep.values["J_prime"] == 0.0
    assert rep.flags and "J'(0)" in rep.flags[0]
    chirped = classify_initial_data(HARM_CUBIC, quadratic_phase(w * 1.05, 0.5), 1.0, {"d_II": d})
    assert chirped.set_label == "K" and not chirped.flags


def test_indeterminate_above_threshold(harm):
    d, w = harm
    u = quadratic_phase(w * 1.1, 3.0)
    rep = classify_initial_data(HARM_CUBIC, u, 1.0, {"d_II": d})
    assert rep.values["I_omega"] > d.value
    assert rep.prediction == "indeterminate" and rep.set_label == "outside_scope"
    assert any("no claim" in r for r in rep.reasons)


def test_unconverged_threshold_skips_route_with_warning(harm):
    d, w = harm
    from dataclasses import replace
    bad = replace(d, converged=False)
    with pytest.warns(RuntimeWarning):
        rep = classify_initial_data(HARM_CUBIC, w * 0.5, 1.0, {"d_II": bad})
    assert rep.prediction == "indeterminate"
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        classify_initial_data(HARM_CUBIC, w * 0.5, 1.0, {})


def test_threshold_Q_route():
    g = make_grid(1, 40, 512)
    dI = estimate_d_I(FREE_CUBIC, g, 1.0, SearchOptions(n_perturb=1, refine_steps=20))
    small = classify_initial_data(FREE_CUBIC, gaussian(g, 0.5), 1.0, {"d_I": dI})
    assert (small.route, small.set_label, small.prediction) == ("threshold_Q", "Q_plus", "global")


def test_report_serialization(harm):
    d, w = harm
    rep = classify_initial_data(HARM_CUBIC, w * 0.5, 1.0, {"d_II": d.value})
    cells = rep.csv_row(0.5).split(",")
    assert len(cells) == len(TABLE_COLUMNS) and cells[4] == "R_plus"
    assert table_header() == "c,I_omega,S_omega,Q,set_label,prediction,observed,t_end"
    text = rep.to_text()
    assert "membership.xu0_in_L2 = true" in text and "route = threshold_cross" in text


def test_cross_label_boundaries():
    assert cross_label(1.0, 1.0, -1.0, 2.0) == "R_plus"
    assert cross_label(1.0, -1.0, -1.0, 2.0) == "K"
    assert cross_label(1.0, -1.0, 1.0, 2.0) == "K_plus"
    assert cross_label(3.0, -1.0, -1.0, 2.0) == "outside_scope"
    assert cross_label(1.0, 0.0, 1.0, 2.0) == "outside_scope"


@given(I=st.floats(-10, 1.99), S=st.floats(-10, 10).filter(lambda x: x != 0),
       Q=st.floats(-10, 10).filter(lambda x: x != 0))
def test_cross_partition(I, S, Q):
    lab = cross_label(I, S, Q, 2.0)
    member = {"K": S < 0 and Q < 0, "K_plus": S < 0 and Q > 0, "R_plus": S > 0}
    assert sum(member.values()) == 1 and member[lab]


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1))
def test_route_soundness(seed):
    r = np.random.default_rng(seed)
    models = [HARM_CUBIC, FREE_CUBIC, ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, 2)),
              ModelSpec(1, local=LocalNonlinearitySpec.power(-1.0, 3))]
    m = models[r.integers(len(models))]
    u = field_from_function(GRID, lambda x: r.uniform(0.1, 3) * np.exp(-(x - r.uniform(-1, 1)) ** 2 / r.uniform(0.3, 3)
                                                                     + 1j * r.uniform(-1, 1) * x * x))
    rep = classify_initial_data(m, u, 1.0, {"d_II": 2.5, "d_I": 2.3})
    assert rep.prediction in PREDICTIONS and rep.set_label in SET_LABELS
    if rep.prediction != "indeterminate":
        assert check_hypotheses(m).holds(rep.route)
        assert any(x.startswith(rep.route) for x in rep.reasons)
    if rep.set_label == "K":
        v = rep.values
        assert v["I_omega"] < 2.5 and v["S_omega"] < 0 and v["Q"] < 0


def test_monitor_R_plus_global_run(harm):
    d, w = harm
    log = evolve(w * 0.5, HARM_CUBIC, 1.0, EvolveOptions(dt_init=1e-3, t_final=2.0, record_every=0.02))
    rep = monitor_invariance(log, 1.0, d.value)
    assert rep.asserted and rep.label == "R_plus" and rep.violations == 0 and log.outcome == "completed"


def test_monitor_K_blowup_run(harm):
    d, w = harm
    u = quadratic_phase(w * 1.2, 0.5)
    log = evolve(u, HARM_CUBIC, 1.0, EvolveOptions(dt_init=1e-3, t_final=1.0, record_every=1e-3,
                                                    adapt=True, adapt_tolerance=1e-7, blowup_gradient_factor=5))
    rep = monitor_invariance(log, 1.0, d.value)
    assert log.outcome == "blowup_detected"
    assert rep.asserted and rep.label == "K" and rep.violations == 0


def test_monitor_Q_route():
    g = make_grid(1, 40, 256)
    log = evolve(gaussian(g, 0.5), FREE_CUBIC, 1.0, EvolveOptions(dt_init=1e-2, t_final=2.0, record_every=0.1))
    rep = monitor_invariance(log, 1.0, 2.37, route="threshold_Q")
    assert rep.asserted and rep.label == "Q_plus" and rep.checked == ["Q"] and rep.violations == 0


def test_monitor_declines_above_level(harm):
    d, w = harm
    u = quadratic_phase(w * 1.1, 3.0)
    log = evolve(u, HARM_CUBIC, 1.0, EvolveOptions(dt_init=1e-3, t_final=0.05, record_every=0.01))
    rep = monitor_invariance(log, 1.0, d.value)
    assert not rep.asserted and "no invariance claim" in rep.reason


def test_monitor_needs_two_records():
    with pytest.raises(ValueError):
        monitor_invariance([diagnostics(gaussian(GRID), HARM_CUBIC, 1.0)], 1.0, 1.0)


def test_small_dichotomy(harm):
    d, w = harm
    opts = EvolveOptions(dt_init=1e-3, t_final=1.0, adapt=True, adapt_tolerance=1e-7, blowup_gradient_factor=10)
    tab = dichotomy_experiment(HARM_CUBIC, 1.0, w, [1e-3, 0.5, 1.2], {"d_II": d}, opts, sigma=0.5,
                               evolve_grid=make_grid(1, 16, 1024))
    assert [r.report.prediction for r in tab.rows] == ["global", "global", "blowup"]
    assert [r.observed for r in tab.rows] == ["global", "global", "blowup"]
    assert not tab.disagreements
    assert all(r.invariance.violations == 0 for r in tab.rows)
    lines = tab.csv_text().splitlines()
    assert lines[0] == table_header() and len(lines) == 4
    # threads give the same table
    par = dichotomy_experiment(HARM_CUBIC, 1.0, w, [1e-3, 0.5, 1.2], {"d_II": d}, opts, sigma=0.5,
                               evolve_grid=make_grid(1, 16, 1024), workers=3)
    assert par.csv_text() == tab.csv_text()


def test_indeterminate_row_has_no_verdict(harm):
    d, w = harm
    opts = EvolveOptions(dt_init=1e-3, t_final=0.05, record_every=0.01)
    tab = dichotomy_experiment(HARM_CUBIC, 1.0, w, [1.1], {"d_II": d}, opts, sigma=3.0)
    (row,) = tab.rows
    assert row.report.prediction == "indeterminate" and row.agrees is None
