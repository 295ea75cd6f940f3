import math

import numpy as np
import pytest

from nlslab.errors import MassCollapseError
from nlslab.functionals import diagnostics
from nlslab.grid import ComplexField, field_from_function, make_grid, spectral_gradient
from nlslab.groundstate import scaling_probe, solve_stationary, verify_stationary_identities
from nlslab.model import KernelSpec, LocalNonlinearitySpec, ModelSpec, PotentialSpec


def soliton_error(state, prof):
    """L2 distance to the shooting profile on its support |x| <= 10, using evenness."""
    g = state.field.grid
    x = g.axis
    w = np.real(state.field.values)
    w = w * np.sign(w[g.points // 2])
    ref = np.interp(np.abs(x), prof["x"], prof["w"], right=0.0)
    inside = np.abs(x) <= prof["x"][-1] + 1e-12
    return math.sqrt(g.integrate(np.where(inside, (w - ref) ** 2, 0.0)))


@pytest.fixture(scope="module")
def cubic_state():
    m = ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, 1))
    return m, solve_stationary(m, 1.0, grid=make_grid(1, 40, 1024))


def test_linear_oscillator_collapses():
    m = ModelSpec(1, PotentialSpec("harmonic", 1.0))
    with pytest.raises(MassCollapseError):
        solve_stationary(m, 1.0, grid=make_grid(1, 20, 128))


def test_needs_nonzero_start():
    g = make_grid(1, 20, 64)
    with pytest.raises(ValueError):
        solve_stationary(ModelSpec(1), 1.0, init=ComplexField(g, np.zeros(64)))


@pytest.mark.parametrize("p", [1, 2, 3])
def test_soliton_matches_shooting_oracle(oracle, p):
    prof = oracle[f"soliton_p{p}"]
    m = ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, p))
    st = solve_stationary(m, 1.0, grid=make_grid(1, prof["L"], prof["M"]))
    assert soliton_error(st, prof) <= 1e-6


@pytest.mark.parametrize("p", [1, 2, 3])
def test_shooting_oracle_agrees_with_closed_form(oracle, p):
    prof = oracle[f"soliton_p{p}"]
    x = np.array(prof["x"])
    closed = (2.0 * (p + 1)) ** (1 / (2 * p)) / np.cosh(p * math.sqrt(2) * x) ** (1 / p)
    assert np.max(np.abs(closed - prof["w"])) < 1e-8


def test_hartree_only_state():
    m = ModelSpec(1, kernel=KernelSpec("gaussian", 5.0))
    st = solve_stationary(m, 1.0, grid=make_grid(1, 40, 512), tol=1e-10)
    assert st.residual_norm <= 1e-10
    assert abs(st.s_omega_value) <= 1e-8
    assert verify_stationary_identities(st, m).ok


def test_identities_on_soliton(cubic_state):
    m, st = cubic_state
    rep = verify_stationary_identities(st, m)
    assert rep.ok, rep.message
    assert max(abs(rep.s_omega), abs(rep.q), abs(rep.pohozaev_residual)) <= 1e-6


def test_zero_field_is_not_stationary(cubic_state):
    m, st = cubic_state
    from dataclasses import replace
    with pytest.raises(ValueError):
        verify_stationary_identities(replace(st, field=st.field * 0.0), m)


def test_pohozaev_residual_shrinks_with_box():
    m = ModelSpec(1, local=LocalNonlinearitySpec.power(1.0, 1))
    res = []
    for L, M in ((5, 128), (10, 256), (20, 512)):
        st = solve_stationary(m, 1.0, grid=make_grid(1, L, M))
        res.append(abs(st.pohozaev_residual))
    assert res[0] > res[1] > res[2]


def test_scaling_probe_signs(cubic_state):
    m, st = cubic_state
    one, up, down = scaling_probe(st, m, 1.0, "amplitude", [1.0, 1.1, 0.9])
    d = diagnostics(st.field, m, 1.0)
    assert abs(one.S_omega) < 1e-8 and abs(one.Q) < 1e-8
    assert one.I_omega == pytest.approx(d.I_omega, rel=1e-12)
    assert up.S_omega < 0 and up.Q < 0
    assert down.S_omega > 0
    (dil,) = scaling_probe(st, m, 1.0, "dilation", [(1.0, 1.0)])
    assert dil.I_omega == pytest.approx(one.I_omega, rel=1e-12)
    with pytest.raises(ValueError):
        scaling_probe(st, m, 1.0, "amplitude", [5.0])


def test_first_variation_vanishes(cubic_state, rng):
    m, st = cubic_state
    g = st.field.grid
    w = np.real(st.field.values)
    omega = 1.0
    for _ in range(5):
        v = np.real(np.fft.ifft(np.fft.fft(rng.standard_normal(g.points)) * np.exp(-g.k2)))
        v *= math.sqrt(g.integrate(w * w) / g.integrate(v * v))
        eps = 1e-5

        def I(a):
            return diagnostics(ComplexField(g, w + a * v), m, omega).I_omega
        dI = (I(eps) - I(-eps)) / (2 * eps)
        gw = np.real(spectral_gradient(st.field)[0])
        gv = np.real(spectral_gradient(ComplexField(g, v))[0])
        scale = abs(2 * omega * g.integrate(w * v)) + abs(g.integrate(gw * gv)) + g.integrate(w**4)
        assert abs(dI) <= 1e-5 * scale
