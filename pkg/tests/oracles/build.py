"""Independent reference values for the test suite, frozen into values.json.

Nothing here imports nlslab. Integrals use mpmath quadrature on the real line,
stationary profiles come from ODE shooting. Rerun with
``python3 tests/oracles/build.py`` to regenerate.
"""
from __future__ import annotations

import json
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

mp.mp.dps = 30
INF = mp.inf


def quad(f):
    return float(mp.quad(f, [-INF, 0, INF]))


def gaussian_values():
    A = mp.mpf("1.3")
    out = {}
    out["grad_norm_sq_A1.3"] = quad(lambda x: (A * x * mp.e ** (-x**2 / 2)) ** 2)
    out["J_unit"] = quad(lambda x: x**2 * mp.e ** (-x**2))
    sigma = mp.mpf("0.7")
    # u = e^{i sigma x^2/2} g, so Im((x u') conj(u)) = sigma x^2 g^2
    out["J_prime_chirp_sigma0.7"] = quad(lambda x: 4 * sigma * x**2 * mp.e ** (-x**2))
    return out


def harmonic_gaussian():
    c = mp.pi ** (-mp.mpf(1) / 4)
    g = lambda x: c * mp.e ** (-x**2 / 2)
    dg = lambda x: -x * g(x)
    mass = quad(lambda x: g(x) ** 2)
    kin = quad(lambda x: dg(x) ** 2)
    pot = quad(lambda x: x**2 * g(x) ** 2)
    return {"mass_sq": mass, "kinetic": kin, "potential_term": pot, "energy": 0.5 * (kin + pot)}


def uncertainty():
    def ratio(u, du):
        m = quad(lambda x: abs(u(x)) ** 2)
        k = quad(lambda x: abs(du(x)) ** 2)
        j = quad(lambda x: x**2 * abs(u(x)) ** 2)
        return m / (2 * mp.sqrt(k) * mp.sqrt(j))
    g = lambda x: mp.e ** (-x**2 / 2)
    mod = lambda x: mp.e ** (5j * x) * g(x)
    dmod = lambda x: (5j - x) * mod(x)
    two = lambda x: mp.e ** (-(x - 3) ** 2 / 2) + mp.e ** (-(x + 3) ** 2 / 2)
    dtwo = lambda x: -(x - 3) * mp.e ** (-(x - 3) ** 2 / 2) - (x + 3) * mp.e ** (-(x + 3) ** 2 / 2)
    return {"gaussian": float(ratio(g, lambda x: -x * g(x))), "modulated": float(ratio(mod, dmod)),
            "two_bump": float(ratio(two, dtwo))}


def quintic_energy():
    # f = s^2: E = 1/2 int |u'|^2 - 1/6 int |u|^6
    out = {}
    for A in ("1.5", "2.0"):
        a = mp.mpf(A)
        u = lambda x: a * mp.e ** (-x**2)
        du = lambda x: -2 * x * u(x)
        out[A] = quad(lambda x: du(x) ** 2 / 2 - u(x) ** 6 / 6)
    return out


def constant_field():
    # V = W = 0, f = s^p, constant amplitude A on [-L/2, L/2)
    p, A, L, N = 1.5, 0.7, 10.0, 1
    s = A * A
    E = -0.5 * L * s ** (p + 1) / (p + 1)
    Q = N * L * (s ** (p + 1) / (p + 1) - s ** (p + 1))
    return {"p": p, "A": A, "L": L, "E": E, "Q": Q}


def dilation_root():
    # u = e^{-x^2/2}, f = s^3, N = 1: Q(u_lam) = 2 lam^2 K - (Np/(p+1)) lam^{Np} B
    p, N = 3, 1
    K = quad(lambda x: (x * mp.e ** (-x**2 / 2)) ** 2)
    B = quad(lambda x: mp.e ** (-(p + 1) * x**2))
    lam = (2 * K * (p + 1) / (N * p * B)) ** (1.0 / (N * p - 2))
    return {"p": p, "lam": float(lam)}


def free_peak():
    # |u(0, t)| for u0 = e^{-x^2/2} under i u_t = -u_xx, from the Fourier integral
    t = mp.mpf(1)
    val = mp.quad(lambda k: mp.e ** (-k**2 / 2) * mp.e ** (-1j * k**2 * t), [-INF, INF]) / mp.sqrt(2 * mp.pi)
    return {"t": 1.0, "peak": float(abs(val))}


def gaussian_kernel_transform():
    # W = a e^{-pi x^2} in 1D: hat W(k) = int W e^{-ikx}
    a = mp.mpf(2)
    out = {}
    for k in (0.0, 0.5 * np.pi):
        out[repr(k)] = float(mp.re(mp.quad(lambda x: a * mp.e ** (-mp.pi * x**2) * mp.cos(k * x), [-INF, INF])))
    return out


def shoot(p, omega, x_max=12.0):
    """Even decaying solution of -w'' + 2 omega w = w^{2p+1} by bisection on w(0)."""
    def rhs(x, y):
        return [y[1], 2 * omega * y[0] - y[0] ** (2 * p + 1)]

    def fate(w0):
        def cross(x, y):
            return y[0]
        cross.terminal = True

        def turn(x, y):
            return y[1]
        turn.terminal = True
        turn.direction = 1
        sol = solve_ivp(rhs, [0, x_max], [w0, 0.0], rtol=1e-13, atol=1e-16, events=[cross, turn], method="DOP853")
        if sol.t_events[0].size:
            return 1, sol.t_events[0][0]
        if sol.t_events[1].size:
            return -1, sol.t_events[1][0]
        return 0, x_max
    lo, hi = 0.5, 5.0
    while fate(lo)[0] != -1:
        lo *= 0.5
    while fate(hi)[0] != 1:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        s, _ = fate(mid)
        if s == 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def soliton_profile(p, omega, L=40.0, M=1024, x_keep=10.0):
    w0 = shoot(p, omega)
    h = L / M
    xs = np.arange(0, int(round(x_keep / h)) + 1) * h

    def rhs(x, y):
        return [y[1], 2 * omega * y[0] - y[0] ** (2 * p + 1)]
    sol = solve_ivp(rhs, [0, xs[-1]], [w0, 0.0], t_eval=xs, rtol=1e-13, atol=1e-16, method="DOP853")
    w = sol.y[0]
    return {"p": p, "omega": omega, "L": L, "M": M, "w0": float(w0), "x": xs.tolist(), "w": w.tolist()}


def soliton_action(p, omega):
    # I_omega(w) = omega M + 1/2 K - 1/2 int F, F = s^{p+1}/(p+1); profile from the first integral
    w0 = mp.mpf(2 * omega * (p + 1)) ** (mp.mpf(1) / (2 * p))

    # with w = w0 y: w'^2 = w^2 (w0^{2p} - w^{2p}) / (p+1)
    def root(y):
        return mp.sqrt(w0 ** (2 * p) * (1 - y ** (2 * p)) / (p + 1))

    def over(num):
        # dx = w0 dy / (w0 y root(y)); the endpoint y = 1 carries no weight
        return lambda y: 0 if root(y) == 0 else num(y) / (y * root(y))
    M = 2 * mp.quad(over(lambda y: (w0 * y) ** 2), [0, 1])
    K = 2 * mp.quad(lambda y: w0**2 * y * root(y), [0, 1])
    Fi = 2 * mp.quad(over(lambda y: (w0 * y) ** (2 * p + 2) / (p + 1)), [0, 1])
    return float(omega * M + K / 2 - Fi / 2)


def main():
    out = {
        "gaussian": gaussian_values(),
        "harmonic_gaussian": harmonic_gaussian(),
        "uncertainty": uncertainty(),
        "quintic_energy": quintic_energy(),
        "constant_field": constant_field(),
        "dilation_root": dilation_root(),
        "free_peak": free_peak(),
        "gaussian_kernel_hat": gaussian_kernel_transform(),
        "soliton_p1": soliton_profile(1, 1.0),
        "soliton_p2": soliton_profile(2, 1.0),
        "soliton_p3": soliton_profile(3, 1.0),
        "action": {"p2_omega1": soliton_action(2, 1.0), "p3_omega1": soliton_action(3, 1.0),
                   "p3_omega2": soliton_action(3, 2.0)},
        "quintic_blowup_energy": float(quad(lambda x: (4 * x * mp.e ** (-x**2)) ** 2 / 2
                                            - (2 * mp.e ** (-x**2)) ** 6 / 6)),
    }
    path = Path(__file__).with_name("values.json")
    path.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
