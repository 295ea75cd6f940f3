"""Closed-form admissibility checks for catalog models.

Each route (a set of sufficient conditions for a global-existence, blowup or
sharp-threshold statement) is decided by exponent and sign algebra on the
catalog families. Nothing is sampled except the slope range of the truncated
kernel bridge, which is tabulated on a fine grid.

Routes:

``global_subcritical``
    F grows at most like s^{1+p} with p < 2/N, positive part of W locally in
    L^q with q >= N/2.
``virial_blowup``
    (N+2)F - N s f <= 0, 2V + x.grad V >= 0, 2W + x.grad W <= 0.
``threshold_Q``
    V = 0, W in L^q with N/4 < q < N/2, the two-sided bound
    l F <= s f - F <= c1 s^{p1+1} + c2 s^{p2+1} and
    Nl W + x.grad W <= 0 <= c3 W + x.grad W.
``threshold_Q1``
    V = W = 0 and the two-sided bound on s f - F.
``threshold_cross``
    The two-sided bound, W >= 0 with Nl W + x.grad W <= 0,
    Nl V + x.grad V >= c V, f and f' nondecreasing, and s f - F <= s^2 f'.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import UndecidableModelError
from .model import KERNEL_KINDS, LOCAL_KINDS, POTENTIAL_KINDS, ModelSpec

INF = math.inf

ROUTES = ("global_subcritical", "virial_blowup", "threshold_Q", "threshold_Q1", "threshold_cross")


@dataclass
class Condition:
    name: str
    holds: bool
    witness: str


@dataclass
class RouteCheck:
    route: str
    conditions: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(c.holds for c in self.conditions)

    def add(self, name, holds, witness):
        self.conditions.append(Condition(name, bool(holds), witness))

    def failures(self) -> list[str]:
        return [f"{c.name}: {c.witness}" for c in self.conditions if not c.holds]


@dataclass
class HypothesisReport:
    dims: int
    routes: dict
    l_interval: "Interval"
    l_used: Fraction | None
    c3_min: float | None
    c_max: float | None

    def holds(self, route: str) -> bool:
        return self.routes[route].holds

    def reasons(self, route: str) -> list[str]:
        return self.routes[route].failures()

    def to_text(self) -> str:
        lines = [f"dims = {self.dims}", f"l_interval = {self.l_interval}"]
        lines.append(f"l_used = {self.l_used if self.l_used is not None else 'none'}")
        lines.append(f"c3_min = {_num(self.c3_min)}")
        lines.append(f"c_max = {_num(self.c_max)}")
        for name in ROUTES:
            r = self.routes[name]
            lines.append(f"{name}.holds = {str(r.holds).lower()}")
            for c in r.conditions:
                lines.append(f"{name}.{c.name} = {str(c.holds).lower()} ; {c.witness}")
        return "\n".join(lines) + "\n"


def _num(x):
    return "none" if x is None else repr(float(x))


@dataclass(frozen=True)
class Interval:
    """Real interval with open/closed ends; ends may be +-inf."""

    lo: object = -INF
    hi: object = INF
    lo_open: bool = True
    hi_open: bool = True

    def meet_lower(self, v, strict):
        if v > self.lo or (v == self.lo and strict and not self.lo_open):
            return Interval(v, self.hi, strict, self.hi_open)
        return self

    def meet_upper(self, v, strict):
        if v < self.hi or (v == self.hi and strict and not self.hi_open):
            return Interval(self.lo, v, self.lo_open, strict)
        return self

    @property
    def empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and not self.lo_open and not self.hi_open)

    def __contains__(self, v) -> bool:
        above = v > self.lo or (v == self.lo and not self.lo_open)
        below = v < self.hi or (v == self.hi and not self.hi_open)
        return above and below

    def pick(self):
        """A representative point, rational when the ends are."""
        if self.empty:
            return None
        lo, hi = self.lo, self.hi
        if lo == hi:
            return lo
        if hi == INF:
            return lo + 1 if lo != -INF else Fraction(0)
        if lo == -INF:
            return hi - 1
        return (lo + hi) / 2

    def __str__(self):
        if self.empty:
            return "empty"
        return f"{'(' if self.lo_open else '['}{self.lo}, {self.hi}{')' if self.hi_open else ']'}"


def critical_upper(N: int):
    """2/(N-2)^+, infinite for N <= 2."""
    return INF if N <= 2 else Fraction(2, N - 2)


# -- local nonlinearity algebra ------------------------------------------------

def _local_terms(model):
    """(coef, exponent) pairs with the log family flagged separately."""
    loc = model.local
    return [(c, e) for c, e in zip(loc.coefs, loc.exps) if c != 0]


def _growth_condition(model, N):
    """F <= c1 s + c2 s^{p+1} for some 0 < p < 2/N."""
    loc = model.local
    terms = _local_terms(model)
    if not terms:
        return True, "f = 0"
    c, e = max(terms, key=lambda t: t[1])
    if c < 0:
        return True, f"leading term has negative coefficient (exponent {e})"
    bound = Fraction(2, N)
    ok = e < bound
    kind = "log-power" if loc.kind == "log_power" else "power"
    if ok:
        return True, f"leading {kind} exponent {e} < 2/N = {bound}"
    return False, f"leading {kind} exponent {e} >= 2/N = {bound}; exponent not below 2/N"


def _virial_local(model, N):
    """(N+2)F - N s f <= 0 for all s >= 0."""
    loc = model.local
    terms = _local_terms(model)
    if not terms:
        return True, "f = 0"
    crit = Fraction(2, N)
    if loc.kind == "log_power":
        (b, p), = terms
        if b > 0:
            return p >= crit, f"log-power b > 0 needs p >= 2/N (p = {p}); " + (
                "ok" if p >= crit else "exponent below 2/N")
        ok = N == 1 and p <= 1
        return ok, f"log-power b < 0 needs N = 1 and p <= 1 (N = {N}, p = {p})"
    bad = [(c, e) for c, e in terms if c * (2 - N * e) > 0]
    if not bad:
        return True, "every term has c (2 - N p) <= 0"
    c, e = bad[0]
    why = "exponent below 2/N" if c > 0 else "negative coefficient above 2/N"
    return False, f"term {c} s^{e} has c (2 - N p) > 0; {why}"


def _lower_bound_l(model, iv: Interval):
    """Constraint on l from l F <= s f - F; returns (interval, witness)."""
    loc = model.local
    notes = []
    for c, e in _local_terms(model):
        if loc.kind == "log_power":
            if c > 0:
                iv = iv.meet_upper(e, False)
                notes.append(f"l <= {e}")
            else:
                iv = iv.meet_lower(e + 1, False)
                notes.append(f"l >= {e + 1}")
        elif c > 0:
            iv = iv.meet_upper(e, False)
            notes.append(f"l <= {e}")
        else:
            iv = iv.meet_lower(e, False)
            notes.append(f"l >= {e}")
    return iv, ", ".join(notes) or "f = 0"


def _upper_bound_sf(model, N):
    """s f - F <= c1 s^{p1+1} + c2 s^{p2+1} with 2/N < p1, p2 < 2/(N-2)^+."""
    loc = model.local
    terms = sorted(_local_terms(model), key=lambda t: t[1])
    if not terms:
        return True, "s f - F = 0"
    lo, hi = Fraction(2, N), critical_upper(N)
    small_c, small_e = terms[0]
    big_c, big_e = terms[-1]
    if loc.kind == "log_power":
        # s f - F ~ b p_eff s^{p+2} near 0 and ~ b s^{p+1} log s at infinity
        small_e = small_e + 1
    problems = []
    if small_c > 0 and not small_e > lo:
        problems.append(f"small-s exponent {small_e} not above 2/N = {lo}; exponent below 2/N")
    if big_c > 0 and not big_e < hi:
        problems.append(f"large-s exponent {big_e} not below 2/(N-2)+ = {hi}")
    if problems:
        return False, "; ".join(problems)
    return True, "dominant positive terms lie in (2/N, 2/(N-2)+)"


def _monotone_f(model):
    loc = model.local
    terms = _local_terms(model)
    if not terms:
        return True, "f = 0"
    ok = all(c > 0 for c, _ in terms)
    return ok, "f nondecreasing iff all coefficients >= 0" + ("" if ok else "; negative coefficient")


def _monotone_df(model):
    """f'_s nondecreasing, the direction used when comparing f'_s at s and k^2 s."""
    terms = _local_terms(model)
    if not terms:
        return True, "f = 0"
    if any(c < 0 for c, _ in terms):
        return False, "negative coefficient"
    small = [e for _, e in terms if e < 1]
    if small:
        return False, f"exponent {small[0]} < 1 makes f'_s decreasing"
    return True, "all exponents >= 1 with nonnegative coefficients"


def _sf_minus_F_vs_s2df(model):
    """s f - F <= s^2 f'_s, equivalent to the k-scaling bound on F - s f."""
    terms = _local_terms(model)
    ok = all(c > 0 for c, _ in terms)
    return ok, "holds iff all coefficients >= 0" if ok else "negative coefficient"


# -- kernel algebra ------------------------------------------------------------

def _kernel_slope_range(kernel):
    """Range [lo, hi] of x.grad W / W on r > 0, closure taken."""
    kind = kernel.kind
    if kind == "inverse_power":
        return -kernel.K, -kernel.K
    if kind == "gaussian":
        return -INF, Fraction(0)
    if kind == "saturating":
        return Fraction(0), Fraction(2)
    if kind == "truncated_power":
        return -kernel.min_c3(), -kernel.inner
    raise UndecidableModelError(f"no slope algebra for kernel {kind!r}")


def _kernel_Lq_local(kernel, N, q_lo):
    """Is W (or W+) in L^q + L^inf for some q in the given range?"""
    if kernel.is_zero:
        return True, "W = 0"
    kind = kernel.kind
    if kind in ("gaussian", "saturating"):
        return True, "bounded kernel"
    s = kernel.K if kind == "inverse_power" else kernel.inner
    # near the origin |x|^-s is in L^q iff q s < N
    top = Fraction(N) / s
    ok = q_lo < top
    return ok, f"singular exponent {s}: need q < N/{s} = {top} with q >= {q_lo}"


def _kernel_Lq_global(kernel, N):
    """W in L^q for some N/4 < q < N/2 (no L^inf part allowed)."""
    if kernel.is_zero:
        return True, "W = 0"
    kind = kernel.kind
    if kind == "gaussian":
        return True, "Gaussian lies in every L^q"
    if kind == "saturating":
        return False, "saturating kernel does not decay"
    if kind == "inverse_power":
        return False, "pure inverse power is never in a single L^q"
    K, s = kernel.K, kernel.inner
    lo = max(Fraction(N) / K, Fraction(N, 4))
    hi = min(Fraction(N) / s, Fraction(N, 2))
    return lo < hi, f"q range ({lo}, {hi})"


def _decay_condition(kernel, N, iv: Interval, require_nonneg: bool):
    """Nl W + x.grad W <= 0 as a constraint on l."""
    if kernel.is_zero:
        return iv, True, "W = 0"
    lo, hi = _kernel_slope_range(kernel)
    a = kernel.a
    if a > 0:
        # N l + hi <= 0
        if hi == INF:
            return iv, False, "slope unbounded above"
        iv = iv.meet_upper(-hi / N, False)
        return iv, True, f"N l <= {-hi}"
    if require_nonneg:
        return iv, False, "W >= 0 fails"
    if lo == -INF:
        return iv, False, "slope unbounded below"
    iv = iv.meet_lower(-lo / N, False)
    return iv, True, f"N l >= {-lo}"


def _growth_kernel_condition(kernel):
    """c3 W + x.grad W >= 0 for some c3 > 0; returns (holds, c3_min, witness)."""
    if kernel.is_zero:
        return True, 0.0, "W = 0"
    lo, hi = _kernel_slope_range(kernel)
    if kernel.a > 0:
        if lo == -INF:
            return False, None, "slope unbounded below"
        return True, float(-lo), f"c3 >= {float(-lo):.12g}"
    # c3 + hi <= 0 with c3 > 0
    ok = hi < 0
    return ok, (0.0 if ok else None), "needs a strictly negative slope" if not ok else "any 0 < c3 <= %g" % float(-hi)


def _virial_kernel(kernel):
    """2W + x.grad W <= 0 everywhere."""
    if kernel.is_zero:
        return True, "W = 0"
    lo, hi = _kernel_slope_range(kernel)
    if kernel.a > 0:
        return 2 + hi <= 0, f"need 2 + max slope <= 0 (max slope {hi})"
    return 2 + lo >= 0, f"need 2 + min slope >= 0 (min slope {lo})"


# -- potential algebra ---------------------------------------------------------

def _potential_class(pot):
    if pot.kind == "harmonic" and pot.a > 0:
        return "V2", "unbounded quadratic potential"
    return "V1", "bounded potential"


def _potential_cross(pot, N, l):
    """Largest c with N l V + x.grad V >= c V."""
    if pot.is_zero:
        return INF, "V = 0"
    if l is None:
        return None, "no admissible l"
    if pot.kind == "harmonic":
        return float(N * l + 2), "x.grad V = 2 V"
    return float(N * l), "x.grad V / V in (0, 2]"


# -- main entry ----------------------------------------------------------------

def check_hypotheses(model: ModelSpec) -> HypothesisReport:
    if (model.potential.kind not in POTENTIAL_KINDS or model.local.kind not in LOCAL_KINDS
            or model.kernel.kind not in KERNEL_KINDS):
        raise UndecidableModelError("undecidable, supply manual attestation")
    N = model.dims
    pot, loc, ker = model.potential, model.local, model.kernel
    f_zero_ok = all(e > 0 for e in loc.exps)
    routes = {}

    r = RouteCheck("global_subcritical")
    r.add("f_vanishes_at_zero", f_zero_ok, "positive exponents")
    vcls, vwhy = _potential_class(pot)
    r.add("potential_class", True, f"{vcls}: {vwhy}")
    if ker.a > 0:
        q_lo = Fraction(max(1, Fraction(N, 2)))
        ok, why = _kernel_Lq_local(ker, N, q_lo)
    else:
        ok, why = True, "W+ = 0"
    r.add("W_plus_integrability", ok, why)
    ok, why = _growth_condition(model, N)
    r.add("F_growth", ok, why)
    routes[r.route] = r

    r = RouteCheck("virial_blowup")
    r.add("f_vanishes_at_zero", f_zero_ok, "positive exponents")
    r.add("potential_class", True, f"{vcls}: {vwhy}")
    ok, why = _kernel_Lq_local(ker, N, Fraction(max(1, Fraction(N, 4))))
    r.add("W_integrability", ok, why)
    ok, why = _virial_local(model, N)
    r.add("local_virial_sign", ok, why)
    r.add("potential_virial_sign", True, "V >= 0 and x.grad V >= 0 for catalog potentials")
    ok, why = _virial_kernel(ker)
    r.add("kernel_virial_sign", ok, why)
    routes[r.route] = r

    # the exponent l shared by the threshold routes
    base = Interval(Fraction(2, N), critical_upper(N), True, True)
    iv, lwhy = _lower_bound_l(model, base)
    up_ok, up_why = _upper_bound_sf(model, N)

    iv3, dec_ok, dec_why = _decay_condition(ker, N, iv, require_nonneg=False)
    gk_ok, c3_min, gk_why = _growth_kernel_condition(ker)
    l3 = _choose_l(model, iv3)

    r = RouteCheck("threshold_Q")
    r.add("potential_zero", pot.is_zero, "V = 0" if pot.is_zero else "nonzero potential")
    ok, why = _kernel_Lq_global(ker, N)
    r.add("W_in_Lq", ok, why)
    r.add("f_vanishes_at_zero", f_zero_ok, "positive exponents")
    r.add("l_lower_bound", not iv.empty, f"{lwhy}; with 2/N < l < 2/(N-2)+ gives {iv}" + (
        "; exponent below 2/N" if iv.empty and iv.hi <= Fraction(2, N) else ""))
    r.add("sf_minus_F_upper_bound", up_ok, up_why)
    r.add("kernel_decay", dec_ok and not iv3.empty, f"{dec_why}; l in {iv3}")
    c3_ok = gk_ok and (model.c3 is None or (c3_min is not None and model.c3 >= c3_min))
    r.add("kernel_growth", c3_ok, gk_why)
    if model.l is not None:
        r.add("given_l_admissible", model.l in iv3, f"l = {model.l}, admissible {iv3}")
    routes[r.route] = r

    r = RouteCheck("threshold_Q1")
    r.add("potential_zero", pot.is_zero, "V = 0" if pot.is_zero else "nonzero potential")
    r.add("kernel_zero", ker.is_zero, "W = 0" if ker.is_zero else "nonzero kernel")
    r.add("f_vanishes_at_zero", f_zero_ok, "positive exponents")
    r.add("l_lower_bound", not iv.empty, f"{lwhy}; admissible {iv}" + (
        "; exponent below 2/N" if iv.empty and iv.hi <= Fraction(2, N) else ""))
    r.add("sf_minus_F_upper_bound", up_ok, up_why)
    if model.l is not None:
        r.add("given_l_admissible", model.l in iv, f"l = {model.l}, admissible {iv}")
    routes[r.route] = r

    iv4, dec4_ok, dec4_why = _decay_condition(ker, N, iv, require_nonneg=True)
    l4 = _choose_l(model, iv4)
    c_max, c_why = _potential_cross(pot, N, l4)
    r = RouteCheck("threshold_cross")
    r.add("f_vanishes_at_zero", f_zero_ok, "positive exponents")
    r.add("l_lower_bound", not iv.empty, f"{lwhy}; admissible {iv}" + (
        "; exponent below 2/N" if iv.empty and iv.hi <= Fraction(2, N) else ""))
    r.add("sf_minus_F_upper_bound", up_ok, up_why)
    r.add("kernel_nonneg_decay", dec4_ok and not iv4.empty, f"{dec4_why}; l in {iv4}")
    c_ok = c_max is not None and c_max > 0 and (model.c is None or 0 < model.c <= c_max)
    r.add("potential_growth", c_ok, f"c_max = {_num(c_max)}; {c_why}")
    ok, why = _monotone_f(model)
    r.add("f_nondecreasing", ok, why)
    ok, why = _monotone_df(model)
    r.add("df_nondecreasing", ok, why)
    ok, why = _sf_minus_F_vs_s2df(model)
    r.add("scaling_of_F_minus_sf", ok, why)
    if model.l is not None:
        r.add("given_l_admissible", model.l in iv4, f"l = {model.l}, admissible {iv4}")
    routes[r.route] = r

    l_used = model.l if model.l is not None else (l4 if routes["threshold_cross"].holds else l3)
    return HypothesisReport(N, routes, iv, l_used, c3_min, None if c_max is None else float(c_max))


def _choose_l(model, iv):
    if iv.empty:
        return None
    if model.l is not None and model.l in iv:
        return model.l
    return iv.pick()
