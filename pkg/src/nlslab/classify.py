"""Outcome predictions for initial data and their check against simulation.

Routes are tried in a fixed order and the first one whose hypotheses hold and
whose data condition is decisive supplies the prediction:

    global_subcritical   always global
    virial_blowup        E < 0, or E = 0 with J' < 0
    threshold_Q          V = 0, omega M + E < d_I; Q > 0 global, Q < 0 with J' < 0 blowup
    threshold_Q1         same with Q1 and d'_I
    threshold_cross      I_omega < d_II; K blowup, K_plus or R_plus global
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EvolveOptions, TrajectoryLog, evolve
from .functionals import diagnostics
from .grid import ComplexField, Grid, resample
from .hypotheses import HypothesisReport, check_hypotheses
from .model import ModelSpec

SET_LABELS = ("K", "K_plus", "R_plus", "Q_plus", "Q_minus", "Q1_plus", "Q1_minus", "outside_scope")
PREDICTIONS = ("global", "blowup", "indeterminate")
TABLE_COLUMNS = ("c", "I_omega", "S_omega", "Q", "set_label", "prediction", "observed", "t_end")

_OBSERVED = {"completed": "global", "blowup_detected": "blowup"}


def _sign(x: float) -> str:
    return "positive" if x > 0 else "negative" if x < 0 else "zero"


def _level(thresholds, name):
    """(value, usable, note) for one threshold entry; floats count as converged."""
    if not thresholds or name not in thresholds or thresholds[name] is None:
        return None, False, f"{name} not supplied"
    t = thresholds[name]
    if isinstance(t, (int, float)):
        return float(t), True, ""
    if not t.converged:
        return t.value, False, f"{name} search did not converge"
    return t.value, True, ""


def cross_label(I: float, S: float, Q: float, d_II: float) -> str:
    """K, K_plus or R_plus below d_II; outside_scope otherwise or on a boundary."""
    if not I < d_II:
        return "outside_scope"
    if S > 0:
        return "R_plus"
    if S < 0 and Q < 0:
        return "K"
    if S < 0 and Q > 0:
        return "K_plus"
    return "outside_scope"


@dataclass
class ClassificationReport:
    applicable_theorems: dict
    memberships: dict
    set_label: str
    prediction: str
    route: str | None
    reasons: list
    values: dict
    flags: list = field(default_factory=list)
    observed: str | None = None
    t_end: float | None = None
    hypotheses: HypothesisReport | None = field(default=None, repr=False)

    def csv_row(self, c: float = 1.0) -> str:
        v = self.values
        cells = [repr(float(c)), repr(float(v["I_omega"])), repr(float(v["S_omega"])),
                 repr(float(v["Q"])), self.set_label, self.prediction, self.observed or "",
                 "" if self.t_end is None else repr(float(self.t_end))]
        return ",".join(cells)

    def to_text(self) -> str:
        lines = [f"set_label = {self.set_label}", f"prediction = {self.prediction}",
                 f"route = {self.route or 'none'}"]
        lines += [f"applicable.{k} = {str(v).lower()}" for k, v in self.applicable_theorems.items()]
        lines += [f"membership.{k} = {v}" for k, v in self.memberships.items()]
        lines += [f"value.{k} = {v!r}" for k, v in self.values.items()]
        lines += [f"reason = {r}" for r in self.reasons]
        lines += [f"flag = {f}" for f in self.flags]
        if self.observed is not None:
            lines.append(f"observed = {self.observed}")
        return "\n".join(lines) + "\n"


def table_header() -> str:
    return ",".join(TABLE_COLUMNS)


def classify_initial_data(model: ModelSpec, u0: ComplexField, omega: float, thresholds=None,
                          hypotheses: HypothesisReport | None = None) -> ClassificationReport:
    """Predict the fate of ``u0``.

    ``thresholds`` maps level names (d_I, d_prime_I, d_II) to ThresholdReport
    objects or plain floats.
    """
    rep = hypotheses or check_hypotheses(model)
    d = diagnostics(u0, model, omega)
    M, E, Jp = d.mass_sq, d.energy, d.J_prime
    # |J'| <= 4 sqrt(J K); anything far below that is roundoff on real data
    if abs(Jp) <= 1e-9 * 4.0 * np.sqrt(max(d.J * d.kinetic, 0.0)):
        Jp = 0.0
    I, S, Q, Q1 = d.I_omega, d.S_omega, d.Q, d.Q1
    values = {"mass_sq": M, "energy": E, "I_omega": I, "S_omega": S, "Q": Q, "Q1": Q1,
              "J": d.J, "J_prime": Jp}
    d_I, ok_I, note_I = _level(thresholds, "d_I")
    d_P, ok_P, note_P = _level(thresholds, "d_prime_I")
    d_II, ok_II, note_II = _level(thresholds, "d_II")
    memberships = {
        "I_omega_lt_dII": "unknown" if d_II is None else str(I < d_II).lower(),
        "S_omega_sign": _sign(S),
        "Q_sign": _sign(Q),
        "Q1_sign": _sign(Q1),
        "E_sign": _sign(E),
        "J_prime_sign": _sign(Jp),
        "xu0_in_L2": f"true (J = {d.J!r} on the box)",
    }
    applicable = {r: rep.holds(r) for r in rep.routes}
    reasons, flags = [], []
    prediction, route = "indeterminate", None

    def failed(r):
        reasons.append(f"{r}: hypotheses fail ({'; '.join(rep.reasons(r))})")

    def skipped(r, note):
        reasons.append(f"{r}: skipped, {note}")
        if "converge" in note:
            warnings.warn(f"{r} route skipped: {note}", RuntimeWarning, stacklevel=3)

    set_label = "outside_scope"
    if d_II is not None and ok_II and applicable.get("threshold_cross"):
        set_label = cross_label(I, S, Q, d_II)

    # global_subcritical
    r = "global_subcritical"
    if applicable[r]:
        prediction, route = "global", r
        reasons.append(f"{r}: hypotheses hold, every solution is global")
    else:
        failed(r)

    if route is None:
        r = "virial_blowup"
        if not applicable[r]:
            failed(r)
        elif E < 0:
            prediction, route = "blowup", r
            reasons.append(f"{r}: E(u0) = {E:.6g} < 0")
        elif E == 0 and Jp < 0:
            prediction, route = "blowup", r
            reasons.append(f"{r}: E(u0) = 0 and J'(0) = {Jp:.6g} < 0")
        else:
            reasons.append(f"{r}: hypotheses hold but E(u0) = {E:.6g} is not negative")

    for r, lname, level, ok, note, val, name in (
            ("threshold_Q", "d_I", d_I, ok_I, note_I, Q, "Q"),
            ("threshold_Q1", "d_prime_I", d_P, ok_P, note_P, Q1, "Q1")):
        if route is not None:
            break
        if not applicable[r]:
            failed(r)
            continue
        if not ok:
            skipped(r, note)
            continue
        if not I < level:
            reasons.append(f"{r}: omega M + E = {I:.6g} >= {lname} = {level:.6g}")
            continue
        if set_label == "outside_scope" and val != 0:
            set_label = f"{name}_plus" if val > 0 else f"{name}_minus"
        if val > 0:
            prediction, route = "global", r
            reasons.append(f"{r}: below threshold {level:.6g} with {name} = {val:.6g} > 0")
        elif val < 0 and Jp < 0:
            prediction, route = "blowup", r
            reasons.append(f"{r}: below threshold {level:.6g} with {name} = {val:.6g} < 0 and J'(0) = {Jp:.6g} < 0")
        elif val < 0:
            reasons.append(f"{r}: {name} < 0 but J'(0) = {Jp:.6g} is not negative")
        else:
            reasons.append(f"{r}: {name} = 0 lies on the boundary of both sets")

    if route is None:
        r = "threshold_cross"
        if not applicable[r]:
            failed(r)
        elif not ok_II:
            skipped(r, note_II)
        elif not I < d_II:
            reasons.append(f"{r}: I_omega = {I:.6g} >= d_II = {d_II:.6g}, no claim")
        elif set_label == "K":
            prediction, route = "blowup", r
            reasons.append(f"{r}: I_omega < d_II, S_omega < 0, Q < 0 (set K)")
            if not Jp < 0:
                flags.append("K, but J'(0) < 0 is unmet; prediction retained, evidence flagged")
        elif set_label in ("K_plus", "R_plus"):
            prediction, route = "global", r
            reasons.append(f"{r}: I_omega < d_II in set {set_label}")
        else:
            reasons.append(f"{r}: S_omega or Q vanishes, no set assigned")

    return ClassificationReport(applicable, memberships, set_label, prediction, route, reasons, values,
                                flags, hypotheses=rep)


@dataclass
class InvarianceReport:
    asserted: bool
    label: str
    checked: list
    records: int
    violations: int
    first_violation: int | None
    reason: str

    def to_text(self) -> str:
        return (f"asserted = {str(self.asserted).lower()}\nlabel = {self.label}\n"
                f"checked = {' '.join(self.checked)}\nrecords = {self.records}\n"
                f"violations = {self.violations}\nfirst_violation = {self.first_violation}\n"
                f"reason = {self.reason}\n")


def monitor_invariance(trajectory, omega: float, level: float, route: str = "threshold_cross") -> InvarianceReport:
    """Check that the set containing the first record keeps its defining signs.

    ``route`` is threshold_cross (sets K, K_plus, R_plus below ``level`` = d_II)
    or threshold_Q (sign of Q below ``level`` = d_I).
    """
    records = trajectory.records if isinstance(trajectory, TrajectoryLog) else list(trajectory)
    if len(records) < 2:
        raise ValueError("need at least two records")
    r0 = records[0]
    if abs(r0.omega - omega) > 1e-15 * max(1.0, abs(omega)):
        raise ValueError("records were computed with a different omega")
    I0 = r0.I_omega
    if not I0 < level:
        return InvarianceReport(False, "outside_scope", [], len(records), 0, None,
                                f"I_omega = {I0!r} is not below {level!r}; no invariance claim")
    if route == "threshold_cross":
        label = cross_label(I0, r0.S_omega, r0.Q, level)
        keys = {"R_plus": ["S_omega"], "K": ["S_omega", "Q"], "K_plus": ["S_omega", "Q"]}.get(label, [])
    elif route == "threshold_Q":
        label = "Q_plus" if r0.Q > 0 else "Q_minus" if r0.Q < 0 else "outside_scope"
        keys = ["Q"] if label != "outside_scope" else []
    else:
        raise ValueError(f"unknown route {route!r}")
    if not keys:
        return InvarianceReport(False, label, [], len(records), 0, None, "initial record lies on a set boundary")
    signs = {k: math.copysign(1.0, getattr(r0, k)) for k in keys}
    bad = [i for i, rec in enumerate(records)
           if any(getattr(rec, k) * s <= 0 for k, s in signs.items())]
    return InvarianceReport(True, label, keys, len(records), len(bad), bad[0] if bad else None,
                            "signs persist" if not bad else "sign change observed")


def quadratic_phase(u: ComplexField, sigma: float) -> ComplexField:
    """u e^{-i sigma |x|^2 / 2}; sigma > 0 makes J'(0) negative for real u."""
    return ComplexField(u.grid, u.values * np.exp(-0.5j * sigma * u.grid.r2))


@dataclass
class DichotomyRow:
    c: float
    report: ClassificationReport
    outcome: str
    t_end: float
    log: TrajectoryLog | None = field(default=None, repr=False)
    invariance: InvarianceReport | None = None

    @property
    def observed(self) -> str:
        return _OBSERVED.get(self.outcome, self.outcome)

    @property
    def agrees(self) -> bool | None:
        """None on indeterminate rows."""
        if self.report.prediction == "indeterminate":
            return None
        return self.report.prediction == self.observed

    def csv_row(self) -> str:
        return self.report.csv_row(self.c)


@dataclass
class DichotomyTable:
    rows: list

    def csv_text(self) -> str:
        return table_header() + "\n" + "".join(r.csv_row() + "\n" for r in self.rows)

    @property
    def disagreements(self) -> list:
        return [r for r in self.rows if r.agrees is False]


def dichotomy_experiment(model: ModelSpec, omega: float, u_base: ComplexField, cs, thresholds,
                         opts: EvolveOptions, sigma: float = 0.0, phase_above: float = 1.0,
                         evolve_grid: Grid | None = None, workers: int = 1,
                         keep_logs: bool = False) -> DichotomyTable:
    """Classify and evolve c * u_base for every c.

    Rows with c > ``phase_above`` get the quadratic phase e^{-i sigma |x|^2/2}.
    Classification happens on ``u_base.grid``; evolution on ``evolve_grid``
    (same box, any resolution) after spectral resampling.
    """
    cs = [float(c) for c in cs]
    rep = check_hypotheses(model)
    eg = evolve_grid or u_base.grid
    level_name = "d_II" if rep.holds("threshold_cross") else "d_I"
    level, ok, _ = _level(thresholds, level_name)
    inv_route = "threshold_cross" if level_name == "d_II" else "threshold_Q"

    def one(c):
        u = u_base * c
        if sigma and c > phase_above:
            u = quadratic_phase(u, sigma)
        cl = classify_initial_data(model, u, omega, thresholds, hypotheses=rep)
        log = evolve(resample(u, eg), model, omega, opts)
        cl.observed, cl.t_end = _OBSERVED.get(log.outcome, log.outcome), log.t_end
        inv = None
        if ok and len(log.records) >= 2:
            inv = monitor_invariance(log, omega, level, inv_route)
        return DichotomyRow(c, cl, log.outcome, log.t_end, log if keep_logs else None, inv)

    if workers > 1 and len(cs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, cs))
    else:
        rows = [one(c) for c in cs]
    return DichotomyTable(rows)


__all__ = [
    "ClassificationReport", "classify_initial_data", "cross_label", "monitor_invariance", "InvarianceReport",
    "dichotomy_experiment", "DichotomyTable", "DichotomyRow", "quadratic_phase", "table_header",
    "SET_LABELS", "PREDICTIONS", "TABLE_COLUMNS",
]
