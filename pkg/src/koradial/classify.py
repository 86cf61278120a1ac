"""Behavior classification at infinity and pointwise verification of the
two-sided solution bounds.

The dichotomy dispatch consumes convergence verdicts for the growth
functionals; it never re-derives limits, so there is one source of truth
for each limit decision.  Patterns:

    F   both components bounded:   P2 finite and Q2 finite
    I   both components unbounded: P1 divergent and Q1 divergent
    SF1 u1 bounded, u2 unbounded:  P2 finite and Q1 divergent
    SF2 u1 unbounded, u2 bounded:  P1 divergent and Q2 finite

Branches that consult P2/Q2 additionally require an eventually
nondecreasing r^(2N-2) p(r) on the corresponding side.  Anything else,
including conflicting matches, is an honest Indeterminate.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .functionals import (
    HEvaluator,
    eval_P1_Q1,
    eval_P3_Q3,
    final_value_family,
)
from .problem import ProblemSpec, WeightCheck, weight_threshold
from .quadrature import ConvergenceVerdict, Grid, tail_limit
from .solver import SolutionPair

__all__ = [
    "BehaviorClass",
    "GateReport",
    "NecessityReport",
    "BoundReport",
    "Numerics",
    "AprioriViolation",
    "dispatch_thm1",
    "classify_thm1",
    "existence_gate",
    "check_necessity_v",
    "bounds_thm2",
    "apriori_check",
    "REGIMES",
]

REGIMES = (
    "H_INF_BOTH",          # both value-axis profiles divergent: growth regime
    "H_FIN_SEPARATED",     # both finite with strict gradient-envelope separation
    "MIXED_SF2",           # side 1 unbounded gate, side 2 sandwich gate
    "MIXED_SF1",           # mirror
    "MIXED_F_P2",          # side 1 bounded via P2, side 2 sandwich gate
    "MIXED_F_Q2",          # mirror
    "NONE",                # gates definitely violated
    "INDETERMINATE",
)


@dataclass(frozen=True)
class Numerics:
    """Knobs shared by classification and bounds verification."""

    n_panels: int = 32
    grading: float = 2.0
    nodes_per_panel: int = 9
    tail_r0: float = 8.0
    tail_doublings: int = 7
    tail_tol: float = 1e-6
    tail_cap: float = 1e12
    weight_probe: float = 1024.0
    weight_n: int = 400
    h_max_upper: float = 1e250
    bounds_slack: float = 1e-6
    largeness_factor: float = 1e3


def _pmap(fn: Callable, items: list):
    """Map preserving order; KORADIAL_THREADS > 1 enables a thread pool."""
    workers = int(os.environ.get("KORADIAL_THREADS", "1") or "1")
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True)
class BehaviorClass:
    kind: str  # F | I | SF1 | SF2 | Indeterminate
    evidence: dict[str, ConvergenceVerdict] = field(default_factory=dict)
    weight_checks: dict[str, WeightCheck] = field(default_factory=dict)
    reason: str = ""


def dispatch_thm1(
    v_p1: ConvergenceVerdict,
    v_q1: ConvergenceVerdict,
    v_p2: ConvergenceVerdict,
    v_q2: ConvergenceVerdict,
    weight1_ok: bool,
    weight2_ok: bool,
) -> tuple[str, str]:
    """Pure dichotomy dispatch on the four verdicts plus the weight
    side-conditions.  Returns (kind, reason)."""
    matches = []
    if v_p2.finite and v_q2.finite and weight1_ok and weight2_ok:
        matches.append("F")
    if v_p1.divergent and v_q1.divergent:
        matches.append("I")
    if v_p2.finite and v_q1.divergent and weight1_ok:
        matches.append("SF1")
    if v_p1.divergent and v_q2.finite and weight2_ok:
        matches.append("SF2")
    if len(matches) == 1:
        return matches[0], ""
    if not matches:
        return "Indeterminate", "no dichotomy pattern matched the verdicts"
    return "Indeterminate", f"conflicting evidence: patterns {matches} all matched"


def classify_thm1(spec: ProblemSpec, num: Numerics = Numerics()) -> BehaviorClass:
    """Classify the behavior of radial solutions with central values (a, b).

    Precondition (checked by the existence gate, not here): both value-axis
    growth profiles diverge, so solutions exist for every radius.
    """
    tags = ["P1", "Q1", "P2", "Q2"]
    fams = {
        t: final_value_family(spec, t, num.n_panels, num.grading, num.nodes_per_panel)
        for t in tags
    }
    verdicts = dict(
        zip(
            tags,
            _pmap(
                lambda t: tail_limit(
                    fams[t], num.tail_r0, num.tail_doublings, num.tail_tol, num.tail_cap
                ),
                tags,
            ),
        )
    )
    w1 = weight_threshold(spec.p1, spec.n_dim, num.weight_probe, num.weight_n)
    w2 = weight_threshold(spec.p2, spec.n_dim, num.weight_probe, num.weight_n)
    kind, reason = dispatch_thm1(
        verdicts["P1"], verdicts["Q1"], verdicts["P2"], verdicts["Q2"], w1.ok, w2.ok
    )
    return BehaviorClass(
        kind=kind,
        evidence=verdicts,
        weight_checks={"p1": w1, "p2": w2},
        reason=reason,
    )


# ---------------------------------------------------------------------------
# existence gates


@dataclass(frozen=True)
class GateReport:
    regime: str
    verdicts: dict[str, ConvergenceVerdict] = field(default_factory=dict)
    weight_checks: dict[str, WeightCheck] = field(default_factory=dict)
    margins: dict[str, float] = field(default_factory=dict)
    asserted_behavior: str | None = None
    reason: str = ""


def _h_family(spec: ProblemSpec, which: int, num: Numerics) -> tuple[float, Callable[[float], float]]:
    ev = HEvaluator(
        spec,
        which,
        n_panels=num.n_panels,
        grading=num.grading,
        nodes_per_panel=num.nodes_per_panel,
        max_upper=num.h_max_upper,
    )
    return ev.lower, ev.value_at_upper


def _separation(v_small: ConvergenceVerdict, v_big: ConvergenceVerdict) -> tuple[str, float]:
    """Error-bar comparison of two finite limits: 'separated' when
    big - small exceeds the combined error estimates, 'violated' when it is
    below minus the combined estimates, 'unresolved' in between."""
    gap = (v_big.value or 0.0) - (v_small.value or 0.0)
    err = (v_big.error_estimate or 0.0) + (v_small.error_estimate or 0.0)
    if gap > err:
        return "separated", gap
    if gap < -err:
        return "violated", gap
    return "unresolved", gap


def existence_gate(spec: ProblemSpec, num: Numerics = Numerics()) -> GateReport:
    """Decide which existence regime the instance sits in.

    Consults the value-axis growth limits first; the gradient-envelope and
    lower-envelope limits only as each mixed regime requires.  Strict
    inequalities between extrapolated limits demand separation beyond the
    combined error bars; anything unresolved stays indeterminate rather
    than guessed.
    """
    verdicts: dict[str, ConvergenceVerdict] = {}
    margins: dict[str, float] = {}
    weight_checks: dict[str, WeightCheck] = {}

    lo1, fam_h1 = _h_family(spec, 1, num)
    lo2, fam_h2 = _h_family(spec, 2, num)
    v_h1 = tail_limit(fam_h1, 2.0 * lo1, num.tail_doublings, num.tail_tol, num.tail_cap)
    v_h2 = tail_limit(fam_h2, 2.0 * lo2, num.tail_doublings, num.tail_tol, num.tail_cap)
    verdicts["H1"], verdicts["H2"] = v_h1, v_h2

    def radial_verdict(tag: str) -> ConvergenceVerdict:
        fam = final_value_family(spec, tag, num.n_panels, num.grading, num.nodes_per_panel)
        v = tail_limit(fam, num.tail_r0, num.tail_doublings, num.tail_tol, num.tail_cap)
        verdicts[tag] = v
        return v

    if v_h1.divergent and v_h2.divergent:
        return GateReport(regime="H_INF_BOTH", verdicts=verdicts)

    if v_h1.indeterminate or v_h2.indeterminate:
        return GateReport(
            regime="INDETERMINATE",
            verdicts=verdicts,
            reason="value-axis growth limit could not be classified",
        )

    def sandwich_side(which: int, v_h: ConvergenceVerdict) -> str:
        tag = "P3" if which == 1 else "Q3"
        v3 = radial_verdict(tag)
        if v3.indeterminate:
            return "unresolved"
        if v3.divergent:
            return "violated"
        status, gap = _separation(v3, v_h)
        margins[f"H{which}-{tag}"] = gap
        return status

    if v_h1.finite and v_h2.finite:
        s1 = sandwich_side(1, v_h1)
        s2 = sandwich_side(2, v_h2)
        if s1 == "separated" and s2 == "separated":
            return GateReport(
                regime="H_FIN_SEPARATED",
                verdicts=verdicts,
                margins=margins,
                asserted_behavior="F",
            )
        if "violated" in (s1, s2):
            return GateReport(
                regime="NONE",
                verdicts=verdicts,
                margins=margins,
                reason="gradient envelope reaches or exceeds the finite growth limit",
            )
        return GateReport(
            regime="INDETERMINATE",
            verdicts=verdicts,
            margins=margins,
            reason="strict separation not resolved beyond error bars",
        )

    # exactly one side divergent
    div_side = 1 if v_h1.divergent else 2
    fin_side = 2 if div_side == 1 else 1
    v_h_fin = v_h2 if div_side == 1 else v_h1
    s_fin = sandwich_side(fin_side, v_h_fin)
    if s_fin == "violated":
        return GateReport(
            regime="NONE",
            verdicts=verdicts,
            margins=margins,
            reason="sandwich gate on the bounded side is violated",
        )
    if s_fin != "separated":
        return GateReport(
            regime="INDETERMINATE",
            verdicts=verdicts,
            margins=margins,
            reason="sandwich gate on the bounded side not resolved",
        )
    # bounded-side gate holds; the unbounded side decides SF vs F
    lower_tag = "P1" if div_side == 1 else "Q1"
    v_lower = radial_verdict(lower_tag)
    if v_lower.divergent:
        regime = "MIXED_SF2" if div_side == 1 else "MIXED_SF1"
        return GateReport(
            regime=regime,
            verdicts=verdicts,
            margins=margins,
            asserted_behavior="SF2" if div_side == 1 else "SF1",
        )
    bounded_tag = "P2" if div_side == 1 else "Q2"
    v_bounded = radial_verdict(bounded_tag)
    wname = "p1" if div_side == 1 else "p2"
    wcheck = weight_threshold(
        spec.p1 if div_side == 1 else spec.p2, spec.n_dim, num.weight_probe, num.weight_n
    )
    weight_checks[wname] = wcheck
    if v_bounded.finite and wcheck.ok:
        regime = "MIXED_F_P2" if div_side == 1 else "MIXED_F_Q2"
        return GateReport(
            regime=regime,
            verdicts=verdicts,
            weight_checks=weight_checks,
            margins=margins,
            asserted_behavior="F",
        )
    return GateReport(
        regime="INDETERMINATE",
        verdicts=verdicts,
        weight_checks=weight_checks,
        margins=margins,
        reason="divergent-growth side matches neither the unbounded nor the bounded gate",
    )


# ---------------------------------------------------------------------------
# necessity consistency check


@dataclass(frozen=True)
class NecessityReport:
    applicable: bool
    consistent: bool | None = None
    reason: str = ""
    evidence: dict[str, ConvergenceVerdict] = field(default_factory=dict)
    weight_checks: dict[str, WeightCheck] = field(default_factory=dict)


def check_necessity_v(
    spec: ProblemSpec,
    sol: SolutionPair,
    num: Numerics = Numerics(),
    verdicts: dict[str, ConvergenceVerdict] | None = None,
) -> NecessityReport:
    """Contrapositive consistency of the necessity direction.

    When the computed solution exhibits unbounded behavior on both sides
    (beyond the largeness threshold and still growing) and both weight
    side-conditions hold, P2 and Q2 must not both be finite.  A
    contradiction flags a misclassification by the numerical heuristics;
    the check is purely diagnostic.
    """
    threshold = num.largeness_factor * max(spec.a, spec.b)
    parts = []
    for which, u in ((1, sol.u1), (2, sol.u2)):
        big = u.values[-1] >= threshold
        growing = u.values[-1] > u.values[-2]
        parts.append(big and growing)
    if not all(parts):
        return NecessityReport(
            applicable=False,
            reason=f"solution not large at R_max (threshold {threshold:g}, components large: {parts})",
        )
    w1 = weight_threshold(spec.p1, spec.n_dim, num.weight_probe, num.weight_n)
    w2 = weight_threshold(spec.p2, spec.n_dim, num.weight_probe, num.weight_n)
    wchecks = {"p1": w1, "p2": w2}
    if not (w1.ok and w2.ok):
        return NecessityReport(
            applicable=False,
            reason="weight monotonicity side-condition fails; necessity does not apply",
            weight_checks=wchecks,
        )
    if verdicts is None:
        verdicts = {}
        for tag in ("P2", "Q2"):
            fam = final_value_family(spec, tag, num.n_panels, num.grading, num.nodes_per_panel)
            verdicts[tag] = tail_limit(
                fam, num.tail_r0, num.tail_doublings, num.tail_tol, num.tail_cap
            )
    both_finite = verdicts["P2"].finite and verdicts["Q2"].finite
    return NecessityReport(
        applicable=True,
        consistent=not both_finite,
        reason="" if not both_finite else (
            "contradiction: solution is numerically large on both sides but "
            "P2 and Q2 were both judged finite"
        ),
        evidence=verdicts,
        weight_checks=wchecks,
    )


# ---------------------------------------------------------------------------
# two-sided bounds


@dataclass(frozen=True)
class BoundReport:
    """Node-aligned margins of the four-sided sandwich.

    Lower margins are (u_i - envelope_i) / (1 + |u_i|); upper margins are
    (inverted growth bound - u_i) / (1 + |u_i|), nan where the inversion
    left the computable range (saturation: flagged, not failed).
    """

    radii: np.ndarray
    lower1: np.ndarray
    upper1: np.ndarray
    lower2: np.ndarray
    upper2: np.ndarray
    saturated1: int
    saturated2: int
    slack: float

    def _worst(self, arr: np.ndarray) -> tuple[float, float]:
        finite = np.isfinite(arr)
        if not np.any(finite):
            return float("nan"), float("nan")
        i = int(np.nanargmin(np.where(finite, arr, np.inf)))
        return float(arr[i]), float(self.radii[i])

    @property
    def worst(self) -> dict[str, tuple[float, float]]:
        return {
            "lower1": self._worst(self.lower1),
            "upper1": self._worst(self.upper1),
            "lower2": self._worst(self.lower2),
            "upper2": self._worst(self.upper2),
        }

    @property
    def passed(self) -> bool:
        for m, _ in self.worst.values():
            if np.isfinite(m) and m < -self.slack:
                return False
        return True


def _upper_bound_values(hev: HEvaluator, y: np.ndarray) -> np.ndarray:
    return hev.inverse_many(y)


def bounds_thm2(
    spec: ProblemSpec,
    sol: SolutionPair,
    num: Numerics = Numerics(),
) -> BoundReport:
    """Verify envelope <= solution <= inverted growth bound at every node."""
    grid = sol.u1.grid
    if sol.u2.grid is not grid and not np.array_equal(sol.u2.grid.nodes, grid.nodes):
        raise ValueError("solution components live on different grids")
    p1prof, q1prof = eval_P1_Q1(spec, grid)
    p3prof, q3prof = eval_P3_Q3(spec, grid)
    h1 = HEvaluator(spec, 1, num.n_panels, num.grading, num.nodes_per_panel, num.h_max_upper)
    h2 = HEvaluator(spec, 2, num.n_panels, num.grading, num.nodes_per_panel, num.h_max_upper)
    u1, u2 = sol.u1.values, sol.u2.values
    scale1, scale2 = 1.0 + np.abs(u1), 1.0 + np.abs(u2)
    lower1 = (u1 - (spec.a + p1prof.values)) / scale1
    lower2 = (u2 - (spec.b + q1prof.values)) / scale2
    ub1 = _upper_bound_values(h1, np.sqrt(spec.cbar1) * p3prof.values)
    ub2 = _upper_bound_values(h2, np.sqrt(spec.cbar2) * q3prof.values)
    upper1 = (ub1 - u1) / scale1
    upper2 = (ub2 - u2) / scale2
    return BoundReport(
        radii=grid.nodes.copy(),
        lower1=lower1,
        upper1=upper1,
        lower2=lower2,
        upper2=upper2,
        saturated1=int(np.sum(~np.isfinite(ub1))),
        saturated2=int(np.sum(~np.isfinite(ub2))),
        slack=num.bounds_slack,
    )


# ---------------------------------------------------------------------------
# a-priori bound enforcement inside the solver


class AprioriViolation(RuntimeError):
    """An iterate pierced the inverted growth bound beyond slack."""


def apriori_check(
    spec: ProblemSpec,
    grid: Grid,
    num: Numerics = Numerics(),
) -> Callable[[np.ndarray, np.ndarray, int], None]:
    """Build an iterate hook enforcing the a-priori upper bounds.

    The bounds do not depend on the iterate, so the inverted values are
    precomputed once per grid; each iteration is a vectorized compare with
    the configured relative slack.  Nodes where the inversion saturated
    carry no information and are skipped.
    """
    p3prof, q3prof = eval_P3_Q3(spec, grid)
    h1 = HEvaluator(spec, 1, num.n_panels, num.grading, num.nodes_per_panel, num.h_max_upper)
    h2 = HEvaluator(spec, 2, num.n_panels, num.grading, num.nodes_per_panel, num.h_max_upper)
    ub1 = _upper_bound_values(h1, np.sqrt(spec.cbar1) * p3prof.values)
    ub2 = _upper_bound_values(h2, np.sqrt(spec.cbar2) * q3prof.values)
    slack = num.bounds_slack
    nodes = grid.nodes

    def check(u1: np.ndarray, u2: np.ndarray, k: int):
        for which, u, ub in ((1, u1, ub1), (2, u2, ub2)):
            margin = (ub - u) / (1.0 + np.abs(u))
            bad = np.isfinite(margin) & (margin < -slack)
            if np.any(bad):
                i = int(np.flatnonzero(bad)[0])
                raise AprioriViolation(
                    f"iterate {k} of u{which} exceeds the a-priori bound at "
                    f"r={nodes[i]:g}: {u[i]:g} > {ub[i]:g} (margin {margin[i]:.3g})"
                )

    return check
