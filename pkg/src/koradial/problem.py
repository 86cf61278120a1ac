"""Validated problem instances and sampled hypothesis checks.

A problem couples two radial Poisson equations through nondecreasing
nonlinearities: Laplacian(u1) = p1(r) f1(u2), Laplacian(u2) = p2(r) f2(u1)
in dimension N >= 3, anchored by the central values u1(0) = a, u2(0) = b.
The growth hypotheses relate each nonlinearity to a separable majorant
f(t*w) <= cbar * h(t) * w(w) above instance-dependent thresholds; the
checks here can only falsify such analytic claims by sampling, so every
entry records the grid it used and a concrete witness on failure.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr_dsl import EvalError, Expression, chebyshev_points, evaluate

__all__ = [
    "ScalarFn",
    "ProblemSpec",
    "HypothesisCheck",
    "HypothesisReport",
    "WeightCheck",
    "big_m",
    "check_c1",
    "check_c2",
    "check_nonneg",
    "check_increasing",
    "weight_threshold",
    "run_hypothesis_checks",
    "TOL_ZERO",
    "TOL_C2",
]

TOL_ZERO = 1e-12  # absolute tolerance for f(0) = 0
TOL_C2 = 1e-9  # relative slack for the separable-majorant inequality


@dataclass(frozen=True)
class ScalarFn:
    """A nonnegative scalar function on [0, inf) with declared metadata.

    The declarations are user assertions; nothing is assumed from them.
    Sampled checks (check_c1, check_nonneg, ...) are the only enforcement.
    """

    fn: Callable[[float], float]
    monotone_nondecreasing: bool = False
    zero_at_zero: bool = False
    label: str = ""

    def __call__(self, x: float) -> float:
        return float(self.fn(x))

    def map(self, values: np.ndarray) -> np.ndarray:
        return np.array([float(self.fn(float(v))) for v in np.asarray(values).ravel()]).reshape(
            np.asarray(values).shape
        )

    @classmethod
    def from_expression(
        cls,
        expr: Expression,
        bindings: dict[str, float] | None = None,
        label: str = "",
        **flags,
    ) -> "ScalarFn":
        env = dict(bindings or {})
        return cls(fn=lambda x: evaluate(expr, x, env), label=label, **flags)


@dataclass(frozen=True)
class ProblemSpec:
    """Full instance: dimension, central values, the eight functions and
    the comparison constants.  Immutable after validation."""

    n_dim: int
    a: float
    b: float
    p1: ScalarFn
    p2: ScalarFn
    f1: ScalarFn
    f2: ScalarFn
    h1: ScalarFn
    h2: ScalarFn
    w1: ScalarFn
    w2: ScalarFn
    cbar1: float = 1.0
    cbar2: float = 1.0
    eps: float = 0.5

    def __post_init__(self):
        if int(self.n_dim) != self.n_dim or self.n_dim < 3:
            raise ValueError(f"dimension must be an integer >= 3, got {self.n_dim}")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("central values a, b must be positive")
        if not (self.cbar1 > 0 and self.cbar2 > 0):
            raise ValueError("cbar1, cbar2 must be positive")
        if not (self.eps > 0):
            raise ValueError("eps must be positive")
        if not (self.f2(self.a) > 0):
            raise ValueError(f"f2(a) = {self.f2(self.a):g} must be positive")
        if not (self.f1(self.b) > 0):
            raise ValueError(f"f1(b) = {self.f1(self.b):g} must be positive")

    def swapped(self) -> "ProblemSpec":
        """Mirror instance: exchange the two equations' data."""
        return ProblemSpec(
            n_dim=self.n_dim,
            a=self.b,
            b=self.a,
            p1=self.p2,
            p2=self.p1,
            f1=self.f2,
            f2=self.f1,
            h1=self.h2,
            h2=self.h1,
            w1=self.w2,
            w2=self.w1,
            cbar1=self.cbar2,
            cbar2=self.cbar1,
            eps=self.eps,
        )

    def fingerprint(self) -> str:
        parts = [
            str(self.n_dim),
            repr(self.a),
            repr(self.b),
            repr(self.cbar1),
            repr(self.cbar2),
            repr(self.eps),
        ] + [
            f.label or hex(id(f.fn))
            for f in (self.p1, self.p2, self.f1, self.f2, self.h1, self.h2, self.w1, self.w2)
        ]
        return hashlib.sha1("|".join(parts).encode()).hexdigest()[:16]


def big_m(spec: ProblemSpec) -> tuple[float, float]:
    """Normalization constants for the growth-comparison thresholds.

    M1 = b/f2(a) when b > f2(a), else 1; M2 = a/f1(b) when a > f1(b),
    else 1.  Both are >= 1 by construction.  Note the pairing: each side's
    own central value is measured against the opposite nonlinearity
    evaluated at the other central value, matching the coupling of the
    system (f2 drives u2's equation from u1, and vice versa).
    """
    f2a = spec.f2(spec.a)
    f1b = spec.f1(spec.b)
    if f2a <= 0:
        raise ValueError(f"f2(a) = {f2a:g} must be positive")
    if f1b <= 0:
        raise ValueError(f"f1(b) = {f1b:g} must be positive")
    m1 = spec.b / f2a if spec.b > f2a else 1.0
    m2 = spec.a / f1b if spec.a > f1b else 1.0
    return m1, m2


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    status: str  # pass | fail | indeterminate
    witness: dict | None = None
    sampling: dict = field(default_factory=dict)
    detail: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    entries: tuple[HypothesisCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(e.status == "pass" for e in self.entries)

    @property
    def any_failed(self) -> bool:
        return any(e.status == "fail" for e in self.entries)

    @property
    def any_indeterminate(self) -> bool:
        return any(e.status == "indeterminate" for e in self.entries)


def _sample(f: ScalarFn, xs) -> list[float]:
    return [f(x) for x in xs]


def check_nonneg(f: ScalarFn, name: str, R: float, n: int) -> HypothesisCheck:
    """Sampled nonnegativity on [0, R] (Chebyshev points plus endpoints)."""
    xs = chebyshev_points(0.0, R, n)
    sampling = {"lo": 0.0, "hi": R, "n": n, "spacing": "chebyshev+endpoints"}
    try:
        for x in xs:
            y = f(x)
            if y < 0:
                return HypothesisCheck(
                    name, "fail", witness={"x": x, "value": y}, sampling=sampling
                )
    except (EvalError, ValueError) as e:
        return HypothesisCheck(name, "indeterminate", sampling=sampling, detail=str(e))
    return HypothesisCheck(name, "pass", sampling=sampling)


def check_c1(f: ScalarFn, R: float, n: int, name: str = "C1", tol_zero: float = TOL_ZERO) -> HypothesisCheck:
    """f(0) = 0 (within tol_zero), nonnegative, nondecreasing on consecutive
    samples, and strictly positive at sampled s > 0, over [0, R]."""
    if R <= 0 or n < 3:
        raise ValueError("need R > 0 and n >= 3")
    xs = np.linspace(0.0, R, n)
    sampling = {"lo": 0.0, "hi": R, "n": n, "spacing": "uniform", "tol_zero": tol_zero}
    try:
        ys = _sample(f, xs)
    except (EvalError, ValueError) as e:
        return HypothesisCheck(name, "indeterminate", sampling=sampling, detail=str(e))
    if abs(ys[0]) > tol_zero:
        return HypothesisCheck(
            name, "fail", witness={"x": 0.0, "value": ys[0], "violates": "f(0)=0"}, sampling=sampling
        )
    for x, y in zip(xs, ys):
        if y < 0:
            return HypothesisCheck(
                name, "fail", witness={"x": float(x), "value": y, "violates": "f>=0"}, sampling=sampling
            )
    for i in range(1, len(xs)):
        if ys[i] < ys[i - 1]:
            return HypothesisCheck(
                name,
                "fail",
                witness={
                    "x": float(xs[i - 1]),
                    "x_next": float(xs[i]),
                    "value": ys[i - 1],
                    "value_next": ys[i],
                    "violates": "nondecreasing",
                },
                sampling=sampling,
            )
    for x, y in zip(xs[1:], ys[1:]):
        if not (y > 0):
            return HypothesisCheck(
                name, "fail", witness={"x": float(x), "value": y, "violates": "f(s)>0 for s>0"}, sampling=sampling
            )
    return HypothesisCheck(name, "pass", sampling=sampling)


def check_increasing(f: ScalarFn, name: str, hi: float, n: int) -> HypothesisCheck:
    """Sampled monotone (nondecreasing, with some overall increase) on [0, hi]."""
    xs = np.linspace(0.0, hi, n)
    sampling = {"lo": 0.0, "hi": hi, "n": n, "spacing": "uniform"}
    try:
        ys = _sample(f, xs)
    except (EvalError, ValueError) as e:
        return HypothesisCheck(name, "indeterminate", sampling=sampling, detail=str(e))
    for i in range(1, len(xs)):
        if ys[i] < ys[i - 1]:
            return HypothesisCheck(
                name,
                "fail",
                witness={"x": float(xs[i - 1]), "x_next": float(xs[i]), "value": ys[i - 1], "value_next": ys[i]},
                sampling=sampling,
            )
    if not (ys[-1] > ys[0]):
        return HypothesisCheck(
            name, "fail", witness={"x": 0.0, "x_next": float(hi), "value": ys[0], "value_next": ys[-1]},
            sampling=sampling, detail="no overall increase",
        )
    return HypothesisCheck(name, "pass", sampling=sampling)


def check_c2(
    spec: ProblemSpec,
    t_max: float,
    w_max: float,
    n: int,
    tol_c2: float = TOL_C2,
) -> HypothesisCheck:
    """Sampled separable-majorant inequality on both sides.

    Side 1: f1(t*w) <= cbar1*h1(t)*w1(w) on [M1*f2(a), t_max] x [1, w_max];
    side 2 mirrors with f2/h2/w2/cbar2 on [M2*f1(b), t_max] x [1, w_max].
    Sampling never dips below the thresholds, where the hypothesis says
    nothing about h and w.
    """
    m1, m2 = big_m(spec)
    t_lo1 = m1 * spec.f2(spec.a)
    t_lo2 = m2 * spec.f1(spec.b)
    if not (t_max > t_lo1 and t_max > t_lo2):
        raise ValueError(f"t_max must exceed both thresholds {t_lo1:g} and {t_lo2:g}")
    if not (w_max > 1):
        raise ValueError("w_max must exceed 1")
    sampling = {
        "t_lo_side1": t_lo1,
        "t_lo_side2": t_lo2,
        "t_max": t_max,
        "w_max": w_max,
        "n": n,
        "tol_c2": tol_c2,
    }
    sides = (
        (1, spec.f1, spec.h1, spec.w1, spec.cbar1, t_lo1),
        (2, spec.f2, spec.h2, spec.w2, spec.cbar2, t_lo2),
    )
    try:
        for side, f, h, w, cbar, t_lo in sides:
            for t in np.linspace(t_lo, t_max, n):
                ht = h(float(t))
                for wv in np.linspace(1.0, w_max, n):
                    lhs = f(float(t) * float(wv))
                    rhs = cbar * ht * w(float(wv))
                    if lhs > rhs * (1.0 + tol_c2):
                        return HypothesisCheck(
                            "C2",
                            "fail",
                            witness={"side": side, "t": float(t), "w": float(wv), "lhs": lhs, "rhs": rhs},
                            sampling=sampling,
                        )
    except (EvalError, ValueError) as e:
        return HypothesisCheck("C2", "indeterminate", sampling=sampling, detail=str(e))
    return HypothesisCheck("C2", "pass", sampling=sampling)


@dataclass(frozen=True)
class WeightCheck:
    """Result of probing r^(2N-2) p(r) for an eventually-nondecreasing tail."""

    ok: bool
    threshold: float | None = None
    reason: str = ""
    sampling: dict = field(default_factory=dict)


def weight_threshold(p: ScalarFn, n_dim: int, R_probe: float, n: int) -> WeightCheck:
    """Smallest sampled radius beyond which r^(2N-2) p(r) is nondecreasing.

    Fails when only the trivial single-sample suffix is monotone on
    [0, R_probe] at this resolution.
    """
    if R_probe <= 0 or n < 3:
        raise ValueError("need R_probe > 0 and n >= 3")
    xs = np.linspace(0.0, R_probe, n)
    sampling = {"lo": 0.0, "hi": R_probe, "n": n}
    try:
        g = np.array([x ** (2 * n_dim - 2) * p(float(x)) for x in xs])
    except (EvalError, ValueError) as e:
        return WeightCheck(ok=False, reason=str(e), sampling=sampling)
    if not np.all(np.isfinite(g)):
        return WeightCheck(ok=False, reason="non-finite weight sample", sampling=sampling)
    i = len(xs) - 1
    while i > 0 and g[i] >= g[i - 1]:
        i -= 1
    if i == len(xs) - 1:
        return WeightCheck(
            ok=False,
            reason=f"no nondecreasing suffix of r^{2 * n_dim - 2}*p(r) found on [0, {R_probe:g}]",
            sampling=sampling,
        )
    return WeightCheck(ok=True, threshold=float(xs[i]), sampling=sampling)


def run_hypothesis_checks(
    spec: ProblemSpec,
    R: float,
    n: int = 200,
    t_max: float | None = None,
    w_max: float = 100.0,
    c2_n: int = 60,
) -> HypothesisReport:
    """All sampled hypothesis checks for one instance."""
    m1, m2 = big_m(spec)
    if t_max is None:
        t_max = 100.0 * max(m1 * spec.f2(spec.a), m2 * spec.f1(spec.b), 1.0)
    entries = [
        check_nonneg(spec.p1, "P1:p1-nonnegative", R, n),
        check_nonneg(spec.p2, "P1:p2-nonnegative", R, n),
        check_c1(spec.f1, R, n, name="C1:f1"),
        check_c1(spec.f2, R, n, name="C1:f2"),
        check_increasing(spec.h1, "C2:h1-increasing", t_max, n),
        check_increasing(spec.h2, "C2:h2-increasing", t_max, n),
        check_increasing(spec.w1, "C2:w1-increasing", w_max, n),
        check_increasing(spec.w2, "C2:w2-increasing", w_max, n),
        check_c2(spec, t_max=t_max, w_max=w_max, n=c2_n),
    ]
    return HypothesisReport(entries=tuple(entries))
