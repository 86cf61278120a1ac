"""Shared instance builders for the test suite."""

from __future__ import annotations

from pathlib import Path

import pytest

from koradial.problem import ProblemSpec, ScalarFn

REPO = Path(__file__).resolve().parent.parent
CONFIG_DIR = REPO / "configs"

IDENT = ScalarFn(lambda x: x, monotone_nondecreasing=True, zero_at_zero=True, label="x")
ONE = ScalarFn(lambda x: 1.0, label="1")
ZERO = ScalarFn(lambda x: 0.0, label="0")


def power_fn(alpha: float) -> ScalarFn:
    return ScalarFn(
        lambda x: float(x) ** alpha,
        monotone_nondecreasing=True,
        zero_at_zero=True,
        label=f"x^{alpha:g}",
    )


def decaying_weight(sigma: float = 1.0) -> ScalarFn:
    return ScalarFn(lambda r: sigma * (1.0 + r) ** -4.0, label=f"{sigma:g}/(1+x)^4")


def power_spec(alpha=0.5, beta=0.5, p1=ONE, p2=ONE, a=1.0, b=1.0, eps=0.5) -> ProblemSpec:
    """Instance with matching power nonlinearities and growth factors."""
    fa, fb = power_fn(alpha), power_fn(beta)
    return ProblemSpec(
        n_dim=3, a=a, b=b, p1=p1, p2=p2,
        f1=fa, f2=fb, h1=fa, h2=fb, w1=fa, w2=fb, eps=eps,
    )


def unit_spec() -> ProblemSpec:
    """Identity nonlinearities, unit weights, a = b = 1."""
    return ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ONE, p2=ONE,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )


def manufactured_spec() -> ProblemSpec:
    """Weights back-solved from the exact pair (1 + r^2, 2 + r^2)."""
    return ProblemSpec(
        n_dim=3, a=1.0, b=2.0,
        p1=ScalarFn(lambda r: 6.0 / (2.0 + r * r), label="6/(2+x^2)"),
        p2=ScalarFn(lambda r: 6.0 / (1.0 + r * r), label="6/(1+x^2)"),
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )


def zero_weight_spec() -> ProblemSpec:
    return ProblemSpec(
        n_dim=3, a=1.0, b=1.0, p1=ZERO, p2=ZERO,
        f1=IDENT, f2=IDENT, h1=IDENT, h2=IDENT, w1=IDENT, w2=IDENT,
    )


def catalog_specs() -> dict[str, tuple[ProblemSpec, float]]:
    """(spec, R_max) for the shipped catalog, mirroring configs/."""
    return {
        "power-large": (power_spec(), 100.0),
        "power-bounded": (
            power_spec(p1=decaying_weight(), p2=decaying_weight(), a=100.0, b=100.0),
            100.0,
        ),
        "semifinite-1": (
            power_spec(p1=decaying_weight(0.25), p2=ONE, a=100.0, b=100.0),
            100.0,
        ),
        "semifinite-2": (
            power_spec(p1=ONE, p2=decaying_weight(0.25), a=100.0, b=100.0),
            100.0,
        ),
        "manufactured": (manufactured_spec(), 10.0),
        "zero-weights": (zero_weight_spec(), 10.0),
    }


@pytest.fixture(scope="session")
def catalog():
    return catalog_specs()
