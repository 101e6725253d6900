"""Altitude LQR synthesis by pole placement on the double integrator.

The altitude loop is y_ddot = (u1 + u2)/M - g with full state feedback
u1 + u2 = -k1 y - k2 y_dot + N1 r + N2 * 0 + M g.  Prescribing the two
closed-loop eigenvalues fixes (k1, k2); N1 = k1 gives zero steady-state
error, and N2 multiplies a zero so it is set to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ModelParams


@dataclass(frozen=True)
class EigenvaluePair:
    """Prescribed closed-loop poles, both real and strictly negative."""

    lambda_fast: float
    lambda_slow: float

    def __post_init__(self):
        if not (math.isfinite(self.lambda_fast) and math.isfinite(self.lambda_slow)):
            raise ValueError("eigenvalues must be finite")
        if self.lambda_fast >= 0 or self.lambda_slow >= 0:
            raise ValueError("both eigenvalues must be strictly negative")
        if abs(self.lambda_slow) > abs(self.lambda_fast):
            raise ValueError("lambda_slow must not exceed lambda_fast in magnitude")

    @classmethod
    def from_poles(cls, first: float, second: float) -> "EigenvaluePair":
        """Build a pair from two poles in either order."""
        slow, fast = sorted((first, second), key=abs)
        return cls(lambda_fast=fast, lambda_slow=slow)

    def as_tuple(self) -> tuple[float, float]:
        """(slow, fast), the order the experiment tables use."""
        return self.lambda_slow, self.lambda_fast


@dataclass(frozen=True)
class ControllerSpec:
    """Gains and offsets of one altitude controller.

    dominant_lambda is the magnitude of the slow pole; the error
    estimator approximates the second-order loop by a first-order lag
    with this decay rate.
    """

    pair: EigenvaluePair
    k1: float
    k2: float
    n1: float
    n2: float
    dominant_lambda: float

    def __post_init__(self):
        if self.k1 != self.n1:
            raise ValueError("zero steady-state condition requires n1 == k1")
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("gains must be strictly positive for a stable pair")
        if self.dominant_lambda != abs(self.pair.lambda_slow):
            raise ValueError("dominant_lambda must equal |lambda_slow|")


def dominant_eigenvalue(pair: EigenvaluePair) -> float:
    """Magnitude of the slower pole, stored as a positive decay rate."""
    return abs(pair.lambda_slow)


def design_controller(pair: EigenvaluePair, params: ModelParams) -> ControllerSpec:
    """Place the closed-loop poles of the altitude double integrator.

    The characteristic polynomial s^2 + (k2/M) s + k1/M must equal
    (s - l1)(s - l2), so k1 = M l1 l2 and k2 = -M (l1 + l2).  A repeated
    pair is rejected: the estimator needs a distinct real dominant pole.
    """
    if pair.lambda_fast == pair.lambda_slow:
        raise ValueError("repeated eigenvalue pair is not supported")
    l1, l2 = pair.lambda_slow, pair.lambda_fast
    k1 = params.mass * l1 * l2
    k2 = -params.mass * (l1 + l2)
    return ControllerSpec(
        pair=pair,
        k1=k1,
        k2=k2,
        n1=k1,
        n2=0.0,
        dominant_lambda=dominant_eigenvalue(pair),
    )


def control_law(
    spec: ControllerSpec, y: float, y_dot: float, reference: float, params: ModelParams
) -> float:
    """Total thrust command for the altitude loop.

    The reference vector's second entry is identically zero, so n2
    contributes nothing; the M g term trims out gravity.
    """
    return (
        -spec.k1 * y
        - spec.k2 * y_dot
        + spec.n1 * reference
        + spec.n2 * 0.0
        + params.mass * params.gravity
    )
