"""Hard-coded population models for the four simulation examples.

Each example fixes a joint law F0 of (event time, mark) and an inspection
law G with closed-form CDF evaluators, so no numerical differentiation is
needed anywhere:

1. X ~ Unif(0,1), Y ~ Exp(1) independent; one inspection T ~ Unif(0, 0.5).
2. X ~ Unif(0,1), Y | X ~ Exp(mean 2/(2X+1)); one inspection T ~ Unif(0,1).
3. X ~ Unif(0,2), Y = X; inspections (T1, T2) uniform on [0,1] x [1,2].
4. (X, Y) uniform on the triangle {0 <= x <= y <= 1}; (T1, T2) atomic with
   weights 0.3, 0.3, 0.4 on (0.25, 0.5), (0.25, 0.75), (0.5, 0.75).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .limits import Measure1D, Measure2D, PopulationModel

EXAMPLE_IDS = (1, 2, 3, 4)


@dataclass(frozen=True)
class ExampleInfo:
    """Evaluation defaults that go with one example model."""

    example_id: int
    description: str
    model: PopulationModel
    default_tau: float
    mark_min: float
    mark_max: float
    slice_x0: float


def _clip01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


# -- example 1 --------------------------------------------------------------


def _ex1_joint(x: float, y: float) -> float:
    if y <= 0.0:
        return 0.0
    return _clip01(x) * -math.expm1(-y)


def _ex1_marg_y(y: float) -> float:
    return -math.expm1(-y) if y > 0.0 else 0.0


def _ex1_x_partial(x: float, y: float) -> float:
    if y <= 0.0 or not 0.0 <= x <= 1.0:
        return 0.0
    return -math.expm1(-y)


def _example_1() -> PopulationModel:
    return PopulationModel(
        f0_joint=_ex1_joint,
        f0_marg_x=_clip01,
        f0_marg_y=_ex1_marg_y,
        g_marginals=(Measure1D(density=lambda t: 2.0, lo=0.0, hi=0.5),),
        g_consecutive=(),
        support_hint=(0.5, "single inspection Unif(0, 0.5)"),
        f0_x_partial=_ex1_x_partial,
    )


# -- example 2 --------------------------------------------------------------


def _ex2_joint(x: float, y: float) -> float:
    if y <= 0.0:
        return 0.0
    x = _clip01(x)
    # int_0^x (1 - exp(-(u+1/2)y)) du with expm1 for small y stability
    return x + math.exp(-0.5 * y) * math.expm1(-x * y) / y


def _ex2_marg_y(y: float) -> float:
    return _ex2_joint(1.0, y)


def _ex2_x_partial(x: float, y: float) -> float:
    if y <= 0.0 or not 0.0 <= x <= 1.0:
        return 0.0
    return -math.expm1(-(x + 0.5) * y)


def _example_2() -> PopulationModel:
    return PopulationModel(
        f0_joint=_ex2_joint,
        f0_marg_x=_clip01,
        f0_marg_y=_ex2_marg_y,
        g_marginals=(Measure1D(density=lambda t: 1.0, lo=0.0, hi=1.0),),
        g_consecutive=(),
        support_hint=(1.0, "single inspection Unif(0, 1)"),
        f0_x_partial=_ex2_x_partial,
    )


# -- example 3 --------------------------------------------------------------


def _ex3_marg_x(x: float) -> float:
    return min(max(x, 0.0), 2.0) / 2.0


def _ex3_joint(x: float, y: float) -> float:
    # Y = X, so F0(x, y) = F0X(min(x, y)); no mark density exists
    return _ex3_marg_x(min(x, y))


def _ex3_x_partial(x: float, y: float) -> float:
    return 0.5 if 0.0 <= x <= 2.0 and x < y else 0.0


def _example_3() -> PopulationModel:
    return PopulationModel(
        f0_joint=_ex3_joint,
        f0_marg_x=_ex3_marg_x,
        f0_marg_y=_ex3_marg_x,
        g_marginals=(
            Measure1D(density=lambda t: 1.0, lo=0.0, hi=1.0),
            Measure1D(density=lambda t: 1.0, lo=1.0, hi=2.0),
        ),
        g_consecutive=(
            Measure2D(density=lambda s, t: 1.0, s_lo=0.0, s_hi=1.0,
                      t_lo=1.0, t_hi=2.0),
        ),
        support_hint=(2.0, "two inspections uniform on [0,1] x [1,2]"),
        f0_x_partial=_ex3_x_partial,
    )


# -- example 4 --------------------------------------------------------------


def _ex4_joint(x: float, y: float) -> float:
    x = _clip01(x)
    y = _clip01(y)
    if y <= x:
        return y * y
    return 2.0 * x * y - x * x


def _ex4_marg_x(x: float) -> float:
    x = _clip01(x)
    return 2.0 * x - x * x


def _ex4_marg_y(y: float) -> float:
    y = _clip01(y)
    return y * y


def _ex4_x_partial(x: float, y: float) -> float:
    y = min(y, 1.0)
    if 0.0 <= x < y:
        return 2.0 * y - 2.0 * x
    return 0.0


def _example_4() -> PopulationModel:
    return PopulationModel(
        f0_joint=_ex4_joint,
        f0_marg_x=_ex4_marg_x,
        f0_marg_y=_ex4_marg_y,
        g_marginals=(
            Measure1D(atoms=((0.25, 0.6), (0.5, 0.4))),
            Measure1D(atoms=((0.5, 0.3), (0.75, 0.7))),
        ),
        g_consecutive=(
            Measure2D(atoms=((0.25, 0.5, 0.3), (0.25, 0.75, 0.3),
                             (0.5, 0.75, 0.4))),
        ),
        support_hint=(0.75, "three atomic inspection pairs"),
        f0_x_partial=_ex4_x_partial,
    )


_BUILDERS = {1: _example_1, 2: _example_2, 3: _example_3, 4: _example_4}

_INFO_FIELDS = {
    # default_tau keeps H(tau) well below 1; mark range covers the bulk of Y
    1: ("independent uniform event, unit-exponential mark, current status",
        0.45, 0.0, 4.0, 0.25),
    2: ("uniform event with rate-(x+1/2) exponential mark, current status",
        0.95, 0.0, 4.0, 0.5),
    3: ("mark identical to the event time, two continuous inspections",
        1.9, 0.0, 2.0, 1.5),
    4: ("triangle-supported pair, three atomic inspection-time pairs",
        0.7, 0.0, 1.0, 0.5),
}


def example_model(example_id: int) -> PopulationModel:
    """Fresh model instance for one of the four built-in examples."""
    try:
        return _BUILDERS[example_id]()
    except KeyError:
        raise ValueError(f"unknown example id {example_id}") from None


def example_info(example_id: int) -> ExampleInfo:
    model = example_model(example_id)
    desc, tau, y_lo, y_hi, x0 = _INFO_FIELDS[example_id]
    return ExampleInfo(
        example_id=example_id,
        description=desc,
        model=model,
        default_tau=tau,
        mark_min=y_lo,
        mark_max=y_hi,
        slice_x0=x0,
    )
