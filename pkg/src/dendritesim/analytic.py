"""Closed-form free response of one segment after its reservoir is charged.

Everything here works in deviation coordinates: voltages are measured from
the segment's resting rail, the reservoir starts at ``v0`` and the membrane
at 0. Use ``to_physical`` to map back onto node voltages. Only the
transistor-off phase is modelled; wide input pulses need
``dendritesim.transient``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import overload

import numpy as np
import numpy.typing as npt
from scipy.integrate import solve_ivp

from .model import FloatArray, Polarity, SegmentParams


class DegenerateRootsError(ValueError):
    """The characteristic polynomial has no pair of distinct real negative roots."""


class CoefficientForm(str, Enum):
    """Time constant used in the second exponential's membrane coefficient.

    DERIVED uses R_A*C_R, which is what eliminating v_M from the two node
    equations gives. PRINTED uses R_L*C_M; it agrees with DERIVED only when
    R_A*C_R == R_L*C_M and is kept so the difference can be measured.
    """

    DERIVED = "derived"
    PRINTED = "printed"


@dataclass(frozen=True)
class CharacteristicSolution:
    a_coeff: float
    b_coeff: float
    c_coeff: float
    lambda_plus: float
    lambda_minus: float
    d_plus: float
    d_minus: float
    v0: float
    form: CoefficientForm = CoefficientForm.DERIVED


def characteristic_coeffs(p: SegmentParams) -> tuple[float, float, float]:
    """Coefficients of a*v'' + b*v' + c*v = 0 for the reservoir voltage."""
    a = p.r_axial * p.c_reservoir * p.c_membrane
    b = p.c_reservoir + p.c_membrane + p.c_reservoir * p.r_axial / p.r_leak
    c = 1.0 / p.r_leak
    return a, b, c


def characteristic_roots(a: float, b: float, c: float) -> tuple[float, float]:
    """Roots of a*x**2 + b*x + c, slower (smaller magnitude) root first.

    Raises:
        DegenerateRootsError: a coefficient is not positive or the
            discriminant is not positive.
    """
    if not (a > 0 and b > 0 and c > 0):
        raise DegenerateRootsError(f"coefficients must be positive, got a={a}, b={b}, c={c}")
    disc = b * b - 4.0 * a * c
    if not disc > 0:
        raise DegenerateRootsError(f"non-positive discriminant {disc} for a={a}, b={b}, c={c}")
    # Cancellation-free form: q carries the large root, c/q the small one.
    q = -0.5 * (b + math.sqrt(disc))
    lambda_minus = q / a
    lambda_plus = c / q
    return lambda_plus, lambda_minus


def _membrane_time_constants(
    p: SegmentParams, form: CoefficientForm
) -> tuple[float, float]:
    tau = p.r_axial * p.c_reservoir
    if form is CoefficientForm.PRINTED:
        return tau, p.r_leak * p.c_membrane
    return tau, tau


def solution_coefficients(
    v0: float,
    p: SegmentParams,
    roots: tuple[float, float],
    form: CoefficientForm = CoefficientForm.DERIVED,
) -> tuple[float, float]:
    """Amplitudes (D+, D-) meeting v_R(0) = v0 and v_M(0) = 0.

    D+ + D- == v0 always holds; D+ = v0 / (1 - alpha+ / alpha-) with
    alpha = 1 + tau * lambda.
    """
    lambda_plus, lambda_minus = roots
    tau_plus, tau_minus = _membrane_time_constants(p, form)
    alpha_plus = 1.0 + tau_plus * lambda_plus
    alpha_minus = 1.0 + tau_minus * lambda_minus
    if v0 == 0:
        return 0.0, 0.0
    d_plus = v0 / (1.0 - alpha_plus / alpha_minus)
    return d_plus, v0 - d_plus


def solve_segment(
    p: SegmentParams,
    v0: float,
    form: CoefficientForm = CoefficientForm.DERIVED,
) -> CharacteristicSolution:
    """Bundle coefficients, roots and amplitudes for one segment and initial charge."""
    a, b, c = characteristic_coeffs(p)
    roots = characteristic_roots(a, b, c)
    d_plus, d_minus = solution_coefficients(v0, p, roots, form)
    return CharacteristicSolution(a, b, c, roots[0], roots[1], d_plus, d_minus, v0, form)


@overload
def reservoir_voltage(sol: CharacteristicSolution, t: float) -> float: ...


@overload
def reservoir_voltage(sol: CharacteristicSolution, t: npt.NDArray[np.float64]) -> FloatArray: ...


def reservoir_voltage(
    sol: CharacteristicSolution, t: float | npt.NDArray[np.float64]
) -> float | FloatArray:
    """v_R(t) = D+ exp(lambda+ t) + D- exp(lambda- t)."""
    value = sol.d_plus * np.exp(sol.lambda_plus * t) + sol.d_minus * np.exp(sol.lambda_minus * t)
    if isinstance(t, np.ndarray):
        return np.asarray(value, dtype=np.float64)
    return float(value)


@overload
def membrane_voltage(sol: CharacteristicSolution, p: SegmentParams, t: float) -> float: ...


@overload
def membrane_voltage(
    sol: CharacteristicSolution, p: SegmentParams, t: npt.NDArray[np.float64]
) -> FloatArray: ...


def membrane_voltage(
    sol: CharacteristicSolution, p: SegmentParams, t: float | npt.NDArray[np.float64]
) -> float | FloatArray:
    """v_M(t) = (1 + tau lambda+) D+ exp(lambda+ t) + (1 + tau' lambda-) D- exp(lambda- t)."""
    tau_plus, tau_minus = _membrane_time_constants(p, sol.form)
    k_plus = (1.0 + tau_plus * sol.lambda_plus) * sol.d_plus
    k_minus = (1.0 + tau_minus * sol.lambda_minus) * sol.d_minus
    value = k_plus * np.exp(sol.lambda_plus * t) + k_minus * np.exp(sol.lambda_minus * t)
    if isinstance(t, np.ndarray):
        return np.asarray(value, dtype=np.float64)
    return float(value)


def membrane_peak(sol: CharacteristicSolution, p: SegmentParams) -> tuple[float, float]:
    """Time and value of the membrane extremum, from d v_M / dt = 0."""
    if sol.v0 == 0:
        return 0.0, 0.0
    t_peak = math.log(sol.lambda_minus / sol.lambda_plus) / (sol.lambda_plus - sol.lambda_minus)
    return t_peak, membrane_voltage(sol, p, t_peak)


@overload
def to_physical(v_deviation: float, polarity: Polarity, vdd: float) -> float: ...


@overload
def to_physical(
    v_deviation: npt.NDArray[np.float64], polarity: Polarity, vdd: float
) -> FloatArray: ...


def to_physical(
    v_deviation: float | npt.NDArray[np.float64], polarity: Polarity, vdd: float
) -> float | FloatArray:
    """Map a deviation onto a node voltage: n-type dips below VDD, p-type rises above 0."""
    if polarity is Polarity.N:
        return vdd - v_deviation
    return v_deviation


def integrate_free_response(
    p: SegmentParams, v0: float, times: npt.ArrayLike
) -> tuple[FloatArray, FloatArray]:
    """Numerically integrate the second-order reservoir equation.

    Independent of the closed form: the reservoir ODE is stepped with an
    implicit Radau scheme at tight tolerances and the membrane is rebuilt
    from v_M = v_R + R_A C_R dv_R/dt.

    Returns:
        (v_R, v_M) sampled at ``times``, which must be sorted and start at >= 0.
    """
    t = np.asarray(times, dtype=np.float64)
    a, b, c = characteristic_coeffs(p)
    tau = p.r_axial * p.c_reservoir
    y0 = [v0, -v0 / tau]
    if t.size == 0:
        return np.empty(0), np.empty(0)
    if t[-1] <= 0:
        return np.full(t.shape, float(v0)), np.zeros(t.shape)

    def rhs(_t: float, y: FloatArray) -> list[float]:
        v, dv = y
        return [dv, -(b * dv + c * v) / a]

    scale = max(abs(v0), 1e-3)
    result = solve_ivp(
        rhs,
        (0.0, float(t[-1])),
        y0,
        method="Radau",
        t_eval=t,
        rtol=1e-10,
        atol=1e-12 * scale,
        jac=[[0.0, 1.0], [-c / a, -b / a]],
    )
    if not result.success:
        raise RuntimeError(f"ODE integration failed: {result.message}")
    v_r = np.asarray(result.y[0], dtype=np.float64)
    v_m = v_r + tau * np.asarray(result.y[1], dtype=np.float64)
    return v_r, v_m
