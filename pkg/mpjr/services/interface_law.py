"""
Regularized Lennard-Jones interface law parameterized by (delta_gamma, p_max).

Tractions are positive when attractive. The analytic law is

    p_n(g) = a2 * g**-3 - a1 * g**-9 = 8*dg/(3*g0) * [(g0/g)**3 - (g0/g)**9]

with g0 = 16/(9*sqrt(3)) * dg / p_max. Its regularized form replaces the
asymptote below g_n0 by the tangent line of slope k_cap and the far field
beyond g_nc1 by a linear tail that closes the area at g_nc2.

Every evaluation function accepts either a single `LJLawParams` or a
`LawTable` of per-point arrays; gaps broadcast against the table.
"""

import math
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import ValidationError
from scipy.optimize import brentq

from mpjr.core.exceptions import ParameterizationError
from mpjr.schemas.law import LJLawParams, PenaltyLaw

logger = structlog.get_logger()

G0_FACTOR = 16.0 / (9.0 * math.sqrt(3.0))
G_MAX_FACTOR = 3.0 ** (1.0 / 6.0)
INFLECTION_FACTOR = 7.5 ** (1.0 / 6.0)
TAIL_AREA_FRACTION = 0.01
ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class LawTable:
    """Struct-of-arrays view of many `LJLawParams` (one entry per point)."""

    delta_gamma: np.ndarray
    p_max: np.ndarray
    g0: np.ndarray
    g_max: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    g_n0: np.ndarray
    k_reg: np.ndarray
    g_nc1: np.ndarray
    g_nc2: np.ndarray
    area_total: np.ndarray

    @classmethod
    def from_params(cls, params: Sequence[LJLawParams]) -> "LawTable":
        """Stack scalar parameter sets into arrays."""
        return cls(**{
            f.name: np.array([getattr(p, f.name) for p in params], dtype=float)
            for f in fields(cls)
        })

    def take(self, index: np.ndarray) -> "LawTable":
        """Gather entries; the result has the shape of `index`."""
        return LawTable(**{f.name: getattr(self, f.name)[index] for f in fields(self)})

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.g0.shape


LawLike = Union[LJLawParams, LawTable]


def _scalar_or_array(value: np.ndarray):
    return value if np.ndim(value) else float(value)


# Analytic law ------------------------------------------------------------

def _power(a1, a2, g):
    return a2 * g ** -3 - a1 * g ** -9


def _power_slope(a1, a2, g):
    return -3.0 * a2 * g ** -4 + 9.0 * a1 * g ** -10


def _area_beyond(a1, a2, x):
    # integral of the analytic law over [x, inf)
    return a2 / (2.0 * x ** 2) - a1 / (8.0 * x ** 8)


def power_law_traction(params: LawLike, g):
    """Analytic (unregularized) traction."""
    return _scalar_or_array(_power(params.a1, params.a2, np.asarray(g, dtype=float)))


def power_law_tangent(params: LawLike, g):
    """Slope of the analytic traction."""
    return _scalar_or_array(_power_slope(params.a1, params.a2, np.asarray(g, dtype=float)))


def analytic_area(params: LawLike, x, y=math.inf):
    """Integral of the analytic law over [x, y]; y may be infinite."""
    return _scalar_or_array(
        _area_beyond(params.a1, params.a2, np.asarray(x, dtype=float))
        - _area_beyond(params.a1, params.a2, np.asarray(y, dtype=float))
    )


# Regularization branches --------------------------------------------------

def repulsive_branch(params: LawLike, g):
    """Tangent line to the analytic law at g_n0 (used for g <= g_n0)."""
    g = np.asarray(g, dtype=float)
    p_n0 = _power(params.a1, params.a2, params.g_n0)
    return _scalar_or_array(p_n0 + params.k_reg * (g - params.g_n0))


def tail_slope(params: LawLike):
    """Slope of the linear tail between g_nc1 and g_nc2 (negative)."""
    p_nc1 = _power(params.a1, params.a2, params.g_nc1)
    return _scalar_or_array(np.asarray(-p_nc1 / (params.g_nc2 - params.g_nc1)))


def tail_branch(params: LawLike, g):
    """Linear decay from p_n(g_nc1) to zero at g_nc2."""
    g = np.asarray(g, dtype=float)
    p_nc1 = _power(params.a1, params.a2, params.g_nc1)
    return _scalar_or_array(p_nc1 * (params.g_nc2 - g) / (params.g_nc2 - params.g_nc1))


# Regularized law ------------------------------------------------------------

def traction(params: LawLike, g):
    """
    Regularized traction p_n(g); total function of the gap.

    Branches close on the right: g <= g_n0 repulsive line, g <= g_nc1 power
    law, g <= g_nc2 tail, zero beyond.
    """
    g = np.asarray(g, dtype=float)
    g_mid = np.clip(g, params.g_n0, params.g_nc1)
    p = np.where(
        g <= params.g_n0,
        repulsive_branch(params, g),
        np.where(
            g <= params.g_nc1,
            _power(params.a1, params.a2, g_mid),
            np.where(g <= params.g_nc2, tail_branch(params, g), 0.0)
        )
    )
    return _scalar_or_array(p)


def tangent(params: LawLike, g):
    """Slope dp_n/dg of the active branch; right-branch value at breakpoints."""
    g = np.asarray(g, dtype=float)
    g_mid = np.clip(g, params.g_n0, params.g_nc1)
    dp = np.where(
        g < params.g_n0,
        params.k_reg,
        np.where(
            g < params.g_nc1,
            _power_slope(params.a1, params.a2, g_mid),
            np.where(g < params.g_nc2, tail_slope(params), 0.0)
        )
    )
    return _scalar_or_array(dp)


def potential(params: LawLike, g):
    """
    Interface energy density phi(g) with phi' = p_n and phi = 0 beyond g_nc2.

    phi(g_n0) = -area_total: full separation from the repulsive switch costs
    the whole signed area.
    """
    g = np.asarray(g, dtype=float)
    a1, a2 = params.a1, params.a2
    p_nc1 = _power(a1, a2, params.g_nc1)
    area_tail = 0.5 * p_nc1 * (params.g_nc2 - params.g_nc1)

    g_mid = np.clip(g, params.g_n0, params.g_nc1)
    phi_mid = -area_tail - (_area_beyond(a1, a2, g_mid) - _area_beyond(a1, a2, params.g_nc1))

    d = params.g_n0 - g
    p_n0 = _power(a1, a2, params.g_n0)
    phi_rep = -params.area_total - (p_n0 * d - 0.5 * params.k_reg * d ** 2)

    phi_tail = -0.5 * tail_branch(params, g) * (params.g_nc2 - g)

    phi = np.where(
        g <= params.g_n0,
        phi_rep,
        np.where(g <= params.g_nc1, phi_mid, np.where(g <= params.g_nc2, phi_tail, 0.0))
    )
    return _scalar_or_array(phi)


# Penalty comparison law ----------------------------------------------------

def penalty_traction(law: PenaltyLaw, g):
    """Repulsive-only penalty traction k_pen * min(g, 0)."""
    g = np.asarray(g, dtype=float)
    return _scalar_or_array(law.k_pen * np.minimum(g, 0.0))


def penalty_tangent(law: PenaltyLaw, g):
    g = np.asarray(g, dtype=float)
    return _scalar_or_array(np.where(g < 0.0, law.k_pen, 0.0))


def penalty_potential(law: PenaltyLaw, g):
    g = np.asarray(g, dtype=float)
    return _scalar_or_array(0.5 * law.k_pen * np.minimum(g, 0.0) ** 2)


def law_response(law: Union[LawLike, PenaltyLaw], g) -> Tuple[np.ndarray, np.ndarray]:
    """Traction and tangent of whichever law is attached to the points."""
    if isinstance(law, PenaltyLaw):
        return penalty_traction(law, g), penalty_tangent(law, g)
    return traction(law, g), tangent(law, g)


def law_potential(law: Union[LawLike, PenaltyLaw], g):
    if isinstance(law, PenaltyLaw):
        return penalty_potential(law, g)
    return potential(law, g)


# Parameterization ------------------------------------------------------------

@lru_cache(maxsize=65536)
def derive_params(delta_gamma: float, p_max: float, k_cap: float) -> LJLawParams:
    """
    Build the regularized law from AFM adhesion energy and peak traction.

    g_n0 is where the analytic slope equals k_cap; g_nc1 leaves 1% of the
    signed area A_tot = A(g_n0, inf) beyond it; the tail closes that 1% at
    g_nc2.
    """
    for name, value in (("delta_gamma", delta_gamma), ("p_max", p_max), ("k_cap", k_cap)):
        if not (value > 0 and math.isfinite(value)):
            raise ParameterizationError(f"{name} must be a positive finite number", details={name: value})

    g0 = G0_FACTOR * delta_gamma / p_max
    g_max = G_MAX_FACTOR * g0
    a1 = (8.0 / 3.0) * G0_FACTOR ** 8 * delta_gamma ** 9 / p_max ** 8
    a2 = (2048.0 / 729.0) * delta_gamma ** 3 / p_max ** 2

    slope_at_g0 = _power_slope(a1, a2, g0)
    if k_cap <= slope_at_g0:
        raise ParameterizationError(
            "k_cap is below the repulsive slope at g0; the cap cannot meet the repulsive branch",
            details={"k_cap": k_cap, "slope_at_g0": slope_at_g0}
        )

    def slope_excess(g):
        return _power_slope(a1, a2, g) - k_cap

    lo = 0.5 * g0
    while slope_excess(lo) <= 0.0:
        lo *= 0.5
    g_n0 = brentq(slope_excess, lo, g0, xtol=ROOT_RTOL * lo, rtol=ROOT_RTOL)

    area_total = _area_beyond(a1, a2, g_n0)
    if area_total <= 0.0:
        raise ParameterizationError(
            "k_cap is so large that the repulsive sliver cancels the adhesive area",
            details={"k_cap": k_cap, "area_total": area_total}
        )

    tail_area = TAIL_AREA_FRACTION * area_total

    def remaining_area(g):
        return _area_beyond(a1, a2, g) - tail_area

    hi = 2.0 * g_max
    while remaining_area(hi) >= 0.0:
        hi *= 2.0
    g_nc1 = brentq(remaining_area, g_max, hi, xtol=ROOT_RTOL * g_max, rtol=ROOT_RTOL)
    g_nc2 = g_nc1 + 2.0 * tail_area / _power(a1, a2, g_nc1)

    try:
        return LJLawParams(
            delta_gamma=delta_gamma,
            p_max=p_max,
            g0=g0,
            g_max=g_max,
            a1=a1,
            a2=a2,
            g_n0=g_n0,
            k_reg=k_cap,
            g_nc1=g_nc1,
            g_nc2=g_nc2,
            area_total=area_total
        )
    except ValidationError as e:
        raise ParameterizationError(f"inconsistent law parameters: {e.errors()[0]['msg']}")


def max_softening_slope(params: LawLike):
    """
    Largest |dp_n/dg| over the attractive range g > g0.

    The analytic law is steepest at its inflection g = 7.5**(1/6) * g0; the
    linear tail is checked as well.
    """
    g_inflection = INFLECTION_FACTOR * np.asarray(params.g0, dtype=float)
    inflection = np.abs(_power_slope(params.a1, params.a2, g_inflection))
    return _scalar_or_array(np.maximum(inflection, np.abs(tail_slope(params))))


def instability_check(max_abs_slope: float, E: float, t: float) -> bool:
    """Snap-back expected when the interface softens faster than the layer stiffness E/t."""
    if not (max_abs_slope > 0 and E > 0 and t > 0):
        raise ParameterizationError(
            "instability check needs positive slope, modulus and thickness",
            details={"max_abs_slope": max_abs_slope, "E": E, "t": t}
        )
    return max_abs_slope > E / t
