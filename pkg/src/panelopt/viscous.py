"""Laminar boundary layer by Thwaites' method and Squire-Young profile drag."""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateDistribution, NoStagnationPoint
from .geometry import Airfoil, panel_arrays
from .panel_core import FlowCondition, FlowSolution

SEPARATION_LAMBDA = -0.09


@dataclass(frozen=True)
class EdgeVelocityDistribution:
    s: np.ndarray
    Ue: np.ndarray
    surface: str
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        ue = np.asarray(self.Ue, dtype=float)
        if s.shape != ue.shape or s.ndim != 1 or s.size < 2:
            raise ValueError("s and Ue must be 1-D arrays of equal length >= 2")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0.0):
            raise ValueError("s must start at 0 and increase strictly")
        if np.any(ue < 0.0):
            raise ValueError("Ue must be non-negative")
        if self.surface not in ("upper", "lower"):
            raise ValueError(f"surface must be 'upper' or 'lower', got {self.surface!r}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "Ue", ue)


@dataclass(frozen=True)
class BoundaryLayerState:
    theta: np.ndarray
    lam: np.ndarray
    H: np.ndarray
    cf: np.ndarray
    separated_at: Optional[int] = None

    @property
    def separated(self) -> bool:
        return self.separated_at is not None


@dataclass(frozen=True)
class DragResult:
    cd: float
    cd_upper: float
    cd_lower: float
    separated: bool
    separated_upper: bool = False
    separated_lower: bool = False
    x_sep_upper: Optional[float] = None
    x_sep_lower: Optional[float] = None


def split_surfaces(solution: FlowSolution, airfoil: Airfoil):
    """Edge-velocity distributions marching from the stagnation point to the trailing edge."""
    gamma = np.asarray(solution.gamma)
    pa = panel_arrays(airfoil)
    # arclength of each control point along the contour
    s_mid = np.cumsum(pa.length) - pa.length / 2

    # stagnation: gamma turns from negative (upper, flow against the point order) to positive
    k = np.flatnonzero((gamma[:-1] < 0.0) & (gamma[1:] >= 0.0))
    if k.size == 0:
        raise NoStagnationPoint("no sign change of gamma along the contour")
    frac = -gamma[k] / (gamma[k + 1] - gamma[k])
    x_stag = pa.mid[k, 0] + frac * (pa.mid[k + 1, 0] - pa.mid[k, 0])
    pick = int(np.argmin(x_stag))
    k, frac = int(k[pick]), float(frac[pick])
    stag = pa.mid[k] + frac * (pa.mid[k + 1] - pa.mid[k])
    s_stag = s_mid[k] + frac * (s_mid[k + 1] - s_mid[k])

    up = np.arange(k, -1, -1)
    lo = np.arange(k + 1, airfoil.n)
    upper = EdgeVelocityDistribution(
        np.concatenate([[0.0], s_stag - s_mid[up]]),
        np.concatenate([[0.0], np.abs(gamma[up])]),
        "upper",
        np.concatenate([[stag[0]], pa.mid[up, 0]]),
        np.concatenate([[stag[1]], pa.mid[up, 1]]),
    )
    lower = EdgeVelocityDistribution(
        np.concatenate([[0.0], s_mid[lo] - s_stag]),
        np.concatenate([[0.0], np.abs(gamma[lo])]),
        "lower",
        np.concatenate([[stag[0]], pa.mid[lo, 0]]),
        np.concatenate([[stag[1]], pa.mid[lo, 1]]),
    )
    return upper, lower


def thwaites_correlations(lam):
    """Shear function l(lambda) and shape factor H(lambda), Cebeci-Bradshaw fits.

    lambda is clipped to [-0.1, 0.1], the range the fits cover.
    """
    lam = np.clip(np.asarray(lam, dtype=float), -0.1, 0.1)
    fav = lam >= 0.0
    # the adverse-branch denominators stay >= 0.007 and 0.04 after clipping
    ell = np.where(fav, 0.22 + 1.57 * lam - 1.8 * lam**2, 0.22 + 1.402 * lam + 0.018 * lam / (0.107 + lam))
    H = np.where(fav, 2.61 - 3.75 * lam + 5.24 * lam**2, 2.088 + 0.0731 / (0.14 + lam))
    return ell, H


def thwaites_march(dist: EdgeVelocityDistribution, Re: float, chord: float = 1.0, v_inf: float = 1.0) -> BoundaryLayerState:
    if not Re > 0.0:
        raise ValueError(f"Re must be positive, got {Re}")
    s, ue = dist.s, dist.Ue
    if not np.any(ue > 0.0):
        raise DegenerateDistribution("edge velocity is identically zero")
    if np.any(ue[1:] == 0.0):
        raise DegenerateDistribution("edge velocity vanishes away from the stagnation point")
    nu = chord * v_inf / Re

    ue5 = ue**5
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (ue5[1:] + ue5[:-1]) * np.diff(s))])
    due = np.gradient(ue, s, edge_order=1)

    theta2 = np.empty_like(ue)
    theta2[1:] = 0.45 * nu * integral[1:] / ue[1:] ** 6
    if ue[0] > 0.0:
        theta2[0] = 0.0
    elif due[0] > 0.0:
        theta2[0] = 0.075 * nu / due[0]
    else:
        raise DegenerateDistribution("edge velocity does not accelerate away from the stagnation point")
    theta = np.sqrt(theta2)

    lam = theta2 / nu * due
    ell, H = thwaites_correlations(lam)
    cf = np.zeros_like(ue)
    ok = (ue > 0.0) & (theta > 0.0)
    cf[ok] = 2.0 * nu * ell[ok] / (ue[ok] * theta[ok])

    sep = np.flatnonzero(lam <= SEPARATION_LAMBDA)
    return BoundaryLayerState(theta, lam, H, cf, int(sep[0]) if sep.size else None)


def squire_young_drag(
    upper: BoundaryLayerState,
    lower: BoundaryLayerState,
    dists,
    flow: FlowCondition,
    chord: float = 1.0,
) -> DragResult:
    """Trailing-edge momentum deficit extrapolated to far wake, per surface.

    A separated surface is evaluated at its separation station.
    """
    parts, xsep = [], []
    for state, dist in zip((upper, lower), dists):
        i = state.separated_at if state.separated else len(state.theta) - 1
        ratio = dist.Ue[i] / flow.v_inf
        parts.append(float(2.0 * state.theta[i] / chord * ratio ** ((state.H[i] + 5.0) / 2.0)))
        xsep.append(float(dist.x[i]) if state.separated and dist.x is not None else None)
    cd_u, cd_l = parts
    return DragResult(
        cd_u + cd_l, cd_u, cd_l, upper.separated or lower.separated, upper.separated, lower.separated, *xsep
    )


@dataclass(frozen=True)
class ViscousResult:
    upper: EdgeVelocityDistribution
    lower: EdgeVelocityDistribution
    bl_upper: BoundaryLayerState
    bl_lower: BoundaryLayerState
    drag: DragResult


def viscous_drag(solution: FlowSolution, airfoil: Airfoil, flow: FlowCondition, Re: float) -> ViscousResult:
    upper, lower = split_surfaces(solution, airfoil)
    chord = airfoil.chord
    bl_u = thwaites_march(upper, Re, chord, flow.v_inf)
    bl_l = thwaites_march(lower, Re, chord, flow.v_inf)
    drag = squire_young_drag(bl_u, bl_l, (upper, lower), flow, chord)
    return ViscousResult(upper, lower, bl_u, bl_l, drag)


def write_bl_csv(dist: EdgeVelocityDistribution, state: BoundaryLayerState) -> str:
    out = io.StringIO()
    out.write("s,Ue,theta,lambda,H,cf\n")
    for row in zip(dist.s, dist.Ue, state.theta, state.lam, state.H, state.cf):
        out.write(",".join(f"{v:.9g}" for v in row) + "\n")
    return out.getvalue()
