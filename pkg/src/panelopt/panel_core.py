"""Constant-strength vortex panels with a stream-function boundary condition.

The body is a streamline: at every control point the induced stream function
plus the freestream equals an unknown constant C. The Kutta condition
``gamma[0] == -gamma[n-1]`` closes the system, and is eliminated up front so
the dense system stays n x n with unknowns ``[gamma_0 .. gamma_{n-2}, C]``.
"""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EndpointSingularity, SingularSystem
from .geometry import Airfoil, Panel, panel_arrays

TWO_PI = 2.0 * math.pi
ENDPOINT_TOL = 1e-14
PIVOT_FLOOR = 1e-300


@dataclass(frozen=True)
class FlowCondition:
    alpha: float = 0.0
    v_inf: float = 1.0

    def __post_init__(self):
        if not self.v_inf > 0.0:
            raise ValueError(f"v_inf must be positive, got {self.v_inf}")
        if not abs(self.alpha) < math.pi / 2:
            raise ValueError(f"|alpha| must be below pi/2 rad, got {self.alpha}")

    @classmethod
    def degrees(cls, alpha_deg: float, v_inf: float = 1.0) -> "FlowCondition":
        return cls(math.radians(alpha_deg), v_inf)

    def stream_function(self, x, y):
        """Freestream stream function ``v y cos(alpha) - v x sin(alpha)``."""
        return self.v_inf * (np.asarray(y) * math.cos(self.alpha) - np.asarray(x) * math.sin(self.alpha))


@dataclass
class PanelSystem:
    A: np.ndarray
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def nbytes(self) -> int:
        return self.A.nbytes + self.b.nbytes

    def copy(self) -> "PanelSystem":
        return PanelSystem(self.A.copy(order="K"), self.b.copy())


@dataclass(frozen=True)
class FlowSolution:
    gamma: np.ndarray
    C: float

    @property
    def n(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class SurfaceQuantities:
    v_t: np.ndarray
    cp: np.ndarray
    cl: float


def _bracket(px, py, ax, ay, bx, by):
    """The closed-form panel integral of log|x - s|, times |h|; broadcasts."""
    hx, hy = bx - ax, by - ay
    rax, ray = px - ax, py - ay
    rbx, rby = px - bx, py - by
    d0 = rax * hx + ray * hy
    d1 = rbx * hx + rby * hy
    # h_perp = (hy, -hx)
    perp = hy * rax - hx * ray
    return (
        0.5 * d0 * np.log(rax * rax + ray * ray)
        - 0.5 * d1 * np.log(rbx * rbx + rby * rby)
        - perp * np.arctan2(perp, d0)
        + perp * np.arctan2(perp, d1)
        - (hx * hx + hy * hy)
    )


def influence(x, panel: Panel) -> float:
    """Stream function at ``x`` induced by a unit-strength vortex panel.

    Equals the line integral of ``-log|x - s| / (2 pi)`` over the panel.
    """
    px, py = float(x[0]), float(x[1])
    for end in (panel.a, panel.b):
        if math.hypot(px - end[0], py - end[1]) <= ENDPOINT_TOL:
            raise EndpointSingularity(f"field point ({px}, {py}) coincides with a panel endpoint")
    val = _bracket(px, py, *panel.a, *panel.b)
    return float(-val / (TWO_PI * panel.len))


def influence_matrix(points: np.ndarray, airfoil: Airfoil) -> np.ndarray:
    """Raw influences: entry [j, i] is the unit-strength stream function of panel i at points[j]."""
    pa = panel_arrays(airfoil)
    px = points[:, 0:1]
    py = points[:, 1:2]
    ax, ay = pa.a[:, 0], pa.a[:, 1]
    bx, by = pa.b[:, 0], pa.b[:, 1]
    r2 = np.minimum((px - ax) ** 2 + (py - ay) ** 2, (px - bx) ** 2 + (py - by) ** 2)
    if np.any(r2 <= ENDPOINT_TOL**2):
        raise EndpointSingularity("a field point coincides with a panel endpoint")
    return -_bracket(px, py, ax, ay, bx, by) / (TWO_PI * pa.length)


def assemble(airfoil: Airfoil, flow: FlowCondition) -> PanelSystem:
    mid = panel_arrays(airfoil).mid
    coeff = -influence_matrix(mid, airfoil)
    # Fortran order lets LAPACK factor in place
    A = np.asfortranarray(coeff)
    A[:, 0] -= coeff[:, -1]
    A[:, -1] = 1.0
    b = flow.stream_function(mid[:, 0], mid[:, 1])
    return PanelSystem(A, np.ascontiguousarray(b))


def lu_solve(system: PanelSystem) -> FlowSolution:
    """Partial-pivoting LU solve; overwrites ``system.A`` with its factors."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(system.A, overwrite_a=True, check_finite=False)
    if not np.all(np.isfinite(lu)):
        raise SingularSystem("non-finite entries in LU factors")
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < PIVOT_FLOOR:
        raise SingularSystem(f"zero pivot at row {int(np.argmin(pivots))}")
    x = scipy.linalg.lu_solve((lu, piv), system.b, check_finite=False)
    return _unpack(x)


def _unpack(x: np.ndarray) -> FlowSolution:
    gamma = np.empty_like(x)
    gamma[:-1] = x[:-1]
    gamma[-1] = -x[0]
    gamma.setflags(write=False)
    return FlowSolution(gamma, float(x[-1]))


def solve(airfoil: Airfoil, flow: FlowCondition) -> FlowSolution:
    return lu_solve(assemble(airfoil, flow))


def collocation_residual(solution: FlowSolution, airfoil: Airfoil, flow: FlowCondition) -> np.ndarray:
    """Boundary-condition mismatch at each control point, rebuilt from raw influences."""
    mid = panel_arrays(airfoil).mid
    raw = influence_matrix(mid, airfoil)
    return raw @ solution.gamma + flow.stream_function(mid[:, 0], mid[:, 1]) - solution.C


def surface_quantities(solution: FlowSolution, airfoil: Airfoil, flow: FlowCondition) -> SurfaceQuantities:
    """Surface speed, pressure coefficient and lift coefficient.

    ``gamma`` is the counter-clockwise vortex strength, which with the Selig
    point order is also the surface speed along the contour. Lift follows
    Kutta-Joukowski: clockwise circulation lifts, hence the minus sign.
    """
    length = panel_arrays(airfoil).length
    v_t = solution.gamma
    cp = 1.0 - (v_t / flow.v_inf) ** 2
    circulation = float(np.dot(solution.gamma, length))
    cl = -2.0 * circulation / (flow.v_inf * airfoil.chord)
    return SurfaceQuantities(v_t, cp, cl)


def write_cp_csv(solution: FlowSolution, airfoil: Airfoil, flow: FlowCondition) -> str:
    mid = panel_arrays(airfoil).mid
    sq = surface_quantities(solution, airfoil, flow)
    out = io.StringIO()
    out.write("index,x_mid,y_mid,gamma,cp\n")
    for i in range(airfoil.n):
        out.write(f"{i},{mid[i, 0]:.9g},{mid[i, 1]:.9g},{solution.gamma[i]:.9g},{sq.cp[i]:.9g}\n")
    return out.getvalue()
