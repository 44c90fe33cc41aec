"""Airfoil discretizations: construction, validation, B-spline shapes and Selig .dat I/O.

Points run in Selig order: trailing edge, upper surface, leading edge, lower
surface, back to the trailing edge. The first and last point coincide exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import BSpline

from .errors import InvalidGeometry, MalformedFile

BSPLINE_DEGREE = 3


class Point2(NamedTuple):
    x: float
    y: float


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


@dataclass(frozen=True, eq=False)
class Airfoil:
    """Closed polyline of n+1 points, ``points[n] == points[0]`` (the trailing edge)."""

    points: np.ndarray
    name: str = "airfoil"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidGeometry(f"points must have shape (n+1, 2), got {pts.shape}")
        if pts.shape[0] < 5:
            raise InvalidGeometry(f"need at least 4 panels, got {pts.shape[0] - 1}")
        if not np.all(np.isfinite(pts)):
            raise InvalidGeometry("non-finite coordinate")
        if not np.array_equal(pts[0], pts[-1]):
            raise InvalidGeometry("contour is not closed: points[n] != points[0]")
        if pts[0, 0] < pts[:, 0].max():
            raise InvalidGeometry("points[0] must be the trailing edge (maximum x)")
        seg = np.hypot(*np.diff(pts, axis=0).T)
        if np.any(seg <= 0.0):
            raise InvalidGeometry(f"zero-length panel at index {int(np.argmin(seg))}")
        if signed_area(pts) <= 0.0:
            raise InvalidGeometry("contour must run TE -> upper -> LE -> lower (positive signed area)")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0] - 1

    @property
    def chord(self) -> float:
        return float(self.points[:, 0].max() - self.points[:, 0].min())

    def point(self, i: int) -> Point2:
        return Point2(*map(float, self.points[i]))

    def __eq__(self, other):
        if not isinstance(other, Airfoil):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.name, self.points.tobytes()))


@dataclass(frozen=True)
class Panel:
    a: np.ndarray
    b: np.ndarray
    h: np.ndarray
    h_perp: np.ndarray
    mid: np.ndarray
    len: float


class PanelArrays(NamedTuple):
    """Per-panel quantities stacked into (n, 2) / (n,) arrays."""

    a: np.ndarray
    b: np.ndarray
    h: np.ndarray
    h_perp: np.ndarray
    mid: np.ndarray
    length: np.ndarray


def rotate_minus_90(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    return np.stack([h[..., 1], -h[..., 0]], axis=-1)


def panel_arrays(airfoil: Airfoil) -> PanelArrays:
    pts = airfoil.points
    a, b = pts[:-1], pts[1:]
    h = b - a
    mid = (b + a) / 2
    return PanelArrays(a, b, h, rotate_minus_90(h), mid, np.hypot(h[:, 0], h[:, 1]))


def make_panel(a, b) -> Panel:
    a = _readonly(a)
    b = _readonly(b)
    h = b - a
    length = math.hypot(h[0], h[1])
    if length <= 0.0:
        raise InvalidGeometry("zero-length panel")
    return Panel(a, b, _readonly(h), _readonly(rotate_minus_90(h)), _readonly((b + a) / 2), length)


def panels(airfoil: Airfoil) -> list[Panel]:
    arr = panel_arrays(airfoil)
    return [
        Panel(*(_readonly(v[i]) for v in arr[:5]), float(arr.length[i]))
        for i in range(airfoil.n)
    ]


# --------------------------------------------------------------------------
# NACA 4-digit sections


def cosine_stations(count: int) -> np.ndarray:
    """``count + 1`` chordwise stations in [0, 1], clustered at both ends."""
    x = 0.5 * (1.0 - np.cos(np.pi * np.arange(count + 1) / count))
    x[0], x[-1] = 0.0, 1.0
    return x


def naca4_thickness(x, t: float):
    x = np.asarray(x, dtype=float)
    return 5.0 * t * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x**2 + 0.2843 * x**3 - 0.1036 * x**4)


def naca4_camber(x, m: float, p: float):
    """Camber ordinate and slope of the mean line."""
    x = np.asarray(x, dtype=float)
    if m == 0.0:
        return np.zeros_like(x), np.zeros_like(x)
    fore = x < p
    yc = np.where(fore, m / p**2 * (2 * p * x - x**2), m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x - x**2))
    dyc = np.where(fore, 2 * m / p**2 * (p - x), 2 * m / (1 - p) ** 2 * (p - x))
    return yc, dyc


def _parse_naca4(digits: str) -> tuple[float, float, float]:
    if not (isinstance(digits, str) and len(digits) == 4 and digits.isdigit()):
        raise InvalidGeometry(f"malformed NACA 4-digit code: {digits!r}")
    m = int(digits[0]) / 100.0
    p = int(digits[1]) / 10.0
    t = int(digits[2:]) / 100.0
    if t <= 0.0:
        raise InvalidGeometry(f"NACA {digits}: zero thickness")
    if (m == 0.0) != (p == 0.0):
        raise InvalidGeometry(f"NACA {digits}: camber and camber position must both be zero or both nonzero")
    return m, p, t


def naca4(digits: str, n: int = 200, spacing: str = "cosine") -> Airfoil:
    """NACA 4-digit section with ``n`` panels and a closed trailing edge."""
    m, p, t = _parse_naca4(digits)
    if n < 8 or n % 2:
        raise InvalidGeometry(f"panel count must be even and >= 8, got {n}")
    half = n // 2
    if spacing == "cosine":
        x = cosine_stations(half)
    elif spacing == "uniform":
        x = np.linspace(0.0, 1.0, half + 1)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")

    yt = naca4_thickness(x, t)
    yt[-1] = 0.0
    yc, dyc = naca4_camber(x, m, p)
    theta = np.arctan(dyc)
    xu, yu = x - yt * np.sin(theta), yc + yt * np.cos(theta)
    xl, yl = x + yt * np.sin(theta), yc - yt * np.cos(theta)

    upper = np.column_stack([xu, yu])[::-1]  # TE -> LE
    lower = np.column_stack([xl, yl])[1:]  # LE (shared) excluded -> TE
    pts = np.vstack([upper, lower])
    pts[-1] = pts[0]
    return Airfoil(pts, name=f"NACA {digits}")


# --------------------------------------------------------------------------
# B-spline genomes


def _pinned(coeffs) -> bool:
    return coeffs[0] == 0.0 and coeffs[-1] == 0.0


@dataclass(frozen=True)
class BsplineGenome:
    """Control-point ordinates of two clamped cubic B-spline surfaces.

    Control-point abscissae are fixed by :func:`control_abscissae`: the first
    two sit at x = 0 (vertical tangent, rounded nose) and the rest follow a
    cosine distribution to x = 1. The first and last ordinates are pinned to 0.
    """

    upper_coeffs: tuple[float, ...]
    lower_coeffs: tuple[float, ...]
    degree: int = field(default=BSPLINE_DEGREE)

    def __post_init__(self):
        object.__setattr__(self, "upper_coeffs", tuple(float(c) for c in self.upper_coeffs))
        object.__setattr__(self, "lower_coeffs", tuple(float(c) for c in self.lower_coeffs))
        if self.degree != BSPLINE_DEGREE:
            raise ValueError("only cubic B-splines are supported")
        for side, c in (("upper", self.upper_coeffs), ("lower", self.lower_coeffs)):
            if len(c) < self.degree + 1:
                raise ValueError(f"{side} surface needs at least {self.degree + 1} coefficients")
            if not _pinned(c):
                raise ValueError(f"{side} surface endpoints must be pinned to 0")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.upper_coeffs), len(self.lower_coeffs)

    def flat(self) -> np.ndarray:
        return np.array(self.upper_coeffs + self.lower_coeffs)

    @classmethod
    def from_flat(cls, values, shape: tuple[int, int]) -> "BsplineGenome":
        values = [float(v) for v in values]
        nu, nl = shape
        upper, lower = values[:nu], values[nu : nu + nl]
        upper[0] = upper[-1] = 0.0
        lower[0] = lower[-1] = 0.0
        return cls(tuple(upper), tuple(lower))

    def pinned_mask(self) -> np.ndarray:
        nu, nl = self.shape
        mask = np.zeros(nu + nl, dtype=bool)
        mask[[0, nu - 1, nu, nu + nl - 1]] = True
        return mask


def control_abscissae(count: int) -> np.ndarray:
    k = np.arange(count - 1)
    xs = np.empty(count)
    xs[0] = 0.0
    xs[1:] = 0.5 * (1.0 - np.cos(np.pi * k / (count - 2)))
    xs[-1] = 1.0
    return xs


def _knots(count: int, degree: int = BSPLINE_DEGREE) -> np.ndarray:
    inner = np.linspace(0.0, 1.0, count - degree + 1)
    return np.concatenate([np.zeros(degree), inner, np.ones(degree)])


def _abscissa_to_param(x: np.ndarray, count: int) -> np.ndarray:
    """Invert the monotone map u -> X(u) by bisection."""
    xspl = BSpline(_knots(count), control_abscissae(count), BSPLINE_DEGREE)
    lo = np.zeros_like(x)
    hi = np.ones_like(x)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = xspl(mid) < x
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    u = 0.5 * (lo + hi)
    u[x <= 0.0] = 0.0
    u[x >= 1.0] = 1.0
    return u


def bspline_surface(coeffs, x: np.ndarray) -> np.ndarray:
    """Ordinates of one B-spline surface evaluated at abscissae ``x``."""
    count = len(coeffs)
    u = _abscissa_to_param(np.asarray(x, dtype=float), count)
    return BSpline(_knots(count), np.asarray(coeffs, dtype=float), BSPLINE_DEGREE)(u)


def from_bspline(genome: BsplineGenome, n: int = 200, name: str = "bspline") -> Airfoil:
    if n < 8 or n % 2:
        raise InvalidGeometry(f"panel count must be even and >= 8, got {n}")
    x = cosine_stations(n // 2)
    yu = bspline_surface(genome.upper_coeffs, x)
    yl = bspline_surface(genome.lower_coeffs, x)
    yu[0] = yl[0] = yu[-1] = yl[-1] = 0.0
    thickness = yu[1:-1] - yl[1:-1]
    if np.any(thickness <= 0.0):
        bad = int(np.argmin(thickness)) + 1
        raise InvalidGeometry(f"upper surface meets or crosses lower surface at x={x[bad]:.4f}")
    upper = np.column_stack([x, yu])[::-1]
    lower = np.column_stack([x, yl])[1:]
    return Airfoil(np.vstack([upper, lower]), name=name)


def fit_bspline(airfoil: Airfoil, count: int = 10) -> BsplineGenome:
    """Least-squares fit of both surfaces with ``count`` control ordinates each."""
    pts = airfoil.points
    le = int(np.argmin(pts[:, 0]))
    surfaces = (pts[: le + 1][::-1], pts[le:])
    knots = _knots(count)
    coeffs = []
    for surf in surfaces:
        x = np.clip(surf[:, 0], 0.0, 1.0)
        u = _abscissa_to_param(x, count)
        basis = BSpline.design_matrix(u, knots, BSPLINE_DEGREE).toarray()
        free, *_ = np.linalg.lstsq(basis[:, 1:-1], surf[:, 1], rcond=None)
        coeffs.append((0.0, *free.tolist(), 0.0))
    return BsplineGenome(coeffs[0], coeffs[1])


def symmetric_genome(half_thickness, count: int = 10) -> BsplineGenome:
    """Genome with ``lower == -upper``; ``half_thickness`` gives the free upper ordinates."""
    free = list(np.broadcast_to(np.asarray(half_thickness, dtype=float), (count - 2,)))
    upper = (0.0, *free, 0.0)
    return BsplineGenome(upper, tuple(-c for c in upper))


# --------------------------------------------------------------------------
# Selig .dat files


def write_dat(airfoil: Airfoil) -> str:
    lines = [airfoil.name]
    lines += [f"{x: .9g} {y: .9g}" for x, y in airfoil.points]
    return "\n".join(lines) + "\n"


def read_dat(text: str, closure_tol: float = 1e-6) -> Airfoil:
    lines = [ln for ln in text.splitlines()]
    if not lines:
        raise MalformedFile("empty file")
    name = lines[0].strip() or "airfoil"
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 2:
            raise MalformedFile(f"line {lineno}: expected 'x y', got {line!r}")
        try:
            rows.append((float(tokens[0]), float(tokens[1])))
        except ValueError as exc:
            raise MalformedFile(f"line {lineno}: non-numeric token in {line!r}") from exc
    if len(rows) < 5:
        raise MalformedFile(f"need at least 5 points, got {len(rows)}")
    pts = np.array(rows)
    if not np.all(np.isfinite(pts)):
        raise MalformedFile("non-finite coordinate")

    gap = float(np.hypot(*(pts[-1] - pts[0])))
    if gap <= closure_tol:
        pts[-1] = pts[0]
    elif pts[-1, 0] >= pts[:, 0].max() - closure_tol:
        # last point sits on the trailing edge but misses the first one: blunt/open TE
        raise MalformedFile(f"open contour: endpoints differ by {gap:.3g} chord")
    else:
        pts = np.vstack([pts, pts[:1]])
    try:
        return Airfoil(pts, name=name)
    except InvalidGeometry as exc:
        raise MalformedFile(str(exc)) from exc
