"""Static SVG drawing of an airfoil and its control points."""
from __future__ import annotations

from .geometry import Airfoil, panel_arrays


def airfoil_svg(airfoil: Airfoil, width: int = 800, margin: int = 20, title: str | None = None) -> str:
    pts = airfoil.points
    xmin, xmax = pts[:, 0].min(), pts[:, 0].max()
    ymin, ymax = pts[:, 1].min(), pts[:, 1].max()
    scale = (width - 2 * margin) / (xmax - xmin)
    height = int(round((ymax - ymin) * scale)) + 2 * margin

    def sx(x):
        return margin + (x - xmin) * scale

    def sy(y):
        return margin + (ymax - y) * scale

    outline = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
    mids = panel_arrays(airfoil).mid
    dots = "\n".join(f'  <circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2" fill="red"/>' for x, y in mids)
    label = title if title is not None else airfoil.name
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f"  <title>{_escape(label)}</title>\n"
        f'  <polyline points="{outline}" fill="none" stroke="black" stroke-width="1"/>\n'
        f"{dots}\n"
        "</svg>\n"
    )


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
