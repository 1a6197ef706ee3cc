"""Staggered grid on the periodic channel ``[0, lx) x [0, 1]`` and its difference operators.

Arrays are indexed ``[j, i]`` with ``j`` vertical.  Layout:

========  ==============  ===========================
field     shape           location
========  ==============  ===========================
scalars   ``(ny, nx)``    ``((i+1/2) dx, (j+1/2) dy)``
``u``     ``(ny, nx)``    ``(i dx, (j+1/2) dy)``
``v``     ``(ny+1, nx)``  ``((i+1/2) dx, j dy)``
========  ==============  ===========================

``v`` rows 0 and ``ny`` sit on the walls and are held at zero.  Wall
conditions for cell-centred quantities enter through ghost values mirrored
across the wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError(f"need nx, ny >= 8, got {self.nx} x {self.ny}")
        if not self.lx > 0:
            raise ValueError(f"lx must be positive, got {self.lx}")

    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return 1.0 / self.ny

    @property
    def h(self):
        return min(self.dx, self.dy)

    @property
    def cell_area(self):
        return self.dx * self.dy

    def centers(self):
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y)

    def u_points(self):
        x = np.arange(self.nx) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y)

    def v_points(self):
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = np.arange(self.ny + 1) * self.dy
        return np.meshgrid(x, y)

    def nodes(self):
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny + 1) * self.dy
        return np.meshgrid(x, y)

    def zeros_c(self):
        return np.zeros((self.ny, self.nx))

    def zeros_v(self):
        return np.zeros((self.ny + 1, self.nx))


@dataclass
class FieldState:
    """Velocity on faces, temperature and pressure at centres, and the time.

    ``extra`` holds solver-private lagged quantities (kept out of snapshots).
    """

    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    t: float = 0.0
    extra: dict = field(default_factory=dict)

    def copy(self):
        return FieldState(
            self.u.copy(),
            self.v.copy(),
            self.theta.copy(),
            self.p.copy(),
            self.t,
            {k: np.copy(val) for k, val in self.extra.items()},
        )

    def check_finite(self):
        for name in ("u", "v", "theta", "p"):
            if not np.all(np.isfinite(getattr(self, name))):
                return name
        return None


# -- basic stencils ------------------------------------------------------------


def divergence(g: Grid, u, v):
    return (np.roll(u, -1, axis=1) - u) / g.dx + (v[1:] - v[:-1]) / g.dy


def grad_x(g: Grid, s):
    """``d/dx`` of a centred scalar, on u-faces."""
    return (s - np.roll(s, 1, axis=1)) / g.dx


def grad_y(g: Grid, s):
    """``d/dy`` of a centred scalar on v-faces; wall rows are zero."""
    out = np.zeros((g.ny + 1, g.nx))
    out[1:-1] = (s[1:] - s[:-1]) / g.dy
    return out


def pad_y(s, lo, hi):
    """Stack ghost rows below and above ``s``."""
    return np.vstack([lo[None, :] if np.ndim(lo) else np.full((1, s.shape[1]), lo), s,
                      hi[None, :] if np.ndim(hi) else np.full((1, s.shape[1]), hi)])


def dirichlet_ghosts(s, wall_lo, wall_hi):
    """Ghost rows for a centred quantity with prescribed wall values."""
    return pad_y(s, 2 * wall_lo - s[0], 2 * wall_hi - s[-1])


def lap_x(g: Grid, s):
    return (np.roll(s, -1, axis=1) - 2 * s + np.roll(s, 1, axis=1)) / g.dx**2


def lap_centered(g: Grid, s, wall_lo=0.0, wall_hi=0.0, neumann=False):
    """Five-point Laplacian of a centred (or u-face) quantity."""
    sp = pad_y(s, s[0], s[-1]) if neumann else dirichlet_ghosts(s, wall_lo, wall_hi)
    return lap_x(g, s) + (sp[2:] - 2 * s + sp[:-2]) / g.dy**2


def lap_v(g: Grid, v):
    out = np.zeros_like(v)
    out[1:-1] = lap_x(g, v[1:-1]) + (v[2:] - 2 * v[1:-1] + v[:-2]) / g.dy**2
    return out


# -- interpolation ---------------------------------------------------------------


def center_to_u(s):
    return 0.5 * (s + np.roll(s, 1, axis=1))


def center_to_v(g: Grid, s):
    """Average to v-faces; wall rows copy the adjacent cell."""
    out = np.empty((g.ny + 1, g.nx))
    out[1:-1] = 0.5 * (s[1:] + s[:-1])
    out[0] = s[0]
    out[-1] = s[-1]
    return out


def u_to_center(u):
    return 0.5 * (u + np.roll(u, -1, axis=1))


def v_to_center(v):
    return 0.5 * (v[1:] + v[:-1])


def v_at_u(v):
    """Four-point average of ``v`` at u-faces."""
    vc = 0.5 * (v[1:] + v[:-1])
    return 0.5 * (vc + np.roll(vc, 1, axis=1))


def u_at_v(g: Grid, u):
    """Four-point average of ``u`` at interior v-faces (wall rows zero)."""
    ux = 0.5 * (u + np.roll(u, -1, axis=1))
    out = np.zeros((g.ny + 1, g.nx))
    out[1:-1] = 0.5 * (ux[1:] + ux[:-1])
    return out


# -- advection -------------------------------------------------------------------


def advect_u(g: Grid, u, v):
    """``(v . grad) u`` at u-faces, central differences."""
    up = pad_y(u, -u[0], -u[-1])
    dudx = (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2 * g.dx)
    dudy = (up[2:] - up[:-2]) / (2 * g.dy)
    return u * dudx + v_at_u(v) * dudy


def advect_v(g: Grid, u, v):
    """``(v . grad) v`` at interior v-faces, central differences."""
    out = np.zeros_like(v)
    inner = v[1:-1]
    dvdx = (np.roll(inner, -1, axis=1) - np.roll(inner, 1, axis=1)) / (2 * g.dx)
    dvdy = (v[2:] - v[:-2]) / (2 * g.dy)
    out[1:-1] = u_at_v(g, u)[1:-1] * dvdx + inner * dvdy
    return out


def advect_scalar(g: Grid, u, v, s, wall_lo=0.0, wall_hi=0.0, upwind=False, neumann=False):
    """``(v . grad) s`` at centres.

    Ghost rows carry the wall values ``wall_lo``/``wall_hi`` (Dirichlet) or
    copy the boundary cells when ``neumann`` is set.
    """
    uc = u_to_center(u)
    vc = v_to_center(v)
    sp = pad_y(s, s[0], s[-1]) if neumann else dirichlet_ghosts(s, wall_lo, wall_hi)
    if upwind and not neumann:
        # one-sided differences with the wall value itself half a cell away
        lo = np.vstack([np.full((1, g.nx), wall_lo), s[:-1]])
        hi = np.vstack([s[1:], np.full((1, g.nx), wall_hi)])
        dy_lo = np.full((g.ny, 1), g.dy)
        dy_hi = np.full((g.ny, 1), g.dy)
        dy_lo[0] = dy_hi[-1] = 0.5 * g.dy
        back_x = (s - np.roll(s, 1, axis=1)) / g.dx
        fwd_x = (np.roll(s, -1, axis=1) - s) / g.dx
        back_y = (s - lo) / dy_lo
        fwd_y = (hi - s) / dy_hi
        return (
            np.maximum(uc, 0) * back_x
            + np.minimum(uc, 0) * fwd_x
            + np.maximum(vc, 0) * back_y
            + np.minimum(vc, 0) * fwd_y
        )
    dsdx = (np.roll(s, -1, axis=1) - np.roll(s, 1, axis=1)) / (2 * g.dx)
    dsdy = (sp[2:] - sp[:-2]) / (2 * g.dy)
    return uc * dsdx + vc * dsdy


def strain_squares(g: Grid, u, v):
    """``|D|^2`` and ``(tr D)^2`` at cell centres.

    The shear component lives on cell corners; its square is averaged over
    the four corners of each cell.
    """
    ux = (np.roll(u, -1, axis=1) - u) / g.dx
    vy = (v[1:] - v[:-1]) / g.dy
    up = pad_y(u, -u[0], -u[-1])
    # corners (i, j) for j = 0..ny: du/dy there, dv/dx there
    dudy = (up[1:] - up[:-1]) / g.dy
    dvdx = (v - np.roll(v, 1, axis=1)) / g.dx
    d12sq = (0.5 * (dudy + dvdx)) ** 2
    corner_avg = 0.25 * (d12sq[1:] + d12sq[:-1] + np.roll(d12sq[1:], -1, axis=1) + np.roll(d12sq[:-1], -1, axis=1))
    return ux**2 + vy**2 + 2 * corner_avg, (ux + vy) ** 2


# -- norms -----------------------------------------------------------------------


def l2_center(g: Grid, s):
    return float(np.sqrt(np.sum(s * s) * g.cell_area))


def l2_velocity(g: Grid, u, v):
    return float(np.sqrt((np.sum(u * u) + np.sum(v[1:-1] ** 2)) * g.cell_area))


def kinetic_energy(g: Grid, u, v):
    return 0.5 * l2_velocity(g, u, v) ** 2
