"""Direct solvers for ``(shift - coef * Laplacian) x = r`` on the channel.

The x-direction is periodic, so a real FFT diagonalises it; each Fourier
mode leaves a tridiagonal system in y, factorised once and solved with the
Thomas algorithm vectorised over modes.  Three wall treatments are needed:

``"neumann"``     centred unknowns, zero normal derivative (pressure)
``"dirichlet"``   centred unknowns, homogeneous wall value via mirrored ghosts
``"face"``        unknowns on interior horizontal faces, zero on the walls

With ``"neumann"`` and ``shift == 0`` the zero mode is singular; it is solved
with the lowest unknown pinned and the result shifted to zero mean, after
the mean of the right-hand side is removed.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid


class SpectralSolver:
    def __init__(self, grid: Grid, kind: str, shift: float = 0.0, coef: float = 1.0):
        if kind not in ("neumann", "dirichlet", "face"):
            raise ValueError(f"unknown wall treatment {kind!r}")
        if coef <= 0 or shift < 0:
            raise ValueError("need coef > 0 and shift >= 0")
        self.grid = grid
        self.kind = kind
        self.shift = shift
        self.coef = coef
        n = grid.ny - 1 if kind == "face" else grid.ny
        self.n = n
        k = np.arange(grid.nx // 2 + 1)
        lam_x = (2.0 - 2.0 * np.cos(2.0 * np.pi * k / grid.nx)) / grid.dx**2
        off = -coef / grid.dy**2
        diag = np.full((n, k.size), 2.0 / grid.dy**2)
        if kind == "neumann":
            diag[0] = diag[-1] = 1.0 / grid.dy**2
        elif kind == "dirichlet":
            diag[0] = diag[-1] = 3.0 / grid.dy**2
        diag = shift + coef * (diag + lam_x[None, :])
        self.singular = kind == "neumann" and shift == 0.0
        if self.singular:
            # pin the lowest unknown of the zero mode
            diag[0, 0] = 1.0
        self._factor(diag, off)

    def _factor(self, diag, off):
        n = self.n
        cp = np.empty_like(diag)
        denom = np.empty_like(diag)
        sup = np.full(diag.shape[1], off)
        if self.singular:
            sup0 = sup.copy()
            sup0[0] = 0.0
        else:
            sup0 = sup
        denom[0] = diag[0]
        cp[0] = sup0 / denom[0]
        for j in range(1, n):
            sub = np.full(diag.shape[1], off)
            denom[j] = diag[j] - sub * cp[j - 1]
            cp[j] = sup / denom[j]
        self._cp = cp
        self._denom = denom
        self._off = off

    def solve(self, rhs):
        """Solve for a real right-hand side of shape ``(n, nx)``."""
        g = self.grid
        r = np.fft.rfft(rhs, axis=1)
        if self.singular:
            r[:, 0] -= r[:, 0].mean()
            r[0, 0] = 0.0
        n = self.n
        off = self._off
        d = np.empty_like(r)
        d[0] = r[0] / self._denom[0]
        for j in range(1, n):
            d[j] = (r[j] - off * d[j - 1]) / self._denom[j]
        x = np.empty_like(r)
        x[-1] = d[-1]
        for j in range(n - 2, -1, -1):
            x[j] = d[j] - self._cp[j] * x[j + 1]
        out = np.fft.irfft(x, n=g.nx, axis=1)
        if self.singular:
            out -= out.mean()
        return out

    def apply(self, x):
        """Matrix-vector product with the same operator, for testing."""
        g = self.grid
        if self.kind == "face":
            padded = np.vstack([np.zeros((1, g.nx)), x, np.zeros((1, g.nx))])
        elif self.kind == "neumann":
            padded = np.vstack([x[:1], x, x[-1:]])
        else:
            padded = np.vstack([-x[:1], x, -x[-1:]])
        lap = (np.roll(x, -1, axis=1) - 2 * x + np.roll(x, 1, axis=1)) / g.dx**2 + (
            padded[2:] - 2 * x + padded[:-2]
        ) / g.dy**2
        return self.shift * x - self.coef * lap
