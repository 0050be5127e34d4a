"""Geodesic spray, nonlinear connection, Berwald/Cartan coefficients, geodesics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import Jet
from .structures import FinslerStructure, SingularMetricError, f2_jets

__all__ = [
    "PointAssembly",
    "spray",
    "nonlinear_connection",
    "berwald_coeffs",
    "cartan_hcoeffs",
    "geodesic_integrate",
    "GeodesicPath",
    "h_cov_deriv",
]


def _inv_jets(g, n):
    """Inverse of a symmetric n x n matrix of jets via adjugate/determinant."""
    if n == 2:
        det = g[0][0] * g[1][1] - g[0][1] * g[0][1]
        inv_det = 1.0 / det
        gi = [[g[1][1] * inv_det, -1.0 * g[0][1] * inv_det],
              [None, g[0][0] * inv_det]]
        gi[1][0] = gi[0][1]
        return gi, det
    # n == 3
    c = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            i1, i2 = [t for t in range(3) if t != i]
            j1, j2 = [t for t in range(3) if t != j]
            m = g[i1][j1] * g[i2][j2] - g[i1][j2] * g[i2][j1]
            c[j][i] = m if (i + j) % 2 == 0 else -1.0 * m
    det = g[0][0] * c[0][0] + g[0][1] * c[1][0] + g[0][2] * c[2][0]
    inv_det = 1.0 / det
    gi = [[c[i][j] * inv_det for j in range(3)] for i in range(3)]
    return gi, det


class PointAssembly:
    """Pointwise connection/curvature ingredients from joint jets of F^2.

    Everything is lazy and cached; all fiber derivatives are exact Taylor
    coefficients, base derivatives come from the jet provider (analytic base
    jets or 4th-order FD stations).
    """

    def __init__(
        self,
        fs: FinslerStructure,
        x,
        y,
        forder: int,
        border: int = 1,
        base_mode: str = "auto",
        fd_step: float | None = None,
    ):
        self.fs = fs
        self.n = fs.n
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.F2 = f2_jets(fs, x, y, forder=forder, border=border,
                          base_mode=base_mode, fd_step=fd_step)
        spec = self.F2.spec
        self.ys = [Jet.variable(spec, "y", a, self.y[..., a]) for a in range(self.n)]
        self._cache: dict = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    # -- metric --------------------------------------------------------
    @property
    def g_jets(self):
        def build():
            n = self.n
            return [[0.5 * self.F2.fiber_deriv(i).fiber_deriv(j) for j in range(n)]
                    for i in range(n)]
        return self._get("g_jets", build)

    @property
    def ginv_jets(self):
        def build():
            gi, det = _inv_jets(self.g_jets, self.n)
            mn = float(np.min(det.value()))
            if mn <= 0.0:
                raise SingularMetricError(mn)
            return gi
        return self._get("ginv_jets", build)

    def g(self) -> np.ndarray:
        n = self.n
        g = np.empty(self.F2.shape + (n, n))
        for i in range(n):
            for j in range(n):
                g[..., i, j] = self.g_jets[i][j].value()
        return g

    def ginv(self) -> np.ndarray:
        n = self.n
        gi = np.empty(self.F2.shape + (n, n))
        for i in range(n):
            for j in range(n):
                gi[..., i, j] = self.ginv_jets[i][j].value()
        return gi

    # -- spray stack -----------------------------------------------------
    @property
    def A_jets(self):
        """A_h = y^j d(d F^2/dy^h)/dx^j - d F^2/dx^h (lowered spray, x4)."""
        def build():
            n = self.n
            out = []
            for h in range(n):
                acc = -1.0 * self.F2.base_deriv(h)
                dFh = self.F2.fiber_deriv(h)
                for j in range(n):
                    acc = acc + self.ys[j] * dFh.base_deriv(j)
                out.append(acc)
            return out
        return self._get("A_jets", build)

    @property
    def G_jets(self):
        def build():
            n = self.n
            gi = self.ginv_jets
            A = self.A_jets
            out = []
            for i in range(n):
                acc = gi[i][0] * A[0]
                for h in range(1, n):
                    acc = acc + gi[i][h] * A[h]
                out.append(acc * 0.25)
            return out
        return self._get("G_jets", build)

    @property
    def Gj_jets(self):
        def build():
            n = self.n
            return [[self.G_jets[i].fiber_deriv(j) for j in range(n)] for i in range(n)]
        return self._get("Gj_jets", build)

    @property
    def Gjk_jets(self):
        def build():
            n = self.n
            return [[[self.Gj_jets[i][j].fiber_deriv(k) for k in range(n)]
                     for j in range(n)] for i in range(n)]
        return self._get("Gjk_jets", build)

    def spray_values(self) -> np.ndarray:
        n = self.n
        out = np.empty(self.F2.shape + (n,))
        for i in range(n):
            out[..., i] = self.G_jets[i].value()
        return out

    def Gj_values(self) -> np.ndarray:
        n = self.n
        out = np.empty(self.F2.shape + (n, n))
        for i in range(n):
            for j in range(n):
                out[..., i, j] = self.Gj_jets[i][j].value()
        return out

    def Gjk_values(self) -> np.ndarray:
        n = self.n
        out = np.empty(self.F2.shape + (n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    out[..., i, j, k] = self.Gjk_jets[i][j][k].value()
        return out

    # -- Cartan horizontal coefficients ---------------------------------
    @property
    def C_jets(self):
        def build():
            n = self.n
            return [[[0.5 * self.g_jets[i][j].fiber_deriv(k) for k in range(n)]
                     for j in range(n)] for i in range(n)]
        return self._get("C_jets", build)

    def cartan_values(self) -> np.ndarray:
        n = self.n
        out = np.empty(self.F2.shape + (n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    out[..., i, j, k] = self.C_jets[i][j][k].value()
        return out

    def gamma_values(self) -> np.ndarray:
        """Formal Christoffel symbols of g in x (base partials of g)."""
        n = self.n
        dg = np.empty(self.F2.shape + (n, n, n))  # dg[..., i, j, k] = d g_ij / dx^k
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    dg[..., i, j, k] = self.g_jets[i][j].base_deriv(k).value()
        gi = self.ginv()
        gam = 0.5 * (
            np.einsum("...im,...mjk->...ijk", gi, dg)
            + np.einsum("...im,...mkj->...ijk", gi, dg)
            - np.einsum("...im,...jkm->...ijk", gi, dg)
        )
        return gam

    def cartan_hcoeff_values(self) -> np.ndarray:
        """Horizontal Cartan coefficients Gamma^i_jk (with torsion corrections)."""
        gam = self.gamma_values()
        C = self.cartan_values()
        gi = self.ginv()
        Gj = self.Gj_values()
        Cup = np.einsum("...im,...mjs->...ijs", gi, C)
        corr = (
            np.einsum("...ijs,...sk->...ijk", Cup, Gj)
            + np.einsum("...iks,...sj->...ijk", Cup, Gj)
            - np.einsum("...kjs,...sm,...mi->...ijk", C, Gj, gi)
        )
        return gam - corr


# ---------------------------------------------------------------------------
# public pointwise operations
# ---------------------------------------------------------------------------

def spray(fs: FinslerStructure, x, y, base_mode: str = "auto") -> np.ndarray:
    """Geodesic spray coefficients G^i(x, y), 2-homogeneous in y."""
    pa = PointAssembly(fs, x, y, forder=2, border=1, base_mode=base_mode)
    return pa.spray_values()


def nonlinear_connection(fs: FinslerStructure, x, y, base_mode: str = "auto") -> np.ndarray:
    """G^i_j = dG^i/dy^j, 1-homogeneous."""
    pa = PointAssembly(fs, x, y, forder=3, border=1, base_mode=base_mode)
    return pa.Gj_values()


def berwald_coeffs(fs: FinslerStructure, x, y, base_mode: str = "auto") -> np.ndarray:
    """Berwald connection coefficients G^i_jk = d^2 G^i / dy^j dy^k."""
    pa = PointAssembly(fs, x, y, forder=4, border=1, base_mode=base_mode)
    return pa.Gjk_values()


def cartan_hcoeffs(fs: FinslerStructure, x, y, base_mode: str = "auto") -> np.ndarray:
    """Horizontal Cartan connection coefficients Gamma^i_jk."""
    pa = PointAssembly(fs, x, y, forder=3, border=1, base_mode=base_mode)
    return pa.cartan_hcoeff_values()


@dataclass
class GeodesicPath:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    complete: bool

    @property
    def left_chart(self) -> bool:
        return not self.complete


def geodesic_integrate(
    fs: FinslerStructure, x0, y0, T: float, dt: float, base_mode: str = "auto"
) -> GeodesicPath:
    """Integrate x'' + 2G(x, x') = 0 with classical RK4 at fixed step.

    If the path leaves a non-periodic chart the result is truncated and
    flagged (``complete = False``).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(y0, dtype=float).copy()

    def acc(xc, vc):
        return -2.0 * spray(fs, xc, vc, base_mode=base_mode)

    steps = int(round(T / dt))
    ts = [0.0]
    xs = [x.copy()]
    vs = [v.copy()]
    complete = True
    for k in range(steps):
        k1x, k1v = v, acc(x, v)
        k2x, k2v = v + 0.5 * dt * k1v, acc(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = v + 0.5 * dt * k2v, acc(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = v + dt * k3v, acc(x + dt * k3x, v + dt * k3v)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not fs.chart.contains(x):
            complete = False
            break
        ts.append((k + 1) * dt)
        xs.append(x.copy())
        vs.append(v.copy())
    return GeodesicPath(np.asarray(ts), np.asarray(xs), np.asarray(vs), complete)


def h_cov_deriv(field, gs):
    """Horizontal Cartan covariant derivative of a grid tensor field.

    Thin re-export; the implementation lives with the grid machinery.
    """
    from .fields import horizontal_cov_deriv

    return horizontal_cov_deriv(field, gs)
