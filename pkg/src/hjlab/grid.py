"""Uniform grid functions on the cube [-a, a]^N with multilinear interpolation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BOUNDARY_MODES = ("extend_linear", "clamp")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on a uniform grid with ``n`` nodes per axis.

    ``values`` has shape ``(n,) * dim`` and is stored read-only; its row-major
    flattening matches the coordinate order of :meth:`coords`.
    """

    a: float
    n: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1 and self.dim == 2:
            vals = vals.reshape(self.n, self.n)
        if vals.shape != (self.n,) * self.dim:
            raise ValueError(f"values shape {vals.shape} does not match n={self.n}, dim={self.dim}")
        if self.n < 3:
            raise ValueError("need at least three nodes per axis")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, func, a: float, n: int, dim: int = 1) -> "GridFunction":
        """Sample ``func`` (mapping (k, dim) points to k values) at the nodes."""
        g = cls(a, n, dim, np.zeros((n,) * dim))
        return g.with_values(np.asarray(func(g.coords()), dtype=float).reshape((n,) * dim))

    @classmethod
    def zeros(cls, a: float, n: int, dim: int = 1) -> "GridFunction":
        return cls(a, n, dim, np.zeros((n,) * dim))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.a, self.n, self.dim, np.asarray(values, dtype=float))

    @property
    def dx(self) -> float:
        return 2.0 * self.a / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.a, self.a, self.n)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def coords(self) -> np.ndarray:
        """Node coordinates, shape (n**dim, dim), row-major ('ij') order."""
        ax = self.axis
        if self.dim == 1:
            return ax[:, None]
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def same_grid(self, other: "GridFunction") -> bool:
        return self.a == other.a and self.n == other.n and self.dim == other.dim

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            if not self.same_grid(other):
                raise ValueError("grid functions live on different grids")
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            if not self.same_grid(other):
                raise ValueError("grid functions live on different grids")
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __neg__(self):
        return self.with_values(-self.values)

    def reflect(self) -> "GridFunction":
        """v(x) -> v(-x); exact on a symmetric grid."""
        return self.with_values(np.flip(self.values))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def box_mask(self, half_width: float, tol: float = 1e-12) -> np.ndarray:
        """Boolean mask of nodes inside [-half_width, half_width]^N."""
        c = self.coords()
        return (np.max(np.abs(c), axis=1) <= half_width + tol).reshape((self.n,) * self.dim)

    def _locate(self, pts, boundary):
        t = (pts + self.a) / self.dx
        if boundary == "clamp":
            t = np.clip(t, 0.0, self.n - 1.0)
        i = np.clip(np.floor(t), 0, self.n - 2).astype(np.intp)
        return i, t - i

    def interp(self, points, boundary: str = "extend_linear") -> np.ndarray:
        """Multilinear interpolation at points of shape (..., dim).

        ``extend_linear`` continues the boundary cell's multilinear form
        outside the box; ``clamp`` projects points onto the box first.
        """
        if boundary not in BOUNDARY_MODES:
            raise ValueError(f"unknown boundary mode {boundary!r}")
        pts = np.asarray(points, dtype=float)
        v = self.values
        if self.dim == 1:
            i, th = self._locate(pts[..., 0], boundary)
            return v[i] + th * (v[i + 1] - v[i])
        i, th = self._locate(pts, boundary)
        i0, i1 = i[..., 0], i[..., 1]
        t0, t1 = th[..., 0], th[..., 1]
        v00 = v[i0, i1]
        v10 = v[i0 + 1, i1]
        v01 = v[i0, i1 + 1]
        v11 = v[i0 + 1, i1 + 1]
        return (v00 + t0 * (v10 - v00)) + t1 * ((v01 + t0 * (v11 - v01)) - (v00 + t0 * (v10 - v00)))

    def interp_gradient(self, points, boundary: str = "extend_linear") -> np.ndarray:
        """Gradient of the multilinear interpolant (cell-wise), shape (..., dim)."""
        pts = np.asarray(points, dtype=float)
        v = self.values
        h = self.dx
        if self.dim == 1:
            i, _ = self._locate(pts[..., 0], boundary)
            return ((v[i + 1] - v[i]) / h)[..., None]
        i, th = self._locate(pts, boundary)
        i0, i1 = i[..., 0], i[..., 1]
        t0, t1 = th[..., 0], th[..., 1]
        v00 = v[i0, i1]
        v10 = v[i0 + 1, i1]
        v01 = v[i0, i1 + 1]
        v11 = v[i0 + 1, i1 + 1]
        g0 = ((1 - t1) * (v10 - v00) + t1 * (v11 - v01)) / h
        g1 = ((1 - t0) * (v01 - v00) + t0 * (v11 - v10)) / h
        return np.stack([g0, g1], axis=-1)

    def central_gradient(self) -> np.ndarray:
        """Central differences inside, one-sided at the edges; shape (dim, n, ...)."""
        g = np.gradient(self.values, self.dx)
        return np.asarray(g if self.dim > 1 else [g])

    def node_index(self, x) -> tuple:
        """Index of the node nearest to point ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.clip(np.rint((x + self.a) / self.dx), 0, self.n - 1).astype(int)
        return tuple(int(i) for i in idx)
