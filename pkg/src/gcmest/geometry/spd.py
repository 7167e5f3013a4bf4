"""Symmetric positive-definite matrices under the affine-invariant and
Bures-Wasserstein metrics.

Matrix functions go through a symmetric eigendecomposition and every product
is re-symmetrized, which keeps iterates from drifting off the manifold.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp

from .base import POINT_TOL, CutLocusError, GeometryError, InvalidPointError, Space, SpaceSpec


def sym(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def eig_apply(a, fn):
    """``Q fn(W) Q^T`` for the symmetric eigendecomposition of ``a`` (batched)."""
    w, q = np.linalg.eigh(sym(a))
    return sym((q * fn(w)[..., None, :]) @ np.swapaxes(q, -1, -2))


def sqrtm(a):
    return eig_apply(a, np.sqrt)


def logm(a):
    return eig_apply(a, np.log)


def expm(a):
    return eig_apply(a, np.exp)


def sqrt_and_invsqrt(a):
    w, q = np.linalg.eigh(sym(a))
    if np.any(w <= 0):
        raise InvalidPointError("matrix is not positive definite")
    s = np.sqrt(w)
    qt = np.swapaxes(q, -1, -2)
    return sym((q * s[..., None, :]) @ qt), sym((q / s[..., None, :]) @ qt)


def geometric_mean(a, b):
    """Closed form ``A # B = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}``."""
    sa, isa = sqrt_and_invsqrt(a)
    return sym(sa @ sqrtm(sym(isa @ b @ isa)) @ sa)


def sym_frobenius_basis(p: int) -> np.ndarray:
    """``E_ii`` first, then ``(E_ij + E_ji)/sqrt(2)`` for ``i < j`` in row-major order."""
    out = []
    for i in range(p):
        e = np.zeros((p, p))
        e[i, i] = 1.0
        out.append(e)
    r = 1.0 / math.sqrt(2.0)
    for i in range(p):
        for j in range(i + 1, p):
            e = np.zeros((p, p))
            e[i, j] = e[j, i] = r
            out.append(e)
    return np.array(out)


def _sym_coords(m):
    """Coordinates of symmetric ``m`` (batched) in `sym_frobenius_basis`."""
    p = m.shape[-1]
    iu = np.triu_indices(p, 1)
    diag = np.diagonal(m, axis1=-2, axis2=-1)
    off = math.sqrt(2.0) * m[..., iu[0], iu[1]]
    return np.concatenate([diag, off], axis=-1)


class _SPDBase(Space):
    def __init__(self, spec: SpaceSpec) -> None:
        super().__init__(spec)
        self.p = math.isqrt(spec.dim)
        self.point_shape = (self.p, self.p)
        self._frob = sym_frobenius_basis(self.p)

    def _check_point(self, x):
        scale = max(1.0, float(np.abs(x).max()))
        if np.abs(x - x.T).max() > POINT_TOL * scale:
            raise InvalidPointError("matrix is not symmetric")
        if np.linalg.eigvalsh(sym(x))[0] <= 0:
            raise InvalidPointError("matrix is not positive definite")

    def _check_tangent(self, x, v):
        scale = max(1.0, float(np.abs(v).max()))
        if np.abs(v - np.swapaxes(v, -1, -2)).max() > POINT_TOL * scale:
            raise InvalidPointError("tangent matrix is not symmetric")

    @property
    def tangent_dim(self) -> int:
        return self.p * (self.p + 1) // 2

    def random_point(self, rng, scale=1.0):
        g = rng.normal(size=(self.p, self.p))
        return expm(scale * sym(g) / math.sqrt(2.0))

    def extrinsic_mean(self, data):
        return sym(np.mean(data, axis=0))


class SPDAffine(_SPDBase):
    """Affine-invariant metric ``<U,V>_A = tr(A^-1 U A^-1 V)``; a Hadamard manifold."""

    def _whiten(self, a, b):
        _, isa = sqrt_and_invsqrt(a)
        return sym(isa @ b @ isa)

    def dist(self, x, y):
        w = np.linalg.eigvalsh(self._whiten(x, y))
        if np.any(w <= 0):
            raise InvalidPointError("matrix is not positive definite")
        return np.sqrt(np.sum(np.log(w) ** 2, axis=-1))

    def exp(self, x, v):
        sa, isa = sqrt_and_invsqrt(x)
        return sym(sa @ expm(sym(isa @ v @ isa)) @ sa)

    def log(self, x, y):
        sa, isa = sqrt_and_invsqrt(x)
        return sym(sa @ logm(sym(isa @ y @ isa)) @ sa)

    def inner(self, x, u, v):
        _, isa = sqrt_and_invsqrt(x)
        uu = isa @ u @ isa
        vv = isa @ v @ isa
        return np.sum(uu * vv, axis=(-2, -1))

    def transport(self, x, y, v):
        sa, isa = sqrt_and_invsqrt(x)
        e = sa @ sqrtm(sym(isa @ y @ isa)) @ isa
        return sym(e @ v @ e.T)

    def geodesic_point(self, x, y, t):
        sa, isa = sqrt_and_invsqrt(x)
        w, q = np.linalg.eigh(sym(isa @ y @ isa))
        t = np.asarray(t, dtype=float)
        powers = w[None, :] ** t.reshape(-1, 1)
        mid = (q[None] * powers[:, None, :]) @ q.T[None]
        out = sym(sa @ mid @ sa)
        return out[0] if t.ndim == 0 else out

    def tangent_basis(self, x):
        sa, _ = sqrt_and_invsqrt(x)
        return sym(sa @ self._frob @ sa)

    def coords_of(self, x, v):
        _, isa = sqrt_and_invsqrt(x)
        return _sym_coords(sym(isa @ v @ isa))

    def from_tangent_coords(self, x, c):
        sa, _ = sqrt_and_invsqrt(x)
        m = np.tensordot(np.asarray(c, dtype=float), self._frob, axes=(-1, 0))
        return sym(sa @ m @ sa)


class SPDBuresWasserstein(_SPDBase):
    """Bures-Wasserstein metric restricted to spectra in ``[lambda0, inf)``.

    Tangent vectors are symmetric ``X``; the metric is
    ``<X,Y>_A = tr(L_A(X) Y)/2`` with ``A L + L A = X``, and geodesics follow
    the optimal-transport parametrization ``(I + tL) A (I + tL)``.
    """

    def __init__(self, spec: SpaceSpec) -> None:
        super().__init__(spec)
        self.floor = float(spec.spectral_floor)
        self._eye = np.eye(self.p)

    def _check_point(self, x):
        super()._check_point(x)
        if np.linalg.eigvalsh(sym(x))[0] < self.floor * (1.0 - 1e-12):
            raise InvalidPointError("eigenvalue below the spectral floor")

    def _require_floor(self, y):
        w = np.linalg.eigvalsh(sym(y))
        if np.any(w[..., 0] < self.floor * (1.0 - 1e-12)):
            raise CutLocusError("endpoint eigenvalue below the spectral floor")

    def lyapunov(self, a, x):
        """Solve ``A L + L A = X`` (``x`` may be batched)."""
        w, q = np.linalg.eigh(sym(a))
        xt = q.T @ x @ q
        lt = xt / (w[:, None] + w[None, :])
        return sym(q @ lt @ q.T)

    def ot_map(self, a, b):
        """Symmetric ``T`` with ``T A T = B``."""
        sa, isa = sqrt_and_invsqrt(a)
        return sym(isa @ sqrtm(sym(sa @ b @ sa)) @ isa)

    def dist(self, x, y):
        sa, _ = sqrt_and_invsqrt(x)
        d = self.ot_map(x, y) - self._eye
        return np.sqrt(np.sum((d @ sa) ** 2, axis=(-2, -1)))

    def exp(self, x, v):
        lmat = self.lyapunov(x, v)
        m = self._eye + lmat
        if np.any(np.linalg.eigvalsh(m)[..., 0] <= 0):
            raise CutLocusError("step leaves the injectivity domain (I + L not positive definite)")
        out = sym(m @ x @ m)
        self._require_floor(out)
        return out

    def log(self, x, y):
        self._require_floor(x)
        self._require_floor(y)
        d = self.ot_map(x, y) - self._eye
        return sym(d @ x + x @ d)

    def inner(self, x, u, v):
        return 0.5 * np.sum(self.lyapunov(x, u) * np.asarray(v), axis=(-2, -1))

    def geodesic_point(self, x, y, t):
        tmap = self.ot_map(x, y)
        t = np.asarray(t, dtype=float)
        tt = t.reshape(-1, 1, 1)
        m = (1.0 - tt) * self._eye + tt * tmap
        out = sym(m @ x @ m)
        return out[0] if t.ndim == 0 else out

    def christoffel(self, a, x, y):
        """Christoffel form ``Gamma_A(X, Y)`` in ambient symmetric-matrix coordinates."""
        lx = self.lyapunov(a, x)
        ly = self.lyapunov(a, y)
        m = 0.5 * (
            -0.5 * self.lyapunov(a, ly @ x + x @ ly)
            - 0.5 * self.lyapunov(a, lx @ y + y @ lx)
            + 0.5 * (lx @ ly + ly @ lx)
        )
        return sym(2.0 * (a @ m + m @ a))

    def transport(self, x, y, v):
        """Parallel transport by integrating ``V' = -Gamma(gamma', V)`` along the geodesic."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        lmat = self.ot_map(x, y) - self._eye
        if np.abs(lmat).max() == 0.0:
            return v.copy()
        shape = v.shape
        p = self.p

        def rhs(t, flat):
            m = self._eye + t * lmat
            g = sym(m @ x @ m)
            vel = sym(lmat @ x @ m + m @ x @ lmat)
            vv = flat.reshape(shape)
            return -self.christoffel(g, vel, vv).reshape(-1)

        scale = max(1.0, float(np.abs(v).max()))
        sol = solve_ivp(rhs, (0.0, 1.0), v.reshape(-1), method="DOP853", rtol=1e-12, atol=1e-14 * scale)
        if not sol.success:
            raise GeometryError(f"transport integration failed: {sol.message}")
        return sym(sol.y[:, -1].reshape(shape[:-2] + (p, p)))

    def tangent_basis(self, x):
        gram = self.inner(x, self._frob[:, None], self._frob[None, :])
        chol = np.linalg.cholesky(gram)
        coef = np.linalg.inv(chol)
        return sym(np.tensordot(coef, self._frob, axes=(1, 0)))

    def random_point(self, rng, scale=1.0):
        return self.floor * self._eye + super().random_point(rng, scale)
