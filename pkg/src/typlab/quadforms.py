"""Quadratic forms and affine maps on R^d.

These are the workhorses behind Gaussian log-density ratios, quadratic
test functions, and affine pullbacks. Everything is plain numpy and
vectorized over leading axes: inputs of shape (..., d) give outputs of
shape (...,).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = np.diag(a) if a.shape[0] > 1 else a.reshape(1, 1)
    return a


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> matrix @ x + shift, from R^in_dim to R^out_dim."""

    matrix: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        s = np.atleast_1d(np.asarray(self.shift, dtype=float))
        if m.shape[0] != s.shape[0]:
            raise ValueError(f"shape mismatch: matrix {m.shape} vs shift {s.shape}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "shift", s)

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim == 1 and self.in_dim == 1:
            v = v[:, None]
        return v @ self.matrix.T + self.shift

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """self o inner."""
        return AffineMap(self.matrix @ inner.matrix,
                         self.matrix @ inner.shift + self.shift)

    @classmethod
    def identity(cls, d: int) -> "AffineMap":
        return cls(np.eye(d), np.zeros(d))

    @classmethod
    def coordinate_projection(cls, d: int, coords) -> "AffineMap":
        coords = np.atleast_1d(np.asarray(coords, dtype=int))
        m = np.zeros((coords.size, d))
        m[np.arange(coords.size), coords] = 1.0
        return cls(m, np.zeros(coords.size))


@dataclass(frozen=True, eq=False)
class QuadForm:
    """v -> v' Q v + b' v + c with Q symmetric."""

    Q: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        q = _as_2d(self.Q)
        q = 0.5 * (q + q.T)
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if q.shape[0] != b.shape[0]:
            raise ValueError(f"shape mismatch: Q {q.shape} vs b {b.shape}")
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.dim == 1 and (v.ndim == 0 or v.shape[-1] != 1):
            v = v[..., None]
        return np.einsum("...i,ij,...j->...", v, self.Q, v) + v @ self.b + self.c

    @classmethod
    def constant(cls, d: int, c: float) -> "QuadForm":
        return cls(np.zeros((d, d)), np.zeros(d), c)

    def scaled(self, a: float) -> "QuadForm":
        return QuadForm(a * self.Q, a * self.b, a * self.c)

    def plus(self, other: "QuadForm") -> "QuadForm":
        return QuadForm(self.Q + other.Q, self.b + other.b, self.c + other.c)

    def compose_affine(self, T: AffineMap) -> "QuadForm":
        """q(T(x)) as a quadratic form in x."""
        M, t = T.matrix, T.shift
        Q2 = M.T @ self.Q @ M
        b2 = 2.0 * (M.T @ (self.Q @ t)) + M.T @ self.b
        c2 = float(t @ self.Q @ t + self.b @ t + self.c)
        return QuadForm(Q2, b2, c2)

    def mean_under_gaussian(self, mean, cov) -> float:
        """E q(v) for v ~ N(mean, cov)."""
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = _as_2d(cov)
        return float(np.trace(self.Q @ cov) + mean @ self.Q @ mean
                     + self.b @ mean + self.c)

    def quadratic_bound(self) -> float:
        """Smallest convenient M with |q(v)| <= M (1 + |v|^2) everywhere."""
        qn = float(np.linalg.norm(self.Q, 2)) if self.dim else 0.0
        bn = float(np.linalg.norm(self.b))
        return max(qn + 0.5 * bn, 0.5 * bn + abs(self.c))

    def block(self, rows: slice, cols: slice) -> np.ndarray:
        return self.Q[rows, cols]

    def conditional_mean_given_head(self, A: np.ndarray, b_k: np.ndarray,
                                    noise_cov: np.ndarray) -> "QuadForm":
        """E[q(x, y) | x] as a quadratic form in x, for y = A x + b_k + w,
        w ~ N(0, noise_cov) on the tail coordinates."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b_k = np.atleast_1d(np.asarray(b_k, dtype=float))
        noise_cov = _as_2d(noise_cov)
        d2, d1 = A.shape
        if d1 + d2 != self.dim:
            raise ValueError("kernel dims do not match the form's dimension")
        lift = AffineMap(np.vstack([np.eye(d1), A]),
                         np.concatenate([np.zeros(d1), b_k]))
        base = self.compose_affine(lift)
        q_yy = self.Q[d1:, d1:]
        return QuadForm(base.Q, base.b, base.c + float(np.trace(q_yy @ noise_cov)))
