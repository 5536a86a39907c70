"""Probability and reference measures on finite alphabets and R^d.

Finite measures are weight vectors over symbols 0..K-1; Gaussian measures
are (mean, covariance) pairs with explicit rank handling so singular
covariances are first-class. Kernels are row-stochastic matrices or
affine-Gaussian maps x -> N(A x + b, noise_cov).

All logarithms are base 2. Divergences are returned as tagged extended
reals (`ExtReal`) rather than IEEE infinities so that the +inf that means
"absolute continuity fails" stays distinguishable from a diverging
integral.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .quadforms import AffineMap, QuadForm

LOG2E = 1.0 / np.log(2.0)

PROB_SUM_TOL = 1e-12
ROW_SUM_TOL = 1e-12
SYM_TOL = 1e-10
EIG_CLAMP = 1e-10
RANK_CUT = 1e-10
FACTOR_TOL = 1e-8
SUPPORT_TOL = 1e-8


class AlphabetMismatchError(ValueError):
    """The two operands live on different alphabets."""


class AbsoluteContinuityError(ValueError):
    """mu is not absolutely continuous with respect to nu."""


class UndefinedDivergenceError(ValueError):
    """Positive and negative parts of the divergence integral both diverge."""


# --------------------------------------------------------------------------
# extended reals
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ExtReal:
    """Tagged extended real: finite value, +inf, or -inf.

    `ac_failure` marks a +inf that arose because absolute continuity
    fails (divergence-lemma case 2) rather than from a diverging integral.
    """

    kind: str  # "finite" | "+inf" | "-inf"
    value: float = 0.0
    ac_failure: bool = False

    def __post_init__(self):
        if self.kind not in ("finite", "+inf", "-inf"):
            raise ValueError(f"bad ExtReal kind {self.kind!r}")

    @classmethod
    def finite(cls, v: float) -> "ExtReal":
        return cls("finite", float(v))

    @classmethod
    def pos_inf(cls, ac_failure: bool = False) -> "ExtReal":
        return cls("+inf", 0.0, ac_failure)

    @classmethod
    def neg_inf(cls) -> "ExtReal":
        return cls("-inf", 0.0)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    def expect_finite(self) -> float:
        if not self.is_finite:
            raise ValueError(f"expected a finite value, got {self.kind}")
        return self.value

    def as_float(self) -> float:
        if self.kind == "+inf":
            return float("inf")
        if self.kind == "-inf":
            return float("-inf")
        return self.value


def digest(*parts) -> str:
    """Stable short digest used to build structural descriptors."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p, dtype=float).tobytes())
        else:
            h.update(repr(p).encode())
    return h.hexdigest()


# --------------------------------------------------------------------------
# measures
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    """Nonnegative weight vector over symbols 0..K-1."""

    weights: np.ndarray
    is_probability: bool = True

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if self.is_probability:
            if abs(float(w.sum()) - 1.0) > PROB_SUM_TOL:
                raise ValueError(f"probability weights sum to {w.sum()!r}, not 1")
            if not np.any(w > 0):
                raise ValueError("probability measure needs nonempty support")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    @property
    def p(self) -> np.ndarray:
        return self.weights

    def entropy(self) -> float:
        """H(mu) in bits."""
        w = self.weights[self.weights > 0]
        return float(-(w * np.log2(w)).sum())

    @classmethod
    def pmf(cls, values) -> "FiniteMeasure":
        return cls(np.asarray(values, dtype=float), True)

    @classmethod
    def uniform(cls, k: int) -> "FiniteMeasure":
        return cls(np.full(k, 1.0 / k), True)

    @classmethod
    def bernoulli(cls, p: float) -> "FiniteMeasure":
        return cls(np.array([1.0 - p, p]), True)

    @classmethod
    def point_mass(cls, k: int, i: int) -> "FiniteMeasure":
        w = np.zeros(k)
        w[i] = 1.0
        return cls(w, True)

    def mix(self, other: "FiniteMeasure", t: float) -> "FiniteMeasure":
        """t*self + (1-t)*other."""
        if other.size != self.size:
            raise AlphabetMismatchError("mixture needs equal alphabets")
        return FiniteMeasure(t * self.weights + (1.0 - t) * other.weights,
                             self.is_probability and other.is_probability)


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    """Gaussian on R^d with possibly singular covariance.

    The eigendecomposition is done once at construction: eigenvalues below
    RANK_CUT * max_eig are cut, so `rank`, the factor B (cov = B B') and the
    support projector are explicit and reproducible.
    """

    mean: np.ndarray
    cov: np.ndarray
    rank: int = field(init=False)
    factor: np.ndarray = field(init=False)

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        c = np.asarray(self.cov, dtype=float)
        if c.ndim == 0:
            c = c.reshape(1, 1)
        if c.shape != (m.size, m.size):
            raise ValueError(f"cov shape {c.shape} does not match dim {m.size}")
        if np.max(np.abs(c - c.T)) > SYM_TOL:
            raise ValueError("covariance is not symmetric")
        c = 0.5 * (c + c.T)
        eig, vec = np.linalg.eigh(c)
        if np.min(eig) < -EIG_CLAMP:
            raise ValueError(f"covariance has eigenvalue {eig.min()} < -{EIG_CLAMP}")
        eig = np.clip(eig, 0.0, None)
        top = float(eig.max(initial=0.0))
        keep = eig > RANK_CUT * top if top > 0 else np.zeros_like(eig, dtype=bool)
        order = np.argsort(eig[keep])[::-1]
        vals = eig[keep][order]
        vecs = vec[:, keep][:, order]
        b = vecs * np.sqrt(vals)
        if np.linalg.norm(b @ b.T - c) > FACTOR_TOL * max(1.0, np.linalg.norm(c)):
            raise ValueError("factorization failed to reconstruct covariance")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)
        object.__setattr__(self, "rank", int(keep.sum()))
        object.__setattr__(self, "factor", b)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def support_projector(self) -> np.ndarray:
        b = self.factor
        if self.rank == 0:
            return np.zeros((self.dim, self.dim))
        u, _ = np.linalg.qr(b)
        return u @ u.T

    def factor_pinv(self) -> np.ndarray:
        """Pseudo-inverse of the factor B (rank x dim)."""
        return np.linalg.pinv(self.factor)

    def same_support(self, other: "GaussianMeasure", tol: float = SUPPORT_TOL) -> bool:
        if other.dim != self.dim:
            return False
        if other.rank != self.rank:
            return False
        p1, p2 = self.support_projector, other.support_projector
        if np.linalg.norm(p1 - p2, 2) > tol:
            return False
        d = self.mean - other.mean
        return bool(np.linalg.norm(d - p2 @ d) <= tol * max(1.0, np.linalg.norm(d)))

    def differential_entropy(self) -> ExtReal:
        """h(mu) in bits; -inf when singular."""
        if self.rank < self.dim:
            return ExtReal.neg_inf()
        sign, logdet = np.linalg.slogdet(self.cov)
        if sign <= 0:
            return ExtReal.neg_inf()
        return ExtReal.finite(0.5 * (self.dim * np.log2(2 * np.pi * np.e)
                                     + logdet * LOG2E))

    @classmethod
    def standard(cls, d: int) -> "GaussianMeasure":
        return cls(np.zeros(d), np.eye(d))

    @classmethod
    def scalar(cls, mean: float, var: float) -> "GaussianMeasure":
        return cls(np.array([mean]), np.array([[var]]))


Measure = Union[FiniteMeasure, GaussianMeasure]


@dataclass(frozen=True, eq=False)
class ReferenceMeasure:
    """Counting, Lebesgue(d), or a probability measure used as reference."""

    kind: str  # "counting" | "lebesgue" | "probability"
    size: int | None = None
    dim: int | None = None
    measure: Measure | None = None

    @classmethod
    def counting(cls, size: int) -> "ReferenceMeasure":
        return cls("counting", size=size)

    @classmethod
    def lebesgue(cls, dim: int) -> "ReferenceMeasure":
        return cls("lebesgue", dim=dim)

    @classmethod
    def of(cls, measure: Measure) -> "ReferenceMeasure":
        return cls("probability", measure=measure)


def _coerce_reference(nu) -> ReferenceMeasure:
    if isinstance(nu, ReferenceMeasure):
        return nu
    if isinstance(nu, (FiniteMeasure, GaussianMeasure)):
        return ReferenceMeasure.of(nu)
    raise TypeError(f"cannot use {type(nu).__name__} as a reference measure")


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class FiniteKernel:
    """Row-stochastic conditional pmf matrix, shape (|X|, |Y|)."""

    rows: np.ndarray

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if np.any(r < 0):
            raise ValueError("kernel rows must be nonnegative")
        if np.max(np.abs(r.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("kernel rows must each sum to 1")
        object.__setattr__(self, "rows", r)

    @property
    def in_size(self) -> int:
        return self.rows.shape[0]

    @property
    def out_size(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def bsc(cls, flip: float) -> "FiniteKernel":
        return cls(np.array([[1 - flip, flip], [flip, 1 - flip]]))

    @classmethod
    def deterministic(cls, in_size: int, out_size: int, mapping) -> "FiniteKernel":
        rows = np.zeros((in_size, out_size))
        for x in range(in_size):
            rows[x, mapping[x]] = 1.0
        return cls(rows)

    @classmethod
    def constant(cls, in_size: int, out: FiniteMeasure) -> "FiniteKernel":
        return cls(np.tile(out.weights, (in_size, 1)))

    def mix(self, other: "FiniteKernel", t: float) -> "FiniteKernel":
        if other.rows.shape != self.rows.shape:
            raise AlphabetMismatchError("kernel mixture needs equal shapes")
        return FiniteKernel(t * self.rows + (1.0 - t) * other.rows)


@dataclass(frozen=True, eq=False)
class AffineGaussianKernel:
    """x -> N(A x + b, noise_cov)."""

    A: np.ndarray
    b: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.A, dtype=float))
        bb = np.atleast_1d(np.asarray(self.b, dtype=float))
        noise = GaussianMeasure(np.zeros(bb.size), self.noise_cov)  # validates PSD
        if a.shape[0] != bb.size:
            raise ValueError("A and b disagree on the output dimension")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", bb)
        object.__setattr__(self, "noise_cov", noise.cov)
        object.__setattr__(self, "_noise", noise)

    @property
    def in_dim(self) -> int:
        return self.A.shape[1]

    @property
    def out_dim(self) -> int:
        return self.A.shape[0]

    @property
    def noise(self) -> GaussianMeasure:
        return self._noise

    @classmethod
    def scalar(cls, a: float, b: float, noise_var: float) -> "AffineGaussianKernel":
        return cls(np.array([[a]]), np.array([b]), np.array([[noise_var]]))

    def at(self, x) -> GaussianMeasure:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return GaussianMeasure(self.A @ x + self.b, self.noise_cov)

    def lift_over_head(self, head_dim: int) -> "AffineGaussianKernel":
        """View a kernel on X as a kernel on (W, X) that ignores the first
        head_dim coordinates."""
        a = np.hstack([np.zeros((self.out_dim, head_dim)), self.A])
        return AffineGaussianKernel(a, self.b, self.noise_cov)


Kernel = Union[FiniteKernel, AffineGaussianKernel]


def pair_index(x, y, out_size: int):
    """Flatten pair symbols (x, y) over X x Y into x * |Y| + y."""
    return np.asarray(x) * out_size + np.asarray(y)


def unpair_index(idx, out_size: int):
    idx = np.asarray(idx)
    return idx // out_size, idx % out_size


# --------------------------------------------------------------------------
# joint measures
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class JointMeasure:
    """The measure of (x, y) with x ~ base and y ~ kernel(x)."""

    base: Measure
    kernel: Kernel

    def __post_init__(self):
        if isinstance(self.base, FiniteMeasure):
            if not isinstance(self.kernel, FiniteKernel):
                raise AlphabetMismatchError("finite base needs a finite kernel")
            if self.kernel.in_size != self.base.size:
                raise AlphabetMismatchError(
                    f"kernel input size {self.kernel.in_size} != alphabet "
                    f"size {self.base.size}")
        else:
            if not isinstance(self.kernel, AffineGaussianKernel):
                raise AlphabetMismatchError("Gaussian base needs an affine-Gaussian kernel")
            if self.kernel.in_dim != self.base.dim:
                raise AlphabetMismatchError(
                    f"kernel input dim {self.kernel.in_dim} != dim {self.base.dim}")

    @property
    def is_finite(self) -> bool:
        return isinstance(self.base, FiniteMeasure)

    @property
    def sizes(self) -> tuple[int, int]:
        if not self.is_finite:
            raise TypeError("sizes only applies to finite joints")
        return self.base.size, self.kernel.out_size

    @property
    def dims(self) -> tuple[int, int]:
        if self.is_finite:
            raise TypeError("dims only applies to Gaussian joints")
        return self.base.dim, self.kernel.out_dim

    @property
    def pmf_matrix(self) -> np.ndarray:
        if not self.is_finite:
            raise TypeError("pmf_matrix only applies to finite joints")
        return self.base.weights[:, None] * self.kernel.rows

    def as_measure(self) -> Measure:
        """The joint as a plain measure on the product alphabet.

        Finite pairs are flattened with pair_index; Gaussian joints become a
        single Gaussian on R^(d1+d2) with the standard block covariance.
        """
        if self.is_finite:
            return FiniteMeasure(self.pmf_matrix.reshape(-1),
                                 self.base.is_probability)
        mu, k = self.base, self.kernel
        mean = np.concatenate([mu.mean, k.A @ mu.mean + k.b])
        cxx = mu.cov
        cxy = cxx @ k.A.T
        cyy = k.A @ cxx @ k.A.T + k.noise_cov
        cov = np.block([[cxx, cxy], [cxy.T, cyy]])
        return GaussianMeasure(mean, cov)

    def marginal_x(self) -> Measure:
        return self.base

    def marginal_y(self) -> Measure:
        if self.is_finite:
            return FiniteMeasure(self.pmf_matrix.sum(axis=0),
                                 self.base.is_probability)
        mu, k = self.base, self.kernel
        return GaussianMeasure(k.A @ mu.mean + k.b,
                               k.A @ mu.cov @ k.A.T + k.noise_cov)


def joint(mu: Measure, kappa: Kernel) -> JointMeasure:
    """Construct the joint measure of (x, y), x ~ mu, y ~ kappa(x)."""
    return JointMeasure(mu, kappa)


def marginal_y(j: JointMeasure) -> Measure:
    return j.marginal_y()


def product_joint(mu: Measure, nu: Measure) -> JointMeasure:
    """mu x nu as a JointMeasure (constant kernel)."""
    if isinstance(mu, FiniteMeasure):
        if not isinstance(nu, FiniteMeasure):
            raise AlphabetMismatchError("product of mixed alphabet kinds")
        return JointMeasure(mu, FiniteKernel.constant(mu.size, nu))
    if not isinstance(nu, GaussianMeasure):
        raise AlphabetMismatchError("product of mixed alphabet kinds")
    k = AffineGaussianKernel(np.zeros((nu.dim, mu.dim)), nu.mean, nu.cov)
    return JointMeasure(mu, k)


# --------------------------------------------------------------------------
# standardization and divergences
# --------------------------------------------------------------------------
def gaussian_standardize(g: GaussianMeasure) -> AffineMap:
    """Affine map T with T(z) = B z + mean pushing N(0, I_rank) to g."""
    return AffineMap(g.factor, g.mean)


def _finite_reference_weights(nu: ReferenceMeasure, size: int) -> np.ndarray:
    if nu.kind == "counting":
        if nu.size != size:
            raise AlphabetMismatchError("counting reference has wrong size")
        return np.ones(size)
    if nu.kind == "probability" and isinstance(nu.measure, FiniteMeasure):
        if nu.measure.size != size:
            raise AlphabetMismatchError("reference pmf has wrong size")
        return nu.measure.weights
    raise AlphabetMismatchError(
        f"finite measure cannot be compared against reference kind {nu.kind!r}")


def _gaussian_pair_standard_params(mu: GaussianMeasure, nu: GaussianMeasure):
    """Parameters (m', Sigma') of mu pulled back through nu's standardizing
    map, valid when supports coincide."""
    bp = nu.factor_pinv()
    m = bp @ (mu.mean - nu.mean)
    s = bp @ mu.cov @ bp.T
    return m, 0.5 * (s + s.T)


def divergence(mu: Measure, nu) -> ExtReal:
    """D(mu || nu) in bits, for a probability mu and a sigma-finite nu.

    Counting reference gives -H(mu); Lebesgue gives -h(mu) (full rank
    required); Gaussian-vs-Gaussian uses the closed form through the shared
    standardizing map. Support violations return +inf tagged ac_failure.
    """
    nu = _coerce_reference(nu)
    if isinstance(mu, FiniteMeasure):
        if nu.kind == "lebesgue" or (nu.kind == "probability"
                                     and isinstance(nu.measure, GaussianMeasure)):
            raise AlphabetMismatchError("finite measure vs continuous reference")
        w = _finite_reference_weights(nu, mu.size)
        supp = mu.support
        if np.any(w[supp] <= 0):
            return ExtReal.pos_inf(ac_failure=True)
        p = mu.weights[supp]
        return ExtReal.finite(float((p * (np.log2(p) - np.log2(w[supp]))).sum()))

    if not isinstance(mu, GaussianMeasure):
        raise TypeError(f"unsupported measure type {type(mu).__name__}")
    if nu.kind == "counting" or (nu.kind == "probability"
                                 and isinstance(nu.measure, FiniteMeasure)):
        raise AlphabetMismatchError("Gaussian measure vs discrete reference")
    if nu.kind == "lebesgue":
        if nu.dim != mu.dim:
            raise AlphabetMismatchError("Lebesgue reference has wrong dimension")
        if mu.rank < mu.dim:
            return ExtReal.pos_inf(ac_failure=True)
        h = mu.differential_entropy().expect_finite()
        return ExtReal.finite(-h)
    target = nu.measure
    assert isinstance(target, GaussianMeasure)
    if target.dim != mu.dim:
        raise AlphabetMismatchError("Gaussian reference has wrong dimension")
    if not mu.same_support(target):
        return ExtReal.pos_inf(ac_failure=True)
    if mu.rank == 0:
        return ExtReal.finite(0.0)
    m, s = _gaussian_pair_standard_params(mu, target)
    r = mu.rank
    sign, logdet = np.linalg.slogdet(s)
    if sign <= 0:
        return ExtReal.pos_inf(ac_failure=True)
    nats = 0.5 * (float(np.trace(s)) + float(m @ m) - r - logdet)
    return ExtReal.finite(nats * LOG2E)


def mutual_information(mu: Measure, kappa: Kernel) -> ExtReal:
    """I(mu, kappa) = D(mu kappa || mu x kappa_* mu) in bits."""
    j = joint(mu, kappa)
    if j.is_finite:
        pm = j.pmf_matrix
        px = pm.sum(axis=1)
        py = pm.sum(axis=0)
        mask = pm > 0
        prod = np.outer(px, py)
        val = float((pm[mask] * (np.log2(pm[mask]) - np.log2(prod[mask]))).sum())
        return ExtReal.finite(max(val, 0.0))
    prod = product_joint(j.base, j.marginal_y())
    return divergence(j.as_measure(), prod.as_measure())


def log_rn_derivative(mu: Measure, nu):
    """log2(d mu / d nu) as a test function whose mu-integral is D(mu||nu).

    Finite pairs return a per-symbol table (zero off the support of mu,
    which construction code always pairs with a support-exclusion set).
    Gaussian pairs return the explicit quadratic form obtained through the
    shared standardizing affine map.
    """
    from .criteria import TestFunction, Tag  # local import to avoid a cycle

    nu = _coerce_reference(nu)
    d = divergence(mu, nu)
    if not d.is_finite:
        if d.ac_failure:
            raise AbsoluteContinuityError("support of mu is not contained in nu's")
        raise UndefinedDivergenceError("divergence is not finite")

    if isinstance(mu, FiniteMeasure):
        w = _finite_reference_weights(nu, mu.size)
        table = np.zeros(mu.size)
        supp = mu.support
        table[supp] = np.log2(mu.weights[supp]) - np.log2(w[supp])
        bound = float(np.max(np.abs(table))) if supp.size else 0.0
        return TestFunction(
            descriptor=f"log_rn[{digest(mu.weights, w)}]",
            mean=d.value, tag=Tag.bounded(bound), table=table)

    assert isinstance(mu, GaussianMeasure)
    if nu.kind == "lebesgue":
        # log2 of the density of mu
        prec = np.linalg.inv(mu.cov)
        q = QuadForm(-0.5 * prec * LOG2E, (prec @ mu.mean) * LOG2E,
                     float(-0.5 * (mu.mean @ prec @ mu.mean) * LOG2E
                           - 0.5 * (mu.dim * np.log2(2 * np.pi)
                                    + np.linalg.slogdet(mu.cov)[1] * LOG2E)))
        return TestFunction(
            descriptor=f"log_density[{digest(mu.mean, mu.cov)}]",
            mean=d.value, tag=Tag.quadratic(q.quadratic_bound()), quadform=q)

    target = nu.measure
    assert isinstance(target, GaussianMeasure)
    # Pull back through T(z) = B z + mean_nu: on the common support,
    # log2 (dmu/dnu)(T z) = (|z|^2 - (z-m)' S^{-1} (z-m)) / (2 ln 2)
    #                        - (1/2) log2 |S|.
    m, s = _gaussian_pair_standard_params(mu, target)
    r = target.rank
    if r == 0:
        q = QuadForm.constant(mu.dim, 0.0)
        return TestFunction(descriptor=f"log_rn[{digest(mu.mean, target.mean)}]",
                            mean=0.0, tag=Tag.quadratic(0.0), quadform=q)
    s_inv = np.linalg.inv(s)
    logdet = np.linalg.slogdet(s)[1]
    # in z coordinates
    qz = QuadForm(0.5 * (np.eye(r) - s_inv) * LOG2E,
                  (s_inv @ m) * LOG2E,
                  float(-0.5 * (m @ s_inv @ m) * LOG2E - 0.5 * logdet * LOG2E))
    bp = target.factor_pinv()
    back = AffineMap(bp, -bp @ target.mean)  # v -> z
    q = qz.compose_affine(back)
    return TestFunction(
        descriptor=f"log_rn[{digest(mu.mean, mu.cov, target.mean, target.cov)}]",
        mean=d.value, tag=Tag.quadratic(q.quadratic_bound()), quadform=q)
