"""Typicality criteria as data: test functions, tolerance, excluded set.

A sequence is an ndarray of symbols: shape (n,) of ints for finite
alphabets, (n, d) floats for R^d (scalar sequences of shape (n,) are
accepted and treated as d=1). Batches stack a leading axis.

Membership uses <= with no fuzz; boundary sequences are members.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .measures import (
    AbsoluteContinuityError,
    AffineGaussianKernel,
    FiniteKernel,
    FiniteMeasure,
    GaussianMeasure,
    JointMeasure,
    Measure,
    ReferenceMeasure,
    digest,
    divergence,
    joint,
    log_rn_derivative,
    pair_index,
)
from .quadforms import AffineMap, QuadForm

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class Tag:
    """Growth class of a test function: bounded, quadratic, or general."""

    kind: str  # "bounded" | "quadratic" | "general"
    bound: float | None = None

    @classmethod
    def bounded(cls, m: float) -> "Tag":
        return cls("bounded", float(m))

    @classmethod
    def quadratic(cls, m: float) -> "Tag":
        return cls("quadratic", float(m))

    @classmethod
    def general(cls) -> "Tag":
        return cls("general")


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A mu-integrable test function with its stored mean.

    Exactly one backing is set: a per-symbol table (finite alphabets), a
    QuadForm (R^d), or a generic vectorized callable.
    """

    descriptor: str
    mean: float
    tag: Tag
    table: Optional[np.ndarray] = None
    quadform: Optional[QuadForm] = None
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        backings = sum(x is not None for x in (self.table, self.quadform, self.fn))
        if backings != 1:
            raise ValueError("exactly one of table/quadform/fn must be given")
        if self.table is not None:
            object.__setattr__(self, "table",
                               np.asarray(self.table, dtype=float))

    def __call__(self, symbols: np.ndarray) -> np.ndarray:
        if self.table is not None:
            return self.table[np.asarray(symbols, dtype=np.intp)]
        if self.quadform is not None:
            return self.quadform(symbols)
        return self.fn(np.asarray(symbols, dtype=float))

    def with_mean(self, mean: float) -> "TestFunction":
        return replace(self, mean=float(mean))


def table_test(values, mean: float, descriptor: str) -> TestFunction:
    values = np.asarray(values, dtype=float)
    return TestFunction(descriptor=descriptor, mean=float(mean),
                        tag=Tag.bounded(float(np.max(np.abs(values)))),
                        table=values)


def quadratic_test(qf: QuadForm, mean: float, descriptor: str) -> TestFunction:
    return TestFunction(descriptor=descriptor, mean=float(mean),
                        tag=Tag.quadratic(qf.quadratic_bound()), quadform=qf)


# --------------------------------------------------------------------------
# excluded sets
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ExcludedSet:
    """The mu-null set N of a criterion, as a vectorized predicate.

    Finite alphabets use a boolean table; Gaussian supports use the
    distance to an affine subspace; anything composite falls back to a
    predicate closure. `descriptor` identifies the construction.
    """

    descriptor: str
    kind: str  # "none" | "finite" | "affine-support" | "custom"
    table: Optional[np.ndarray] = None
    predicate: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @classmethod
    def none(cls) -> "ExcludedSet":
        return cls("none", "none")

    @classmethod
    def finite(cls, excluded_mask, descriptor: str | None = None) -> "ExcludedSet":
        mask = np.asarray(excluded_mask, dtype=bool)
        return cls(descriptor or f"finite[{digest(mask.astype(float))}]",
                   "finite", table=mask)

    @classmethod
    def support_complement(cls, mu: Measure, tol: float = 1e-8) -> "ExcludedSet":
        """Points outside the support of mu."""
        if isinstance(mu, FiniteMeasure):
            return cls.finite(mu.weights <= 0,
                              descriptor=f"off-support[{digest(mu.weights)}]")
        proj = mu.support_projector
        mean = mu.mean

        def pred(v: np.ndarray) -> np.ndarray:
            v = np.asarray(v, dtype=float)
            if mean.size == 1 and (v.ndim == 0 or v.shape[-1] != 1):
                v = v[..., None]
            d = v - mean
            resid = d - d @ proj.T
            return np.linalg.norm(resid, axis=-1) > tol

        return cls(f"off-support[{digest(mean, proj)}]", "affine-support",
                   predicate=pred)

    def contains(self, symbols: np.ndarray) -> np.ndarray:
        sym = np.asarray(symbols)
        if self.kind == "none":
            shape = sym.shape[:-1] if sym.dtype.kind == "f" and sym.ndim >= 2 \
                else sym.shape
            return np.zeros(shape, dtype=bool)
        if self.table is not None:
            return self.table[sym.astype(np.intp, copy=False)]
        return self.predicate(sym)

    def union(self, other: "ExcludedSet") -> "ExcludedSet":
        if self.kind == "none":
            return other
        if other.kind == "none":
            return self
        if self.table is not None and other.table is not None \
                and self.table.shape == other.table.shape:
            return ExcludedSet.finite(self.table | other.table,
                                      f"union[{self.descriptor},{other.descriptor}]")
        return ExcludedSet(f"union[{self.descriptor},{other.descriptor}]", "custom",
                           predicate=lambda v: self.contains(v) | other.contains(v))

    def intersection(self, other: "ExcludedSet") -> "ExcludedSet":
        if self.kind == "none" or other.kind == "none":
            return ExcludedSet.none()
        if self.table is not None and other.table is not None \
                and self.table.shape == other.table.shape:
            return ExcludedSet.finite(self.table & other.table,
                                      f"inter[{self.descriptor},{other.descriptor}]")
        return ExcludedSet(f"inter[{self.descriptor},{other.descriptor}]", "custom",
                           predicate=lambda v: self.contains(v) & other.contains(v))


# --------------------------------------------------------------------------
# criteria
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class TypicalityCriterion:
    """Triple (tests, epsilon, excluded). Tests may be empty."""

    tests: tuple[TestFunction, ...]
    epsilon: float
    excluded: ExcludedSet

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "tests", tuple(self.tests))

    @classmethod
    def of(cls, tests: Sequence[TestFunction], epsilon: float,
           excluded: ExcludedSet | None = None) -> "TypicalityCriterion":
        return cls(tuple(tests), float(epsilon), excluded or ExcludedSet.none())

    @property
    def is_bounded(self) -> bool:
        return all(t.tag.kind == "bounded" for t in self.tests)

    @property
    def is_quadratic(self) -> bool:
        return all(t.tag.kind in ("bounded", "quadratic") for t in self.tests)

    def with_epsilon(self, epsilon: float) -> "TypicalityCriterion":
        return TypicalityCriterion(self.tests, float(epsilon), self.excluded)


def _seq_batch(seqs: np.ndarray, finite: bool) -> np.ndarray:
    """Normalize to (m, n) int or (m, n, d) float with a leading batch axis."""
    a = np.asarray(seqs)
    if finite:
        if a.ndim == 1:
            a = a[None, :]
        if a.ndim != 2:
            raise ValueError("finite sequences must be (n,) or (m, n)")
        return a.astype(np.intp, copy=False)
    a = a.astype(float, copy=False)
    if a.ndim == 1:
        a = a[None, :, None]
    elif a.ndim == 2:
        # ambiguous (n, d) vs (m, n): treat as a single sequence (n, d)
        a = a[None, :, :]
    if a.ndim != 3:
        raise ValueError("vector sequences must be (n, d) or (m, n, d)")
    return a


def _is_finite_crit(crit: TypicalityCriterion) -> bool:
    for t in crit.tests:
        if t.table is not None:
            return True
        if t.quadform is not None:
            return False
    return crit.excluded.table is not None


def is_typical_batch(seqs: np.ndarray, crit: TypicalityCriterion,
                     finite: bool | None = None) -> np.ndarray:
    """Membership for a batch of sequences; returns a boolean (m,) array."""
    if finite is None:
        finite = _is_finite_crit(crit) or np.asarray(seqs).dtype.kind in "iu"
    a = _seq_batch(seqs, finite)
    if crit.excluded.kind == "none":
        ok = np.ones(a.shape[0], dtype=bool)
    else:
        ok = ~np.any(crit.excluded.contains(a), axis=1)
    for t in crit.tests:
        vals = t(a)
        dev = np.abs(vals.mean(axis=-1) - t.mean)
        ok &= dev <= crit.epsilon
    return ok


def is_typical(seq: np.ndarray, crit: TypicalityCriterion,
               finite: bool | None = None) -> bool:
    """True iff no symbol is excluded and every test's empirical average is
    within epsilon of its stored mean (comparison is <= on the computed
    double)."""
    return bool(is_typical_batch(seq, crit, finite)[0])


def meet(a: TypicalityCriterion, b: TypicalityCriterion) -> TypicalityCriterion:
    """Greatest lower bound: union of tests, min epsilon, union of excluded.

    Tests are deduplicated by descriptor.
    """
    seen = {t.descriptor: t for t in a.tests}
    tests = list(a.tests) + [t for t in b.tests if t.descriptor not in seen]
    return TypicalityCriterion(tuple(tests), min(a.epsilon, b.epsilon),
                               a.excluded.union(b.excluded))


def join(a: TypicalityCriterion, b: TypicalityCriterion) -> TypicalityCriterion:
    """Least upper bound: intersection of tests (by descriptor), max epsilon,
    intersection of excluded sets."""
    names = {t.descriptor for t in b.tests}
    tests = tuple(t for t in a.tests if t.descriptor in names)
    return TypicalityCriterion(tests, max(a.epsilon, b.epsilon),
                               a.excluded.intersection(b.excluded))


def refines(a: TypicalityCriterion, b: TypicalityCriterion) -> bool:
    """a <= b in the criterion order (more tests, smaller eps, bigger N).

    Only the descriptor-comparable part is checked.
    """
    names = {t.descriptor for t in a.tests}
    if not all(t.descriptor in names for t in b.tests):
        return False
    if a.epsilon > b.epsilon:
        return False
    if b.excluded.kind == "none":
        return True
    if a.excluded.table is not None and b.excluded.table is not None:
        return bool(np.all(a.excluded.table | ~b.excluded.table))
    return a.excluded.descriptor == b.excluded.descriptor


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------
def make_robust_criterion(mu: FiniteMeasure, epsilon: float) -> TypicalityCriterion:
    """Scaled-indicator tests 1_x / p(x) with mean 1; excluded = {p = 0}.

    Membership iff every empirical frequency satisfies
    |pihat(x)/p(x) - 1| <= epsilon and no zero-probability symbol occurs.
    """
    tests = []
    for x in mu.support:
        tbl = np.zeros(mu.size)
        tbl[x] = 1.0 / mu.weights[x]
        tests.append(table_test(tbl, 1.0, f"robust-ind[{x}]/{digest(mu.weights)}"))
    return TypicalityCriterion(tuple(tests), float(epsilon),
                               ExcludedSet.support_complement(mu))


def make_strong_criterion(mu: FiniteMeasure, epsilon: float) -> TypicalityCriterion:
    """Indicator tests 1_x with mean p(x) and tolerance epsilon / |X|."""
    tests = []
    for x in range(mu.size):
        tbl = np.zeros(mu.size)
        tbl[x] = 1.0
        tests.append(table_test(tbl, float(mu.weights[x]),
                                f"strong-ind[{x}]/{digest(mu.weights)}"))
    return TypicalityCriterion(tuple(tests), float(epsilon) / mu.size,
                               ExcludedSet.support_complement(mu))


def make_weak_criterion(mu: Measure, nu, epsilon: float) -> TypicalityCriterion:
    """Single test log2(d mu / d nu) with mean D(mu||nu); excluded is the
    support-violation set."""
    t = log_rn_derivative(mu, nu)
    return TypicalityCriterion((t,), float(epsilon),
                               ExcludedSet.support_complement(mu))


def make_divergence_criterion(mu: Measure, nu, epsilon: float,
                              eps_inner: float | None = None) -> TypicalityCriterion:
    """The criterion U0 driving the divergence-lemma bracket.

    Finite divergence (case 1): single log-RN test at an interior tolerance
    eps_inner in (0, epsilon), default epsilon / 2. When mu is not
    absolutely continuous w.r.t. nu (case 2), returns the witness-indicator
    criterion (1_A; eps0; {}) with A a support-violation set and
    eps0 < mu(A).

    The diverging cases 3 and 4 cannot arise for the supported measure
    kinds (finite alphabets and Gaussians always give a finite divergence
    when absolutely continuous); see truncated_log_criterion for the
    truncation construction itself.
    """
    nu_ref = nu if isinstance(nu, ReferenceMeasure) else ReferenceMeasure.of(nu)
    d = divergence(mu, nu_ref)
    if d.is_finite:
        if eps_inner is None:
            eps_inner = epsilon / 2.0
        if not (0 < eps_inner <= epsilon):
            raise ValueError("eps_inner must lie in (0, epsilon]")
        return make_weak_criterion(mu, nu_ref, eps_inner)
    if d.ac_failure:
        return _support_violation_criterion(mu, nu_ref, epsilon)
    raise AbsoluteContinuityError("unreachable divergence case")


def _support_violation_criterion(mu: Measure, nu: ReferenceMeasure,
                                 epsilon: float) -> TypicalityCriterion:
    """Case-2 witness: test 1_A with nu(A)=0 < mu(A), tolerance < mu(A)."""
    if isinstance(mu, FiniteMeasure):
        from .measures import _finite_reference_weights
        w = _finite_reference_weights(nu, mu.size)
        a_mask = (mu.weights > 0) & (w <= 0)
        mu_a = float(mu.weights[a_mask].sum())
        if mu_a <= 0:
            raise ValueError("mu is absolutely continuous; no witness set")
        tbl = a_mask.astype(float)
        t = table_test(tbl, mu_a, f"witness[{digest(tbl)}]")
        return TypicalityCriterion((t,), min(float(epsilon), mu_a / 2.0),
                                   ExcludedSet.none())
    assert isinstance(mu, GaussianMeasure)
    target = nu.measure if nu.kind == "probability" else None
    if nu.kind == "lebesgue":
        # mu singular: A = support(mu), Lebesgue-null
        excl = ExcludedSet.support_complement(mu)
        t = TestFunction(descriptor=f"witness[{digest(mu.mean, mu.cov)}]",
                         mean=1.0, tag=Tag.bounded(1.0),
                         fn=lambda v: (~excl.contains(v)).astype(float))
        return TypicalityCriterion((t,), min(float(epsilon), 0.5),
                                   ExcludedSet.none())
    assert isinstance(target, GaussianMeasure)
    # A = supp(mu) minus supp(nu); mu(A) = 1 since affine subspaces that do
    # not contain supp(mu) are mu-null.
    off_nu = ExcludedSet.support_complement(target)
    on_mu = ExcludedSet.support_complement(mu)

    t = TestFunction(
        descriptor=f"witness[{digest(mu.mean, mu.cov, target.mean, target.cov)}]",
        mean=1.0, tag=Tag.bounded(1.0),
        fn=lambda v: (off_nu.contains(v) & ~on_mu.contains(v)).astype(float))
    return TypicalityCriterion((t,), min(float(epsilon), 0.5), ExcludedSet.none())


def truncated_log_criterion(mu: FiniteMeasure, nu, target_level: float,
                            side: str = "upper") -> TypicalityCriterion:
    """The truncation construction of the divergence lemma's cases 3/4.

    Builds f_k = log2(g) 1{g <= k} (side="upper", giving int f_k >=
    target_level + 1) or f_k = log2(g) 1{g >= 1/k} (side="lower", giving
    int f_k <= -target_level - 2), with the smallest integer k that works,
    and returns (f_k; 1; {}). Raises if no finite k can reach the target,
    which for finite alphabets means the divergence itself is too small.
    """
    nu_ref = nu if isinstance(nu, ReferenceMeasure) else ReferenceMeasure.of(nu)
    from .measures import _finite_reference_weights
    w = _finite_reference_weights(nu_ref, mu.size)
    supp = mu.support
    if np.any(w[supp] <= 0):
        raise AbsoluteContinuityError("mu is not absolutely continuous wrt nu")
    g = np.zeros(mu.size)
    g[supp] = mu.weights[supp] / w[supp]
    logg = np.zeros(mu.size)
    logg[supp] = np.log2(g[supp])
    for k in range(1, 1 << 62):
        if side == "upper":
            fk = np.where((g > 0) & (g <= k), logg, 0.0)
            if float((mu.weights * fk).sum()) >= target_level + 1.0:
                break
        else:
            fk = np.where(g >= 1.0 / k, logg, 0.0)
            if float((mu.weights * fk).sum()) <= -target_level - 2.0:
                break
        if k > max(np.max(g[supp]), np.max(1.0 / g[supp])) + 1:
            raise ValueError("no truncation level reaches the target")
    mean = float((mu.weights * fk).sum())
    t = table_test(fk, mean, f"trunc-log[{side},{k},{digest(mu.weights, w)}]")
    return TypicalityCriterion((t,), 1.0, ExcludedSet.none())


def make_quadratic_divergence_criterion(joint_a: JointMeasure,
                                        joint_b: JointMeasure,
                                        epsilon: float,
                                        eps_inner: float | None = None
                                        ) -> TypicalityCriterion:
    """Single quadratic-tagged log-RN test between two Gaussian joints with
    equal supports; mean is the divergence."""
    ma, mb = joint_a.as_measure(), joint_b.as_measure()
    if not isinstance(ma, GaussianMeasure) or not isinstance(mb, GaussianMeasure):
        raise TypeError("both joints must be Gaussian")
    if eps_inner is None:
        eps_inner = epsilon / 2.0
    t = log_rn_derivative(ma, mb)  # raises AbsoluteContinuityError on mismatch
    return TypicalityCriterion((t,), float(eps_inner),
                               ExcludedSet.support_complement(ma))


# --------------------------------------------------------------------------
# pullbacks
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class FiniteMap:
    """Symbol relabeling X -> Y given by a lookup table."""

    table: np.ndarray  # (|X|,) ints in [0, |Y|)
    out_size: int

    def __post_init__(self):
        object.__setattr__(self, "table",
                           np.asarray(self.table, dtype=np.intp))

    def __call__(self, x):
        return self.table[np.asarray(x, dtype=np.intp)]

    @classmethod
    def pair_projection(cls, sizes: tuple[int, int], component: int) -> "FiniteMap":
        kx, ky = sizes
        idx = np.arange(kx * ky)
        table = idx // ky if component == 0 else idx % ky
        return cls(table, kx if component == 0 else ky)


def pullback(crit: TypicalityCriterion, phi) -> TypicalityCriterion:
    """Compose every test with phi and take preimages of the excluded set,
    so that x^n is typical for the pullback iff phi(x^n) is typical for
    crit. Supported maps: FiniteMap (relabeling / pair projection) and
    AffineMap (includes coordinate projections)."""
    if isinstance(phi, FiniteMap):
        tests = []
        for t in crit.tests:
            if t.table is None:
                raise TypeError("finite pullback needs table-backed tests")
            tests.append(TestFunction(descriptor=f"pull[{t.descriptor}]",
                                      mean=t.mean, tag=t.tag,
                                      table=t.table[phi.table]))
        if crit.excluded.kind == "none":
            excl = ExcludedSet.none()
        elif crit.excluded.table is not None:
            excl = ExcludedSet.finite(crit.excluded.table[phi.table],
                                      f"pull[{crit.excluded.descriptor}]")
        else:
            raise TypeError("finite pullback needs a table-backed excluded set")
        return TypicalityCriterion(tuple(tests), crit.epsilon, excl)

    if isinstance(phi, AffineMap):
        tests = []
        for t in crit.tests:
            if t.quadform is not None:
                tests.append(TestFunction(descriptor=f"pull[{t.descriptor}]",
                                          mean=t.mean, tag=t.tag,
                                          quadform=t.quadform.compose_affine(phi)))
            elif t.fn is not None:
                fn = t.fn
                tests.append(TestFunction(descriptor=f"pull[{t.descriptor}]",
                                          mean=t.mean, tag=t.tag,
                                          fn=lambda v, _f=fn: _f(phi(v))))
            else:
                raise TypeError("affine pullback needs quadform/fn tests")
        if crit.excluded.kind == "none":
            excl = ExcludedSet.none()
        else:
            base = crit.excluded
            excl = ExcludedSet(f"pull[{base.descriptor}]", "custom",
                               predicate=lambda v: base.contains(phi(v)))
        return TypicalityCriterion(tuple(tests), crit.epsilon, excl)

    raise TypeError(f"unsupported map kind {type(phi).__name__}")


# --------------------------------------------------------------------------
# log-exponential check
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class LogExponentialResult:
    finite: bool
    estimate: float | None
    analytic_delta_bound: float | None = None


def analytic_log_exp_delta_bound(tag: Tag, kernel: AffineGaussianKernel) -> float:
    """Sufficient delta for a quadratic test against an affine-Gaussian
    kernel: delta < 1 / (2 M c_B) with c_B = 2 ln2 |B|_2^2 and B the noise
    factor, so that the inner integral of 2^(delta |g|) stays finite."""
    if tag.kind not in ("bounded", "quadratic") or tag.bound is None:
        raise ValueError("analytic bound needs a bounded/quadratic tag")
    if tag.kind == "bounded" or tag.bound == 0.0:
        return float("inf")
    bnorm = float(np.linalg.norm(kernel.noise.factor, 2))
    if bnorm == 0.0:
        return float("inf")
    c_b = 2.0 * LN2 * bnorm ** 2
    return 1.0 / (2.0 * tag.bound * c_b)


def is_log_exponential(g: TestFunction, mu: Measure, kappa: Kernel,
                       delta: float, outer_samples: int = 10_000,
                       inner_samples: int = 1_000,
                       rng=None) -> LogExponentialResult:
    """Monte Carlo check of int log2[ int 2^(delta |g|) dkappa(.|x) ] dmu(x).

    Divergent inner integrals are reported with finite=False rather than
    raised; bounded tests short-circuit to the uniform bound delta * M.
    """
    from .sampling import RngStream, sample_iid, sample_conditional

    if delta <= 0:
        raise ValueError("delta must be positive")
    if g.tag.kind == "bounded" and g.tag.bound is not None:
        return LogExponentialResult(True, delta * g.tag.bound)
    if rng is None:
        rng = RngStream(0, 0)
    gen = rng.generator()
    xs = sample_iid(mu, outer_samples, rng)
    analytic = None
    if isinstance(kappa, AffineGaussianKernel) and g.tag.kind in ("bounded", "quadratic"):
        analytic = analytic_log_exp_delta_bound(g.tag, kappa)
    # inner: for each x draw ys and average 2^(delta |g|) in log space
    ys = sample_conditional(kappa, xs, rng, n_draws=inner_samples)
    if isinstance(mu, FiniteMeasure):
        pairs = pair_index(np.repeat(xs[:, None], inner_samples, axis=1), ys,
                           kappa.out_size)
        vals = g(pairs)
    else:
        xs3 = np.repeat(xs[:, None, :], inner_samples, axis=1)
        vals = g(np.concatenate([xs3, ys], axis=-1))
    exponents = delta * np.abs(vals)  # bits
    peak = exponents.max(axis=1)
    inner_log2 = peak + np.log2(np.mean(np.exp2(exponents - peak[:, None]), axis=1))
    estimate = float(np.mean(inner_log2))
    # heuristic divergence detection: a single sample dominating the inner
    # sum, or an absurd magnitude, marks the integral as unbounded
    dominance = np.exp2(peak - inner_log2 - np.log2(inner_samples))
    unbounded = bool(np.any(inner_log2 > 300.0) or np.mean(dominance > 0.99) > 0.05)
    return LogExponentialResult(not unbounded, estimate, analytic)


# --------------------------------------------------------------------------
# truncation machinery for the conditional-typicality constructions
# --------------------------------------------------------------------------
def truncate_test(g: TestFunction, k: float) -> TestFunction:
    """g_k = g 1{|g| <= k}."""
    if g.table is not None:
        tbl = np.where(np.abs(g.table) <= k, g.table, 0.0)
        return TestFunction(descriptor=f"trunc[{k},{g.descriptor}]",
                            mean=g.mean, tag=Tag.bounded(float(k)), table=tbl)

    def fn(v, _g=g, _k=k):
        vals = _g(v)
        return np.where(np.abs(vals) <= _k, vals, 0.0)

    return TestFunction(descriptor=f"trunc[{k},{g.descriptor}]", mean=g.mean,
                        tag=Tag.bounded(float(k)), fn=fn)
