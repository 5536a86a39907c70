"""Independent brute-force and high-precision references.

Everything here recomputes quantities the library also produces by fast
paths, but by structurally different means: raw enumeration, type-class
summation, contingency-table enumeration, tensor quadrature, and grid
search. Tests and the CLI's `verify` mode compare the two routes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .criteria import TypicalityCriterion
from .measures import (
    FiniteKernel,
    FiniteMeasure,
    GaussianMeasure,
    ReferenceMeasure,
)

ENUM_GUARD = 1 << 24
CODE_ENUM_GUARD = 1 << 20
CONTINGENCY_GUARD = 1 << 22


@dataclass(frozen=True)
class TypicalSetSize:
    count: float  # exact integer when computed exactly; float otherwise
    mu_mass: float
    nu_mass: float


def _crit_tables(crit: TypicalityCriterion, size: int):
    tables = []
    for t in crit.tests:
        if t.table is None:
            raise TypeError("exact enumeration needs table-backed tests")
        if t.table.shape[0] != size:
            raise ValueError("test table does not match the alphabet size")
        tables.append((t.table, t.mean))
    if crit.excluded.kind == "none":
        excl = np.zeros(size, dtype=bool)
    elif crit.excluded.table is not None:
        excl = crit.excluded.table
    else:
        raise TypeError("exact enumeration needs a table-backed excluded set")
    return tables, excl


def _reference_weights(nu, size: int) -> np.ndarray:
    if nu is None:
        return np.ones(size)
    if isinstance(nu, ReferenceMeasure):
        if nu.kind == "counting":
            return np.ones(size)
        if nu.kind == "probability" and isinstance(nu.measure, FiniteMeasure):
            return nu.measure.weights
        raise TypeError("unsupported reference for finite enumeration")
    if isinstance(nu, FiniteMeasure):
        return nu.weights
    raise TypeError("unsupported reference for finite enumeration")


def enumerate_typical(mu: FiniteMeasure, crit: TypicalityCriterion, n: int,
                      nu=None) -> TypicalSetSize:
    """Loop over all |X|^n sequences; exact count, mu^n mass and nu^n mass.

    Guarded at |X|^n <= 2^24.
    """
    k = mu.size
    total = k ** n
    if total > ENUM_GUARD:
        raise ValueError(f"|X|^n = {total} exceeds the enumeration guard")
    tables, excl = _crit_tables(crit, k)
    w = _reference_weights(nu, k)
    logp = np.where(mu.weights > 0, np.log(np.maximum(mu.weights, 1e-320)), -np.inf)
    logw = np.where(w > 0, np.log(np.maximum(w, 1e-320)), -np.inf)

    count = 0
    mu_mass = 0.0
    nu_mass = 0.0
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        seqs = np.empty((idx.size, n), dtype=np.intp)
        rem = idx
        for pos in range(n - 1, -1, -1):
            seqs[:, pos] = rem % k
            rem = rem // k
        ok = ~np.any(excl[seqs], axis=1)
        for tbl, mean in tables:
            ok &= np.abs(tbl[seqs].mean(axis=1) - mean) <= crit.epsilon
        if not np.any(ok):
            continue
        sel = seqs[ok]
        count += int(ok.sum())
        lp = logp[sel].sum(axis=1)
        lw = logw[sel].sum(axis=1)
        mu_mass += float(np.exp(lp[np.isfinite(lp)]).sum())
        nu_mass += float(np.exp(lw[np.isfinite(lw)]).sum())
    return TypicalSetSize(count, mu_mass, nu_mass)


def compositions(n: int, k: int) -> np.ndarray:
    """All length-k nonnegative integer vectors summing to n, shape (C, k)."""
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n + 1):
        rest = compositions(n - first, k - 1)
        head = np.full((rest.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack([head, rest]))
    return np.vstack(blocks)


def exact_typical_mass(mu: FiniteMeasure, crit: TypicalityCriterion, n: int,
                       nu=None, exact_count_limit: int = 200_000
                       ) -> TypicalSetSize:
    """Type-class summation: exact to float precision at any n where the
    composition count C(n+K-1, K-1) is tractable.

    Every table-backed criterion is a function of the empirical type, so
    the typical set is a union of type classes. Counts are exact integers
    (math.comb) when the number of types is small.
    """
    k = mu.size
    tables, excl = _crit_tables(crit, k)
    w = _reference_weights(nu, k)
    comps = compositions(n, k)
    ok = ~np.any(comps[:, excl] > 0, axis=1) if excl.any() else \
        np.ones(comps.shape[0], dtype=bool)
    for tbl, mean in tables:
        ok &= np.abs(comps @ tbl / n - mean) <= crit.epsilon
    comps = comps[ok]
    if comps.shape[0] == 0:
        return TypicalSetSize(0, 0.0, 0.0)
    log_multi = gammaln(n + 1) - gammaln(comps + 1).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.where(mu.weights > 0, np.log(np.maximum(mu.weights, 1e-320)),
                      -np.inf)
        lw = np.where(w > 0, np.log(np.maximum(w, 1e-320)), -np.inf)
        logmu = log_multi + np.where(comps > 0, comps * lp, 0.0).sum(axis=1)
        lognu = log_multi + np.where(comps > 0, comps * lw, 0.0).sum(axis=1)
    mu_mass = float(np.exp(logmu[np.isfinite(logmu)]).sum())
    nu_mass = float(np.exp(lognu[np.isfinite(lognu)]).sum())
    if comps.shape[0] <= exact_count_limit:
        count = 0
        for row in comps:
            c = 1
            rem = n
            for ci in row[:-1]:
                c *= math.comb(rem, int(ci))
                rem -= int(ci)
            count += c
        count = float(count) if count > 2**52 else count
    else:
        count = float(np.exp(log_multi).sum())
    return TypicalSetSize(count, mu_mass, nu_mass)


def conditional_pair_mass(y_type: np.ndarray, z_weights: np.ndarray,
                          crit: TypicalityCriterion, n: int) -> float:
    """Probability that z^n i.i.d. with pmf z_weights lands a pair sequence
    (y^n, z^n) in the typical set of `crit` (a criterion over the flattened
    pair alphabet), given y^n of empirical type y_type.

    Exact contingency-table enumeration; guarded by the product of per-row
    composition counts.
    """
    y_type = np.asarray(y_type, dtype=np.int64)
    ky = y_type.shape[0]
    kz = z_weights.shape[0]
    tables, excl = _crit_tables(crit, ky * kz)
    total_cells = 1
    for t in y_type:
        total_cells *= math.comb(int(t) + kz - 1, kz - 1)
        if total_cells > CONTINGENCY_GUARD:
            raise ValueError("contingency enumeration exceeds the guard")
    with np.errstate(divide="ignore"):
        logw = np.where(z_weights > 0, np.log(np.maximum(z_weights, 1e-320)),
                        -np.inf)

    # accumulate over rows: each row a contributes counts c[a, :] with
    # multinomial(t_a; c) weight and additive test contributions
    sums = np.zeros((1, len(tables)))
    logprob = np.zeros(1)
    excl_hit = np.zeros(1, dtype=bool)
    for a in range(ky):
        rows = compositions(int(y_type[a]), kz)  # (Ca, kz)
        row_log = (gammaln(y_type[a] + 1) - gammaln(rows + 1).sum(axis=1)
                   + np.where(rows > 0, rows * logw, 0.0).sum(axis=1))
        pair_ids = a * kz + np.arange(kz)
        row_sums = np.stack([rows @ tbl[pair_ids] for tbl, _ in tables], axis=1) \
            if tables else np.zeros((rows.shape[0], 0))
        row_excl = np.any(rows[:, excl[pair_ids]] > 0, axis=1) if excl[pair_ids].any() \
            else np.zeros(rows.shape[0], dtype=bool)
        finite = np.isfinite(row_log)
        rows_keep = np.flatnonzero(finite)
        sums = (sums[:, None, :] + row_sums[rows_keep][None, :, :]).reshape(
            -1, len(tables))
        logprob = (logprob[:, None] + row_log[rows_keep][None, :]).reshape(-1)
        excl_hit = (excl_hit[:, None] | row_excl[rows_keep][None, :]).reshape(-1)
    ok = ~excl_hit
    for j, (_, mean) in enumerate(tables):
        ok &= np.abs(sums[:, j] / n - mean) <= crit.epsilon
    if not np.any(ok):
        return 0.0
    return float(np.exp(logprob[ok]).sum())


def exact_code_error(code, channel: FiniteKernel) -> float:
    """Enumerate all |Y|^n channel outputs per message; exact average error.

    Guarded at |Y|^n <= 2^20.
    """
    ky = channel.out_size
    n = code.n
    total = ky ** n
    if total > CODE_ENUM_GUARD:
        raise ValueError(f"|Y|^n = {total} exceeds the enumeration guard")
    ys = np.empty((total, n), dtype=np.intp)
    rem = np.arange(total, dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        ys[:, pos] = rem % ky
        rem = rem // ky
    decoded = code.decode_batch(ys)
    with np.errstate(divide="ignore"):
        logrows = np.where(channel.rows > 0,
                           np.log(np.maximum(channel.rows, 1e-320)), -np.inf)
    pe = 0.0
    for m in range(code.message_count):
        lp = logrows[code.codebook[m][None, :], ys].sum(axis=1)
        bad = decoded != (m + 1)
        vals = lp[bad]
        pe += float(np.exp(vals[np.isfinite(vals)]).sum())
    return pe / code.message_count


def _gaussian_pdf_factory(g: GaussianMeasure):
    if g.rank < g.dim:
        raise ValueError("quadrature needs nonsingular Gaussians")
    prec = np.linalg.inv(g.cov)
    norm = 1.0 / np.sqrt(((2 * np.pi) ** g.dim) * np.linalg.det(g.cov))

    def pdf(v):
        d = v - g.mean
        return norm * np.exp(-0.5 * np.einsum("...i,ij,...j->...", d, prec, d))

    return pdf


def quadrature_divergence(ga: GaussianMeasure, gb: GaussianMeasure,
                          points: int = 1501, span: float = 10.0) -> float:
    """Tensor-grid quadrature of int p log2(p/q) for dims <= 2."""
    if ga.dim != gb.dim or ga.dim > 2:
        raise ValueError("quadrature supports matching dims <= 2")
    pa = _gaussian_pdf_factory(ga)
    pb = _gaussian_pdf_factory(gb)
    sa = np.sqrt(np.diag(ga.cov))
    lo = ga.mean - span * sa
    hi = ga.mean + span * sa
    axes = [np.linspace(lo[i], hi[i], points) for i in range(ga.dim)]
    if ga.dim == 1:
        v = axes[0][:, None]
        p = pa(v)
        q = pb(v)
        integrand = np.where(p > 0, p * (np.log2(np.maximum(p, 1e-320))
                                         - np.log2(np.maximum(q, 1e-320))), 0.0)
        return float(np.trapezoid(integrand, axes[0]))
    xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
    v = np.stack([xx, yy], axis=-1)
    p = pa(v)
    q = pb(v)
    integrand = np.where(p > 0, p * (np.log2(np.maximum(p, 1e-320))
                                     - np.log2(np.maximum(q, 1e-320))), 0.0)
    inner = np.trapezoid(integrand, axes[1], axis=1)
    return float(np.trapezoid(inner, axes[0]))


def grid_capacity_cost(kernel: FiniteKernel, cost, budget: float,
                       resolution: int = 200) -> float:
    """Two-stage simplex grid search for sup I(mu, kernel) s.t. cost <= B.

    Only for |X| <= 3; the independent check for the gradient optimizer.
    """
    from .measures import mutual_information

    kx = kernel.in_size
    if kx > 3:
        raise ValueError("grid search supports |X| <= 3")
    cost_vec = np.array([float(cost(x)) for x in range(kx)])

    def eval_batch(ps: np.ndarray) -> tuple[float, np.ndarray]:
        best, arg = -1.0, None
        rows = kernel.rows
        with np.errstate(divide="ignore", invalid="ignore"):
            for p in ps:
                if p @ cost_vec > budget:
                    continue
                q = p @ rows
                mask = rows > 0
                ratio = np.where(mask, rows / np.maximum(q, 1e-320), 1.0)
                val = float((p[:, None] * np.where(mask, rows * np.log2(ratio), 0.0)).sum())
                if val > best:
                    best, arg = val, p
        return best, arg

    def grid_around(center: np.ndarray, radius: float, steps: int) -> np.ndarray:
        if kx == 1:
            return np.array([[1.0]])
        axes = [np.linspace(max(0.0, center[i] - radius),
                            min(1.0, center[i] + radius), steps)
                for i in range(kx - 1)]
        mesh = np.meshgrid(*axes, indexing="ij")
        head = np.stack([m.reshape(-1) for m in mesh], axis=1)
        tail = 1.0 - head.sum(axis=1)
        ok = tail >= -1e-12
        ps = np.hstack([head[ok], np.clip(tail[ok], 0.0, 1.0)[:, None]])
        return ps / ps.sum(axis=1, keepdims=True)

    center = np.full(kx, 1.0 / kx)
    best, arg = eval_batch(grid_around(center, 1.0, resolution))
    if arg is None:
        return 0.0
    for radius, steps in ((0.05, 81), (0.005, 81)):
        b2, a2 = eval_batch(grid_around(arg, radius, steps))
        if b2 > best:
            best, arg = b2, a2
    return max(best, 0.0)


def grid_capacity_gaussian(noise_var: float, budget: float,
                           points: int = 201, span: float = 4.0) -> float:
    """Oracle for the scalar additive-Gaussian capacity: maximize the
    discretized mutual information over discretized Gaussian input scales.

    The optimum input is N(0, B); scanning input variances through the
    discretized channel cross-checks the closed form 0.5 log2(1 + B/var).
    """
    best = 0.0
    for v in np.linspace(0.05 * budget, budget, 40):
        xs = np.linspace(-span * np.sqrt(v), span * np.sqrt(v), points)
        px = np.exp(-0.5 * xs ** 2 / v)
        px /= px.sum()
        width = np.sqrt(v + noise_var)
        ys = np.linspace(-span * width * 1.5, span * width * 1.5, 3 * points)
        rows = np.exp(-0.5 * (ys[None, :] - xs[:, None]) ** 2 / noise_var)
        rows /= rows.sum(axis=1, keepdims=True)
        q = px @ rows
        mask = rows > 0
        val = float((px[:, None] * np.where(
            mask, rows * np.log2(np.maximum(rows, 1e-320) /
                                 np.maximum(q[None, :], 1e-320)), 0.0)).sum())
        best = max(best, val)
    return best


def blahut_arimoto_point(dist_mat: np.ndarray, px: np.ndarray, beta: float,
                         max_iters: int = 10_000, tol: float = 1e-12
                         ) -> tuple[float, float]:
    """One point of the rate-distortion curve at Lagrange slope beta.

    Returns (rate_bits, distortion). Raises after max_iters without
    convergence.
    """
    kx, ky = dist_mat.shape
    q = np.full(ky, 1.0 / ky)
    expo = np.exp(-beta * dist_mat)
    last = np.inf
    for it in range(max_iters):
        cond = expo * q[None, :]
        denom = cond.sum(axis=1, keepdims=True)
        cond /= denom
        q = px @ cond
        d = float((px[:, None] * cond * dist_mat).sum())
        if abs(d - last) < tol:
            break
        last = d
    else:
        raise RuntimeError("Blahut-Arimoto failed to converge")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cond > 0, cond / np.maximum(q[None, :], 1e-320), 1.0)
        rate = float((px[:, None] * np.where(cond > 0, cond * np.log2(ratio), 0.0)).sum())
    return max(rate, 0.0), d


def blahut_arimoto_rd(dist_mat: np.ndarray, px: np.ndarray, target_d: float,
                      max_iters: int = 10_000, bracket_tol: float = 1e-9
                      ) -> float:
    """R(D) by bisection on the Lagrange slope; upper-biased by at most the
    bracket tolerance."""
    d_min = float((px * dist_mat.min(axis=1)).sum())
    d_max = float((px @ dist_mat).min())
    if target_d >= d_max:
        return 0.0
    if target_d < d_min:
        return float("inf")
    lo, hi = 0.0, 4.0
    while blahut_arimoto_point(dist_mat, px, hi, max_iters)[1] > target_d:
        hi *= 2.0
        if hi > 1e8:
            raise RuntimeError("bisection bracket blew up")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _, d = blahut_arimoto_point(dist_mat, px, mid, max_iters)
        if d > target_d:
            lo = mid
        else:
            hi = mid
        if hi - lo < bracket_tol:
            break
    rate, d = blahut_arimoto_point(dist_mat, px, hi, max_iters)
    return rate


def gaussian_rd_grid(var: float, target_d: float, points: int = 401,
                     span: float = 5.0) -> float:
    """Oracle for the Gaussian squared-error rate-distortion function via
    Blahut-Arimoto on a uniform grid over [mean +- span*sigma]."""
    sd = np.sqrt(var)
    xs = np.linspace(-span * sd, span * sd, points)
    px = np.exp(-0.5 * xs ** 2 / var)
    px /= px.sum()
    dist = (xs[:, None] - xs[None, :]) ** 2
    return blahut_arimoto_rd(dist, px, target_d)


def hp_finite_divergence(p, w, dps: int = 50) -> float:
    """High-precision D(p||w) in bits via mpmath."""
    import mpmath

    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        for pi, wi in zip(p, w):
            if pi > 0:
                total += mpmath.mpf(repr(float(pi))) * (
                    mpmath.log(mpmath.mpf(repr(float(pi))), 2)
                    - mpmath.log(mpmath.mpf(repr(float(wi))), 2))
        return float(total)
