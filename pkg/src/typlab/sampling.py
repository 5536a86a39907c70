"""Deterministic, seedable sequence sampling.

An RngStream is a value: the same (seed, stream_id) always produces the
same draws, and distinct stream ids give statistically independent
streams (numpy SeedSequence contract). Experiments derive one stream per
(experiment, n, trial-block) via `derive`, so parallel cells never share
generator state.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .criteria import TypicalityCriterion, is_typical_batch
from .measures import (
    AffineGaussianKernel,
    FiniteKernel,
    FiniteMeasure,
    GaussianMeasure,
    Kernel,
    Measure,
    pair_index,
)


def stable_hash64(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """Value-type PRNG handle; generator() returns a fresh generator each
    call, so re-sampling from the same stream is bit-reproducible."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def derive(self, *key) -> "RngStream":
        return RngStream(self.seed, stable_hash64(self.stream_id, *key))


def sample_iid(mu: Measure, n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. symbols from mu: (n,) ints (finite, inverse-CDF) or
    (n, d) floats (Gaussian, standardize + standard-normal draws)."""
    gen = rng.generator()
    if isinstance(mu, FiniteMeasure):
        cdf = np.cumsum(mu.weights)
        cdf = cdf / cdf[-1]
        return np.searchsorted(cdf, gen.random(n), side="right").astype(np.intp)
    assert isinstance(mu, GaussianMeasure)
    z = gen.standard_normal((n, mu.rank))
    return z @ mu.factor.T + mu.mean


def sample_iid_batch(mu: Measure, shape: tuple[int, ...],
                     rng: RngStream) -> np.ndarray:
    """Like sample_iid but for an arbitrary leading shape: finite gives
    shape ints, Gaussian gives shape + (d,) floats."""
    gen = rng.generator()
    if isinstance(mu, FiniteMeasure):
        cdf = np.cumsum(mu.weights)
        cdf = cdf / cdf[-1]
        return np.searchsorted(cdf, gen.random(shape),
                               side="right").astype(np.intp)
    assert isinstance(mu, GaussianMeasure)
    z = gen.standard_normal(shape + (mu.rank,))
    return z @ mu.factor.T + mu.mean


def sample_conditional(kappa: Kernel, x_seq: np.ndarray, rng: RngStream,
                       n_draws: int | None = None) -> np.ndarray:
    """Componentwise conditional draws y_i ~ kappa(x_i).

    With n_draws, each x_i gets n_draws independent draws (used by nested
    Monte Carlo): finite output shape (n, n_draws), Gaussian
    (n, n_draws, d2).
    """
    gen = rng.generator()
    if isinstance(kappa, FiniteKernel):
        x = np.asarray(x_seq, dtype=np.intp)
        cdf = np.cumsum(kappa.rows, axis=1)
        cdf = cdf / cdf[:, -1:]
        shape = x.shape if n_draws is None else x.shape + (n_draws,)
        u = gen.random(shape)
        rows = cdf[x]
        if n_draws is None:
            picked = (u[..., None] > rows).sum(axis=-1)
        else:
            picked = (u[..., None] > rows[..., None, :]).sum(axis=-1)
        return picked.astype(np.intp)
    assert isinstance(kappa, AffineGaussianKernel)
    x = np.asarray(x_seq, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    mean = x @ kappa.A.T + kappa.b
    noise = kappa.noise
    if n_draws is None:
        z = gen.standard_normal(x.shape[:-1] + (noise.rank,))
        return z @ noise.factor.T + mean
    z = gen.standard_normal(x.shape[:-1] + (n_draws, noise.rank))
    return z @ noise.factor.T + mean[..., None, :]


@dataclass(frozen=True)
class ConditionalTypicalDraw:
    """Result of rejection-sampling the conditioned kernel."""

    y_seq: np.ndarray | None
    attempts: int
    accepted: bool

    def epsilon_n(self, n: int) -> float:
        """Markov-lemma domination exponent -log2(acceptance)/n implied by
        the measured acceptance rate of this draw."""
        if not self.accepted:
            return float("inf")
        return float(np.log2(self.attempts)) / n


def sample_conditional_typical(kappa: Kernel, x_seq: np.ndarray,
                               crit: TypicalityCriterion, rng: RngStream,
                               max_attempts: int = 1_000_000
                               ) -> ConditionalTypicalDraw:
    """Draw y^n from kappa^n(.|x^n) conditioned on (x^n, y^n) being
    jointly typical, by rejection.

    The accepted draw is exactly distributed as the conditioned and
    renormalized kernel, which dominates kappa^n by 1/acceptance; callers
    convert the measured acceptance into the Markov-lemma 2^(eps n)
    certificate. Returns accepted=False after max_attempts rejections.
    """
    finite = isinstance(kappa, FiniteKernel)
    x = np.asarray(x_seq)
    n = x.shape[0]
    batch = max(1, min(4096, max_attempts))
    attempts = 0
    trial = 0
    while attempts < max_attempts:
        m = min(batch, max_attempts - attempts)
        sub = rng.derive("cond-typ", trial)
        ys = sample_conditional(kappa, x, sub, n_draws=m)
        if finite:
            ys = np.moveaxis(ys, -1, 0)  # (m, n)
            pairs = pair_index(np.broadcast_to(x, ys.shape), ys, kappa.out_size)
            ok = is_typical_batch(pairs, crit, finite=True)
        else:
            ys = np.moveaxis(ys, -2, 0)  # (m, n, d2)
            x3 = np.broadcast_to(x if x.ndim == 2 else x[:, None],
                                 (m,) + (n, kappa.in_dim))
            ok = is_typical_batch(np.concatenate([x3, ys], axis=-1), crit,
                                  finite=False)
        hits = np.flatnonzero(ok)
        if hits.size:
            attempts += int(hits[0]) + 1
            return ConditionalTypicalDraw(ys[hits[0]], attempts, True)
        attempts += m
        trial += 1
    return ConditionalTypicalDraw(None, attempts, False)
