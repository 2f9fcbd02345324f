"""Group-wise bootstrap calibration.

Resamples are drawn with replacement inside each group, keeping group sizes
``n_A`` and ``n_B`` fixed. A resample is represented by its multiplicity
counts, so replicate statistics reduce to matrix products with the
original (restricted) data. Replicates are generated in fixed blocks from
counter-based substreams; a replicate that leaves a kept column without
observations in one group is redrawn from its own substream.

For the mean tests the curves are first centred at their group mean on the
observed cells. For the distribution test curves are left as they are and
each replicate is centred at the original cdf estimates instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError
from .estimators import (
    Restricted,
    _group_mean,
    cvm_functional,
    l2_functional,
    restrict,
    sup_functional,
)
from .partition import require_assumption
from .results import ConfidenceBand, Method, TestResult, band_quantile, pvalue
from .rng import Stream, as_stream

BOOT_BLOCK = 256


@dataclass(frozen=True)
class BootstrapConfig:
    bstar: int = 10_000
    seed: int = 0
    max_redraws: int | None = None

    def __post_init__(self):
        if self.bstar < 1:
            raise ValueError("bstar must be at least 1")
        if self.max_redraws is not None and self.max_redraws < 0:
            raise ValueError("max_redraws must be non-negative")

    @property
    def redraw_cap(self) -> int:
        return 100 * self.bstar if self.max_redraws is None else self.max_redraws


def resample_counts(idx: np.ndarray, size: int, dtype=float) -> np.ndarray:
    """Multiplicity matrix (B, size) from resample positions (B, size)."""
    idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
    b = idx.shape[0]
    flat = (idx + size * np.arange(b)[:, None]).ravel()
    return np.bincount(flat, minlength=b * size).reshape(b, size).astype(dtype)


class MeanReplicates:
    """L2 and sup statistics of group-mean-centred resamples."""

    width = 2

    def __init__(self, r: Restricted):
        ma, mb = _group_mean(r, "A"), _group_mean(r, "B")
        a, b = r.in_a, ~r.in_a
        self.xa = (r.values[a] - ma.mu) * r.mask[a]
        self.xb = (r.values[b] - mb.mu) * r.mask[b]
        self.oa, self.ob = r.mask[a], r.mask[b]
        self.n_a, self.n_b = self.xa.shape[0], self.xb.shape[0]
        self.n, self.spacing = r.n, r.spacing
        self.keys = _group_keys(r)

    def __call__(self, idx_a, idx_b):
        ca = resample_counts(idx_a, self.n_a)
        cb = resample_counts(idx_b, self.n_b)
        na, nb = ca @ self.oa, cb @ self.ob
        ok = (na > 0).all(axis=1) & (nb > 0).all(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            d = (ca @ self.xa) / na - (cb @ self.xb) / nb
        stats = np.column_stack([l2_functional(d, self.n, self.spacing), sup_functional(d, self.n)])
        return stats, ok


class DistReplicates:
    """Centred Cramer-von Mises statistics of uncentred resamples.

    Indicators and multiplicities are small integers, so the float32
    products below are exact.
    """

    width = 1

    def __init__(self, r: Restricted, z: np.ndarray):
        z = np.asarray(z, dtype=float)
        self.m, self.mz = r.m, z.size
        self.n, self.spacing = r.n, r.spacing
        parts = {}
        for g in ("A", "B"):
            rows = r.rows(g)
            with np.errstate(invalid="ignore"):
                ind = (r.raw[rows][:, :, None] <= z[None, None, :]) & (r.mask[rows][:, :, None] > 0)
            ind = ind.reshape(ind.shape[0], -1).astype(np.float32)
            obs = r.mask[rows].astype(np.float32)
            f = ind.sum(axis=0, dtype=np.float64).reshape(self.m, self.mz) / obs.sum(axis=0, dtype=np.float64)[:, None]
            parts[g] = (ind, obs, f)
        self.ind_a, self.obs_a, self.f_a = parts["A"]
        self.ind_b, self.obs_b, self.f_b = parts["B"]
        self.n_a, self.n_b = self.ind_a.shape[0], self.ind_b.shape[0]
        self.keys = _group_keys(r)

    def _cdf(self, counts, ind, obs):
        cnt = (counts @ ind).astype(np.float64).reshape(-1, self.m, self.mz)
        num = (counts @ obs).astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            return cnt / num[:, :, None], (num > 0).all(axis=1)

    def __call__(self, idx_a, idx_b):
        fa, ok_a = self._cdf(resample_counts(idx_a, self.n_a, np.float32), self.ind_a, self.obs_a)
        fb, ok_b = self._cdf(resample_counts(idx_b, self.n_b, np.float32), self.ind_b, self.obs_b)
        d = (fa - self.f_a) - (fb - self.f_b)
        return cvm_functional(d, self.n, self.spacing)[:, None], ok_a & ok_b


def _group_keys(r: Restricted) -> tuple[int, int]:
    """Stream keys for the two groups: the first row index of each.

    Keying by rows rather than by label makes the resamples, and hence all
    bootstrap p-values, invariant under swapping A and B.
    """
    return int(np.flatnonzero(r.in_a)[0]), int(np.flatnonzero(~r.in_a)[0])


def run_replicates(kernel, stream: Stream, bstar: int, redraw_cap: int) -> tuple[np.ndarray, int]:
    """Evaluate ``bstar`` replicates; returns (stats of shape (bstar, width), redraws used)."""
    out = np.empty((bstar, kernel.width))
    key_a, key_b = kernel.keys
    redraws = 0
    for blk, start in enumerate(range(0, bstar, BOOT_BLOCK)):
        size = min(BOOT_BLOCK, bstar - start)
        ia = stream.child(blk, key_a).generator().integers(0, kernel.n_a, size=(size, kernel.n_a))
        ib = stream.child(blk, key_b).generator().integers(0, kernel.n_b, size=(size, kernel.n_b))
        stats, ok = kernel(ia, ib)
        for j in np.flatnonzero(~ok):
            b = start + j
            attempt = 0
            while True:
                if redraws >= redraw_cap:
                    raise DegenerateError(
                        f"bootstrap replicate {b} kept producing columns without observations; "
                        f"gave up after {redraws} redraws"
                    )
                redraws += 1
                ga = stream.child("redraw", b, attempt, key_a).generator()
                gb = stream.child("redraw", b, attempt, key_b).generator()
                attempt += 1
                s1, ok1 = kernel(ga.integers(0, kernel.n_a, size=(1, kernel.n_a)), gb.integers(0, kernel.n_b, size=(1, kernel.n_b)))
                if ok1[0]:
                    stats[j] = s1[0]
                    break
        out[start:start + size] = stats
    return out, redraws


def _prepare(sample, labels, subdomain):
    require_assumption(sample, labels, subdomain)
    return restrict(sample, labels, subdomain)


def _stream(config: BootstrapConfig, *key) -> Stream:
    return as_stream(config.seed).child("bootstrap", *key)


def mean_replicate_draws(sample, labels, subdomain, config: BootstrapConfig) -> tuple[np.ndarray, np.ndarray, int]:
    """Replicate L2 and sup statistics sharing one set of resamples."""
    kernel = MeanReplicates(_prepare(sample, labels, subdomain))
    stats, redraws = run_replicates(kernel, _stream(config, "mean"), config.bstar, config.redraw_cap)
    return stats[:, 0], stats[:, 1], redraws


def bootstrap_mean_test(sample, labels, subdomain, statistic_kind: str, config: BootstrapConfig) -> TestResult:
    """Bootstrap calibration of the L2 (``"l2"``) or sup (``"sup"``) mean test."""
    if statistic_kind not in ("l2", "sup"):
        raise ValueError("statistic_kind must be 'l2' or 'sup'")
    r = _prepare(sample, labels, subdomain)
    d = _group_mean(r, "A").mu - _group_mean(r, "B").mu
    observed = l2_functional(d, r.n, r.spacing) if statistic_kind == "l2" else sup_functional(d, r.n)
    l2, sup, redraws = mean_replicate_draws(sample, labels, subdomain, config)
    draws = l2 if statistic_kind == "l2" else sup
    return TestResult(
        float(observed),
        pvalue(observed, draws),
        Method.of(statistic_kind, "bootstrap"),
        draws,
        0,
        config.seed,
        {"redraws": redraws},
    )


def bootstrap_dist_test(sample, labels, subdomain, nu, config: BootstrapConfig, z=None, m_z: int = 100) -> TestResult:
    """Bootstrap calibration of the Cramer-von Mises distribution test.

    ``z`` are the levels shared by the observed statistic and every
    replicate; without them ``m_z`` levels are drawn from ``nu`` on the
    ``nu-draws`` stream of the configured seed.
    """
    from .mcar import _cvm_from_restricted, draw_levels

    r = _prepare(sample, labels, subdomain)
    if z is None:
        z = draw_levels(nu, m_z, as_stream(config.seed))
    z = np.asarray(z, dtype=float)
    observed = _cvm_from_restricted(r, z)
    kernel = DistReplicates(r, z)
    stats, redraws = run_replicates(kernel, _stream(config, "dist"), config.bstar, config.redraw_cap)
    draws = stats[:, 0]
    return TestResult(
        float(observed),
        pvalue(observed, draws),
        Method.CVM_BOOTSTRAP,
        draws,
        0,
        config.seed,
        {"redraws": redraws, "m_z": int(z.size)},
    )


def bootstrap_band(sample, labels, subdomain, level: float, config: BootstrapConfig) -> ConfidenceBand:
    """Simultaneous band from bootstrap replicates of the sup statistic."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    r = _prepare(sample, labels, subdomain)
    center = _group_mean(r, "A").mu - _group_mean(r, "B").mu
    _, sup, redraws = mean_replicate_draws(sample, labels, subdomain, config)
    q = band_quantile(sup, 1 - level)
    return ConfidenceBand(
        center=center,
        half_width=q / np.sqrt(r.n),
        level=level,
        source="bootstrap",
        t=sample.grid.points[subdomain.kept],
        quantile=q,
        n=r.n,
        metadata={"bstar": config.bstar, "seed": config.seed, "redraws": redraws},
    )
