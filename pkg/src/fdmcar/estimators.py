"""Available-case estimators on the testable subdomain.

All estimators normalise group sums by ``n * p_hat``, where ``p_hat`` is the
fraction of *all* n curves that belong to the group and are observed at the
column. Curves with no observation on the subdomain therefore still count
in ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError
from .partition import GroupLabels, _check_group
from .rng import Stream
from .sample import FunctionalSample, SubdomainIndex


@dataclass(frozen=True, eq=False)
class Restricted:
    """Sample restricted to the kept columns, missing cells zero-filled."""

    values: np.ndarray  # (n, m), 0 where unobserved
    raw: np.ndarray  # (n, m), NaN where unobserved
    mask: np.ndarray  # (n, m) float 0/1
    in_a: np.ndarray  # (n,) bool
    spacing: float

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def rows(self, group: str) -> np.ndarray:
        return self.in_a if group == "A" else ~self.in_a


def restrict(sample: FunctionalSample, labels: GroupLabels, subdomain: SubdomainIndex) -> Restricted:
    cols = subdomain.kept
    raw = sample.values[:, cols]
    mask = sample.mask[:, cols]
    return Restricted(
        values=np.where(mask, raw, 0.0),
        raw=raw,
        mask=mask.astype(float),
        in_a=np.asarray(labels.in_a, dtype=bool),
        spacing=sample.grid.spacing,
    )


def _p_hat(r: Restricted, group: str) -> np.ndarray:
    p = r.mask[r.rows(group)].sum(axis=0) / r.n
    if np.any(p == 0):
        j = int(np.flatnonzero(p == 0)[0])
        raise DegenerateError(f"group {group} has no observation at kept column position {j}")
    return p


@dataclass(frozen=True, eq=False)
class MeanEstimate:
    mu: np.ndarray
    p_hat: np.ndarray
    group: str


def _group_mean(r: Restricted, group: str) -> MeanEstimate:
    p = _p_hat(r, group)
    mu = r.values[r.rows(group)].sum(axis=0) / (r.n * p)
    return MeanEstimate(mu, p, group)


def group_mean(sample, labels, subdomain, group: str) -> MeanEstimate:
    """Available-case mean curve of ``group`` over the kept columns."""
    return _group_mean(restrict(sample, labels, subdomain), _check_group(group))


def mean_difference(sample, labels, subdomain) -> np.ndarray:
    r = restrict(sample, labels, subdomain)
    return _group_mean(r, "A").mu - _group_mean(r, "B").mu


@dataclass(frozen=True, eq=False)
class EcdfEstimate:
    F: np.ndarray  # (m, len(z_grid))
    z_grid: np.ndarray
    group: str


def _ecdf(r: Restricted, group: str, z: np.ndarray) -> np.ndarray:
    g = r.rows(group)
    p = _p_hat(r, group)
    with np.errstate(invalid="ignore"):
        below = r.raw[g][:, :, None] <= z[None, None, :]
    counts = np.count_nonzero(below & (r.mask[g][:, :, None] > 0), axis=0)
    return counts / (r.n * p)[:, None]


def ecdf_surface(sample, labels, subdomain, group: str, z_grid=None) -> EcdfEstimate:
    """Available-case cdf ``F(t, z)`` on kept columns times ``z_grid``.

    Without ``z_grid`` a 101-point grid spanning the observed range widened
    by a quarter of the pooled standard deviation is used.
    """
    _check_group(group)
    r = restrict(sample, labels, subdomain)
    if z_grid is None:
        z_grid = default_z_grid(sample, subdomain)
    z = np.asarray(z_grid, dtype=float)
    if z.ndim != 1 or z.size == 0 or np.any(np.diff(z) < 0):
        raise ValueError("z_grid must be a non-empty ascending vector")
    return EcdfEstimate(_ecdf(r, group, z), z, group)


def default_z_grid(sample, subdomain, size: int = 101) -> np.ndarray:
    tau = np.sqrt(estimate_nu(sample, subdomain).tau2)
    obs = sample.values[:, subdomain.kept][sample.mask[:, subdomain.kept]]
    return np.linspace(obs.min() - 0.25 * tau, obs.max() + 0.25 * tau, size)


def ecdf_at_points(r: Restricted, group: str, t_pos: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``F_group(t_k, z_k)`` for paired kept-column positions and levels."""
    g = r.rows(group)
    p = _p_hat(r, group)[t_pos]
    with np.errstate(invalid="ignore"):
        hit = (r.raw[g][:, t_pos] <= z[None, :]) & (r.mask[g][:, t_pos] > 0)
    return np.count_nonzero(hit, axis=0) / (r.n * p)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    k: np.ndarray
    quadrature_weight: float


def _group_scale(r: Restricted) -> tuple[np.ndarray, np.ndarray]:
    """Per-row group means and ``p_hat`` broadcast to (n, m)."""
    a, b = _group_mean(r, "A"), _group_mean(r, "B")
    sel = r.in_a[:, None]
    return np.where(sel, a.mu, b.mu), np.where(sel, a.p_hat, b.p_hat)


def _gram(w: np.ndarray, n: int) -> np.ndarray:
    k = (w.T @ w) / n
    return 0.5 * (k + k.T)


def covariance_kernel_hat(sample, labels, subdomain) -> KernelMatrix:
    """Covariance of ``sqrt(n) (mu_A - mu_B)`` on the kept columns.

    Residuals are taken from each curve's own group mean, so the estimate
    stays consistent when the groups differ in mean.
    """
    return _kernel(restrict(sample, labels, subdomain))


def _kernel(r: Restricted) -> KernelMatrix:
    mu, p = _group_scale(r)
    w = (r.values - mu) * r.mask / p
    return KernelMatrix(_gram(w, r.n), r.spacing)


@dataclass(frozen=True, eq=False)
class NuMeasure:
    """Gaussian weight measure N(theta, tau2) over the level axis."""

    theta: float
    tau2: float

    def __post_init__(self):
        if not self.tau2 > 0:
            raise DegenerateError(f"tau2 must be positive, got {self.tau2}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.theta + np.sqrt(self.tau2) * rng.standard_normal(size)


def estimate_nu(sample, subdomain) -> NuMeasure:
    """Location: average pooled mean over the subdomain. Scale: largest pooled variance."""
    cols = subdomain.kept
    mask = sample.mask[:, cols]
    x = np.where(mask, sample.values[:, cols], 0.0)
    counts = mask.sum(axis=0)
    if np.any(counts < 2):
        j = int(cols[np.flatnonzero(counts < 2)[0]])
        raise DegenerateError(f"column {j} has fewer than 2 pooled observations; variance undefined")
    means = x.sum(axis=0) / counts
    resid = np.where(mask, x - means, 0.0)
    variances = (resid**2).sum(axis=0) / (counts - 1)
    # sum(mean_j * spacing) / (m * spacing)
    theta = float(means.mean())
    tau2 = float(variances.max())
    if not tau2 > 0:
        raise DegenerateError("all pooled variances are zero on the subdomain")
    return NuMeasure(theta, tau2)


@dataclass(frozen=True, eq=False)
class RhoMatrix:
    rho: np.ndarray
    t_pos: np.ndarray  # positions into subdomain.kept
    t_points: np.ndarray
    z_points: np.ndarray
    domain_length: float

    @property
    def K(self) -> int:
        return self.rho.shape[0]


def draw_mc_points(m: int, nu: NuMeasure, K: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """``K`` points: kept-column positions uniformly with replacement, levels from nu."""
    if isinstance(rng, (int, np.integer)):
        rng = Stream(int(rng), ("rho-points",))
    gen = rng.generator() if isinstance(rng, Stream) else rng
    t_pos = gen.integers(0, m, size=K)
    z = nu.draw(gen, K)
    return t_pos, z


def rho_hat(sample, labels, subdomain, K: int = 200, rng=None, nu: NuMeasure | None = None, points=None) -> RhoMatrix:
    """Covariance of the centred indicator field at ``K`` Monte Carlo points.

    ``points`` = (t_pos, z) pins the Monte Carlo points; otherwise they are
    drawn from ``rng`` using ``nu`` (estimated from the sample if omitted).
    """
    r = restrict(sample, labels, subdomain)
    if points is None:
        if K < 2:
            raise ValueError("K must be at least 2")
        if nu is None:
            nu = estimate_nu(sample, subdomain)
        t_pos, z = draw_mc_points(r.m, nu, K, rng)
    else:
        t_pos, z = (np.asarray(a) for a in points)
        t_pos = t_pos.astype(int)
        z = z.astype(float)
        if t_pos.shape != z.shape or t_pos.size < 2:
            raise ValueError("pinned points must be two equal-length vectors with K >= 2")
    return _rho(r, t_pos, z, subdomain.domain_length(sample.grid), sample.grid.points[subdomain.kept][t_pos])


def _rho(r: Restricted, t_pos, z, domain_length, t_points) -> RhoMatrix:
    fa = ecdf_at_points(r, "A", t_pos, z)
    fb = ecdf_at_points(r, "B", t_pos, z)
    pa, pb = _p_hat(r, "A")[t_pos], _p_hat(r, "B")[t_pos]
    sel = r.in_a[:, None]
    with np.errstate(invalid="ignore"):
        ind = (r.raw[:, t_pos] <= z[None, :]).astype(float)
    obs = r.mask[:, t_pos]
    w = (ind - np.where(sel, fa, fb)) * obs / np.where(sel, pa, pb)
    return RhoMatrix(_gram(w, r.n), t_pos, t_points, z, domain_length)


def l2_functional(diff: np.ndarray, n: int, spacing: float) -> np.ndarray:
    """``n * sum_t diff(t)^2 * spacing`` along the last axis."""
    return n * np.sum(diff**2, axis=-1) * spacing


def sup_functional(diff: np.ndarray, n: int) -> np.ndarray:
    """``sqrt(n) * max_t |diff(t)|`` along the last axis."""
    return np.sqrt(n) * np.abs(diff).max(axis=-1)


def cvm_functional(diff: np.ndarray, n: int, spacing: float) -> np.ndarray:
    """``n / M * sum_z sum_t diff(t, z)^2 * spacing`` over the last two axes (t, z)."""
    return n * np.sum(diff**2, axis=(-2, -1)) * spacing / diff.shape[-1]
