"""MCAR test statistics, limit-law calibration and simultaneous bands.

Three statistics compare the two groups of a partition:

* ``stat_l2``  -- n times the squared L2 distance of the group means,
* ``stat_sup`` -- sqrt(n) times the sup distance of the group means,
* ``stat_cvm`` -- n times a Cramer-von Mises distance of the group cdfs,
  integrated over time and over a Gaussian weight measure on levels.

Under MCAR the first and third converge to weighted chi-square laws and the
second to the sup of a Gaussian process; ``run_test`` approximates these
laws from the estimated covariance spectra (or by the group-wise bootstrap)
and reports Monte Carlo p-values.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from . import bootstrap as boot
from .estimators import (
    NuMeasure,
    Restricted,
    RhoMatrix,
    _ecdf,
    _group_mean,
    _kernel,
    _rho,
    cvm_functional,
    draw_mc_points,
    estimate_nu,
    l2_functional,
    restrict,
    sup_functional,
)
from .partition import GroupLabels, require_assumption
from .results import ConfidenceBand, Method, TestResult, band_quantile, pvalue
from .rng import Stream, as_stream, standard_normal_blocks
from .sample import FunctionalSample, SubdomainIndex, restrict_domain
from .spectral import EigenSystem, eigensystem, operator_scale, sym_eig, truncate_fve

STATISTICS = ("l2", "sup", "cvm")


def stat_l2(sample, labels, subdomain) -> float:
    require_assumption(sample, labels, subdomain)
    r = restrict(sample, labels, subdomain)
    d = _group_mean(r, "A").mu - _group_mean(r, "B").mu
    return float(l2_functional(d, r.n, r.spacing))


def stat_sup(sample, labels, subdomain) -> float:
    require_assumption(sample, labels, subdomain)
    r = restrict(sample, labels, subdomain)
    d = _group_mean(r, "A").mu - _group_mean(r, "B").mu
    return float(sup_functional(d, r.n))


def draw_levels(nu: NuMeasure, m_z: int, rng) -> np.ndarray:
    """``m_z`` levels from nu on the ``nu-draws`` substream."""
    if m_z < 1:
        raise ValueError("m_z must be at least 1")
    rng = as_stream(rng)
    gen = rng.child("nu-draws").generator() if isinstance(rng, Stream) else rng
    return nu.draw(gen, m_z)


def _cvm_from_restricted(r: Restricted, z: np.ndarray) -> float:
    d = _ecdf(r, "A", z) - _ecdf(r, "B", z)
    return float(cvm_functional(d, r.n, r.spacing))


def stat_cvm(sample, labels, subdomain, nu: NuMeasure | None = None, m_z: int = 100, rng=None, z=None) -> float:
    """Cramer-von Mises distance of the group cdfs.

    The level integral is a Monte Carlo average over ``z`` (pinned) or over
    ``m_z`` draws from ``nu``.
    """
    require_assumption(sample, labels, subdomain)
    if z is None:
        if nu is None:
            nu = estimate_nu(sample, subdomain)
        z = draw_levels(nu, m_z, rng)
    return _cvm_from_restricted(restrict(sample, labels, subdomain), np.asarray(z, dtype=float))


def sample_limit_l2(eigs: EigenSystem, q: int, bstar: int, rng) -> np.ndarray:
    """Draws of ``sum_{j<=q} lambda_j Z_j^2``."""
    lam = _leading(eigs, q)
    z = standard_normal_blocks(as_stream(rng), (q,), bstar)
    return (z**2) @ lam


def sample_limit_sup(eigs: EigenSystem, q: int, bstar: int, rng) -> np.ndarray:
    """Draws of ``max_t |sum_{j<=q} Z_j sqrt(lambda_j) phi_j(t)|``."""
    lam = _leading(eigs, q)
    loadings = (np.sqrt(lam)[:, None] * eigs.eigenfunctions[:, :q].T)  # (q, m)
    z = standard_normal_blocks(as_stream(rng), (q,), bstar)
    return np.abs(z @ loadings).max(axis=1)


def cvm_eigensystem(rho: RhoMatrix) -> EigenSystem:
    """Operator eigenpairs of the indicator covariance: weight |I| / K per point."""
    return operator_scale(sym_eig(rho.rho), rho.domain_length / rho.K)


def sample_limit_cvm(rho: RhoMatrix | EigenSystem, q: int, bstar: int, rng) -> np.ndarray:
    """Draws of ``sum_{j<=q} kappa_j Z_j^2``."""
    eigs = rho if isinstance(rho, EigenSystem) else cvm_eigensystem(rho)
    return sample_limit_l2(eigs, q, bstar, rng)


def _leading(eigs: EigenSystem, q: int) -> np.ndarray:
    if not 1 <= q <= eigs.eigenvalues.size:
        raise ValueError(f"q={q} outside 1..{eigs.eigenvalues.size}")
    return eigs.clipped()[:q]


@dataclass
class TestConfig:
    """Knobs of ``run_test``. ``bstar`` applies to both calibrations."""

    calibration: str = "asymptotic"
    bstar: int = 10_000
    fve: float = 0.99
    q_max: int = 50
    seed: int = 0
    threshold: float = 0.1
    m_z: int = 100
    K: int = 200
    max_redraws: int | None = None

    __test__ = False

    def __post_init__(self):
        if self.calibration not in ("asymptotic", "bootstrap"):
            raise ValueError("calibration must be 'asymptotic' or 'bootstrap'")
        if self.bstar < 1:
            raise ValueError("bstar must be at least 1")

    def as_dict(self) -> dict:
        return asdict(self)


class Analysis:
    """Shared, lazily computed pieces of one data set's MCAR analysis.

    Building it restricts the domain (unless ``subdomain`` is given) and
    checks the two-group positivity requirement; later attributes reuse
    the same estimates and random streams.
    """

    def __init__(self, sample: FunctionalSample, labels: GroupLabels, config: TestConfig | None = None, subdomain: SubdomainIndex | None = None):
        self.sample = sample
        self.labels = labels
        self.config = config or TestConfig()
        self.subdomain = subdomain if subdomain is not None else restrict_domain(sample, labels, self.config.threshold)
        self.report = require_assumption(sample, labels, self.subdomain)
        self.r = restrict(sample, labels, self.subdomain)
        self.stream = Stream(int(self.config.seed))

    @property
    def n(self) -> int:
        return self.r.n

    @cached_property
    def diff(self) -> np.ndarray:
        return _group_mean(self.r, "A").mu - _group_mean(self.r, "B").mu

    @cached_property
    def kernel_eigs(self) -> EigenSystem:
        k = _kernel(self.r)
        return eigensystem(k.k, k.quadrature_weight)

    @cached_property
    def q_mean(self) -> int:
        return truncate_fve(self.kernel_eigs.eigenvalues, self.config.fve, self.config.q_max)

    @cached_property
    def nu(self) -> NuMeasure:
        return estimate_nu(self.sample, self.subdomain)

    @cached_property
    def levels(self) -> np.ndarray:
        return draw_levels(self.nu, self.config.m_z, self.stream)

    @cached_property
    def rho(self) -> RhoMatrix:
        t_pos, z = draw_mc_points(self.r.m, self.nu, self.config.K, self.stream.child("rho-points"))
        t_points = self.sample.grid.points[self.subdomain.kept][t_pos]
        return _rho(self.r, t_pos, z, self.subdomain.domain_length(self.sample.grid), t_points)

    @cached_property
    def cvm_eigs(self) -> EigenSystem:
        return cvm_eigensystem(self.rho)

    @cached_property
    def q_cvm(self) -> int:
        return truncate_fve(self.cvm_eigs.eigenvalues, self.config.fve, self.config.q_max)

    def statistic(self, kind: str) -> float:
        if kind == "l2":
            return float(l2_functional(self.diff, self.n, self.r.spacing))
        if kind == "sup":
            return float(sup_functional(self.diff, self.n))
        if kind == "cvm":
            return _cvm_from_restricted(self.r, self.levels)
        raise ValueError(f"unknown statistic {kind!r}")

    def limit_draws(self, kind: str) -> tuple[np.ndarray, int]:
        stream = self.stream.child("limit", kind)
        b = self.config.bstar
        if kind == "l2":
            return sample_limit_l2(self.kernel_eigs, self.q_mean, b, stream), self.q_mean
        if kind == "sup":
            return sample_limit_sup(self.kernel_eigs, self.q_mean, b, stream), self.q_mean
        if kind == "cvm":
            return sample_limit_cvm(self.cvm_eigs, self.q_cvm, b, stream), self.q_cvm
        raise ValueError(f"unknown statistic {kind!r}")

    @cached_property
    def _boot_config(self) -> boot.BootstrapConfig:
        return boot.BootstrapConfig(self.config.bstar, int(self.config.seed), self.config.max_redraws)

    @cached_property
    def _mean_replicates(self):
        kernel = boot.MeanReplicates(self.r)
        stats, redraws = boot.run_replicates(kernel, self.stream.child("bootstrap", "mean"), self.config.bstar, self._boot_config.redraw_cap)
        return stats, redraws

    def bootstrap_draws(self, kind: str) -> tuple[np.ndarray, int]:
        if kind in ("l2", "sup"):
            stats, redraws = self._mean_replicates
            return stats[:, 0 if kind == "l2" else 1], redraws
        if kind == "cvm":
            kernel = boot.DistReplicates(self.r, self.levels)
            stats, redraws = boot.run_replicates(kernel, self.stream.child("bootstrap", "dist"), self.config.bstar, self._boot_config.redraw_cap)
            return stats[:, 0], redraws
        raise ValueError(f"unknown statistic {kind!r}")

    def test(self, kind: str, calibration: str | None = None) -> TestResult:
        calibration = calibration or self.config.calibration
        stat = self.statistic(kind)
        meta = {
            "n": self.n,
            "n_A": self.labels.n_a,
            "n_B": self.labels.n_b,
            "subdomain_size": int(len(self.subdomain)),
        }
        if calibration == "asymptotic":
            draws, q = self.limit_draws(kind)
        else:
            draws, redraws = self.bootstrap_draws(kind)
            q = 0
            meta["redraws"] = redraws
        if kind == "cvm":
            meta.update(theta=self.nu.theta, tau2=self.nu.tau2, m_z=self.config.m_z)
            if calibration == "asymptotic":
                meta["K"] = self.config.K
        return TestResult(stat, pvalue(stat, draws), Method.of(kind, calibration), draws, q, int(self.config.seed), meta)

    def band(self, level: float = 0.95, calibration: str | None = None) -> ConfidenceBand:
        calibration = calibration or self.config.calibration
        if not 0 < level < 1:
            raise ValueError("level must lie in (0, 1)")
        if calibration == "asymptotic":
            draws, q = self.limit_draws("sup")
        else:
            draws, _ = self.bootstrap_draws("sup")
            q = 0
        quant = band_quantile(draws, 1 - level)
        return ConfidenceBand(
            center=self.diff,
            half_width=quant / np.sqrt(self.n),
            level=level,
            source=calibration,
            t=self.sample.grid.points[self.subdomain.kept],
            quantile=quant,
            n=self.n,
            q_used=q,
            metadata={"bstar": self.config.bstar, "seed": int(self.config.seed)},
        )


def confidence_band(sample, labels, subdomain, level: float = 0.95, bstar: int = 10_000, fve: float = 0.99, rng=0) -> ConfidenceBand:
    """Asymptotic simultaneous band for ``mu_A - mu_B``.

    ``rng`` is the integer seed; the band uses the same limit draws as the
    asymptotic sup test run with that seed.
    """
    config = TestConfig(bstar=bstar, fve=fve, seed=int(rng))
    return Analysis(sample, labels, config, subdomain).band(level, "asymptotic")


def run_test(sample, labels, config: TestConfig, method: str = "l2", subdomain=None) -> TestResult:
    """Restrict, validate, estimate, calibrate and return one test result."""
    if method not in STATISTICS:
        raise ValueError(f"method must be one of {STATISTICS}")
    return Analysis(sample, labels, config, subdomain).test(method)


def run_tests(sample, labels, config: TestConfig, methods=STATISTICS, subdomain=None, calibrations=None) -> dict[Method, TestResult]:
    """Several tests on one data set, sharing estimates and resamples."""
    analysis = Analysis(sample, labels, config, subdomain)
    calibrations = calibrations or (config.calibration,)
    out = {}
    for cal in calibrations:
        for kind in methods:
            res = analysis.test(kind, cal)
            out[res.method] = res
    return out
