"""Brownian-motion simulation studies.

Case 1 draws observation sets independently of the paths (MCAR holds):
each curve is complete with probability 1/2 and otherwise observed on
``[L, U)`` with ``L, U`` the order statistics of two uniforms. Case 2
observes a path only while it stays inside ``(a, b)`` (MCAR fails).

Every replicate ``r`` draws its data from the substream ``("data", r)``
and seeds its tests with ``("tests", r)``, so results do not depend on how
replicates are spread over workers. In the power study the same paths are
reused for every censoring level.
"""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .errors import FdmcarError
from .mcar import STATISTICS, Analysis, TestConfig
from .partition import partition_complete
from .results import Method
from .rng import Stream, as_stream
from .sample import FunctionalSample, Grid


def _generator(rng) -> np.random.Generator:
    rng = as_stream(rng)
    return rng.generator() if isinstance(rng, Stream) else rng


def brownian_sample(n: int, p: int = 100, rng=0) -> FunctionalSample:
    """``n`` standard Brownian paths at ``t_j = j/p``, fully observed."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    gen = _generator(rng)
    paths = np.cumsum(gen.standard_normal((n, p)) * np.sqrt(1.0 / p), axis=1)
    return FunctionalSample(Grid.equispaced(p), paths, np.ones((n, p), dtype=bool))


def mcar_interval_mask(n: int, p: int = 100, rng=0) -> np.ndarray:
    """Case 1 observation sets, independent of any data.

    Draw order: n Bernoulli(1/2) completeness flags, then an (n, 2) block of
    uniforms (drawn for every curve, used only by incomplete ones).
    """
    gen = _generator(rng)
    complete = gen.random(n) < 0.5
    u = gen.random((n, 2))
    lo, hi = u.min(axis=1), u.max(axis=1)
    t = Grid.equispaced(p).points
    window = (lo[:, None] <= t[None, :]) & (t[None, :] < hi[:, None])
    return complete[:, None] | window


def censoring_mask(sample: FunctionalSample, a: float, b: float) -> np.ndarray:
    """Observe ``X(t)`` iff ``a < X(t) < b``."""
    if not a < 0 < b:
        raise ValueError("censoring needs a < 0 < b")
    x = sample.values
    with np.errstate(invalid="ignore"):
        return (x > a) & (x < b) & sample.mask


@dataclass
class ScenarioConfig:
    n: int = 100
    p: int = 100
    mechanism: str = "mcar_interval"
    a: float = -1.0
    b: float = 1.0
    reps: int = 1000
    alpha: float = 0.05
    seed: int = 0
    bstar: int = 2000
    methods: tuple = STATISTICS
    calibrations: tuple = ("asymptotic", "bootstrap")
    fve: float = 0.99
    K: int = 200
    m_z: int = 100
    threads: int = 1

    def __post_init__(self):
        if self.mechanism not in ("mcar_interval", "censoring"):
            raise ValueError("mechanism must be 'mcar_interval' or 'censoring'")
        if self.mechanism == "censoring" and not self.a < 0 < self.b:
            raise ValueError("censoring needs a < 0 < b")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        self.methods = tuple(self.methods)
        self.calibrations = tuple(self.calibrations)

    def test_config(self, seed: int) -> TestConfig:
        return TestConfig(bstar=self.bstar, fve=self.fve, seed=seed, K=self.K, m_z=self.m_z)


def simulate_replicate(config: ScenarioConfig, r: int, b: float | None = None) -> FunctionalSample:
    """Data of replicate ``r`` (censoring level ``b`` overrides the config)."""
    gen = Stream(config.seed).child("data", r).generator()
    paths = brownian_sample(config.n, config.p, gen)
    if config.mechanism == "mcar_interval":
        mask = mcar_interval_mask(config.n, config.p, gen)
    else:
        mask = censoring_mask(paths, config.a, config.b if b is None else b)
    return FunctionalSample(paths.grid, paths.values, mask)


def replicate_seed(config: ScenarioConfig, r: int) -> int:
    return Stream(config.seed).child("tests", r).derive_seed()


def _pvalues(config: ScenarioConfig, r: int, b: float | None) -> dict:
    """p-values of every requested method for replicate ``r``; NaN if the replicate fails."""
    out = {Method.of(k, c).value: np.nan for c in config.calibrations for k in config.methods}
    try:
        sample = simulate_replicate(config, r, b)
        analysis = Analysis(sample, partition_complete(sample), config.test_config(replicate_seed(config, r)))
        for cal in config.calibrations:
            for kind in config.methods:
                out[Method.of(kind, cal).value] = analysis.test(kind, cal).p_value
    except FdmcarError:
        pass
    return out


def _chunks(total: int, threads: int):
    size = max(1, -(-total // (4 * max(threads, 1))))
    return [range(s, min(s + size, total)) for s in range(0, total, size)]


def _map_replicates(config: ScenarioConfig, fn, *args) -> list:
    def work(rs):
        # single-threaded BLAS keeps every reduction order fixed
        with threadpool_limits(1):
            return [fn(config, r, *args) for r in rs]

    chunks = _chunks(config.reps, config.threads)
    if config.threads <= 1:
        parts = [work(rs) for rs in chunks]
    else:
        parts = Parallel(n_jobs=config.threads)(delayed(work)(rs) for rs in chunks)
    return [x for part in parts for x in part]


@dataclass
class ExperimentTable:
    """Rejection rates per method (and censoring level for power studies)."""

    rows: list
    config: dict
    pvalues: dict = field(default_factory=dict, repr=False)
    elapsed: float = 0.0

    def rate(self, method: str, b: float | None = None) -> float:
        for row in self.rows:
            if row["method"] == method and (b is None or np.isclose(row["b"], b)):
                return row["rejection_rate"]
        raise KeyError((method, b))

    def write_csv(self, path) -> None:
        cols = ["n", "mechanism", "b", "method", "rejection_rate", "mc_se", "reps", "failed", "alpha", "bstar"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            for row in self.rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def _rows(config: ScenarioConfig, pvals: list, b) -> list:
    rows = []
    for method in pvals[0]:
        p = np.array([x[method] for x in pvals])
        ok = ~np.isnan(p)
        rate = float(np.mean(p[ok] <= config.alpha)) if ok.any() else float("nan")
        rows.append(
            {
                "n": config.n,
                "mechanism": config.mechanism,
                "b": b if b is not None else (config.b if config.mechanism == "censoring" else ""),
                "method": method,
                "rejection_rate": rate,
                "mc_se": float(np.sqrt(rate * (1 - rate) / max(ok.sum(), 1))),
                "reps": int(ok.sum()),
                "failed": int((~ok).sum()),
                "alpha": config.alpha,
                "bstar": config.bstar,
            }
        )
    return rows


def _config_dict(config: ScenarioConfig) -> dict:
    d = asdict(config)
    d["methods"], d["calibrations"] = list(config.methods), list(config.calibrations)
    return d


def run_type1_experiment(config: ScenarioConfig) -> ExperimentTable:
    """Case 1 rejection rates of every method and calibration."""
    if config.mechanism != "mcar_interval":
        raise ValueError("the type-I experiment uses the mcar_interval mechanism")
    start = time.perf_counter()
    pvals = _map_replicates(config, _pvalues, None)
    table = ExperimentTable(_rows(config, pvals, None), _config_dict(config))
    table.pvalues = {k: np.array([x[k] for x in pvals]) for k in pvals[0]}
    table.elapsed = time.perf_counter() - start
    return table


def run_power_experiment(config: ScenarioConfig, b_grid) -> ExperimentTable:
    """Case 2 rejection rates for every upper censoring bound in ``b_grid``."""
    if config.mechanism != "censoring":
        raise ValueError("the power experiment uses the censoring mechanism")
    b_grid = [float(b) for b in b_grid]
    if any(not b > 0 for b in b_grid):
        raise ValueError("censoring bounds must be positive")
    start = time.perf_counter()
    rows, pvalues = [], {}
    for b in b_grid:
        pvals = _map_replicates(config, _pvalues, b)
        rows.extend(_rows(config, pvals, b))
        pvalues[b] = {k: np.array([x[k] for x in pvals]) for k in pvals[0]}
    table = ExperimentTable(rows, {**_config_dict(config), "b_grid": b_grid}, pvalues)
    table.elapsed = time.perf_counter() - start
    return table


def _coverage(config: ScenarioConfig, r: int, level: float) -> tuple:
    try:
        sample = simulate_replicate(config, r)
        analysis = Analysis(sample, partition_complete(sample), config.test_config(replicate_seed(config, r)))
        band = analysis.band(level, "asymptotic")
        test = analysis.test("sup", "asymptotic")
        return band.contains_zero(), test.p_value
    except FdmcarError:
        return None, np.nan


def run_coverage_experiment(config: ScenarioConfig, level: float = 0.95) -> dict:
    """Asymptotic band coverage of the zero function, paired with sup-test p-values."""
    res = _map_replicates(config, _coverage, level)
    contains = np.array([c for c, _ in res if c is not None], dtype=bool)
    pv = np.array([p for c, p in res if c is not None])
    return {
        "coverage": float(contains.mean()),
        "contains_zero": contains,
        "sup_pvalues": pv,
        "failed": sum(c is None for c, _ in res),
    }
