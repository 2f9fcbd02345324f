"""Result containers and Monte Carlo calibration helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Method(str, Enum):
    L2_ASYMPTOTIC = "L2_asymptotic"
    SUP_ASYMPTOTIC = "Sup_asymptotic"
    CVM_ASYMPTOTIC = "CvM_asymptotic"
    L2_BOOTSTRAP = "L2_bootstrap"
    SUP_BOOTSTRAP = "Sup_bootstrap"
    CVM_BOOTSTRAP = "CvM_bootstrap"

    @classmethod
    def of(cls, statistic: str, calibration: str) -> "Method":
        stat = {"l2": "L2", "sup": "Sup", "cvm": "CvM"}[statistic]
        return cls(f"{stat}_{calibration}")

    @property
    def statistic(self) -> str:
        return self.value.split("_")[0].lower()

    @property
    def calibration(self) -> str:
        return self.value.split("_")[1]


@dataclass
class TestResult:
    statistic: float
    p_value: float
    method: Method
    draws: np.ndarray
    q_used: int
    seed: int
    metadata: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def rejects(self, alpha: float) -> bool:
        return self.p_value <= alpha

    def as_dict(self, include_draws: bool = False) -> dict:
        out = {
            "method": self.method.value,
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "q_used": int(self.q_used),
            "bstar": int(self.draws.size),
            "seed": int(self.seed),
            **self.metadata,
        }
        if include_draws:
            out["draws"] = [float(x) for x in self.draws]
        return out


def pvalue(statistic: float, draws) -> float:
    """Monte Carlo p-value ``(1 + #{draws >= statistic}) / (B + 1)``."""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise ValueError("need at least one calibration draw")
    return (1.0 + np.count_nonzero(draws >= statistic)) / (draws.size + 1.0)


def critical_rank(alpha: float, bstar: int) -> int:
    """1-based order statistic used as the (1 - alpha) quantile of ``bstar`` draws.

    It is the smallest rank k with ``pvalue(T) <= alpha`` exactly when
    ``T > W_(k)``, so bands built from it are dual to the test. When no
    statistic can reach level ``alpha`` the largest draw is used.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    counts = np.arange(bstar + 1)
    # same arithmetic as pvalue() so that the duality is exact in floating point
    ok = (1.0 + counts) / (bstar + 1.0) <= alpha
    if not ok.any():
        return bstar
    c_max = int(counts[ok].max())
    return bstar - c_max


def band_quantile(draws, alpha: float, rule: str = "dual") -> float:
    """Empirical (1 - alpha) quantile of the draws.

    ``rule="dual"`` uses ``critical_rank`` so the band matches the test
    decision exactly; ``rule="type1"`` is the order statistic at
    ``ceil((1 - alpha) * B)``, one rank lower for most ``B``.
    """
    draws = np.sort(np.asarray(draws, dtype=float))
    if draws.size == 0:
        raise ValueError("need at least one calibration draw")
    if rule == "dual":
        k = critical_rank(alpha, draws.size)
    elif rule == "type1":
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        # round first so that e.g. 0.95 * 100 does not become 95.00000000000001
        k = max(1, int(np.ceil(round((1 - alpha) * draws.size, 9))))
    else:
        raise ValueError("rule must be 'dual' or 'type1'")
    return float(draws[k - 1])


@dataclass
class ConfidenceBand:
    """Constant-width simultaneous band ``center +- half_width`` on the kept grid points."""

    center: np.ndarray
    half_width: float
    level: float
    source: str
    t: np.ndarray
    quantile: float
    n: int
    q_used: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_width

    def contains_zero(self) -> bool:
        # same arithmetic as the sup statistic, so the band is exactly dual to the test
        return bool(np.sqrt(self.n) * np.abs(self.center).max() <= self.quantile)

    def excludes_zero_at(self) -> np.ndarray:
        return np.abs(self.center) > self.half_width
