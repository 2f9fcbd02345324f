"""Two-group partitions of curves driven by their observation patterns."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, DimensionError, FormatError
from .sample import FunctionalSample, SubdomainIndex, group_counts, observed_measures


@dataclass(frozen=True, eq=False)
class GroupLabels:
    """Membership of each curve in group A (``in_a`` True) or group B.

    ``rule`` records how the labels were produced, e.g. ``"complete"``,
    ``"measure:0.43"`` or ``"external"``.
    """

    in_a: np.ndarray
    rule: str = "external"

    def __post_init__(self):
        a = np.array(self.in_a, dtype=bool)
        if a.ndim != 1:
            raise DimensionError("labels must be a vector")
        a.setflags(write=False)
        object.__setattr__(self, "in_a", a)

    @classmethod
    def from_strings(cls, labels, rule: str = "external") -> "GroupLabels":
        labs = [str(x).strip().upper() for x in labels]
        bad = [k for k, x in enumerate(labs) if x not in ("A", "B")]
        if bad:
            raise FormatError(f"label on line {bad[0] + 1} is {labels[bad[0]]!r}, expected A or B", bad[0] + 1)
        return cls(np.array([x == "A" for x in labs]), rule)

    @property
    def n(self) -> int:
        return self.in_a.size

    @property
    def n_a(self) -> int:
        return int(np.count_nonzero(self.in_a))

    @property
    def n_b(self) -> int:
        return self.n - self.n_a

    @property
    def labels(self) -> np.ndarray:
        return np.where(self.in_a, "A", "B")

    def members(self, group: str) -> np.ndarray:
        """Row indices of ``group`` in increasing order."""
        return np.flatnonzero(self.in_a if _check_group(group) == "A" else ~self.in_a)

    def swapped(self) -> "GroupLabels":
        return GroupLabels(~self.in_a, self.rule + ":swapped")

    def take(self, rows) -> "GroupLabels":
        return GroupLabels(self.in_a[np.asarray(rows, dtype=int)], self.rule)


def _check_group(group: str) -> str:
    if group not in ("A", "B"):
        raise ValueError(f"group must be 'A' or 'B', got {group!r}")
    return group


def _require_both(labels: GroupLabels) -> GroupLabels:
    if labels.n_a == 0 or labels.n_b == 0:
        raise AssumptionViolation(
            f"partition '{labels.rule}' leaves a group empty (n_A={labels.n_a}, n_B={labels.n_b})"
        )
    return labels


def partition_complete(sample: FunctionalSample) -> GroupLabels:
    """Group A holds the fully observed curves, group B the rest."""
    return _require_both(GroupLabels(sample.mask.all(axis=1), "complete"))


def partition_by_measure(sample: FunctionalSample, delta: float) -> GroupLabels:
    """Group A holds curves observed on at least a fraction ``delta`` of the grid."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return _require_both(GroupLabels(observed_measures(sample) >= delta, f"measure:{delta:g}"))


def load_labels(path, n: int | None = None) -> GroupLabels:
    """One label (A or B) per line. Blank trailing lines are ignored."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    labels = GroupLabels.from_strings(lines, "external")
    if n is not None and labels.n != n:
        raise DimensionError(f"{path}: {labels.n} labels for {n} curves")
    return labels


@dataclass
class AssumptionReport:
    passed: bool
    n_a: int
    n_b: int
    min_count_a: np.ndarray
    min_count_b: np.ndarray
    failing_columns: list = field(default_factory=list)
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_A": self.n_a,
            "n_B": self.n_b,
            "min_count_A": int(self.min_count_a.min()) if self.min_count_a.size else 0,
            "min_count_B": int(self.min_count_b.min()) if self.min_count_b.size else 0,
            "failing_columns": [int(j) for j in self.failing_columns],
            "message": self.message,
        }


def validate_assumption(sample: FunctionalSample, labels: GroupLabels, subdomain: SubdomainIndex) -> AssumptionReport:
    """Empirical check of the two-group positivity requirements on the kept columns.

    Passes iff both groups are non-empty and every kept column has at least
    one observation in each group. Never raises on failure.
    """
    count_a, count_b = group_counts(sample, labels)
    ca, cb = count_a[subdomain.kept], count_b[subdomain.kept]
    failing = subdomain.kept[(ca < 1) | (cb < 1)]
    msgs = []
    if labels.n_a == 0:
        msgs.append("group A is empty")
    if labels.n_b == 0:
        msgs.append("group B is empty")
    if failing.size:
        msgs.append(f"no observation in one group at column(s) {', '.join(str(int(j)) for j in failing[:10])}")
    return AssumptionReport(
        passed=not msgs,
        n_a=labels.n_a,
        n_b=labels.n_b,
        min_count_a=ca,
        min_count_b=cb,
        failing_columns=list(failing),
        message="; ".join(msgs),
    )


def require_assumption(sample, labels, subdomain) -> AssumptionReport:
    report = validate_assumption(sample, labels, subdomain)
    if not report.passed:
        raise AssumptionViolation(report.message)
    return report
