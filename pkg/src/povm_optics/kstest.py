"""The hexagon Kochen-Specker parity argument and its experimental score."""

from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .core import DomainError
from .neumark import SENTINEL
from .povm import HEXAGON_LABELS, hexagon_povms
from .simulator import CountTable


@functools.cache
def _memberships() -> tuple[tuple[str, ...], ...]:
    return tuple(p.labels for p in hexagon_povms())


@dataclass(frozen=True)
class ValueAssignment:
    """A yes/no value for each of the six hexagon operators."""

    values: Mapping[str, bool]

    def __post_init__(self):
        if set(self.values) != set(HEXAGON_LABELS) or len(self.values) != len(HEXAGON_LABELS):
            raise DomainError(f"assignment must cover exactly {HEXAGON_LABELS}")
        object.__setattr__(self, "values", {lab: bool(self.values[lab]) for lab in HEXAGON_LABELS})

    @classmethod
    def yes_on(cls, labels) -> ValueAssignment:
        labels = set(labels)
        return cls({lab: lab in labels for lab in HEXAGON_LABELS})

    @property
    def yes_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab in HEXAGON_LABELS if self.values[lab])


def check_assignment(a: ValueAssignment | Mapping[str, bool]) -> tuple[int, ...]:
    """Yes-count within each of the AB, BC, CA POVMs.

    A noncontextual assignment needs every count to be exactly 1.
    """
    if not isinstance(a, ValueAssignment):
        a = ValueAssignment(a)
    return tuple(sum(a.values[lab] for lab in members) for members in _memberships())


def is_consistent(counts: Sequence[int]) -> bool:
    return all(c == 1 for c in counts)


@dataclass(frozen=True)
class ContradictionCertificate:
    total_assignments: int
    valid_assignments: int
    rows: tuple[dict, ...]
    parity_argument: dict

    @property
    def valid(self) -> bool:
        """True when no assignment survives, i.e. the contradiction holds."""
        return self.valid_assignments == 0 and self.total_assignments == 2 ** len(HEXAGON_LABELS)

    def to_dict(self) -> dict:
        return {
            "total_assignments": self.total_assignments,
            "valid_assignments": self.valid_assignments,
            "certificate_valid": self.valid,
            "parity_argument": self.parity_argument,
            "rows": list(self.rows),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def parity_summary() -> dict:
    """Counting argument, derived from the POVM membership table.

    Each operator belongs to the same number of POVMs, so summing yes-counts
    over the POVMs counts every yes-operator that many times. An even
    multiplicity makes every achievable sum even, while consistency needs
    one yes per POVM.
    """
    members = _memberships()
    multiplicity = {lab: sum(lab in m for m in members) for lab in HEXAGON_LABELS}
    mult = set(multiplicity.values())
    required = len(members)
    uniform = mult.pop() if len(mult) == 1 else None
    forced = uniform is not None and uniform % 2 == 0 and required % 2 == 1
    return {
        "operator_multiplicity": multiplicity,
        "required_yes_sum": required,
        "achievable_yes_sums": sorted({uniform * k for k in range(len(HEXAGON_LABELS) + 1)}) if uniform else [],
        "contradiction_forced": forced,
    }


def enumerate_contradiction() -> ContradictionCertificate:
    """Check all 64 assignments against the three POVMs."""
    rows = []
    valid = 0
    sums = set()
    members = _memberships()
    for bits in itertools.product((False, True), repeat=len(HEXAGON_LABELS)):
        values = dict(zip(HEXAGON_LABELS, bits))
        counts = tuple(sum(values[lab] for lab in m) for m in members)
        sums.add(sum(counts))
        ok = is_consistent(counts)
        valid += ok
        row = {"yes": [lab for lab in HEXAGON_LABELS if values[lab]], "yes_counts": list(counts), "consistent": ok}
        if not ok:
            row["first_failing_povm"] = next(i for i, c in enumerate(counts) if c != 1)
        rows.append(row)
    parity = parity_summary()
    parity["observed_yes_sums"] = sorted(sums)
    parity["all_observed_sums_even"] = all(s % 2 == 0 for s in sums)
    return ContradictionCertificate(len(rows), valid, tuple(rows), parity)


@dataclass(frozen=True)
class ViolationReport:
    per_povm: dict
    precision: float
    consistent_with_quantum: bool
    formula: str = "sum(1-fold) / (sum(1-fold) + sum(scaled 2-fold) + 3+-fold), pooled over POVMs"

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "formula": self.formula,
            "consistent_with_quantum": self.consistent_with_quantum,
            "per_povm": self.per_povm,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def score_counts(tables: Sequence[CountTable], alpha: float = 1e-3) -> ViolationReport:
    """Exactly-one-yes fraction per POVM and pooled, plus a chi-square test of 1/4 per outcome.

    Tables must already carry scaled 2-fold counts and must cover the AB,
    BC and CA POVMs (in any detector order).
    """
    tables = list(tables)
    if len(tables) != 3:
        raise DomainError("expected one count table per hexagon POVM")
    expected_sets = {frozenset(m) for m in _memberships()}
    seen = set()
    per_povm = {}
    pooled_one = pooled_all = 0
    consistent = True
    for t in tables:
        outcomes = frozenset(t.outcomes) - {SENTINEL}
        if outcomes not in expected_sets or outcomes in seen:
            raise DomainError(f"table {t.povm_label!r} does not match a distinct hexagon POVM")
        seen.add(outcomes)
        one = t.total_one_fold
        total = one + t.total_two_fold + t.higher_fold
        if total == 0:
            raise DomainError(f"table {t.povm_label!r} is empty")
        obs = np.array([t.one_fold[lab] for lab in HEXAGON_LABELS if lab in outcomes], dtype=float)
        chi2 = float(((obs - one / 4) ** 2 / (one / 4)).sum()) if one else 0.0
        pval = float(stats.chi2.sf(chi2, 3))
        consistent &= pval >= alpha
        per_povm[t.povm_label] = {
            "exactly_one_fraction": one / total,
            "one_fold": one,
            "two_fold": t.total_two_fold,
            "higher_fold": t.higher_fold,
            "chi_square_vs_quarter": chi2,
            "p_value": pval,
        }
        pooled_one += one
        pooled_all += total
    return ViolationReport(per_povm, pooled_one / pooled_all, bool(consistent))
