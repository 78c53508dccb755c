"""Monte Carlo click counts for a heralded single-photon source.

Each coincidence window holds one heralded pair, or (rarely) two. Photon 1
of every pair is routed through the circuit by the Born rule and detected
with finite efficiency. A window where two distinct detectors fire is a
2-fold event; three or more distinct detectors give a higher-fold event.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .core import DomainError
from .optics import OpticalCircuit, detector_probabilities
from .povm import DensityMatrix, Povm, outcome_probabilities

#: Heralded pairs per second; with 5% efficiency gives ~5e4 singles in 10 s.
DEFAULT_PAIR_RATE = 1.0e5
#: Double-pair windows per single-pair window; scaled 2-folds come out near 150.
DEFAULT_DOUBLE_PAIR_FRACTION = 4.0e-3
DEFAULT_EFFICIENCY = 0.05
DEFAULT_VISIBILITY = 0.82
DEFAULT_DURATION_S = 10.0
DEFAULT_SEED = 20050101


@dataclass(frozen=True)
class SourceModel:
    """Phenomenological SPDC source and detection parameters.

    ``detector_multipliers`` rescales the efficiency of individual detectors
    (by label); missing labels default to 1.
    """

    visibility: float = DEFAULT_VISIBILITY
    pair_rate: float = DEFAULT_PAIR_RATE
    double_pair_fraction: float = DEFAULT_DOUBLE_PAIR_FRACTION
    detector_efficiency: float = DEFAULT_EFFICIENCY
    duration_s: float = DEFAULT_DURATION_S
    seed: int = DEFAULT_SEED
    detector_multipliers: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("visibility", "double_pair_fraction", "detector_efficiency"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if self.pair_rate <= 0:
            raise DomainError("pair_rate must be positive")
        if self.duration_s < 0:
            raise DomainError("duration_s must be nonnegative")
        for label, mult in self.detector_multipliers.items():
            if not 0.0 <= mult * self.detector_efficiency <= 1.0:
                raise DomainError(f"effective efficiency of detector {label!r} leaves [0, 1]")

    @classmethod
    def ideal(cls, **overrides) -> SourceModel:
        """No double pairs and unit detection efficiency."""
        return cls(**{"double_pair_fraction": 0.0, "detector_efficiency": 1.0, **overrides})


@dataclass(frozen=True)
class CountTable:
    """1-fold counts per outcome, 2-fold counts per unordered outcome pair, and a 3+ tally.

    ``two_fold_scale`` records the factor already applied to ``two_fold``.
    """

    povm_label: str
    outcomes: tuple[str, ...]
    one_fold: Mapping[str, int]
    two_fold: Mapping[tuple[str, str], int]
    higher_fold: int = 0
    two_fold_scale: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        object.__setattr__(self, "outcomes", outcomes)
        one = {lab: int(self.one_fold.get(lab, 0)) for lab in outcomes}
        pairs = {pair: 0 for pair in itertools.combinations(outcomes, 2)}
        for (a, b), n in self.two_fold.items():
            key = (a, b) if (a, b) in pairs else (b, a)
            if key not in pairs:
                raise DomainError(f"unknown outcome pair {(a, b)}")
            pairs[key] = int(n)
        if any(n < 0 for n in one.values()) or any(n < 0 for n in pairs.values()) or self.higher_fold < 0:
            raise DomainError("counts must be nonnegative")
        object.__setattr__(self, "one_fold", one)
        object.__setattr__(self, "two_fold", pairs)

    @property
    def total_one_fold(self) -> int:
        return sum(self.one_fold.values())

    @property
    def total_two_fold(self) -> int:
        return sum(self.two_fold.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["povm", "outcome", "fold", "count"])
        for lab in self.outcomes:
            w.writerow([self.povm_label, lab, 1, self.one_fold[lab]])
        for (a, b), n in self.two_fold.items():
            w.writerow([self.povm_label, f"{a}/{b}", 2, n])
        w.writerow([self.povm_label, "*", "3+", self.higher_fold])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> CountTable:
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise DomainError("empty count table")
        povm = rows[0]["povm"]
        one, two, higher, outcomes = {}, {}, 0, []
        for row in rows:
            fold, n = row["fold"], int(row["count"])
            if fold == "1":
                outcomes.append(row["outcome"])
                one[row["outcome"]] = n
            elif fold == "2":
                a, b = row["outcome"].split("/")
                two[(a, b)] = n
            elif fold == "3+":
                higher = n
            else:
                raise DomainError(f"unknown fold {fold!r}")
        return cls(povm, tuple(outcomes), one, two, higher)


def traced_state() -> DensityMatrix:
    """Photon 1's state after tracing out its singlet partner: ``I/2``."""
    return DensityMatrix(np.eye(2) / 2)


def photon_state(src: SourceModel) -> DensityMatrix:
    """Mix of the pair-conditioned marginal (weight V) with white noise.

    For the singlet the marginal is already ``I/2``, so the visibility
    drops out.
    """
    marginal = traced_state().matrix
    return DensityMatrix(src.visibility * marginal + (1 - src.visibility) * np.eye(2) / 2)


def _click_probabilities(circuit: OpticalCircuit, src: SourceModel, rho) -> np.ndarray:
    probs = np.clip(detector_probabilities(circuit, rho), 0.0, None)
    eff = np.array([src.detector_efficiency * src.detector_multipliers.get(d.label, 1.0) for d in circuit.detectors])
    clicks = probs * eff
    return np.append(clicks, max(0.0, 1.0 - clicks.sum()))


def simulate_counts(circuit: OpticalCircuit, src: SourceModel, rho=None) -> CountTable:
    """Draw one coincidence-window tally for ``src.duration_s`` seconds.

    Single-pair windows (Poisson, mean ``pair_rate * duration``) each yield
    at most one click, so their per-detector totals are one multinomial
    draw. Double-pair windows (Poisson, mean ``double_pair_fraction`` times
    that) route two independent photons; clicks on two distinct detectors
    make a 2-fold event, a shared detector saturates to a 1-fold event.
    """
    if rho is None:
        rho = photon_state(src).matrix
    elif isinstance(rho, DensityMatrix):
        rho = rho.matrix
    labels = circuit.labels
    n_det = len(labels)
    p = _click_probabilities(circuit, src, rho)

    singles_rng, doubles_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(src.seed).spawn(2))
    mean = src.pair_rate * src.duration_s
    n_single = singles_rng.poisson(mean)
    one = singles_rng.multinomial(n_single, p)[:n_det].astype(np.int64)

    n_double = doubles_rng.poisson(src.double_pair_fraction * mean)
    two = np.zeros((n_det, n_det), dtype=np.int64)
    if n_double:
        hits = np.sort(doubles_rng.choice(n_det + 1, size=(n_double, 2), p=p), axis=1)
        lo, hi = hits[:, 0], hits[:, 1]
        # index n_det means "not detected"; after sorting it can only sit in hi
        single = (lo < n_det) & ((hi == n_det) | (lo == hi))
        np.add.at(one, lo[single], 1)
        pair = (hi < n_det) & (lo != hi)
        np.add.at(two, (lo[pair], hi[pair]), 1)

    two_fold = {(labels[i], labels[j]): int(two[i, j]) for i, j in itertools.combinations(range(n_det), 2)}
    return CountTable(
        povm_label=circuit.name,
        outcomes=labels,
        one_fold={lab: int(n) for lab, n in zip(labels, one)},
        two_fold=two_fold,
        higher_fold=0,
        seed=src.seed,
    )


def expected_totals(circuit: OpticalCircuit, src: SourceModel, rho=None) -> tuple[float, float]:
    """Expected total (1-fold, raw 2-fold) counts for ``simulate_counts``."""
    if rho is None:
        rho = photon_state(src).matrix
    elif isinstance(rho, DensityMatrix):
        rho = rho.matrix
    clicks = _click_probabilities(circuit, src, rho)[:-1]
    n_single = src.pair_rate * src.duration_s
    n_double = src.double_pair_fraction * n_single
    any_click = clicks.sum()
    distinct_pair = any_click**2 - np.sum(clicks**2)
    one = n_single * any_click + n_double * (1.0 - (1.0 - any_click) ** 2 - distinct_pair)
    return float(one), float(n_double * distinct_pair)


def scale_two_fold(raw: CountTable, efficiency: float) -> CountTable:
    """Divide 2-fold counts by ``efficiency`` (rounded half up) to compare them with 1-folds."""
    if not 0.0 < efficiency <= 1.0:
        raise DomainError("efficiency must lie in (0, 1]")
    scaled = {k: int(np.floor(n / efficiency + 0.5)) for k, n in raw.two_fold.items()}
    return replace(raw, two_fold=scaled, two_fold_scale=raw.two_fold_scale / efficiency)


@dataclass(frozen=True)
class AnalysisReport:
    povm_label: str
    exactly_one_fraction: float
    per_outcome_frequency: dict[str, float]
    expected_probability: dict[str, float]
    chi_square: float
    chi_square_dof: int
    chi_square_p_value: float
    two_fold_scale: float
    formula: str = "sum(1-fold) / (sum(1-fold) + sum(scaled 2-fold) + 3+-fold)"

    def to_dict(self) -> dict:
        return {
            "povm": self.povm_label,
            "exactly_one_fraction": self.exactly_one_fraction,
            "formula": self.formula,
            "two_fold_scale": self.two_fold_scale,
            "per_outcome_frequency": self.per_outcome_frequency,
            "expected_probability": self.expected_probability,
            "chi_square": self.chi_square,
            "chi_square_dof": self.chi_square_dof,
            "chi_square_p_value": self.chi_square_p_value,
        }


def expected_probabilities(model, rho) -> dict[str, float]:
    """Born probabilities by label, from a :class:`Povm` or an :class:`OpticalCircuit`."""
    if isinstance(rho, DensityMatrix):
        rho = rho.matrix
    if isinstance(model, OpticalCircuit):
        probs = detector_probabilities(model, rho)
        return {d.label: float(x) for d, x in zip(model.detectors, probs)}
    probs = outcome_probabilities(model, DensityMatrix(rho))
    return {lab: float(x) for lab, x in zip(model.labels, probs)}


def analyze(t: CountTable, p: Povm | OpticalCircuit, rho) -> AnalysisReport:
    """Exactly-one fraction and goodness of fit of 1-fold frequencies to the Born rule.

    2-fold counts enter as stored, so scale them first. Outcomes with zero
    predicted probability (vacuum sentinels) are left out of the
    chi-square.
    """
    total_one = t.total_one_fold
    total = total_one + t.total_two_fold + t.higher_fold
    if total == 0:
        raise DomainError("count table is empty")
    expected = expected_probabilities(p, rho)
    missing = set(expected) - set(t.outcomes)
    if missing:
        raise DomainError(f"count table lacks outcomes {sorted(missing)}")
    freq = {lab: (t.one_fold[lab] / total_one if total_one else 0.0) for lab in t.outcomes}
    live = [lab for lab in t.outcomes if expected.get(lab, 0.0) > 1e-12]
    chi2 = sum((t.one_fold[lab] - total_one * expected[lab]) ** 2 / (total_one * expected[lab]) for lab in live) if total_one else 0.0
    dof = max(len(live) - 1, 1)
    return AnalysisReport(
        povm_label=t.povm_label,
        exactly_one_fraction=total_one / total,
        per_outcome_frequency=freq,
        expected_probability={lab: expected.get(lab, 0.0) for lab in t.outcomes},
        chi_square=float(chi2),
        chi_square_dof=dof,
        chi_square_p_value=float(stats.chi2.sf(chi2, dof)),
        two_fold_scale=t.two_fold_scale,
    )


def report_json(report: AnalysisReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)
