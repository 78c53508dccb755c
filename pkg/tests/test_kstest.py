import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from povm_optics.core import DomainError
from povm_optics.kstest import ValueAssignment, check_assignment, enumerate_contradiction, score_counts
from povm_optics.optics import hexagon_circuit
from povm_optics.povm import HEXAGON_LABELS
from povm_optics.simulator import CountTable, SourceModel, scale_two_fold, simulate_counts

# membership written out independently of the library
MEMBERS = ({"A+", "A-", "B+", "B-"}, {"B+", "B-", "C+", "C-"}, {"C+", "C-", "A+", "A-"})


def brute_force_consistent():
    found = []
    for bits in itertools.product((0, 1), repeat=6):
        yes = {lab for lab, b in zip(HEXAGON_LABELS, bits) if b}
        if all(len(yes & m) == 1 for m in MEMBERS):
            found.append(yes)
    return found


def test_check_assignment_examples():
    assert check_assignment(ValueAssignment.yes_on([])) == (0, 0, 0)
    assert check_assignment(ValueAssignment.yes_on(["A+", "B+", "C+"])) == (2, 2, 2)
    assert check_assignment(ValueAssignment.yes_on(["A+"])) == (1, 0, 1)


def test_assignment_requires_all_labels():
    with pytest.raises(DomainError):
        ValueAssignment({"A+": True})


def test_enumeration_certificate():
    cert = enumerate_contradiction()
    assert cert.total_assignments == 64
    assert cert.valid_assignments == 0 == len(brute_force_consistent())
    assert cert.valid
    parity = cert.parity_argument
    assert parity["required_yes_sum"] == 3
    assert all(s % 2 == 0 for s in parity["achievable_yes_sums"])
    assert parity["contradiction_forced"] and parity["all_observed_sums_even"]
    assert len(cert.rows) == 64
    assert all("first_failing_povm" in row for row in cert.rows)


def test_certificate_rows_match_membership():
    for row in enumerate_contradiction().rows:
        yes = set(row["yes"])
        assert row["yes_counts"] == [len(yes & m) for m in MEMBERS]


CYCLE = {"A": "B", "B": "C", "C": "A"}


@given(st.lists(st.booleans(), min_size=6, max_size=6))
def test_cyclic_relabeling_permutes_counts(bits):
    a = dict(zip(HEXAGON_LABELS, bits))
    rotated = {CYCLE[lab[0]] + lab[1]: v for lab, v in a.items()}
    c = check_assignment(a)
    # AB -> BC, BC -> CA, CA -> AB
    assert check_assignment(rotated) == (c[2], c[0], c[1])


def test_published_counts_score_about_99_percent(published_tables):
    report = score_counts(published_tables)
    assert report.precision == pytest.approx(148554 / (148554 + 680), abs=1e-12)
    assert 0.99 <= report.precision < 1.0
    assert set(report.per_povm) == {"AB", "BC", "CA"}


def tables_for(src):
    return [scale_two_fold(simulate_counts(hexagon_circuit(w), src), max(src.detector_efficiency, 1e-12))
            for w in ("AB", "BC", "CA")]


def test_ideal_tables_score_one():
    report = score_counts(tables_for(SourceModel.ideal(pair_rate=2e4, duration_s=1.0, seed=4)))
    assert report.precision == 1.0
    assert report.consistent_with_quantum


def test_calibrated_tables_score_in_band():
    report = score_counts(tables_for(SourceModel(seed=8)))
    assert 0.985 <= report.precision <= 0.999


def test_precision_is_one_only_without_multifolds():
    t = CountTable("AB", ("A+", "A-", "B+", "B-"), dict.fromkeys(("A+", "A-", "B+", "B-"), 5), {})
    others = [CountTable(n, o, dict.fromkeys(o, 5), {}) for n, o in
              (("BC", ("B+", "B-", "C+", "C-")), ("CA", ("C+", "C-", "A+", "A-")))]
    assert score_counts([t] + others).precision == 1.0
    t2 = CountTable("AB", t.outcomes, t.one_fold, {("A+", "B+"): 1})
    assert score_counts([t2] + others).precision < 1.0


def test_score_rejects_wrong_tables(published_tables):
    with pytest.raises(DomainError):
        score_counts(published_tables[:2])
    with pytest.raises(DomainError):
        score_counts([published_tables[0]] * 3)
