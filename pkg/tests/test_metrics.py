import json
import random
from fractions import Fraction as F

import pytest

from cascadetest.errors import EmptyResultSet
from cascadetest.metrics import (
    RunReport,
    accuracy,
    avg_repair_attempts,
    build_report,
    focal_method_coverage,
    pct,
    render_report,
)
from cascadetest.verification import Status, VerificationOutcome

P, C, X, A = Status.PASSED, Status.COMPILE_FAILED, Status.EXECUTION_FAILED, Status.ABORTED_EMPTY_REPLY


def o(focal, status, invoked=True, c=0, e=0):
    return VerificationOutcome(status, c, e, None, focal_invoked=invoked, focal_key=focal)


# (outcomes, focal set, accuracy, coverage, average attempts), all worked out by hand
HAND_SETS = [
    # 1 all pass
    ([o("A", P), o("B", P), o("C", P)], {"A", "B", "C"}, F(1), F(1), F(0)),
    # 2 all compile failures at M=3
    ([o("A", C, False, 3), o("B", C, False, 3)], {"A", "B"}, F(0), F(0), F(3)),
    # 3 three of five correct
    ([o("A", P), o("B", P), o("C", P), o("D", C, False, 3), o("E", X, False, 0, 2)],
     {"A", "B", "C", "D", "E"}, F(3, 5), F(3, 5), F(1)),
    # 4 passed but never invoking the focal method
    ([o("A", P, False), o("B", P, False)], {"A", "B"}, F(0), F(0), F(0)),
    # 5 coverage example {A,B,C} with correct outcomes on A,A,B
    ([o("A", P), o("A", P), o("B", P), o("C", C, False, 1)], {"A", "B", "C"}, F(3, 4), F(2, 3), F(1, 4)),
    # 6 attempts (0,0),(1,1),(2,0)
    ([o("A", P), o("B", P, True, 1, 1), o("C", P, True, 2, 0)], {"A", "B", "C"}, F(1), F(1), F(4, 3)),
    # 7 single outcome (3,2)
    ([o("A", X, False, 3, 2)], {"A"}, F(0), F(0), F(5)),
    # 8 focal set larger than the outcomes
    ([o("A", P)], {"A", "B", "C", "D"}, F(1), F(1, 4), F(0)),
    # 9 aborted replies count as generated but not correct
    ([o("A", A, False, 1), o("B", P)], {"A", "B"}, F(1, 2), F(1, 2), F(1, 2)),
    # 10 repeated attempts on one focal, one success
    ([o("A", C, False, 3), o("A", X, False, 1, 2), o("A", P, True, 1, 0)], {"A"}, F(1, 3), F(1), F(7, 3)),
    # 11 seven queries, two correct
    ([o("A", P), o("B", P, False), o("C", C, False, 2), o("D", X, False, 0, 1), o("E", P, True, 0, 1),
      o("F", A, False), o("G", C, False, 3)], set("ABCDEFG"), F(2, 7), F(2, 7), F(1)),
    # 12 zero attempts anywhere but mixed results
    ([o("A", P), o("B", C, False), o("C", X, False)], {"A", "B", "C"}, F(1, 3), F(1, 3), F(0)),
    # 13 passed without invocation next to a correct one on the same focal
    ([o("A", P, False), o("A", P, True)], {"A"}, F(1, 2), F(1), F(0)),
    # 14 ten queries, six correct (the end-to-end cassette's shape)
    ([o("q1", P), o("q2", P), o("q3", P, True, 1), o("q4", P, True, 0, 1), o("q5", P), o("q6", P),
      o("q7", P, False), o("q8", C, False, 3), o("q9", X, False, 0, 2), o("q10", A, False)],
     {f"q{i}" for i in range(1, 11)}, F(3, 5), F(3, 5), F(7, 10)),
    # 15 every focal covered twice
    ([o("A", P), o("A", P), o("B", P), o("B", P)], {"A", "B"}, F(1), F(1), F(0)),
    # 16 all fail, mixed failure kinds
    ([o("A", C, False, 3), o("B", X, False, 3, 2), o("C", A, False, 2)], {"A", "B", "C"}, F(0), F(0), F(10, 3)),
    # 17 one focal, one query, correct after full budget
    ([o("A", P, True, 3, 2)], {"A"}, F(1), F(1), F(5)),
    # 18 eight queries over four focals, three focals covered
    ([o("A", P), o("A", C, False, 1), o("B", P, False), o("B", P), o("C", X, False, 0, 2), o("C", P, True, 2, 1),
      o("D", C, False, 3), o("D", A, False)], {"A", "B", "C", "D"}, F(3, 8), F(3, 4), F(9, 8)),
    # 19 status failed even though the flag says invoked
    ([o("A", X, True, 0, 2), o("B", C, True, 3)], {"A", "B"}, F(0), F(0), F(5, 2)),
    # 20 27 of 35, a percentage with a repeating expansion
    ([o(f"f{i}", P) for i in range(27)] + [o(f"f{i}", C, False, 1) for i in range(27, 35)],
     {f"f{i}" for i in range(35)}, F(27, 35), F(27, 35), F(8, 35)),
]


@pytest.mark.parametrize("outcomes,focal,acc,cov,avg", HAND_SETS, ids=[f"set{i + 1}" for i in range(20)])
def test_hand_computed_metrics(outcomes, focal, acc, cov, avg):
    assert accuracy(outcomes) == acc
    assert focal_method_coverage(outcomes, focal) == cov
    assert avg_repair_attempts(outcomes) == avg
    assert isinstance(accuracy(outcomes), F)


def test_there_are_twenty_hand_sets():
    assert len(HAND_SETS) == 20


def test_empty_inputs():
    with pytest.raises(EmptyResultSet):
        accuracy([])
    with pytest.raises(EmptyResultSet):
        avg_repair_attempts([])
    with pytest.raises(EmptyResultSet):
        focal_method_coverage([o("A", P)], set())


def test_outcome_outside_focal_set():
    with pytest.raises(ValueError):
        focal_method_coverage([o("Z", P)], {"A"})


def test_permutation_invariance():
    r = random.Random(0)
    for outcomes, focal, *_ in HAND_SETS:
        shuffled = outcomes[:]
        r.shuffle(shuffled)
        assert accuracy(shuffled) == accuracy(outcomes)
        assert focal_method_coverage(shuffled, focal) == focal_method_coverage(outcomes, focal)
        assert avg_repair_attempts(shuffled) == avg_repair_attempts(outcomes)


def test_coverage_is_consistent_with_correct_set():
    for outcomes, focal, *_ in HAND_SETS:
        correct = {x.focal_key for x in outcomes if x.correct}
        assert focal_method_coverage(outcomes, focal) == F(len(correct), len(focal))
        assert 0 <= accuracy(outcomes) <= 1 and 0 <= focal_method_coverage(outcomes, focal) <= 1


# -- reports ---------------------------------------------------------------------------------


def test_pct_formatting():
    assert pct(0.7716) == "77.16%"
    assert pct(float(F(27, 35))) == "77.14%"
    assert pct(1.0) == "100.00%"
    assert pct(0.0) == "0.00%"


def test_report_per_project():
    outs = [o("p1:A#m()", P), o("p1:B#m()", C, False, 2), o("p2:C#m()", P, True, 1, 1)]
    rep = build_report(outs)
    assert list(rep.per_project) == ["p1", "p2"]
    assert rep.per_project["p1"].accuracy == 0.5
    assert rep.totals.avg_repair_attempts == pytest.approx(4 / 3)
    table = render_report(rep)
    assert "50.00%" in table and "66.67%" in table and "1.333" in table
    assert table.splitlines()[-1].startswith("All")


def test_report_json_roundtrip():
    rep = build_report([o("p:A#m()", P), o("p:B#m()", X, False, 0, 2)], mode="direct")
    doc = json.loads(render_report(rep, "json"))
    assert doc["schema_version"] == 1
    assert RunReport.from_dict(doc) == rep


def test_totals_only_table():
    rep = build_report([o("p:A#m()", P)])
    rep.per_project.clear()
    lines = render_report(rep).splitlines()
    assert lines[-1].startswith("All") and "100.00%" in lines[-1]
    assert len(lines) == 4


def test_render_report_rejects_unknown_format():
    with pytest.raises(ValueError):
        render_report(build_report([o("p:A#m()", P)]), "xml")
