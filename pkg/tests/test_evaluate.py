import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import f1_score

from mbtree.detect import Verdict, detect_hosts
from mbtree.errors import InputError
from mbtree.evaluate import BENIGN, build_signature_set, LabeledOutcome, metrics, outcome, read_truth, sweep, theta_grid, write_rows
from mbtree.similarity import ScoreParams
from mbtree.synthgen import BENIGN_TEMPLATE, gen_host, rat_templates
from oracles import macro_f1_from_confusion

M, B = Verdict.MALICIOUS, Verdict.BENIGN


def o(truth, pred):
    return outcome("h", truth, B if pred == BENIGN else M, None if pred == BENIGN else pred)


def test_all_correct():
    m = metrics([o("benign", "benign"), o("rat", "rat")])
    assert (m.fpr, m.fnr, m.acc, m.macro_f1) == (0.0, 0.0, 100.0, 100.0)


def test_one_false_positive_in_ten():
    outs = [o("benign", "benign")] * 9 + [o("benign", "rat")] + [o("rat", "rat")] * 5
    m = metrics(outs)
    assert m.fpr == pytest.approx(10.0) and m.fnr == 0.0


def test_three_class_confusion():
    cm = [[2, 0, 0], [1, 1, 0], [0, 0, 2]]
    classes = ["benign", "quasar", "njrat"]
    outs = [o(classes[i], classes[j]) for i in range(3) for j in range(3) for _ in range(cm[i][j])]
    m = metrics(outs)
    assert m.macro_f1 == pytest.approx(82.2, abs=0.1)
    assert m.macro_f1 == pytest.approx(macro_f1_from_confusion(cm))
    assert m.acc == pytest.approx(500 / 6)


def test_zero_denominators_are_nan():
    m = metrics([o("rat", "rat")])
    assert math.isnan(m.fpr) and m.fnr == 0.0


def test_empty_and_inconsistent():
    with pytest.raises(InputError):
        metrics([])
    with pytest.raises(InputError):
        LabeledOutcome("h", "rat", "rat", Verdict.BENIGN)


labels = st.sampled_from(["benign", "a", "b", "c"])


@given(st.lists(st.tuples(labels, labels), min_size=1, max_size=60))
def test_macro_f1_matches_sklearn(pairs):
    m = metrics([o(t, p) for t, p in pairs])
    truth = [t for t, _ in pairs]
    pred = [p for _, p in pairs]
    ref = 100 * f1_score(truth, pred, labels=sorted(set(truth)), average="macro", zero_division=0)
    assert m.macro_f1 == pytest.approx(ref)
    assert m.acc == pytest.approx(100 * np.mean([t == p for t, p in pairs]))


def test_theta_grid():
    g = theta_grid(10)
    assert len(g) == 10 and g[0] == pytest.approx(1024) and g[-1] == pytest.approx(4096)
    assert all(a < b for a, b in zip(g, g[1:]))


@pytest.fixture(scope="module")
def small_population():
    rats = rat_templates(3)
    train = [(r.label, gen_host(r, 100 + i)) for i, r in enumerate(rats)]
    test = [(gen_host(r, 200 + 10 * i + j), r.label) for i, r in enumerate(rats) for j in range(3)]
    test += [(gen_host(BENIGN_TEMPLATE, 300 + j), "benign") for j in range(10)]
    return train, test


def test_singleton_sweep_equals_metrics(small_population):
    train, test = small_population
    (row,) = sweep(train, test, thetas=[2048.0])
    sigs = build_signature_set(train, 10)
    reps = detect_hosts([t for t, _ in test], sigs, ScoreParams())
    m = metrics(outcome(r.host, truth, r.verdict, r.predicted_label) for r, (_, truth) in zip(reps, test))
    assert (row["fpr"], row["fnr"], row["acc"], row["macro_f1"]) == (m.fpr, m.fnr, m.acc, m.macro_f1)


def test_sweep_fpr_non_increasing(small_population):
    train, test = small_population
    rows = sweep(train, test, alphas=[0.3, 0.8], betas=[0.5], levels=[5, 10])
    for L in (5, 10):
        for alpha in (0.3, 0.8):
            fprs = [r["fpr"] for r in rows if r["L"] == L and r["alpha"] == alpha]
            assert len(fprs) == 10
            assert all(a >= b for a, b in zip(fprs, fprs[1:]))


def test_sweep_rejects_empty_grid(small_population):
    train, test = small_population
    with pytest.raises(InputError):
        sweep(train, test, alphas=[])
    with pytest.raises(InputError):
        sweep(train, [])


def test_rows_csv_and_truth_file(tmp_path):
    buf = io.StringIO()
    write_rows([{"L": 10, "fpr": 0.0}], buf)
    assert buf.getvalue().splitlines() == ["L,fpr", "10,0.0"]
    path = tmp_path / "truth.csv"
    path.write_text("host,label\n10.0.0.1,quasar\n# note\n10.0.0.2, benign\n")
    assert read_truth(path) == {"10.0.0.1": "quasar", "10.0.0.2": "benign"}
