import csv
import json

import numpy as np
import pytest

from negattack import dataio, harness
from negattack.attacks import AttackConfig, AttackResult, run_attack
from negattack.harness import Mode, SuccessCriterion

from helpers import small_suite

NAMES = ["m1", "m2", "m3"]


@pytest.fixture(scope="module")
def suite():
    models, _, test = small_suite()
    subset = dataio.select_eval_subset(models, test, 60, seed=0)
    return models, test, subset


def _result(label, pred, dist=10.0):
    return AttackResult(np.zeros((1, 2, 2)), label, 1, dist, dist, label, pred, 1.0, 0.5)


def test_success_rate_arithmetic():
    rs = [_result(0, 0)] * 3 + [_result(0, 1)] * 7
    assert harness.success_rate(rs) == 30.0
    assert harness.success_rate(rs, SuccessCriterion(Mode.CLASSIC)) == 70.0
    assert harness.success_rate([_result(2, 2)] * 4) == 100.0
    with pytest.raises(ValueError):
        harness.success_rate([])


def test_success_rate_distance_floor():
    rs = [_result(0, 0, 5.0), _result(0, 0, 20.0), _result(0, 1, 30.0)]
    assert harness.success_rate(rs, SuccessCriterion(distance_floor=10.0)) == pytest.approx(100 / 3)
    assert harness.success_rate(rs, SuccessCriterion("new_type", 1.0, "linf")) == pytest.approx(
        200 / 3)


def test_success_rate_recomputes_with_target(suite):
    models, test, subset = suite
    data = subset.take(test)
    cfg = AttackConfig(method="NI-FGSM", delta=300, max_iterations=20)
    rs = run_attack(models[0], data.images, data.labels, cfg)
    # poison the stored predictions: a target model must not trust them
    for r in rs:
        r.adversarial_prediction = (r.label + 1) % 3
    assert harness.success_rate(rs) == 0.0
    preds = models[1].predict(np.stack([r.adversarial for r in rs]))
    assert harness.success_rate(rs, target_model=models[1]) == 100.0 * np.mean(preds == data.labels)


def test_identity_matrix_is_all_100(suite):
    models, test, subset = suite
    cfg = AttackConfig(method="NI-FGSM", delta=0, identity=True)
    m = harness.transfer_matrix(models, test, cfg, subset, NAMES)
    assert m.rates == [[100.0] * 3] * 3
    one = harness.transfer_matrix(models[:1], test,
                                  cfg, dataio.select_eval_subset(models[:1], test, 10), ["solo"])
    assert one.rates == [[100.0]] and one.white_box == [[True]]


def test_matrix_cells_match_success_rate(suite):
    models, test, subset = suite
    cfg = AttackConfig(method="NMI-FGSM", delta=400, max_iterations=30, decay=0.8)
    cache = {}
    m = harness.transfer_matrix(models, test, cfg, subset, NAMES, cache=cache)
    assert len(cache) == 3
    data = subset.take(test)
    for i, src in enumerate(models):
        rs = run_attack(src, data.images, data.labels, cfg)
        for j, tgt in enumerate(models):
            assert m.rates[i][j] == harness.success_rate(rs, target_model=tgt)
            assert 0.0 <= m.rates[i][j] <= 100.0
    assert m.rate("m2", "m3") == m.rates[1][2]
    assert m.to_array().shape == (3, 3)
    assert [m.white_box[i][i] for i in range(3)] == [True] * 3
    assert len(m.fingerprint) == 16


def test_generate_is_chunk_and_jobs_invariant(suite):
    models, test, subset = suite
    data = subset.take(test)
    cfg = AttackConfig(method="NMI-FGM", delta=300, max_iterations=15, decay=0.8)
    seq = harness.generate(models[2], data.images, data.labels, cfg, n_jobs=1, chunk_size=25)
    par = harness.generate(models[2], data.images, data.labels, cfg, n_jobs=2, chunk_size=25)
    assert [r.to_dict() for r in seq] == [r.to_dict() for r in par]
    assert all(a.adversarial.tobytes() == b.adversarial.tobytes() for a, b in zip(seq, par))


def test_subset_fingerprint_mismatch(suite):
    models, test, subset = suite
    cfg = AttackConfig(method="NI-FGSM", delta=100, max_iterations=5)
    with pytest.raises(harness.FingerprintMismatch):
        harness.transfer_matrix(models[::-1], test, cfg, subset, NAMES)


def test_attack_errors_carry_context(suite):
    models, test, subset = suite
    cfg = AttackConfig(method="NI-FGSM", delta=100, max_iterations=5, target=1)
    with pytest.raises(harness.AttackFailure, match=r"source m1, examples 0\.\.") as info:
        harness.transfer_matrix(models, test, cfg, subset, NAMES)
    assert isinstance(info.value.__cause__, ValueError)


def test_sweep_iterations_matches_direct_run(suite):
    models, test, subset = suite
    sw = harness.sweep_iterations(models, test, ["NI-FGSM", "NI-FGM"], [5, 10], delta=300,
                                  subset=subset, names=NAMES)
    data = subset.take(test)
    rs = run_attack(models[0], data.images, data.labels,
                    AttackConfig(method="NI-FGSM", delta=300, max_iterations=5, decay=0.8))
    assert sw.rate(5, "NI-FGSM", "m1") == harness.success_rate(rs, target_model=models[0])
    assert sw.series("NI-FGM", "m2") == [row[1][1] for row in sw.rates]
    assert sw.source == "m1" and sw.fixed == {"delta": 300, "decay": 0.8}


def test_sweep_decay_zero_equals_plain(suite):
    models, test, subset = suite
    sw = harness.sweep_decay(models, test, ["NMI-FGSM", "NMI-FGM"], [0.0, 0.6], delta=300,
                             iterations=20, source="m3", subset=subset, names=NAMES)
    for nmi, ni in (("NMI-FGSM", "NI-FGSM"), ("NMI-FGM", "NI-FGM")):
        m = harness.transfer_matrix(models, test,
                                    AttackConfig(method=ni, delta=300, max_iterations=20),
                                    subset, NAMES)
        assert sw.rates[0][sw.methods.index(nmi)] == m.rates[2]
    with pytest.raises(ValueError, match="momentum"):
        harness.sweep_decay(models, test, ["NI-FGSM"], [0.0], subset=subset, names=NAMES)


def test_sweep_validation(suite):
    models, test, subset = suite
    with pytest.raises(ValueError, match="increasing"):
        harness.sweep_perturbation(models, test, ["NI-FGSM"], [200, 100], iterations=5,
                                   subset=subset, names=NAMES)
    with pytest.raises(ValueError, match="increasing"):
        harness.sweep_iterations(models, test, ["NI-FGSM"], [5, 5], subset=subset, names=NAMES)
    with pytest.raises(ValueError):
        harness.sweep_perturbation(models, test, ["NI-FGSM"], [], subset=subset, names=NAMES)
    with pytest.raises(ValueError, match="new-type"):
        harness.sweep_perturbation(models, test, ["FGSM"], [10], subset=subset, names=NAMES)


def _fixture_matrix():
    return harness.TransferMatrix("NI-FGSM", ["a", "b"], ["a", "b"], [[91.7, 0.0], [12.5, 80.0]],
                                  {"method": "NI-FGSM"})


def _read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_render_matrix_is_byte_stable_and_reparses(tmp_path):
    m = _fixture_matrix()
    csv1, txt1 = harness.render_report(m, tmp_path / "a", "table", "abc123")
    csv2, _ = harness.render_report(m, tmp_path / "b", "table", "abc123")
    assert csv1.read_bytes() == csv2.read_bytes()
    rows = _read(csv1)
    assert rows[0] == ["source", "method", "a", "b"]
    assert [[float(v) for v in r[2:]] for r in rows[1:]] == m.rates
    text = txt1.read_text()
    assert "91.7*" in text and "80.0*" in text and "abc123" in text
    assert "12.5*" not in text


def test_render_sweep_schema(tmp_path):
    sw = harness.SweepResult("delta", [65.0, 130.0], ["NI-FGSM", "NI-FGM"], "a", ["a", "b"],
                             [[[100.0, 10.0], [99.0, 5.0]], [[98.0, 2.0], [97.5, 0.0]]],
                             {"iterations": 250})
    path, txt = harness.render_report(sw, tmp_path, "sweep")
    rows = _read(path)
    assert rows[0] == ["delta", "NI-FGSM/a", "NI-FGSM/b", "NI-FGM/a", "NI-FGM/b"]
    grid = [[[float(r[1 + 2 * j + k]) for k in range(2)] for j in range(2)] for r in rows[1:]]
    assert grid == sw.rates
    assert [float(r[0]) for r in rows[1:]] == sw.values
    lines = txt.read_text().splitlines()
    assert len(lines) == 2 + len(sw.values)


def test_render_rejects_mismatched_targets(tmp_path):
    a = _fixture_matrix()
    b = harness.TransferMatrix("NI-FGM", ["a"], ["a"], [[1.0]], {})
    with pytest.raises(ValueError):
        harness.render_report([a, b], tmp_path, "x")
    with pytest.raises(ValueError):
        harness.render_report([], tmp_path, "x")


def test_render_surfaces_io_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        harness.render_report(_fixture_matrix(), blocker / "sub", "x")


def test_sweep_result_serialises(suite):
    models, test, subset = suite
    sw = harness.sweep_perturbation(models, test, ["NI-FGSM"], [100.0, 200.0], iterations=5,
                                    subset=subset, names=NAMES)
    json.dumps(sw.__dict__)
    assert len(sw.rates) == 2 and len(sw.rates[0]) == 1 and len(sw.rates[0][0]) == 3
