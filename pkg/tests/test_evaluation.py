import csv
import dataclasses

import numpy as np
import pytest

from neurozip.errors import CheckpointError, ContractError
from neurozip.evaluation import (COMPARISON_COLUMNS, emit_comparison, evaluate, neural_traces,
                                 read_report)
from neurozip.fixtures import get_fixture
from neurozip.models import MixingWeights, MlpModel, init_mlp, zip_forward
from neurozip.optimizer import TrainConfig
from neurozip.pipeline import fit, split_from_checkpoint
from neurozip.problem import violation_metric


@pytest.fixture(scope="module")
def small():
    data = get_fixture("gradcheck").dataset()
    out = fit(data, TrainConfig(epochs=40, hidden=(8, 8)))
    return data, out


def test_zip_only_report_ignores_network(small):
    data, out = small
    ck = out.checkpoint
    other = dataclasses.replace(ck, mlp=init_mlp(np.random.default_rng(99), hidden=(8, 8)),
                                mix=MixingWeights(0.1, 0.9))
    r1 = evaluate(ck, data, "zip_only")
    r2 = evaluate(other, data, "zip_only")
    assert (r1.mse_p, r1.mse_q, r1.violation) == (r2.mse_p, r2.mse_q, r2.violation)
    assert (r1.a, r1.b) == (1.0, 1.0)


def test_violation_matches_metric(small):
    _, out = small
    ck = out.checkpoint
    assert out.report.violation == violation_metric(ck.zip, ck.mix)
    assert out.report.subset == "test" and out.checkpoint.metrics == out.report.summary()


def test_aggregate_is_sample_weighted_mean(small):
    data, out = small
    rep = evaluate(out.checkpoint, data)
    total = sum(n for *_, n in rep.per_trajectory)
    assert total == rep.n_samples
    assert rep.mse_p == pytest.approx(sum(mp * n for _, mp, _, n in rep.per_trajectory) / total,
                                      rel=1e-12)
    assert rep.mse_q == pytest.approx(sum(mq * n for _, _, mq, n in rep.per_trajectory) / total,
                                      rel=1e-12)


def test_self_prediction_has_zero_error(small):
    data, out = small
    ck = out.checkpoint
    relabelled = []
    for tr in data:
        p, q = zip_forward(ck.zip, tr.operating_point, tr.v)
        relabelled.append(dataclasses.replace(tr, p_star=p, q_star=q))
    rep = evaluate(ck, relabelled, "zip_only")
    assert rep.mse_p == 0.0 and rep.mse_q == 0.0


def test_threads_do_not_change_results(small, monkeypatch):
    data, out = small
    serial = evaluate(out.checkpoint, data, threads=1)
    assert evaluate(out.checkpoint, data, threads=4).to_text() == serial.to_text()
    monkeypatch.setenv("NEUROZIP_THREADS", "3")
    assert evaluate(out.checkpoint, data).to_text() == serial.to_text()


def test_comparison_file(small, tmp_path):
    data, out = small
    ck = out.checkpoint
    tr = data[0]
    path = emit_comparison(ck, tr, tmp_path / "c.csv")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == COMPARISON_COLUMNS
    body = np.array(rows[1:], dtype=float)
    assert body.shape == (len(tr), 7)
    p_nn, q_nn = neural_traces(ck, tr)
    np.testing.assert_allclose(body[:, 5], ck.mix.a * body[:, 3] + (1 - ck.mix.a) * p_nn,
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(body[:, 6], ck.mix.b * body[:, 4] + (1 - ck.mix.b) * q_nn,
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_array_equal(body[:, 1], tr.p_star)


def test_report_round_trip(small, tmp_path):
    data, out = small
    rep = evaluate(out.checkpoint, data)
    back = read_report(rep.write(tmp_path / "r.txt"))
    assert float(back["mse_p"]) == rep.mse_p and back["mode"] == rep.mode
    assert float(back[f"trajectory.{data[0].id}.mse_q"]) == rep.per_trajectory[0][2]


def test_architecture_mismatch_raises(small):
    data, out = small
    layers = list(out.checkpoint.mlp.layers)
    layers[1] = (np.ones((5, 8)), np.zeros((1, 8)))  # previous layer emits 8 features
    broken = dataclasses.replace(out.checkpoint, mlp=MlpModel(layers))
    with pytest.raises(CheckpointError):
        evaluate(broken, data)


def test_bad_inputs(small):
    data, out = small
    with pytest.raises(ContractError):
        evaluate(out.checkpoint, [])
    with pytest.raises(ContractError):
        evaluate(out.checkpoint, data, mode="nope")


def test_split_ids_recover_test_set(small):
    data, out = small
    assert [t.id for t in split_from_checkpoint(out.checkpoint, data)] == \
        [t.id for t in out.splits[2]]
