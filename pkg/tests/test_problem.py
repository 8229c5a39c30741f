import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neurozip.data import Batch, Trajectory
from neurozip.errors import ConfigError, ContractError
from neurozip.models import MixingWeights, OperatingPoint, ZipParams, init_mlp, zip_forward
from neurozip.problem import (PenaltyConfig, constraint_penalty, data_loss, predict, total_loss,
                              violation_breakdown, violation_metric)

FEAS_MIX = MixingWeights(0.5, 0.5)


def test_data_loss_examples():
    assert data_loss(np.ones((3, 1)), np.zeros((3, 1)), np.ones((3, 1)), np.zeros((3, 1))) == 0.0
    assert data_loss(np.array([[1.1]]), np.array([[0.0]]), np.array([[1.0]]),
                     np.array([[0.0]])).item() == pytest.approx(0.01, abs=1e-15)
    two = data_loss(np.array([[0.1], [0.3]]), np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 1)))
    assert two.item() == pytest.approx(0.05, abs=1e-15)


def test_data_loss_empty_batch():
    with pytest.raises(ContractError):
        data_loss(np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((0, 1)))


def test_penalty_examples():
    assert constraint_penalty(ZipParams(0.5, 0.3, 0.2, 1, 0, 0), FEAS_MIX) == 0.0
    neg = constraint_penalty(ZipParams(-0.1, 0.6, 0.5, 1, 0, 0), FEAS_MIX)
    assert neg == pytest.approx(0.1, abs=1e-15)
    over = constraint_penalty(ZipParams(0.4, 0.4, 0.3, 1, 0, 0), FEAS_MIX)
    assert over == pytest.approx(0.1, abs=1e-15)


def test_violation_examples():
    assert violation_metric(ZipParams(0.5, 0.3, 0.2, 1, 0, 0), FEAS_MIX) == 0.0
    assert violation_metric(ZipParams(0.409, 0.3, 0.3), FEAS_MIX) == pytest.approx(0.009, abs=1e-15)
    assert violation_metric(ZipParams(-0.002, 0.502, 0.5, 0.2, 0.3, 0.5), FEAS_MIX) == \
        pytest.approx(0.002, abs=1e-15)


def test_mixing_bounds_are_penalised():
    z = ZipParams(0.5, 0.3, 0.2, 1, 0, 0)
    assert violation_metric(z, MixingWeights(1.2, -0.1)) == pytest.approx(0.3, abs=1e-15)
    b = violation_breakdown(z, MixingWeights(1.2, -0.1))
    assert b["a<=1"] == pytest.approx(0.2) and b["b>=0"] == pytest.approx(0.1)


def test_l2_penalty_sums_squares():
    pen = constraint_penalty(ZipParams(-0.1, 0.6, 0.6, 1, 0, 0), FEAS_MIX, PenaltyConfig(2.0, 3.0, 2))
    assert pen == pytest.approx(2.0 * 0.01 + 3.0 * 0.01, abs=1e-15)


def test_penalty_config_validation():
    with pytest.raises(ConfigError):
        PenaltyConfig(norm_l=3)
    with pytest.raises(ConfigError):
        PenaltyConfig(q_g=-1.0)


coef = st.floats(-1.0, 1.5)


@given(st.lists(coef, min_size=6, max_size=6), st.floats(-0.5, 1.5), st.floats(-0.5, 1.5),
       st.sampled_from([1, 2]))
def test_penalty_nonnegative_and_zero_iff_feasible(c, a, b, norm):
    z, m = ZipParams(*c), MixingWeights(a, b)
    pen = constraint_penalty(z, m, PenaltyConfig(1.0, 1.0, norm))
    assert pen >= 0.0
    feasible = (min(c) >= 0 and sum(c[:3]) == 1 and sum(c[3:]) == 1 and 0 <= a <= 1 and 0 <= b <= 1)
    assert (pen == 0.0) == feasible


@given(st.lists(coef, min_size=3, max_size=3))
def test_penalty_permutation_invariant(alpha):
    ref = constraint_penalty(ZipParams(*alpha, 1, 0, 0), FEAS_MIX)
    for perm in itertools.permutations(alpha):
        assert constraint_penalty(ZipParams(*perm, 1, 0, 0), FEAS_MIX) == pytest.approx(ref, abs=1e-15)


def _batch():
    t = np.arange(5) * 0.02
    v = np.array([1.0, 1.0, 0.6, 0.8, 0.95])
    z = ZipParams(0.4, 0.3, 0.3, 0.5, 0.2, 0.3)
    p, q = zip_forward(z, OperatingPoint(1.0, 1.0, 0.3), v)
    tr = Trajectory("x-000", "trans_fault_zload", t, v, np.zeros(5), p, q)
    return Batch.from_trajectories([tr]), z


def test_total_loss_examples():
    batch, z = _batch()
    mlp = init_mlp(np.random.default_rng(0))
    assert total_loss(batch, (z, MixingWeights(1.0, 1.0), mlp), mode="neuro_zip") == 0.0
    shifted = (z, MixingWeights(1.0, 1.0), mlp)
    batch.p_star = batch.p_star + np.sqrt(0.05)
    assert total_loss(batch, shifted) == pytest.approx(0.05, abs=1e-15)
    bad = ZipParams(0.5, 0.3, 0.3, 0.5, 0.2, 0.3)  # sum alpha 1.1
    assert total_loss(batch, (bad, MixingWeights(1.0, 1.0), mlp)) == pytest.approx(
        float(data_loss(*predict(bad, MixingWeights(1.0, 1.0), mlp, batch), batch.p_star,
                        batch.q_star)) + 0.1, abs=1e-12)


def test_sum_and_trajectory_reductions():
    batch, z = _batch()
    mlp = init_mlp(np.random.default_rng(0))
    batch.p_star = batch.p_star + 0.1
    params = (z, MixingWeights(1.0, 1.0), mlp)
    assert total_loss(batch, params, reduction="sum") == pytest.approx(5 * 0.01, abs=1e-14)
    assert total_loss(batch, params, reduction="trajectory") == pytest.approx(5 * 0.01, abs=1e-14)


def test_zip_only_ignores_network_and_mixing():
    batch, z = _batch()
    rng = np.random.default_rng(0)
    p1 = predict(z, MixingWeights(0.3, 0.2), init_mlp(rng), batch, "zip_only")
    p2 = predict(z, MixingWeights(0.9, 0.1), init_mlp(rng), batch, "zip_only")
    assert np.array_equal(p1[0], p2[0]) and np.array_equal(p1[1], p2[1])
    assert np.array_equal(p1[0], batch.p_star)
