import numpy as np
import pytest
from numpy.testing import assert_allclose

from declqg import PlantModel
from declqg.core import DimMismatch, TimeOutOfRange

from conftest import random_plant


def small_plant(**over):
    kw = dict(n=2, T=3, d_x=2, d_u=(1, 1), d_y=(1, 1),
              A=np.eye(2), B=np.ones((2, 2)),
              C=[[[1.0, 0.0]], [[0.0, 1.0]]],
              Q=np.eye(2), R=np.eye(2), sigma_x=np.eye(2),
              sigma_w0=np.eye(2), sigma_w=[[[1.0]], [[1.0]]])
    kw.update(over)
    return PlantModel.create(**kw)


def test_stacked_c_stacks_rows():
    p = PlantModel.create(
        n=2, T=2, d_x=1, d_u=(1, 1), d_y=(1, 1), A=[[1.0]], B=[[1.0, 1.0]],
        C=[[[1.0]], [[1.0]]], Q=[[1.0]], R=np.eye(2), sigma_x=[[1.0]],
        sigma_w0=[[1.0]], sigma_w=[[[1.0]], [[1.0]]])
    assert_allclose(p.stacked_c(1), [[1.0], [1.0]])


def test_stacked_c_single_controller_unchanged():
    p = PlantModel.create(
        n=1, T=2, d_x=2, d_u=(1,), d_y=(2,), A=np.eye(2), B=[[1.0], [0.0]],
        C=[np.array([[1.0, 2.0], [3.0, 4.0]])], Q=np.eye(2), R=[[1.0]],
        sigma_x=np.eye(2), sigma_w0=np.eye(2), sigma_w=[np.eye(2)])
    assert_allclose(p.stacked_c(1), [[1.0, 2.0], [3.0, 4.0]])


def test_stacked_c_complementary_rows_identity():
    p = small_plant()
    assert_allclose(p.stacked_c(2), np.eye(2))


def test_stacked_c_blocks_reconstruct():
    p = random_plant(np.random.default_rng(0), n=3, d_y=(2, 1, 3))
    for t in (1, p.T):
        stacked = p.stacked_c(t)
        for i in range(p.n):
            assert_allclose(stacked[p.y_slice(i)], p.C_at(i, t))


def test_stacked_c_time_out_of_range():
    p = small_plant()
    with pytest.raises(TimeOutOfRange):
        p.stacked_c(0)
    with pytest.raises(TimeOutOfRange):
        p.stacked_c(p.T + 1)


def test_step_cost_zero():
    assert small_plant().step_cost([0, 0], [0, 0]) == 0.0


def test_step_cost_direct_values():
    p = PlantModel.create(
        n=2, T=1, d_x=1, d_u=(1, 1), d_y=(1, 1), A=[[1.0]], B=[[1.0, 1.0]],
        C=[[[1.0]], [[1.0]]], Q=[[1.0]], R=np.eye(2), sigma_x=[[1.0]],
        sigma_w0=[[1.0]], sigma_w=[[[1.0]], [[1.0]]])
    assert p.step_cost([2.0], [1.0, 1.0]) == pytest.approx(6.0)

    p2 = PlantModel.create(
        n=1, T=1, d_x=2, d_u=(1,), d_y=(1,), A=np.eye(2), B=[[1.0], [0.0]],
        C=[[[1.0, 0.0]]], Q=np.diag([1.0, 0.0]), R=[[2.0]],
        sigma_x=np.eye(2), sigma_w0=np.eye(2), sigma_w=[[[1.0]]])
    assert p2.step_cost([0.0, 5.0], [3.0]) == pytest.approx(18.0)


def test_step_cost_lower_bound():
    rng = np.random.default_rng(5)
    p = random_plant(rng, n=2, d_u=(2, 1))
    lam = np.linalg.eigvalsh(p.R).min()
    for _ in range(20):
        x = rng.standard_normal(p.d_x)
        u = rng.standard_normal(p.d_u_total)
        assert p.step_cost(x, u) >= lam * (u @ u) - 1e-12


def test_step_cost_dim_mismatch():
    with pytest.raises(DimMismatch):
        small_plant().step_cost([1.0], [0.0, 0.0])


def test_rejects_non_pd_R():
    with pytest.raises(DimMismatch):
        small_plant(R=np.diag([1.0, 0.0]))


def test_rejects_indefinite_Q():
    with pytest.raises(DimMismatch):
        small_plant(Q=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_time_varying_sequences():
    A = [np.eye(2) * (1 + 0.1 * t) for t in range(3)]
    p = small_plant(A=A)
    assert_allclose(p.A_at(3), np.eye(2) * 1.2)
    with pytest.raises(DimMismatch):
        small_plant(A=A[:2])


def test_constant_broadcast():
    p = small_plant()
    for t in range(1, p.T + 1):
        assert_allclose(p.A_at(t), np.eye(2))
