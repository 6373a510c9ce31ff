import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from secondgrade import reference as ref
from secondgrade.diagnostics import (apriori_check, b_w_pairing, energy_residual_u, energy_residual_v,
                                     lipschitz_in_w_probe, tensor_w_defect)
from secondgrade.noise import q_factor
from secondgrade.operators import zero_force
from secondgrade.solver import SolverConfig, integrate, reconstruct_u


@pytest.fixture(scope="module")
def force(model):
    return ref.make_force(model)


def isolated_mode(model):
    G = model.G
    off = np.abs(G - np.diag(np.diag(G))).sum(axis=1) / np.diag(G)
    return int(np.argmin(off))


def test_zero_trajectory_has_zero_residual(model, path, config):
    traj = integrate(np.zeros(model.n), config, path, zero_force(), model=model)
    rep = energy_residual_v(traj, path, zero_force(), config, model=model)
    assert np.all(rep.residual == 0)
    assert rep.max_rel_residual == 0.0


def test_residual_is_pointwise_difference(model, path, config, force):
    traj = integrate(ref.datum(model, 2.0), config, path, force, model=model)
    rep = energy_residual_v(traj, path, force, config, model=model)
    assert np.array_equal(rep.residual, rep.w_norm_sq - rep.rhs_reconstruction)


def test_missing_dump_rejected(model, path, config, force):
    traj = integrate(ref.datum(model, 2.0), config, path, force, store="end", model=model)
    with pytest.raises(ValueError):
        energy_residual_v(traj, path, force, config, model=model)
    with pytest.raises(ValueError):
        energy_residual_u(traj, path, config.epsilon, force, config, model=model)


def test_linear_single_mode_energy_second_order(model):
    k = isolated_mode(model)
    c0 = np.zeros(model.n)
    c0[k] = 1.0
    res = []
    for dt in (2e-3, 1e-3):
        cfg = SolverConfig(nu=0.2, epsilon=0.0, dt=dt, nonlinear=False)
        traj = integrate(c0, cfg, None, zero_force(), model=model)
        rate = 0.2 * model.lambdas[k] * model.G[k, k]
        assert np.allclose(traj.w_norm_sq(), np.exp(-2 * rate * traj.times), rtol=1e-9, atol=0)
        res.append(energy_residual_v(traj, None, zero_force(), cfg, model=model).max_rel_residual)
    assert res[1] < 1e-6
    assert np.log2(res[0] / res[1]) == pytest.approx(2.0, abs=0.1)


def test_linear_energy_with_matrix_exponential(model):
    c0 = ref.datum(model, 1.0)
    cfg = SolverConfig(nu=0.2, epsilon=0.0, dt=1e-3, nonlinear=False)
    traj = integrate(c0, cfg, None, zero_force(), model=model)
    E = sla.expm(-0.2 * 0.5 * (model.lambdas[:, None] * model.G))
    assert np.allclose(traj.coeffs[500], E @ c0, atol=1e-11, rtol=0)
    assert energy_residual_v(traj, None, zero_force(), cfg, model=model).max_rel_residual < 1e-6


@pytest.mark.slow
def test_residual_decreases_with_mode_count():
    r = ref.energy_truncation_study((4, 8, 16))
    assert np.all(np.diff(r) < 0), r


def test_u_residual_is_q_squared_v_residual(model, path, config, force):
    traj = integrate(ref.datum(model, 3.0), config, path, force, model=model)
    ev = energy_residual_v(traj, path, force, config, model=model)
    eu = energy_residual_u(reconstruct_u(traj), path, config.epsilon, force, config, model=model)
    Q = q_factor(path, config.epsilon, traj.times)
    assert np.max(np.abs(eu.residual - Q ** 2 * ev.residual)) / np.max(eu.w_norm_sq) <= 1e-12


def test_u_residual_equals_v_residual_when_deterministic(model, path, config, force):
    cfg = config.with_(epsilon=0.0)
    traj = integrate(ref.datum(model, 3.0), cfg, path, force, model=model)
    ev = energy_residual_v(traj, path, force, cfg, model=model)
    eu = energy_residual_u(reconstruct_u(traj), path, 0.0, force, cfg, model=model)
    assert np.allclose(eu.residual, ev.residual, rtol=0, atol=1e-15 * np.max(ev.w_norm_sq))


def test_reference_residual_regression(model, path, config, force):
    traj = integrate(ref.datum(model, 1.0), config, path, force, model=model)
    eu = energy_residual_u(reconstruct_u(traj), path, config.epsilon, force, config, model=model)
    assert eu.max_rel_residual < 1e-6


@pytest.mark.parametrize("eps", [0.0, 0.5])
def test_apriori_decay_without_force(model, path, config, eps):
    f = ref.datum(model, 5.0)
    traj = integrate(f, config.with_(epsilon=eps), path, zero_force(), model=model)
    rep = apriori_check(traj, path, zero_force(), config.with_(epsilon=eps), model=model)
    assert rep.finite
    assert np.sqrt(rep.sup_w_sq) <= np.linalg.norm(f) * (1 + 1e-8)


def test_apriori_zero(model, path, config):
    traj = integrate(np.zeros(model.n), config, path, zero_force(), model=model)
    rep = apriori_check(traj, path, zero_force(), config, model=model)
    assert rep.sup_w_sq == 0 and rep.ratio == 0.0


def test_apriori_scaling_in_linear_regime(model, path, config):
    f = ref.datum(model, 1e-4)
    a = apriori_check(integrate(f, config, path, zero_force(), model=model), path, zero_force(), config, model=model)
    b = apriori_check(integrate(2 * f, config, path, zero_force(), model=model), path, zero_force(), config,
                      model=model)
    assert np.sqrt(b.sup_w_sq / a.sup_w_sq) == pytest.approx(2.0, rel=1e-6)


def test_apriori_ratio_finite_with_force(model, path, config, force):
    traj = integrate(ref.datum(model, 2.0), config, path, force, model=model)
    rep = apriori_check(traj, path, force, config, model=model)
    assert rep.finite and rep.functional > 0


def test_lipschitz_probe_rejects_equal_data(model, path, config, force):
    f = ref.datum(model, 1.0)
    with pytest.raises(ValueError):
        lipschitz_in_w_probe(f, f.copy(), [0.5], path, config, force, model)


def test_lipschitz_probe_perturbation_family(model, path, config, force):
    f = ref.datum(model, 5.0)
    e1 = np.eye(model.n)[0]
    t_grid = np.linspace(0.0, 1.0, 11)
    curves = np.array([lipschitz_in_w_probe(f, f + d * e1, t_grid, path, config, force, model)
                       for d in (1e-2, 1e-3, 1e-4)])
    assert np.all(np.isfinite(curves))
    assert np.max(np.abs(curves - curves[-1]) / curves[-1]) < 0.02


def test_lipschitz_probe_linear_mode_decay(model, path):
    k = isolated_mode(model)
    cfg = SolverConfig(nu=0.2, epsilon=0.0, nonlinear=False)
    e = np.eye(model.n)[k]
    t_grid = np.array([0.0, 0.5, 1.0])
    ratio = lipschitz_in_w_probe(np.zeros(model.n), 0.1 * e, t_grid, path, cfg, zero_force(), model)
    rate = 0.2 * model.lambdas[k] * model.G[k, k]
    assert np.allclose(ratio, np.exp(-rate * t_grid), rtol=1e-9)


@pytest.mark.parametrize("eps", [0.0, 0.5])
def test_v_norm_nonincreasing_without_force(model, path, config, eps):
    traj = integrate(ref.datum(model, 20.0), config.with_(epsilon=eps), path, zero_force(), model=model)
    vn = np.sqrt(traj.v_norm_sq())
    assert np.all(np.diff(vn) <= 1e-10)


def test_tensor_w_defect_small(model):
    assert tensor_w_defect(model) < 1e-11


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_skew_pairing_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    N = 12
    h = 1.0 / (N + 1)
    pv, q, p = rng.standard_normal((3, N, N))
    a = b_w_pairing(pv, q, p, h)
    b = b_w_pairing(pv, p, q, h)
    assert abs(a + b) <= 1e-12 * (abs(a) + 1)
    assert abs(b_w_pairing(pv, q, q, h)) <= 1e-12 * np.sum(q * q)
