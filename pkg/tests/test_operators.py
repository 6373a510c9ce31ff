import numpy as np
import pytest
from hypothesis import given, strategies as st

from secondgrade.discretization import clamped_mode
from secondgrade.operators import (ForceSpec, apply_B, arakawa_jacobian, build_model,
                                   constant_force, force_coeffs, galerkin_tensor, grad_matrix,
                                   linear_force, lipschitz_probe, saturating_force, zero_force)


def loop_arakawa_entry(basis, i, j, k):
    """h^2 sum q_i J(psi_j, psi_k) with Arakawa's Jacobian, node by node."""
    N, h = basis.grid.N, basis.grid.h
    a, b, q = basis.psis[j], basis.psis[k], basis.qs[i]

    def A(x, y):
        return a[x, y] if 0 <= x < N and 0 <= y < N else 0.0

    def B(x, y):
        return b[x, y] if 0 <= x < N and 0 <= y < N else 0.0

    total = 0.0
    for x in range(N):
        for y in range(N):
            jpp = ((A(x + 1, y) - A(x - 1, y)) * (B(x, y + 1) - B(x, y - 1))
                   - (A(x, y + 1) - A(x, y - 1)) * (B(x + 1, y) - B(x - 1, y)))
            jpx = (A(x + 1, y) * (B(x + 1, y + 1) - B(x + 1, y - 1))
                   - A(x - 1, y) * (B(x - 1, y + 1) - B(x - 1, y - 1))
                   - A(x, y + 1) * (B(x + 1, y + 1) - B(x - 1, y + 1))
                   + A(x, y - 1) * (B(x + 1, y - 1) - B(x - 1, y - 1)))
            jxp = (B(x, y + 1) * (A(x + 1, y + 1) - A(x - 1, y + 1))
                   - B(x, y - 1) * (A(x + 1, y - 1) - A(x - 1, y - 1))
                   - B(x + 1, y) * (A(x + 1, y + 1) - A(x + 1, y - 1))
                   + B(x - 1, y) * (A(x - 1, y + 1) - A(x - 1, y - 1)))
            total += q[x, y] * (jpp + jpx + jxp) / (12 * h * h)
    return h * h * total


def test_tensor_entry_matches_scalar_loop(small_model):
    T = small_model.T
    ref = loop_arakawa_entry(small_model.basis, 1, 2, 3)
    assert T[1, 2, 3] == pytest.approx(ref, rel=1e-12, abs=1e-12 * np.abs(T).max())
    ref2 = loop_arakawa_entry(small_model.basis, 0, 1, 3)
    assert T[0, 1, 3] == pytest.approx(ref2, rel=1e-12, abs=1e-12 * np.abs(T).max())


def test_centered_jacobian_is_pointwise_cross_product(model):
    b = model.basis
    J = arakawa_jacobian(b.psis[1], b.psis[4], b.grid.h, kind="centered")
    e, f = b.velocities[1], b.velocities[4]
    cross = e[..., 0] * f[..., 1] - e[..., 1] * f[..., 0]
    assert np.allclose(J, cross, rtol=0, atol=1e-12 * np.abs(cross).max())


def test_unknown_jacobian_rejected(model):
    with pytest.raises(ValueError):
        arakawa_jacobian(model.basis.psis[0], model.basis.psis[1], 0.1, kind="upwind")


@pytest.mark.parametrize("jacobian", ["arakawa", "centered"])
def test_tensor_antisymmetry_exact(model, jacobian):
    T = model.T if jacobian == "arakawa" else galerkin_tensor(model.basis, jacobian)
    assert np.max(np.abs(T + T.transpose(0, 2, 1))) <= 1e-14 * np.max(np.abs(T))


@given(st.integers(0, 2**31 - 1))
def test_b_pairing_with_second_argument_vanishes(seed):
    m = build_model(16, 0.1, 8)
    c, d = np.random.default_rng(seed).standard_normal((2, 8))
    b = apply_B(m.T, c, d)
    scale = np.linalg.norm(c) * np.linalg.norm(d) ** 2 * np.abs(m.T).max()
    assert abs(d @ b) <= 1e-12 * scale


@given(st.integers(0, 2**31 - 1))
def test_b_w_pairing_vanishes_with_arakawa(seed):
    m = build_model(16, 0.1, 8)
    c = np.random.default_rng(seed).standard_normal(8)
    b = apply_B(m.T, c, c)
    lc = m.lambdas * c
    assert abs(lc @ b) <= 1e-11 * np.linalg.norm(lc) * np.linalg.norm(b)


def test_centered_tensor_does_not_cancel_w_pairing(model):
    T = galerkin_tensor(model.basis, "centered")
    c = np.random.default_rng(3).standard_normal(model.n)
    b = apply_B(T, c, c)
    lc = model.lambdas * c
    assert abs(lc @ b) > 1e-6 * np.linalg.norm(lc) * np.linalg.norm(b)


def test_apply_B_zero_inputs(model, rng):
    c, d = rng.standard_normal((2, model.n))
    assert np.all(apply_B(model.T, np.zeros(model.n), d) == 0)
    assert np.array_equal(apply_B(model.T, 2 * c, d), 2 * apply_B(model.T, c, d))
    with pytest.raises(ValueError):
        apply_B(model.T, c[:-1], d)


@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_apply_B_bilinear(seed, a, b):
    m = build_model(16, 0.1, 8)
    c1, c2, d = np.random.default_rng(seed).standard_normal((3, 8))
    lhs = apply_B(m.T, a * c1 + b * c2, d)
    rhs = a * apply_B(m.T, c1, d) + b * apply_B(m.T, c2, d)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-13 * (1 + np.abs(lhs).max()))
    lhs = apply_B(m.T, d, a * c1 + b * c2)
    rhs = a * apply_B(m.T, d, c1) + b * apply_B(m.T, d, c2)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-13 * (1 + np.abs(lhs).max()))


def test_apply_B_matches_einsum_and_batches(model, rng):
    c, d = rng.standard_normal((2, 5, model.n))
    ref = np.einsum("mi,mj,ijk->mk", c, d, model.T)
    assert np.allclose(apply_B(model.T, c, d), ref, rtol=1e-13, atol=1e-18)


def test_grad_matrix_properties(model):
    G = grad_matrix(model.basis, model.forms)
    assert np.array_equal(G, G.T)
    assert np.all(np.diag(G) > 0)
    assert np.linalg.eigvalsh(G).min() > 0


def test_grad_matrix_dimension_mismatch(model, small_model):
    with pytest.raises(ValueError):
        grad_matrix(small_model.basis, model.forms)


def test_galerkin_stokes_spectrum_bounded_by_inverse_alpha(model):
    ev = np.linalg.eigvals(model.lambdas[:, None] * model.G)
    assert np.max(np.abs(ev.imag)) < 1e-9 * np.max(ev.real)
    assert ev.real.min() > 0
    assert ev.real.max() <= 1 / 0.1


def test_l2_and_gradient_pairings_sum_to_v_gram(model):
    lhs = model.P0 + 0.1 * model.G
    assert np.allclose(lhs, np.diag(1 / model.lambdas), rtol=0, atol=1e-14)


def test_zero_force_gives_zero(model, rng):
    c = rng.standard_normal(model.n)
    F = zero_force()
    assert np.all(force_coeffs(F, c, 1.3, model.basis, model.forms) == 0)
    assert F.C_F == 0 and F.F0_normV(model.forms) == 0


def test_linear_force_independent_of_q(model, rng):
    c = rng.standard_normal(model.n)
    F = linear_force(0.3)
    outs = [force_coeffs(F, c, Q, model.basis, model.forms) for Q in (0.5, 1.0, 2.0)]
    expected = 0.3 * model.P0 @ c
    for out in outs:
        assert np.allclose(out, expected, rtol=0, atol=1e-12 * np.abs(expected).max())


def test_affine_force_splits_into_homogeneous_and_scaled_constant(model, rng):
    c = rng.standard_normal(model.n)
    a = clamped_mode(2, 1, model.grid)
    F = linear_force(0.3, a)
    b = force_coeffs(constant_force(a), c, 1.0, model.basis, model.forms)
    for Q in (0.5, 1.0, 2.0):
        out = force_coeffs(F, c, Q, model.basis, model.forms)
        expected = 0.3 * model.P0 @ c + b / Q
        assert np.allclose(out, expected, rtol=0, atol=1e-12 * np.abs(expected).max())


def test_constant_force_pairing_by_direct_quadrature(model):
    a = clamped_mode(2, 1, model.grid)
    out = force_coeffs(constant_force(a), np.zeros(model.n), 2.0, model.basis, model.forms)
    h = model.grid.h
    pa = np.pad(a, 1)
    for k in range(model.n):
        pk = np.pad(model.basis.psis[k], 1)
        # (a, e_k) = int grad a . grad psi_k with edge differences
        gx = np.sum(np.diff(pa, axis=0) * np.diff(pk, axis=0))
        gy = np.sum(np.diff(pa, axis=1) * np.diff(pk, axis=1))
        assert out[k] == pytest.approx(0.5 * (gx + gy) * h * h / h ** 2, rel=1e-10, abs=1e-15)


def test_force_rejects_non_positive_q(model):
    with pytest.raises(ValueError):
        force_coeffs(linear_force(0.1), np.zeros(model.n), 0.0, model.basis, model.forms)


def test_fast_force_path_matches_grid_route(model, rng):
    c = rng.standard_normal((3, model.n))
    a = clamped_mode(1, 2, model.grid)
    for F in (constant_force(a), linear_force(-0.2, a), saturating_force(0.4, 2.0, a)):
        for Q in (0.7, 1.9):
            fast = model.force(F, c, Q)
            slow = force_coeffs(F, c, Q, model.basis, model.forms)
            assert np.allclose(fast, slow, rtol=0, atol=1e-11 * np.abs(slow).max())


def test_force_spec_validation(model):
    with pytest.raises(ValueError):
        ForceSpec("cubic")
    with pytest.raises(ValueError):
        ForceSpec("constant", a=np.zeros(4), gain=1.0)
    with pytest.raises(ValueError):
        ForceSpec("saturating", gain=1.0, s=0.0)
    with pytest.raises(ValueError):
        ForceSpec("zero", gain=1.0)
    assert linear_force(-0.3).C_F == 0.3


def test_lipschitz_probe_affine_kinds(model):
    assert lipschitz_probe(zero_force(), model.forms, 50) == 0.0
    assert lipschitz_probe(linear_force(0.3), model.forms, 50) == pytest.approx(0.3, abs=1e-6)


def test_lipschitz_probe_saturating_within_declared_constant(model):
    F = saturating_force(0.4, 5.0, clamped_mode(1, 1, model.grid))
    ratio = lipschitz_probe(F, model.forms, trials=1000, seed=1)
    assert ratio <= F.C_F * (1 + 1e-8)
    assert ratio > 0.5 * F.C_F


def test_saturating_derivative_matches_difference_quotient(model, rng):
    F = saturating_force(0.7, 3.0, clamped_mode(1, 1, model.grid))
    MV = model.forms.MV
    psi, d = rng.standard_normal((2, model.grid.size))
    psi /= np.sqrt(3.0 * psi @ MV @ psi)  # s |u|_V^2 = 1, the most curved region
    d /= np.sqrt(d @ MV @ d)
    exact = F.derivative(psi, d, model.forms)
    eps = 1e-5
    fd = (F.evaluate(psi + eps * d, model.forms) - F.evaluate(psi - eps * d, model.forms)) / (2 * eps)
    assert np.allclose(fd, exact, rtol=0, atol=1e-8 * np.abs(exact).max())


def test_model_cache_files(tmp_path):
    a = build_model(8, 0.1, 4, cache_dir=tmp_path)
    files = sorted(p.name for p in tmp_path.iterdir())
    assert any(f.startswith("basis_") for f in files) and any(f.startswith("tensor_") for f in files)
    from secondgrade.operators import _build_model
    _build_model.cache_clear()
    b = build_model(8, 0.1, 4, cache_dir=tmp_path)
    assert np.array_equal(a.T, b.T)
    assert b.basis.content_hash() == a.basis.content_hash()
