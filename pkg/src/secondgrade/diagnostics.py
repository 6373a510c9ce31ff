"""Energy equations, a-priori functionals and stability ratios along trajectories.

W-energy equation for the conjugated field v:

    |v(t)|_W^2 = |f|_W^2 e^{-2 nu t / alpha} + 2 int_0^t K(v(s), Q(s)) e^{-2 nu (t-s)/alpha} ds
    K(v, Q)    = (nu/alpha) (curl v, q_v) + (curl(Q^{-1} F(Q v)), q_v)

with q_v = curl(v - alpha lap v). The curls are evaluated by the assembly
stencils (curl v = L psi, q = A psi) and the time integral by the trapezoid rule
on the trajectory grid, in the exponentially weighted recursive form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import velocity_from_stream
from .noise import q_factor
from .operators import ForceSpec, GalerkinModel, apply_B
from .solver import SolverConfig, Trajectory, integrate


@dataclass(frozen=True)
class EnergyReport:
    times: np.ndarray
    w_norm_sq: np.ndarray
    rhs_reconstruction: np.ndarray
    residual: np.ndarray
    max_rel_residual: float


def k_functional(coeffs: np.ndarray, Q: np.ndarray, force: ForceSpec, config: SolverConfig,
                 model: GalerkinModel) -> np.ndarray:
    """K(v, Q) for a time series of coefficient vectors (shape (K, n)) and Q values."""
    forms, basis = model.forms, model.basis
    h2 = forms.grid.h ** 2
    psi = basis.stream(coeffs)
    q = psi @ forms.A
    curl_v = psi @ forms.L
    K = (config.nu / forms.alpha) * h2 * np.sum(curl_v * q, axis=-1)
    if force.kind != "zero":
        Qc = np.asarray(Q, dtype=float)[:, None]
        f_psi = force.evaluate(Qc * psi, forms) / Qc
        K = K + h2 * np.sum((f_psi @ forms.L) * q, axis=-1)
    return K


def _weighted_trapezoid(K: np.ndarray, dt: float, rate: float) -> np.ndarray:
    """I(t_m) = int_0^{t_m} K(s) e^{-rate (t_m - s)} ds by the trapezoid rule."""
    decay = np.exp(-rate * dt)
    out = np.zeros_like(K)
    for m in range(1, K.size):
        out[m] = decay * out[m - 1] + 0.5 * dt * (decay * K[m - 1] + K[m])
    return out


def _require_series(traj: Trajectory):
    if traj.coeffs.ndim != 2 or traj.coeffs.shape[0] < 2:
        raise ValueError("energy diagnostics need the full coefficient dump of a single trajectory")


def energy_residual_v(traj: Trajectory, path, force: ForceSpec, config: SolverConfig | None = None,
                      f_w_sq: float | None = None, model: GalerkinModel | None = None) -> EnergyReport:
    """Residual of the W-energy equation along a conjugated trajectory.

    ``f_w_sq`` is |f|_W^2 of the datum; by default the norm of the first stored
    state. Passing the norm of an unprojected datum makes the residual include
    the truncation deficit |f|_W^2 - |Pi_n f|_W^2.
    """
    _require_series(traj)
    if traj.kind != "v":
        raise ValueError("expected a trajectory of v")
    config = config or traj.config
    model = model or config.model()
    t = traj.times - traj.times[0]
    Q = np.atleast_1d(q_factor(path, config.epsilon, traj.times)).astype(float)
    K = k_functional(traj.coeffs, Q, force, config, model)
    rate = 2.0 * config.nu / config.alpha
    dt = float(t[1] - t[0])
    w = traj.w_norm_sq()
    f_w_sq = float(w[0]) if f_w_sq is None else float(f_w_sq)
    recon = f_w_sq * np.exp(-rate * t) + 2.0 * _weighted_trapezoid(K, dt, rate)
    residual = w - recon
    scale = max(f_w_sq, float(np.max(np.abs(w))), float(np.max(np.abs(recon))))
    rel = float(np.max(np.abs(residual)) / scale) if scale > 0 else 0.0
    return EnergyReport(times=traj.times, w_norm_sq=w, rhs_reconstruction=recon,
                        residual=residual, max_rel_residual=rel)


def energy_residual_u(traj_u: Trajectory, path, epsilon: float, force: ForceSpec,
                      config: SolverConfig | None = None, f_w_sq: float | None = None,
                      model: GalerkinModel | None = None) -> EnergyReport:
    """Residual of the u-energy equation, |u|_W^2 = Q^2 [ ... ] with K~(u, Q) = K(u/Q, Q)."""
    _require_series(traj_u)
    if traj_u.kind != "u":
        raise ValueError("expected a trajectory of u")
    config = config or traj_u.config
    model = model or config.model()
    Q = np.atleast_1d(q_factor(path, epsilon, traj_u.times)).astype(float)
    v_coeffs = traj_u.coeffs / Q[:, None]
    t = traj_u.times - traj_u.times[0]
    K = k_functional(v_coeffs, Q, force, config, model)
    rate = 2.0 * config.nu / config.alpha
    f_w_sq = float(np.sum(traj_u.coeffs[0] ** 2) / Q[0] ** 2) if f_w_sq is None else float(f_w_sq)
    inner = f_w_sq * np.exp(-rate * t) + 2.0 * _weighted_trapezoid(K, float(t[1] - t[0]), rate)
    w = np.sum(traj_u.coeffs ** 2, axis=-1)
    recon = Q ** 2 * inner
    residual = w - recon
    scale = max(f_w_sq, float(np.max(np.abs(w))), float(np.max(np.abs(recon))))
    rel = float(np.max(np.abs(residual)) / scale) if scale > 0 else 0.0
    return EnergyReport(times=traj_u.times, w_norm_sq=w, rhs_reconstruction=recon,
                        residual=residual, max_rel_residual=rel)


@dataclass(frozen=True)
class AprioriReport:
    sup_w_sq: float
    functional: float       # |f|_W^2 + |F(0)|_V^2 int_0^T Q^{-2} ds
    ratio: float            # sup_w_sq / functional (an empirical lower bound for C(T))
    finite: bool


def apriori_check(traj: Trajectory, path, force: ForceSpec, config: SolverConfig | None = None,
                  model: GalerkinModel | None = None) -> AprioriReport:
    config = config or traj.config
    model = model or config.model()
    w = traj.w_norm_sq()
    Q = np.atleast_1d(q_factor(path, config.epsilon, traj.times)).astype(float)
    f0 = force.F0_normV(model.forms) ** 2
    integral = float(np.trapezoid(Q ** -2.0, traj.times)) if traj.times.size > 1 else 0.0
    functional = float(w[0]) + f0 * integral
    sup = float(np.max(w))
    ratio = sup / functional if functional > 0 else (0.0 if sup == 0 else np.inf)
    return AprioriReport(sup_w_sq=sup, functional=functional, ratio=ratio,
                         finite=bool(np.isfinite(sup) and np.isfinite(ratio)))


def lipschitz_in_w_probe(f, g, t_grid, path, config: SolverConfig, force: ForceSpec,
                         model: GalerkinModel | None = None) -> np.ndarray:
    """|v(t, f) - v(t, g)|_W / |f - g|_W at the times in ``t_grid`` (from t = 0)."""
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    d0 = np.linalg.norm(f - g)
    if d0 == 0:
        raise ValueError("f and g coincide; the ratio is undefined")
    t_grid = np.asarray(t_grid, dtype=float)
    traj = integrate(np.stack([f, g]), config, path, force, 0.0, float(t_grid.max()), model=model)
    idx = np.rint(t_grid / config.dt).astype(int)
    diff = traj.coeffs[idx, 0] - traj.coeffs[idx, 1]
    return np.linalg.norm(diff, axis=-1) / d0


def stability_ratio(f, g, T: float, path, config: SolverConfig, force: ForceSpec,
                    model: GalerkinModel | None = None) -> float:
    """sup_[0,T] |v(t,f) - v(t,g)|_V / |f - g|_V."""
    model = model or config.model()
    traj = integrate(np.stack([f, g]), config, path, force, 0.0, T, model=model)
    lam = model.lambdas
    d = np.sqrt(np.sum((traj.coeffs[:, 0] - traj.coeffs[:, 1]) ** 2 / lam, axis=-1))
    return float(d.max() / d[0])


def b_w_pairing(psi_v: np.ndarray, q: np.ndarray, p: np.ndarray, h: float) -> float:
    """Skew advective form 1/2 [(v.grad q, p) - (v.grad p, q)] with v = curl-perp psi_v.

    Antisymmetric in (q, p) node by node, so the pairing with p = q vanishes.
    Fields are interior grids vanishing on the wall.
    """
    v = velocity_from_stream(psi_v, h)

    def adv(a):
        g = np.pad(a, 1)
        ax = (g[2:, 1:-1] - g[:-2, 1:-1]) / (2 * h)
        ay = (g[1:-1, 2:] - g[1:-1, :-2]) / (2 * h)
        return v[..., 0] * ax + v[..., 1] * ay

    return float(0.5 * h * h * np.sum(adv(q) * p - adv(p) * q))


def tensor_w_defect(model: GalerkinModel, trials: int = 20, seed: int = 0) -> float:
    """max |sum_k lambda_k c_k B(c, c)_k| / (|lambda c| |B(c, c)|) over random c."""
    rng = np.random.Generator(np.random.Philox(seed))
    c = rng.standard_normal((trials, model.n))
    b = apply_B(model.T, c, c)
    lc = c * model.lambdas
    num = np.abs(np.sum(lc * b, axis=-1))
    den = np.linalg.norm(lc, axis=-1) * np.linalg.norm(b, axis=-1)
    return float(np.max(num / den))
