"""Tangent equation and finite-difference checks of the derivative of v(t, f) in f.

The tangent z = Dv(t, f) g solves

    dz_k/dt = lambda_k [ -nu (G z)_k - Q (B(z, v) + B(v, z))_k + (DF(Q v) z, e_k) ]

and is marched together with the base state using the same RK4 stages, so that
z is exactly the derivative of the discrete flow map up to round-off.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import q_factor
from .operators import ForceSpec, GalerkinModel
from .solver import (GalerkinState, SolverConfig, _deriv, integrate, march, stage_q, steps)


@dataclass(frozen=True)
class TangentState:
    t: float
    z: np.ndarray


def _tangent_deriv(model: GalerkinModel, force: ForceSpec, config: SolverConfig, c, z, Q):
    g = -config.nu * (z @ model.G)
    if config.nonlinear:
        Tc_left = np.einsum("i,ijk->jk", c, model.T)   # B(c, .) as a matrix
        Tc_right = np.einsum("j,ijk->ik", c, model.T)  # B(., c)
        g = g - Q * (z @ (Tc_left + Tc_right))
    if force.gain != 0.0:
        g = g + model.force_derivative(force, c, Q, z)
    return model.lambdas * g


def tangent_rhs(zstate: TangentState, base: GalerkinState, path, force: ForceSpec,
                config: SolverConfig, model: GalerkinModel | None = None):
    if zstate.t != base.t:
        raise ValueError(f"tangent at t={zstate.t} but base at t={base.t}")
    model = model or config.model()
    Q = q_factor(path, config.epsilon, base.t)
    return _tangent_deriv(model, force, config, np.asarray(base.c, dtype=float),
                          np.asarray(zstate.z, dtype=float), Q)


def integrate_tangent(g, f, config: SolverConfig, path, force: ForceSpec, t: float | None = None,
                      model: GalerkinModel | None = None, t0: float = 0.0):
    """(z(t, f)(g), v(t, f)) from the coupled march; g may hold several directions as rows."""
    model = model or config.model()
    t = config.t_span[1] if t is None else t
    K = steps(t0, t, config.dt)
    g = np.asarray(g, dtype=float)
    single = g.ndim == 1
    G = np.atleast_2d(g)
    y0 = np.vstack([np.asarray(f, dtype=float)[None, :], G])

    def deriv(y, Q):
        c, z = y[0], y[1:]
        return np.vstack([_deriv(model, force, config, c, Q)[None, :],
                          _tangent_deriv(model, force, config, c, z, Q)])

    Qs = stage_q(path, config.epsilon, t0, config.dt, K)
    y = march(deriv, y0, Qs, config.dt, K, config.integrator, store="end", t0=t0)[0]
    z = y[1] if single else y[1:]
    return TangentState(t, z), GalerkinState(t, y[0])


@dataclass(frozen=True)
class FDReport:
    h: np.ndarray
    errors: np.ndarray
    order: float
    z_norm_v: float


def _vnorm(x, lam):
    return np.sqrt(np.sum(np.asarray(x) ** 2 / lam, axis=-1))


def fd_derivative_check(f, g, t: float, h_list, config: SolverConfig, path, force: ForceSpec,
                        model: GalerkinModel | None = None) -> FDReport:
    """e(h) = |(v(t, f + h g) - v(t, f)) / h - z(t, f)(g)|_V and its log-log slope."""
    model = model or config.model()
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    h = np.asarray(h_list, dtype=float)
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise ValueError("h_list must be positive and decreasing")
    guard = 1e-7 * np.linalg.norm(f) / np.linalg.norm(g)
    if np.any(h < guard):
        raise ValueError(f"step h={h.min():g} is below the cancellation guard {guard:g}")
    z, base = integrate_tangent(g, f, config, path, force, t, model)
    batch = f[None, :] + h[:, None] * g[None, :]
    pert = integrate(batch, config, path, force, 0.0, t, store="end", model=model).final.c
    quot = (pert - base.c[None, :]) / h[:, None]
    err = _vnorm(quot - z.z[None, :], model.lambdas)
    positive = err > 0
    order = float(np.polyfit(np.log(h[positive]), np.log(err[positive]), 1)[0]) \
        if positive.sum() >= 2 else float("inf")
    return FDReport(h=h, errors=err, order=order, z_norm_v=float(_vnorm(z.z, model.lambdas)))


def derivative_continuity_probe(f, f_seq, t: float, g_set, config: SolverConfig, path,
                                force: ForceSpec, model: GalerkinModel | None = None) -> np.ndarray:
    """max over the probe directions of |Dv(t, f_n) g - Dv(t, f) g|_V, one entry per f_n.

    The directions are normalized to unit W-norm; the maximum over a finite set
    under-approximates the operator norm in L(W, V).
    """
    model = model or config.model()
    g_set = np.atleast_2d(np.asarray(g_set, dtype=float))
    g_set = g_set / np.linalg.norm(g_set, axis=1, keepdims=True)
    z_ref, _ = integrate_tangent(g_set, f, config, path, force, t, model)
    out = []
    for fn in f_seq:
        zn, _ = integrate_tangent(g_set, fn, config, path, force, t, model)
        out.append(float(np.max(_vnorm(zn.z - z_ref.z, model.lambdas))))
    return np.array(out)
