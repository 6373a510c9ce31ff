"""Fixed-step integration of the random-coefficient Galerkin system.

For v = sum c_k e_k the conjugated equation reads

    dc_k/dt = lambda_k [ -nu (G c)_k - Q(t) B(c, c)_k + Q(t)^{-1} (F(Q(t) v), e_k) ]

with Q(t) = exp(eps W(t)). The cocycle is u(t, f, omega) = Q(t) v(t, f, omega).
All arrays of coefficients may carry a leading ensemble axis; members are
integrated together but never interact.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .noise import WienerPath, q_factor, shift
from .operators import ForceSpec, GalerkinModel, apply_B, build_model

BLOWUP_LIMIT = 1e12
INTEGRATORS = ("rk4", "heun")


class BlowUpError(FloatingPointError):
    def __init__(self, t: float, norm: float):
        super().__init__(f"coefficients left the finite range at t={t:.6g} (max |c| = {norm:.3g});"
                         " the step is probably too large")
        self.t = t
        self.norm = norm


@dataclass(frozen=True)
class SolverConfig:
    nu: float = 0.2
    alpha: float = 0.1
    epsilon: float = 0.5
    n: int = 8
    N: int = 16
    dt: float = 1e-3
    t_span: tuple = (0.0, 1.0)
    integrator: str = "rk4"
    nonlinear: bool = True
    jacobian: str = "arakawa"

    def __post_init__(self):
        # nu = 0 is admitted for the inviscid conservation diagnostics.
        if not self.nu >= 0:
            raise ValueError(f"nu must be non-negative, got {self.nu}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.n > self.N * self.N:
            raise ValueError("more modes than grid unknowns")
        t0, t1 = self.t_span
        if t1 < t0:
            raise ValueError("t_span must be increasing")
        steps(t0, t1, self.dt)

    def model(self) -> GalerkinModel:
        return build_model(self.N, self.alpha, self.n, self.jacobian)

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


def steps(t0: float, t1: float, dt: float) -> int:
    k = (t1 - t0) / dt
    K = int(round(k))
    if abs(k - K) > 1e-6:
        raise ValueError(f"interval [{t0}, {t1}] is not a whole number of steps dt={dt}")
    return K


@dataclass(frozen=True)
class GalerkinState:
    t: float
    c: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Coefficients at the step times; ``kind`` is "v" (conjugated) or "u" (physical)."""

    times: np.ndarray
    coeffs: np.ndarray  # (K+1, n) or (K+1, m, n)
    Q: np.ndarray       # Q at the stored times
    config: SolverConfig
    path: WienerPath | None
    kind: str = "v"
    lambdas: np.ndarray = field(default=None, repr=False)

    @property
    def states(self) -> list:
        return [GalerkinState(float(t), c) for t, c in zip(self.times, self.coeffs)]

    @property
    def final(self) -> GalerkinState:
        return GalerkinState(float(self.times[-1]), self.coeffs[-1])

    def w_norm_sq(self) -> np.ndarray:
        return np.sum(self.coeffs**2, axis=-1)

    def v_norm_sq(self) -> np.ndarray:
        return np.sum(self.coeffs**2 / self.lambdas, axis=-1)


def _q(path, epsilon, t):
    return q_factor(path, epsilon, t)


def rhs(state: GalerkinState, path: WienerPath | None, force: ForceSpec,
        config: SolverConfig, model: GalerkinModel | None = None, Q: float | None = None):
    """dc/dt at ``state``; Q(t) is taken from the path unless given explicitly."""
    model = model or config.model()
    if Q is None:
        Q = _q(path, config.epsilon, state.t)
    return _deriv(model, force, config, np.asarray(state.c, dtype=float), Q)


def _deriv(model, force, config, c, Q):
    g = -config.nu * (c @ model.G)
    if config.nonlinear:
        g = g - Q * apply_B(model.T, c, c)
    if force.kind != "zero":
        g = g + model.force(force, c, Q)
    return model.lambdas * g


def stage_q(path, epsilon, t0, dt, K):
    """Q at t0 + k dt/2, k = 0..2K (the RK4 stage times)."""
    t = t0 + 0.5 * dt * np.arange(2 * K + 1)
    return np.atleast_1d(_q(path, epsilon, t)).astype(float)


def march(deriv, y0, Qs, dt, K, integrator="rk4", store="all", t0=0.0, check=None):
    """Generic fixed-step march of y' = deriv(y, Q); Qs holds Q on the half-step grid.

    Returns the stored states (all steps, or only the last). ``check`` maps a
    state to the array inspected by the blow-up guard.
    """
    y = np.array(y0, dtype=float)
    out = np.empty((K + 1,) + y.shape) if store == "all" else None
    if out is not None:
        out[0] = y
    check = check or (lambda s: s)
    for k in range(K):
        qa, qm, qb = Qs[2 * k], Qs[2 * k + 1], Qs[2 * k + 2]
        if integrator == "rk4":
            k1 = deriv(y, qa)
            k2 = deriv(y + 0.5 * dt * k1, qm)
            k3 = deriv(y + 0.5 * dt * k2, qm)
            k4 = deriv(y + dt * k3, qb)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            k1 = deriv(y, qa)
            k2 = deriv(y + dt * k1, qb)
            y = y + 0.5 * dt * (k1 + k2)
        m = np.max(np.abs(check(y))) if y.size else 0.0
        if not np.isfinite(m) or m > BLOWUP_LIMIT:
            raise BlowUpError(t0 + (k + 1) * dt, float(m))
        if out is not None:
            out[k + 1] = y
    return out if out is not None else y[None]


def integrate(f, config: SolverConfig, path: WienerPath | None, force: ForceSpec,
              t0: float | None = None, t1: float | None = None, store: str = "all",
              model: GalerkinModel | None = None) -> Trajectory:
    """Solve the conjugated system from v(t0) = f over [t0, t1] (default config.t_span)."""
    model = model or config.model()
    t0 = config.t_span[0] if t0 is None else t0
    t1 = config.t_span[1] if t1 is None else t1
    K = steps(t0, t1, config.dt)
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != model.n:
        raise ValueError(f"initial data must have {model.n} coefficients")
    if not np.all(np.isfinite(f)):
        raise ValueError("initial data must be finite")
    Qs = stage_q(path, config.epsilon, t0, config.dt, K)
    coeffs = march(lambda y, Q: _deriv(model, force, config, y, Q), f, Qs,
                   config.dt, K, config.integrator, store, t0)
    if store == "all":
        times = t0 + config.dt * np.arange(K + 1)
        Q = Qs[::2]
    else:
        times, Q = np.array([t1]), Qs[-1:]
    return Trajectory(times=times, coeffs=coeffs, Q=Q, config=config, path=path,
                      kind="v", lambdas=model.lambdas)


def solve_shifted(f, s: float, t: float, path, config: SolverConfig, force: ForceSpec,
                  model=None) -> GalerkinState:
    """v(t, s, f, omega): the conjugated system started at time s from f."""
    traj = integrate(f, config, path, force, t0=s, t1=t, store="end", model=model)
    return traj.final


def reconstruct_u(traj: Trajectory, path=None, epsilon=None) -> Trajectory:
    """u = Q v state by state."""
    if traj.kind != "v":
        raise ValueError("trajectory already holds u")
    path = traj.path if path is None else path
    epsilon = traj.config.epsilon if epsilon is None else epsilon
    Q = np.atleast_1d(q_factor(path, epsilon, traj.times)).astype(float)
    scale = Q.reshape((-1,) + (1,) * (traj.coeffs.ndim - 1))
    return replace(traj, coeffs=traj.coeffs * scale, Q=Q, kind="u")


def solve_u(f, t: float, path, config: SolverConfig, force: ForceSpec, model=None) -> np.ndarray:
    """u(t, f, omega) = Q(t) v(t, f, omega) (note Q(0) = 1, so u(0) = v(0) = f)."""
    v = solve_shifted(f, 0.0, t, path, config, force, model).c
    return q_factor(path, config.epsilon, t) * v


def v_norm(c, lambdas) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(c) ** 2 / lambdas, axis=-1))


def cocycle_check(f, t: float, s: float, path, config: SolverConfig, force: ForceSpec,
                  model=None) -> float:
    """Relative V-distance between u(t+s, f, omega) and u(t, u(s, f, omega), theta_s omega)."""
    model = model or config.model()
    direct = solve_u(f, t + s, path, config, force, model)
    mid = solve_u(f, s, path, config, force, model)
    composed = solve_u(mid, t, shift(path, s), config, force, model)
    return float(v_norm(direct - composed, model.lambdas) / v_norm(direct, model.lambdas))


def conjugation_check(f, t: float, s: float, path, config: SolverConfig, force: ForceSpec,
                      model=None) -> float:
    """Relative V-distance between Q(s)^{-1} v(t, f, theta_s omega) and v(t+s, s, Q(s)^{-1} f, omega)."""
    model = model or config.model()
    Qs = q_factor(path, config.epsilon, s)
    lhs = solve_shifted(f, 0.0, t, shift(path, s), config, force, model).c / Qs
    rhs_ = solve_shifted(np.asarray(f) / Qs, s, t + s, path, config, force, model).c
    return float(v_norm(lhs - rhs_, model.lambdas) / v_norm(rhs_, model.lambdas))


def pullback_value(f, t: float, path, config: SolverConfig, force: ForceSpec,
                   model=None) -> GalerkinState:
    """u(t, f, theta_{-t} omega) = v(0, -t, Q(-t)^{-1} f, omega); f may be a batch."""
    f = np.asarray(f, dtype=float)
    if t == 0:
        return GalerkinState(0.0, f.copy())
    Qm = q_factor(path, config.epsilon, -t)
    return solve_shifted(f / Qm, -t, 0.0, path, config, force, model)
