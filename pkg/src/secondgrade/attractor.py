"""Absorbing radii, pullback ensembles and point-cloud estimates of the random attractor.

Radius chain (all constants measured on the discrete matrices). With
lambda = (nu - P^2 C_F)/(P^2 + alpha), gamma = nu/alpha and
c2 = sup |curl w|^2 / |w|_V^2, the V- and W-energy inequalities

    d|v|_V^2/dt <= -lambda |v|_V^2 + |F^(0)|_V^2 Q^{-2} / lambda
    d|v|_W^2/dt <= -gamma |v|_W^2 + a1 |v|_V^2 + a2 |F(0)|_V^2 Q^{-2}

with a1 = c2 (2 nu/alpha + 4 alpha C_F^2/nu) and a2 = 4 alpha c2 / nu, give for
pullback states, once the initial transient has dropped below 1,

    |u(t, f, theta_{-t} omega)|_W^2 <= r = 1 + [a1 |F^(0)|_V^2 / (lambda (gamma - lambda))
                                              + a2 |F(0)|_V^2] * int_{-inf}^0 e^{lambda s} Q(s)^{-2} ds.

Here F^(0) = (I + alpha A)^{-1} F(0) is the Riesz representative of F(0) in V.
The chain uses |F(u) - F(0)| <= C_F |u| in L^2, which holds for every force in
the catalogue because F(u) - F(0) is a scalar multiple of u.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .discretization import curl_to_w_constant
from .noise import WienerPath, shift
from .operators import ForceSpec, GalerkinModel
from .solver import SolverConfig, pullback_value, solve_u


class ConvergenceError(RuntimeError):
    pass


def check_f3(C_F: float, nu: float, P2: float) -> None:
    bound = nu / P2
    if not C_F < bound:
        raise ValueError(f"force Lipschitz constant C_F={C_F:.6g} must be below nu/P^2={bound:.6g}"
                         " for the absorbing-set estimate (dissipativity condition)")


@dataclass(frozen=True)
class RadiusConstants:
    lam: float
    gamma: float
    c2: float
    a1: float
    a2: float
    F0_V_sq: float        # |F(0)|_V^2
    F0_riesz_V_sq: float  # |(I + alpha A)^{-1} F(0)|_V^2

    @property
    def prefactor(self) -> float:
        return (self.a1 * self.F0_riesz_V_sq / (self.lam * (self.gamma - self.lam))
                + self.a2 * self.F0_V_sq)


def radius_constants(model: GalerkinModel, nu: float, force: ForceSpec) -> RadiusConstants:
    forms = model.forms
    alpha, P2, C_F = forms.alpha, model.P2, force.C_F
    check_f3(C_F, nu, P2)
    lam = (nu - P2 * C_F) / (P2 + alpha)
    gamma = nu / alpha
    if not gamma > lam:
        raise ValueError("gamma must exceed lambda")
    c2 = curl_to_w_constant(forms)
    if force.a is None:
        F0, F0r = 0.0, 0.0
    else:
        F0 = force.F0_normV(forms) ** 2
        r = forms.M0 @ force.a
        F0r = float(r @ sla.solve(forms.MV, r, assume_a="pos"))
    a1 = c2 * (2 * nu / alpha + 4 * alpha * C_F ** 2 / nu)
    a2 = 4 * alpha * c2 / nu
    return RadiusConstants(lam, gamma, c2, a1, a2, F0, F0r)


def weighted_q_integral(path: WienerPath | None, epsilon: float, lam: float, T_tail: float):
    """(int_{-T}^0 e^{lam s} Q^{-2} ds, remainder bound for s < -T).

    Q^{-2} is linear between path nodes and the exponential is integrated
    exactly on each cell. The remainder uses the largest Q^{-2} over the stored
    nodes at or before -T.
    """
    if path is None or epsilon == 0.0:
        if path is not None and -T_tail < path.t_min - 1e-12:
            raise ValueError(f"tail window insufficient: need t_min <= {-T_tail}, have {path.t_min}")
        return -np.expm1(-lam * T_tail) / lam, np.exp(-lam * T_tail) / lam
    if -T_tail < path.t_min - 1e-12:
        raise ValueError(f"tail window insufficient: need t_min <= {-T_tail}, have {path.t_min}")
    k = path.node_index(-T_tail)
    idx = np.arange(k, 1)
    s = idx * path.dt
    g = np.exp(-2.0 * epsilon * path.value_at(s))
    a, d = s[:-1], path.dt
    Ea = np.exp(lam * a)
    dE = Ea * np.expm1(lam * d)
    Eb = Ea + dE
    m0 = dE / lam                           # int e^{lam s}
    m1 = d * Eb / lam - dE / lam ** 2       # int e^{lam s} (s - a)
    integral = float(np.sum(g[:-1] * m0 + (g[1:] - g[:-1]) / d * m1))
    tail = path.times <= -T_tail + 1e-12 * path.dt
    g_tail = np.exp(-2.0 * epsilon * path.values[tail])
    remainder = float(g_tail.max() * np.exp(-lam * T_tail) / lam)
    return integral, remainder


@dataclass(frozen=True)
class RadiusReport:
    lam: float
    gamma: float
    r_certified: float | None
    r_empirical: float
    tail_time: float
    integral: float
    remainder_bound: float
    constants: RadiusConstants


def radius(path, config: SolverConfig, force: ForceSpec, T_tail: float, f_set=None,
           model: GalerkinModel | None = None) -> RadiusReport:
    """Certified and empirical absorbing radii for |u|_W^2.

    The empirical radius is 1 + max |u(T_tail, f, theta_{-T_tail} omega)|_W^2 over
    ``f_set`` (default: the zero datum), mirroring the unit transient allowance
    of the certified radius.
    """
    model = model or config.model()
    const = radius_constants(model, config.nu, force)
    integral, remainder = weighted_q_integral(path, config.epsilon, const.lam, T_tail)
    r_cert = 1.0 + const.prefactor * (integral + remainder)
    f_set = np.zeros((1, model.n)) if f_set is None else np.atleast_2d(f_set)
    states = pullback_value(f_set, T_tail, path, config, force, model).c
    r_emp = 1.0 + float(np.max(np.sum(states ** 2, axis=-1)))
    return RadiusReport(lam=const.lam, gamma=const.gamma, r_certified=float(r_cert),
                        r_empirical=r_emp, tail_time=T_tail, integral=integral,
                        remainder_bound=remainder, constants=const)


def pullback_ensemble(f_set, t: float, path, config: SolverConfig, force: ForceSpec,
                      model: GalerkinModel | None = None) -> np.ndarray:
    """u(t, f, theta_{-t} omega) for every row of f_set."""
    return pullback_value(np.atleast_2d(f_set), t, path, config, force, model).c


def hausdorff_semidistance(A, B, norm: str = "W", lambdas=None) -> float:
    """sup_{a in A} inf_{b in B} |a - b| for finite sets of coefficient vectors."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    if A.shape[0] == 0 or B.shape[0] == 0 or A.size == 0 or B.size == 0:
        raise ValueError("semi-distance needs nonempty sets")
    diff = A[:, None, :] - B[None, :, :]
    if norm == "W":
        d2 = np.sum(diff ** 2, axis=-1)
    elif norm == "V":
        if lambdas is None:
            raise ValueError("the V norm needs the eigenvalues")
        d2 = np.sum(diff ** 2 / lambdas, axis=-1)
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return float(np.sqrt(np.max(np.min(d2, axis=1))))


def hausdorff_distance(A, B, norm="W", lambdas=None) -> float:
    return max(hausdorff_semidistance(A, B, norm, lambdas), hausdorff_semidistance(B, A, norm, lambdas))


@dataclass(frozen=True, eq=False)
class AttractorEstimate:
    """Finite inner approximation of the attractor at time 0 by pullback images."""

    points: np.ndarray        # pullback states at the largest time
    pullback_times: np.ndarray
    snapshots: np.ndarray     # (len(times), m, n)
    gaps: np.ndarray          # Hausdorff W-distance between successive snapshots
    converged: bool
    tol: float

    @property
    def cauchy_gap(self) -> float:
        return float(self.gaps[-1]) if self.gaps.size else float("inf")


def default_probe_set(n: int, scales=(0.5, 2.0, 5.0), seed: int = 7) -> np.ndarray:
    """Fixed probe ensemble: the zero datum plus random directions at several W-norms."""
    rng = np.random.Generator(np.random.Philox(seed))
    dirs = rng.standard_normal((len(scales), n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.vstack([np.zeros((1, n)), dirs * np.asarray(scales)[:, None]])


def attractor_estimate(path, config: SolverConfig, force: ForceSpec, t_list, tol: float,
                       f_set=None, model: GalerkinModel | None = None,
                       strict: bool = False) -> AttractorEstimate:
    model = model or config.model()
    t_list = np.asarray(t_list, dtype=float)
    if t_list.size < 2 or np.any(np.diff(t_list) <= 0):
        raise ValueError("t_list must hold at least two increasing times")
    f_set = default_probe_set(model.n) if f_set is None else np.atleast_2d(f_set)
    snaps = np.stack([pullback_ensemble(f_set, t, path, config, force, model) for t in t_list])
    gaps = np.array([hausdorff_distance(snaps[i], snaps[i + 1]) for i in range(len(t_list) - 1)])
    converged = bool(gaps[-1] < tol)
    if strict and not converged:
        raise ConvergenceError(f"pullback snapshots still differ by {gaps[-1]:.3g} >= tol={tol:g}"
                               f" at t={t_list[-1]:g}")
    return AttractorEstimate(points=snaps[-1], pullback_times=t_list, snapshots=snaps,
                             gaps=gaps, converged=converged, tol=tol)


@dataclass(frozen=True)
class SemiDistanceReport:
    eps_values: np.ndarray
    distances: np.ndarray
    estimates: dict = field(default_factory=dict, repr=False)


def epsilon_sweep(eps_list, path, force: ForceSpec, config: SolverConfig, t_list, tol: float,
                  f_set=None, model: GalerkinModel | None = None) -> SemiDistanceReport:
    """d(A^eps(omega), A^0) in W for each eps on one path."""
    model = model or config.model()
    ref = attractor_estimate(path, config.with_(epsilon=0.0), force, t_list, tol, f_set, model)
    ests, dists = {0.0: ref}, []
    for eps in eps_list:
        est = ref if eps == 0 else attractor_estimate(path, config.with_(epsilon=float(eps)), force,
                                                       t_list, tol, f_set, model)
        ests[float(eps)] = est
        dists.append(hausdorff_semidistance(est.points, ref.points))
    return SemiDistanceReport(np.asarray(eps_list, dtype=float), np.array(dists), ests)


def uniform_absorbing_probe(eps_list, f_set, t: float, path, force: ForceSpec, config: SolverConfig,
                            model: GalerkinModel | None = None) -> np.ndarray:
    """max_f |u^eps(t, f, theta_{-t} omega)|_W^2 for each eps."""
    out = []
    for eps in eps_list:
        if not abs(eps) < 1:
            raise ValueError("the uniform probe expects |eps| < 1")
        states = pullback_ensemble(f_set, t, path, config.with_(epsilon=float(eps)), force, model)
        out.append(float(np.max(np.sum(states ** 2, axis=-1))))
    return np.array(out)


@dataclass(frozen=True)
class ContinuityReport:
    eps_values: np.ndarray
    distances: np.ndarray   # |u^{eps_n}(t, f_n) - u^{eps}(t, f)|_V
    ratios: np.ndarray      # distances / (|eps_n - eps| + |f_n - f|_W)
    increments: np.ndarray  # V-distance between successive members of the sequence


def epsilon_continuity(eps_seq, eps_limit: float, f, t: float, path, config: SolverConfig,
                       force: ForceSpec, f_seq=None, model: GalerkinModel | None = None):
    model = model or config.model()
    lam = model.lambdas
    f = np.asarray(f, dtype=float)
    f_seq = [f] * len(eps_seq) if f_seq is None else [np.asarray(x, dtype=float) for x in f_seq]
    ref = solve_u(f, t, path, config.with_(epsilon=float(eps_limit)), force, model)
    us = np.array([solve_u(fn, t, path, config.with_(epsilon=float(e)), force, model)
                   for e, fn in zip(eps_seq, f_seq)])
    dist = np.sqrt(np.sum((us - ref) ** 2 / lam, axis=-1))
    sizes = np.abs(np.asarray(eps_seq) - eps_limit) + np.array([np.linalg.norm(fn - f) for fn in f_seq])
    incr = np.sqrt(np.sum(np.diff(us, axis=0) ** 2 / lam, axis=-1))
    return ContinuityReport(np.asarray(eps_seq, dtype=float), dist, dist / sizes, incr)


def invariance_gap(estimate: AttractorEstimate, s: float, path, config: SolverConfig, force: ForceSpec,
                   f_set=None, model: GalerkinModel | None = None) -> float:
    """Semi-distance from phi(s, A(omega), omega) to A(theta_s omega), both estimated."""
    model = model or config.model()
    pushed = solve_u(estimate.points, s, path, config, force, model)
    shifted = attractor_estimate(shift(path, s), config, force, estimate.pullback_times,
                                 estimate.tol, f_set, model)
    return hausdorff_semidistance(pushed, shifted.points)
