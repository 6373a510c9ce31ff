"""Galerkin representations of the Stokes-type operator, the bilinear term and the forces.

In the W-orthonormal basis e_i (stream functions psi_i, q_i = A psi_i) the
reduced dynamics need

    G[i, j]    = ((e_i, e_j))                   gradient pairing
    T[i, j, k] = h^2 sum q_i J(psi_j, psi_k)     duality coefficients of B(e_i, e_j) on e_k

where J(a, b) = a_x b_y - a_y b_x is the scalar cross product of the two
perpendicular gradients. J is discretized with Arakawa's nine-point Jacobian.
Its plain centered part alone equals e_j x e_k node by node; the Arakawa average
keeps the pointwise antisymmetry in (j, k) and in addition satisfies
sum b J(a, b) = 0 for grid functions vanishing on the wall, which makes the
W-pairing of the bilinear term cancel exactly at the discrete level.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np

from .discretization import (DiscreteForms, DomainGrid, SpectralBasis, assemble_forms,
                             cached_eigenbasis, poincare_constant)

JACOBIANS = ("arakawa", "centered")


def _pad(a: np.ndarray) -> np.ndarray:
    return np.pad(a, [(0, 0)] * (a.ndim - 2) + [(1, 1), (1, 1)])


def arakawa_jacobian(a: np.ndarray, b: np.ndarray, h: float, kind: str = "arakawa") -> np.ndarray:
    """J(a, b) on interior nodes of fields that vanish on the wall (zero padding).

    ``kind="centered"`` returns the plain second-order product of centered
    differences; ``"arakawa"`` the average of the three nine-point forms.
    Leading batch axes broadcast.
    """
    if kind not in JACOBIANS:
        raise ValueError(f"unknown Jacobian {kind!r}")
    p, r = _pad(np.asarray(a, dtype=float)), _pad(np.asarray(b, dtype=float))
    E, W, N, S = (slice(2, None), slice(1, -1)), (slice(None, -2), slice(1, -1)), \
        (slice(1, -1), slice(2, None)), (slice(1, -1), slice(None, -2))
    NE, SE = (slice(2, None), slice(2, None)), (slice(2, None), slice(None, -2))
    NW, SW = (slice(None, -2), slice(2, None)), (slice(None, -2), slice(None, -2))

    def at(x, s):
        return x[(Ellipsis,) + s]

    jpp = ((at(p, E) - at(p, W)) * (at(r, N) - at(r, S))
           - (at(p, N) - at(p, S)) * (at(r, E) - at(r, W)))
    if kind == "centered":
        return jpp / (4 * h * h)
    jpx = (at(p, E) * (at(r, NE) - at(r, SE)) - at(p, W) * (at(r, NW) - at(r, SW))
           - at(p, N) * (at(r, NE) - at(r, NW)) + at(p, S) * (at(r, SE) - at(r, SW)))
    jxp = (at(r, N) * (at(p, NE) - at(p, NW)) - at(r, S) * (at(p, SE) - at(p, SW))
           - at(r, E) * (at(p, NE) - at(p, SE)) + at(r, W) * (at(p, NW) - at(p, SW)))
    return (jpp + jpx + jxp) / (12 * h * h)


def grad_matrix(basis: SpectralBasis, forms: DiscreteForms) -> np.ndarray:
    """G[i, j] = ((e_i, e_j)) = psi_i^T Mg psi_j."""
    if basis.grid != forms.grid:
        raise ValueError("basis and forms live on different grids")
    G = basis.Psi.T @ forms.Mg @ basis.Psi
    return 0.5 * (G + G.T)


def galerkin_tensor(basis: SpectralBasis, jacobian: str = "arakawa") -> np.ndarray:
    """T[i, j, k] = h^2 sum q_i J(psi_j, psi_k); built for j < k and antisymmetrized by sign."""
    n, h = basis.n, basis.grid.h
    jj, kk = np.triu_indices(n, k=1)
    J = arakawa_jacobian(basis.psis[jj], basis.psis[kk], h, kind=jacobian)
    upper = h * h * (basis.qs.reshape(n, -1) @ J.reshape(jj.size, -1).T)
    T = np.zeros((n, n, n))
    T[:, jj, kk] = upper
    T[:, kk, jj] = -upper
    T.setflags(write=False)
    return T


def apply_B(T: np.ndarray, cu: np.ndarray, cv: np.ndarray) -> np.ndarray:
    """out[..., k] = sum_ij cu[..., i] cv[..., j] T[i, j, k]."""
    n = T.shape[0]
    cu, cv = np.asarray(cu, dtype=float), np.asarray(cv, dtype=float)
    if cu.shape[-1] != n or cv.shape[-1] != n:
        raise ValueError(f"coefficient length must be {n}")
    outer = cu[..., :, None] * cv[..., None, :]
    return outer.reshape(outer.shape[:-2] + (n * n,)) @ T.reshape(n * n, n)


# Forces -------------------------------------------------------------------------

FORCE_KINDS = ("zero", "constant", "linear", "saturating")


@dataclass(frozen=True, eq=False)
class ForceSpec:
    """External force acting on velocity fields, represented on stream functions.

    F(u) = a + gain * u / (1 + s |u|_V^2); ``constant`` has gain 0, ``linear`` has
    s = 0, ``zero`` has neither. The map u -> u / (1 + s |u|_V^2) has derivative
    norm at most 1 in V (its eigenvalues are 1/(1+s r^2) across u and
    (1 - s r^2)/(1 + s r^2)^2 along u), so C_F = |gain| for every kind.
    """

    kind: str
    a: np.ndarray | None = None  # flattened stream function of F(0)
    gain: float = 0.0
    s: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.kind not in FORCE_KINDS:
            raise ValueError(f"unknown force kind {self.kind!r}")
        if self.kind == "zero" and (self.a is not None or self.gain != 0.0):
            raise ValueError("zero force carries no data")
        if self.kind == "constant" and self.gain != 0.0:
            raise ValueError("constant force has no gain")
        if self.kind == "saturating" and not self.s > 0:
            raise ValueError("saturating force needs s > 0")
        if self.kind != "saturating" and self.s != 0.0:
            raise ValueError("only the saturating force uses s")
        if self.a is not None:
            self.a.setflags(write=False)

    @property
    def C_F(self) -> float:
        return abs(self.gain)

    @property
    def has_constant(self) -> bool:
        return self.a is not None and bool(np.any(self.a))

    def F0_normV(self, forms: DiscreteForms) -> float:
        if self.a is None:
            return 0.0
        return float(np.sqrt(self.a @ forms.MV @ self.a))

    def evaluate(self, psi: np.ndarray, forms: DiscreteForms) -> np.ndarray:
        """Stream function of F(u) for flattened stream function(s) psi (batch axes allowed)."""
        psi = np.asarray(psi, dtype=float)
        out = np.zeros_like(psi)
        if self.gain != 0.0:
            if self.kind == "saturating":
                r2 = np.einsum("...i,...i->...", psi @ forms.MV, psi)
                out = out + self.gain * psi / (1.0 + self.s * r2)[..., None]
            else:
                out = out + self.gain * psi
        if self.a is not None:
            out = out + self.a
        return out

    def derivative(self, psi: np.ndarray, dpsi: np.ndarray, forms: DiscreteForms) -> np.ndarray:
        """DF(u) applied to a direction, both given as flattened stream functions."""
        psi, dpsi = np.asarray(psi, dtype=float), np.asarray(dpsi, dtype=float)
        if self.gain == 0.0:
            return np.zeros(np.broadcast_shapes(psi.shape, dpsi.shape))
        if self.kind != "saturating":
            return self.gain * dpsi
        Mpsi = psi @ forms.MV
        r2 = np.einsum("...i,...i->...", Mpsi, psi)[..., None]
        uh = np.einsum("...i,...i->...", Mpsi, dpsi)[..., None]
        d = 1.0 + self.s * r2
        return self.gain * (dpsi / d - 2.0 * self.s * uh * psi / d**2)


def zero_force() -> ForceSpec:
    return ForceSpec("zero", label="zero")


def constant_force(a: np.ndarray, label: str = "constant") -> ForceSpec:
    return ForceSpec("constant", a=np.array(a, dtype=float).reshape(-1), label=label)


def linear_force(gain: float, a: np.ndarray | None = None, label: str = "linear") -> ForceSpec:
    a = None if a is None else np.array(a, dtype=float).reshape(-1)
    return ForceSpec("linear", a=a, gain=float(gain), label=label)


def saturating_force(gain: float, s: float, a: np.ndarray | None = None,
                     label: str = "saturating") -> ForceSpec:
    a = None if a is None else np.array(a, dtype=float).reshape(-1)
    return ForceSpec("saturating", a=a, gain=float(gain), s=float(s), label=label)


def force_coeffs(F: ForceSpec, c: np.ndarray, Q, basis: SpectralBasis,
                 forms: DiscreteForms) -> np.ndarray:
    """out[k] = Q^{-1} (F(Q u), e_k) with u = sum c_i e_i, via the grid."""
    Q = np.asarray(Q, dtype=float)
    if np.any(Q <= 0):
        raise ValueError("Q must be positive")
    Qc = Q[..., None] if Q.ndim else Q
    psi = basis.stream(np.asarray(c, dtype=float) * Qc)
    f = F.evaluate(psi, forms)
    return (f @ forms.M0 @ basis.Psi) / Qc


def lipschitz_probe(F: ForceSpec, forms: DiscreteForms, trials: int = 1000, seed: int = 0) -> float:
    """Largest observed |F(u1) - F(u2)|_V / |u1 - u2|_V over random pairs.

    Half of the pairs are far apart, half are close (probing the derivative);
    amplitudes are spread over several decades around the saturation scale.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    dim = forms.grid.size
    scale = 1.0 / np.sqrt(F.s) if F.s > 0 else 1.0

    def vnorm(p):
        return np.sqrt(np.einsum("...i,...i->...", p @ forms.MV, p))

    u1 = rng.standard_normal((trials, dim))
    u1 *= (scale * 10.0 ** rng.uniform(-2, 2, trials) / vnorm(u1))[:, None]
    d = rng.standard_normal((trials, dim))
    size = np.where(np.arange(trials) % 2 == 0, 1.0, 1e-4) * scale * 10.0 ** rng.uniform(-1, 1, trials)
    d *= (size / vnorm(d))[:, None]
    u2 = u1 + d
    num = vnorm(F.evaluate(u1, forms) - F.evaluate(u2, forms))
    return float(np.max(num / vnorm(u1 - u2)))


# Assembled model ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GalerkinModel:
    """Everything the reduced equations need for one (N, alpha, n)."""

    forms: DiscreteForms
    basis: SpectralBasis
    G: np.ndarray
    T: np.ndarray
    P2: float
    jacobian: str = "arakawa"
    _force_cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> DomainGrid:
        return self.forms.grid

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def lambdas(self) -> np.ndarray:
        return self.basis.lambdas

    @cached_property
    def P0(self) -> np.ndarray:
        """Matrix of the L^2 pairing (e_i, e_j)."""
        P = self.basis.Psi
        M = P.T @ self.forms.M0 @ P
        return 0.5 * (M + M.T)

    def _constant_part(self, F: ForceSpec) -> np.ndarray:
        key = id(F)
        hit = self._force_cache.get(key)
        if hit is None or hit[0] is not F:
            b = np.zeros(self.n) if F.a is None else self.basis.Psi.T @ (self.forms.M0 @ F.a)
            hit = (F, b)
            self._force_cache[key] = hit
        return hit[1]

    def force(self, F: ForceSpec, c: np.ndarray, Q) -> np.ndarray:
        """force_coeffs with closed forms for the affine kinds."""
        if F.kind == "saturating":
            return force_coeffs(F, c, Q, self.basis, self.forms)
        Q = np.asarray(Q, dtype=float)
        Qc = Q[..., None] if Q.ndim else Q
        out = np.zeros(np.shape(c)) + self._constant_part(F) / Qc
        if F.gain != 0.0:
            out = out + F.gain * (np.asarray(c) @ self.P0)
        return out

    def force_derivative(self, F: ForceSpec, c: np.ndarray, Q, z: np.ndarray) -> np.ndarray:
        """Coefficients of (DF(Q u) w, e_k) for u = sum c_i e_i and w = sum z_i e_i."""
        if F.gain == 0.0:
            return np.zeros(np.broadcast_shapes(np.shape(c), np.shape(z)))
        if F.kind != "saturating":
            return F.gain * (np.asarray(z) @ self.P0)
        Q = np.asarray(Q, dtype=float)
        Qc = Q[..., None] if Q.ndim else Q
        psi = self.basis.stream(np.asarray(c) * Qc)
        dpsi = self.basis.stream(z)
        return F.derivative(psi, dpsi, self.forms) @ self.forms.M0 @ self.basis.Psi

    def content_key(self) -> str:
        return f"N{self.grid.N}_a{self.grid.alpha!r}_n{self.n}_{self.jacobian}_{self.basis.content_hash()[:16]}"


def _load_or_build_tensor(basis: SpectralBasis, jacobian: str, cache_dir) -> np.ndarray:
    if cache_dir is None:
        return galerkin_tensor(basis, jacobian)
    digest = basis.content_hash()
    path = Path(cache_dir) / f"tensor_N{basis.grid.N}_a{basis.grid.alpha!r}_n{basis.n}_{jacobian}_{digest[:16]}.npz"
    if path.exists():
        with np.load(path) as data:
            if str(data["basis_sha256"]) == digest:
                T = data["T"].copy()
                if hashlib.sha256(T.tobytes()).hexdigest() == str(data["sha256"]):
                    T.setflags(write=False)
                    return T
    T = galerkin_tensor(basis, jacobian)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, T=T, basis_sha256=digest, sha256=hashlib.sha256(T.tobytes()).hexdigest())
    return T


def build_model(N: int, alpha: float, n: int, jacobian: str = "arakawa",
                cache_dir: str | None = None) -> GalerkinModel:
    return _build_model(int(N), float(alpha), int(n), jacobian,
                        None if cache_dir is None else str(cache_dir))


@lru_cache(maxsize=16)
def _build_model(N, alpha, n, jacobian, cache_dir):
    forms = assemble_forms(DomainGrid(N, alpha))
    basis = cached_eigenbasis(forms, n, cache_dir)
    G = grad_matrix(basis, forms)
    G.setflags(write=False)
    T = _load_or_build_tensor(basis, jacobian, cache_dir)
    P2 = poincare_constant(forms).P2
    return GalerkinModel(forms=forms, basis=basis, G=G, T=T, P2=P2, jacobian=jacobian)
