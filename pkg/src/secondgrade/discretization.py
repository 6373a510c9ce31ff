"""Stream-function discretization of the spaces V and W on the unit square.

Divergence-free velocities with no-slip walls are perpendicular gradients
u = (d_y psi, -d_x psi) of clamped stream functions (psi = d_n psi = 0 on the
wall). Every pairing is therefore a quadratic form on the N x N interior values
of psi, flattened in C order (index i*N + j, x = (i+1)h, y = (j+1)h):

    (u, v)      = int grad psi . grad phi       -> M0 = h^2 L
    ((u, v))    = int lap psi  lap phi          -> Mg = h^2 Bih
    (u, v)_V    = (u, v) + alpha ((u, v))       -> MV = M0 + alpha Mg = h^2 A
    (u, v)_W    = int q_u q_v,  q = A psi       -> MW = h^2 A^2

with L the 5-point Dirichlet -lap, Bih the clamped biharmonic and
A = L + alpha Bih. Bih is built as D^T Wt D where D evaluates the 5-point
Laplacian at every node of the closed grid (wall nodes included, ghost values
reflected so that d_n psi = 0) and Wt are trapezoid weights. This is the usual
13-point stencil with ghost reflection, written as a Gram matrix so that it is
symmetric positive definite by construction.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class DomainGrid:
    N: int
    alpha: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4:
            raise ValueError(f"need an integer N >= 4, got {self.N}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def h(self) -> float:
        return 1.0 / (self.N + 1)

    @property
    def size(self) -> int:
        return self.N * self.N

    def mesh(self):
        """Interior node coordinates (X, Y), ij-indexed."""
        x = self.h * np.arange(1, self.N + 1)
        return np.meshgrid(x, x, indexing="ij")


def _second_difference(N: int, h: float) -> np.ndarray:
    return (2.0 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)) / h**2


def _wall_laplacian_1d(N: int, h: float) -> np.ndarray:
    """(N+2) x N map from interior values to psi'' on the closed 1D grid.

    Wall rows use the reflected ghost value psi_{-1} = psi_1, so psi'' = 2 psi_1 / h^2.
    """
    S = np.zeros((N + 2, N))
    S[1:-1] = -_second_difference(N, h)
    S[0, 0] = 2.0 / h**2
    S[-1, -1] = 2.0 / h**2
    return S


@dataclass(frozen=True, eq=False)
class DiscreteForms:
    grid: DomainGrid
    L: np.ndarray
    Bih: np.ndarray
    M0: np.ndarray
    Mg: np.ndarray
    MV: np.ndarray
    MW: np.ndarray

    @property
    def alpha(self) -> float:
        return self.grid.alpha

    @cached_property
    def A(self) -> np.ndarray:
        """Potential-vorticity operator psi -> q = (L + alpha Bih) psi."""
        return self.L + self.alpha * self.Bih


def assemble_sparse(grid: DomainGrid):
    """Sparse (L, Bih) for the given grid; the dense forms are built from these."""
    N, h = grid.N, grid.h
    I = sp.identity(N, format="csr")
    T = sp.csr_matrix(_second_difference(N, h))
    L = sp.kron(T, I) + sp.kron(I, T)
    S = sp.csr_matrix(_wall_laplacian_1d(N, h))
    zero = sp.csr_matrix((1, N))
    E = sp.vstack([zero, I, zero])
    D = (sp.kron(S, E) + sp.kron(E, S)).tocsr()
    w = np.ones(N + 2)
    w[[0, -1]] = 0.5
    Bih = D.T @ sp.diags(np.kron(w, w)) @ D
    return L.tocsr(), Bih.tocsr()


def assemble_forms(grid: DomainGrid) -> DiscreteForms:
    h, alpha = grid.h, grid.alpha
    Ls, Bs = assemble_sparse(grid)
    L = Ls.toarray()
    Bih = Bs.toarray()
    Bih = 0.5 * (Bih + Bih.T)
    A = L + alpha * Bih
    M0 = h**2 * L
    Mg = h**2 * Bih
    MV = M0 + alpha * Mg
    MW = h**2 * (A @ A)
    MW = 0.5 * (MW + MW.T)
    for M in (L, Bih, M0, Mg, MV, MW):
        M.setflags(write=False)
    return DiscreteForms(grid=grid, L=L, Bih=Bih, M0=M0, Mg=Mg, MV=MV, MW=MW)


def smallest_eigenvalue(grid: DomainGrid) -> float:
    """lambda_1 by sparse shift-invert on A; MW x = lambda MV x is A x = lambda x."""
    Ls, Bs = assemble_sparse(grid)
    A = (Ls + grid.alpha * Bs).tocsc()
    return float(spla.eigsh(A, k=1, sigma=0.0, which="LM", return_eigenvectors=False)[0])


def velocity_from_stream(psi: np.ndarray, h: float) -> np.ndarray:
    """u = (d_y psi, -d_x psi) by centered differences; psi is zero on the wall.

    Returns an array of shape psi.shape + (2,) holding interior velocities. Wall
    velocities are zero by the no-slip condition and are not stored.
    """
    p = np.pad(np.asarray(psi, dtype=float), [(0, 0)] * (psi.ndim - 2) + [(1, 1), (1, 1)])
    dx = (p[..., 2:, 1:-1] - p[..., :-2, 1:-1]) / (2 * h)
    dy = (p[..., 1:-1, 2:] - p[..., 1:-1, :-2]) / (2 * h)
    return np.stack([dy, -dx], axis=-1)


def divergence(u: np.ndarray, h: float) -> np.ndarray:
    """Centered divergence of an interior velocity field padded with zero wall values."""
    u1 = np.pad(u[..., 0], [(0, 0)] * (u.ndim - 3) + [(1, 1), (1, 1)])
    u2 = np.pad(u[..., 1], [(0, 0)] * (u.ndim - 3) + [(1, 1), (1, 1)])
    return ((u1[..., 2:, 1:-1] - u1[..., :-2, 1:-1])
            + (u2[..., 1:-1, 2:] - u2[..., 1:-1, :-2])) / (2 * h)


def potential_vorticity(psi: np.ndarray, forms: DiscreteForms, alpha: float | None = None):
    """q = curl(u - alpha lap u) = (L + alpha Bih) psi, returned on the grid of psi."""
    a = forms.alpha if alpha is None else alpha
    flat = np.asarray(psi, dtype=float).reshape(-1)
    q = forms.L @ flat + a * (forms.Bih @ flat)
    return q.reshape(np.shape(psi))


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """First n eigenpairs of (u, e)_W = lambda (u, e)_V, W-orthonormal."""

    grid: DomainGrid
    lambdas: np.ndarray
    psis: np.ndarray        # (n, N, N)
    velocities: np.ndarray  # (n, N, N, 2)
    qs: np.ndarray          # (n, N, N)

    @property
    def n(self) -> int:
        return self.lambdas.size

    @cached_property
    def Psi(self) -> np.ndarray:
        """Stream functions as columns, shape (N^2, n)."""
        return self.psis.reshape(self.n, -1).T.copy()

    def stream(self, c: np.ndarray) -> np.ndarray:
        """Flattened stream function sum_i c_i psi_i; c may carry leading batch axes."""
        return np.asarray(c) @ self.Psi.T

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.array([self.grid.N, self.n], dtype=np.int64).tobytes())
        h.update(np.array([self.grid.alpha], dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(self.lambdas).tobytes())
        h.update(np.ascontiguousarray(self.psis).tobytes())
        return h.hexdigest()


def _basis_from_stream(grid: DomainGrid, forms: DiscreteForms, lambdas, Psi) -> SpectralBasis:
    N = grid.N
    psis = np.ascontiguousarray(Psi.T).reshape(-1, N, N)
    qs = (forms.A @ Psi).T.reshape(-1, N, N)
    vel = velocity_from_stream(psis, grid.h)
    for a in (lambdas, psis, qs, vel):
        a.setflags(write=False)
    return SpectralBasis(grid=grid, lambdas=lambdas, psis=psis, velocities=vel, qs=qs)


def solve_eigenbasis(forms: DiscreteForms, n: int) -> SpectralBasis:
    """Generalized eigenproblem MW x = lambda MV x, scaled to unit W-norm.

    The dense solve is followed by one Rayleigh-Ritz pass in the computed
    subspace, which brings both Gram matrices to diagonal form at round-off
    level even though MW is badly conditioned.
    """
    dim = forms.grid.size
    if not 1 <= n <= dim:
        raise ValueError(f"mode count must lie in [1, {dim}], got {n}")
    try:
        _, X = sla.eigh(forms.MW, forms.MV, subset_by_index=[0, n - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise np.linalg.LinAlgError(f"generalized eigensolve failed: {exc}") from exc
    AX = forms.A @ X
    h2 = forms.grid.h**2
    Gv = h2 * (X.T @ AX)
    Gw = h2 * (AX.T @ AX)
    mu, Y = sla.eigh(0.5 * (Gw + Gw.T), 0.5 * (Gv + Gv.T))
    X = X @ Y
    lambdas = np.array(mu)
    if not np.all(lambdas > 0):
        raise np.linalg.LinAlgError("non-positive eigenvalue in the W/V problem")
    Psi = X / np.sqrt(lambdas)
    # Fix the sign so that each mode has a positive largest-magnitude entry.
    idx = np.argmax(np.abs(Psi), axis=0)
    Psi = Psi * np.sign(Psi[idx, np.arange(n)])
    return _basis_from_stream(forms.grid, forms, lambdas, Psi)


def gram_matrices(basis: SpectralBasis, forms: DiscreteForms):
    """(W-Gram, V-Gram) of the basis.

    The W-Gram is evaluated as the quadrature of q_i q_j rather than through MW,
    whose condition number is the square of that of A.
    """
    P = basis.Psi
    Q = basis.qs.reshape(basis.n, -1)
    return basis.grid.h**2 * (Q @ Q.T), P.T @ forms.MV @ P


@dataclass(frozen=True)
class PoincareReport:
    P2: float
    resolvent_norm: float
    alpha: float

    @property
    def identity_residual(self) -> float:
        return abs(self.resolvent_norm - self.P2 / (self.P2 + self.alpha))


def poincare_constant(forms: DiscreteForms) -> PoincareReport:
    """P^2 = sup |v|^2 / ||v||^2 and the norm of (I + alpha A)^{-1} on L^2, by separate solves."""
    dim = forms.grid.size
    P2 = sla.eigh(forms.M0, forms.Mg, eigvals_only=True, subset_by_index=[dim - 1, dim - 1])[0]
    res = sla.eigh(forms.M0, forms.MV, eigvals_only=True, subset_by_index=[dim - 1, dim - 1])[0]
    return PoincareReport(P2=float(P2), resolvent_norm=float(res), alpha=forms.alpha)


def curl_to_w_constant(forms: DiscreteForms) -> float:
    """sup |curl v|^2 / |v|_V^2, i.e. the largest eigenvalue of (h^2 L^2, MV)."""
    dim = forms.grid.size
    C = forms.grid.h**2 * (forms.L @ forms.L)
    return float(sla.eigh(0.5 * (C + C.T), forms.MV, eigvals_only=True,
                          subset_by_index=[dim - 1, dim - 1])[0])


def clamped_mode(kx: int, ky: int, grid: DomainGrid) -> np.ndarray:
    """Smooth clamped stream function sin(pi x) sin(kx pi x) sin(pi y) sin(ky pi y)."""
    X, Y = grid.mesh()
    return np.sin(np.pi * X) * np.sin(kx * np.pi * X) * np.sin(np.pi * Y) * np.sin(ky * np.pi * Y)


def project(psi: np.ndarray, basis: SpectralBasis, forms: DiscreteForms) -> np.ndarray:
    """Coefficients of the W-orthogonal projection of a stream function onto the basis."""
    return basis.Psi.T @ (forms.MW @ np.asarray(psi, dtype=float).reshape(-1))


def w_norm_sq(psi: np.ndarray, forms: DiscreteForms) -> float:
    flat = np.asarray(psi, dtype=float).reshape(-1)
    q = forms.A @ flat
    return float(forms.grid.h**2 * q @ q)


def v_norm_sq(psi: np.ndarray, forms: DiscreteForms) -> float:
    flat = np.asarray(psi, dtype=float).reshape(-1)
    return float(flat @ (forms.MV @ flat))


def save_basis(basis: SpectralBasis, file) -> str:
    digest = basis.content_hash()
    np.savez(file, N=basis.grid.N, alpha=basis.grid.alpha, lambdas=basis.lambdas,
             psis=basis.psis, sha256=digest)
    return digest


def load_basis(file, forms: DiscreteForms) -> SpectralBasis:
    with np.load(file) as data:
        N, alpha = int(data["N"]), float(data["alpha"])
        if N != forms.grid.N or alpha != forms.grid.alpha:
            raise ValueError("cached basis was built for a different grid")
        lambdas, psis, digest = data["lambdas"].copy(), data["psis"].copy(), str(data["sha256"])
    basis = _basis_from_stream(forms.grid, forms, lambdas, psis.reshape(lambdas.size, -1).T)
    if basis.content_hash() != digest:
        raise ValueError("basis cache is corrupt: content hash mismatch")
    return basis


def cached_eigenbasis(forms: DiscreteForms, n: int, cache_dir=None) -> SpectralBasis:
    if cache_dir is None:
        return solve_eigenbasis(forms, n)
    path = Path(cache_dir) / f"basis_N{forms.grid.N}_a{forms.alpha!r}_n{n}.npz"
    if path.exists():
        return load_basis(path, forms)
    basis = solve_eigenbasis(forms, n)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_basis(basis, path)
    return basis
