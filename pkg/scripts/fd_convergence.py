"""Finite-difference quotients of the flow map against the tangent solution.

    python scripts/fd_convergence.py [--out DIR]
"""
import argparse
from pathlib import Path

import numpy as np

from secondgrade import reference as ref
from secondgrade.discretization import clamped_mode
from secondgrade.linearization import derivative_continuity_probe, fd_derivative_check
from secondgrade.noise import NoiseConfig, sample_path
from secondgrade.operators import build_model, linear_force, saturating_force
from secondgrade.solver import SolverConfig

H_LIST = np.array([1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/fd")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model = build_model(ref.N_GRID, ref.ALPHA, ref.N_MODES)
    path = sample_path(NoiseConfig(epsilon=ref.EPSILON, seed=ref.SEED))
    cfg = SolverConfig(nu=ref.NU, alpha=ref.ALPHA, epsilon=ref.EPSILON, t_span=(0.0, 0.5))
    force = saturating_force(0.05, 1.0, 0.5 * clamped_mode(2, 1, model.grid).reshape(-1))
    f, g = ref.datum(model, 5.0), ref.datum(model, 1.0)[::-1].copy()

    rep = fd_derivative_check(f, g, 0.5, H_LIST, cfg, path, force, model)
    lin = fd_derivative_check(f, g, 0.5, H_LIST, cfg.with_(nonlinear=False), path, linear_force(0.5), model)
    print(f"fitted order {rep.order:.4f}   |z|_V = {rep.z_norm_v:.4e}")
    for h, e, el in zip(H_LIST, rep.errors, lin.errors):
        print(f"h = {h:.0e}  e(h) = {e:.3e}  linear regime e(h) = {el:.1e}")
    np.savetxt(out / "fd_errors.csv", np.column_stack([H_LIST, rep.errors, lin.errors]), delimiter=",",
               header="h,error_V,error_V_linear", fmt="%.17g")

    ks = np.array([4, 8, 16, 32, 64])
    e1 = np.eye(model.n)[0]
    d = derivative_continuity_probe(f, [f + e1 / k for k in ks], 0.5, np.eye(model.n), cfg, path, force, model)
    print("continuity probe", " ".join(f"{x:.3e}" for x in d), f"| K ~ {np.max(d * ks):.3e}")


if __name__ == "__main__":
    main()
