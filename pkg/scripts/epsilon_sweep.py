"""Distance of the noisy attractor clouds to the deterministic one as eps -> 0.

    python scripts/epsilon_sweep.py [--seeds 1 2 3] [--out DIR]

Several seeds give one curve each; no almost-sure statement is drawn from them.
"""
import argparse
from pathlib import Path

import numpy as np

from secondgrade import reference as ref
from secondgrade.attractor import epsilon_continuity, epsilon_sweep
from secondgrade.noise import NoiseConfig, sample_path
from secondgrade.operators import build_model
from secondgrade.solver import SolverConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[ref.SEED])
    ap.add_argument("--out", default="results/sweep")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model = build_model(ref.N_GRID, ref.ALPHA, ref.N_MODES)
    cfg = SolverConfig(nu=ref.NU, alpha=ref.ALPHA, epsilon=ref.EPSILON)
    force = ref.make_force(model)
    rows = []
    for seed in args.seeds:
        path = sample_path(NoiseConfig(epsilon=ref.EPSILON, seed=seed))
        rep = epsilon_sweep(ref.EPS_LIST, path, force, cfg, ref.PULLBACK_TIMES, 1e-4, model=model)
        cont = epsilon_continuity((0.2, 0.1, 0.05), 0.0, ref.datum(model, 2.0), 2.0, path, cfg, force,
                                  model=model)
        print(f"seed {seed}: d =", " ".join(f"{d:.3e}" for d in rep.distances),
              "| continuity ratios", " ".join(f"{r:.4f}" for r in cont.ratios))
        rows.extend((seed, e, d) for e, d in zip(rep.eps_values, rep.distances))
    np.savetxt(out / "sweep.csv", rows, delimiter=",", header="seed,eps,distance_W", fmt="%.17g")


if __name__ == "__main__":
    main()
