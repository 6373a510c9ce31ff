"""Command line driver: ``secondgrade <kind> [--config FILE] [--seed S] [--out DIR]``.

Configuration files hold one ``key = value`` per line; ``#`` starts a comment.
Every key of :class:`RunConfig` may appear; anything else is an error. Outputs
are CSV files (``,`` delimiter, 17 significant digits) and JSON summaries, each
carrying the full configuration echo. Nothing time- or host-dependent is
written, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import reference as ref
from .attractor import (attractor_estimate, check_f3, default_probe_set, epsilon_continuity,
                        epsilon_sweep, pullback_ensemble, radius)
from .diagnostics import energy_residual_u, energy_residual_v, tensor_w_defect
from .discretization import gram_matrices, poincare_constant
from .linearization import fd_derivative_check, integrate_tangent
from .noise import NoiseConfig, sample_path
from .operators import build_model, zero_force
from .solver import (SolverConfig, cocycle_check, conjugation_check, integrate, reconstruct_u)

KINDS = ("simulate", "verify", "linearize", "pullback", "attractor", "sweep")
NEEDS_DISSIPATIVITY = ("pullback", "attractor", "sweep")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


@dataclass(frozen=True)
class RunConfig:
    kind: str = "simulate"
    out: str = "out"
    seed: int = ref.SEED
    # solver
    nu: float = ref.NU
    alpha: float = ref.ALPHA
    epsilon: float = ref.EPSILON
    n: int = ref.N_MODES
    N: int = ref.N_GRID
    dt: float = ref.DT
    t_start: float = 0.0
    t_end: float = 1.0
    integrator: str = "rk4"
    nonlinear: bool = True
    jacobian: str = "arakawa"
    # noise path
    t_min: float = ref.T_MIN
    t_max: float = ref.T_MAX
    path_dt: float = ref.DT
    # force
    force: str = "constant"
    force_amp: float = ref.FORCE_AMP
    force_gain: float = 0.0
    force_s: float = 1.0
    # initial datum (W-norm of the reference smooth field)
    init_amp: float = 1.0
    dump_coefficients: bool = False
    # experiment parameters
    t_lin: float = 0.5
    fd_h: tuple = (1e-2, 3e-3, 1e-3, 3e-4)
    t_list: tuple = ref.PULLBACK_TIMES
    T_tail: float = 20.0
    tol: float = 1e-4
    eps_list: tuple = ref.EPS_LIST

    @property
    def deterministic(self) -> bool:
        return self.epsilon == 0.0

    def solver_config(self) -> SolverConfig:
        return SolverConfig(nu=self.nu, alpha=self.alpha, epsilon=self.epsilon, n=self.n, N=self.N,
                            dt=self.dt, t_span=(self.t_start, self.t_end), integrator=self.integrator,
                            nonlinear=self.nonlinear, jacobian=self.jacobian)

    def noise_config(self) -> NoiseConfig:
        return NoiseConfig(epsilon=self.epsilon, seed=self.seed, t_min=self.t_min,
                           t_max=self.t_max, dt=self.path_dt)

    def validate(self, check_dissipativity: bool = True) -> "RunConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        try:
            self.solver_config()
            self.noise_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.force not in ("zero", "constant", "linear", "saturating"):
            raise ConfigError(f"unknown force {self.force!r}")
        if self.force in ("zero", "constant") and self.force_gain != 0.0:
            raise ConfigError(f"force_gain must be 0 for the {self.force} force")
        if not (self.t_min <= self.t_start <= self.t_end <= self.t_max):
            raise ConfigError("simulation interval must lie inside the noise window")
        if check_dissipativity and self.kind in NEEDS_DISSIPATIVITY:
            if self.nu <= 0:
                raise ConfigError("attractor experiments need nu > 0")
            P2 = poincare_constant(build_model(self.N, self.alpha, self.n, self.jacobian).forms).P2
            try:
                check_f3(abs(self.force_gain), self.nu, P2)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            if -max(max(self.t_list), self.T_tail) < self.t_min:
                raise ConfigError("pullback times reach beyond the stored noise window")
        return self


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name: str, text: str):
    default = _FIELDS[name].default
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{name}: expected a boolean, got {text!r}")
        return low in ("true", "1", "yes")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return _floats(text)
    return text


def parse_config(text: str, **overrides) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(cfg))


# Output helpers ---------------------------------------------------------------------


def _echo(cfg: RunConfig) -> str:
    # The output directory is left out so that reruns elsewhere stay byte-identical.
    return "".join(f"# {line}\n" for line in serialize_config(cfg).splitlines()
                   if not line.startswith("out ="))


def write_csv(path: Path, cfg: RunConfig, header, rows) -> None:
    lines = [_echo(cfg), ",".join(header) + "\n"]
    lines.extend(",".join(f"{x:.17g}" for x in row) + "\n" for row in np.atleast_2d(rows))
    path.write_text("".join(lines))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def write_json(path: Path, cfg: RunConfig, payload: dict) -> None:
    doc = {"config": {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "out"},
           "deterministic": cfg.deterministic, "seed": cfg.seed}
    doc.update(payload)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


# Experiments ------------------------------------------------------------------------


def _setup(cfg: RunConfig):
    scfg = cfg.solver_config()
    model = scfg.model()
    path = sample_path(cfg.noise_config())
    force = ref.make_force(model, cfg.force, cfg.force_amp, cfg.force_gain, cfg.force_s)
    f = ref.datum(model, cfg.init_amp)
    return scfg, model, path, force, f


def run_simulate(cfg, out):
    scfg, model, path, force, f = _setup(cfg)
    traj = integrate(f, scfg, path, force, model=model)
    lam = model.lambdas
    vV = np.sqrt(traj.v_norm_sq())
    vW = np.sqrt(traj.w_norm_sq())
    cols = [traj.times, vV, vW, traj.Q]
    header = ["t", "v_norm_V", "v_norm_W", "Q"]
    if cfg.dump_coefficients:
        cols.extend(traj.coeffs.T)
        header.extend(f"c_{i + 1}" for i in range(model.n))
    write_csv(out / "trajectory.csv", cfg, header, np.column_stack(cols))
    ev = energy_residual_v(traj, path, force, scfg, model=model)
    eu = energy_residual_u(reconstruct_u(traj), path, cfg.epsilon, force, scfg, model=model)
    consistency = float(np.max(np.abs(eu.residual - traj.Q ** 2 * ev.residual))
                        / max(np.max(np.abs(eu.w_norm_sq)), 1e-300))
    write_json(out / "summary.json", cfg, {
        "experiment": "simulate", "steps": int(traj.times.size - 1), "lambdas": lam,
        "final_v_norm_W": vW[-1], "final_Q": traj.Q[-1],
        "energy_residual_v": ev.max_rel_residual, "energy_residual_u": eu.max_rel_residual,
        "residual_u_vs_Q2_residual_v": consistency})
    return 0


def _verify_checks(cfg: RunConfig):
    """List of (name, value, tolerance); a check passes when value <= tolerance."""
    scfg, model, path, force, f = _setup(cfg)
    checks = []
    T = model.T
    checks.append(("tensor_antisymmetry", float(np.max(np.abs(T + T.transpose(0, 2, 1))) / np.max(np.abs(T))), 1e-13))
    Gw, Gv = gram_matrices(model.basis, model.forms)
    checks.append(("gram_W", float(np.max(np.abs(Gw - np.eye(model.n)))), 1e-10))
    checks.append(("gram_V", float(np.max(np.abs(Gv - np.diag(1 / model.lambdas)))), 1e-10))
    checks.append(("resolvent_identity", poincare_constant(model.forms).identity_residual, 1e-10))
    checks.append(("tensor_W_defect", tensor_w_defect(model), 1e-11))
    for eps in sorted({0.0, cfg.epsilon}):
        c = scfg.with_(epsilon=eps)
        checks.append((f"cocycle_eps{eps:g}", cocycle_check(f, 0.5, 0.5, path, c, force, model), 1e-6))
        checks.append((f"conjugation_eps{eps:g}", conjugation_check(f, 0.5, 0.5, path, c, force, model), 1e-6))
    inv = scfg.with_(nu=0.0, t_span=(0.0, 1.0))
    e = integrate(ref.datum(model, 200.0), inv, path, zero_force(), model=model).v_norm_sq()
    checks.append(("v_energy_drift", float(np.max(np.abs(e - e[0])) / e[0]), 1e-8))
    traj = integrate(f, scfg.with_(t_span=(0.0, 1.0)), path, force, model=model)
    ev = energy_residual_v(traj, path, force, scfg, model=model)
    eu = energy_residual_u(reconstruct_u(traj), path, cfg.epsilon, force, scfg, model=model)
    checks.append(("residual_u_vs_Q2_residual_v",
                   float(np.max(np.abs(eu.residual - traj.Q ** 2 * ev.residual)) / np.max(eu.w_norm_sq)), 1e-12))
    g = np.zeros(model.n)
    g[0] = 1.0
    z1, _ = integrate_tangent(np.stack([g, 2 * g]), f, scfg, path, force, cfg.t_lin, model)
    checks.append(("tangent_homogeneity", float(np.linalg.norm(z1.z[1] - 2 * z1.z[0]) / np.linalg.norm(z1.z[1])), 1e-10))
    return checks


def run_verify(cfg, out):
    checks = _verify_checks(cfg)
    rows = [{"name": n, "value": v, "tolerance": t, "passed": bool(v <= t)} for n, v, t in checks]
    ok = all(r["passed"] for r in rows)
    write_json(out / "verify.json", cfg, {"experiment": "verify", "checks": rows, "passed": ok})
    for r in rows:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['value']:.3e} (tol {r['tolerance']:.0e})")
    return 0 if ok else 1


def run_linearize(cfg, out):
    scfg, model, path, force, f = _setup(cfg)
    g = ref.datum(model, 1.0)[::-1].copy()
    rep = fd_derivative_check(f, g, cfg.t_lin, cfg.fd_h, scfg, path, force, model)
    write_csv(out / "fd_errors.csv", cfg, ["h", "error_V"], np.column_stack([rep.h, rep.errors]))
    write_json(out / "linearize.json", cfg, {"experiment": "linearize", "order": rep.order,
                                              "z_norm_V": rep.z_norm_v, "h": rep.h, "errors": rep.errors})
    return 0


def run_pullback(cfg, out):
    scfg, model, path, force, _ = _setup(cfg)
    probes = default_probe_set(model.n)
    rep = radius(path, scfg, force, cfg.T_tail, probes, model)
    rows = []
    for t in cfg.t_list:
        states = pullback_ensemble(probes, t, path, scfg, force, model)
        rows.append([t, float(np.max(np.sum(states ** 2, axis=-1)))])
    write_csv(out / "pullback.csv", cfg, ["t", "max_u_W_sq"], rows)
    write_json(out / "radius.json", cfg, {"experiment": "pullback",
                                           **dataclasses.asdict(rep)})
    return 0


def run_attractor(cfg, out):
    scfg, model, path, force, _ = _setup(cfg)
    est = attractor_estimate(path, scfg, force, cfg.t_list, cfg.tol, model=model)
    write_csv(out / "attractor.csv", cfg, [f"c_{i + 1}" for i in range(model.n)], est.points)
    write_json(out / "attractor.json", cfg, {
        "experiment": "attractor", "note": "finite inner approximation by pullback images",
        "pullback_times": est.pullback_times, "cauchy_gaps": est.gaps, "converged": est.converged})
    return 0 if est.converged else 2


def run_sweep(cfg, out):
    scfg, model, path, force, f = _setup(cfg)
    rep = epsilon_sweep(cfg.eps_list, path, force, scfg, cfg.t_list, cfg.tol, model=model)
    cont = epsilon_continuity(cfg.eps_list, 0.0, f, cfg.t_list[0], path, scfg, force, model=model)
    write_json(out / "sweep.json", cfg, {
        "experiment": "sweep", "eps_values": rep.eps_values, "distances": rep.distances,
        "continuity_distances": cont.distances, "continuity_ratios": cont.ratios})
    return 0


RUNNERS = {"simulate": run_simulate, "verify": run_verify, "linearize": run_linearize,
           "pullback": run_pullback, "attractor": run_attractor, "sweep": run_sweep}


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text("".join(line + "\n" for line in serialize_config(cfg).splitlines()
                                            if not line.startswith("out =")))
    return RUNNERS[cfg.kind](cfg, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="secondgrade", description=__doc__.splitlines()[0])
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", type=Path)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--dump-coefficients", action="store_true", default=None)
    args = parser.parse_args(argv)
    text = args.config.read_text() if args.config else ""
    try:
        cfg = parse_config(text, kind=args.kind, seed=args.seed, out=args.out,
                           dump_coefficients=args.dump_coefficients)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except (ValueError, FloatingPointError, RuntimeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
