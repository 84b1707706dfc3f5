"""Experiment drivers: perturbed sphere, convergence study, mesh sequences."""
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateLevels
from .evolution import (
    EvolutionState,
    NormalVelocitySpec,
    area_conserving_velocity,
    init_curvature,
    mesh_move_step,
    perturbed_sphere_forcing,
    preprocess_sequence,
)
from .fem import DiscreteField, ScalarSpace, interpolate
from .mesh import load_mesh, load_mesh_sequence, make_icosphere, mesh_size
from .navier_stokes import (
    FlowState,
    NSParams,
    div_error,
    kinetic_energy,
    normal_error,
    normal_velocity,
    ns_step,
    random_velocity,
    zero_state,
)
from .output import CsvWriter, DiagnosticsRow, write_vtk

logger = logging.getLogger(__name__)


def _sphere_normal(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def ns_params(cfg, exact_normal=None):
    return NSParams(
        Re=cfg.Re,
        tau=cfg.tau,
        beta0=cfg.beta0,
        project_w=cfg.project_w,
        exact_normal=exact_normal if cfg.exact_normal else None,
    )


def initial_mesh(cfg):
    if cfg.mesh:
        return load_mesh(cfg.mesh, cfg.order)
    return make_icosphere(cfg.level, cfg.order)


def initial_flow(mesh, cfg, params):
    if cfg.initial == "random":
        return random_velocity(mesh, cfg.seed, params, degree=cfg.degree)
    return zero_state(mesh)


class RunRecorder:
    """Collects diagnostics rows and writes CSV/VTK output per the config."""

    def __init__(self, cfg, name="diagnostics"):
        self.cfg = cfg
        self.rows = []
        self.out = Path(cfg.output_dir) if cfg.output_dir else None
        self.csv = None
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            (self.out / "config.txt").write_text(cfg.dumps(), encoding="utf-8")
            if "csv" in cfg.format_list:
                self.csv = CsvWriter(self.out / f"{name}.csv")

    def row(self, n, t, flow, V, area, iterations, residual, div_res, wall):
        d = self.cfg.degree
        row = DiagnosticsRow(
            n=n,
            t=t,
            E_kin=kinetic_energy(flow.u, d),
            area=area,
            div_error=div_error(flow.u, d),
            normal_error=normal_error(flow.u, V, d),
            fp_iterations=iterations,
            fp_residual=residual,
            div_residual=div_res,
            wall_time_ms=wall if self.cfg.timing else 0.0,
        )
        self.rows.append(row)
        if self.csv is not None:
            self.csv.write(row)
        return row

    def snapshot(self, n, mesh, fields):
        if self.out is None or "vtk" not in self.cfg.format_list:
            return
        if n % self.cfg.cadence == 0 or n == self.cfg.n_steps:
            write_vtk(mesh, fields, self.out / f"fields_{n:06d}.vtk")

    def close(self):
        if self.csv is not None:
            self.csv.close()


@dataclass
class RunResult:
    rows: list
    mesh: object
    flow: FlowState
    h: float
    area0: float


def run_perturbed_sphere(cfg, forcing=perturbed_sphere_forcing, flow0=None):
    """Evolve the surface with V0 = alpha H + forcing and solve the flow on it."""
    cfg = cfg.validate()
    deg = cfg.degree
    mesh = initial_mesh(cfg)
    h0 = mesh_size(mesh)
    params = ns_params(cfg, _sphere_normal)
    spec = NormalVelocitySpec(alpha=cfg.alpha, forcing=forcing)
    evo = EvolutionState(mesh, init_curvature(mesh, degree=deg), 0.0)
    flow = flow0 if flow0 is not None else initial_flow(mesh, cfg, params)
    area0 = mesh.area(deg)
    rec = RunRecorder(cfg)
    try:
        V = DiscreteField.zeros(ScalarSpace(mesh, mesh.order))
        rec.row(0, 0.0, flow, V, area0, 0, 0.0, 0.0, 0.0)
        rec.snapshot(0, mesh, {"u": flow.u, "p": flow.p, "H": evo.H})
        for n in range(1, cfg.n_steps + 1):
            start = time.perf_counter()
            res = mesh_move_step(
                evo, spec, cfg.tau, cfg.epsilon, cfg.max_iter, deg,
                area_mode=cfg.area_mode, target_area=area0,
            )
            t_new = n * cfg.tau
            evo = EvolutionState(res.mesh, res.H, t_new)
            if cfg.analytic_V:
                V0 = interpolate(
                    ScalarSpace(res.mesh, res.mesh.order),
                    lambda x: forcing(x, t_new) if forcing else np.zeros(len(x)),
                )
                V0 = DiscreteField(V0.space, V0.values + cfg.alpha * res.H.values)
                V = area_conserving_velocity(V0, res.H, deg)
            else:
                V = normal_velocity(res.mesh, res.Y, cfg.tau, deg)
            flow, nss = ns_step(flow, res.mesh, res.Y, V, params, deg, return_system=True)
            flow.t = t_new
            wall = 1e3 * (time.perf_counter() - start)
            rec.row(n, t_new, flow, V, res.mesh.area(deg), res.iterations, res.residual,
                    nss.divergence_residual(flow.u), wall)
            rec.snapshot(n, res.mesh, {"u": flow.u, "p": flow.p, "H": res.H})
            logger.info("step %d t=%.4f E_kin=%.6e", n, t_new, rec.rows[-1].E_kin)
    finally:
        rec.close()
    return RunResult(rec.rows, evo.mesh, flow, h0, area0)


@dataclass
class ConvergenceTable:
    levels: list
    h: list
    e_div: list
    e_N: list
    eoc_div: list
    eoc_N: list

    def format(self):
        lines = ["level h e_div eoc_div e_N eoc_N"]
        for i, lvl in enumerate(self.levels):
            ed = "-" if i == 0 else f"{self.eoc_div[i - 1]:.3f}"
            en = "-" if i == 0 else f"{self.eoc_N[i - 1]:.3f}"
            lines.append(
                f"{lvl} {self.h[i]:.6e} {self.e_div[i]:.6e} {ed} {self.e_N[i]:.6e} {en}"
            )
        return "\n".join(lines)


def eoc(errors, hs):
    return [
        float(np.log(errors[i] / errors[i + 1]) / np.log(hs[i] / hs[i + 1]))
        for i in range(len(errors) - 1)
    ]


def run_convergence(cfg, levels):
    """Run the perturbed sphere on each level; L-inf-in-time errors and their EOCs."""
    levels = list(levels)
    if len(set(levels)) != len(levels):
        raise DegenerateLevels(f"refinement levels must be distinct, got {levels}")
    if len(levels) < 3:
        raise ConfigError(f"a convergence study needs at least 3 levels, got {levels}")
    hs, ediv, en = [], [], []
    for lvl in levels:
        sub = cfg.replace(
            level=lvl, mesh="",
            output_dir=str(Path(cfg.output_dir) / f"level{lvl}") if cfg.output_dir else "",
        )
        res = run_perturbed_sphere(sub)
        steps = res.rows[1:]
        hs.append(res.h)
        ediv.append(max(r.div_error for r in steps))
        en.append(max(r.normal_error for r in steps))
        logger.info("level %d: h=%.4e e_div=%.4e e_N=%.4e", lvl, res.h, ediv[-1], en[-1])
    if len(set(hs)) != len(hs):
        raise DegenerateLevels("levels produced identical mesh sizes")
    table = ConvergenceTable(levels, hs, ediv, en, eoc(ediv, hs), eoc(en, hs))
    if cfg.output_dir:
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.output_dir) / "convergence.txt").write_text(table.format() + "\n")
    return table


def sequence_paths(directory):
    d = Path(directory)
    if not d.is_dir():
        raise ConfigError(f"sequence directory {d} does not exist")
    paths = sorted(p for p in d.iterdir() if p.suffix.lower() in (".off", ".obj"))
    if len(paths) < 2:
        raise ConfigError(f"sequence directory {d} needs at least two mesh files")
    return paths


def run_sequence(cfg, meshes=None):
    """Flow driven by a mesh sequence: V^n = (X^n - X^{n-1}) . nu / tau."""
    cfg = cfg.validate()
    deg = cfg.degree
    if meshes is None:
        meshes = load_mesh_sequence(sequence_paths(cfg.sequence), cfg.order)
    frames = preprocess_sequence(meshes, cfg.epsilon, cfg.max_iter, deg, conserve=cfg.area_mode)
    mesh = frames[0]
    params = ns_params(cfg)
    flow = initial_flow(mesh, cfg, params)
    space = ScalarSpace(mesh, mesh.order)
    rec = RunRecorder(cfg)
    try:
        rec.row(0, 0.0, flow, None, mesh.area(deg), 0, 0.0, 0.0, 0.0)
        rec.snapshot(0, mesh, {"u": flow.u, "p": flow.p})
        for n, (prev, cur) in enumerate(zip(frames[:-1], frames[1:]), start=1):
            start = time.perf_counter()
            Y = DiscreteField(space.on(cur), cur.nodes - prev.nodes)
            V = normal_velocity(cur, Y, cfg.tau, deg)
            flow, nss = ns_step(flow, cur, Y, V, params, deg, return_system=True)
            flow.t = n * cfg.tau
            wall = 1e3 * (time.perf_counter() - start)
            rec.row(n, flow.t, flow, V, cur.area(deg), 0, 0.0,
                    nss.divergence_residual(flow.u), wall)
            rec.snapshot(n, cur, {"u": flow.u, "p": flow.p})
    finally:
        rec.close()
    return RunResult(rec.rows, frames[-1], flow, mesh_size(frames[0]), frames[0].area(deg))
