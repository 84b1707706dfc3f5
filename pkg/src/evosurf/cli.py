"""Command line entry point: ``evosurf {run,converge,sequence,check}``."""
import argparse
import logging
import sys

import numpy as np

from .config import load_config, parse_overrides
from .errors import ConfigError, EvosurfError

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _parse_levels(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--levels expects comma separated integers, got {text!r}") from exc


def cmd_run(cfg, args):
    from .drivers import run_perturbed_sphere

    res = run_perturbed_sphere(cfg)
    last = res.rows[-1]
    drift = abs(last.area - res.area0) / res.area0
    print(f"steps={last.n} t={last.t:.6g} E_kin={last.E_kin:.6e} "
          f"div_error={last.div_error:.3e} normal_error={last.normal_error:.3e} "
          f"area_drift={drift:.3e}")


def cmd_converge(cfg, args):
    from .drivers import run_convergence

    print(run_convergence(cfg, _parse_levels(args.levels)).format())


def cmd_sequence(cfg, args):
    from .drivers import run_sequence

    if not cfg.sequence:
        raise ConfigError("sequence requires --sequence DIR")
    res = run_sequence(cfg)
    last = res.rows[-1]
    print(f"frames={last.n + 1} E_kin={last.E_kin:.6e} div_error={last.div_error:.3e}")


def cmd_check(cfg, args):
    """Cheap self test of geometric and discrete invariants on a coarse sphere."""
    from .geometry import element_geometry
    from .mesh import make_icosphere
    from .navier_stokes import NSParams, ns_step, zero_state, kinetic_energy
    from .fem import DiscreteField, ScalarSpace

    mesh = make_icosphere(1, cfg.order)
    geo = element_geometry(mesh, cfg.degree)
    checks = []
    PP = np.einsum("eqij,eqjk->eqik", geo.P, geo.P)
    checks.append(("projection idempotent", float(np.abs(PP - geo.P).max()), 1e-12))
    Pn = np.einsum("eqij,eqj->eqi", geo.P, geo.nu)
    checks.append(("P nu = 0", float(np.abs(Pn).max()), 1e-12))
    Bn = np.einsum("eqij,eqj->eqi", geo.B, geo.nu)
    checks.append(("B nu = 0", float(np.abs(Bn).max()), 1e-10))
    checks.append(("B symmetric", float(np.abs(geo.B - np.swapaxes(geo.B, -1, -2)).max()), 1e-10))
    area_err = abs(geo.integrate(np.ones_like(geo.sqrt_det_g)) - 4 * np.pi) / (4 * np.pi)
    checks.append(("sphere area", area_err, 1e-2))
    space = ScalarSpace(mesh, mesh.order)
    Y = DiscreteField.zeros(space, 3)
    V = DiscreteField.zeros(space)
    state, nss = ns_step(zero_state(mesh), mesh, Y, V, NSParams(tau=cfg.tau), cfg.degree,
                         return_system=True)
    checks.append(("zero data gives zero flow", kinetic_energy(state.u, cfg.degree), 1e-20))
    failed = 0
    for name, value, tol in checks:
        ok = value <= tol
        failed += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {value:.3e} (tol {tol:.0e})")
    if failed:
        raise EvosurfError(f"{failed} self checks failed")


COMMANDS = {
    "run": cmd_run,
    "converge": cmd_converge,
    "sequence": cmd_sequence,
    "check": cmd_check,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="evosurf",
        description="Navier-Stokes flow on evolving curved surfaces.",
        epilog="Any config key can be overridden with --key value, e.g. --tau 1e-3 --Re 100.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log every time step")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0])
        sp.add_argument("--config", help="key = value config file")
        if name == "converge":
            sp.add_argument("--levels", default="1,2,3", help="comma separated refinement levels")
    return p


def main(argv=None):
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, parse_overrides(rest))
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvosurfError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_IO if exc.category == "io" else EXIT_NUMERICAL
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
