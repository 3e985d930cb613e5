"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Flags may also be
supplied through a JSON config file (``--config``); explicit flags win.
"""

from __future__ import annotations

import argparse
import difflib
import json
import sys
import time

import numpy as np

from . import __version__
from .basis import BoundaryCondition, build_sector, enumerate_basis
from .errors import ScarsimError
from .observables import run_quench
from .operators import HamiltonianParams, build_pxp
from .propagation import eig_decompose
from .ramping import MU_CRITICAL, RampSchedule, mu_of_t, ramp_prepare
from .spectroscopy import dispersion, ground_state, overlap_spectrum
from .sweep import SweepConfig, parse_range, run_sweep, write_outputs
from .tdvp import TdvpPoint, integrate_orbit, leakage

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse with exit code 1 on usage problems and a flag suggestion."""

    def error(self, message):
        for token in sys.argv[1:]:
            if token.startswith("--") and message.startswith("unrecognized"):
                options = [a for action in self._actions for a in action.option_strings]
                close = difflib.get_close_matches(token, options, n=1)
                if close:
                    message += f" (did you mean {close[0]}?)"
                break
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _add_common(sub):
    sub.add_argument("--config", help="JSON file with defaults for this subcommand")


def _build_parser() -> _Parser:
    parser = _Parser(prog="scarsim",
                     description="Constrained-chain quench, spectroscopy, and "
                                 "state-preparation toolkit")
    parser.add_argument("--version", action="version", version=f"scarsim {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("basis", help="count or dump blockade-legal configurations")
    p.add_argument("--n", type=int, required=True, help="chain length")
    p.add_argument("--bc", default="pbc", choices=["pbc", "obc"])
    p.add_argument("--k", type=int, default=None, help="momentum sector index")
    p.add_argument("--p", default=None, choices=["+1", "-1"], help="inversion sector")
    p.add_argument("--dump-states", action="store_true",
                   help="print configurations (or sector representatives) as hex")
    _add_common(p)

    p = subs.add_parser("hamiltonian", help="build the chain Hamiltonian")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--bc", default="pbc", choices=["pbc", "obc"])
    p.add_argument("--dump-mm", action="store_true", help="emit Matrix Market text")
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")
    _add_common(p)

    p = subs.add_parser("quench", help="fidelity/density/entropy time series")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu-i", type=float, required=True)
    p.add_argument("--mu-f", type=float, required=True)
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--bc", default="pbc", choices=["pbc", "obc"])
    p.add_argument("--full-basis", action="store_true",
                   help="evolve in the full basis instead of the k=0,p=+1 sector")
    p.add_argument("--no-entropy", action="store_true")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = subs.add_parser("sweep", help="(mu_i, mu_f) phase-diagram grid")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--bc", default=None, choices=["pbc", "obc"])
    p.add_argument("--mu-i-range", default=None, help="start:stop:step")
    p.add_argument("--mu-f-range", default=None, help="start:stop:step")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--layers", default=None,
                   help="comma list from delta_f,msd_n,ipr,delta_n")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--full-basis", action="store_true")
    p.add_argument("--out", default=None)
    _add_common(p)

    p = subs.add_parser("tdvp-orbit", help="integrate the manifold flow")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--phi0", type=float, default=0.0)
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = subs.add_parser("leakage-map", help="escape-rate map over the angle torus")
    p.add_argument("--grid", type=int, default=129, help="points per axis")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = subs.add_parser("dispersion", help="lowest excitation energy per momentum")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = subs.add_parser("towers", help="overlap of a ground state with quench eigenstates")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu-i", type=float, required=True)
    p.add_argument("--mu-f", type=float, required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    p = subs.add_parser("ensembles", help="diagonal vs canonical density across mu_f")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu-i", type=float, required=True)
    p.add_argument("--mu-f-range", required=True, help="start:stop:step")
    p.add_argument("--full-basis", action="store_true",
                   help="use the full constrained space instead of the k=0,p=+1 sector")
    p.add_argument("--out", required=True)
    _add_common(p)

    p = subs.add_parser("ramp", help="adiabatic preparation of a target ground state")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--target-mu", type=float, required=True)
    p.add_argument("--A", type=float, default=-40.0)
    p.add_argument("--B", type=float, default=30.0)
    p.add_argument("--C", type=float, default=-0.1)
    p.add_argument("--t-max", type=float, default=25.0)
    p.add_argument("--dt", type=float, default=0.0025)
    p.add_argument("--initial", default="auto", choices=["auto", "Z2", "polarized"])
    p.add_argument("--out", required=True)
    _add_common(p)

    return parser


def _apply_config_file(args: argparse.Namespace, parser_args) -> argparse.Namespace:
    """Fill unset flags from the JSON config file (flags override the file)."""
    if not getattr(args, "config", None):
        return args
    with open(args.config, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ScarsimError(f"config file {args.config!r} must hold a JSON object")
    for key, value in data.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ScarsimError(f"config key {key!r} unknown for this subcommand")
        if attr in parser_args:       # flag given explicitly: keep it
            continue
        setattr(args, attr, value)
    return args


def _explicit_flags(argv) -> set:
    out = set()
    for token in argv:
        if token.startswith("--"):
            out.add(token[2:].split("=")[0].replace("-", "_"))
    return out


def _write_csv(path: str | None, header: str, rows) -> None:
    fh = sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8")
    try:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format(x, ".12g") if isinstance(x, float) else str(x)
                              for x in row) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _cmd_basis(args) -> int:
    basis = enumerate_basis(args.n, args.bc)
    if args.k is not None:
        p = None if args.p is None else int(args.p)
        sector = build_sector(basis, k=args.k, p=p)
        print(sector.dim)
        if args.dump_states:
            for rep in sector.representatives:
                print(format(int(rep), "x"))
        return 0
    print(basis.dim)
    if args.dump_states:
        for s in basis.states:
            print(format(int(s), "x"))
    return 0


def _cmd_hamiltonian(args) -> int:
    import scipy.io

    basis = enumerate_basis(args.n, args.bc)
    op = build_pxp(basis, HamiltonianParams(mu=args.mu, bc=basis.bc))
    if args.dump_mm or args.out:
        target = args.out or "-"
        if target == "-":
            scipy.io.mmwrite(sys.stdout, op.matrix.tocoo())
        else:
            scipy.io.mmwrite(target, op.matrix.tocoo())
    else:
        print(f"dim={op.dim} nnz={op.matrix.nnz}")
    return 0


def _cmd_quench(args) -> int:
    record = run_quench(args.n, args.mu_i, args.mu_f, t_max=args.t_max, dt=args.dt,
                        bc=args.bc, sector=not args.full_basis,
                        compute_entropy=not args.no_entropy)
    ent = record.entropy if len(record.entropy) else np.full(len(record.times), np.nan)
    rows = zip(map(float, record.times), map(float, record.fidelity),
               map(float, record.density_n), map(float, ent))
    _write_csv(args.out, "t,fidelity,n_density,entropy", rows)
    return 0


def _cmd_sweep(args) -> int:
    overrides = {}
    mapping = {"n": "n_sites", "bc": "bc", "mu_i_range": "mu_i_range",
               "mu_f_range": "mu_f_range", "dt": "dt", "t_max": "t_max",
               "threads": "threads", "out": "out"}
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    for flag, key in mapping.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    if args.layers is not None:
        overrides["layers"] = tuple(s.strip() for s in args.layers.split(",") if s.strip())
    if args.full_basis:
        overrides["sector"] = False
    data.update(overrides)
    config = SweepConfig.from_dict(data)
    tic = time.perf_counter()
    cells = run_sweep(config)
    csv_path, meta_path = write_outputs(cells, config, wall_time=time.perf_counter() - tic)
    print(f"wrote {csv_path} and {meta_path} ({len(cells)} cells)")
    return 0


def _cmd_tdvp_orbit(args) -> int:
    orbit = integrate_orbit(TdvpPoint(args.theta0, args.phi0), args.mu,
                            t_end=args.t_max, tol=args.tol)
    rows = ((float(t), p.theta, p.phi, float(e), float(leakage(p.theta)))
            for t, p, e in zip(orbit.times, orbit.points, orbit.energy_density))
    _write_csv(args.out, "t,theta,phi,energy,leakage", rows)
    if orbit.period is not None:
        print(f"period={orbit.period:.9g} return_distance={orbit.return_distance:.3g}")
    return 0


def _cmd_leakage_map(args) -> int:
    thetas = np.linspace(-np.pi, np.pi, args.grid)
    phis = np.linspace(-np.pi, np.pi, args.grid)
    rows = ((float(th), float(ph), float(leakage(th)))
            for th in thetas for ph in phis)
    _write_csv(args.out, "theta,phi,leakage", rows)
    return 0


def _cmd_dispersion(args) -> int:
    band = dispersion(args.n, args.mu)
    rows = zip(map(float, band.momenta), map(float, band.energies))
    _write_csv(args.out, "k,excitation_energy", rows)
    return 0


def _cmd_towers(args) -> int:
    basis = enumerate_basis(args.n, "pbc")
    sector = build_sector(basis, k=0, p=+1)
    _, psi0 = ground_state(build_pxp(sector, HamiltonianParams(mu=args.mu_i)))
    eig = eig_decompose(build_pxp(sector, HamiltonianParams(mu=args.mu_f)),
                        validate=False)
    spec = overlap_spectrum(psi0, eig)
    rows = zip(map(float, spec.energies), map(float, spec.overlaps))
    _write_csv(args.out, "energy,overlap", rows)
    return 0


def _cmd_ensembles(args) -> int:
    from .ensembles import diagonal_ensemble_n, solve_beta

    basis = enumerate_basis(args.n, "pbc")
    space = basis if args.full_basis else build_sector(basis, k=0, p=+1)
    _, psi0 = ground_state(build_pxp(space, HamiltonianParams(mu=args.mu_i)))
    rows = []
    for mu_f in parse_range(args.mu_f_range):
        eig = eig_decompose(build_pxp(space, HamiltonianParams(mu=float(mu_f))),
                            validate=False)
        coeff = eig.coefficients(psi0)
        e_target = float(np.real(np.sum(np.abs(coeff) ** 2 * eig.eigenvalues)))
        try:
            canonical = solve_beta(eig, e_target)
            n_diag = diagonal_ensemble_n(psi0, eig, warn_on_degeneracy=False)
            rows.append((float(mu_f), canonical.beta, canonical.n_th, n_diag,
                         n_diag - canonical.n_th))
        except ScarsimError:
            rows.append((float(mu_f), float("nan"), float("nan"), float("nan"),
                         float("nan")))
    _write_csv(args.out, "mu_f,beta,n_th,n_diag,delta_n", rows)
    return 0


def _cmd_ramp(args) -> int:
    schedule = RampSchedule(A=args.A, B=args.B, C=args.C)
    result = ramp_prepare(args.n, schedule, args.target_mu, initial=args.initial,
                          t_max=args.t_max, dt=args.dt)
    rows = ((float(t), mu_of_t(schedule, float(t)), float(o))
            for t, o in zip(result.scan_times, result.scan_overlaps))
    _write_csv(args.out, "t,mu,overlap", rows)
    print(f"t_ramp={result.t_ramp:.6g} overlap={result.overlap:.9g} "
          f"target_mu={args.target_mu:g}")
    return 0


def cli_main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    explicit = _explicit_flags(argv)
    try:
        if args.command != "sweep":   # sweep merges its config into SweepConfig itself
            args = _apply_config_file(args, explicit)
        if args.command == "basis":
            return _cmd_basis(args)
        if args.command == "hamiltonian":
            return _cmd_hamiltonian(args)
        if args.command == "quench":
            return _cmd_quench(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "tdvp-orbit":
            return _cmd_tdvp_orbit(args)
        if args.command == "leakage-map":
            return _cmd_leakage_map(args)
        if args.command == "dispersion":
            return _cmd_dispersion(args)
        if args.command == "towers":
            return _cmd_towers(args)
        if args.command == "ensembles":
            return _cmd_ensembles(args)
        if args.command == "ramp":
            return _cmd_ramp(args)
        parser.error(f"unknown command {args.command!r}")
        return USAGE_ERROR
    except (ScarsimError, OSError, ValueError, KeyError) as exc:
        print(f"scarsim: error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
