"""Command-line interface.

Subcommands: ``fixture``, ``verify``, ``simulate`` and ``inspect``. Exit
codes: 0 verified (or a clean simulation), 1 not verified, unknown or a
guarantee violation, 2 malformed input.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EngineError, InputError, PreconditionError
from .fixtures import (FormationParams, LeaderFollowerParams, complete_graph, cycle_variant_graph, formation,
                       leader_follower, leader_profile)
from .model import to_unperturbed, validate
from .numerics import Tolerances, observability_index, spectral_radius
from .robustify import verify_perturbed
from .serialize import dumps, load_model, loads, report_to_dict, save_model
from .simulate import NOISE_POLICIES, atomic_write_text, monitor, simulate, write_trace_csv
from .verify import VERIFIED, check_extendability, choose_iota, verify, verify_with_iota

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    model: Optional[str] = None
    epsilon: float = 1e-12
    iota: Optional[int] = None
    lp_tol: float = 1e-9
    rank_tol: float = 1e-9
    stability_margin: float = 1e-9
    seed: int = 0
    out: Optional[str] = None

    def tolerances(self):
        return Tolerances(rank_tol=self.rank_tol, stability_margin=self.stability_margin, lp_tol=self.lp_tol)


def _emit(path, payload):
    text = dumps(payload)
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    if not args.epsilon > 0:
        raise InputError("--epsilon must be positive")
    tol = Tolerances(rank_tol=args.rank_tol, stability_margin=args.stability_margin, lp_tol=args.lp_tol)
    system, contract = load_model(args.model)
    validate(system, contract)
    if args.iota is not None and args.iota < contract.m - 1:
        raise InputError(f"--iota must be at least m - 1 = {contract.m - 1}")
    if system.is_singleton():
        nom = to_unperturbed(system)
        if args.iota is None:
            report = verify(nom, contract, tol)
        else:
            report = verify_with_iota(nom, contract, args.iota, tol)
    else:
        report = verify_perturbed(system, contract, args.epsilon, tol, iota=args.iota)
    payload = report_to_dict(report)
    _emit(args.out, payload)
    print(f"verdict: {report.verdict}", file=sys.stderr)
    return EXIT_OK if report.verdict == VERIFIED else EXIT_FAIL


def _load_profile(path):
    try:
        with open(path) as fh:
            obj = loads(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if not isinstance(obj, dict) or "inputs" not in obj or "x0" not in obj:
        raise InputError("profile: expected an object with 'inputs' and 'x0'")
    try:
        return np.array(obj["inputs"], dtype=float), np.array(obj["x0"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"profile: non-numeric data ({exc})") from None


def cmd_simulate(args) -> int:
    system, contract = load_model(args.model)
    validate(system, contract)
    inputs, x0 = _load_profile(args.profile)
    traj = simulate(system, contract, inputs, args.noise, x0=x0, horizon=args.horizon, seed=args.seed,
                    tol=Tolerances(lp_tol=args.lp_tol))
    rep = monitor(contract, traj, Tolerances(lp_tol=args.lp_tol))
    if args.trace:
        write_trace_csv(args.trace, traj, rep)
    summary = {
        "horizon": int(traj.horizon),
        "noise": args.noise,
        "seed": int(args.seed),
        "guarantee_violations": rep.violations,
        "first_violation": rep.first_violation,
        "first_assumption_violation": rep.first_assumption_violation,
        "min_margin": [float(v) for v in rep.margins.min(axis=0)],
        "max_dynamics_residual": float(traj.dynamics_residual(system).max(initial=0.0)),
    }
    _emit(args.out, summary)
    return EXIT_OK if rep.violations == 0 else EXIT_FAIL


def cmd_fixture(args) -> int:
    if args.name == "leader-follower":
        params = LeaderFollowerParams(dt=args.dt, h=args.h, a_max=args.a_max, a_min=args.a_min, phi=args.phi,
                                      init_margin=args.init_margin)
        system, contract = leader_follower(params)
        if args.profile_out:
            d, x0 = leader_profile(params)
            atomic_write_text(args.profile_out, dumps({"inputs": d.tolist(), "x0": x0.tolist()}))
    elif args.name == "formation":
        if args.edges:
            try:
                edges = [tuple(e) for e in json.loads(args.edges)]
            except (json.JSONDecodeError, TypeError) as exc:
                raise InputError(f"--edges: {exc}") from None
        elif args.graph == "complete":
            edges = complete_graph(args.nodes)
        else:
            edges = cycle_variant_graph(args.nodes)
        system, contract = formation(FormationParams(args.nodes, edges, D=args.dim, mu_diff=args.mu_diff,
                                                     mu_err=args.mu_err, omega_max=args.omega_max))
    else:
        raise InputError(f"unknown fixture {args.name!r}")
    save_model(args.out, system, contract)
    return EXIT_OK


def cmd_inspect(args) -> int:
    tol = Tolerances(rank_tol=args.rank_tol)
    system, contract = load_model(args.model)
    rep = validate(system, contract)
    nu = observability_index(system.A, system.C, tol)
    ext, note = check_extendability(contract, tol)
    eig = np.abs(np.linalg.eigvals(system.A)) if system.n_x else np.zeros(0)
    payload = {
        "dimensions": rep._asdict(),
        "eigenvalue_moduli": sorted(float(v) for v in eig),
        "spectral_radius": spectral_radius(system.A),
        "nu": nu,
        "iota": choose_iota(contract.m, nu),
        "perturbed": not system.is_singleton(),
        "extendable": ext,
        "extendability_note": note,
    }
    _emit(args.out, payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lticontracts", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def tol_flags(sp):
        sp.add_argument("--lp-tol", type=float, default=1e-9)
        sp.add_argument("--rank-tol", type=float, default=1e-9)
        sp.add_argument("--stability-margin", type=float, default=1e-9)

    v = sub.add_parser("verify", help="verify a model file")
    v.add_argument("model")
    v.add_argument("--epsilon", type=float, default=1e-12)
    v.add_argument("--iota", type=int, default=None)
    v.add_argument("--out", default=None, help="report path (default stdout)")
    tol_flags(v)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="simulate and monitor a model")
    s.add_argument("model")
    s.add_argument("--profile", required=True, help="JSON with 'inputs' (rows of d) and 'x0'")
    s.add_argument("--noise", choices=NOISE_POLICIES, default="zero")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--horizon", type=int, default=None)
    s.add_argument("--trace", default=None, help="CSV trace path")
    s.add_argument("--out", default=None, help="summary path (default stdout)")
    s.add_argument("--lp-tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fixture", help="write a case-study model")
    f.add_argument("name", help="leader-follower or formation")
    f.add_argument("--out", required=True)
    f.add_argument("--profile-out", default=None, help="leader drive profile (leader-follower only)")
    f.add_argument("--dt", type=float, default=0.3)
    f.add_argument("--h", type=float, default=2.0)
    f.add_argument("--a-max", type=float, default=9.8)
    f.add_argument("--a-min", type=float, default=9.8)
    f.add_argument("--phi", type=float, default=0.29)
    f.add_argument("--init-margin", type=float, default=0.6)
    f.add_argument("--nodes", type=int, default=5)
    f.add_argument("--graph", choices=("complete", "cycle"), default="complete")
    f.add_argument("--edges", default=None, help="JSON edge list, overrides --graph")
    f.add_argument("--dim", type=int, default=2)
    f.add_argument("--mu-diff", type=float, default=0.1)
    f.add_argument("--mu-err", type=float, default=1.0)
    f.add_argument("--omega-max", type=float, default=0.01)
    f.set_defaults(func=cmd_fixture)

    i = sub.add_parser("inspect", help="print dimensions, spectrum and induction depth")
    i.add_argument("model")
    i.add_argument("--rank-tol", type=float, default=1e-9)
    i.add_argument("--out", default=None)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, PreconditionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
