"""Command-line front-end: ``partfn <subcommand> ...`` emits one JSON run record on stdout."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata

import jsonschema
import numpy as np

from . import cluster, correlations, extrapolation, oracle, xxz
from .errors import PartfnError, PreconditionError
from .hamiltonian import (
    LocalHamiltonian,
    geometry_params,
    load_hamiltonian,
    random_instance,
)
from .moments import METHODS, MomentConfig, resolve_threads

USAGE_EXIT = 64

_VALUE = {
    "anyOf": [
        {"type": "string"},
        {"type": "boolean"},
        {"type": "null"},
        {"type": "array", "items": {"$ref": "#/$defs/value"}},
        {"type": "object", "additionalProperties": {"$ref": "#/$defs/value"}},
    ]
}

RUN_RECORD_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["subcommand", "instance_hash", "parameters", "outputs", "wall_time", "version"],
    "additionalProperties": False,
    "properties": {
        "subcommand": {"type": "string"},
        "instance_hash": {"type": ["string", "null"]},
        "parameters": {"type": "object", "additionalProperties": {"$ref": "#/$defs/value"}},
        "outputs": {"type": "object", "additionalProperties": {"$ref": "#/$defs/value"}},
        "wall_time": {"type": "string"},
        "version": {"type": "string"},
    },
    "$defs": {"value": _VALUE},
}


def encode(value):
    """Numbers become full-precision strings, complex numbers [re, im] string pairs."""
    if value is None or isinstance(value, (bool, np.bool_)):
        return None if value is None else bool(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        return [repr(float(value.real)), repr(float(value.imag))]
    if isinstance(value, str):
        return value
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [encode(v) for v in value]
    raise TypeError(f"cannot encode {type(value).__name__}")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunRecord:
    subcommand: str
    instance_hash: str | None
    parameters: dict
    outputs: dict = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = field(default_factory=_version)

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "instance_hash": self.instance_hash,
            "parameters": encode(self.parameters),
            "outputs": encode(self.outputs),
            "wall_time": repr(float(self.wall_time)),
            "version": self.version,
        }

    def to_json(self) -> str:
        doc = self.to_dict()
        jsonschema.validate(doc, RUN_RECORD_SCHEMA)
        return json.dumps(doc, sort_keys=True)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(USAGE_EXIT)


def _complex(text: str) -> complex:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected re or re,im, got {text!r}")


def _observable(text: str):
    """``Z:0`` or ``ZZ:1,2``."""
    try:
        word, sites = text.split(":")
        return correlations.site_observable(word, [int(s) for s in sites.split(",")])
    except (ValueError, PartfnError) as exc:
        raise argparse.ArgumentTypeError(f"bad observable {text!r}: {exc}") from exc


def _config(args) -> MomentConfig:
    return MomentConfig(threads=resolve_threads(args.threads))


def _spectrum_summary(s: oracle.SpectralDecomposition) -> dict:
    return {"dim": s.dim, "ground_energy": float(s.energies[0]), "max_energy": float(s.energies[-1])}


# -- subcommands ---------------------------------------------------------------


def cmd_estimate(args, H: LocalHamiltonian) -> dict:
    cfg = _config(args)
    beta = args.beta
    if args.region == "rect":
        if args.M is None:
            raise PreconditionError("--region rect needs a certified bound --M")
        if beta.imag or beta.real <= 0:
            raise PreconditionError("--region rect needs a positive real --beta")
        est = extrapolation.estimate_in_region(H, beta.real, args.eps, args.delta * beta.real, args.M,
                                               method=args.method, config=cfg)
    elif args.M is not None and args.b is not None:
        est = extrapolation.estimate_log_partition(H, beta, args.eps, extrapolation.ZeroFreeDisk(args.b, args.M),
                                                   args.method, cfg, K=args.K)
    else:
        est = extrapolation.estimate_log_partition(H, beta, args.eps, "auto", args.method, cfg, K=args.K)
    out = {
        "logZ": est.value,
        "K": est.K,
        "certified_error": est.certified_error,
        "beta": est.target,
        "disk_b": est.disk.b if est.disk else None,
        "disk_M": est.disk.M if est.disk else None,
        "coefficients": list(est.series.coeffs) if est.series is not None else [],
    }
    if args.check and H.d**H.n <= oracle.DIMENSION_CAP:
        exact = oracle.log_partition(oracle.spectrum(H), beta)
        out["oracle_logZ"] = exact
        out["observed_error"] = abs(est.value - exact)
    return out


def cmd_oracle(args, H: LocalHamiltonian) -> dict:
    s = oracle.spectrum(H)
    beta = args.beta
    out = {"Z": oracle.partition_function(s, beta), "logZ": oracle.log_partition(s, beta), **_spectrum_summary(s)}
    if not beta.imag and beta.real > 0:
        out["free_energy"] = oracle.free_energy(s, beta.real)
    if args.energies:
        out["energies"] = list(s.energies)
    return out


def cmd_zeros(args, H: LocalHamiltonian) -> dict:
    s = oracle.spectrum(H)
    if args.rect is None:
        r = cluster.beta0(geometry_params(H)) / math.sqrt(2) * (1 - 1e-9)
        if not math.isfinite(r):
            raise PreconditionError("no finite certified disk; pass --rect")
        rect = (-r, r, -r, r)
    else:
        rect = tuple(args.rect)
    zeros = oracle.fisher_zero_scan(s, rect, tuple(args.grid), args.tol)
    if args.csv:
        oracle.write_zero_csv(args.csv, zeros)
    return {
        "rect": list(rect),
        "count": len(zeros),
        "zeros": [{"beta": z.location, "abs_Z": z.residual, "multiplicity_hint": z.multiplicity_hint} for z in zeros],
    }


def cmd_cluster(args, H: LocalHamiltonian) -> dict:
    gp = geometry_params(H)
    beta = args.beta
    sets = cluster.enumerate_connected_sets(H, args.x0, args.max_size)
    counts = cluster.count_by_size(sets)
    out = {
        "counts": {str(k): v for k, v in sorted(counts.items())},
        "count_bound_ok": all(v <= gp.g**k + 1e-9 for k, v in counts.items()),
        "expansion_radius": cluster.expansion_radius(gp),
        "residual": cluster.expansion_residual(H, args.x0, beta, args.max_size, args.p_max),
    }
    if args.ratio:
        rep = cluster.ratio_bound_check(H, beta)
        out["ratio_bound"] = {k: rep[k] for k in ("bound", "max_log_ratio", "violations", "in_disk")}
    return out


def cmd_corr(args, H: LocalHamiltonian) -> dict:
    out = {}
    if args.o1 is not None and args.o2 is not None:
        cs = correlations.covariance_series(H, args.o1, args.o2, args.K, config=_config(args))
        out["coefficients"] = list(cs.coeffs)
        out["L_predicted"] = cs.L_predicted
        out["vanishing_order"] = cs.vanishing_order()
    if args.anchor is not None:
        probes = args.probes if args.probes else [p for p in range(H.n) if p != args.anchor]
        prof = correlations.decay_profile(H, args.profile_beta, args.anchor, probes)
        if args.csv:
            correlations.write_profile_csv(args.csv, prof)
        out["profile"] = {
            "distances": list(prof.distances),
            "covariances": list(prof.covariances),
            "xi": prof.fitted_xi,
            "c": prof.fitted_c,
            "r_squared": prof.r_squared,
        }
    if not out:
        raise PreconditionError("give --o1/--o2 for a series or --anchor for a profile")
    return out


def cmd_xxz(args) -> tuple[dict, str | None]:
    if args.instance:
        with open(args.instance) as fh:
            inst = xxz.XXZInstance.from_dict(json.load(fh))
    else:
        inst = xxz.random_ferromagnet(args.n, args.seed, args.beta, kind=args.kind)
    if args.beta is not None and args.instance:
        inst = xxz.XXZInstance(inst.n, inst.edges, inst.J, inst.Jzz, args.beta, inst.mu)
    poly = xxz.sector_coefficients(inst)
    ok, report = xxz.check_ferromagnetic(inst.couplings)
    out = {"q": list(poly.q), "ferromagnetic": ok, "edges": report, "instance": inst.to_dict()}
    if args.check_circle:
        roots, dev = xxz.lee_yang_roots(poly)
        out["roots"] = list(roots)
        out["max_circle_deviation"] = dev
        out["circle_ok"] = dev <= 1e-8
    if args.mu is not None:
        est = xxz.xxz_estimate(poly, args.mu, args.eps, K=args.K)
        out["estimate"] = {"logZ": est.value, "K": est.K, "certified_error": est.certified_error,
                           "z": est.target, "exact_logZ": est.exact}
    if args.csv:
        xxz.write_poly_csv(args.csv, poly)
    canon = json.dumps(inst.to_dict(), sort_keys=True)
    return out, hashlib.sha256(canon.encode()).hexdigest()


def cmd_bound(args, H: LocalHamiltonian) -> dict:
    gp = geometry_params(H)
    b0 = cluster.beta0(gp)
    return {
        "kappa": gp.kappa, "R": gp.R, "g": gp.g, "h": gp.h, "m": gp.m,
        "beta0": b0,
        "expansion_radius": cluster.expansion_radius(gp),
        "logZ_bound_at_beta0": cluster.log_bound(gp, b0, H.n, H.d) if math.isfinite(b0) else math.inf,
    }


def cmd_generate(args) -> tuple[dict, str]:
    couplings = None
    if args.couplings:
        couplings = {k: tuple(v) for k, v in json.loads(args.couplings).items()}
    H = random_instance(args.kind, args.n, couplings, args.seed)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(H.to_json())
    return {"n": H.n, "m": H.m, "path": args.out, "instance": None if args.out else H.to_dict()}, H.content_hash()


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="partfn", description="Partition-function extrapolation with certified error.")
    p.add_argument("--threads", type=int, default=None, help="worker threads (PARTFN_THREADS overrides)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_instance(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("instance", help="instance JSON file")
        sp.add_argument("--csv", default=None, help="write plot-ready CSV here")
        return sp

    sp = with_instance("estimate", "estimate log Z by Taylor extrapolation")
    sp.add_argument("--beta", type=_complex, required=True, help="re or re,im")
    sp.add_argument("--eps", type=float, default=1e-6)
    sp.add_argument("--region", choices=("disk", "rect"), default="disk")
    sp.add_argument("--delta", type=float, default=0.3, help="rect half-width as a fraction of beta")
    sp.add_argument("--M", type=float, default=None, help="caller-certified bound on |log Z|")
    sp.add_argument("--b", type=float, default=None, help="caller-certified disk radius (with --M)")
    sp.add_argument("--K", type=int, default=None, help="fix the truncation order")
    sp.add_argument("--method", choices=METHODS, default="auto")
    sp.add_argument("--check", action="store_true", help="compare with the dense oracle")

    sp = with_instance("oracle", "exact diagonalization")
    sp.add_argument("--beta", type=_complex, required=True)
    sp.add_argument("--energies", action="store_true")

    sp = with_instance("zeros", "Fisher-zero scan")
    sp.add_argument("--rect", type=float, nargs=4, metavar=("RE0", "RE1", "IM0", "IM1"), default=None)
    sp.add_argument("--grid", type=int, nargs=2, default=(64, 64))
    sp.add_argument("--tol", type=float, default=1e-10)

    sp = with_instance("cluster", "cluster expansion diagnostics")
    sp.add_argument("--beta", type=_complex, required=True)
    sp.add_argument("--x0", type=int, default=0)
    sp.add_argument("--max-size", type=int, default=4)
    sp.add_argument("--p-max", type=int, default=8)
    sp.add_argument("--ratio", action="store_true", help="also run the site-ratio bound check")

    sp = with_instance("corr", "covariance series and decay profile")
    sp.add_argument("--o1", type=_observable, default=None, help="e.g. Z:0")
    sp.add_argument("--o2", type=_observable, default=None)
    sp.add_argument("--K", type=int, default=6)
    sp.add_argument("--anchor", type=int, default=None)
    sp.add_argument("--probes", type=int, nargs="*", default=None)
    sp.add_argument("--profile-beta", type=float, default=0.2)

    sp = sub.add_parser("xxz", help="XXZ sector polynomial, Lee-Yang roots and estimate")
    sp.add_argument("instance", nargs="?", default=None, help="XXZ instance JSON (else random ferromagnet)")
    sp.add_argument("--n", type=int, default=6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--kind", choices=("chain", "graph"), default="chain")
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--mu", type=float, default=None)
    sp.add_argument("--eps", type=float, default=1e-6)
    sp.add_argument("--K", type=int, default=None)
    sp.add_argument("--check-circle", action="store_true")
    sp.add_argument("--csv", default=None)

    with_instance("bound", "geometry parameters and the certified radius")

    sp = sub.add_parser("generate", help="write a random instance")
    sp.add_argument("--kind", choices=("chain", "grid2d", "graph"), default="chain")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--couplings", default=None, help='JSON, e.g. {"zz": [-1, 1], "x": [-1, 1]}')
    sp.add_argument("--out", default=None)
    return p


HANDLERS = {
    "estimate": cmd_estimate,
    "oracle": cmd_oracle,
    "zeros": cmd_zeros,
    "cluster": cmd_cluster,
    "corr": cmd_corr,
    "bound": cmd_bound,
}


def _parameters(args) -> dict:
    skip = {"command", "threads", "o1", "o2"}
    params = {k: v for k, v in vars(args).items() if k not in skip}
    for k in ("o1", "o2"):
        o = getattr(args, k, None)
        if o is not None:
            params[k] = f"{o.label}:{','.join(map(str, o.support))}"
    return params


def run(argv=None) -> tuple[int, RunRecord | None]:
    args = build_parser().parse_args(argv)
    if args.command == "xxz" and args.beta is None and not args.instance:
        args.beta = 1.0
    t0 = time.perf_counter()
    record = RunRecord(args.command, None, _parameters(args))
    try:
        resolve_threads(args.threads)
        if args.command == "xxz":
            record.outputs, record.instance_hash = cmd_xxz(args)
        elif args.command == "generate":
            record.outputs, record.instance_hash = cmd_generate(args)
        else:
            H = load_hamiltonian(args.instance)
            record.instance_hash = H.content_hash()
            record.outputs = HANDLERS[args.command](args, H)
    except PartfnError as exc:
        print(f"partfn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code, None
    except (OSError, ValueError) as exc:
        print(f"partfn: error: {exc}", file=sys.stderr)
        return 1, None
    record.wall_time = time.perf_counter() - t0
    return 0, record


def main(argv=None) -> int:
    code, record = run(argv)
    if record is not None:
        print(record.to_json())
    return code


if __name__ == "__main__":
    sys.exit(main())
