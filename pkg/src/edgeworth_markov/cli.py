"""Command-line entry point and file formats.

Input documents are JSON, one per file:

    chain:  {"d": int, "P": [[...]], "f": [...], "mu": [...], "label": str}
    kernel: {"m": int, "kernel": [[...]], "f": [...], "mu": [...]?}

Kernel tables sample a transition density p(x, y) on [0,1]^2 at grid
midpoints and are discretized to a chain by midpoint quadrature.  Commands:

    analyze     stationary structure, cumulants, lattice/Cramer diagnostics
    expand      tables of the operator expansion over the z grid
    verify      Monte-Carlo sup errors of order-0 vs order-1 (vs higher)
    discretize  write the chain obtained from a kernel table

Exit codes: 0 success / all checks passed, 2 parse or validation failure,
3 chain precondition failure (not primitive, degenerate, ...), 4 requested
verification checks failed, 1 anything else.  EDGEWORTH_THREADS caps
worker threads.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, asdict

import numpy as np

from . import __version__
from .chains import ChainSpec, center_observable, stationary, validate
from .errors import (
    DegenerateKernel,
    DegenerateVariance,
    EdgeworthError,
    NotPrimitive,
    ParseError,
    PsiViolated,
    ValidationError,
)
from .expansion import build_approx, scalar_expansion
from .oracle import default_z_grid, mc_sample_multi, sup_error, VerificationReport
from .spectral import cramer_check, spectral_radius_scan, spectral_summary
from . import chains as _chains
from . import oracle as _oracle

log = logging.getLogger(__name__)

VERSION_STRING = f"edgeworth-markov {__version__}"


@dataclass(frozen=True)
class KernelTable:
    """Midpoint samples of a transition density on [0,1]^2 plus observable."""

    m: int
    values: np.ndarray
    f_values: np.ndarray
    mu: np.ndarray | None = None

    @property
    def p_minus(self) -> float:
        return float(self.values.min())

    @property
    def p_plus(self) -> float:
        return float(self.values.max())


@dataclass
class RunConfig:
    """Everything one command invocation depends on."""

    command: str
    input: str
    order: int = 1
    n: tuple = (64,)
    z_grid: tuple | None = None  # (lo, hi, step)
    samples: int = 100000
    seed: int = 1
    output: str | None = None
    format: str = "csv"

    def resolve_z(self) -> np.ndarray:
        if self.z_grid is None:
            return default_z_grid()
        lo, hi, step = self.z_grid
        return np.arange(lo, hi + step / 2.0, step)

    def check(self):
        if not 0 <= self.order <= 4:
            raise ValidationError(f"order {self.order} outside [0, 4]")
        if any(n < 1 for n in self.n):
            raise ValidationError("all n values must be >= 1")
        if self.command == "verify" and self.samples < 1e4:
            raise ValidationError("verify needs --samples >= 10000")


def _require(doc: dict, key: str, kind, path: str):
    if key not in doc:
        raise ParseError(f"{path}: missing field '{key}'")
    try:
        if kind is np.ndarray:
            return np.asarray(doc[key], dtype=float)
        return kind(doc[key])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: field '{key}': {exc}") from exc


def parse_spec(path):
    """Load a chain or kernel document; chains come back validated and with
    the observable centered (a note is logged when centering changed f)."""
    path = str(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")

    if "kernel" in doc:
        m = _require(doc, "m", int, path)
        values = _require(doc, "kernel", np.ndarray, path)
        f_values = _require(doc, "f", np.ndarray, path)
        if values.shape != (m, m):
            raise ParseError(f"{path}: kernel has shape {values.shape}, expected {(m, m)}")
        if f_values.shape != (m,):
            raise ParseError(f"{path}: f has length {f_values.shape}, expected {m}")
        if np.any(values < 0):
            raise ValidationError(f"{path}: kernel has a negative density value")
        mu = None
        if "mu" in doc:
            mu = _require(doc, "mu", np.ndarray, path)
            if mu.shape != (m,):
                raise ParseError(f"{path}: mu has length {mu.shape}, expected {m}")
        return KernelTable(m=m, values=values, f_values=f_values, mu=mu)

    if "P" not in doc:
        raise ParseError(f"{path}: neither 'P' (chain) nor 'kernel' present")
    d = _require(doc, "d", int, path)
    P = _require(doc, "P", np.ndarray, path)
    f = _require(doc, "f", np.ndarray, path)
    mu = _require(doc, "mu", np.ndarray, path)
    label = str(doc.get("label", ""))
    spec = validate(ChainSpec(d=d, P=P, f=f, mu=mu, label=label))
    try:
        pi = stationary(spec).pi
    except NotPrimitive:
        return spec  # leave uncentered; downstream commands will report
    drift = float(np.dot(pi, spec.f))
    if abs(drift) > 1e-12:
        log.info("%s: observable centered (stationary mean was %.3g)", path, drift)
        spec = center_observable(spec, pi)
    return spec


def write_spec(obj, path) -> None:
    """Serialize a ChainSpec or KernelTable back to its JSON document."""
    if isinstance(obj, ChainSpec):
        doc = {"d": obj.d, "P": obj.P.tolist(), "f": obj.f.tolist(),
               "mu": obj.mu.tolist(), "label": obj.label}
    elif isinstance(obj, KernelTable):
        doc = {"m": obj.m, "kernel": obj.values.tolist(), "f": obj.f_values.tolist()}
        if obj.mu is not None:
            doc["mu"] = obj.mu.tolist()
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def discretize_kernel(kt: KernelTable) -> ChainSpec:
    """Chain from a kernel table by midpoint quadrature: P_ij = p(x_i, y_j)/m,
    rows renormalized; mu defaults to uniform."""
    if kt.p_minus <= 0:
        raise DegenerateKernel(f"kernel minimum {kt.p_minus:g} is not positive")
    P = kt.values / kt.m
    P = P / P.sum(axis=1, keepdims=True)
    mu = kt.mu if kt.mu is not None else np.full(kt.m, 1.0 / kt.m)
    spec = ChainSpec(d=kt.m, P=P, f=kt.f_values, mu=mu,
                     label=f"discretized kernel m={kt.m}")
    return validate(spec)


def load_chain(cfg: RunConfig) -> ChainSpec:
    """Input document to a centered, validated chain."""
    obj = parse_spec(cfg.input)
    if isinstance(obj, KernelTable):
        obj = discretize_kernel(obj)
        obj = center_observable(obj, stationary(obj).pi)
    return obj


# -- commands ----------------------------------------------------------------

def cmd_analyze(cfg: RunConfig) -> dict:
    """Stationary structure, cumulants and frequency-side diagnostics."""
    spec = load_chain(cfg)
    ss = stationary(spec)
    var = _chains.sigma_sq_series(spec, ss)
    k = max(4, cfg.order + 2)
    summ = spectral_summary(spec, ss, k=k)
    try:
        pb = _chains.psi_bounds(spec)
        psi = {"alpha": pb.alpha, "beta": pb.beta}
    except PsiViolated as exc:
        psi = {"error": str(exc)}
    try:
        span, _ = _oracle.detect_span(spec.f)
        lattice = {"lattice": True, "span": span}
    except EdgeworthError:
        lattice = {"lattice": False}
    scan = spectral_radius_scan(spec, np.linspace(-8.0, 8.0, 321))
    # dense tail grid: almost-periodic returns of |mu_f^| toward 1 need a
    # fine sampling to be caught for finitely supported observables
    tail = np.linspace(40.0, 400.0, 100001)
    cram = cramer_check(spec, tail)
    report = {
        "version": VERSION_STRING,
        "config": asdict(cfg),
        "label": spec.label,
        "d": spec.d,
        "pi": ss.pi.tolist(),
        "gamma_erg": ss.gamma_erg,
        "C_erg": ss.C_erg,
        "sigma_sq_series": var,
        "sigma_sq_spectral": float(summ.cumulants_gamma[2]),
        "cumulants": {f"gamma_{m}": float(summ.cumulants_gamma[m])
                      for m in range(2, k + 1)},
        "psi_bounds": psi,
        "observable": lattice,
        "spectral_radius": {
            "below_one_off_zero": scan.below_one_off_zero,
            "tail_max": scan.tail_max,
        },
        "cramer": {
            "limsup_estimate": cram.limsup_estimate,
            "satisfied": cram.satisfied,
            "note": ("heuristic: fails provably for finitely supported "
                     "observables; gates only claims of order k > 3"),
        },
    }
    return report


def cmd_expand(cfg: RunConfig) -> dict:
    """Expansion tables over the z grid for each requested n."""
    spec = load_chain(cfg)
    ss = stationary(spec)
    summ = spectral_summary(spec, ss, k=max(3, cfg.order + 2))
    zs = cfg.resolve_z()
    blocks = []
    for n in cfg.n:
        approx = build_approx(summ, n, cfg.order)
        total = np.zeros((len(zs), spec.d, spec.d))
        for m in range(cfg.order + 1):
            coefs = approx.coeff_values(m, zs) * n ** (-m / 2.0)
            total += np.einsum("jz,jab->zab", coefs,
                               np.stack(approx.proj_derivs[: m + 1]))
        scalar = np.asarray(scalar_expansion(summ, n, zs))
        mixed = np.einsum("a,zab,b->z", ss.pi, total, np.ones(spec.d))
        blocks.append({"n": n, "z": zs.tolist(), "scalar": scalar.tolist(),
                       "pi_mixed": mixed.tolist(),
                       "matrix": total.tolist()})
    return {"version": VERSION_STRING, "config": asdict(cfg),
            "label": spec.label, "order": cfg.order, "blocks": blocks}


def cmd_verify(cfg: RunConfig) -> dict:
    """Monte-Carlo sup errors per n with order-improvement flags."""
    spec = load_chain(cfg)
    ss = stationary(spec)
    summ = spectral_summary(spec, ss, k=max(3, cfg.order + 2))
    laws = mc_sample_multi(spec, list(cfg.n), cfg.samples, cfg.seed)
    report = VerificationReport()
    zs = cfg.resolve_z()
    for n in sorted(laws):
        approx = build_approx(summ, n, cfg.order)
        report.add(sup_error(approx, laws[n], z_grid=zs))
    improves = report.order_improves(0, min(1, cfg.order)) if cfg.order >= 1 else True
    decreases = (report.scaled_error_decreases(order=min(1, cfg.order))
                 if len(cfg.n) > 1 and cfg.order >= 1 else True)
    rows = []
    for row in report.rows:
        for m in row.orders:
            for start in range(spec.d):
                for s_idx, label in enumerate([str(j + 1) for j in range(spec.d)] + ["full"]):
                    err = float(row.per_set_by_order[m, start, s_idx])
                    rows.append({
                        "n": row.n, "order": m, "start_state": start + 1,
                        "target_set": label, "sup_error": err,
                        "sqrt_n_times_error": math.sqrt(row.n) * err,
                        "mc_halfwidth": row.mc_half_width,
                        "pass": bool(improves and decreases),
                    })
    return {"version": VERSION_STRING, "config": asdict(cfg),
            "label": spec.label,
            "order_improves": improves, "scaled_error_decreases": decreases,
            "passed": bool(improves and decreases), "rows": rows}


def cmd_discretize(cfg: RunConfig) -> dict:
    """Kernel table to chain document; writes the chain if --output given."""
    obj = parse_spec(cfg.input)
    if isinstance(obj, ChainSpec):
        raise ValidationError(f"{cfg.input}: already a chain document")
    spec = discretize_kernel(obj)
    ss = stationary(spec)
    spec = center_observable(spec, ss.pi)
    pb = _chains.psi_bounds(spec)
    if cfg.output:
        write_spec(spec, cfg.output)
    return {"version": VERSION_STRING, "config": asdict(cfg),
            "d": spec.d, "alpha": pb.alpha, "beta": pb.beta,
            "sigma_sq": _chains.sigma_sq_series(spec, ss),
            "chain": None if cfg.output else
            {"d": spec.d, "P": spec.P.tolist(), "f": spec.f.tolist(),
             "mu": spec.mu.tolist(), "label": spec.label}}


# -- serialization -----------------------------------------------------------

def _verify_csv(report: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# {report['version']}\n")
    buf.write(f"# config: {json.dumps(report['config'])}\n")
    writer = csv.DictWriter(buf, fieldnames=[
        "n", "order", "start_state", "target_set", "sup_error",
        "sqrt_n_times_error", "mc_halfwidth", "pass"])
    writer.writeheader()
    for row in report["rows"]:
        writer.writerow(row)
    return buf.getvalue()


def _expand_csv(report: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# {report['version']}\n")
    buf.write(f"# config: {json.dumps(report['config'])}\n")
    writer = csv.writer(buf)
    writer.writerow(["n", "z", "kind", "start", "end", "value"])
    for block in report["blocks"]:
        n = block["n"]
        for iz, z in enumerate(block["z"]):
            writer.writerow([n, z, "scalar", "", "", block["scalar"][iz]])
            writer.writerow([n, z, "pi_mixed", "", "", block["pi_mixed"][iz]])
            mat = block["matrix"][iz]
            for i, rowvals in enumerate(mat):
                for j, v in enumerate(rowvals):
                    writer.writerow([n, z, "entry", i + 1, j + 1, v])
    return buf.getvalue()


def _emit(report: dict, cfg: RunConfig) -> None:
    if cfg.format == "json" or cfg.command in ("analyze", "discretize"):
        text = json.dumps(report, indent=1, default=float) + "\n"
    elif cfg.command == "verify":
        text = _verify_csv(report)
    else:
        text = _expand_csv(report)
    if cfg.output and cfg.command != "discretize":
        with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- argument parsing --------------------------------------------------------

def _parse_z(text: str):
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("z-grid must be LO:HI:STEP") from exc
    if step <= 0 or hi <= lo:
        raise argparse.ArgumentTypeError("need LO < HI and STEP > 0")
    return (lo, hi, step)


def _parse_n(text: str):
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("n must be a comma-separated int list") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="edgeworth",
        description="Operator-form Edgeworth expansions for Markov chain "
                    "functionals: analyze, expand, verify, discretize.")
    ap.add_argument("--version", action="version", version=VERSION_STRING)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [("analyze", "chain diagnostics and cumulants"),
                        ("expand", "expansion tables over the z grid"),
                        ("verify", "Monte-Carlo sup-error verification"),
                        ("discretize", "kernel table to chain document")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--input", required=True, help="chain or kernel JSON")
        p.add_argument("--order", type=int, default=1,
                       help="number of correction terms (0..4)")
        p.add_argument("--n", type=_parse_n, default=(64,),
                       help="comma-separated chain lengths")
        p.add_argument("--z-grid", type=_parse_z, default=None,
                       help="LO:HI:STEP (default -6:6:0.025)")
        p.add_argument("--samples", type=int, default=100000,
                       help="Monte-Carlo paths per start (verify)")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--output", default=None, help="write report here")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
    return ap


_COMMANDS = {"analyze": cmd_analyze, "expand": cmd_expand,
             "verify": cmd_verify, "discretize": cmd_discretize}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    args = build_parser().parse_args(argv)
    cfg = RunConfig(command=args.command, input=args.input, order=args.order,
                    n=tuple(args.n), z_grid=args.z_grid, samples=args.samples,
                    seed=args.seed, output=args.output, format=args.format)
    try:
        cfg.check()
        report = _COMMANDS[cfg.command](cfg)
        _emit(report, cfg)
    except (ParseError, ValidationError, DegenerateKernel) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NotPrimitive, PsiViolated, DegenerateVariance) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except EdgeworthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if cfg.command == "verify" and not report.get("passed", True):
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
