"""Command line front end: validate | check | scan | make-reference.

Exit codes: 0 all passed, 1 a check failed, 2 a precondition failed (for example the
contraction factor is not below 1), 64 usage or parse error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import verify
from .errors import ConfigParseError, ConvergenceCriterionViolated, SchottkyLaxError
from .liealg import AlgebraSpec
from .moebius import (SchottkyData, ValidationCheck, fundamental_domain_points, loxodromic,
                      validate)
from .phasespace import PhasePoint, contraction_factor, project_to_zero_moment, random_point
from .poincare import TruncationPolicy

log = logging.getLogger("schottky_lax")

EXIT_OK, EXIT_FAIL, EXIT_PRECONDITION, EXIT_USAGE = 0, 1, 2, 64

DEFAULT_TOLERANCES = {
    "convergence": 0.05, "twist": 1e-7, "pairing": 1e-8, "infinity": 1e-9,
    "antisymmetry": 1e-12, "equivariance": 1e-9, "inhomogeneous": 1e-9, "rmatrix": 1e-6,
    "lemma3": 1e-6, "involution": 1e-6, "dybe": 1e-5, "basepoint": 1e-7,
    "basepoint-generic": 1e-5, "oracle": 1e-5,
}

DEFAULT_SAMPLES = {
    "seed": 0, "twist": 20, "pairs": 10, "involutionPairs": 5, "oracleProbes": 50,
    "quadratureNodes": 64, "lemma3Nodes": 256, "epsilon": 0.25, "lemma3Length": 5,
}

KAPPA_LIMIT = 0.5


@dataclass
class RunConfig:
    algebra: AlgebraSpec
    schottky: SchottkyData
    phase: PhasePoint
    truncation: TruncationPolicy
    tolerances: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    output: str | None = None

    def tolerance(self, name):
        return self.tolerances.get(name, DEFAULT_TOLERANCES[name])

    def sample(self, name):
        return self.samples.get(name, DEFAULT_SAMPLES[name])

    def to_json(self) -> dict:
        out = {"algebra": self.algebra.to_json(), "schottky": self.schottky.to_json(),
               "phase": self.phase.to_json(), "truncation": self.truncation.to_json(),
               "tolerances": dict(self.tolerances), "samples": dict(self.samples)}
        if self.output is not None:
            out["output"] = self.output
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _field(obj, path):
    cur = obj
    for key in path.split("."):
        if not isinstance(cur, dict) or key not in cur:
            raise ConfigParseError(f"field '{path}': missing")
        cur = cur[key]
    return cur


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ConfigParseError(f"{source}: top level must be an object")
    sections = {}
    for name, build in (("algebra", AlgebraSpec.from_json), ("schottky", SchottkyData.from_json)):
        try:
            sections[name] = build(_field(obj, name))
        except ConfigParseError:
            raise
        except (KeyError, TypeError, ValueError, IndexError, SchottkyLaxError) as exc:
            raise ConfigParseError(f"{source}: field '{name}': {exc!r}") from exc
    try:
        phase = PhasePoint.from_json(_field(obj, "phase"), sections["algebra"])
    except ConfigParseError:
        raise
    except (KeyError, TypeError, ValueError, IndexError, SchottkyLaxError) as exc:
        raise ConfigParseError(f"{source}: field 'phase': {exc!r}") from exc
    try:
        trunc = TruncationPolicy.from_json(obj.get("truncation", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(f"{source}: field 'truncation': {exc!r}") from exc
    tolerances = obj.get("tolerances", {})
    unknown = set(tolerances) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigParseError(f"{source}: field 'tolerances': unknown checks {sorted(unknown)}")
    if phase.genus != sections["schottky"].genus:
        raise ConfigParseError(f"{source}: field 'phase': genus {phase.genus} does not match "
                               f"schottky genus {sections['schottky'].genus}")
    return RunConfig(sections["algebra"], sections["schottky"], phase, trunc,
                     {k: float(v) for k, v in tolerances.items()}, dict(obj.get("samples", {})),
                     obj.get("output"))


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"{path}: {exc.strerror}") from exc
    return parse_config(text, path)


# -- reference configurations ------------------------------------------------

REFERENCES = {
    "genus1": {"generators": [(1, -1, 0.16)], "algebra": ("sl", 2), "g_scale": 0.1,
               "truncation": TruncationPolicy(target_tail=1e-12)},
    "genus2": {"generators": [(1, -1, 0.1), (1 + 8j, -1 + 8j, 0.1)], "algebra": ("gl", 2),
               "g_scale": 0.05,
               "truncation": TruncationPolicy(target_tail=1e-9, capacity=400_000)},
}


def make_reference(kind: str, seed: int = 0) -> RunConfig:
    """Seeded reference data; g_i are pulled toward the identity until kappa <= 0.5."""
    if kind not in REFERENCES:
        raise ValueError(f"unknown reference {kind!r}; choose from {sorted(REFERENCES)}")
    ref = REFERENCES[kind]
    s = SchottkyData.from_generators([loxodromic(a, r, q) for a, r, q in ref["generators"]])
    kind_, n = ref["algebra"]
    alg = AlgebraSpec(n, kind_)
    scale = ref["g_scale"]
    while True:
        p = random_point(alg, s.genus, np.random.default_rng(seed), g_scale=scale)
        if contraction_factor(p, s) <= KAPPA_LIMIT:
            break
        scale /= 2
    samples = dict(DEFAULT_SAMPLES, seed=seed)
    return RunConfig(alg, s, p, ref["truncation"], {}, samples)


def reference_path(kind: str):
    return resources.files("schottky_lax") / "data" / f"{kind}.json"


# -- checks ------------------------------------------------------------------

def _points(cfg, count, rng):
    return fundamental_domain_points(cfg.schottky, count, rng)


def _run_involution(cfg, t, rng):
    z = _points(cfg, 2 * cfg.sample("involutionPairs"), rng)
    reps = [verify.check_involution(a, b, 2, 2, cfg.phase, cfg.schottky, t, cfg.tolerance("involution"),
                                    cross_check=(k == 0))
            for k, (a, b) in enumerate(zip(z[::2], z[1::2]))]
    return [_merge("involution", reps)]


def _merge(name, reps):
    worst = max(reps, key=lambda r: r.residual - r.tolerance - r.tail_budget)
    out = replace(worst, name=name, samples=[r.samples for r in reps],
                  runtime_ms=sum(r.runtime_ms for r in reps))
    out.details = dict(reps[0].details, **worst.details, perSample=[r.residual for r in reps])
    return out


def _basepoint_points(cfg, rng):
    s = cfg.schottky
    while True:
        z, a, b = _points(cfg, 3, rng)
        if verify._segment_clear(s, a, b) and min(abs(z - a), abs(z - b)) > 0.1 * s.min_radius:
            return z, a, b


def _run_basepoint(cfg, t, rng):
    z, a, b = _basepoint_points(cfg, rng)
    zero = verify.check_basepoint(z, a, b, project_to_zero_moment(cfg.phase), cfg.schottky, t,
                                  cfg.tolerance("basepoint"))
    generic = verify.check_basepoint(z, a, b, cfg.phase, cfg.schottky, t, cfg.tolerance("basepoint-generic"))
    generic.name = "basepoint-generic"
    return [zero, generic]


def _run_dybe(cfg, t, rng):
    z1, z2, z3 = _points(cfg, 3, rng)
    return [verify.check_dybe(z2, z3, z1, cfg.phase, cfg.schottky, t, cfg.tolerance("dybe"))]


def _adaptive(cfg):
    return cfg.samples.get("adaptiveQuadrature", True)


CHECKS = {
    "convergence": lambda cfg, t, rng: [verify.check_convergence(cfg.phase, cfg.schottky, t, rng=rng,
                                                                 margin=cfg.tolerance("convergence"))],
    "twist": lambda cfg, t, rng: [verify.check_twist(cfg.phase, cfg.schottky, t, cfg.sample("twist"),
                                                     cfg.tolerance("twist"), rng)],
    "pairing": lambda cfg, t, rng: [verify.check_pairing(cfg.phase, cfg.schottky, t, cfg.sample("quadratureNodes"),
                                                         cfg.tolerance("pairing"), adaptive=_adaptive(cfg))],
    "infinity": lambda cfg, t, rng: [verify.check_infinity(cfg.phase, cfg.schottky, t, cfg.tolerance("infinity"),
                                                           rng=rng, nodes=cfg.sample("quadratureNodes"),
                                                           adaptive=_adaptive(cfg))],
    "antisymmetry": lambda cfg, t, rng: [verify.check_antisymmetry(cfg.phase, cfg.schottky, t, cfg.sample("pairs"),
                                                                   cfg.tolerance("antisymmetry"), rng)],
    "equivariance": lambda cfg, t, rng: [verify.check_equivariance(cfg.phase, cfg.schottky, t,
                                                                   tolerance=cfg.tolerance("equivariance"), rng=rng)],
    "inhomogeneous": lambda cfg, t, rng: [verify.check_inhomogeneous(cfg.phase, cfg.schottky, t,
                                                                     cfg.tolerance("inhomogeneous"), rng)],
    "rmatrix": lambda cfg, t, rng: [verify.check_bracket(cfg.phase, cfg.schottky, t, cfg.sample("pairs"),
                                                         cfg.tolerance("rmatrix"), rng=rng)],
    "lemma3": lambda cfg, t, rng: [verify.check_lemma3_contours(
        cfg.phase, cfg.schottky, t, cfg.sample("epsilon"), cfg.sample("lemma3Length"),
        cfg.sample("lemma3Nodes"), cfg.tolerance("lemma3"), adaptive=_adaptive(cfg))],
    "involution": _run_involution,
    "dybe": _run_dybe,
    "basepoint": _run_basepoint,
    "oracle": lambda cfg, t, rng: [verify.check_oracle(cfg.phase, cfg.schottky, t, cfg.sample("oracleProbes"),
                                                       cfg.tolerance("oracle"), rng=rng)],
}

QUADRATURE_CHECKS = ("pairing", "infinity", "lemma3")


def _failed_report(name, exc, tolerance):
    return verify.CheckReport(name, math.inf, tolerance, 0.0, [], 0.0,
                              {"error": type(exc).__name__, "message": str(exc)})


def run_checks(cfg: RunConfig, names, truncation: TruncationPolicy | None = None):
    """Run the named checks in order; series errors become failing reports."""
    t = truncation or cfg.truncation
    kappa = contraction_factor(cfg.phase, cfg.schottky)
    if kappa >= 1:
        raise ConvergenceCriterionViolated(f"lemma1-criterion: contraction factor {kappa:.6g} >= 1")
    out = []
    for name in names:
        rng = np.random.default_rng([cfg.sample("seed"), list(CHECKS).index(name)])
        log.info("running %s", name)
        try:
            reps = CHECKS[name](cfg, t, rng)
        except ConvergenceCriterionViolated:
            raise
        except SchottkyLaxError as exc:
            log.warning("%s raised %s: %s", name, type(exc).__name__, exc)
            reps = [_failed_report(name, exc, cfg.tolerance(name))]
        for r in reps:
            log.info("%s residual %.3g (tolerance %.3g + budget %.3g)", r.name, r.residual,
                     r.tolerance, r.tail_budget)
        out.extend(reps)
    return out


def validation(cfg: RunConfig):
    rep = validate(cfg.schottky)
    kappa = contraction_factor(cfg.phase, cfg.schottky)
    rep.checks.append(ValidationCheck("lemma1-criterion", kappa < 1, 1 - kappa, f"kappa = {kappa:.6g}"))
    alg = cfg.algebra
    ok = all(alg.contains(x, 1e-10) for x in cfg.phase.xi)
    rep.checks.append(ValidationCheck("xi-in-algebra", ok, 0.0, f"xi_i in {alg.kind}({alg.n})"))
    return rep, kappa


# -- argument handling --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _tolerance(text):
    name, sep, value = text.partition("=")
    if not sep or name not in DEFAULT_TOLERANCES:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE with NAME in {sorted(DEFAULT_TOLERANCES)}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {value!r} is not a number") from None


def _range(text):
    """'a..b' (inclusive) or a comma separated list."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from None


def build_parser():
    parser = _Parser(prog="schottky-lax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("validate", help="check the geometry and the contraction criterion")
    common(p)
    p = sub.add_parser("check", help="run verification checks and emit JSON lines")
    common(p)
    p.add_argument("names", nargs="*", help="check names (default: all)")
    p.add_argument("--checks", metavar="LIST")
    p.add_argument("--max-word-length", type=int)
    p.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="NAME=VAL")
    p = sub.add_parser("scan", help="residual against word length or quadrature nodes, as CSV")
    common(p)
    p.add_argument("--checks", metavar="LIST")
    p.add_argument("--parameter", choices=["maxWordLength", "quadratureNodes"], default="maxWordLength")
    p.add_argument("--range", type=_range, required=True, dest="values", metavar="A..B|LIST")
    p.add_argument("--max-word-length", type=int)
    p.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="NAME=VAL")
    p = sub.add_parser("make-reference", help="write a seeded reference configuration")
    common(p, config=False)
    p.add_argument("kind", choices=sorted(REFERENCES))
    return parser


def _check_names(args, usage):
    names = list(args.names) if getattr(args, "names", None) else []
    if args.checks:
        names += [n for n in args.checks.replace(",", " ").split() if n]
    if not names:
        return list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        usage(f"unknown check(s) {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    return names


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.samples["seed"] = args.seed
    for name, value in getattr(args, "tolerance", []):
        cfg.tolerances[name] = value
    if getattr(args, "max_word_length", None) is not None:
        cfg.truncation = replace(cfg.truncation, max_word_length=args.max_word_length)
    return cfg


def _open_out(path):
    return open(path, "w", newline="") if path else contextlib.nullcontext(sys.stdout)


def cmd_validate(cfg, out):
    rep, kappa = validation(cfg)
    obj = rep.to_json()
    obj["kappa"] = kappa
    out.write(json.dumps(obj, sort_keys=True) + "\n")
    if not rep["lemma1-criterion"].passed:
        log.error("lemma1-criterion failed: kappa = %.6g", kappa)
        return EXIT_PRECONDITION
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_check(cfg, names, out):
    reports = run_checks(cfg, names)
    for r in reports:
        out.write(r.to_line() + "\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_scan(cfg, names, parameter, values, out):
    writer = csv.writer(out)
    writer.writerow(["check", "parameter", "value", "residual", "tolerance", "tailBudget", "pass"])
    if parameter == "quadratureNodes":
        names = [n for n in names if n in QUADRATURE_CHECKS]
    ok = True
    for v in values:
        run = replace(cfg, samples=dict(cfg.samples), tolerances=dict(cfg.tolerances))
        t = cfg.truncation
        if parameter == "maxWordLength":
            t = t.fixed(v)
        else:
            run.samples.update(quadratureNodes=v, lemma3Nodes=v, adaptiveQuadrature=False)
        for r in run_checks(run, names, t):
            writer.writerow([r.name, parameter, v, repr(float(r.residual)), r.tolerance,
                             r.tail_budget, r.passed])
            ok &= r.passed
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SCHOTTKY_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)

    def usage(msg):
        parser.error(msg)

    try:
        if args.command == "make-reference":
            cfg = make_reference(args.kind, 0 if args.seed is None else args.seed)
            with _open_out(args.out) as fh:
                fh.write(cfg.dumps())
            return EXIT_OK
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "validate":
            with _open_out(args.out or cfg.output) as fh:
                return cmd_validate(cfg, fh)
        names = _check_names(args, usage)
        if args.command == "scan" and not args.values:
            usage("empty range")
        with _open_out(args.out or cfg.output) as out:
            if args.command == "check":
                return cmd_check(cfg, names, out)
            return cmd_scan(cfg, names, args.parameter, args.values, out)
    except ConfigParseError as exc:
        print(f"schottky-lax: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceCriterionViolated as exc:
        print(f"schottky-lax: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
