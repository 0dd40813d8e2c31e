"""``affine-dim`` command line interface.

Exit codes: 0 success, 1 malformed spec (JSON or schema), 2 violated
mathematical precondition (singular or non-contracting matrix, missing
splitting, budget exceeded).
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np
from jsonschema import Draft202012Validator

from .dimension import dimension_report
from .geometry import AffineIFS, InsufficientResolutionError, box_dimension_estimate, check_ssc, export_csv, export_svg, point_cloud
from .matrix_core import Mat2, SingularMatrixError
from .pressure import (
    BudgetExceededError,
    NonContractingError,
    affinity_dimension,
    check_contracting,
    default_pressure_depth,
    pressure_from_logs,
    word_log_singular_values,
)
from .splitting import SplittingCertificate, find_backward_invariant_multicone, stable_direction, strong_stable_direction
from .thermo import Potential, default_cylinder_depth, thermo_report
from .transversality import certify_translation_transversality, class_membership

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_CLOUD_BUDGET = 2**16

_number = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}

SPEC_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "matrices"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "matrices": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": _number, "minItems": 4, "maxItems": 4},
        },
        "translations": {
            "type": "array",
            "items": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        },
        "potential": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["kaenmaki", "bernoulli", "constant"]},
                "s": {"type": "number", "minimum": 0, "maximum": 2},
                "weights": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "value": _number,
            },
        },
        "budgets": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pressure_depth": _pos_int,
                "cylinder_depth": _pos_int,
                "cloud_depth": _pos_int,
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pressure": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


class SpecError(Exception):
    """Malformed spec file (exit code 1)."""


class PreconditionError(Exception):
    """Well-formed input that violates a mathematical precondition (exit code 2)."""


def load_spec(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"{path}: cannot read spec: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    errors = sorted(Draft202012Validator(SPEC_SCHEMA).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            field = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}: field '{field}' (line {_line_of(text, e.absolute_path)}): {e.message}")
        raise SpecError("\n".join(lines))
    N = len(data["matrices"])
    if "translations" in data and len(data["translations"]) != N:
        raise SpecError(f"{path}: field 'translations': expected {N} entries, got {len(data['translations'])}")
    pot = data.get("potential", {})
    if pot.get("kind") == "bernoulli" and len(pot.get("weights", [])) != N:
        raise SpecError(f"{path}: field 'potential/weights': expected {N} weights")
    if pot.get("kind") == "constant" and "value" not in pot:
        raise SpecError(f"{path}: field 'potential/value': required for a constant potential")
    return data


def _line_of(text: str, path) -> int:
    """Best-effort line of the first key on ``path``; 1 when it cannot be located."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return 1
    needle = f'"{keys[-1]}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return 1


def system_from_spec(spec: dict) -> list[Mat2]:
    system = [Mat2.from_flat(m) for m in spec["matrices"]]
    try:
        check_contracting(system)
    except NonContractingError as exc:
        raise PreconditionError(str(exc)) from exc
    return system


def _num(value, error) -> dict:
    return {"value": _clean(value), "error": _clean(error)}


def _clean(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _clean(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_sanitize(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(text: str, out_dir: Path | None, name: str, stdout) -> None:
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text)
    else:
        stdout.write(text)


def _pressure_depth(spec, args, N) -> int:
    if args.depth is not None:
        return args.depth
    return spec.get("budgets", {}).get("pressure_depth", min(10, default_pressure_depth(N)))


def _certificate(system) -> SplittingCertificate:
    cert = find_backward_invariant_multicone(system)
    if not isinstance(cert, SplittingCertificate):
        raise PreconditionError(f"dominated splitting not certified: {cert.reason}")
    return cert


def _potential(spec, s0: float) -> Potential:
    pot = spec.get("potential", {"kind": "kaenmaki"})
    kind = pot["kind"]
    if kind == "kaenmaki":
        return Potential.kaenmaki(min(2.0, pot.get("s", s0)))
    if kind == "bernoulli":
        return Potential.bernoulli(pot["weights"])
    return Potential.constant(pot["value"])


def _thermo_block(system, potential, k, cert, rng):
    rep, _ = thermo_report(system, potential, k, cert, rng)
    prev = thermo_report(system, potential, k - 1, cert, rng)[0] if k > 1 else None

    def diff(name):
        return abs(getattr(rep, name) - getattr(prev, name)) if prev else None

    block = {
        name: _num(getattr(rep, name), diff(name))
        for name in ("P", "h", "chi_s", "chi_ss", "gibbs_C", "qb_C", "lyapunov_word_check")
    }
    block["block_entropy_gap"] = _num(rep.block_entropy_gap, None)
    block["cylinder_depth"] = rep.depth
    block["potential"] = rep.potential
    return rep, prev, block


def cmd_dimension(spec: dict, args, rng) -> dict:
    system = system_from_spec(spec)
    N = len(system)
    depth = _pressure_depth(spec, args, N)
    tol = args.tol if args.tol is not None else spec.get("tolerances", {}).get("pressure", 1e-4)
    ad = affinity_dimension(system, n_max=depth, tol=tol, estimator="increment")
    ad_avg = affinity_dimension(system, n_max=depth, tol=tol)
    report: dict[str, Any] = {
        "command": "dimension",
        "version": SCHEMA_VERSION,
        "seed": args.seed,
        "maps": N,
        "affinity_dimension": {
            "s0": _num(ad.s0, ad.error_bound),
            "s0_average": _num(ad_avg.s0, ad_avg.error_bound),
            "estimator": "increment",
            "depth": ad.depth,
            "warnings": ad.warnings + ad_avg.warnings,
        },
    }
    cert = find_backward_invariant_multicone(system)
    if isinstance(cert, SplittingCertificate):
        report["splitting"] = {
            "status": "certified",
            "method": cert.method,
            "cone": {"start": _num(cert.cone.start, 0.0), "width": _num(cert.cone.width, 0.0)},
            "margin": _num(cert.margin, 0.0),
            "beta": _num(cert.beta, None),
            "C_gap": _num(cert.C_gap, None),
        }
    else:
        report["splitting"] = {"status": cert.status, "reason": cert.reason}

    ssc_status = None
    if "translations" in spec:
        ifs = AffineIFS(system, spec["translations"])
        ssc = check_ssc(ifs)
        ssc_status = ssc.status
        report["ssc"] = {"status": ssc.status, "pair": ssc.pair, "depth": ssc.depth}
        if ssc.status == "verified" and ad.raw_root >= 2.0:
            report["affinity_dimension"]["warnings"].append(
                "strong separation verified but the pressure root is not below 2"
            )
        cloud_depth = spec.get("budgets", {}).get("cloud_depth")
        if cloud_depth is None:
            cloud_depth = max(1, int(math.log(DEFAULT_CLOUD_BUDGET) / math.log(N))) if N > 1 else 1
        try:
            box = box_dimension_estimate(point_cloud(ifs, cloud_depth))
            report["box_dimension"] = {
                **_num(box.slope, max(abs(r) for r in box.residuals)),
                "scales": box.scales,
                "counts": box.counts,
                "cloud_depth": cloud_depth,
            }
        except (InsufficientResolutionError, BudgetExceededError) as exc:
            report["box_dimension"] = {"value": None, "error": None, "reason": str(exc)}
    else:
        report["ssc"] = {"status": "not_checked", "pair": None, "depth": 0}

    if isinstance(cert, SplittingCertificate):
        k = spec.get("budgets", {}).get("cylinder_depth", default_cylinder_depth(N))
        potential = _potential(spec, ad.s0)
        rep, prev, block = _thermo_block(system, potential, k, cert, rng)
        if "s" in block["potential"]:
            given = "s" in spec.get("potential", {})
            block["potential"]["s"] = _num(block["potential"]["s"], 0.0 if given else ad.error_bound)
        if "value" in block["potential"]:
            block["potential"]["value"] = _num(block["potential"]["value"], 0.0)
        report["thermo"] = block
        dr = dimension_report(
            ad.s0, rep.h, rep.chi_s, rep.chi_ss, system, relaxed=args.relaxed_bound,
            ssc=None if ssc_status is None else ssc_status == "verified", dominated=True,
        )
        dr_prev = dimension_report(ad.s0, prev.h, prev.chi_s, prev.chi_ss) if prev else None

        def movement(name):
            return abs(getattr(dr, name) - getattr(dr_prev, name)) if dr_prev else None

        report["dimension"] = {
            "lyapunov_dim": _num(dr.lyapunov_dim, movement("lyapunov_dim")),
            "ly_dim": _num(dr.ly_dim, movement("ly_dim")),
            "ess_pushforward_dim": _num(dr.ess_pushforward_dim, movement("ess_pushforward_dim")),
            "ess_upper_bound_only": dr.ess_upper_bound_only,
            "condition_flags": dr.condition_flags,
            "measured": {k_: _num(v, 0.0) for k_, v in dr.measured.items()},
            "notes": dr.notes,
        }
    else:
        cm = class_membership(system, s0=ad.s0)
        flags = {"M": cm.M, "N": cm.N, "O_N": cm.O, "dominated_splitting": False}
        if args.relaxed_bound:
            flags["O_N_relaxed"] = cm.O_relaxed
        report["dimension"] = {"condition_flags": flags, "notes": ["no splitting certificate; thermodynamic quantities skipped"]}
    report["dimension_chain_applicable"] = bool(
        ssc_status == "verified" and isinstance(cert, SplittingCertificate)
    )
    return report


def _s_grid(args) -> list[float]:
    if args.s_grid:
        try:
            return [float(s) for s in args.s_grid.split(",")]
        except ValueError as exc:
            raise SpecError(f"--s-grid: {exc}") from exc
    return [0.25 * i for i in range(9)]


def cmd_pressure(spec: dict, args, rng) -> str:
    system = system_from_spec(spec)
    depth = _pressure_depth(spec, args, len(system))
    grid = _s_grid(args)
    buf = io.StringIO()
    buf.write("n,s,P_n\n")
    for n in range(1, depth + 1):
        la1, la2 = word_log_singular_values(system, n)
        for s in grid:
            buf.write(f"{n},{s:.17g},{pressure_from_logs(la1, la2, s, n):.17g}\n")
    return buf.getvalue()


def _words(args, N: int, depth: int, rng) -> list[tuple[int, ...]]:
    if args.words:
        out = []
        for w in args.words.split(","):
            try:
                word = tuple(int(ch) for ch in (w.split("-") if "-" in w else w))
            except ValueError as exc:
                raise SpecError(f"--words: bad word {w!r}") from exc
            if not word or any(not 0 <= i < N for i in word):
                raise SpecError(f"--words: word {w!r} has symbols outside 0..{N - 1}")
            out.append(word)
        return out
    return [tuple(int(i) for i in rng.integers(0, N, size=depth)) for _ in range(10)]


def cmd_directions(spec: dict, args, rng) -> str:
    system = system_from_spec(spec)
    cert = _certificate(system)
    depth = args.depth if args.depth is not None else 12
    buf = io.StringIO()
    buf.write("word,es_angle,ess_angle,es_error,ess_error\n")
    for w in _words(args, len(system), depth, rng):
        es, es_err = stable_direction(system, w, len(w), cert)
        ess, ess_err = strong_stable_direction(system, w, len(w), cert)
        label = "".join(map(str, w)) if len(system) <= 10 else "-".join(map(str, w))
        buf.write(f"{label},{es.theta:.17g},{ess.theta:.17g},{es_err:.17g},{ess_err:.17g}\n")
    return buf.getvalue()


def cmd_transversality(spec: dict, args, rng) -> dict:
    system = system_from_spec(spec)
    cm = class_membership(system)
    tc = certify_translation_transversality(system, rng=rng)
    return {
        "command": "transversality",
        "version": SCHEMA_VERSION,
        "seed": args.seed,
        "maps": len(system),
        "class_flags": {"M": cm.M, "N": cm.N},
        "measured": {k: _num(v, 0.0) for k, v in cm.measured.items()},
        "certified": tc.certified,
        "delta": _num(tc.delta, 2.0**-20),
        "contraction": _num(tc.contraction, 0.0),
        "derivative_lower_bound": _num(tc.derivative_bound, 0.0),
        "finite_difference_min": _num(tc.fd_min, 1e-6 if tc.fd_min is not None else None),
        "pairs_checked": tc.pairs_checked,
        "reason": tc.reason,
    }


def cmd_render(spec: dict, args, rng) -> tuple[str, str]:
    system = system_from_spec(spec)
    if "translations" not in spec:
        raise PreconditionError("render needs translations")
    ifs = AffineIFS(system, spec["translations"])
    N = len(system)
    depth = args.depth
    if depth is None:
        depth = spec.get("budgets", {}).get("cloud_depth", max(1, int(14 * math.log(2) / math.log(N))) if N > 1 else 1)
    cloud = point_cloud(ifs, depth)
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    csv_path = export_csv(cloud, out / "cloud.csv")
    svg_path = export_svg(cloud, out / "cloud.svg")
    return str(csv_path), str(svg_path)


COMMANDS = ("dimension", "pressure", "directions", "transversality", "render")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="affine-dim", description="Dimension theory of planar self-affine systems.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", required=True, help="JSON system spec (version 1)")
    p.add_argument("--seed", type=int, default=0, help="seed for all sampled checks (default 0)")
    p.add_argument("--out", help="output directory (default: stdout, or the working directory for render)")
    p.add_argument("--depth", type=int, help="override the depth budget of the command")
    p.add_argument("--tol", type=float, help="pressure root tolerance")
    p.add_argument("--relaxed-bound", action="store_true", help="also report the 3/2 bound on s0")
    p.add_argument("--s-grid", help="comma-separated s values for the pressure command")
    p.add_argument("--words", help="comma-separated words (digits, or dash-separated) for directions")
    return p


def main(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    if args.depth is not None and args.depth < 1:
        stderr.write("error: --depth must be >= 1\n")
        return 1
    rng = np.random.default_rng(args.seed)
    out_dir = Path(args.out) if args.out else None
    try:
        spec = load_spec(args.spec)
        if args.command == "dimension":
            _emit(dumps(cmd_dimension(spec, args, rng)), out_dir, "dimension.json", stdout)
        elif args.command == "pressure":
            _emit(cmd_pressure(spec, args, rng), out_dir, "pressure.csv", stdout)
        elif args.command == "directions":
            _emit(cmd_directions(spec, args, rng), out_dir, "directions.csv", stdout)
        elif args.command == "transversality":
            _emit(dumps(cmd_transversality(spec, args, rng)), out_dir, "transversality.json", stdout)
        else:
            csv_path, svg_path = cmd_render(spec, args, rng)
            stdout.write(f"{csv_path}\n{svg_path}\n")
    except SpecError as exc:
        stderr.write(f"error: {exc}\n")
        return 1
    except (PreconditionError, NonContractingError, SingularMatrixError, BudgetExceededError) as exc:
        stderr.write(f"precondition violated: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
