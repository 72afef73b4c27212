"""Command-line front end for the canal hypersurface pipelines.

Configs are flat ``key = value`` text files::

    ambient    = minkowski
    dim        = 4
    kind       = elliptic
    center     = s, 0, 0, 0, 0
    radius     = s^2
    s_domain   = 0.9, 1.1
    resolution = 3
    tolerances = fit=1e-8, structure=1e-5
    output     = elliptic.jsonl

Reports are JSON lines with every float written with 17 significant digits.
Exit codes: 0 success, 1 verification failure, 2 configuration or validation
error, 3 numeric degeneracy.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from canalqc.errors import (
    CanalQCError,
    ConstructionError,
    DegeneracyError,
    EvaluationError,
    ParseError,
    UsageError,
)
from canalqc.exprlang import ProfileSpec
from canalqc.numkit import Signature
from canalqc.qclab import PointClassification, Tolerances, analyze_grid, classify_point
from canalqc.shapes import (
    CanalSpec,
    envelope_residuals,
    is_rotational,
    point_record,
    sample_grid,
    validate_spec,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3

THREADS_ENV = "CANALQC_THREADS"

EXPECTED_CLASS = {"elliptic": 2, "hyperbolic": 3, "parabolic": 4, "euclidean": 1}
ENVELOPE_TOL = 1e-10
XI_ALIGNMENT_TOL = 1e-8


class ConfigError(UsageError):
    """Malformed or incomplete run configuration."""


# ---------------------------------------------------------------------------
# serialization


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "null"
        return "%.17g" % x
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj):
    """One JSON line with 17-significant-digit floats and stable key order."""
    return _fmt(obj)


# ---------------------------------------------------------------------------
# configuration

_KEYS = (
    "ambient",
    "dim",
    "kind",
    "center",
    "radius",
    "s_domain",
    "resolution",
    "tolerances",
    "output",
    "b_perturbation",
    "spectra",
)
_REQUIRED = ("kind", "center", "radius", "s_domain")


def read_pairs(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _split(value):
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_tolerances(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"tolerance override {item!r} is not name=value")
        name, val = (p.strip() for p in item.split("=", 1))
        if name not in Tolerances.names():
            raise ConfigError(f"unknown tolerance {name!r}; known: {', '.join(Tolerances.names())}")
        try:
            out[name] = float(val)
        except ValueError:
            raise ConfigError(f"tolerance {name!r} needs a number, got {val!r}") from None
    return out


@dataclass
class RunConfig:
    kind: str = None
    center: tuple = ()
    radius: str = None
    s_domain: tuple = None
    ambient: str = None
    dim: int = None
    resolution: tuple = (3,)
    tolerances: dict = field(default_factory=dict)
    output: str = None
    b_perturbation: str = None
    spectra: str = None
    base_dir: Path = Path(".")

    @classmethod
    def from_text(cls, text, base_dir=".", need_spec=True):
        pairs = read_pairs(text)
        cfg = cls(base_dir=Path(base_dir))
        if need_spec:
            missing = [k for k in _REQUIRED if k not in pairs]
            if missing:
                raise ConfigError(f"missing required key(s): {', '.join(missing)}")
        if "kind" in pairs:
            cfg.kind = pairs["kind"]
        if "center" in pairs:
            cfg.center = tuple(_split(pairs["center"]))
        if "radius" in pairs:
            cfg.radius = pairs["radius"]
        if "s_domain" in pairs:
            dom = _split(pairs["s_domain"])
            try:
                cfg.s_domain = tuple(float(x) for x in dom)
            except ValueError:
                raise ConfigError("s_domain needs two numbers 'lo, hi'") from None
            if len(cfg.s_domain) != 2:
                raise ConfigError("s_domain needs two numbers 'lo, hi'")
        if "ambient" in pairs:
            if pairs["ambient"] not in ("euclidean", "minkowski"):
                raise ConfigError("ambient must be 'euclidean' or 'minkowski'")
            cfg.ambient = pairs["ambient"]
        if "dim" in pairs:
            try:
                cfg.dim = int(pairs["dim"])
            except ValueError:
                raise ConfigError("dim must be an integer") from None
        if "resolution" in pairs:
            try:
                cfg.resolution = tuple(int(x) for x in _split(pairs["resolution"]))
            except ValueError:
                raise ConfigError("resolution must be integers") from None
        if "tolerances" in pairs:
            cfg.tolerances = _parse_tolerances(_split(pairs["tolerances"]))
        cfg.output = pairs.get("output")
        cfg.b_perturbation = pairs.get("b_perturbation")
        cfg.spectra = pairs.get("spectra")
        return cfg

    @classmethod
    def load(cls, path, need_spec=True):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text, base_dir=path.parent, need_spec=need_spec)

    def spec(self):
        if self.dim is not None and self.dim + 1 != len(self.center):
            raise ConfigError(
                f"dim = {self.dim} needs {self.dim + 1} center coordinates, got {len(self.center)}"
            )
        ambient = self.ambient
        if ambient is None:
            ambient = "euclidean" if self.kind == "euclidean" else "minkowski"
        sig = Signature.euclidean(len(self.center)) if ambient == "euclidean" else Signature.minkowski(len(self.center))
        return CanalSpec.from_strings(self.kind, self.center, self.radius, self.s_domain, ambient=sig)

    def resolution_for(self, n):
        if len(self.resolution) == 1:
            return self.resolution * n
        if len(self.resolution) != n:
            raise ConfigError(f"resolution needs 1 or {n} entries, got {len(self.resolution)}")
        return self.resolution

    def tol(self, extra=None):
        merged = dict(self.tolerances)
        merged.update(extra or {})
        return Tolerances().override(**merged)

    def b_override(self):
        if not self.b_perturbation:
            return None
        prof = ProfileSpec.from_source(self.b_perturbation, self.s_domain or (0.0, 0.0))

        def perturb(params, b):
            return b + prof(params[0])

        return perturb

    def resolve(self, name):
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p


# ---------------------------------------------------------------------------
# commands


def _checked_spec(cfg):
    spec = cfg.spec()
    report = validate_spec(spec)
    if not report.valid:
        raise ConstructionError(f"{spec.kind} spec rejected: {report.message}")
    return spec


def cmd_construct(cfg, threads=1, tol_overrides=None):
    spec = _checked_spec(cfg)
    pts = sample_grid(spec, cfg.resolution_for(spec.n), threads=threads)
    return [dumps(point_record(p)) for p in pts], EXIT_OK


def _point_row(pa):
    row = {"index": list(pa.index), "params": list(pa.params)}
    if pa.point is not None:
        row["position"] = pa.point.position
    if pa.qc is not None:
        q = pa.qc
        row.update(
            a=q.a,
            b=q.b,
            k=q.k,
            a_plus_k2=None if q.k is None else q.a + q.k * q.k,
            **{"class": q.class_label},
            fit_residual=q.fit_residual,
            xi=q.xi,
        )
    if pa.curvature is not None:
        row["shape_spectrum"] = pa.curvature.shape_values
        row["gauss_residual"] = pa.curvature.gauss_residual
        row["weyl_ratio"] = pa.curvature.weyl_ratio
    if pa.classification is not None:
        row["label"] = pa.classification.label
    if pa.local is not None:
        row["k_fit"] = pa.local.k_beta
        row["codazzi"] = pa.local.codazzi
        row["structure"] = pa.local.residuals.as_dict()
    if pa.embedding is not None:
        row["recovered_center"] = pa.embedding.recovered_center
        row["recovered_radius"] = pa.embedding.recovered_radius
    row["flags"] = list(pa.flags)
    if pa.error is not None:
        row["error"] = pa.error
    return row


def _per_generator(grid):
    rows = {}
    for p in grid.valid:
        rows.setdefault(p.index[0], []).append(p)
    out = []
    for i in sorted(rows):
        pts = rows[i]
        a = float(np.mean([p.qc.a for p in pts]))
        b = float(np.mean([p.qc.b for p in pts]))
        k = float(np.mean([p.qc.k for p in pts]))
        out.append({"s": pts[0].params[0], "a": a, "b": b, "k": k, "a_plus_k2": a + k * k})
    return out


def _run_analysis(cfg, threads, tol_overrides):
    spec = _checked_spec(cfg)
    if spec.n < 4:
        raise ConfigError("QC verdicts need dim >= 4")
    tol = cfg.tol(tol_overrides)
    grid = analyze_grid(spec, cfg.resolution_for(spec.n), threads=threads, tol=tol, b_override=cfg.b_override())
    if not grid.valid:
        first = next((p.error for p in grid.points if p.error), "no valid points")
        raise DegeneracyError(f"no point could be analyzed: {first}")
    return spec, tol, grid


def _aggregate(spec, tol, grid):
    labels = grid.class_labels
    emb = grid.embedding_consistency()
    invalid = [p for p in grid.points if not p.ok]
    return {
        "aggregate": True,
        "kind": spec.kind,
        "points": len(grid.points),
        "valid_points": len(grid.valid),
        "excluded": [{"index": list(p.index), "flags": list(p.flags), "error": p.error} for p in invalid],
        "rotational": is_rotational(spec),
        "max_fit_residual": grid.fit_residual,
        "max_gauss_residual": grid.gauss_residual,
        "max_weyl_ratio": grid.weyl_ratio,
        "max_xi_alignment_defect": grid.xi_alignment_defect,
        "max_k_discrepancy": grid.k_discrepancy,
        "max_grad_tau_defect": grid.grad_tau_defect,
        "structure": grid.structure.as_dict(),
        "codazzi_residual": grid.codazzi,
        "embedding": None if emb is None else {"center_spread": emb[0], "center_error": emb[1], "radius_error": emb[2]},
        "generators": _per_generator(grid),
        "verdicts": {
            "qc": not invalid and grid.fit_residual <= tol.fit,
            "class": labels[0] if len(labels) == 1 else None,
            "class_matches_kind": labels == [EXPECTED_CLASS[spec.kind]],
            "gauss": grid.gauss_residual <= tol.gauss,
            "conformally_flat": grid.weyl_ratio <= tol.weyl,
            "subprojective": grid.structure.subprojective_part <= tol.structure,
        },
    }


def cmd_analyze(cfg, threads=1, tol_overrides=None):
    spec, tol, grid = _run_analysis(cfg, threads, tol_overrides)
    lines = [dumps(_point_row(p)) for p in grid.points]
    lines.append(dumps(_aggregate(spec, tol, grid)))
    return lines, EXIT_OK


def _check(name, value, threshold, relation="<="):
    if value is None:
        passed = False
    elif relation == "<=":
        passed = value <= threshold
    else:
        passed = value > threshold
    return {"check": name, "value": value, "threshold": threshold, "relation": relation, "passed": bool(passed)}


def verification_checks(spec, tol, grid):
    """Named pass/fail checks with their residuals and thresholds."""
    st = grid.structure
    env = max(max(abs(r) for r in envelope_residuals(p.point)) for p in grid.points if p.point is not None)
    emb = grid.embedding_consistency()
    subproj = st.subprojective_part <= tol.structure
    rotational = is_rotational(spec)
    checks = [
        _check("all_points_valid", float(len(grid.points) - len(grid.valid)), 0.0),
        _check("envelope", env, ENVELOPE_TOL),
        _check("qc_fit", grid.fit_residual, tol.fit),
        _check("gauss", grid.gauss_residual, tol.gauss),
        _check("weyl", grid.weyl_ratio, tol.weyl),
        _check("xi_alignment", grid.xi_alignment_defect, XI_ALIGNMENT_TOL),
        _check("class_matches_kind", 0.0 if grid.class_labels == [EXPECTED_CLASS[spec.kind]] else 1.0, 0.0),
        _check("r_da", st.r_da, tol.structure),
        _check("r_deta_hor", st.r_deta_hor, tol.structure),
        _check("r_theta", st.r_theta, tol.structure),
        _check("r_umb", st.r_umb, tol.structure),
        _check("r_dk", st.r_dk, tol.structure),
        _check("k_consistency", grid.k_discrepancy, tol.structure),
        _check("codazzi", grid.codazzi, tol.codazzi),
    ]
    if emb is not None:
        checks += [
            _check("embedding_center_spread", emb[0], tol.embedding),
            _check("embedding_center", emb[1], tol.embedding),
            _check("embedding_radius", emb[2], tol.embedding),
        ]
    checks.append(_check("subprojective", st.subprojective_part, tol.structure))
    if rotational:
        dichotomy = subproj
    else:
        dichotomy = min(st.r_subproj_db, st.r_geodesic, st.r_deta_full) > tol.subproj_fail
    checks.append(_check("rotational_dichotomy", 0.0 if dichotomy else 1.0, 0.0))
    if subproj and grid.grad_tau_defect is not None:
        checks.append(_check("grad_tau_alignment", grid.grad_tau_defect, tol.grad_tau))
    return checks


def cmd_verify(cfg, threads=1, tol_overrides=None):
    spec, tol, grid = _run_analysis(cfg, threads, tol_overrides)
    checks = verification_checks(spec, tol, grid)
    failed = [c["check"] for c in checks if not c["passed"]]
    lines = [dumps(c) for c in checks]
    lines.append(dumps({"aggregate": True, "kind": spec.kind, "passed": not failed, "failed": failed}))
    return lines, EXIT_FAIL if failed else EXIT_OK


def _spectrum_from_line(line, lineno):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spectra line {lineno}: {exc.msg}") from None
    if isinstance(obj, dict):
        obj = obj.get("spectrum", obj.get("shape_spectrum"))
    if not isinstance(obj, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
        raise ConfigError(f"spectra line {lineno}: expected a list of numbers")
    return obj


def classify_lines(lines, tol):
    out = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        vals = _spectrum_from_line(line, lineno)
        try:
            pc = classify_point(vals, tol=tol.classify)
        except UsageError as exc:
            raise ConfigError(f"spectra line {lineno}: {exc}") from None
        out.append(dumps(_classification_row(pc)))
    return out


def _classification_row(pc: PointClassification):
    return {"label": pc.label, "alpha": pc.alpha, "beta": pc.beta, "multiplicity_gap": pc.multiplicity_gap}


def cmd_classify(cfg, threads=1, tol_overrides=None):
    if not cfg.spectra:
        raise ConfigError("classify needs a 'spectra' key naming a JSON-lines file")
    path = cfg.resolve(cfg.spectra)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read spectra file {path}: {exc.strerror}") from None
    return classify_lines(text.splitlines(), cfg.tol(tol_overrides)), EXIT_OK


COMMANDS = {
    "construct": cmd_construct,
    "analyze": cmd_analyze,
    "classify": cmd_classify,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# entry point


def _default_threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        val = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if val < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return val


def build_parser():
    parser = argparse.ArgumentParser(
        prog="canalqc",
        description="Construct and analyze canal hypersurfaces of quasi-constant sectional curvature.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="flat key = value run configuration")
    parser.add_argument("--out", help="output path (overrides the config 'output' key; '-' for stdout)")
    parser.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    parser.add_argument(
        "--tol", action="append", default=[], metavar="NAME=VALUE", help="override a named tolerance"
    )
    return parser


def _write(lines, target):
    text = "".join(line + "\n" for line in lines)
    if target is None or target == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    Path(target).write_text(text)


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        threads = args.threads if args.threads is not None else _default_threads()
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        overrides = _parse_tolerances(args.tol)
        cfg = RunConfig.load(args.config, need_spec=args.command != "classify")
        lines, code = COMMANDS[args.command](cfg, threads=threads, tol_overrides=overrides)
    except DegeneracyError as exc:
        print(f"canalqc: numeric degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, UsageError, ConstructionError, ParseError, EvaluationError, CanalQCError) as exc:
        print(f"canalqc: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    target = args.out if args.out is not None else (str(cfg.resolve(cfg.output)) if cfg.output else None)
    _write(lines, target)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
