"""Command-line interface with machine-readable JSON reports.

Every command prints one JSON document with sorted keys and floats fixed
at seventeen significant digits, so identical configurations produce byte
identical output.  Exit codes: 0 success, 2 invalid input, 3 numerical
failure, 4 empty moduli for a mesh request.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from fractions import Fraction

import numpy as np

from .algebra import eigenvalues_2x2
from .config import Tolerances, default_tolerances
from .errors import (
    BadEdge,
    BigonRequiresAcute,
    NonSL2Input,
    NotPositiveDefinite,
    NotUnitarizable,
    NullStructureViolation,
    SingularPathPoint,
    StepUnderflow,
    TrinoidError,
    ZeroCoefficient,
)
from .fuchsian import Source, make_path_plan, monodromy, projective_equivalence
from .moduli import (
    Status,
    classify,
    conical_data,
    fh_attach_bigon,
    fh_attach_hemisphere,
    hanbetu_holds,
    irreducible_exists,
    reduce_angles,
    type_signature,
)
from .surface import (
    build_mesh,
    export_obj,
    export_ply,
    recover_weierstrass,
    sample_grid,
    transport_frame,
    well_definedness_defect,
)
from .trinoid_data import build_trinoid_data, hypergeometric_params
from .unitarize import family_representation, unitarizer_space

SCHEMA_VERSION = 1

_EMPTYISH = (Status.EMPTY, Status.EXCLUDED_ANGLE_IS_PI, Status.DEGENERATE_HANBETU)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Parsed invocation: angles in radians plus every knob a command reads."""

    angles: tuple[float, float, float]
    units: str = "pi"
    target: str = "h3"
    tol: Tolerances = dataclasses.field(default_factory=default_tolerances)
    tol_ode: float | None = None
    base_point: complex | None = None
    rings: int | None = None
    sectors: int | None = None
    deform: tuple[float, ...] | None = None
    seed: int | None = None
    out: str | None = None
    fmt: str = "obj"
    json_path: str | None = None


# ---------------------------------------------------------------------------
# canonical JSON


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(float(x), ".17g")


def _json_text(obj) -> str:
    """Serialize with sorted keys and fixed float formatting."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, complex):
        return _json_text({"re": obj.real, "im": obj.imag})
    if isinstance(obj, dict):
        items = sorted(obj.items())
        inner = ",".join(f"{json.dumps(str(k))}:{_json_text(v)}" for k, v in items)
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_json_text(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _matrix_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def _angles_json(angles) -> dict:
    return {
        "pi_multiples": [x / math.pi for x in angles],
        "radians": list(angles),
    }


def _class_json(mc) -> dict:
    return {
        "status": mc.status.value,
        "dimension": mc.dimension,
        "labeling": list(mc.labeling) if mc.labeling else None,
        "flags": list(mc.flags),
    }


# ---------------------------------------------------------------------------
# commands


def cmd_classify(cfg: RunConfig) -> dict:
    """Classification report: exponents, existence gates, both targets."""
    b = cfg.angles
    cone = conical_data(b)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "classify",
        "angles": _angles_json(b),
        "target": cfg.target,
        "seed": cfg.seed,
        "beta": list(cone.beta),
        "c": list(cone.c),
        "hanbetu": hanbetu_holds(cone, cfg.tol),
        "irreducible_quadratic": irreducible_exists(b),
        "irreducible_reduced_sum": sum(reduce_angles(b)) > math.pi,
        "h3": _class_json(classify(b, target="h3", tol=cfg.tol)),
        "s2": _class_json(classify(b, target="s2", tol=cfg.tol)),
    }
    try:
        report["type_signature"] = list(type_signature(cone))
    except ZeroCoefficient:
        report["type_signature"] = None
    hyper = hypergeometric_params(b)
    report["hypergeometric"] = {"a": hyper.a, "b": hyper.b, "c": hyper.c}
    return report


def cmd_monodromy(cfg: RunConfig) -> dict:
    """Monodromy report: generators, eigenvalue checks, unitarizability."""
    b = cfg.angles
    data = build_trinoid_data(b, cfg.tol)
    plan = make_path_plan(data, base_point=cfg.base_point, tol=cfg.tol)
    rep = monodromy(data, plan=plan, tol_ode=cfg.tol_ode, tol=cfg.tol)
    scalar = monodromy(
        data, plan=plan, source=Source.SCALAR_ODE, tol_ode=cfg.tol_ode, tol=cfg.tol
    )
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "monodromy",
        "angles": _angles_json(b),
        "seed": cfg.seed,
        "base_point": complex(plan.base_point),
        "det_drift": rep.det_drift,
        "err_estimate": rep.err_estimate,
        "scalar_matrix_equivalent": projective_equivalence(rep, scalar, cfg.tol),
        "generators": {},
    }
    for name, rho, angle in (
        ("rho1", rep.rho1, b[0]),
        ("rho2", rep.rho2, b[1]),
        ("rho3", rep.rho3, b[2]),
    ):
        lam = eigenvalues_2x2(rho)
        trace = complex(rho[0, 0] + rho[1, 1])
        expected = -2.0 * math.cos(angle)
        report["generators"][name] = {
            "matrix": _matrix_json(rho),
            "eigenvalues": [complex(lam[0]), complex(lam[1])],
            "trace": trace,
            "expected_trace": expected,
            "trace_defect": abs(trace - expected),
        }
    try:
        space = unitarizer_space(rep, b, cfg.tol)
        report["unitarizable"] = True
        report["unitarizer_kind"] = space.kind.value
        report["unitarizer_dimension"] = space.dim
        report["unitarizer_source"] = "ode"
    except NotUnitarizable as exc:
        # a reducible triple on the resonance boundary has Jordan loop
        # transports that no conjugation makes unitary; the moduli space
        # is still realized by the diagonal family representation, so the
        # report falls back to it for the space kind
        report["unitarizable"] = False
        report["unitarizable_detail"] = str(exc)
        verdict = classify(b, target="h3", tol=cfg.tol)
        if verdict.status in (Status.REDUCIBLE_C1, Status.REDUCIBLE_C2):
            space = unitarizer_space(family_representation(b, cfg.tol), b, cfg.tol)
            report["unitarizer_kind"] = space.kind.value
            report["unitarizer_dimension"] = space.dim
            report["unitarizer_source"] = "family"
        else:
            report["unitarizer_kind"] = None
            report["unitarizer_dimension"] = None
            report["unitarizer_source"] = None
    return report


def cmd_mesh(cfg: RunConfig) -> dict:
    """Generate and export the mesh, reporting residual diagnostics."""
    b = cfg.angles
    if cfg.target != "h3":
        raise ValueError("mesh generation supports the h3 target only")
    verdict = classify(b, target="h3", tol=cfg.tol)
    if verdict.status in _EMPTYISH:
        raise _EmptyModuli(f"no surface to mesh: classification is {verdict.status.value}")

    data = build_trinoid_data(b, cfg.tol)
    rep = monodromy(data, tol_ode=cfg.tol_ode, tol=cfg.tol)
    space = unitarizer_space(rep, b, cfg.tol)
    deform = cfg.deform
    if deform is None:
        deform = (0.0,) * space.dim
    if len(deform) != space.dim:
        raise ValueError(
            f"expected {space.dim} deformation parameters for kind "
            f"{space.kind.value}, got {len(deform)}"
        )
    conj = space.sample(np.asarray(deform, dtype=float))

    grid_kwargs = {}
    if cfg.rings is not None:
        grid_kwargs["rings"] = cfg.rings
    if cfg.sectors is not None:
        grid_kwargs["sectors"] = cfg.sectors
    grid = sample_grid(data, tol=cfg.tol, **grid_kwargs)
    transport = transport_frame(data, grid, tol_ode=cfg.tol_ode, tol=cfg.tol)
    weier = recover_weierstrass(transport, data, cfg.tol)
    mesh = build_mesh(data, conj, grid, transport=transport, weier=weier, tol=cfg.tol)

    out = cfg.out or f"trinoid.{cfg.fmt}"
    if cfg.fmt == "ply":
        export_ply(mesh, out)
    else:
        export_obj(mesh, out)

    idx = np.flatnonzero(weier.numeric)
    z = grid.vertices[idx]
    qhat = np.array([data.hopf(zz) for zz in z])
    rel = np.abs(weier.omega[idx] * weier.dg[idx] - qhat) / np.abs(qhat)

    rng = np.random.default_rng(cfg.seed if cfg.seed is not None else 0)
    checks = []
    for e in range(3):
        for k in sorted(rng.choice(grid.rings, size=min(2, grid.rings), replace=False)):
            s = int(rng.integers(grid.sectors))
            v = grid.annulus_index(e, int(k), s)
            checks.append(
                {
                    "vertex": int(v),
                    "defect": well_definedness_defect(transport, conj, v, tol=cfg.tol),
                }
            )
    worst = max(c["defect"] for c in checks)

    return {
        "schema_version": SCHEMA_VERSION,
        "command": "mesh",
        "angles": _angles_json(b),
        "seed": cfg.seed,
        "classification": _class_json(verdict),
        "unitarizer_kind": space.kind.value,
        "deformation": list(deform),
        "grid": {"rings": grid.rings, "sectors": grid.sectors},
        "files": [str(out)],
        "format": cfg.fmt,
        "n_vertices": grid.n_vertices,
        "n_faces": int(len(grid.faces)),
        "max_det_defect": transport.stats["max_det_defect"],
        "max_omega_dg_residual": float(rel.max()),
        "well_definedness": {
            "checks": checks,
            "max_defect": worst,
            "passed": bool(worst < cfg.tol.well_defined),
        },
    }


def cmd_fh(cfg: RunConfig, op: str, edge=None, vertex=None, edge_other=None) -> dict:
    """Angle surgery report: classification before and after."""
    b = cfg.angles
    before = classify(b, target=cfg.target, tol=cfg.tol)
    if op == "hemisphere":
        if edge is None:
            raise ValueError("hemisphere surgery needs --edge i,j")
        after_angles = fh_attach_hemisphere(b, edge)
    elif op == "bigon":
        if vertex is None or edge_other is None:
            raise ValueError("bigon surgery needs --vertex and --edge-other")
        after_angles = fh_attach_bigon(b, vertex, edge_other)
    else:
        raise ValueError(f"unknown surgery {op!r}")
    after = classify(after_angles, target=cfg.target, tol=cfg.tol)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "fh",
        "operation": op,
        "target": cfg.target,
        "angles_before": _angles_json(b),
        "angles_after": _angles_json(after_angles),
        "before": _class_json(before),
        "after": _class_json(after),
    }


# ---------------------------------------------------------------------------
# argument plumbing


class _EmptyModuli(TrinoidError):
    pass


def _parse_angles(text: str, units: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated angles, got {text!r}")
    vals = []
    for p in parts:
        try:
            vals.append(float(Fraction(p.strip())))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse angle {p.strip()!r}") from exc
    if units == "pi":
        vals = [v * math.pi for v in vals]
    return tuple(vals)


def _parse_pair(text: str, what: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated values for {what}, got {text!r}")
    return tuple(parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trinoid",
        description="classify, analyze and mesh constant mean curvature 1 "
        "trinoids in hyperbolic 3-space",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--angles", required=True, help="three angles a,b,c (fractions allowed)")
        p.add_argument("--units", choices=("pi", "rad"), default="pi")
        p.add_argument("--target", choices=("h3", "s2"), default="h3")
        p.add_argument("--tol-ode", type=float, default=None)
        p.add_argument("--base-point", default=None, help="re,im override for loop planning")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--json", default=None, help="write the JSON report to this path")

    p_cls = sub.add_parser("classify", help="moduli classification report")
    common(p_cls)

    p_mon = sub.add_parser("monodromy", help="loop transport report")
    common(p_mon)

    p_mesh = sub.add_parser("mesh", help="generate and export a surface mesh")
    common(p_mesh)
    p_mesh.add_argument("--rings", type=int, default=None)
    p_mesh.add_argument("--sectors", type=int, default=None)
    p_mesh.add_argument("--deform", default=None, help="t1 or t1,t2,t3 family parameters")
    p_mesh.add_argument("--out", default=None)
    p_mesh.add_argument("--format", choices=("obj", "ply"), default="obj", dest="fmt")

    p_fh = sub.add_parser("fh", help="angle surgery with before/after classification")
    common(p_fh)
    p_fh.add_argument("op", choices=("hemisphere", "bigon"))
    p_fh.add_argument("--edge", default=None, help="i,j edge for hemisphere surgery")
    p_fh.add_argument("--vertex", type=int, default=None)
    p_fh.add_argument("--edge-other", type=int, default=None, dest="edge_other")
    return parser


def _config_from(ns: argparse.Namespace) -> RunConfig:
    angles = _parse_angles(ns.angles, ns.units)
    base_point = None
    if ns.base_point is not None:
        re_s, im_s = _parse_pair(ns.base_point, "--base-point")
        base_point = complex(float(re_s), float(im_s))
    deform = None
    if getattr(ns, "deform", None) is not None:
        deform = tuple(float(p) for p in ns.deform.split(","))
    return RunConfig(
        angles=angles,
        units=ns.units,
        target=ns.target,
        tol=default_tolerances(),
        tol_ode=ns.tol_ode,
        base_point=base_point,
        rings=getattr(ns, "rings", None),
        sectors=getattr(ns, "sectors", None),
        deform=deform,
        seed=ns.seed,
        out=getattr(ns, "out", None),
        fmt=getattr(ns, "fmt", "obj"),
        json_path=ns.json,
    )


def _emit(report: dict, path: str | None) -> None:
    text = _json_text(report) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg = _config_from(ns)
        if ns.cmd == "classify":
            report = cmd_classify(cfg)
        elif ns.cmd == "monodromy":
            report = cmd_monodromy(cfg)
        elif ns.cmd == "mesh":
            report = cmd_mesh(cfg)
        else:
            edge = None
            if ns.edge is not None:
                edge = tuple(int(p) for p in _parse_pair(ns.edge, "--edge"))
            report = cmd_fh(cfg, ns.op, edge=edge, vertex=ns.vertex, edge_other=ns.edge_other)
    except _EmptyModuli as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (StepUnderflow, SingularPathPoint, NonSL2Input, NullStructureViolation,
            NotUnitarizable, NotPositiveDefinite) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, TrinoidError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    _emit(report, cfg.json_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
