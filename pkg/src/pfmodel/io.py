"""Input parsing and deterministic report writing.

Two JSON input formats:

Taxonomy::

    {"root": "A",
     "categories": ["A", "B"],
     "edges": [{"child": "B", "parent": "A", "f": 0.6}]}

Classifier profiles::

    {"classifiers": {"B": {"tn": 0.9, "fp": 0.1, "fn": 0.2, "tp": 0.8}},
     "overrides": [{"pipeline": "A/B", "category": "B",
                    "tn": 0.8, "fp": 0.2, "fn": 0.1, "tp": 0.9}]}

Pipelines are serialized as slash-joined category names everywhere.  Parse
errors carry a location; probabilities outside their contract are rejected,
never coerced.  Confusion rows are accepted when they sum to 1 within 1e-9,
renormalized exactly, and the adjustment is recorded in the report.

Reports (JSON or TSV) are byte-identical for identical inputs: pipelines
are sorted, keys have a fixed order, and every real number is written with
12 significant digits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Mapping

from .errors import (
    MissingGammaError,
    OutOfRangeProbabilityError,
    ParseError,
    RootProfileForbiddenError,
    UnknownCategoryError,
)
from .metrics import DepthProfile, MetricReport, StepCheck, depth_profile
from .model import (
    ClassifierProfileSet,
    Factorization,
    IntrinsicMatrix,
    NormalizedConfusionMatrix,
    factorize,
    psi,
)
from .taxonomy import Edge, Pipeline, Taxonomy, enumerate_pipelines, validate_taxonomy, wfs_char

#: tolerance for accepting hand-typed confusion rows before renormalizing
ROW_SUM_TOLERANCE = 1e-9


# --- parsing -----------------------------------------------------------------


def _load_json(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(str(e), location=f"{what}: line {e.lineno}, column {e.colno}") from None


def _require_keys(obj: Mapping, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, Mapping):
        raise ParseError(f"expected an object, got {type(obj).__name__}", location=where)
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"unknown keys {sorted(unknown)}", location=where)
    missing = required - set(obj)
    if missing:
        raise ParseError(f"missing keys {sorted(missing)}", location=where)


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_taxonomy(text: str) -> Taxonomy:
    """Parse and validate the taxonomy JSON format."""
    data = _load_json(text, "taxonomy")
    _require_keys(data, {"root", "categories", "edges"}, {"root", "categories", "edges"},
                  "taxonomy")
    cats = data["categories"]
    if not isinstance(cats, list) or not all(isinstance(c, str) for c in cats):
        raise ParseError("categories must be a list of strings", location="taxonomy.categories")
    edges = []
    for i, raw in enumerate(data["edges"]):
        where = f"taxonomy.edges[{i}]"
        _require_keys(raw, {"child", "parent", "f"}, {"child", "parent"}, where)
        f = raw.get("f")
        if f is not None and not _is_number(f):
            raise ParseError(f"f must be a number, got {f!r}", location=where)
        edges.append(Edge(child=raw["child"], parent=raw["parent"],
                          f=None if f is None else float(f)))
    if not isinstance(data["root"], str):
        raise ParseError("root must be a string", location="taxonomy.root")
    return validate_taxonomy(cats, edges, root=data["root"])


def _parse_row_matrix(
    raw: Mapping, where: str
) -> tuple[NormalizedConfusionMatrix, bool]:
    """Read a tn/fp/fn/tp object; returns the matrix and whether rows moved."""
    _require_keys(raw, {"tn", "fp", "fn", "tp"}, {"tn", "fp", "fn", "tp"}, where)
    vals = {}
    for key in ("tn", "fp", "fn", "tp"):
        v = raw[key]
        if not _is_number(v) or not math.isfinite(v):
            raise ParseError(f"{key} must be a finite number, got {v!r}", location=where)
        if not 0.0 <= v <= 1.0:
            raise OutOfRangeProbabilityError(f"{where}.{key}={v} outside [0, 1]")
        vals[key] = float(v)
    renormalized = False
    for row, (a, b) in (("negative", ("tn", "fp")), ("positive", ("fn", "tp"))):
        s = vals[a] + vals[b]
        if abs(s - 1.0) > ROW_SUM_TOLERANCE:
            raise OutOfRangeProbabilityError(
                f"{where}: {row} row sums to {s!r}, expected 1 within {ROW_SUM_TOLERANCE}"
            )
        if s != 1.0:
            vals[a] /= s
            vals[b] /= s
            renormalized = True
    return NormalizedConfusionMatrix(**vals), renormalized


@dataclass(frozen=True)
class InputBundle:
    """Parsed, cross-validated taxonomy plus profiles, ready for analysis."""

    taxonomy: Taxonomy
    profiles: ClassifierProfileSet
    renormalized: tuple[str, ...] = ()


def parse_profiles(text: str, taxonomy: Taxonomy) -> tuple[ClassifierProfileSet, tuple[str, ...]]:
    """Parse the profiles JSON format against a validated taxonomy."""
    data = _load_json(text, "profiles")
    _require_keys(data, {"classifiers", "overrides"}, {"classifiers"}, "profiles")
    raw_cls = data["classifiers"]
    if not isinstance(raw_cls, Mapping):
        raise ParseError("classifiers must be an object", location="profiles.classifiers")

    renormalized: list[str] = []
    base: dict[str, NormalizedConfusionMatrix] = {}
    for name in raw_cls:
        where = f"profiles.classifiers.{name}"
        if name not in taxonomy.categories:
            raise UnknownCategoryError(f"{where}: unknown category {name!r}")
        if name == taxonomy.root:
            raise RootProfileForbiddenError(
                f"{where}: the root passes everything down; its profile is fixed"
            )
        matrix, moved = _parse_row_matrix(raw_cls[name], where)
        base[name] = matrix
        if moved:
            renormalized.append(name)

    overrides: dict[tuple[str, str], NormalizedConfusionMatrix] = {}
    for i, raw in enumerate(data.get("overrides", [])):
        where = f"profiles.overrides[{i}]"
        _require_keys(raw, {"pipeline", "category", "tn", "fp", "fn", "tp"},
                      {"pipeline", "category", "tn", "fp", "fn", "tp"}, where)
        path = raw["pipeline"]
        nodes = tuple(path.split("/"))
        for c in nodes:
            if c not in taxonomy.categories:
                raise UnknownCategoryError(f"{where}: unknown category {c!r} in pipeline")
        if nodes[0] != taxonomy.root or wfs_char(taxonomy, nodes) != 1.0:
            raise ParseError(f"{path!r} is not a pipeline of this taxonomy", location=where)
        cat = raw["category"]
        if cat not in nodes:
            raise ParseError(f"category {cat!r} does not occur in pipeline {path!r}",
                             location=where)
        if cat == taxonomy.root:
            raise RootProfileForbiddenError(f"{where}: cannot override the root")
        matrix, moved = _parse_row_matrix(
            {k: raw[k] for k in ("tn", "fp", "fn", "tp")}, where
        )
        if (path, cat) in overrides:
            raise ParseError(f"duplicate override for {cat!r} in {path!r}", location=where)
        overrides[(path, cat)] = matrix
        if moved:
            renormalized.append(f"{path}:{cat}")

    missing = sorted(
        c for c in taxonomy.categories if c != taxonomy.root and c not in base
    )
    if missing:
        raise MissingGammaError(f"categories without a classifier profile: {missing}")

    profile_set = ClassifierProfileSet(base=base, overrides=overrides, root=taxonomy.root)
    return profile_set, tuple(sorted(renormalized))


def parse_inputs(taxonomy_text: str, profiles_text: str) -> InputBundle:
    """Parse both input files into a cross-validated bundle."""
    taxonomy = parse_taxonomy(taxonomy_text)
    profiles, renormalized = parse_profiles(profiles_text, taxonomy)
    return InputBundle(taxonomy=taxonomy, profiles=profiles, renormalized=renormalized)


# --- serialization -----------------------------------------------------------


def fmt12(x: float) -> str:
    """A real number with 12 significant digits, as text."""
    return f"{x:.12g}"


def round12(x: float) -> float:
    """A real number rounded to 12 significant digits (stable JSON payloads)."""
    if not math.isfinite(x):
        return x
    return float(fmt12(x))


def dump_json(payload: Any) -> str:
    """Canonical JSON text: fixed key order as constructed, trailing newline."""
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def serialize_taxonomy(t: Taxonomy) -> str:
    """Taxonomy back to its JSON input format (sorted, 12 significant digits)."""
    payload = {
        "root": t.root,
        "categories": sorted(t.categories),
        "edges": [
            {"child": e.child, "parent": e.parent}
            if e.f is None
            else {"child": e.child, "parent": e.parent, "f": round12(e.f)}
            for e in sorted(t.edges, key=lambda e: (e.child, e.parent))
        ],
    }
    return dump_json(payload)


def _matrix_payload(m: NormalizedConfusionMatrix) -> dict:
    return {"tn": round12(m.tn), "fp": round12(m.fp), "fn": round12(m.fn), "tp": round12(m.tp)}


def serialize_profiles(p: ClassifierProfileSet) -> str:
    """Profile set back to its JSON input format."""
    payload: dict[str, Any] = {
        "classifiers": {name: _matrix_payload(p.base[name]) for name in sorted(p.base)}
    }
    if p.overrides:
        payload["overrides"] = [
            {"pipeline": path, "category": cat, **_matrix_payload(p.overrides[(path, cat)])}
            for path, cat in sorted(p.overrides)
        ]
    return dump_json(payload)


# --- analysis report ---------------------------------------------------------


@dataclass(frozen=True)
class PipelineBlock:
    """Everything the report says about one pipeline."""

    pipeline: Pipeline
    profile: DepthProfile
    factorization: Factorization
    intrinsic: IntrinsicMatrix


@dataclass(frozen=True)
class Report:
    """Deterministic analysis of every requested pipeline of a taxonomy."""

    root: str
    categories: tuple[str, ...]
    edge_count: int
    renormalized: tuple[str, ...]
    blocks: tuple[PipelineBlock, ...]


def build_report(
    bundle: InputBundle, leaf_only: bool = False, pipeline_path: str | None = None
) -> Report:
    """Analyze the bundle's pipelines (sorted) into a :class:`Report`."""
    pipelines = enumerate_pipelines(bundle.taxonomy, leaf_only=leaf_only)
    if pipeline_path is not None:
        pipelines = tuple(p for p in pipelines if p.path == pipeline_path)
        if not pipelines:
            raise UnknownCategoryError(f"no pipeline {pipeline_path!r} in this taxonomy")
    blocks = []
    for p in pipelines:
        blocks.append(
            PipelineBlock(
                pipeline=p,
                profile=depth_profile(p, bundle.profiles),
                factorization=factorize(p, bundle.profiles),
                intrinsic=psi(p, bundle.profiles),
            )
        )
    return Report(
        root=bundle.taxonomy.root,
        categories=tuple(sorted(bundle.taxonomy.categories)),
        edge_count=len(bundle.taxonomy.edges),
        renormalized=bundle.renormalized,
        blocks=tuple(blocks),
    )


def metrics_payload(r: MetricReport) -> dict:
    flags = []
    if r.precision_undefined:
        flags.append("precision_undefined")
    if r.recall_undefined:
        flags.append("recall_undefined")
    if r.f1_degenerate:
        flags.append("f1_degenerate")
    return {
        "tP": None if r.precision is None else round12(r.precision),
        "tR": None if r.recall is None else round12(r.recall),
        "tF1": None if r.f1 is None else round12(r.f1),
        "tA": round12(r.accuracy),
        "flags": flags,
    }


def _verdict_text(step: StepCheck | None) -> str:
    if step is None:
        return "-"
    if step.degenerate or step.verdict is None:
        return "degenerate"
    return step.verdict.value


def _block_payload(b: PipelineBlock) -> dict:
    fact = b.factorization
    flags = []
    if fact.zero_negative_mass:
        flags.append("zero_negative_mass")
    if fact.eta is not None and math.isinf(fact.eta):
        flags.append("eta_infinite")
    eta = fact.eta
    omega = b.profile.omegas[-1]
    fs = b.pipeline.require_fs()
    depth_rows = []
    for k, (om, rep) in enumerate(zip(b.profile.omegas, b.profile.reports)):
        step = b.profile.steps[k - 1] if k >= 1 else None
        depth_rows.append(
            {
                "k": k,
                "f": round12(fs[k]),
                "omega": {"w00": round12(om.tn), "w01": round12(om.fp),
                          "w10": round12(om.fn), "w11": round12(om.tp)},
                "metrics": metrics_payload(rep),
                "precision_verdict": _verdict_text(step),
                "precision_bound": None if step is None or step.bound is None
                else round12(step.bound),
            }
        )
    return {
        "pipeline": b.pipeline.path,
        "depth": b.pipeline.depth,
        "fs": [round12(f) for f in fs],
        "omega": {"w00": round12(omega.tn), "w01": round12(omega.fp),
                  "w10": round12(omega.fn), "w11": round12(omega.tp)},
        "prior": {"neg": round12(fact.prior_neg), "pos": round12(fact.prior_pos)},
        "phi": _matrix_payload(fact.phi),
        "psi": _matrix_payload(b.intrinsic),
        "eta": None if eta is None or not math.isfinite(eta) else round12(eta),
        "flags": flags,
        "metrics": metrics_payload(b.profile.reports[-1]),
        "depth_profile": depth_rows,
    }


def write_report(report: Report, format: str = "json") -> str:
    """Render a report as canonical JSON or as per-(pipeline, depth) TSV."""
    if format == "json":
        payload = {
            "taxonomy": {
                "root": report.root,
                "categories": list(report.categories),
                "edge_count": report.edge_count,
                "pipeline_count": len(report.blocks),
                "renormalized_classifiers": list(report.renormalized),
            },
            "pipelines": [_block_payload(b) for b in report.blocks],
        }
        return dump_json(payload)
    if format == "tsv":
        cols = ["pipeline", "k", "f_k", "w00", "w01", "w10", "w11",
                "tP", "tR", "tF1", "tA", "precision_verdict"]
        lines = ["\t".join(cols)]
        for b in report.blocks:
            fs = b.pipeline.require_fs()
            for k, (om, rep) in enumerate(zip(b.profile.omegas, b.profile.reports)):
                step = b.profile.steps[k - 1] if k >= 1 else None
                lines.append("\t".join([
                    b.pipeline.path,
                    str(k),
                    fmt12(fs[k]),
                    fmt12(om.tn), fmt12(om.fp), fmt12(om.fn), fmt12(om.tp),
                    "-" if rep.precision is None else fmt12(rep.precision),
                    "-" if rep.recall is None else fmt12(rep.recall),
                    "-" if rep.f1 is None else fmt12(rep.f1),
                    fmt12(rep.accuracy),
                    _verdict_text(step),
                ]))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}")
