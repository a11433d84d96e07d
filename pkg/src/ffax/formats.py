"""Parsers and writers for every document the pipeline consumes or emits.

Formats (schemas ship under ffax/schemas/, printable via the CLI):

* feature space        JSON, declares every feature's kind and domain
* model (canonical)    JSON object with nested split nodes; "le" tests are
                       inclusive (yes iff value <= threshold)
* model dump (toolkit) JSON array of trees in the de facto boosting-toolkit
                       dump form: nodes carry split/split_condition/yes/no/
                       children ids, leaves carry "leaf". Numeric tests use
                       the toolkit's strict-less semantics (yes iff x < t)
                       and are ingested losslessly as "<= nextafter(t, -inf)";
                       list-valued conditions are membership tests. With k
                       classes, tree i belongs to class i mod k (round-robin);
                       binary dumps are single-score models (all trees class 1)
* instances            CSV with a header of feature names (+ optional label)
* external attribution CSV of feature,value rows; "# source: NAME" metadata
* enumeration report   JSON; wall-clock data segregated under "timing"
* attribution          JSON, one entry per explained instance
* comparison           JSON table of per-candidate averaged metrics
* matrix               plain text numeric grid for external plotting
"""

import csv
import io
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from .attribution import AttributionVector
from .enumeration import Budget, EnumerationReport
from .errors import DataMismatchError, ParseError
from .model import (
    BOOLEAN,
    CATEGORICAL,
    ORDINAL,
    BooleanSplit,
    FeatureSpace,
    FeatureSpec,
    Instance,
    Leaf,
    MembershipSplit,
    Node,
    ThresholdSplit,
    Tree,
    TreeEnsemble,
)

SCHEMA_NAMES = (
    "feature-space",
    "model",
    "model-dump",
    "instances",
    "external-attribution",
    "enumeration-report",
    "attribution",
    "comparison",
    "matrix",
)


def schema_text(name: str) -> str:
    if name not in SCHEMA_NAMES:
        raise ParseError(f"unknown format {name!r}; known: {', '.join(SCHEMA_NAMES)}")
    return resources.files("ffax.schemas").joinpath(f"{name}.schema.json").read_text()


# --- feature space ------------------------------------------------------------


def parse_feature_space(text: str) -> FeatureSpace:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"feature space is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "features" not in doc:
        raise ParseError("feature space document needs a top-level 'features' list")
    specs = []
    for fid, item in enumerate(doc["features"]):
        where = f"features[{fid}]"
        name = item.get("name")
        kind = item.get("kind")
        if not isinstance(name, str):
            raise ParseError("missing feature name", where)
        if kind == CATEGORICAL:
            values = item.get("values")
            if not isinstance(values, list) or not values:
                raise ParseError(f"categorical {name!r} needs a non-empty 'values' list", where)
            spec = FeatureSpec(fid=fid, name=name, kind=kind, values=tuple(values))
        elif kind == ORDINAL:
            if "lo" not in item or "hi" not in item:
                raise ParseError(f"ordinal {name!r} needs 'lo' and 'hi'", where)
            lo, hi = float(item["lo"]), float(item["hi"])
            if lo > hi:
                raise ParseError(f"ordinal {name!r} has lo > hi", where)
            spec = FeatureSpec(fid=fid, name=name, kind=kind, lo=lo, hi=hi)
        elif kind == BOOLEAN:
            spec = FeatureSpec(fid=fid, name=name, kind=kind)
        else:
            raise ParseError(f"unknown kind {kind!r} for feature {name!r}", where)
        specs.append(spec)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ParseError("duplicate feature names in feature space")
    return FeatureSpace(features=tuple(specs))


def write_feature_space(space: FeatureSpace) -> str:
    features = []
    for spec in space.features:
        item: dict = {"name": spec.name, "kind": spec.kind}
        if spec.kind == CATEGORICAL:
            item["values"] = list(spec.values)
        elif spec.kind == ORDINAL:
            item["lo"] = spec.lo
            item["hi"] = spec.hi
        features.append(item)
    return json.dumps({"format": "feature-space/1", "features": features}, indent=2)


# --- models ---------------------------------------------------------------------


def _resolve_fid(space: FeatureSpace, name, where: str) -> int:
    if isinstance(name, int):
        if 0 <= name < space.m:
            return name
        raise ParseError(f"feature id {name} out of range", where)
    fid = space.name_to_fid.get(name)
    if fid is None and isinstance(name, str) and len(name) > 1 and name[0] == "f":
        try:
            fid = int(name[1:])
        except ValueError:
            fid = None
        if fid is not None and not 0 <= fid < space.m:
            fid = None
    if fid is None:
        raise ParseError(f"unknown feature name {name!r}", where)
    return fid


def parse_ensemble_dump(
    text: str,
    space: FeatureSpace,
    class_names: Sequence[str] = ("0", "1"),
    base_score: float | Sequence[float] | None = None,
    tree_classes: Sequence[int] | None = None,
) -> TreeEnsemble:
    """Parse either a toolkit tree-dump array or a canonical model object.

    ``tree_classes`` overrides the round-robin tree-to-class convention of
    dump arrays; canonical documents carry explicit class tags instead.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model is not valid JSON: {exc}") from None
    if isinstance(doc, dict):
        return _parse_canonical_model(doc, space)
    if not isinstance(doc, list):
        raise ParseError("model document must be a JSON array (dump) or object (canonical)")
    if not doc:
        raise ParseError("no trees in model dump")
    k = len(class_names)
    if k < 2:
        raise ParseError("need at least two class names")
    if base_score is None:
        base = tuple(0.0 for _ in range(k))
    elif isinstance(base_score, (int, float)):
        base = (0.0, float(base_score)) if k == 2 else tuple(float(base_score),) * k
    else:
        base = tuple(float(b) for b in base_score)
    trees = []
    for t, node in enumerate(doc):
        if tree_classes is not None:
            class_id = tree_classes[t]
        else:
            class_id = 1 if k == 2 else t % k
        root = _parse_dump_node(node, space, where=f"tree {t}")
        trees.append(Tree(class_id=class_id, root=root))
    return TreeEnsemble(
        space=space, class_names=tuple(class_names), trees=tuple(trees), base_score=base
    )


def _parse_dump_node(node, space: FeatureSpace, where: str) -> Node:
    if not isinstance(node, dict):
        raise ParseError("node must be an object", where)
    if "leaf" in node:
        if not isinstance(node["leaf"], (int, float)):
            raise ParseError("leaf weight must be a number", where)
        return Leaf(weight=float(node["leaf"]))
    for key in ("split", "yes", "no"):
        if key not in node:
            raise ParseError(f"split node lacks {key!r}", where)
    fid = _resolve_fid(space, node["split"], where)
    spec = space[fid]
    children = {child.get("nodeid"): child for child in node.get("children", [])}

    def child(which: str) -> Node:
        cid = node[which]
        if cid not in children:
            raise ParseError(f"dangling child id {cid!r}", where)
        return _parse_dump_node(children[cid], space, where=f"{where} -> node {cid}")

    condition = node.get("split_condition", node.get("categories"))
    if isinstance(condition, list):
        return _membership_node(spec, fid, condition, child("yes"), child("no"), where)
    if isinstance(condition, (int, float)):
        return _strict_less_node(spec, fid, float(condition), child("yes"), child("no"), where)
    raise ParseError("split node needs a numeric or list split_condition", where)


def _membership_node(spec: FeatureSpec, fid, values, yes, no, where) -> Node:
    if spec.kind == CATEGORICAL:
        names = []
        for v in values:
            if isinstance(v, int):
                if not 0 <= v < len(spec.values):
                    raise ParseError(f"value index {v} out of range for {spec.name!r}", where)
                names.append(spec.values[v])
            elif v in spec.values:
                names.append(v)
            else:
                raise ParseError(f"unknown categorical value {v!r} for {spec.name!r}", where)
        return MembershipSplit(fid=fid, values=frozenset(names), yes=yes, no=no)
    if spec.kind == BOOLEAN:
        truthy = {bool(v) if not isinstance(v, str) else v.lower() == "true" for v in values}
        if truthy == {True}:
            return BooleanSplit(fid=fid, yes=yes, no=no)
        if truthy == {False}:
            return BooleanSplit(fid=fid, yes=no, no=yes)
        return yes  # both values listed: the test is vacuously true
    raise ParseError(f"membership test on ordinal feature {spec.name!r}", where)


def _strict_less_node(spec: FeatureSpec, fid, t: float, yes, no, where) -> Node:
    # Toolkit semantics: yes iff x < t. Over floats, x < t iff x <= prev(t).
    if spec.kind == ORDINAL:
        return ThresholdSplit(fid=fid, threshold=math.nextafter(t, -math.inf), yes=yes, no=no)
    if spec.kind == BOOLEAN:
        if t <= 0.0:  # nothing is < t
            return no
        if t > 1.0:  # everything is < t
            return yes
        return BooleanSplit(fid=fid, yes=no, no=yes)  # only False is < t
    raise ParseError(f"numeric test on categorical feature {spec.name!r}", where)


# canonical model document


def _parse_canonical_node(node, space: FeatureSpace, where: str) -> Node:
    if not isinstance(node, dict):
        raise ParseError("node must be an object", where)
    if "leaf" in node:
        return Leaf(weight=float(node["leaf"]))
    test = node.get("test")
    fid = _resolve_fid(space, node.get("feature"), where)
    spec = space[fid]
    yes = _parse_canonical_node(node.get("yes"), space, f"{where} -> yes")
    no = _parse_canonical_node(node.get("no"), space, f"{where} -> no")
    if test == "le":
        if spec.kind != ORDINAL:
            raise ParseError(f"'le' test on non-ordinal feature {spec.name!r}", where)
        return ThresholdSplit(fid=fid, threshold=float(node["threshold"]), yes=yes, no=no)
    if test == "in":
        if spec.kind != CATEGORICAL:
            raise ParseError(f"'in' test on non-categorical feature {spec.name!r}", where)
        values = node.get("values")
        if not values:
            raise ParseError("'in' test needs a non-empty values list", where)
        for v in values:
            if v not in spec.values:
                raise ParseError(f"unknown categorical value {v!r} for {spec.name!r}", where)
        return MembershipSplit(fid=fid, values=frozenset(values), yes=yes, no=no)
    if test == "is":
        if spec.kind != BOOLEAN:
            raise ParseError(f"'is' test on non-boolean feature {spec.name!r}", where)
        return BooleanSplit(fid=fid, yes=yes, no=no)
    raise ParseError(f"unknown test {test!r}", where)


def _parse_canonical_model(doc: dict, space: FeatureSpace) -> TreeEnsemble:
    classes = doc.get("classes")
    if not isinstance(classes, list) or len(classes) < 2:
        raise ParseError("canonical model needs a 'classes' list of >= 2 names")
    raw_trees = doc.get("trees")
    if not raw_trees:
        raise ParseError("no trees in model document")
    trees = []
    for t, item in enumerate(raw_trees):
        where = f"tree {t}"
        class_id = item.get("class")
        if not isinstance(class_id, int) or not 0 <= class_id < len(classes):
            raise ParseError(f"bad class tag {class_id!r}", where)
        trees.append(
            Tree(class_id=class_id, root=_parse_canonical_node(item.get("root"), space, where))
        )
    base = doc.get("base_score") or [0.0] * len(classes)
    return TreeEnsemble(
        space=space,
        class_names=tuple(classes),
        trees=tuple(trees),
        base_score=tuple(float(b) for b in base),
    )


def _node_to_json(node: Node, space: FeatureSpace) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.weight}
    common = {
        "feature": space[node.fid].name,
        "yes": _node_to_json(node.yes, space),
        "no": _node_to_json(node.no, space),
    }
    if isinstance(node, ThresholdSplit):
        return {"test": "le", "threshold": node.threshold, **common}
    if isinstance(node, MembershipSplit):
        return {"test": "in", "values": sorted(node.values), **common}
    return {"test": "is", **common}


def write_model(model: TreeEnsemble) -> str:
    doc = {
        "format": "model/1",
        "classes": list(model.class_names),
        "base_score": list(model.base_score),
        "trees": [
            {"class": tree.class_id, "root": _node_to_json(tree.root, model.space)}
            for tree in model.trees
        ],
    }
    return json.dumps(doc, indent=2)


# --- instances -------------------------------------------------------------------

LABEL_COLUMN = "label"


def parse_instances(text: str, space: FeatureSpace) -> list[Instance]:
    """One instance per CSV row; all per-row violations reported together."""
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return []
    header = [h.strip() for h in header]
    has_label = LABEL_COLUMN in header
    column_of: dict[int, int] = {}
    for spec in space.features:
        if spec.name not in header:
            raise ParseError(f"missing column for feature {spec.name!r}")
        column_of[spec.fid] = header.index(spec.name)
    for col in header:
        if col != LABEL_COLUMN and col not in space.name_to_fid:
            raise ParseError(f"unknown column {col!r}")

    instances = []
    problems = []
    for row_no, row in enumerate(reader):
        if not row or all(not cell.strip() for cell in row):
            continue
        values = []
        for spec in space.features:
            cell = row[column_of[spec.fid]].strip()
            try:
                values.append(_parse_cell(spec, cell))
            except ValueError as exc:
                problems.append(f"row {row_no}: {exc}")
        label = None
        if has_label:
            raw = row[header.index(LABEL_COLUMN)].strip()
            if raw:
                try:
                    label = int(raw)
                except ValueError:
                    label = raw
        if len(values) == space.m:
            instances.append(Instance(values=tuple(values), label=label))
    if problems:
        raise ParseError("; ".join(problems))
    return instances


def _parse_cell(spec: FeatureSpec, cell: str):
    if spec.kind == CATEGORICAL:
        if cell not in spec.values:
            raise ValueError(f"feature {spec.name!r}: value {cell!r} outside declared domain")
        return cell
    if spec.kind == BOOLEAN:
        low = cell.lower()
        if low in ("1", "true"):
            return True
        if low in ("0", "false"):
            return False
        raise ValueError(f"feature {spec.name!r}: {cell!r} is not a boolean")
    try:
        value = float(cell)
    except ValueError:
        raise ValueError(f"feature {spec.name!r}: {cell!r} is not a number") from None
    if not spec.lo <= value <= spec.hi:
        raise ValueError(
            f"feature {spec.name!r}: {value} outside [{spec.lo}, {spec.hi}]"
        )
    return value


def write_instances(space: FeatureSpace, instances: Sequence[Instance]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([s.name for s in space.features] + [LABEL_COLUMN])
    for inst in instances:
        row = []
        for spec in space.features:
            v = inst.values[spec.fid]
            row.append(int(v) if spec.kind == BOOLEAN else v)
        row.append("" if inst.label is None else inst.label)
        writer.writerow(row)
    return out.getvalue()


# --- external attribution vectors ---------------------------------------------------


def read_external_attribution(text: str, space: FeatureSpace) -> AttributionVector:
    """Two-column feature,value document; absent features default to 0."""
    source = "external"
    values = [0.0] * space.m
    seen: set[str] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            meta = line.lstrip("#").strip()
            if meta.lower().startswith("source:"):
                source = f"external:{meta.split(':', 1)[1].strip()}"
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ParseError(f"line {line_no}: expected 'feature,value', got {raw!r}")
        name, raw_value = parts
        if name == "feature" and line_no == 1:
            continue  # tolerate a header row
        if name not in space.name_to_fid:
            raise DataMismatchError(f"line {line_no}: unknown feature {name!r}")
        if name in seen:
            raise ParseError(f"line {line_no}: duplicate feature {name!r}")
        seen.add(name)
        try:
            values[space.name_to_fid[name]] = float(raw_value)
        except ValueError:
            raise ParseError(f"line {line_no}: {raw_value!r} is not a number") from None
    return AttributionVector(values=tuple(values), source=source, basis=0, complete=False)


# --- enumeration report docs ----------------------------------------------------------


def _budget_to_json(budget: Budget) -> dict:
    return {
        "seconds": budget.seconds,
        "max_axps": budget.max_axps,
        "max_cxps": budget.max_cxps,
        "max_oracle_calls": budget.max_oracle_calls,
        "unbounded": budget.unbounded,
    }


def _instance_to_json(inst: Instance) -> dict:
    return {"values": list(inst.values), "label": inst.label}


def write_enumeration_report(
    report: EnumerationReport, class_name: str | None = None
) -> str:
    """All wall-clock data lives under "timing" so the rest is run-to-run
    byte-identical for a fixed configuration."""
    events = [
        {
            "kind": e.kind,
            "features": sorted(e.features),
            "index": e.discovery_index,
            "oracle_calls": e.oracle_calls,
        }
        for e in report.events()
    ]
    doc = {
        "format": "enumeration-report/1",
        "class_id": report.class_id,
        "class_name": class_name,
        "mode": report.mode,
        "complete": report.complete,
        "instance": _instance_to_json(report.instance),
        "axps": [sorted(e.features) for e in report.axps],
        "cxps": [sorted(e.features) for e in report.cxps],
        "events": events,
        "oracle_calls": report.oracle_calls,
        "budget": _budget_to_json(report.budget),
        "timing": {
            "wall_time": report.wall_time,
            "event_times": [
                {"index": e.discovery_index, "time": e.discovery_time}
                for e in report.events()
            ],
        },
    }
    return json.dumps(doc, indent=2)


@dataclass(frozen=True)
class LoadedReport:
    class_id: int
    class_name: str | None
    mode: str
    complete: bool
    instance_values: tuple
    axps: list[frozenset[int]]
    cxps: list[frozenset[int]]
    oracle_calls: int
    events: list[dict]


def read_enumeration_report(text: str) -> LoadedReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"report is not valid JSON: {exc}") from None
    if doc.get("format") != "enumeration-report/1":
        raise ParseError("not an enumeration report document")
    return LoadedReport(
        class_id=doc["class_id"],
        class_name=doc.get("class_name"),
        mode=doc["mode"],
        complete=doc["complete"],
        instance_values=tuple(doc["instance"]["values"]),
        axps=[frozenset(s) for s in doc["axps"]],
        cxps=[frozenset(s) for s in doc["cxps"]],
        oracle_calls=doc["oracle_calls"],
        events=doc.get("events", []),
    )


# --- attribution docs ---------------------------------------------------------------------


def write_attribution_doc(
    space: FeatureSpace,
    entries: Sequence[dict],
) -> str:
    """Entries are dicts with row, class_id, vector: AttributionVector, and an
    optional convergence list of (mark, error-or-None)."""
    body = []
    for entry in entries:
        vec: AttributionVector = entry["vector"]
        item = {
            "row": entry.get("row"),
            "class_id": entry.get("class_id"),
            "source": vec.source,
            "basis": vec.basis,
            "complete": vec.complete,
            "values": list(vec.values),
        }
        if entry.get("convergence") is not None:
            item["convergence"] = [
                {"mark": mark, "error": err} for mark, err in entry["convergence"]
            ]
        body.append(item)
    doc = {
        "format": "attribution/1",
        "features": [s.name for s in space.features],
        "entries": body,
    }
    return json.dumps(doc, indent=2)


def read_attribution_doc(text: str) -> list[dict]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"attribution document is not valid JSON: {exc}") from None
    if doc.get("format") != "attribution/1":
        raise ParseError("not an attribution document")
    out = []
    for item in doc["entries"]:
        out.append(
            {
                "row": item.get("row"),
                "class_id": item.get("class_id"),
                "vector": AttributionVector(
                    values=tuple(item["values"]),
                    source=item["source"],
                    basis=item.get("basis", 0),
                    complete=item.get("complete", False),
                ),
                "features": doc["features"],
            }
        )
    return out


def write_attribution_matrix(vec: AttributionVector, rows: int, cols: int) -> str:
    """Row-major numeric matrix for grid-shaped feature spaces."""
    if rows * cols != vec.m:
        raise DataMismatchError(f"grid {rows}x{cols} does not cover {vec.m} features")
    lines = []
    for r in range(rows):
        lines.append(" ".join(format(x, ".17g") for x in vec.values[r * cols : (r + 1) * cols]))
    return "\n".join(lines) + "\n"


# --- comparison docs ------------------------------------------------------------------------


def write_comparison_doc(reference_source: str, averaged_rows) -> str:
    doc = {
        "format": "comparison/1",
        "reference": reference_source,
        "rows": [
            {
                "name": r.name,
                "error": r.error,
                "tau": r.tau,
                "rbo": r.rbo,
                "instances": r.instances,
                "tau_defined": r.tau_defined,
            }
            for r in averaged_rows
        ],
    }
    return json.dumps(doc, indent=2)


def read_comparison_doc(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"comparison document is not valid JSON: {exc}") from None
    if doc.get("format") != "comparison/1":
        raise ParseError("not a comparison document")
    return doc
