"""Command-line surface for the whole pipeline.

Subcommands:

* explain    one subset-minimal abductive explanation per selected instance,
             with the proven score bound behind it
* enumerate  anytime AXp/CXp enumeration under a budget, emitting a report
* attribute  enumerate, then turn the collected AXp's into attribution
             vectors (optionally with a budget-checkpoint convergence series
             and a grid matrix export)
* compare    score external attribution vectors against a reference
* verify     cross-check an enumeration against exhaustive subset search and
             the hitting-set duality (small inputs only)

``ffax --schema FORMAT`` prints any document format's schema. Exit codes:
0 success, 2 input error, 3 capability, 4 empty attribution, 5 data mismatch,
6 capacity.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import attribution as attr
from . import formats, metrics
from .enumeration import (
    Budget,
    brute_force_all_xps,
    check_duality,
    enumerate_explanations,
    extract_axp,
)
from .errors import (
    CapabilityError,
    CapacityError,
    DataMismatchError,
    FfaxError,
    ParseError,
    UndefinedAttributionError,
    ValidationError,
)
from .model import BOOLEAN, Instance, LinearModel, TreeEnsemble, evaluate
from .oracle import PartialAssignment, score_bounds

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CAPABILITY = 3
EXIT_EMPTY_ATTRIBUTION = 4
EXIT_DATA_MISMATCH = 5
EXIT_CAPACITY = 6


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation, flag for flag."""

    command: str
    model_path: str | None = None
    space_path: str | None = None
    instances_path: str | None = None
    rows: tuple[int, ...] | None = None  # None = every row
    mode: str = "cxp-first"
    seconds: float | None = None
    max_axps: int | None = None
    max_cxps: int | None = None
    max_oracle_calls: int | None = None
    kind: str = "ffa"
    checkpoints: tuple[float, ...] = ()
    output: str | None = None
    rbo_p: float = 0.9
    order: tuple[int, ...] | None = None
    grid: tuple[int, int] | None = None
    matrix_out: str | None = None
    workers: int = 1
    classes: tuple[str, ...] = ("0", "1")
    base_score: float | None = None
    reference: str | None = None
    candidates: tuple[tuple[str, str], ...] = ()
    report: str | None = None

    def budget(self) -> Budget:
        limits = (self.seconds, self.max_axps, self.max_cxps, self.max_oracle_calls)
        if all(l is None for l in limits):
            return Budget.unlimited()
        return Budget(
            seconds=self.seconds,
            max_axps=self.max_axps,
            max_cxps=self.max_cxps,
            max_oracle_calls=self.max_oracle_calls,
        )


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)


def _parse_rows(selector: str | None) -> tuple[int, ...] | None:
    if selector is None:
        return None
    rows: list[int] = []
    for part in selector.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            rows.extend(range(int(lo), int(hi) + 1))
        elif part:
            rows.append(int(part))
    return tuple(rows)


def _load_inputs(config: RunConfig):
    space = formats.parse_feature_space(_read(config.space_path))
    model = formats.parse_ensemble_dump(
        _read(config.model_path),
        space,
        class_names=config.classes,
        base_score=config.base_score,
    )
    instances = formats.parse_instances(_read(config.instances_path), space)
    rows = config.rows if config.rows is not None else tuple(range(len(instances)))
    for row in rows:
        if not 0 <= row < len(instances):
            raise ParseError(f"row {row} out of range (file has {len(instances)} instances)")
    return space, model, instances, rows


def _format_assignment(space, v: Instance, features) -> str:
    if not features:
        return "(empty set)"
    parts = []
    for fid in sorted(features):
        parts.append(f"{space[fid].name}={v.values[fid]}")
    return "{" + ", ".join(parts) + "}"


def _certified_bound(model, v: Instance, c: int, subset: frozenset[int]) -> str:
    """Human-readable proof obligation the explanation satisfies."""
    if isinstance(model, TreeEnsemble):
        pa = PartialAssignment(instance=v, fixed=subset)
        if model.single_score:
            bounds = score_bounds(model, pa)
            if c == 0:
                return f"max attainable score {bounds.hi:.6g} < 0"
            return f"min attainable score {bounds.lo:.6g} >= 0"
        worst = max(
            score_bounds(model, pa, pair=(rival, c)).hi
            for rival in range(model.k)
            if rival != c
        )
        return f"max rival margin {worst:.6g} cannot overtake class {c}"
    # linear: the adversarial completion's score proves the claim
    from .oracle import _linear_extreme

    if c == 1:
        worst, _ = _linear_extreme(model, v, subset, want_max=False)
        return f"min attainable score {worst:.6g} >= 0"
    worst, _ = _linear_extreme(model, v, subset, want_max=True)
    return f"max attainable score {worst:.6g} < 0"


# --- per-row work (top-level functions so worker processes can pickle them) ----


def _explain_row(config: RunConfig, row: int) -> str:
    space, model, instances, _ = _load_inputs(config)
    v = instances[row]
    pred = evaluate(model, v)
    c = pred.class_id
    axp = extract_axp(model, v, c, seed=range(space.m), order=config.order)
    lines = [f"row {row}: class {model.class_names[c]!r}"]
    if len(pred.scores) == 2:
        lines[0] += f" (score {pred.scores[1]:.6g})"
    if not axp:
        lines.append("  AXp: (empty set) -- prediction is domain-constant")
    else:
        lines.append(f"  AXp: {_format_assignment(space, v, axp)}")
    lines.append(f"  certified: {_certified_bound(model, v, c, axp)}")
    return "\n".join(lines)


def _enumerate_row(config: RunConfig, row: int) -> str:
    space, model, instances, _ = _load_inputs(config)
    v = instances[row]
    report = enumerate_explanations(
        model, v, budget=config.budget(), mode=config.mode, order=config.order
    )
    return formats.write_enumeration_report(
        report, class_name=model.class_names[report.class_id]
    )


def _attribute_row(config: RunConfig, row: int) -> list[dict]:
    space, model, instances, _ = _load_inputs(config)
    v = instances[row]
    report = enumerate_explanations(
        model, v, budget=config.budget(), mode=config.mode, order=config.order
    )
    axps = report.axp_sets()
    if not axps:
        raise UndefinedAttributionError(
            f"row {row}: no explanations within budget"
        )
    entries = []
    kinds = ("ffa", "wffa") if config.kind == "both" else (config.kind,)
    for kind in kinds:
        maker = attr.ffa if kind == "ffa" else attr.wffa
        vec = maker(axps, space.m, complete=report.complete)
        entry = {"row": row, "class_id": report.class_id, "vector": vec}
        if kind == "ffa" and config.checkpoints:
            exact = attr.ffa(axps, space.m, complete=report.complete)
            entry["convergence"] = attr.convergence_series(
                report, exact, config.checkpoints
            )
        entries.append(entry)
    return entries


def _run_rows(config: RunConfig, rows, worker):
    if config.workers > 1 and len(rows) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(worker, [config] * len(rows), rows))
    return [worker(config, row) for row in rows]


# --- commands -------------------------------------------------------------------


def cmd_explain(config: RunConfig) -> int:
    _, _, _, rows = _load_inputs(config)
    blocks = _run_rows(config, rows, _explain_row)
    _emit("\n".join(blocks), config.output)
    return EXIT_OK


def cmd_enumerate(config: RunConfig) -> int:
    _, _, _, rows = _load_inputs(config)
    docs = _run_rows(config, rows, _enumerate_row)
    if len(docs) == 1:
        _emit(docs[0], config.output)
    else:
        import json

        wrapped = {
            "format": "enumeration-reports/1",
            "reports": [json.loads(d) for d in docs],
        }
        _emit(json.dumps(wrapped, indent=2), config.output)
    return EXIT_OK


def cmd_attribute(config: RunConfig) -> int:
    space, _, _, rows = _load_inputs(config)
    per_row = _run_rows(config, rows, _attribute_row)
    entries = [entry for row_entries in per_row for entry in row_entries]
    _emit(formats.write_attribution_doc(space, entries), config.output)
    if config.grid is not None:
        if config.matrix_out is None:
            raise ParseError("--grid needs --matrix-out")
        rows_n, cols_n = config.grid
        first = entries[0]["vector"]
        with open(config.matrix_out, "w", encoding="utf-8") as handle:
            handle.write(formats.write_attribution_matrix(first, rows_n, cols_n))
    return EXIT_OK


def cmd_compare(config: RunConfig) -> int:
    space = formats.parse_feature_space(_read(config.space_path))
    reference_entries = formats.read_attribution_doc(_read(config.reference))
    if not reference_entries:
        raise DataMismatchError("reference document has no entries")
    candidate_lists: list[tuple[str, list[attr.AttributionVector]]] = []
    for name, path in config.candidates:
        if path.endswith(".json"):
            entries = formats.read_attribution_doc(_read(path))
            if len(entries) != len(reference_entries):
                raise DataMismatchError(
                    f"candidate {name!r} covers {len(entries)} instances,"
                    f" reference covers {len(reference_entries)}"
                )
            candidate_lists.append((name, [e["vector"] for e in entries]))
        else:
            vec = formats.read_external_attribution(_read(path), space)
            if len(reference_entries) != 1:
                raise DataMismatchError(
                    f"candidate {name!r} is a single vector but the reference"
                    f" covers {len(reference_entries)} instances"
                )
            candidate_lists.append((name, [vec]))
    per_instance = []
    for i, ref_entry in enumerate(reference_entries):
        ref_vec = ref_entry["vector"]
        cands = [(name, vecs[i]) for name, vecs in candidate_lists]
        per_instance.append(metrics.compare_vectors(ref_vec, cands, rbo_p=config.rbo_p))
    averaged = metrics.average_rows(per_instance)
    _emit(
        formats.write_comparison_doc(reference_entries[0]["vector"].source, averaged),
        config.output,
    )
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    space, model, instances, rows = _load_inputs(config)
    failures = 0
    lines = []
    for row in rows:
        v = instances[row]
        c = evaluate(model, v).class_id
        if config.report is not None:
            loaded = formats.read_enumeration_report(_read(config.report))
            axps, cxps = loaded.axps, loaded.cxps
        else:
            report = enumerate_explanations(model, v, mode=config.mode, order=config.order)
            axps, cxps = report.axp_sets(), report.cxp_sets()
        ref_axps, ref_cxps = brute_force_all_xps(model, v, c)

        def verdict(name: str, ok: bool, detail: str = "") -> None:
            nonlocal failures
            status = "PASS" if ok else "FAIL"
            suffix = f" ({detail})" if detail and not ok else ""
            lines.append(f"row {row}: {name}: {status}{suffix}")
            if not ok:
                failures += 1

        verdict(
            "axp sets match exhaustive search",
            set(axps) == set(ref_axps),
            f"got {sorted(map(sorted, axps))}, expected {sorted(map(sorted, ref_axps))}",
        )
        verdict(
            "cxp sets match exhaustive search",
            set(cxps) == set(ref_cxps),
            f"got {sorted(map(sorted, cxps))}, expected {sorted(map(sorted, ref_cxps))}",
        )
        violation = check_duality(axps, cxps)
        verdict(
            "hitting-set duality",
            violation is None,
            "" if violation is None else (
                f"{violation.side} {sorted(violation.offender)} {violation.reason}"
                + (
                    f" {sorted(violation.counterpart)}"
                    if violation.counterpart is not None
                    else ""
                )
            ),
        )
    _emit("\n".join(lines), config.output)
    return EXIT_OK if failures == 0 else 1


# --- argument parsing --------------------------------------------------------------


def _add_io_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model document (canonical or dump)")
    p.add_argument("--space", required=True, help="feature-space document")
    p.add_argument("--instances", required=True, help="instances CSV")
    p.add_argument("--rows", default=None, help="row selector, e.g. 0,2-4 (default: all)")
    p.add_argument("--classes", default="0,1", help="class names for dump models")
    p.add_argument("--base-score", type=float, default=None, help="dump score offset")
    p.add_argument("--order", default=None, help="feature-id permutation for scan order")
    p.add_argument("--output", default=None, help="write the document here (default: stdout)")
    p.add_argument("--workers", type=int, default=1, help="shard instances across processes")


def _add_budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seconds", type=float, default=None)
    p.add_argument("--max-axps", type=int, default=None)
    p.add_argument("--max-cxps", type=int, default=None)
    p.add_argument("--max-calls", type=int, default=None, dest="max_calls")
    p.add_argument(
        "--mode", choices=("cxp-first", "axp-first"), default="cxp-first",
        help="which explanation kind the hitting-set candidates target",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ffax",
        description="Exact explanation enumeration and formal feature attribution",
    )
    parser.add_argument(
        "--schema",
        metavar="FORMAT",
        default=None,
        help=f"print a format schema and exit; one of: list, {', '.join(formats.SCHEMA_NAMES)}",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("explain", help="one AXp per instance, with its certificate")
    _add_io_flags(p)

    p = sub.add_parser("enumerate", help="anytime AXp/CXp enumeration under a budget")
    _add_io_flags(p)
    _add_budget_flags(p)

    p = sub.add_parser("attribute", help="attribution vectors from enumerated AXp's")
    _add_io_flags(p)
    _add_budget_flags(p)
    p.add_argument("--kind", choices=("ffa", "wffa", "both"), default="ffa")
    p.add_argument("--checkpoints", default=None, help="budget marks, e.g. 1,2,5")
    p.add_argument("--grid", default=None, help="ROWSxCOLS layout for the matrix export")
    p.add_argument("--matrix-out", default=None, help="matrix document path")

    p = sub.add_parser("compare", help="score attribution vectors against a reference")
    p.add_argument("--space", required=True)
    p.add_argument("--reference", required=True, help="attribution document")
    p.add_argument(
        "--candidate",
        action="append",
        default=[],
        metavar="NAME=PATH",
        help="attribution document (.json) or external CSV; repeatable",
    )
    p.add_argument("--rbo-p", type=float, default=0.9, dest="rbo_p")
    p.add_argument("--output", default=None)

    p = sub.add_parser("verify", help="cross-check enumeration against brute force")
    _add_io_flags(p)
    p.add_argument("--mode", choices=("cxp-first", "axp-first"), default="cxp-first")
    p.add_argument("--report", default=None, help="check this report document instead")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    order = None
    if getattr(args, "order", None):
        order = tuple(int(x) for x in args.order.split(","))
    checkpoints: tuple[float, ...] = ()
    if getattr(args, "checkpoints", None):
        checkpoints = tuple(float(x) for x in args.checkpoints.split(","))
    grid = None
    if getattr(args, "grid", None):
        rows_n, cols_n = args.grid.lower().split("x")
        grid = (int(rows_n), int(cols_n))
    candidates = []
    for item in getattr(args, "candidate", []):
        if "=" not in item:
            raise ParseError(f"--candidate wants NAME=PATH, got {item!r}")
        name, path = item.split("=", 1)
        candidates.append((name, path))
    return RunConfig(
        command=args.command,
        model_path=getattr(args, "model", None),
        space_path=getattr(args, "space", None),
        instances_path=getattr(args, "instances", None),
        rows=_parse_rows(getattr(args, "rows", None)),
        mode=getattr(args, "mode", "cxp-first"),
        seconds=getattr(args, "seconds", None),
        max_axps=getattr(args, "max_axps", None),
        max_cxps=getattr(args, "max_cxps", None),
        max_oracle_calls=getattr(args, "max_calls", None),
        kind=getattr(args, "kind", "ffa"),
        checkpoints=checkpoints,
        output=getattr(args, "output", None),
        rbo_p=getattr(args, "rbo_p", 0.9),
        order=order,
        grid=grid,
        matrix_out=getattr(args, "matrix_out", None),
        workers=getattr(args, "workers", 1),
        classes=tuple(getattr(args, "classes", "0,1").split(",")),
        base_score=getattr(args, "base_score", None),
        reference=getattr(args, "reference", None),
        candidates=tuple(candidates),
        report=getattr(args, "report", None),
    )


_COMMANDS = {
    "explain": cmd_explain,
    "enumerate": cmd_enumerate,
    "attribute": cmd_attribute,
    "compare": cmd_compare,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema is not None:
        if args.schema == "list":
            print("\n".join(formats.SCHEMA_NAMES))
            return EXIT_OK
        try:
            print(formats.schema_text(args.schema))
        except ParseError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_INPUT
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_INPUT
    try:
        config = _config_from_args(args)
        return _COMMANDS[args.command](config)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except UndefinedAttributionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY_ATTRIBUTION
    except DataMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_MISMATCH
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except FfaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
