"""``pcell <command> [flags] <file>``: run the pipelines on a DSL or JSON document.

Results go to stdout as JSON; errors go to stdout as a JSON ``error`` object
and the process exits with one of the codes below.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from .admissible import PreconditionError, compute_W, decompose_admissible, is_admissible, is_preadmissible
from .balls import EnumerationLimitError, canonical_point
from .cells import Cell, Decomposition, UndefinedRhoError, WrongKindError, rho_max
from .clusters import (
    ClusteredCellFam,
    DecompositionFam,
    MultiCellFam,
    NotACenterError,
    SearchLimitError,
    d_signature,
    validate_cell_array,
    validate_clustered,
)
from .differential import AGAINST, CHECKS, WindowOverride, run_oracle
from .dsl import DSLError, Document, parse
from .oracle import DEFAULT_GRID_CAP, WindowTooLargeError
from .padic import NEG_INF, format_padic
from .regular import (
    CapExceededError,
    DEFAULT_TUPLE_CAP,
    InvalidArrayError,
    check_regularity,
    class_disjointness,
    classify,
    clustered_decompose,
    normalize_ac,
    regularize,
    repartition_acprec,
    repartition_interval,
    repartition_order,
)
from .serialize import document_from_json, gamma_json, to_json

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_USAGE = 3
EXIT_CAP = 4
EXIT_INTERNAL = 5

COMMANDS = ("check", "admissibilize", "decompose", "tree", "signature", "repartition", "regularize", "normalize", "oracle", "dot")

CAP_ERRORS = (WindowTooLargeError, CapExceededError, EnumerationLimitError, SearchLimitError)
INPUT_ERRORS = (PreconditionError, WrongKindError, UndefinedRhoError, NotACenterError, InvalidArrayError)


class UsageError(Exception):
    pass


class ValidationFailed(Exception):
    """Raised after the result has been built when some object is invalid."""

    def __init__(self, payload: dict):
        super().__init__("validation failed")
        self.payload = payload


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pcell", description="Exact p-adic cell decompositions and clustered cells.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("file", nargs="?", help="DSL or JSON document ('-' for stdin)")
    ap.add_argument("--p", type=int, help="prime: must match the document; restricts random oracle cases")
    ap.add_argument("--vmin", type=int, help="lowest valuation of the oracle grid")
    ap.add_argument("--vmax", type=int, help="highest valuation of the oracle grid")
    ap.add_argument("--digits", type=int, help="unit digits per valuation in the oracle grid")
    ap.add_argument("--seed", type=int, default=0, help="first seed for random oracle cases")
    ap.add_argument("--cases", type=int, default=0, help="number of random oracle cases")
    ap.add_argument("--cap", type=int, help="grid point cap (also bounds tuple enumeration)")
    ap.add_argument("--d", type=int, default=3, help="signature length")
    ap.add_argument("--against", choices=AGAINST, help="pipeline checked by the oracle command")
    ap.add_argument("--dot", metavar="DIR", help="write DOT trees into DIR, one file per fiber")
    ap.add_argument("--name", action="append", help="only process the named object (repeatable)")
    ap.add_argument("--op", choices=("interval", "order", "acprec"), default="interval", help="repartition kind")
    ap.add_argument("--index", type=int, default=0, help="condition index for repartition")
    ap.add_argument("--delta", type=int, help="cut height for an interval repartition")
    ap.add_argument("--ell", type=int, default=1, help="factor for order/acprec repartitions")
    ap.add_argument("--allow-shift", action="store_true", help="normalize also when ord lambda is not 0")
    return ap


def _read_document(path: str, p_flag: Optional[int]) -> Document:
    if path == "-":
        text = sys.stdin.read()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise UsageError(f"cannot read {path}: {e.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            doc = document_from_json(json.loads(text))
        except (ValueError, KeyError, TypeError) as e:
            raise DSLError(f"bad JSON document: {e}", 1, 1) from None
    else:
        doc = parse(text)
    if p_flag is not None and p_flag != doc.p:
        from .dsl import WrongPrimeError

        raise WrongPrimeError(f"--p {p_flag} does not match the document prime {doc.p}", 1, 1)
    return doc


def _selected(doc: Document, names: Optional[Sequence[str]]) -> list:
    if not names:
        return list(doc.objects)
    out = []
    for n in names:
        try:
            out.append((n, doc.get(n)))
        except KeyError:
            raise UsageError(f"no object named {n!r}") from None
    return out


def _sig_json(sig) -> list:
    return ["-inf" if k is NEG_INF else k for k in sig]


def _report_json(rep) -> list:
    return [{"condition": v.condition, "label": str(v.label), "detail": v.detail} for v in rep.violations]


# ---------------------------------------------------------------------------
# commands


def cmd_check(doc: Document, args) -> dict:
    results = []
    failed = False
    for name, obj in _selected(doc, args.name):
        entry: dict = {"name": name, "kind": to_json(obj)["kind"]}
        if isinstance(obj, Cell):
            entry["valid"] = True
            entry["empty"] = (not obj.is_zero_cell) and obj.is_empty()
            if not obj.is_zero_cell and obj.upper is not None and not entry["empty"]:
                entry["rho_max"] = rho_max(obj.condition)
        elif isinstance(obj, Decomposition):
            entry["valid"] = True
            entry["preadmissible"] = is_preadmissible(obj)
            entry["admissible"] = is_admissible(obj)
            entry["W"] = [format_padic(x) for x in compute_W(obj)]
        elif isinstance(obj, ClusteredCellFam):
            rep = validate_clustered(obj)
            entry["valid"] = rep.ok
            entry["violations"] = _report_json(rep)
            if rep.ok:
                entry["classification"] = str(classify(obj))
        elif isinstance(obj, MultiCellFam):
            rep = validate_cell_array(obj)
            entry["valid"] = rep.ok
            entry["violations"] = _report_json(rep)
            if rep.ok:
                reg = check_regularity(obj)
                entry["regular"] = reg.ok
                entry["regularity"] = reg.summary()
        else:
            entry["valid"] = True
        failed |= not entry["valid"]
        results.append(entry)
    out = {"results": results}
    if failed:
        raise ValidationFailed(out)
    return out


def _as_decomposition(obj, p: int) -> Optional[Decomposition]:
    if isinstance(obj, Decomposition):
        return obj
    if isinstance(obj, Cell):
        return Decomposition((obj,), p)
    return None


def cmd_admissibilize(doc: Document, args) -> dict:
    results = []
    for name, obj in _selected(doc, args.name):
        d = _as_decomposition(obj, doc.p)
        if d is None:
            continue
        out, trace = decompose_admissible(d, with_trace=True)
        results.append(
            {
                "name": name,
                "admissible": is_admissible(out),
                "output": to_json(out),
                "w_sizes": trace.w_sizes,
                "steps": [
                    {"rule": st.rule, "iteration": st.iteration, "w_before": st.w_before, "w_after": st.w_after}
                    for st in trace.steps
                ],
            }
        )
    return {"results": results}


def cmd_decompose(doc: Document, args) -> dict:
    results = []
    for name, obj in _selected(doc, args.name):
        inp = _as_decomposition(obj, doc.p) or obj
        if not isinstance(inp, (Decomposition, DecompositionFam, MultiCellFam, ClusteredCellFam)):
            continue
        res = clustered_decompose(inp, _tuple_cap(args))
        entry = {
            "name": name,
            "n": res.n,
            "m": res.m,
            "regular_arrays": res.regular_arrays,
            "items": [to_json(it) for it in res.items],
        }
        if res.merge is not None:
            entry["merge_measures"] = res.merge.measures
        results.append(entry)
    return {"results": results}


def _trees(doc: Document, args):
    """(object name, coordinate or None, label, CenterTree) for clusters and arrays."""
    for name, obj in _selected(doc, args.name):
        if isinstance(obj, ClusteredCellFam):
            for s in obj.params:
                yield name, None, s, obj.tree(s)
        elif isinstance(obj, MultiCellFam):
            from .clusters import CenterTree

            for i in range(obj.r):
                for s in obj.params:
                    balls = obj.used_classes(s, i)
                    if balls:
                        yield name, i, s, CenterTree(balls)


def _tree_json(tree) -> dict:
    return {
        "leaves": [to_json(b) for b in tree.leaves],
        "branching_heights": tree.branching_heights(),
        "nodes": [{"ball": to_json(b), "children": len(tree.children(b))} for b in tree.nodes],
    }


def _dot_name(name: str, coord, label) -> str:
    return f"{name}_{label}" if coord is None else f"{name}_{coord}_{label}"


def _write_dots(doc: Document, args) -> list:
    files = []
    os.makedirs(args.dot, exist_ok=True)
    for name, coord, s, tree in _trees(doc, args):
        base = _dot_name(name, coord, s)
        path = os.path.join(args.dot, base + ".dot")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(tree.to_dot(base))
        files.append(path)
    return files


def cmd_tree(doc: Document, args) -> dict:
    results = []
    for name, coord, s, tree in _trees(doc, args):
        entry = {"name": name, "label": s, **_tree_json(tree)}
        if coord is not None:
            entry["coordinate"] = coord
        results.append(entry)
    out = {"results": results}
    if args.dot:
        out["dot_files"] = _write_dots(doc, args)
    return out


def cmd_dot(doc: Document, args):
    if args.dot:
        return {"dot_files": _write_dots(doc, args)}
    chunks = [tree.to_dot(_dot_name(name, coord, s)) for name, coord, s, tree in _trees(doc, args)]
    return "".join(chunks)


def cmd_signature(doc: Document, args) -> dict:
    if args.d < 1:
        raise UsageError("--d must be positive")
    results = []
    for name, obj in _selected(doc, args.name):
        if not isinstance(obj, ClusteredCellFam):
            continue
        for s in obj.params:
            for b in obj.classes(s):
                c = canonical_point(b)
                results.append(
                    {
                        "name": name,
                        "label": s,
                        "center": format_padic(c),
                        "class": to_json(b),
                        "signature": _sig_json(d_signature(obj, s, c, args.d)),
                    }
                )
    return {"d": args.d, "results": results}


def _tuple_cap(args) -> int:
    return args.cap if args.cap is not None else DEFAULT_TUPLE_CAP


def cmd_repartition(doc: Document, args) -> dict:
    results = []
    for name, obj in _selected(doc, args.name):
        if not isinstance(obj, (MultiCellFam, ClusteredCellFam)):
            continue
        if args.op == "interval":
            if args.delta is None:
                raise UsageError("--op interval needs --delta")
            out = repartition_interval(obj, args.index, args.delta, _tuple_cap(args))
        elif args.op == "order":
            out = repartition_order(obj, args.index, args.ell, _tuple_cap(args))
        else:
            out = repartition_acprec(obj, args.index, args.ell, _tuple_cap(args))
        entry = {"name": name, "op": args.op, "output": to_json(out)}
        if args.op == "interval":
            rep = validate_cell_array(out)
            entry["valid"] = rep.ok
            entry["violations"] = _report_json(rep)
        results.append(entry)
    return {"results": results}


def cmd_regularize(doc: Document, args) -> dict:
    results = []
    for name, obj in _selected(doc, args.name):
        if not isinstance(obj, (MultiCellFam, ClusteredCellFam)):
            continue
        regs = regularize(obj, _tuple_cap(args))
        results.append(
            {
                "name": name,
                "outputs": [
                    {
                        "array": to_json(r),
                        "regularity": check_regularity(r).summary(),
                        "disjoint_classes": not class_disjointness(r),
                    }
                    for r in regs
                ],
            }
        )
    return {"results": results}


def cmd_normalize(doc: Document, args) -> dict:
    results = []
    for name, obj in _selected(doc, args.name):
        if not isinstance(obj, ClusteredCellFam):
            continue
        out = normalize_ac(obj, allow_shift=args.allow_shift)
        results.append({"name": name, "output": to_json(out)})
    return {"results": results}


def cmd_oracle(doc: Optional[Document], args) -> dict:
    against = args.against or "decompose"
    cap = args.cap if args.cap is not None else DEFAULT_GRID_CAP
    win = WindowOverride(args.vmin, args.vmax, args.digits, cap)
    cases = []
    if doc is not None:
        for name, obj in _selected(doc, args.name):
            call = _document_case(against, obj, doc.p, args)
            if call is None:
                continue
            res = CHECKS[against](*call, win=win)
            cases.append({"name": name, "ok": res.ok, "detail": res.detail, **res.data})
    if args.cases:
        primes = (args.p,) if args.p else (2, 3, 5)
        cases.extend(run_oracle(against, range(args.seed, args.seed + args.cases), primes, win))
    if doc is None and not args.cases:
        raise UsageError("oracle needs a document or --cases")
    passed = sum(1 for c in cases if c["ok"])
    out = {"against": against, "cases": cases, "passed": passed, "failed": len(cases) - passed}
    if passed != len(cases):
        raise ValidationFailed(out)
    return out


def _document_case(against: str, obj, p: int, args):
    if against == "admissibilize":
        d = _as_decomposition(obj, p)
        return None if d is None else (d,)
    if against == "decompose":
        inp = _as_decomposition(obj, p) or obj
        return (inp,) if isinstance(inp, (Decomposition, DecompositionFam, MultiCellFam, ClusteredCellFam)) else None
    if against == "regularize":
        return (obj,) if isinstance(obj, MultiCellFam) else None
    if against == "normalize":
        return (obj,) if isinstance(obj, ClusteredCellFam) else None
    if against == "repartition":
        if not isinstance(obj, MultiCellFam):
            return None
        if args.op == "interval":
            if args.delta is None:
                raise UsageError("--op interval needs --delta")
            return (obj, "interval", args.index, args.delta)
        return (obj, args.op, args.index, args.ell)
    if against == "set-equal":
        return None
    return None


HANDLERS = {
    "check": cmd_check,
    "admissibilize": cmd_admissibilize,
    "decompose": cmd_decompose,
    "tree": cmd_tree,
    "signature": cmd_signature,
    "repartition": cmd_repartition,
    "regularize": cmd_regularize,
    "normalize": cmd_normalize,
    "oracle": cmd_oracle,
    "dot": cmd_dot,
}


# ---------------------------------------------------------------------------
# entry point


def _emit(stream, command: str, ok: bool, body) -> None:
    if isinstance(body, str):
        stream.write(body)
        return
    payload = {"command": command, "ok": ok, **body}
    stream.write(json.dumps(payload, indent=2, default=_default) + "\n")


def _default(x):
    g = gamma_json(x)
    if g is not x:
        return g
    return str(x)


def _error(kind: str, message: str, **extra) -> dict:
    return {"error": {"kind": kind, "message": message, **extra}}


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    out = stdout or sys.stdout
    command = "usage"
    try:
        args = build_parser().parse_intermixed_args(argv)
        command = args.command
        if args.file is None and command != "oracle":
            raise UsageError(f"{command} needs an input file")
        if args.cases < 0:
            raise UsageError("--cases must be non-negative")
        doc = _read_document(args.file, args.p) if args.file else None
        body = HANDLERS[command](doc, args)
        _emit(out, command, True, body)
        return EXIT_OK
    except UsageError as e:
        _emit(out, command, False, _error("usage", str(e)))
        return EXIT_USAGE
    except DSLError as e:
        _emit(out, command, False, {"error": e.to_json()})
        return EXIT_VALIDATION
    except ValidationFailed as e:
        _emit(out, command, False, e.payload)
        return EXIT_VALIDATION
    except InvalidArrayError as e:
        _emit(out, command, False, _error("invalid-array", "input is not a valid cell array", violations=_report_json(e.report)))
        return EXIT_VALIDATION
    except CAP_ERRORS as e:
        _emit(out, command, False, _error("cap-exceeded", str(e)))
        return EXIT_CAP
    except INPUT_ERRORS as e:
        _emit(out, command, False, _error("precondition", str(e)))
        return EXIT_VALIDATION
    except Exception as e:  # noqa: BLE001 - reported as an internal error
        _emit(out, command, False, _error("internal", f"{type(e).__name__}: {e}"))
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
