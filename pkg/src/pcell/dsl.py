"""Text format for cells, balls, decompositions and families over a label set.

A document fixes one prime, optionally declares labels, then binds names to
objects.  ``parse`` and ``print_document`` round-trip: printing a parsed
document and parsing it again gives an equal ``Document``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Optional

from .balls import Ball
from .cells import Cell, CellCondition, Decomposition
from .clusters import (
    CenterSet,
    ClassicalCellFam,
    ClusteredCellFam,
    ConditionFamily,
    DecompositionFam,
    MultiCellFam,
    ParamSet,
)
from .padic import INF, PAdic, format_gamma, format_padic


class DSLError(ValueError):
    kind = "error"

    def __init__(self, message: str, line: int, col: int, expected: tuple = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        where = f"line {line}, column {col}"
        hint = f" (expected {' or '.join(expected)})" if expected else ""
        super().__init__(f"{where}: {message}{hint}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "message": self.message,
            "line": self.line,
            "column": self.col,
            "expected": list(self.expected),
        }


class DSLSyntaxError(DSLError):
    kind = "syntax"


class UnknownNameError(DSLError):
    kind = "unknown-name"


class WrongPrimeError(DSLError):
    kind = "wrong-prime"


class MalformedLiteralError(DSLError):
    kind = "malformed-literal"


class InvalidObjectError(DSLError):
    kind = "invalid-object"


@dataclass(frozen=True)
class Document:
    p: int
    params: Optional[ParamSet] = None
    objects: tuple = ()  # ((name, object), ...)

    def get(self, name: str):
        for k, v in self.objects:
            if k == name:
                return v
        raise KeyError(name)

    def names(self) -> list:
        return [k for k, _ in self.objects]


# ---------------------------------------------------------------------------
# tokens

_TOKEN = re.compile(
    r"(?P<nl>\n)|(?P<ws>[ \t\r]+)|(?P<comment>#[^\n]*)"
    r"|(?P<neginf>-inf\b)|(?P<int>[+-]?\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[=;,(){}\[\]:*^])"
)

KEYWORDS = {"p", "params", "cell", "B", "decomposition", "cluster", "array", "classical", "family", "inf", "none"}


@dataclass
class _Tok:
    kind: str  # int, ident, op, neginf, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    out = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = mt.lastgroup
        s = mt.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                out.append(_Tok(kind, s, line, col))
            col += len(s)
        pos = mt.end()
    out.append(_Tok("eof", "", line, col))
    return out


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, int(p**0.5) + 1))


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.p: Optional[int] = None
        self.params: Optional[ParamSet] = None
        self.env: dict = {}

    # helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _desc(self, t: _Tok) -> str:
        return "end of input" if t.kind == "eof" else repr(t.text)

    def fail(self, *expected, t: Optional[_Tok] = None):
        t = t or self.tok
        raise DSLSyntaxError(f"unexpected {self._desc(t)}", t.line, t.col, tuple(expected))

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident", "neginf") and self.tok.text == text

    def eat(self, text: str) -> _Tok:
        if not self.at(text):
            self.fail(repr(text))
        t = self.tok
        self.i += 1
        return t

    def maybe(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def integer(self) -> int:
        if self.tok.kind != "int":
            self.fail("integer")
        v = int(self.tok.text)
        self.i += 1
        return v

    def ident(self, what: str = "name") -> _Tok:
        if self.tok.kind != "ident":
            self.fail(what)
        t = self.tok
        self.i += 1
        return t

    def key(self, name: str) -> None:
        self.eat(name)
        self.eat("=")

    # document
    def document(self) -> Document:
        t = self.tok
        if not self.at("p"):
            self.fail("'p=' prime declaration", t=t)
        self.eat("p")
        self.eat("=")
        pt = self.tok
        self.p = self.integer()
        if not _is_prime(self.p):
            raise WrongPrimeError(f"{self.p} is not prime", pt.line, pt.col)
        self.maybe(";")
        objects = []
        while self.tok.kind != "eof":
            if self.at("p"):
                t = self.tok
                self.eat("p")
                self.eat("=")
                q = self.integer()
                raise WrongPrimeError(f"second prime declaration p={q} (document uses p={self.p})", t.line, t.col)
            if self.at("params"):
                self.params_block()
            else:
                objects.append(self.binding())
            self.maybe(";")
        return Document(self.p, self.params, tuple(objects))

    def params_block(self) -> None:
        t = self.eat("params")
        if self.params is not None:
            raise DSLSyntaxError("params declared twice", t.line, t.col)
        self.eat("{")
        labels = [self.label_decl()]
        while self.maybe(","):
            labels.append(self.label_decl())
        self.eat("}")
        if len(set(labels)) != len(labels):
            raise DSLSyntaxError("duplicate label in params", t.line, t.col)
        self.params = ParamSet(tuple(labels))

    def label_decl(self) -> str:
        return self.ident("label").text

    def binding(self):
        t = self.ident("name or 'params'")
        if t.text in KEYWORDS:
            self.fail("name", t=t)
        if t.text in self.env:
            raise DSLSyntaxError(f"name {t.text!r} already bound", t.line, t.col)
        self.eat("=")
        obj = self.expr()
        self.env[t.text] = obj
        return (t.text, obj)

    def expr(self):
        t = self.tok
        if t.kind != "ident":
            self.fail("object")
        table = {
            "cell": self.cell,
            "B": self.ball,
            "decomposition": self.decomposition,
            "cluster": self.cluster,
            "array": self.array,
            "classical": self.classical,
            "family": self.family,
        }
        if t.text in table:
            return table[t.text]()
        return self.reference()

    def reference(self):
        t = self.ident("object")
        if t.text not in self.env:
            raise UnknownNameError(f"unknown name {t.text!r}", t.line, t.col)
        return self.env[t.text]

    # literals
    def padic(self) -> PAdic:
        t = self.tok
        if t.kind != "int":
            self.fail("p-adic literal")
        mant = self.integer()
        if not self.maybe("*"):
            return PAdic(self.p, mant, 0)
        base = self.tok
        if base.kind == "ident" and base.text == "p":
            self.i += 1
        elif base.kind == "int":
            self.i += 1
            if int(base.text) != self.p:
                raise WrongPrimeError(f"literal uses base {base.text} but the document has p={self.p}", base.line, base.col)
        else:
            raise MalformedLiteralError("expected 'p' after '*'", base.line, base.col, ("'p'",))
        if not self.at("^"):
            raise MalformedLiteralError("expected '^' after the base", self.tok.line, self.tok.col, ("'^'",))
        self.i += 1
        if self.tok.kind != "int":
            raise MalformedLiteralError("expected an integer exponent", self.tok.line, self.tok.col, ("integer",))
        return PAdic(self.p, mant, self.integer())

    def bound(self, lower: bool):
        if self.maybe("none"):
            return None
        if lower and self.tok.kind == "neginf":
            self.i += 1
            return None
        if self.tok.kind != "int":
            self.fail("integer", "'none'", *(("'-inf'",) if lower else ()))
        return self.integer()

    def gamma(self):
        if self.maybe("inf"):
            return INF
        if self.tok.kind != "int":
            self.fail("integer", "'inf'")
        return self.integer()

    def _build(self, t: _Tok, fn, *args):
        try:
            return fn(*args)
        except (ValueError, TypeError) as e:
            if isinstance(e, DSLError):
                raise
            raise InvalidObjectError(str(e), t.line, t.col) from None

    # objects
    def cell(self) -> Cell:
        t = self.eat("cell")
        self.eat("(")
        self.key("lower")
        lo = self.bound(True)
        self.eat(",")
        self.key("upper")
        hi = self.bound(False)
        self.eat(";")
        lam, n, m = self.shape()
        self.eat(";")
        self.key("center")
        c = self.padic()
        self.eat(")")
        return self._build(t, lambda: Cell(CellCondition(lo, hi, lam, n, m), c))

    def shape(self):
        self.key("lambda")
        lam = self.padic()
        self.eat(",")
        self.key("n")
        n = self.integer()
        self.eat(",")
        self.key("m")
        m = self.integer()
        return lam, n, m

    def ball(self) -> Ball:
        t = self.eat("B")
        self.eat("(")
        c = self.padic()
        self.eat(",")
        r = self.gamma()
        self.eat(")")
        return self._build(t, Ball, c, r)

    def decomposition(self) -> Decomposition:
        t = self.eat("decomposition")
        self.eat("{")
        cells = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail("cell", "'}'")
            if self.at("cell"):
                cells.append(self.cell())
            else:
                rt = self.tok
                obj = self.reference()
                if isinstance(obj, Cell):
                    cells.append(obj)
                elif isinstance(obj, Decomposition):
                    cells.extend(obj.cells)
                else:
                    raise DSLSyntaxError(f"{rt.text!r} is not a cell or decomposition", rt.line, rt.col, ("cell",))
            self.maybe(",")
        self.eat("}")
        return self._build(t, Decomposition, tuple(cells), self.p)

    def label(self, allowed=None) -> str:
        t = self.ident("label")
        if self.params is None or t.text not in self.params:
            raise UnknownNameError(f"label {t.text!r} is not declared in params", t.line, t.col)
        if allowed is not None and t.text not in allowed:
            raise UnknownNameError(f"label {t.text!r} is not in this family's condition table", t.line, t.col)
        return t.text

    def label_table(self, value, allowed=None) -> dict:
        """``{s: value, ...}`` with declared, non-repeated labels."""
        self.eat("{")
        out = {}
        while True:
            lt = self.tok
            s = self.label(allowed)
            if s in out:
                raise DSLSyntaxError(f"label {s!r} repeated", lt.line, lt.col)
            self.eat(":")
            out[s] = value()
            if not self.maybe(","):
                break
        self.eat("}")
        if allowed is not None and set(out) != set(allowed):
            missing = [s for s in allowed if s not in out]
            raise DSLSyntaxError(f"missing labels {missing}", self.toks[self.i - 1].line, self.toks[self.i - 1].col)
        return out

    def cond_table(self) -> ConditionFamily:
        t = self.eat("{")
        lam, n, m = self.shape()
        self.eat(";")
        bounds = {}
        while True:
            lt = self.tok
            s = self.label()
            if s in bounds:
                raise DSLSyntaxError(f"label {s!r} repeated", lt.line, lt.col)
            self.eat(":")
            self.eat("(")
            lo = self.bound(True)
            self.eat(",")
            hi = self.bound(False)
            self.eat(")")
            bounds[s] = (lo, hi)
            if not self.maybe(","):
                break
        self.eat("}")
        return self._build(t, ConditionFamily.build, lam, n, m, bounds)

    def ball_list(self) -> list:
        self.eat("[")
        out = []
        if not self.at("]"):
            out.append(self.ball())
            while self.maybe(","):
                out.append(self.ball())
        self.eat("]")
        return out

    def cluster(self) -> ClusteredCellFam:
        t = self.eat("cluster")
        self.eat("(")
        cf = self.cond_table()
        self.eat(",")
        labels = cf.labels()
        classes = self.label_table(self.ball_list, labels)
        self.eat(")")
        params = ParamSet(labels)
        return self._build(t, lambda: ClusteredCellFam(params, cf, CenterSet.build({s: classes[s] for s in labels})))

    def classical(self) -> ClassicalCellFam:
        t = self.eat("classical")
        self.eat("(")
        cf = self.cond_table()
        self.eat(",")
        labels = cf.labels()
        centers = self.label_table(self.padic, labels)
        self.eat(")")
        return self._build(t, lambda: ClassicalCellFam(ParamSet(labels), cf, tuple((s, centers[s]) for s in labels)))

    def array(self) -> MultiCellFam:
        t = self.eat("array")
        self.eat("(")
        self.eat("[")
        conds = [self.cond_table()]
        while self.maybe(","):
            conds.append(self.cond_table())
        self.eat("]")
        labels = conds[0].labels()
        for c in conds[1:]:
            if set(c.labels()) != set(labels):
                raise DSLSyntaxError("condition tables cover different labels", t.line, t.col)
        conds = [c.restrict(labels) for c in conds]
        self.eat(",")

        def per_coordinate():
            self.eat("[")
            out = [self.ball_list()]
            while self.maybe(","):
                out.append(self.ball_list())
            self.eat("]")
            return out

        classes = self.label_table(per_coordinate, labels)
        tuples = None
        if self.maybe(","):
            tuples = self.label_table(self.tuple_list, labels)
        self.eat(")")
        params = ParamSet(labels)
        return self._build(t, MultiCellFam.build, params, conds, {s: classes[s] for s in labels}, tuples)

    def tuple_list(self) -> list:
        self.eat("[")
        out = []
        while not self.at("]"):
            self.eat("(")
            tup = [self.integer()]
            while self.maybe(","):
                tup.append(self.integer())
            self.eat(")")
            out.append(tuple(tup))
            if not self.maybe(","):
                break
        self.eat("]")
        return out

    def family(self) -> DecompositionFam:
        t = self.eat("family")

        def value():
            if self.at("decomposition"):
                return self.decomposition()
            rt = self.tok
            obj = self.reference()
            if isinstance(obj, Cell):
                return Decomposition((obj,), self.p)
            if not isinstance(obj, Decomposition):
                raise DSLSyntaxError(f"{rt.text!r} is not a decomposition", rt.line, rt.col, ("decomposition",))
            return obj

        table = self.label_table(value)
        return self._build(t, DecompositionFam.build, table)


def parse(text: str) -> Document:
    return _Parser(text).document()


# ---------------------------------------------------------------------------
# printer


def _bound(b) -> str:
    return "none" if b is None else str(b)


def print_ball(b: Ball) -> str:
    return f"B({format_padic(b.center)}, {format_gamma(b.radius)})"


def print_cell(c: Cell) -> str:
    cond = c.condition
    return (
        f"cell(lower={_bound(cond.lower)}, upper={_bound(cond.upper)}; "
        f"lambda={format_padic(cond.lam)}, n={cond.n}, m={cond.m}; center={format_padic(c.center)})"
    )


def _decomposition(d: Decomposition, indent: str) -> str:
    if not d.cells:
        return "decomposition {}"
    body = "".join(f"{indent}  {print_cell(c)}\n" for c in d.cells)
    return "decomposition {\n" + body + indent + "}"


def _cond_table(cf: ConditionFamily) -> str:
    rows = ", ".join(f"{s}: ({_bound(lo)}, {_bound(hi)})" for s, (lo, hi) in cf.bounds)
    return f"{{lambda={format_padic(cf.lam)}, n={cf.n}, m={cf.m}; {rows}}}"


def _balls(bs) -> str:
    return "[" + ", ".join(print_ball(b) for b in bs) + "]"


def print_object(obj, indent: str = "") -> str:
    if isinstance(obj, Cell):
        return print_cell(obj)
    if isinstance(obj, Ball):
        return print_ball(obj)
    if isinstance(obj, Decomposition):
        return _decomposition(obj, indent)
    if isinstance(obj, ClusteredCellFam):
        classes = ", ".join(f"{s}: {_balls(bs)}" for s, bs in obj.centers.fibers)
        return f"cluster(\n{indent}  {_cond_table(obj.cond)},\n{indent}  {{{classes}}}\n{indent})"
    if isinstance(obj, ClassicalCellFam):
        centers = ", ".join(f"{s}: {format_padic(c)}" for s, c in obj.centers)
        return f"classical({_cond_table(obj.cond)}, {{{centers}}})"
    if isinstance(obj, MultiCellFam):
        conds = f",\n{indent}    ".join(_cond_table(c) for c in obj.conds)
        classes = f",\n{indent}    ".join(
            f"{s}: [" + ", ".join(_balls(bs) for bs in per) + "]" for s, per in obj.classes
        )
        text = f"array(\n{indent}  [{conds}],\n{indent}  {{{classes}}}"
        full = all(
            set(tups) == set(itertools.product(*[range(len(bs)) for bs in dict(obj.classes)[s]]))
            for s, tups in obj.tuples
        )
        if not full:
            rows = f",\n{indent}    ".join(
                f"{s}: [" + ", ".join("(" + ", ".join(map(str, t)) + ")" for t in tups) + "]" for s, tups in obj.tuples
            )
            text += f",\n{indent}  {{{rows}}}"
        return text + f"\n{indent})"
    if isinstance(obj, DecompositionFam):
        rows = "".join(f"{indent}  {s}: {_decomposition(d, indent + '  ')},\n" for s, d in obj.fibers)
        return "family {\n" + rows.rstrip(",\n") + "\n" + indent + "}"
    raise TypeError(f"cannot print {type(obj).__name__}")


def print_document(doc: Document) -> str:
    lines = [f"p={doc.p};"]
    if doc.params is not None:
        lines.append("params {" + ", ".join(doc.params.labels) + "};")
    for name, obj in doc.objects:
        lines.append(f"{name} = {print_object(obj)};")
    return "\n".join(lines) + "\n"


def document_params(objects) -> Optional[ParamSet]:
    """The labels used by the family objects, in first-seen order."""
    seen: list = []
    for obj in objects:
        labels = getattr(obj, "params", None)
        for s in labels or ():
            if s not in seen:
                seen.append(s)
    return ParamSet(tuple(seen)) if seen else None


def make_document(p: int, named: dict, params: Optional[ParamSet] = None) -> Document:
    objs = tuple(named.items())
    return Document(p, params if params is not None else document_params(named.values()), objs)
