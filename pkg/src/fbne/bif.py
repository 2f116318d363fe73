"""Reading and writing the discrete subset of the BIF network format.

Supported grammar::

    network <name> { ... }
    variable <name> { type discrete [ k ] { s1, s2, ... }; property ...; }
    probability ( child | p1, p2, ... ) {
        table v1, v2, ...;            # only when there are no parents
        (s_p1, s_p2, ...) v1, v2, ...; # one row per parent configuration
    }

``//`` and ``/* */`` comments are skipped.
"""
from __future__ import annotations

import itertools
import re
from pathlib import Path

import numpy as np

from .bn import BayesianNetwork, Cpt
from .table import Variable

ROW_TOLERANCE = 1e-6

_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<comment>//[^\n]*|/\*.*?\*/)|(?P<punct>[{}()\[\],;|])|(?P<word>[^\s{}()\[\],;|]+)",
    re.S,
)


class BifError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    line = 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # pragma: no cover - every character matches some branch
            raise BifError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        if kind in ("punct", "word"):
            tokens.append((m.group(), line))
        line += m.group().count("\n")
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def line(self):
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][1]
        return self.tokens[-1][1] if self.tokens else 1

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def next(self):
        if self.pos >= len(self.tokens):
            raise BifError("unexpected end of file", self.line)
        tok = self.tokens[self.pos][0]
        self.pos += 1
        return tok

    def expect(self, tok):
        line = self.line
        got = self.next()
        if got != tok:
            raise BifError(f"expected {tok!r}, got {got!r}", line)

    def skip_block(self):
        self.expect("{")
        depth = 1
        while depth:
            tok = self.next()
            depth += tok == "{"
            depth -= tok == "}"

    def name_list(self, close):
        names = []
        while True:
            names.append(self.next())
            tok = self.next()
            if tok == close:
                return names
            if tok != ",":
                raise BifError(f"expected ',' or {close!r}, got {tok!r}", self.line)

    def numbers(self):
        vals = []
        while True:
            line = self.line
            tok = self.next()
            try:
                vals.append(float(tok))
            except ValueError:
                raise BifError(f"expected a probability, got {tok!r}", line) from None
            tok = self.next()
            if tok == ";":
                return vals
            if tok != ",":
                raise BifError(f"expected ',' or ';', got {tok!r}", self.line)

    def parse(self) -> BayesianNetwork:
        variables: dict[str, Variable] = {}
        probs: dict[str, tuple[list[str], dict, int]] = {}
        while self.peek() is not None:
            line = self.line
            kw = self.next()
            if kw == "network":
                self.next()
                self.skip_block()
            elif kw == "variable":
                name = self.next()
                variables[name] = self.variable(name)
            elif kw == "probability":
                child, parents, rows = self.probability()
                probs[child] = (parents, rows, line)
            else:
                raise BifError(f"unexpected keyword {kw!r}", line)
        return _assemble(variables, probs)

    def variable(self, name) -> Variable:
        self.expect("{")
        var = None
        while self.peek() != "}":
            line = self.line
            kw = self.next()
            if kw == "type":
                kind = self.next()
                if kind != "discrete":
                    raise BifError(f"only discrete variables are supported, got {kind!r}", line)
                self.expect("[")
                k = int(self.next())
                self.expect("]")
                self.expect("{")
                states = self.name_list("}")
                self.expect(";")
                if len(states) != k:
                    raise BifError(f"{name!r} declares {k} states but lists {len(states)}", line)
                var = Variable(name, tuple(states))
            elif kw == "property":
                while self.next() != ";":
                    pass
            else:
                raise BifError(f"unexpected {kw!r} in variable block", line)
        self.expect("}")
        if var is None:
            raise BifError(f"variable {name!r} has no type", self.line)
        return var

    def probability(self):
        self.expect("(")
        child = self.next()
        parents = []
        tok = self.next()
        if tok == "|":
            parents = self.name_list(")")
        elif tok != ")":
            raise BifError(f"expected '|' or ')', got {tok!r}", self.line)
        self.expect("{")
        rows = {}
        while self.peek() != "}":
            line = self.line
            tok = self.next()
            if tok == "table":
                rows[()] = (self.numbers(), line)
            elif tok == "(":
                config = tuple(self.name_list(")"))
                rows[config] = (self.numbers(), line)
            elif tok == "property":
                while self.next() != ";":
                    pass
            else:
                raise BifError(f"unexpected {tok!r} in probability block", line)
        self.expect("}")
        return child, parents, rows


def _assemble(variables, probs) -> BayesianNetwork:
    cpts = []
    for name, var in variables.items():
        if name not in probs:
            raise BifError(f"no probability block for {name!r}")
        parent_names, rows, line = probs[name]
        try:
            parents = tuple(variables[p] for p in parent_names)
        except KeyError as e:
            raise BifError(f"unknown parent {e.args[0]!r}", line) from None
        shape = tuple(p.cardinality for p in parents) + (var.cardinality,)
        table = np.full(shape, np.nan)
        for config, (vals, row_line) in rows.items():
            if config == () and parents:
                raise BifError(f"'table' for {name!r} with parents is not supported", row_line)
            if len(vals) != var.cardinality:
                raise BifError(f"expected {var.cardinality} values for {name!r}", row_line)
            if abs(sum(vals) - 1.0) > ROW_TOLERANCE:
                raise BifError(f"probabilities for {name!r} sum to {sum(vals)}", row_line)
            try:
                idx = tuple(p.index(s) for p, s in zip(parents, config, strict=True))
            except (KeyError, ValueError):
                raise BifError(f"bad parent configuration {config} for {name!r}", row_line) from None
            table[idx] = vals
        if np.isnan(table).any():
            raise BifError(f"incomplete table for {name!r}", line)
        # Rows within tolerance are renormalised to the stricter in-memory bound.
        table = table / table.sum(axis=-1, keepdims=True)
        cpts.append(Cpt(var, parents, table))
    for name in probs:
        if name not in variables:
            raise BifError(f"probability block for undeclared variable {name!r}", probs[name][2])
    return BayesianNetwork(cpts)


def parse_bif(text: str) -> BayesianNetwork:
    return _Parser(text).parse()


def load_bif(path) -> BayesianNetwork:
    return parse_bif(Path(path).read_text(encoding="utf-8"))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_bif(net: BayesianNetwork, name: str = "unknown") -> str:
    """Serialise ``net``; parent configurations list the first parent fastest."""
    out = [f"network {name} {{", "}"]
    for v in net.variables:
        out += [
            f"variable {v.name} {{",
            f"  type discrete [ {v.cardinality} ] {{ {', '.join(v.states)} }};",
            "}",
        ]
    for cpt in net.cpts:
        if not cpt.parents:
            out.append(f"probability ( {cpt.child.name} ) {{")
            out.append(f"  table {', '.join(map(_fmt, cpt.table))};")
        else:
            out.append(
                f"probability ( {cpt.child.name} | {', '.join(p.name for p in cpt.parents)} ) {{"
            )
            ranges = [range(p.cardinality) for p in cpt.parents]
            for rev in itertools.product(*reversed(ranges)):
                idx = tuple(reversed(rev))
                labels = ", ".join(p.states[i] for p, i in zip(cpt.parents, idx))
                out.append(f"  ({labels}) {', '.join(map(_fmt, cpt.table[idx]))};")
        out.append("}")
    return "\n".join(out) + "\n"


def save_bif(net: BayesianNetwork, path, name: str = "unknown") -> None:
    Path(path).write_text(write_bif(net, name), encoding="utf-8")


def builtin_asia() -> BayesianNetwork:
    """The eight-node chest-clinic network of Lauritzen and Spiegelhalter (1988)."""
    yn = ("yes", "no")
    asia, tub, smoke, lung, bronc, either, xray, dysp = (
        Variable(n, yn) for n in ("asia", "tub", "smoke", "lung", "bronc", "either", "xray", "dysp")
    )
    return BayesianNetwork([
        Cpt(asia, (), [0.01, 0.99]),
        Cpt(tub, (asia,), [[0.05, 0.95], [0.01, 0.99]]),
        Cpt(smoke, (), [0.5, 0.5]),
        Cpt(lung, (smoke,), [[0.1, 0.9], [0.01, 0.99]]),
        Cpt(bronc, (smoke,), [[0.6, 0.4], [0.3, 0.7]]),
        # either = lung OR tub
        Cpt(either, (lung, tub), [[[1.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]]]),
        Cpt(xray, (either,), [[0.98, 0.02], [0.05, 0.95]]),
        Cpt(dysp, (bronc, either), [[[0.9, 0.1], [0.8, 0.2]], [[0.7, 0.3], [0.1, 0.9]]]),
    ])
