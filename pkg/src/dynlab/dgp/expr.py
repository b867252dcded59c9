"""Expression trees over ``{add, sub, mul}`` with agent-state, observation and constant leaves.

A tree is stored as a tuple of tokens in prefix order. Tokens are
operator names (``"add"``, ``"sub"``, ``"mul"``), :class:`Var` leaves, or
Python floats for constants. Text form is an s-expression with 1-based
variable names, e.g. ``(sub (mul -6.14 z2) (mul 2.07 y1))``.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ParseError

__all__ = [
    "OPS",
    "Var",
    "ExprTree",
    "Individual",
    "eval_tree",
    "serialize_tree",
    "parse_tree",
    "serialize_individual",
    "parse_individual",
    "compile_tree",
    "subtree_end",
]

OPS = ("add", "sub", "mul")
_ALIASES = {"+": "add", "-": "sub", "*": "mul", "×": "mul"}

# opcodes shared with the compiled evaluator
OP_CONST, OP_Z, OP_Y, OP_ADD, OP_SUB, OP_MUL = range(6)
_OPCODE = {"add": OP_ADD, "sub": OP_SUB, "mul": OP_MUL}


@dataclass(frozen=True, order=True)
class Var:
    kind: str  # "z" (agent state) or "y" (observation)
    index: int  # 0-based

    def __str__(self):
        return f"{self.kind}{self.index + 1}"


def is_op(tok):
    return isinstance(tok, str)


def subtree_end(tokens, start):
    """Index one past the subtree rooted at ``tokens[start]``."""
    need = 1
    i = start
    while need:
        if isinstance(tokens[i], str):
            need += 1
        else:
            need -= 1
        i += 1
    return i


def _depth(tokens):
    depth = 0
    stack = []  # remaining child slots of open operators
    for tok in tokens:
        depth = max(depth, len(stack) + 1)
        if isinstance(tok, str):
            stack.append(2)
        else:
            while stack:
                stack[-1] -= 1
                if stack[-1]:
                    break
                stack.pop()
    return depth


class ExprTree:
    """Immutable prefix-encoded expression tree with cached size and depth."""

    __slots__ = ("tokens", "size", "depth", "_compiled")

    def __init__(self, tokens):
        tokens = tuple(float(t) if isinstance(t, (int, float, np.floating)) and not isinstance(t, bool)
                       else t for t in tokens)
        if not tokens or subtree_end_safe(tokens) != len(tokens):
            raise ValueError(f"malformed prefix token sequence: {tokens!r}")
        for t in tokens:
            if isinstance(t, str) and t not in OPS:
                raise ValueError(f"unknown operator {t!r}")
        self.tokens = tokens
        self.size = len(tokens)
        self.depth = _depth(tokens)
        self._compiled = None

    def __eq__(self, other):
        return isinstance(other, ExprTree) and self.tokens == other.tokens

    def __hash__(self):
        return hash(self.tokens)

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"ExprTree({serialize_tree(self)})"

    def __str__(self):
        return serialize_tree(self)

    def variables(self):
        return {t for t in self.tokens if isinstance(t, Var)}

    def max_index(self, kind):
        idx = [t.index for t in self.tokens if isinstance(t, Var) and t.kind == kind]
        return max(idx) if idx else -1


def subtree_end_safe(tokens):
    need = 1
    for i, tok in enumerate(tokens):
        need += 1 if isinstance(tok, str) else -1
        if need == 0:
            return i + 1
    return -1


@dataclass(eq=False)
class Individual:
    """Multitree: one state equation per agent variable plus a readout."""

    state_trees: tuple
    readout_tree: ExprTree
    fitness: float = None
    fitness_key: object = None
    id: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.state_trees = tuple(self.state_trees)

    @property
    def trees(self):
        return self.state_trees + (self.readout_tree,)

    @property
    def n_state(self):
        return len(self.state_trees)

    @property
    def size(self):
        return sum(t.size for t in self.trees)

    def same_genotype(self, other):
        return self.trees == other.trees

    def with_trees(self, trees, id=()):
        trees = tuple(trees)
        return Individual(trees[:-1], trees[-1], id=id)

    def copy(self):
        return Individual(self.state_trees, self.readout_tree, self.fitness, self.fitness_key,
                          self.id, dict(self.meta))

    def __repr__(self):
        return f"Individual(id={self.id}, fitness={self.fitness}, trees={[str(t) for t in self.trees]})"


def eval_tree(tree, z, y):
    """Evaluate ``tree`` at agent state ``z`` and observation ``y``.

    Works elementwise if the entries of ``z`` and ``y`` are arrays. Overflow
    yields inf/nan rather than an exception.
    """
    stack = []
    with np.errstate(all="ignore"):
        for tok in reversed(tree.tokens):
            if isinstance(tok, str):
                a = stack.pop()
                b = stack.pop()
                if tok == "add":
                    stack.append(a + b)
                elif tok == "sub":
                    stack.append(a - b)
                else:
                    stack.append(a * b)
            elif isinstance(tok, Var):
                stack.append(z[tok.index] if tok.kind == "z" else y[tok.index])
            else:
                stack.append(tok)
    return stack[0]


def compile_tree(tree):
    """Reverse-prefix opcode/value arrays consumed by the compiled evaluator."""
    if tree._compiled is None:
        toks = tree.tokens[::-1]
        codes = np.empty(len(toks), dtype=np.int64)
        vals = np.zeros(len(toks))
        for i, tok in enumerate(toks):
            if isinstance(tok, str):
                codes[i] = _OPCODE[tok]
            elif isinstance(tok, Var):
                codes[i] = OP_Z if tok.kind == "z" else OP_Y
                vals[i] = tok.index
            else:
                codes[i] = OP_CONST
                vals[i] = tok
        tree._compiled = (codes, vals)
    return tree._compiled


def _fmt_const(c):
    return repr(float(c))


def serialize_tree(tree):
    out = []
    closers = []  # remaining children per open operator
    for tok in tree.tokens:
        if isinstance(tok, str):
            out.append(f"({tok}")
            closers.append(2)
            continue
        out.append(str(tok) if isinstance(tok, Var) else _fmt_const(tok))
        while closers:
            closers[-1] -= 1
            if closers[-1]:
                break
            closers.pop()
            out[-1] += ")"
    return " ".join(out)


_TOKEN_RE = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")
_VAR_RE = re.compile(r"^([zy])(\d+)$")


def _tokenize(text, line):
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                return
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos + 1)
        col = m.start(m.lastindex) + 1
        yield m.group(m.lastindex), col
        pos = m.end()


def parse_tree(text, line=1):
    """Parse one s-expression into an :class:`ExprTree`.

    Raises
    ------
    ParseError
        On unbalanced parentheses, unknown symbols or wrong operator arity.
    """
    toks = list(_tokenize(text, line))
    if not toks:
        raise ParseError("empty expression", line, 1)
    out = []

    def parse(i):
        tok, col = toks[i]
        if tok == "(":
            if i + 1 >= len(toks):
                raise ParseError("unexpected end of input after '('", line, col)
            name, ncol = toks[i + 1]
            op = _ALIASES.get(name, name)
            if op not in OPS:
                raise ParseError(f"unknown operator {name!r}", line, ncol)
            out.append(op)
            j = i + 2
            n_args = 0
            while True:
                if j >= len(toks):
                    raise ParseError("missing ')'", line, col)
                if toks[j][0] == ")":
                    break
                j = parse(j)
                n_args += 1
            if n_args != 2:
                raise ParseError(f"operator {op!r} takes 2 arguments, got {n_args}", line, col)
            return j + 1
        if tok == ")":
            raise ParseError("unexpected ')'", line, col)
        m = _VAR_RE.match(tok)
        if m:
            idx = int(m.group(2))
            if idx < 1:
                raise ParseError(f"variable indices start at 1: {tok!r}", line, col)
            out.append(Var(m.group(1), idx - 1))
            return i + 1
        try:
            value = float(tok)
        except ValueError:
            raise ParseError(f"unknown symbol {tok!r}", line, col) from None
        out.append(value)
        return i + 1

    end = parse(0)
    if end != len(toks):
        raise ParseError("trailing input after expression", line, toks[end][1])
    return ExprTree(out)


def serialize_individual(ind):
    """One s-expression per line: state equations in order, then the readout."""
    return "\n".join(serialize_tree(t) for t in ind.trees) + "\n"


def parse_individual(text, n_state=None):
    """Inverse of :func:`serialize_individual`. Blank lines and ``#`` comments are skipped."""
    trees = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if body.strip():
            trees.append(parse_tree(body, lineno))
    if len(trees) < 2:
        raise ParseError("an individual needs at least one state equation and a readout",
                         max(1, len(text.splitlines())), 1)
    if n_state is not None and len(trees) != n_state + 1:
        raise ParseError(f"expected {n_state + 1} trees, found {len(trees)}", 1, 1)
    return Individual(tuple(trees[:-1]), trees[-1])
