"""Read-once AND/OR/NOT formulas: AST, DSL, restriction, and exact expectations.

Circuits are immutable trees.  Gate depth counts AND/OR/NAND nodes only;
NOT gates and leaves are free.  Every variable index may feed at most one
leaf (read-once), which is what makes the bottom-up product formulas in
:func:`acceptance_probability` exact.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence, Union


class CircuitError(Exception):
    """Base class for circuit construction and usage errors."""


class ParseError(CircuitError):
    """Raised on malformed DSL input; carries a character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ReadOnceViolation(CircuitError):
    """A variable index appears in more than one leaf."""


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Leaf:
    var: int
    negated: bool = False


@dataclass(frozen=True)
class Const:
    value: int  # 0 or 1


@dataclass(frozen=True)
class Not:
    child: "Node"


@dataclass(frozen=True)
class And:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class Nand:
    children: tuple["Node", ...]


Node = Union[Leaf, Const, Not, And, Or, Nand]

_GATES = (And, Or, Nand)


@dataclass(frozen=True)
class Circuit:
    """A read-once formula together with its input arity ``n``.

    ``n`` is the number of input positions; variable indices used by the
    leaves must lie in ``0..n-1`` but need not be contiguous.
    """

    root: Node
    n: int

    def __post_init__(self):
        if self.n <= 0 and _collect_vars(self.root):
            raise CircuitError("variable count must be positive")
        for v in _collect_vars(self.root):
            if v >= self.n:
                raise CircuitError(f"leaf x{v} out of range for n={self.n}")

    # -- structural queries ------------------------------------------------

    @property
    def depth(self) -> int:
        return node_depth(self.root)

    @property
    def size(self) -> int:
        """Number of leaves."""
        return sum(1 for node in iter_nodes(self.root) if isinstance(node, Leaf))

    def variables(self) -> list[int]:
        """Variable indices in leaf (DFS) order."""
        return [node.var for node in iter_nodes(self.root) if isinstance(node, Leaf)]

    def check_read_once(self) -> None:
        seen: set[int] = set()
        for v in self.variables():
            if v in seen:
                raise ReadOnceViolation(f"variable x{v} appears in more than one leaf")
            seen.add(v)

    def is_read_once(self) -> bool:
        try:
            self.check_read_once()
        except ReadOnceViolation:
            return False
        return True

    def is_monotone(self) -> bool:
        """True when no NOT gates or negated leaves remain (NANDs count as negations)."""
        for node in iter_nodes(self.root):
            if isinstance(node, (Not, Nand)):
                return False
            if isinstance(node, Leaf) and node.negated:
                return False
        return True

    def __str__(self) -> str:
        return render(self)


def iter_nodes(node: Node) -> Iterator[Node]:
    """Pre-order traversal."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, _GATES):
            stack.extend(reversed(cur.children))
        elif isinstance(cur, Not):
            stack.append(cur.child)


def _collect_vars(node: Node) -> list[int]:
    return [nd.var for nd in iter_nodes(node) if isinstance(nd, Leaf)]


def node_depth(node: Node) -> int:
    """Number of AND/OR/NAND gates on the deepest root-to-leaf path."""
    if isinstance(node, (Leaf, Const)):
        return 0
    if isinstance(node, Not):
        return node_depth(node.child)
    return 1 + max((node_depth(c) for c in node.children), default=0)


# ---------------------------------------------------------------------------
# DSL: (and e+) | (or e+) | (nand e+) | (not e) | x<digits> | 0 | 1

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    return tokens


def parse(text: str) -> Circuit:
    """Parse one DSL expression into a :class:`Circuit`.

    Raises :class:`ParseError` on syntax problems (with character position)
    and :class:`ReadOnceViolation` when a variable repeats.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty input", 0)
    node, rest = _parse_expr(tokens, 0)
    if rest != len(tokens):
        raise ParseError("trailing input after expression", tokens[rest][1])
    circuit = Circuit(node, max(_collect_vars(node), default=-1) + 1 or 1)
    circuit.check_read_once()
    return circuit


def _parse_expr(tokens: list[tuple[str, int]], i: int) -> tuple[Node, int]:
    if i >= len(tokens):
        raise ParseError("unexpected end of input", tokens[-1][1] + 1 if tokens else 0)
    tok, pos = tokens[i]
    if tok == "(":
        if i + 1 >= len(tokens):
            raise ParseError("unterminated '('", pos)
        head, head_pos = tokens[i + 1]
        if head not in ("and", "or", "not", "nand"):
            raise ParseError(f"unknown gate {head!r}", head_pos)
        children = []
        j = i + 2
        while j < len(tokens) and tokens[j][0] != ")":
            child, j = _parse_expr(tokens, j)
            children.append(child)
        if j >= len(tokens):
            raise ParseError("missing ')'", pos)
        if not children:
            raise ParseError(f"empty ({head}) gate", pos)
        if head == "not":
            if len(children) != 1:
                raise ParseError("(not ...) takes exactly one argument", pos)
            child = children[0]
            # canonical form: a negated leaf is stored as a leaf flag, so
            # render/parse round-trips node for node
            if isinstance(child, Leaf):
                return Leaf(child.var, not child.negated), j + 1
            return Not(child), j + 1
        ctor = {"and": And, "or": Or, "nand": Nand}[head]
        return ctor(tuple(children)), j + 1
    if tok == "0" or tok == "1":
        return Const(int(tok)), i + 1
    m = re.fullmatch(r"x(\d+)", tok)
    if m is None:
        raise ParseError(f"unexpected token {tok!r}", pos)
    return Leaf(int(m.group(1))), i + 1


def render(c: Circuit) -> str:
    """Canonical single-line DSL text; ``parse(render(c))`` round-trips."""
    return _render_node(c.root)


def _render_node(node: Node) -> str:
    if isinstance(node, Leaf):
        text = f"x{node.var}"
        return f"(not {text})" if node.negated else text
    if isinstance(node, Const):
        return str(node.value)
    if isinstance(node, Not):
        return f"(not {_render_node(node.child)})"
    name = {And: "and", Or: "or", Nand: "nand"}[type(node)]
    return f"({name} {' '.join(_render_node(ch) for ch in node.children)})"


# ---------------------------------------------------------------------------
# Evaluation and restriction


@dataclass(frozen=True)
class RestrictionMask:
    """Which positions stay free (``t`` bit = 1) and the fixed values ``x``.

    Both are length-``n`` bit vectors packed LSB-first into ints: bit ``i``
    corresponds to variable ``x_i``.
    """

    t: int
    x: int
    n: int

    @classmethod
    def from_bits(cls, t_bits: Sequence[int], x_bits: Sequence[int]) -> "RestrictionMask":
        if len(t_bits) != len(x_bits):
            raise CircuitError("t and x must have equal length")
        t = sum(b << i for i, b in enumerate(t_bits))
        x = sum(b << i for i, b in enumerate(x_bits))
        return cls(t, x, len(t_bits))

    @classmethod
    def from_strings(cls, t_str: str, x_str: str) -> "RestrictionMask":
        return cls.from_bits([int(b) for b in t_str], [int(b) for b in x_str])

    def is_free(self, i: int) -> bool:
        return bool((self.t >> i) & 1)

    def fixed_value(self, i: int) -> int:
        return (self.x >> i) & 1


def bits_to_int(bits: Sequence[int]) -> int:
    return sum(b << i for i, b in enumerate(bits))


def evaluate(c: Circuit, x: int | Sequence[int] | str) -> int:
    """Evaluate the circuit on an assignment.

    ``x`` may be an int bitmask (bit ``i`` = variable ``i``), a bit sequence,
    or a '0101' string (position ``k`` = variable ``k``).
    """
    mask = _as_mask(x, c.n)
    return _eval_node(c.root, mask)


def _as_mask(x, n: int) -> int:
    if isinstance(x, int):
        return x
    if isinstance(x, str):
        bits = [int(b) for b in x]
    else:
        bits = list(x)
    if len(bits) != n:
        raise CircuitError(f"assignment length {len(bits)} != n={n}")
    return bits_to_int(bits)


def _eval_node(node: Node, mask: int) -> int:
    if isinstance(node, Leaf):
        bit = (mask >> node.var) & 1
        return bit ^ 1 if node.negated else bit
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Not):
        return 1 - _eval_node(node.child, mask)
    if isinstance(node, And):
        for ch in node.children:
            if _eval_node(ch, mask) == 0:
                return 0
        return 1
    if isinstance(node, Or):
        for ch in node.children:
            if _eval_node(ch, mask) == 1:
                return 1
        return 0
    # Nand
    for ch in node.children:
        if _eval_node(ch, mask) == 0:
            return 1
    return 0


def restrict(c: Circuit, m: RestrictionMask) -> Circuit:
    """Replace every leaf at a non-free position with the fixed constant."""
    if m.n != c.n:
        raise CircuitError(f"mask length {m.n} != n={c.n}")

    def go(node: Node) -> Node:
        if isinstance(node, Leaf):
            if m.is_free(node.var):
                return node
            bit = m.fixed_value(node.var)
            return Const(bit ^ 1 if node.negated else bit)
        if isinstance(node, Const):
            return node
        if isinstance(node, Not):
            return Not(go(node.child))
        return type(node)(tuple(go(ch) for ch in node.children))

    return Circuit(go(c.root), c.n)


# ---------------------------------------------------------------------------
# Normalization


def push_nots_to_leaves(c: Circuit) -> Circuit:
    """De Morgan dualization: NOT gates survive only as leaf negation flags.

    Preserves the computed function and the gate depth.  NAND gates are
    rewritten into NOT-free AND/OR structure as well.
    """

    def go(node: Node, neg: bool) -> Node:
        if isinstance(node, Leaf):
            return Leaf(node.var, node.negated ^ neg)
        if isinstance(node, Const):
            return Const(node.value ^ 1 if neg else node.value)
        if isinstance(node, Not):
            return go(node.child, not neg)
        if isinstance(node, Nand):
            # NAND(cs) == NOT(AND(cs))
            node = And(node.children)
            neg = not neg
        children = tuple(go(ch, neg) for ch in node.children)
        if isinstance(node, And):
            return Or(children) if neg else And(children)
        return And(children) if neg else Or(children)

    return Circuit(go(c.root, False), c.n)


def to_nand_form(c: Circuit) -> tuple[Circuit, dict]:
    """Rewrite into NAND gates plus possibly-negated leaves.

    Returns ``(circuit, info)`` where ``info`` records the gate depth before
    and after (the rewrite at most doubles it).  The function is unchanged.
    """

    def pos(node: Node) -> Node:
        if isinstance(node, Leaf):
            return node
        if isinstance(node, Const):
            return node
        if isinstance(node, Not):
            return neg(node.child)
        if isinstance(node, And):
            return Nand((Nand(tuple(pos(ch) for ch in node.children)),))
        if isinstance(node, Or):
            return Nand(tuple(neg(ch) for ch in node.children))
        return Nand(tuple(pos(ch) for ch in node.children))  # Nand kept

    def neg(node: Node) -> Node:
        if isinstance(node, Leaf):
            return Leaf(node.var, not node.negated)
        if isinstance(node, Const):
            return Const(1 - node.value)
        if isinstance(node, Not):
            return pos(node.child)
        if isinstance(node, And):
            return Nand(tuple(pos(ch) for ch in node.children))
        if isinstance(node, Or):
            # NOT(OR(cs)) == AND(neg cs) == NAND(NAND(neg cs))
            return Nand((Nand(tuple(neg(ch) for ch in node.children)),))
        return Nand((Nand(tuple(pos(ch) for ch in node.children)),))

    result = Circuit(pos(c.root), c.n)
    info = {"depth_before": c.depth, "depth_after": result.depth}
    return result, info


def simplify(c: Circuit) -> Circuit:
    """Full constant propagation.

    For read-once circuits the result is a :class:`Const` node exactly when
    the circuit computes a constant function: every surviving leaf of a
    constant-propagated read-once formula is influential.
    """
    return Circuit(_simplify_node(c.root), c.n)


def _simplify_node(node: Node) -> Node:
    if isinstance(node, (Leaf, Const)):
        return node
    if isinstance(node, Not):
        child = _simplify_node(node.child)
        if isinstance(child, Const):
            return Const(1 - child.value)
        if isinstance(child, Leaf):
            return Leaf(child.var, not child.negated)
        if isinstance(child, Not):
            return child.child
        return Not(child)
    absorbing = 0 if isinstance(node, (And, Nand)) else 1
    kept = []
    for ch in node.children:
        ch = _simplify_node(ch)
        if isinstance(ch, Const):
            if ch.value == absorbing:
                return Const(1 if isinstance(node, Nand) else absorbing)
            continue  # neutral constant drops out
        kept.append(ch)
    if not kept:
        # empty AND -> 1, empty OR -> 0, empty NAND -> 0
        if isinstance(node, And):
            return Const(1)
        if isinstance(node, Or):
            return Const(0)
        return Const(0)
    if len(kept) == 1 and isinstance(node, (And, Or)):
        return kept[0]
    if len(kept) == 1 and isinstance(node, Nand):
        inner = kept[0]
        if isinstance(inner, Leaf):
            return Leaf(inner.var, not inner.negated)
        return Nand((inner,))
    return type(node)(tuple(kept))


def strip_leaf_negations(c: Circuit) -> Circuit:
    """Drop leaf negation flags (requires NOTs already pushed to leaves)."""
    def go(node: Node) -> Node:
        if isinstance(node, Leaf):
            return Leaf(node.var, False)
        if isinstance(node, Const):
            return node
        if isinstance(node, Not):
            raise CircuitError("strip_leaf_negations expects NOTs at leaves")
        return type(node)(tuple(go(ch) for ch in node.children))

    return Circuit(go(c.root), c.n)


# ---------------------------------------------------------------------------
# Product-measure expectations


@dataclass(frozen=True)
class BiasVector:
    """Per-variable probabilities that the input bit equals 1.

    Entries may be :class:`~fractions.Fraction` (exact mode) or floats;
    :func:`acceptance_probability` computes in whichever arithmetic the
    entries carry.
    """

    values: tuple

    @classmethod
    def uniform(cls, n: int) -> "BiasVector":
        return cls((Fraction(1, 2),) * n)

    @classmethod
    def constant(cls, n: int, q) -> "BiasVector":
        return cls((q,) * n)

    @classmethod
    def from_coin_bias(cls, n: int, p) -> "BiasVector":
        """Coin convention E[(-1)^{x_i}] = p, i.e. Pr[x_i = 1] = (1-p)/2."""
        one = Fraction(1) if isinstance(p, (Fraction, int)) else 1.0
        return cls(tuple((one - p) / 2 for _ in range(n)))

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int):
        return self.values[i]


def acceptance_probability(c: Circuit, q: BiasVector):
    """Exact Pr[F = 1] when input bits are independent with Pr[x_i=1] = q_i.

    Valid for read-once circuits, where children of every gate depend on
    disjoint variables.
    """
    if len(q) != c.n:
        raise CircuitError(f"bias vector length {len(q)} != n={c.n}")
    c.check_read_once()
    return _accept_node(c.root, q)


def _accept_node(node: Node, q: BiasVector):
    if isinstance(node, Leaf):
        p = q[node.var]
        return 1 - p if node.negated else p
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Not):
        return 1 - _accept_node(node.child, q)
    if isinstance(node, And):
        prod = 1
        for ch in node.children:
            prod *= _accept_node(ch, q)
        return prod
    if isinstance(node, Or):
        prod = 1
        for ch in node.children:
            prod *= 1 - _accept_node(ch, q)
        return 1 - prod
    prod = 1
    for ch in node.children:
        prod *= _accept_node(ch, q)
    return 1 - prod


# ---------------------------------------------------------------------------
# Generators


def gen_tribes(m: int, w: int) -> Circuit:
    """OR of ``m`` disjoint ANDs of width ``w``; n = m*w, depth 2."""
    if m <= 0 or w <= 0:
        raise CircuitError("tribes parameters must be positive")
    blocks = tuple(
        And(tuple(Leaf(i * w + j) for j in range(w))) for i in range(m)
    )
    return Circuit(Or(blocks), m * w)


def gen_recursive_tribes(depth: int, fanins: Sequence[int]) -> Circuit:
    """Alternating AND/OR tree with the given per-level fan-ins.

    The bottom level is AND and gate types alternate upward, so
    ``gen_recursive_tribes(2, [m, w])`` equals ``gen_tribes(m, w)``.
    """
    if depth <= 0 or len(fanins) != depth:
        raise CircuitError("need one fan-in per level")
    if any(f <= 0 for f in fanins):
        raise CircuitError("fan-ins must be positive")
    counter = 0

    def build(level: int) -> Node:
        nonlocal counter
        if level == depth:
            leaf = Leaf(counter)
            counter += 1
            return leaf
        children = tuple(build(level + 1) for _ in range(fanins[level]))
        # bottom gate level (level == depth-1) is AND; alternate upward
        is_and = (depth - 1 - level) % 2 == 0
        return And(children) if is_and else Or(children)

    root = build(0)
    return Circuit(root, counter)


def gen_random_read_once(
    n: int, depth: int, seed: int, neg_prob: float = 0.25
) -> Circuit:
    """Random read-once circuit: alternating gate levels, random partition.

    Deterministic in ``seed``.  The realized gate depth is exactly
    ``min(depth, n - 1)`` (depth d with fan-in >= 2 everywhere needs d+1
    variables); every gate has fan-in >= 2 whenever the budget allows.
    Leaves are negated independently with probability ``neg_prob``.
    """
    if n <= 0 or depth < 0:
        raise CircuitError("invalid generator parameters")
    rng = random.Random(seed)
    variables = list(range(n))
    rng.shuffle(variables)
    root_is_and = rng.random() < 0.5

    def leaf(v: int) -> Node:
        return Leaf(v, rng.random() < neg_prob)

    def build(vars_: list[int], d: int, is_and: bool) -> Node:
        d = min(d, len(vars_) - 1)
        if d <= 0:
            return leaf(vars_[0])
        if d == 1:
            return (And if is_and else Or)(tuple(leaf(v) for v in vars_))
        # choose fan-in; one child (the spine) gets enough variables to
        # realize depth d-1, every other child gets at least one
        k = rng.randint(2, max(2, min(len(vars_) - d + 1, 5)))
        spine_size = rng.randint(d, len(vars_) - (k - 1))
        rest = vars_[spine_size:]
        cuts = sorted(rng.sample(range(1, len(rest)), k - 2)) if k > 2 else []
        blocks = [vars_[:spine_size]]
        prev = 0
        for cut in cuts + [len(rest)]:
            blocks.append(rest[prev:cut])
            prev = cut
        rng.shuffle(blocks)
        children = tuple(build(b, d - 1, not is_and) for b in blocks)
        return (And if is_and else Or)(children)

    circuit = Circuit(build(variables, depth, root_is_and), n)
    circuit.check_read_once()
    return circuit
