"""Ordered branching programs and the read-once circuit conversion.

A width-w, length-n program is a sequence of n layers; layer t reads one
variable and applies one of two total maps on states [w] = {1..w}.  State 1
is both the start and the accept state.  Layer t of edges connects vertex
layer t-1 to vertex layer t.

The conversion from a depth-D read-once circuit produces width <= D+1: an
AND concatenates its children's programs, chains accept (state 1) to start,
and reroutes every other final-layer edge of each child block into a shared
absorbing reject state (the highest index).  An OR builds the AND of the
negated children and then transposes accept and reject on the last layer,
which costs the absorbing property but not correctness.  Children whose
reject is already absorbing donate it to the parent instead of forcing a
fresh state, which is what keeps AND towers at width 2.

Construction metadata (child block boundaries, child programs' functions)
stays attached to the program so that any state-to-state slice indicator
can be rebuilt as a read-once circuit of depth <= D.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .circuit import (
    And,
    Circuit,
    CircuitError,
    Const,
    Leaf,
    Nand,
    Not,
    Or,
    RestrictionMask,
    simplify,
)


class BPError(CircuitError):
    pass


StateMap = tuple[int, ...]  # entry u-1 holds the successor of state u
Layer = tuple[StateMap, StateMap]  # (map for bit 0, map for bit 1)


# -- construction metadata ---------------------------------------------------


@dataclass(frozen=True)
class LeafBlock:
    """Single-layer program for a literal: state 1 survives iff bit == sat."""

    var: int
    sat: int


@dataclass(frozen=True)
class ConstBlock:
    value: int


@dataclass(frozen=True)
class ChildSlot:
    start: int  # first edge layer of this child's block, 1-indexed in parent
    end: int
    meta: Union["GateBlock", LeafBlock]
    width: int
    absorbing: bool
    circuit: Circuit  # the Boolean function this child block computes from 1 to 1


@dataclass(frozen=True)
class GateBlock:
    """An AND-concatenation of child blocks, optionally accept/reject-swapped."""

    width: int
    swap: bool
    slots: tuple[ChildSlot, ...]


Meta = Union[GateBlock, LeafBlock, ConstBlock, None]


@dataclass(frozen=True)
class OrderedBP:
    width: int
    var_order: tuple[int, ...]
    layers: tuple[Layer, ...]
    meta: Meta = field(default=None, compare=False)

    def __post_init__(self):
        if self.width < 1:
            raise BPError("width must be positive")
        if len(self.var_order) != len(self.layers):
            raise BPError("one variable per layer required")
        if len(set(self.var_order)) != len(self.var_order):
            raise BPError("ordered programs read each variable at most once")
        for t, (m0, m1) in enumerate(self.layers):
            for m in (m0, m1):
                if len(m) != self.width or any(not 1 <= v <= self.width for v in m):
                    raise BPError(f"layer {t + 1} transition not a map into [w]")

    @property
    def length(self) -> int:
        return len(self.layers)


# -- evaluation and closure operations ---------------------------------------


def _input_mask(x, var_order) -> int:
    if isinstance(x, int):
        return x
    if isinstance(x, str):
        bits = [int(b) for b in x]
    else:
        bits = list(x)
    if var_order and len(bits) <= max(var_order):
        raise BPError(f"input of length {len(bits)} does not cover {max(var_order)}")
    return sum(b << i for i, b in enumerate(bits))


def bp_evaluate(b: OrderedBP, x, start: int = 1) -> int:
    """Final state after running all layers from ``start``."""
    if not 1 <= start <= b.width:
        raise BPError(f"start state {start} outside [1,{b.width}]")
    mask = _input_mask(x, b.var_order)
    state = start
    for v, (m0, m1) in zip(b.var_order, b.layers):
        state = (m1 if (mask >> v) & 1 else m0)[state - 1]
    return state


def bp_accepts(b: OrderedBP, x) -> int:
    return 1 if bp_evaluate(b, x, 1) == 1 else 0


def bp_concat(b1: OrderedBP, b2: OrderedBP) -> OrderedBP:
    if b1.width != b2.width:
        raise BPError(f"width mismatch {b1.width} != {b2.width}")
    if set(b1.var_order) & set(b2.var_order):
        raise BPError("concatenated programs must read disjoint variables")
    return OrderedBP(b1.width, b1.var_order + b2.var_order, b1.layers + b2.layers)


def bp_subprogram(b: OrderedBP, i: int, j: int) -> OrderedBP:
    """Edge layers i..j inclusive, 1-indexed."""
    if not 1 <= i <= j <= b.length:
        raise BPError(f"invalid layer span [{i},{j}] for length {b.length}")
    return OrderedBP(b.width, b.var_order[i - 1 : j], b.layers[i - 1 : j])


def bp_restrict(b: OrderedBP, m: RestrictionMask) -> OrderedBP:
    """Layers reading fixed variables apply the fixed bit's map for any input."""
    layers = []
    for v, (m0, m1) in zip(b.var_order, b.layers):
        if v < m.n and not m.is_free(v):
            fixed = (m1 if m.fixed_value(v) else m0)
            layers.append((fixed, fixed))
        else:
            layers.append((m0, m1))
    return OrderedBP(b.width, b.var_order, tuple(layers))


def bp_permute(b: OrderedBP, pi: Sequence[int], side: str) -> OrderedBP:
    """Relabel the start side (pre: (pi B)[x](u) = B[x](pi(u))) or accept side."""
    if sorted(pi) != list(range(1, b.width + 1)):
        raise BPError("pi must be a permutation of [w]")
    if b.length == 0:
        raise BPError("cannot permute a length-0 program")
    layers = list(b.layers)
    if side == "pre":
        m0, m1 = layers[0]
        layers[0] = (
            tuple(m0[pi[u - 1] - 1] for u in range(1, b.width + 1)),
            tuple(m1[pi[u - 1] - 1] for u in range(1, b.width + 1)),
        )
    elif side == "post":
        m0, m1 = layers[-1]
        layers[-1] = (tuple(pi[t - 1] for t in m0), tuple(pi[t - 1] for t in m1))
    else:
        raise BPError(f"side must be 'pre' or 'post', got {side!r}")
    return OrderedBP(b.width, b.var_order, tuple(layers))


# -- serialization ------------------------------------------------------------


def bp_to_json_dict(b: OrderedBP) -> dict:
    return {
        "width": b.width,
        "length": b.length,
        "var_order": list(b.var_order),
        "layers": [[list(m0), list(m1)] for m0, m1 in b.layers],
    }


def bp_from_json_dict(d: dict) -> OrderedBP:
    layers = tuple((tuple(m0), tuple(m1)) for m0, m1 in d["layers"])
    b = OrderedBP(d["width"], tuple(d["var_order"]), layers)
    if b.length != d.get("length", b.length):
        raise BPError("length field disagrees with layer count")
    return b


# -- circuit -> program conversion --------------------------------------------


def bp_from_circuit(c: Circuit) -> OrderedBP:
    """Ordered program of width <= depth+1 computing the same function.

    Constants are propagated first, so Const nodes can only appear at the
    root.  Const(1) maps to the empty width-1 program; Const(0) needs one
    absorbing width-2 layer (a length-0 program cannot reject).
    """
    c.check_read_once()
    sc = simplify(c)
    if isinstance(sc.root, Const):
        if sc.root.value == 1:
            return OrderedBP(1, (), (), meta=ConstBlock(1))
        return OrderedBP(2, (0,), (((2, 2), (2, 2)),), meta=ConstBlock(0))
    width, var_order, layers, meta, _ = _build(sc.root, False, c.n)
    return OrderedBP(width, tuple(var_order), tuple(layers), meta=meta)


def _build(node, neg: bool, n: int):
    """Returns (width, var_order, layers, meta, absorbing) for node xor neg."""
    if isinstance(node, Leaf):
        sat = 1 ^ int(node.negated) ^ int(neg)
        maps = []
        for bit in (0, 1):
            maps.append(((1 if bit == sat else 2), 2))
        return 2, [node.var], [tuple(maps)], LeafBlock(node.var, sat), True
    if isinstance(node, Not):
        return _build(node.child, not neg, n)
    if isinstance(node, And):
        pairs = [(ch, False) for ch in node.children]
        return _and_construction(pairs, n, swap=neg)
    if isinstance(node, Or):
        # OR(cs) = NOT(AND(NOT cs)); negation toggles the final swap
        pairs = [(ch, True) for ch in node.children]
        return _and_construction(pairs, n, swap=not neg)
    if isinstance(node, Nand):
        pairs = [(ch, False) for ch in node.children]
        return _and_construction(pairs, n, swap=not neg)
    raise BPError(f"constant below the root; simplify first: {node}")


def _and_construction(pairs, n: int, swap: bool):
    built = [(_build(ch, cneg, n), ch, cneg) for ch, cneg in pairs]
    width = max(2, max(w if ab else w + 1 for (w, _, _, _, ab), _, _ in built))

    var_order: list[int] = []
    layers: list[Layer] = []
    slots: list[ChildSlot] = []
    for (w, vo, ly, meta, absorbing), ch, cneg in built:
        # child state u sits at parent label emb[u]; an absorbing child's
        # reject (its own top state) is shared with the parent's
        embed = list(range(w + 1))  # embed[0] unused
        if absorbing:
            embed[w] = width
        start = len(layers) + 1
        for t, (m0, m1) in enumerate(ly):
            last = t == len(ly) - 1
            parent_maps = []
            for child_map in (m0, m1):
                pm = []
                for u in range(1, width + 1):
                    try:
                        cu = embed.index(u)
                    except ValueError:
                        cu = 0
                    target = embed[child_map[cu - 1]] if cu else width
                    if last and target != 1:
                        target = width
                    pm.append(target)
                parent_maps.append(tuple(pm))
            layers.append(tuple(parent_maps))
        var_order.extend(vo)
        child_fn = Circuit(Not(ch) if cneg else ch, n)
        slots.append(
            ChildSlot(start, len(layers), meta, w, absorbing, child_fn)
        )

    if swap:
        sigma = list(range(1, width + 1))
        sigma[0], sigma[width - 1] = width, 1
        m0, m1 = layers[-1]
        layers[-1] = (
            tuple(sigma[t - 1] for t in m0),
            tuple(sigma[t - 1] for t in m1),
        )
    return width, var_order, layers, GateBlock(width, swap, tuple(slots)), not swap


# -- slice witnesses -----------------------------------------------------------


@dataclass(frozen=True)
class BPSliceQuery:
    i: int
    j: int
    d1: int
    d2: int


def bp_slice_witness(b: OrderedBP, q: BPSliceQuery) -> Circuit:
    """Read-once circuit computing I[running layers i..j from d1 ends at d2].

    Requires a program built by bp_from_circuit (construction metadata).
    The returned circuit is over the same global variable space and has
    gate depth at most the original circuit's.
    """
    if b.meta is None:
        raise BPError("program carries no construction metadata")
    if not 1 <= q.i <= q.j <= b.length:
        raise BPError(f"invalid span [{q.i},{q.j}] for length {b.length}")
    if not (1 <= q.d1 <= b.width and 1 <= q.d2 <= b.width):
        raise BPError("states out of range")
    n = _meta_space(b)
    node = _witness(b.meta, q.i, q.j, q.d1, q.d2)
    return simplify(Circuit(node, n))


def _meta_space(b: OrderedBP) -> int:
    return max(b.var_order, default=0) + 1


def _const(truth: bool):
    return Const(1 if truth else 0)


def _witness(meta: Meta, i: int, j: int, d1: int, d2: int):
    """Indicator node for the slice of ``meta``'s program, local layers i..j."""
    if isinstance(meta, ConstBlock):
        # width-1 accept program has no layers; width-2 reject program
        # absorbs everything into state 2
        return _const(d2 == (1 if meta.value == 1 else 2))
    if isinstance(meta, LeafBlock):
        if d1 == 2:
            return _const(d2 == 2)
        if d2 == 1:
            return Leaf(meta.var, negated=meta.sat == 0)
        if d2 == 2:
            return Leaf(meta.var, negated=meta.sat == 1)
        return _const(False)

    total_end = meta.slots[-1].end
    w = meta.width
    swapped = meta.swap and j == total_end

    first = next(s for s in meta.slots if s.start <= i <= s.end)
    last = next(s for s in meta.slots if s.start <= j <= s.end)

    # states without a life line: the shared reject, and labels no child
    # block uses; they ride to the end (and get transposed by a final swap)
    dead_end = 1 if swapped else w
    d1_local = _unembed(d1, first, w)
    if d1_local is None:
        return _const(d2 == dead_end)

    if first is last:
        i_local = i - first.start + 1
        j_local = j - first.start + 1
        if j < first.end:
            return _mid_block_target(first, i_local, j_local, d1_local, d2, w)
        # block boundary: outcomes collapse to accept (1) or reject (w)
        alive = _witness(first.meta, i_local, first.end - first.start + 1, d1_local, 1)
        return _boundary_target(alive, d2, w, swapped)

    survive_first = _witness(
        first.meta, i - first.start + 1, first.end - first.start + 1, d1_local, 1
    )
    chain = [survive_first]
    for slot in meta.slots:
        if slot.start > first.end and slot.end < last.start:
            chain.append(slot.circuit.root)

    if j < last.end:
        j_local = j - last.start + 1
        if d2 == w:
            # dead at j: either the chain broke earlier, or the last child
            # walked into its own absorbing reject
            if last.absorbing:
                avoid = Not(_witness(last.meta, 1, j_local, 1, last.width))
                return Not(And(tuple(chain + [avoid])))
            return Not(And(tuple(chain)))
        d2_local = _unembed(d2, last, w)
        if d2_local is None:
            return _const(False)
        reach = _witness(last.meta, 1, j_local, 1, d2_local)
        return And(tuple(chain + [reach]))

    alive = And(tuple(chain + [last.circuit.root]))
    return _boundary_target(alive, d2, w, swapped)


def _unembed(state: int, slot: ChildSlot, parent_width: int):
    """Parent label -> child state, or None for junk/dead labels."""
    if state == parent_width:
        return None  # shared reject: dead even when donated by this child
    if state <= (slot.width - 1 if slot.absorbing else slot.width):
        return state
    return None


def _mid_block_target(slot: ChildSlot, i_local, j_local, d1_local, d2, w):
    if d2 == w:
        if slot.absorbing:
            return _witness(slot.meta, i_local, j_local, d1_local, slot.width)
        return _const(False)
    d2_local = _unembed(d2, slot, w)
    if d2_local is None:
        return _const(False)
    return _witness(slot.meta, i_local, j_local, d1_local, d2_local)


def _boundary_target(alive, d2: int, w: int, swapped: bool):
    accept_label = w if swapped else 1
    reject_label = 1 if swapped else w
    if d2 == accept_label:
        return alive
    if d2 == reject_label:
        return Not(alive)
    return _const(False)


# -- spectral upper bound for the matrix view ---------------------------------


def bp_state_functions(b: OrderedBP) -> dict[tuple[int, int], np.ndarray]:
    """Truth table of I[B[x](u) = v] for every state pair, over read bits.

    Enumeration index bit t is the value of the variable read at layer t+1.
    """
    length = b.length
    if length > 22:
        raise BPError(f"length {length} exceeds exhaustive cap")
    size = 1 << length
    finals = np.empty((b.width, size), dtype=np.int64)
    for u in range(1, b.width + 1):
        states = np.full(size, u, dtype=np.int64)
        for t, (m0, m1) in enumerate(b.layers):
            block = np.repeat(np.array([0, 1], dtype=np.uint8), 1 << t)
            bits = np.tile(block, 1 << (length - 1 - t))
            a0 = np.asarray(m0, dtype=np.int64)
            a1 = np.asarray(m1, dtype=np.int64)
            states = np.where(bits, a1[states - 1], a0[states - 1])
        finals[u - 1] = states
    return {
        (u, v): (finals[u - 1] == v).astype(np.uint8)
        for u in range(1, b.width + 1)
        for v in range(1, b.width + 1)
    }


def bp_matrix_levelmass_upper(b: OrderedBP, k: int):
    """w * max over state pairs of L^k of the pair's path indicator.

    This is the scalar bound obtained from the matrix view by bounding the
    operator norm entrywise.
    """
    from .fourier import _wht_integers, popcounts

    if k < 0:
        raise BPError("level must be nonnegative")
    if k > b.length:
        from fractions import Fraction

        return Fraction(0)
    from fractions import Fraction

    counts = popcounts(b.length)
    best = 0
    for table in bp_state_functions(b).values():
        w_ints = _wht_integers(table)
        mass = int(np.abs(w_ints)[counts == k].sum())
        best = max(best, mass)
    return b.width * Fraction(best, 1 << b.length)
