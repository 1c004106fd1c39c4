"""Circuit AST: parsing, evaluation, restriction, simplification, generators."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_corpus
from roac0 import (
    And,
    BiasVector,
    Circuit,
    Const,
    Leaf,
    Nand,
    Not,
    Or,
    ParseError,
    ReadOnceViolation,
    RestrictionMask,
    acceptance_probability,
    evaluate,
    gen_random_read_once,
    gen_recursive_tribes,
    gen_tribes,
    parse,
    push_nots_to_leaves,
    render,
    restrict,
    simplify,
    to_nand_form,
)
from roac0.fourier import truth_table


# -- parsing ------------------------------------------------------------------


def test_parse_and_of_two_leaves():
    c = parse("(and x0 x1)")
    assert isinstance(c.root, And)
    assert c.n == 2
    assert c.size == 2


def test_parse_nested_structure():
    c = parse("(or (and x0 x1) (not x2))")
    assert c.n == 3
    assert c.depth == 2
    assert isinstance(c.root, Or)


def test_parse_rejects_duplicate_variable():
    with pytest.raises(ReadOnceViolation):
        parse("(and x0 x0)")


def test_parse_error_carries_position():
    with pytest.raises(ParseError):
        parse("(and x0")
    with pytest.raises(ParseError):
        parse("(bogus x0)")
    with pytest.raises(ParseError):
        parse("")


def test_parse_constants_and_whitespace():
    assert evaluate(parse("(or 0  1)"), 0) == 1
    assert evaluate(parse(" ( and  x0   1 ) "), 1) == 1


def test_render_round_trip_on_corpus():
    for c in random_corpus(30, 10, 3, seed=11):
        assert parse(render(c)).root == c.root


# -- evaluation ---------------------------------------------------------------


def test_evaluate_and_gate():
    c = parse("(and x0 x1)")
    assert evaluate(c, "11") == 1
    assert evaluate(c, "10") == 0
    assert evaluate(c, [0, 1]) == 0
    assert evaluate(c, 3) == 1  # integer mask, little-endian


def test_evaluate_tribes_instance():
    c = gen_tribes(2, 2)
    assert evaluate(c, "0011") == 1
    assert evaluate(c, "1100") == 1
    assert evaluate(c, "0110") == 0


def test_evaluate_rejects_wrong_length():
    with pytest.raises(Exception):
        evaluate(parse("(and x0 x1)"), "101")


# -- restriction --------------------------------------------------------------


def test_restrict_fixes_masked_positions():
    c = parse("(and x0 x1)")
    m = RestrictionMask.from_bits([1, 0], [0, 1])
    r = restrict(c, m)
    # x1 replaced by the constant 1, x0 still free
    assert evaluate(r, "01") == 0
    assert evaluate(r, "11") == 1
    s = simplify(r)
    assert isinstance(s.root, Leaf)


def test_restrict_all_free_is_identity():
    c = gen_tribes(2, 2)
    m = RestrictionMask.from_bits([1] * 4, [0] * 4)
    assert restrict(c, m).root == c.root


def test_restrict_nothing_free_becomes_constant():
    c = gen_tribes(2, 2)
    for x in range(16):
        bits = [(x >> i) & 1 for i in range(4)]
        m = RestrictionMask.from_bits([0] * 4, bits)
        s = simplify(restrict(c, m))
        assert isinstance(s.root, Const)
        assert s.root.value == evaluate(c, x)


def test_simplify_collapses_iff_function_constant():
    # brute-force cross-check of the constant test on restricted circuits
    import random as _random

    rng = _random.Random(5)
    for c in random_corpus(15, 9, 3, seed=21):
        tt = truth_table(c)
        for _ in range(20):
            t = [rng.randint(0, 1) for _ in range(c.n)]
            x = [rng.randint(0, 1) for _ in range(c.n)]
            s = simplify(restrict(c, RestrictionMask.from_bits(t, x)))
            free = [i for i in range(c.n) if t[i]]
            base = sum(x[i] << i for i in range(c.n) if not t[i])
            values = {
                int(tt[base | sum(((a >> k) & 1) << free[k] for k in range(len(free)))])
                for a in range(1 << len(free))
            }
            assert isinstance(s.root, Const) == (len(values) == 1)


# -- simplification -----------------------------------------------------------


def test_simplify_drops_neutral_constants():
    assert simplify(parse("(and 1 x3)")).root == Leaf(3)


def test_simplify_absorbing_element():
    assert simplify(parse("(or 1 x0 x1)")).root == Const(1)


def test_simplify_recurses():
    assert simplify(parse("(and (or 0 x1) x2)")).root == And((Leaf(1), Leaf(2)))


def test_simplify_preserves_function():
    for c in random_corpus(20, 8, 3, seed=31):
        assert (truth_table(simplify(c)) == truth_table(c)).all()


# -- negation normal forms ----------------------------------------------------


def test_push_nots_de_morgan():
    c = push_nots_to_leaves(parse("(not (and x0 x1))"))
    assert c.root == Or((Leaf(0, True), Leaf(1, True)))


def test_push_nots_idempotent():
    c = push_nots_to_leaves(parse("(not (or (and x0 x1) x2))"))
    assert c.root == And((Or((Leaf(0, True), Leaf(1, True))), Leaf(2, True)))
    assert push_nots_to_leaves(c).root == c.root


def test_push_nots_preserves_function_and_depth():
    for c in random_corpus(20, 10, 3, seed=41):
        wrapped = Circuit(Not(c.root), c.n)
        normal = push_nots_to_leaves(wrapped)
        assert (truth_table(normal) == 1 - truth_table(c)).all()
        assert normal.depth <= wrapped.depth


def test_to_nand_form_small_gates():
    for text in ("(and x0 x1)", "(or x0 x1)", "1", "(not x0)"):
        c = parse(text)
        nand, info = to_nand_form(c)
        assert (truth_table(nand) == truth_table(c)).all()
        assert info["depth_after"] <= 2 * max(info["depth_before"], 1)
        for node in _gates(nand.root):
            assert isinstance(node, (Nand, Leaf, Const))


def _gates(node):
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(getattr(cur, "children", ()) or ())


def test_to_nand_form_preserves_function_on_corpus():
    for c in random_corpus(20, 12, 3, seed=51):
        nand, _ = to_nand_form(c)
        assert (truth_table(nand) == truth_table(c)).all()


# -- exact acceptance ---------------------------------------------------------


def test_acceptance_and_two():
    c = parse("(and x0 x1)")
    assert acceptance_probability(c, BiasVector.uniform(2)) == Fraction(1, 4)


def test_acceptance_tribes_formula():
    for m, w in [(2, 2), (3, 2), (2, 4)]:
        c = gen_tribes(m, w)
        got = acceptance_probability(c, BiasVector.uniform(c.n))
        assert got == 1 - (1 - Fraction(1, 2**w)) ** m


def test_acceptance_degenerate_bias_evaluates():
    c = gen_tribes(2, 2)
    for x in range(16):
        bits = [(x >> i) & 1 for i in range(4)]
        q = BiasVector(tuple(Fraction(b) for b in bits))
        assert acceptance_probability(c, q) == evaluate(c, x)


def test_acceptance_matches_truth_table_average():
    for c in random_corpus(15, 10, 3, seed=61):
        got = acceptance_probability(c, BiasVector.uniform(c.n))
        assert got == Fraction(int(truth_table(c).sum()), 1 << c.n)


# -- generators ---------------------------------------------------------------


def test_tribes_shape():
    c = gen_tribes(2, 2)
    assert render(c) == "(or (and x0 x1) (and x2 x3))"
    assert c.depth == 2


def test_recursive_tribes_depth_one_is_and():
    c = gen_recursive_tribes(1, [5])
    assert isinstance(c.root, And)
    assert c.n == 5


def test_recursive_tribes_matches_tribes():
    a = gen_recursive_tribes(2, [3, 2])
    b = gen_tribes(3, 2)
    assert a.root == b.root


def test_random_generator_deterministic():
    a = gen_random_read_once(12, 3, seed=7)
    b = gen_random_read_once(12, 3, seed=7)
    assert a.root == b.root
    assert a.root != gen_random_read_once(12, 3, seed=8).root


def test_random_generator_respects_bounds():
    for c in random_corpus(40, 14, 4, seed=71):
        c.check_read_once()
        assert c.depth >= 1
        assert c.n <= 14


@given(st.integers(2, 12), st.integers(1, 4), st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_generated_circuits_round_trip(n, d, seed):
    c = gen_random_read_once(n, d, seed=seed)
    assert parse(render(c)).root == c.root
    assert c.is_read_once()
