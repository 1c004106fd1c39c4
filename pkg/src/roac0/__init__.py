"""Read-once AC0 toolkit: exact Fourier spectra, level-mass bounds,
branching-program conversion, and pseudorandom restriction experiments."""

from .circuit import (
    And,
    BiasVector,
    Circuit,
    CircuitError,
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

__version__ = "0.1.0"

from . import bp, fourier, prg, shrinkage  # noqa: E402
