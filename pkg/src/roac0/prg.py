"""Small-bias expanders and the seed-recycling restriction generator.

The base expander powers a binary-field element: a seed splits into field
elements (alpha, beta) of ell bits each, and output bit i is the GF(2) inner
product of the coefficient vectors of alpha^(i+1) and beta.  For any nonzero
character the signed sum collapses to the event that an explicit polynomial
of degree at most n vanishes at alpha, so the bias is at most n/2^ell.

The restriction expander spends one such string at a time.  Each round draws
`a` selection strings and one assignment string; a position still free gets
fixed exactly when all `a` selection bits read 1 (about a 2^-a fraction per
round) and takes its value from the assignment string.  A final block fixes
whatever survives every round, so expansion always covers all n positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import ceil, log2
from typing import Iterator, Sequence

import numpy as np

from .circuit import BiasVector, Circuit, CircuitError, acceptance_probability
from .fourier import (
    BoundReport,
    CapExceeded,
    _report,
    _wht_integers,
    level_profile_recursive,
    total_mass,
    truth_table,
)

EXHAUSTIVE_SEED_CAP = 26  # full seed sweeps stay below 2^26 expansions
_VECTOR_ELL_CAP = 13  # coefficient masks must fit int64 for the numpy paths

# Lexicographically least irreducible polynomial of each degree over GF(2),
# bit i = coefficient of x^i.  Degree 8 is the familiar 0x11b.
IRREDUCIBLE_POLY = {
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11B,
    9: 0x203,
    10: 0x409,
    11: 0x805,
    12: 0x1009,
    13: 0x201B,
    14: 0x4021,
    15: 0x8003,
    16: 0x1002B,
    17: 0x20009,
    18: 0x40009,
    19: 0x80027,
    20: 0x100009,
    21: 0x200005,
    22: 0x400003,
    23: 0x800021,
    24: 0x100001B,
    25: 0x2000009,
    26: 0x400001B,
    27: 0x8000027,
    28: 0x10000003,
    29: 0x20000005,
    30: 0x40000003,
    31: 0x80000009,
    32: 0x10000008D,
    33: 0x20000004B,
    34: 0x40000001B,
    35: 0x800000005,
    36: 0x1000000035,
    37: 0x200000003F,
    38: 0x4000000063,
    39: 0x8000000011,
    40: 0x10000000039,
    41: 0x20000000009,
    42: 0x40000000027,
    43: 0x80000000059,
    44: 0x100000000021,
    45: 0x20000000001B,
    46: 0x400000000003,
    47: 0x800000000021,
    48: 0x100000000002D,
    49: 0x2000000000071,
    50: 0x400000000001D,
    51: 0x800000000004B,
    52: 0x10000000000009,
    53: 0x20000000000047,
    54: 0x4000000000007D,
    55: 0x80000000000047,
    56: 0x100000000000095,
    57: 0x200000000000011,
    58: 0x400000000000063,
    59: 0x80000000000007B,
    60: 0x1000000000000003,
    61: 0x2000000000000027,
    62: 0x4000000000000069,
    63: 0x8000000000000003,
    64: 0x1000000000000001B,
}


def gf_mul(a: int, b: int, ell: int) -> int:
    """Multiply two elements of the degree-ell binary field."""
    if ell not in IRREDUCIBLE_POLY:
        raise CircuitError(f"no field of degree {ell} (table covers 2..64)")
    poly = IRREDUCIBLE_POLY[ell]
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if (a >> ell) & 1:
            a ^= poly
    return r


@lru_cache(maxsize=32)
def _alpha_power_rows(ell: int, n: int) -> np.ndarray:
    """rows[alpha, i] = coefficient mask of alpha^(i+1), as int64."""
    if ell > _VECTOR_ELL_CAP:
        raise CapExceeded(f"vectorized field tables capped at ell={_VECTOR_ELL_CAP}")
    size = 1 << ell
    rows = np.zeros((size, n), dtype=np.int64)
    for alpha in range(size):
        p = alpha
        for i in range(n):
            rows[alpha, i] = p
            p = gf_mul(p, alpha, ell)
    rows.setflags(write=False)
    return rows


@dataclass(frozen=True)
class SmallBiasGen:
    """Field-powering expander: 2*ell seed bits stretch to n output bits.

    The n/2^ell bias guarantee needs n <= 2^ell; beyond that the powers of
    alpha start cycling and correlated output positions appear, so larger n
    is accepted but carries no useful bound.
    """

    ell: int
    n: int

    def __post_init__(self):
        if self.ell not in IRREDUCIBLE_POLY:
            raise CircuitError(f"ell={self.ell} outside field table (2..64)")
        if self.n < 1:
            raise CircuitError(f"output length {self.n} must be positive")

    @property
    def seed_bits(self) -> int:
        return 2 * self.ell

    @property
    def bias_bound(self) -> Fraction:
        return min(Fraction(1), Fraction(self.n, 1 << self.ell))

    def expand(self, seed: int) -> int:
        if not 0 <= seed < (1 << self.seed_bits):
            raise CircuitError(f"seed {seed} outside {self.seed_bits} bits")
        mask = (1 << self.ell) - 1
        alpha = seed & mask
        beta = seed >> self.ell
        out = 0
        p = alpha
        for i in range(self.n):
            out |= ((p & beta).bit_count() & 1) << i
            p = gf_mul(p, alpha, self.ell)
        return out

    def _output_chunks(self, chunk_bits: int = 20) -> Iterator[np.ndarray]:
        # Seed order: alpha in the low ell bits, beta above, so beta is the
        # outer loop.  Batch betas so each batch stays around 2^chunk_bits
        # scalar operations.
        rows = _alpha_power_rows(self.ell, self.n)
        size = 1 << self.ell
        weights = (np.int64(1) << np.arange(self.n, dtype=np.int64))
        batch = max(1, (1 << chunk_bits) // max(1, size * self.n))
        for lo in range(0, size, batch):
            betas = np.arange(lo, min(lo + batch, size), dtype=np.int64)
            bits = np.bitwise_count(rows[None, :, :] & betas[:, None, None]) & 1
            yield (bits.astype(np.int64) * weights).sum(axis=2).reshape(-1)


def smallbias_expand(seed, n: int, ell: int | None = None) -> int:
    """Stretch a 2*ell-bit seed to n bits; returns an int mask (bit i = x_i).

    ``seed`` may be an int (requires ``ell``), a bit sequence, or a '01'
    string; sequences carry their own length, ell = len(seed) // 2.
    """
    if isinstance(seed, int):
        if ell is None:
            raise CircuitError("integer seed needs an explicit ell")
        seed_int = seed
    else:
        bits = [int(b) for b in seed]
        if any(b not in (0, 1) for b in bits):
            raise CircuitError("seed bits must be 0/1")
        if len(bits) % 2:
            raise CircuitError(f"seed length {len(bits)} is odd, expected 2*ell")
        if ell is None:
            ell = len(bits) // 2
        elif 2 * ell != len(bits):
            raise CircuitError(f"seed length {len(bits)} != 2*ell = {2 * ell}")
        seed_int = sum(b << i for i, b in enumerate(bits))
    if n > (1 << ell):
        # past 2^ell the powers of alpha wrap around and positions repeat,
        # so the bias guarantee is void; refuse rather than emit junk
        raise CircuitError(f"n = {n} exceeds 2^ell = {1 << ell}; pick a larger ell")
    return SmallBiasGen(ell, n).expand(seed_int)


@dataclass(frozen=True)
class UniformGen:
    """Identity expander: the seed is the output.  Bias exactly 0."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise CircuitError(f"output length {self.n} must be positive")

    @property
    def seed_bits(self) -> int:
        return self.n

    def expand(self, seed: int) -> int:
        if not 0 <= seed < (1 << self.n):
            raise CircuitError(f"seed {seed} outside {self.n} bits")
        return seed

    def _output_chunks(self, chunk_bits: int = 20) -> Iterator[np.ndarray]:
        total = 1 << self.n
        step = 1 << min(chunk_bits, self.n)
        for lo in range(0, total, step):
            yield np.arange(lo, min(lo + step, total), dtype=np.int64)


def _iter_outputs(gen, chunk_bits: int = 20) -> Iterator[np.ndarray]:
    if hasattr(gen, "_output_chunks"):
        yield from gen._output_chunks(chunk_bits)
        return
    total = 1 << gen.seed_bits
    step = 1 << chunk_bits
    for lo in range(0, total, step):
        hi = min(lo + step, total)
        yield np.fromiter(
            (gen.expand(s) for s in range(lo, hi)), dtype=np.int64, count=hi - lo
        )


@lru_cache(maxsize=6)
def _distribution_cached(gen) -> np.ndarray:
    counts = np.zeros(1 << gen.n, dtype=np.int64)
    for chunk in _iter_outputs(gen):
        counts += np.bincount(chunk, minlength=1 << gen.n)
    counts.setflags(write=False)
    return counts


def output_distribution(gen) -> np.ndarray:
    """Counts of each n-bit output over the full seed space."""
    if gen.seed_bits > EXHAUSTIVE_SEED_CAP:
        raise CapExceeded(
            f"{gen.seed_bits} seed bits exceed exhaustive cap {EXHAUSTIVE_SEED_CAP}"
        )
    if gen.n > 24:
        raise CapExceeded(f"output distribution for n={gen.n} exceeds cap 24")
    return _distribution_cached(gen).copy()


def measure_bias(gen, n: int | None = None) -> Fraction:
    """Exact max over nonzero characters of |E_seed[(-1)^(s.output)]|.

    Runs a full seed sweep (cap 2^26 seeds), accumulates the output
    distribution, and transforms it; everything stays in integers.  With
    n < gen.n only the first n output bits are kept.
    """
    counts = output_distribution(gen)
    if n is not None:
        if not 1 <= n <= gen.n:
            raise CircuitError(f"n={n} outside 1..{gen.n}")
        if n < gen.n:
            folded = counts.reshape(-1, 1 << n).sum(axis=0)
            counts = folded
    spectrum = _wht_integers(counts.astype(np.int64))
    top = int(np.abs(spectrum[1:]).max()) if spectrum.size > 1 else 0
    return Fraction(top, 1 << gen.seed_bits)


def default_rounds(n: int, eps: float, a: int) -> int:
    """Rounds needed so all n positions are fixed before the fallback whp.

    Each round fixes a free position with probability about 2^-a, so
    ceil(2^a * (2*log2(n) + log2(1/eps))) rounds leave any given position
    free with probability below eps/n^2.
    """
    if n < 1 or not 0 < eps < 1 or a < 0:
        raise CircuitError(f"bad parameters n={n} eps={eps} a={a}")
    return max(1, ceil((1 << a) * (2 * log2(max(n, 2)) + log2(1 / eps))))


@dataclass(frozen=True)
class RestrictionPRG:
    """Layout of the round-based restriction expander.

    Per round: ``a`` selection blocks of 2*ell_sel bits and one assignment
    block of 2*ell_asn bits; one final assignment block (degree ell_final,
    defaulting to ell_asn) after the last round.  a = 0 makes every round
    fix all remaining positions at once.
    """

    n: int
    a: int = 1
    rounds: int = 1
    ell_sel: int = 3
    ell_asn: int = 4
    ell_final: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise CircuitError(f"n={self.n} must be positive")
        if self.a < 0 or self.rounds < 1:
            raise CircuitError(f"bad layout a={self.a} rounds={self.rounds}")
        for ell in (self.ell_sel, self.ell_asn, self.final_ell):
            if ell not in IRREDUCIBLE_POLY:
                raise CircuitError(f"ell={ell} outside field table (2..64)")

    @property
    def final_ell(self) -> int:
        return self.ell_asn if self.ell_final is None else self.ell_final

    @property
    def blocks(self) -> tuple:
        """(kind, ell, bit offset) per block, in seed order."""
        out = []
        off = 0
        for _ in range(self.rounds):
            for _ in range(self.a):
                out.append(("sel", self.ell_sel, off))
                off += 2 * self.ell_sel
            out.append(("asn", self.ell_asn, off))
            off += 2 * self.ell_asn
        out.append(("final", self.final_ell, off))
        return tuple(out)

    @property
    def seed_bits(self) -> int:
        return self.rounds * (self.a * 2 * self.ell_sel + 2 * self.ell_asn) + (
            2 * self.final_ell
        )

    @property
    def delta(self) -> Fraction:
        """Design bias bound of the assignment blocks."""
        return min(Fraction(1), Fraction(self.n, 1 << self.ell_asn))

    @classmethod
    def standard(cls, n: int, eps: float, a: int = 1) -> "RestrictionPRG":
        """Pick ell so each block biases below eps, rounds to cover whp."""
        ell = min(64, max(2, ceil(log2(max(n, 2) / eps))))
        return cls(n=n, a=a, rounds=default_rounds(n, eps, a), ell_sel=ell, ell_asn=ell)

    def _split(self, seed: int) -> list:
        vals = []
        for _, ell, off in self.blocks:
            vals.append((seed >> off) & ((1 << (2 * ell)) - 1))
        return vals

    def expand(self, seed: int) -> int:
        if not 0 <= seed < (1 << self.seed_bits):
            raise CircuitError(f"seed {seed} outside {self.seed_bits} bits")
        return self.expand_trace(seed)["output"]

    def expand_trace(self, seed: int) -> dict:
        """Expansion plus per-round bookkeeping (for restriction experiments).

        Returns output, the mask fixed in each round, the assignment string
        of each round, and the fallback mask/string.
        """
        vals = self._split(seed)
        full = (1 << self.n) - 1
        free = full
        out = 0
        idx = 0
        fixed_masks, asn_strings = [], []
        for _ in range(self.rounds):
            sel = full
            for _ in range(self.a):
                sel &= SmallBiasGen(self.ell_sel, self.n).expand(vals[idx])
                idx += 1
            asn = SmallBiasGen(self.ell_asn, self.n).expand(vals[idx])
            idx += 1
            fix = free & sel
            out |= asn & fix
            free &= ~fix
            fixed_masks.append(fix)
            asn_strings.append(asn)
        final = SmallBiasGen(self.final_ell, self.n).expand(vals[idx])
        out |= final & free
        return {
            "output": out,
            "fixed": fixed_masks,
            "values": asn_strings,
            "fallback_mask": free,
            "fallback_values": final,
        }

    def _output_chunks(self, chunk_bits: int = 20) -> Iterator[np.ndarray]:
        tables = [_block_table(ell, self.n) for _, ell, _ in self.blocks]
        total = 1 << self.seed_bits
        step = 1 << min(chunk_bits, self.seed_bits)
        full = np.int64((1 << self.n) - 1)
        for lo in range(0, total, step):
            seeds = np.arange(lo, min(lo + step, total), dtype=np.int64)
            strings = []
            for (kind, ell, off), table in zip(self.blocks, tables):
                idx = (seeds >> off) & ((1 << (2 * ell)) - 1)
                strings.append((kind, table[idx]))
            free = np.full(seeds.shape, full, dtype=np.int64)
            out = np.zeros(seeds.shape, dtype=np.int64)
            sel = np.full(seeds.shape, full, dtype=np.int64)
            for kind, string in strings:
                if kind == "sel":
                    sel &= string
                elif kind == "asn":
                    fix = free & sel
                    out |= string & fix
                    free &= ~fix
                    sel = np.full(seeds.shape, full, dtype=np.int64)
                else:
                    out |= string & free
            yield out


@lru_cache(maxsize=32)
def _block_table(ell: int, n: int) -> np.ndarray:
    """Full expansion table of a single small-bias block (cap 2^20 seeds)."""
    if 2 * ell > 20:
        raise CapExceeded(f"block table for ell={ell} exceeds 2^20 seeds")
    table = np.concatenate(list(SmallBiasGen(ell, n)._output_chunks()))
    table.setflags(write=False)
    return table


def prg_expand(seed, cfg: RestrictionPRG) -> int:
    """Expand a seed through the restriction layout; int mask out.

    ``seed`` may be an int, a bit sequence, or a '01' string whose length
    must equal cfg.seed_bits.
    """
    if isinstance(seed, int):
        return cfg.expand(seed)
    bits = [int(b) for b in seed]
    if len(bits) != cfg.seed_bits:
        raise CircuitError(f"seed length {len(bits)} != layout {cfg.seed_bits}")
    return cfg.expand(sum(b << i for i, b in enumerate(bits)))


def seed_length_account(n: int, eps: float, D: int, c_b: float = 2.0, c_a: float = 2.0) -> dict:
    """Accounting only: compare the generic seed formula with our layout.

    Instantiates the level-k mass envelope a*b^k with b = c_b*(log2 n)^(D-1)
    and a = c_a, width w = D+1, and evaluates b*log(b)*log(n)*log(a*b*w^2*n/eps)
    next to the concrete block layout's total.  Nothing is asserted; the
    constants are reported so the reader can judge the gap.
    """
    if n < 2 or not 0 < eps < 1 or D < 1:
        raise CircuitError(f"bad parameters n={n} eps={eps} D={D}")
    b = max(2.0, c_b * log2(n) ** (D - 1))
    w = D + 1
    formula_bits = (
        b * max(1.0, log2(b)) * log2(n) * log2(c_a * b * w * w * n / eps)
    )
    a_sel = max(1, ceil(log2(b)))
    cfg = RestrictionPRG.standard(n, eps, a=a_sel)
    return {
        "n": n,
        "eps": eps,
        "depth": D,
        "mass_envelope": {"a": c_a, "b": b, "width": w},
        "formula_bits": formula_bits,
        "layout": {
            "a": cfg.a,
            "rounds": cfg.rounds,
            "ell_sel": cfg.ell_sel,
            "ell_asn": cfg.ell_asn,
            "ell_final": cfg.final_ell,
            "seed_bits": cfg.seed_bits,
        },
        "polylog_form_bits": log2(n) ** D * log2(n / eps),
    }


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple:
    """Wilson 95% score interval for a binomial proportion."""
    if trials <= 0:
        raise CircuitError("trials must be positive")
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * (phat * (1 - phat) / trials + z * z / (4 * trials * trials)) ** 0.5
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class FoolingReport:
    """How far a generator's acceptance rate sits from the true one."""

    exact_expectation: object
    generator_expectation: object
    abs_error: object
    seeds_used: int
    mode: str
    ci: tuple | None = None

    def as_dict(self) -> dict:
        return {
            "exact_expectation": float(self.exact_expectation),
            "generator_expectation": float(self.generator_expectation),
            "abs_error": float(self.abs_error),
            "seeds_used": self.seeds_used,
            "mode": self.mode,
            "ci": None if self.ci is None else [self.ci[0], self.ci[1]],
        }


def _sample_seed_ints(rng, bits: int, size: int) -> list:
    nbytes = (bits + 7) // 8
    raw = rng.integers(0, 256, size=(size, nbytes), dtype=np.uint16)
    mask = (1 << bits) - 1
    out = []
    for row in raw:
        v = 0
        for byte in row:
            v = (v << 8) | int(byte)
        out.append(v & mask)
    return out


def fooling_error(
    c: Circuit,
    expander,
    mode: str = "exhaustive",
    trials: int = 10**6,
    master_seed: int = 0,
) -> FoolingReport:
    """|E[F(uniform)] - E[F(expander(seed))]|, exact or Monte-Carlo.

    Exhaustive mode enumerates every seed (cap 24 seed bits) and returns an
    exact rational error.  MC mode samples seeds in blocks with counter-based
    per-block RNG streams and attaches a Wilson 95% interval, so the result
    depends only on (master_seed, trials), not on scheduling.
    """
    if expander.n != c.n:
        raise CircuitError(f"expander emits {expander.n} bits, circuit reads {c.n}")
    exact = acceptance_probability(c, BiasVector.uniform(c.n))
    tt = truth_table(c)
    if mode == "exhaustive":
        if expander.seed_bits > 24:
            raise CapExceeded(
                f"{expander.seed_bits} seed bits exceed the exhaustive cap 24"
            )
        counts = output_distribution(expander)
        seen = 1 << expander.seed_bits
        gen_exp = Fraction(int(counts @ tt.astype(np.int64)), seen)
        return FoolingReport(exact, gen_exp, abs(gen_exp - exact), seen, mode)
    if mode != "mc":
        raise CircuitError(f"unknown mode {mode!r}")
    if trials < 1:
        raise CircuitError("trials must be positive")
    block = 1 << 16
    accepted = 0
    done = 0
    bits = expander.seed_bits
    fast = bits <= 63
    for b in range((trials + block - 1) // block):
        size = min(block, trials - done)
        rng = np.random.default_rng(np.random.SeedSequence([master_seed, b]))
        if fast:
            seeds = rng.integers(0, 1 << bits, size=size, dtype=np.uint64)
            outs = np.fromiter(
                (expander.expand(int(s)) for s in seeds), dtype=np.int64, count=size
            )
        else:
            seeds = _sample_seed_ints(rng, bits, size)
            outs = np.fromiter(
                (expander.expand(s) for s in seeds), dtype=np.int64, count=size
            )
        accepted += int(tt[outs].sum(dtype=np.int64))
        done += size
    mean = accepted / trials
    ci = wilson_interval(accepted, trials)
    return FoolingReport(exact, mean, abs(mean - float(exact)), trials, "mc", ci)


def check_sandwich_fooling(c: Circuit, fplus: Circuit, fminus: Circuit, gen) -> BoundReport:
    """|E_gen[F] - E[F]|  <=  E[F+ - F-]  +  bias * max(L(F+), L(F-)).

    F- <= F <= F+ must hold pointwise (verified exhaustively here); the gap
    delta and both total masses are exact rationals, and the bias is the
    measured one, so pass/fail is an exact comparison.
    """
    for f in (fplus, fminus):
        if f.n != c.n:
            raise CircuitError("sandwich halves must read the same variables")
    tt = truth_table(c)
    tp = truth_table(fplus)
    tm = truth_table(fminus)
    bad = np.nonzero((tm > tt) | (tt > tp))[0]
    if bad.size:
        raise CircuitError(f"not a sandwich: violated at input {int(bad[0])}")
    uniform = BiasVector.uniform(c.n)
    delta = acceptance_probability(fplus, uniform) - acceptance_probability(
        fminus, uniform
    )
    eps = measure_bias(gen)
    masses = [
        total_mass(level_profile_recursive(fplus)),
        total_mass(level_profile_recursive(fminus)),
    ]
    counts = output_distribution(gen)
    gen_exp = Fraction(int(counts @ tt.astype(np.int64)), 1 << gen.seed_bits)
    exact = acceptance_probability(c, uniform)
    lhs = abs(gen_exp - exact)
    rhs = delta + eps * max(masses)
    report = _report(
        float(lhs),
        float(rhs),
        {
            "delta": float(delta),
            "bias": float(eps),
            "mass_upper": float(masses[0]),
            "mass_lower": float(masses[1]),
            "n": c.n,
            "seed_bits": gen.seed_bits,
        },
    )
    # redo the verdict on the exact rationals, floats only for display
    return BoundReport(report.lhs, report.rhs, report.slack, lhs <= rhs, report.params)
