"""Backend-agnostic homomorphic circuits over an :class:`~pdte.he.Evaluator`.

Bit vectors are plain lists of handles, least significant bit first.
"""
from __future__ import annotations

from typing import Sequence

from .he import CtHandle, Evaluator

BitVector = list  # list[CtHandle], LSB first


def bitlen(n: int) -> int:
    """``|n|``: number of bits of ``n`` (``bitlen(0) == 0``)."""
    return int(n).bit_length()


def to_bits(value: int, width: int) -> list[int]:
    return [(value >> i) & 1 for i in range(width)]


def from_bits(bits: Sequence[int]) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


def const_bits(ev: Evaluator, value: int, width: int) -> BitVector:
    return [ev.const(b) for b in to_bits(value, width)]


def eval_mul(ev: Evaluator, arr: Sequence[CtHandle], lo: int = 1, hi: int | None = None) -> CtHandle:
    """Product of ``arr[lo..hi]`` (1-based, inclusive) with logarithmic depth.

    The left part always holds ``2**(|n-1|-1)`` elements, so the depth is
    ``|n| - 1`` when ``n`` is a power of two and ``|n|`` otherwise.
    """
    if hi is None:
        hi = len(arr)
    if not 1 <= lo <= hi <= len(arr):
        raise ValueError(f"empty or invalid range [{lo}, {hi}] over {len(arr)} elements")
    if lo == hi:
        return arr[lo - 1]
    n = hi - lo + 1
    mid = 2 ** (bitlen(n - 1) - 1) + lo - 1
    return ev.mul(eval_mul(ev, arr, lo, mid), eval_mul(ev, arr, mid + 1, hi))


def _cmp_tree(ev: Evaluator, xs: BitVector, ys: BitVector, lo: int, hi: int):
    """(gt, eq) over bits ``lo .. hi-1`` (LSB-first indices)."""
    n = hi - lo
    if n == 1:
        x, y = xs[lo], ys[lo]
        gt = ev.mul(x, ev.add(y, 1))
        eq = ev.add(ev.add(x, y), 1)
        return gt, eq
    # the high part takes the power-of-two share, as in eval_mul
    split = hi - 2 ** (bitlen(n - 1) - 1)
    gt_hi, eq_hi = _cmp_tree(ev, xs, ys, split, hi)
    gt_lo, eq_lo = _cmp_tree(ev, xs, ys, lo, split)
    gt = ev.add(gt_hi, ev.mul(eq_hi, gt_lo))
    eq = ev.mul(eq_hi, eq_lo)
    return gt, eq


def she_cmp(ev: Evaluator, xb: BitVector, yb: BitVector) -> tuple[CtHandle, CtHandle]:
    """Return encryptions of ``[x > y]`` and ``[y > x]`` (binary contexts).

    Depth is at most ``|mu - 1| + 1`` for ``mu``-bit inputs.
    """
    if len(xb) != len(yb) or not xb:
        raise ValueError(f"bit lengths differ or are empty: {len(xb)} vs {len(yb)}")
    ev.counter.bump("cmp")
    gt, eq = _cmp_tree(ev, xb, yb, 0, len(xb))
    # exactly one of gt, lt, eq is set
    lt = ev.add(ev.add(gt, eq), 1)
    return gt, lt


def she_equal(ev: Evaluator, xb: BitVector, yb: BitVector) -> CtHandle:
    gt, lt = she_cmp(ev, xb, yb)
    return ev.add(ev.add(gt, lt), 1)


def she_geq(ev: Evaluator, xb: BitVector, yb: BitVector) -> CtHandle:
    """``[x >= y]`` as ``1 xor [y > x]``."""
    _, lt = she_cmp(ev, xb, yb)
    return ev.add(lt, 1)


def she_fadder(ev: Evaluator, bits: Sequence[CtHandle]) -> BitVector:
    """Population count of ``bits`` as a ``|n|``-bit vector (carry-save tree).

    Columns of equal weight are compressed with full adders (three bits in,
    sum and carry out) and half adders until every column holds one bit.
    """
    n = len(bits)
    if n == 0:
        raise ValueError("she_fadder needs at least one bit")
    width = bitlen(n)
    cols: list[list[CtHandle]] = [list(bits)] + [[] for _ in range(width)]
    while any(len(c) > 1 for c in cols[:width]):
        nxt: list[list[CtHandle]] = [[] for _ in range(width + 1)]
        for w in range(width):
            col = cols[w]
            i = 0
            while len(col) - i >= 3:
                a, b, c = col[i : i + 3]
                nxt[w].append(ev.add(ev.add(a, b), c))
                # majority(a, b, c) with a single product
                nxt[w + 1].append(ev.add(ev.mul(ev.add(a, c), ev.add(b, c)), c))
                i += 3
            if len(col) - i == 2:
                a, b = col[i : i + 2]
                nxt[w].append(ev.add(a, b))
                nxt[w + 1].append(ev.mul(a, b))
            elif len(col) - i == 1:
                nxt[w].append(col[i])
        # weight ``width`` and above cannot be reached: the sum is below 2**width
        cols = nxt
    return [c[0] if c else ev.const(0) for c in cols[:width]]
