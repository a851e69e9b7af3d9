"""Arithmetic instantiation: integer plaintexts and Lin-Tzeng style comparison.

A ``mu``-bit integer ``x`` is sent as two vectors indexed by bit position
``l = 1..mu`` (stored LSB position first):

* the 1-encoding holds ``x >> (l-1)`` where bit ``l`` of ``x`` is 1,
* the 0-encoding holds ``((x >> l) << 1) | 1`` where bit ``l`` of ``x`` is 0,

and random filler elsewhere. The filler lies in ``[2**mu, 2**(mu+1))`` with a
forced low bit (1 in the 1-encoding, 0 in the 0-encoding), which keeps it
away from every proper element at the same position. ``x > y`` exactly when
the 1-encoding of ``x`` and the 0-encoding of ``y`` agree at one position, so
the product of their differences is zero iff ``x > y``.

Ties. A decision goes right on ``x >= y``. Two ways of turning this into the
strict comparisons above are provided:

``"offset"`` (default)
    the right edge tests ``x > y - 1`` and the left edge ``y > x``, both on
    ``mu``-bit encodings. Comparison depth stays ``|mu - 1|``.
``"append"``
    both sides extend their values by one low bit (:func:`distinctify`) so
    no attribute can equal a threshold, then compare strictly on
    ``mu + 1``-bit encodings. Costs one extra level when ``mu`` is a power
    of two.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .circuits import bitlen, eval_mul
from .he import CapacityError, CtHandle, Evaluator, PublicKey, SecretKey, capacity_check, decrypt, encrypt, encrypt_packed
from .tree import TreeModel

TIE_BREAKS = ("offset", "append")


class AmbiguityError(ValueError):
    """No or several decrypted results fall in the label domain."""


@dataclass(frozen=True)
class Encoding01:
    v0: tuple[int, ...]  # 0-encoding, position 1 first
    v1: tuple[int, ...]  # 1-encoding, position 1 first
    mu: int


def encode01(x: int, mu: int, rng: random.Random) -> Encoding01:
    if not 0 <= x < 2**mu:
        raise ValueError(f"{x} does not fit in {mu} bits")
    lo = 2**mu
    v0, v1 = [], []
    for l in range(1, mu + 1):
        if (x >> (l - 1)) & 1:
            v1.append(x >> (l - 1))
            v0.append(rng.randrange(lo, 2 * lo, 2))  # even filler
        else:
            v1.append(rng.randrange(lo + 1, 2 * lo, 2))  # odd filler
            v0.append(((x >> l) << 1) | 1)
    return Encoding01(tuple(v0), tuple(v1), mu)


def distinctify(xs: Sequence[int], ys: Sequence[int]) -> tuple[list[int], list[int]]:
    """Append a low bit, 1 on the client side and 0 on the server side.

    Afterwards ``x' != y'`` for every pair, ``x' > y'`` iff ``x >= y`` and
    ``y' > x'`` iff ``y > x``.
    """
    return [2 * x + 1 for x in xs], [2 * y for y in ys]


def _check_modulus(ev: Evaluator, width: int) -> None:
    # encoding elements stay below 2**(width+1); differences must not wrap
    if ev.ctx.binary or ev.ctx.p <= 2 ** (width + 2):
        raise ValueError(f"plaintext modulus must exceed 2**{width + 2}")


# --------------------------------------------------------------------------
# comparison


def lin_compare(
    ev: Evaluator, u: Sequence[CtHandle], v: Sequence[CtHandle], rng: Optional[random.Random] = None
) -> list[CtHandle]:
    """Randomized, shuffled differences; exactly one decrypts to 0 iff ``x > y``.

    ``u`` is the encrypted 1-encoding of ``x``, ``v`` the encrypted 0-encoding of ``y``.
    """
    if len(u) != len(v):
        raise ValueError("encodings differ in length")
    _check_modulus(ev, len(u))
    rng = rng or ev.ctx.rng
    ev.counter.bump("cmp")
    out = [ev.mul(ev.sub(ul, vl), ev.const(rng.randrange(1, ev.ctx.p))) for ul, vl in zip(u, v)]
    rng.shuffle(out)
    return out


def lin_compare_dt(ev: Evaluator, u: Sequence[CtHandle], v: Sequence[CtHandle]) -> CtHandle:
    """Single mark: product of all differences, 0 iff ``x > y``. Depth ``|mu - 1|``."""
    if len(u) != len(v):
        raise ValueError("encodings differ in length")
    _check_modulus(ev, len(u))
    ev.counter.bump("cmp")
    return eval_mul(ev, [ev.sub(ul, vl) for ul, vl in zip(u, v)])


def lin_compare_dt_packed(ev: Evaluator, u: CtHandle, v: CtHandle, width: int) -> CtHandle:
    """As :func:`lin_compare_dt` on slot-packed encodings; the mark lands in slot 0.

    Unused slots are lifted to 1, then ``|width - 1|`` rounds of
    shift-and-multiply fold the first ``width`` slots into slot 0.
    """
    s = ev.ctx.s
    steps = bitlen(width - 1)
    if 2**steps > s:
        raise ValueError(f"{width}-element encodings need at least {2 ** steps} slots")
    _check_modulus(ev, width)
    ev.counter.bump("cmp")
    diff = ev.add(ev.sub(u, v), ev.const_packed([0] * width + [1] * (s - width)))
    for j in range(steps):
        diff = ev.mul(diff, ev.shift_left(diff, 2**j))
    return diff


# --------------------------------------------------------------------------
# protocol pieces


@dataclass
class EncryptedInputInt:
    """Per attribute: encrypted 0- and 1-encodings.

    Component mode stores ``width`` handles per encoding (position 1 first);
    packed mode stores one handle whose slot 0 is position ``width``.
    """

    v0: list[list[CtHandle]]
    v1: list[list[CtHandle]]
    width: int
    packed: bool = False
    tie_break: str = "offset"

    def handles(self):
        for row in self.v0 + self.v1:
            yield from row


def _encrypt_encoding(pk_or_ev, enc: Encoding01, packed: bool):
    if isinstance(pk_or_ev, Evaluator):
        single, many = pk_or_ev.enc, pk_or_ev.enc_packed
    else:
        single = lambda a: encrypt(pk_or_ev, a)  # noqa: E731
        many = lambda a: encrypt_packed(pk_or_ev, a)  # noqa: E731
    if packed:
        return [many(list(enc.v0[::-1]))], [many(list(enc.v1[::-1]))]
    return [single(a) for a in enc.v0], [single(a) for a in enc.v1]


def encrypt_input_int(
    pk: PublicKey,
    x: Sequence[int],
    mu: int,
    rng: Optional[random.Random] = None,
    packed: bool = False,
    tie_break: str = "offset",
) -> EncryptedInputInt:
    if tie_break not in TIE_BREAKS:
        raise ValueError(f"unknown tie break {tie_break!r}")
    rng = rng or random.Random()
    width = mu
    values = [int(a) for a in x]
    if tie_break == "append":
        values, _ = distinctify(values, [])
        width = mu + 1
    v0, v1 = [], []
    for a in values:
        e = encode01(a, width, rng)
        c0, c1 = _encrypt_encoding(pk, e, packed)
        v0.append(c0)
        v1.append(c1)
    return EncryptedInputInt(v0, v1, width, packed, tie_break)


def edge_marks(
    model: TreeModel, ev: Evaluator, inp: EncryptedInputInt, rng: Optional[random.Random] = None
) -> dict[int, CtHandle]:
    """Mark every edge: the mark on a child decrypts to 0 iff its branch is taken."""
    rng = rng or ev.ctx.rng
    p = model.params
    if len(inp.v0) != p.n:
        raise ValueError("encrypted input does not match the model's attribute count")
    width, packed = inp.width, inp.packed
    if width != (p.mu + 1 if inp.tie_break == "append" else p.mu):
        raise ValueError("encoding width does not match the model's bit length")

    def compare(u, v):
        if packed:
            return lin_compare_dt_packed(ev, u[0], v[0], width)
        return lin_compare_dt(ev, u, v)

    def server_encoding(y):
        return _encrypt_encoding(ev, encode01(y, width, rng), packed)

    marks: dict[int, CtHandle] = {}
    for node in model.decision_nodes:
        i, y = node.aindex, node.thr
        if inp.tie_break == "append":
            (y2,) = distinctify([], [y])[1]
            yv0, yv1 = server_encoding(y2)
            marks[node.right.id] = compare(inp.v1[i], yv0)
            marks[node.left.id] = compare(yv1, inp.v0[i])
        else:
            if y == 0:
                marks[node.right.id] = ev.const(0)  # x >= 0 always holds
            else:
                marks[node.right.id] = compare(inp.v1[i], server_encoding(y - 1)[0])
            marks[node.left.id] = compare(server_encoding(y)[1], inp.v0[i])
    return marks


def path_marks(
    model: TreeModel, ev: Evaluator, inp: EncryptedInputInt, rng: Optional[random.Random] = None
) -> list[tuple[int, list[CtHandle]]]:
    """``(leaf_id, marks on the root path)`` in BFS leaf order."""
    marks = edge_marks(model, ev, inp, rng)
    return [(leaf.id, [marks[u.id] for u in model.path(leaf)]) for leaf in model.leaves]


def arithmetic_pdte(
    model: TreeModel, ev: Evaluator, inp: EncryptedInputInt, rng: Optional[random.Random] = None
) -> list[tuple[int, CtHandle]]:
    """Sum the marks along each root-to-leaf path (additions only).

    The classification leaf's cost decrypts to 0. Other costs are sums of
    small, unrandomized products and may cancel modulo ``p``; the protocol
    therefore hands :func:`path_marks` to :func:`finalize_int` instead.
    """
    return [(leaf_id, ev.sum(ms)) for leaf_id, ms in path_marks(model, ev, inp, rng)]


def finalize_int(
    ev: Evaluator,
    costs: Sequence,
    labels: Sequence[int],
    rng: Optional[random.Random] = None,
    pack_output: bool = False,
) -> list[CtHandle]:
    """Mask each leaf with fresh nonzero randomness and add its label, in shuffled order.

    ``costs[j]`` is either one cost ciphertext, giving ``cost * r + label``,
    or the list of path marks, giving ``sum(mark_u * r_u) + label``. The
    second form costs the same single level and cannot cancel except with
    probability ``1/p``. Masks are the plaintext ``[r, 0, ..., 0]`` so slots
    other than slot 0 are cleared. With ``pack_output`` the results are
    shifted into ``ceil(len(costs) / s)`` ciphertexts, one per slot.
    """
    rng = rng or ev.ctx.rng
    p, s = ev.ctx.p, ev.ctx.s

    def mask(c):
        return ev.mul(c, ev.const_packed([rng.randrange(1, p)]))

    order = list(range(len(costs)))
    rng.shuffle(order)
    results = []
    for j in order:
        c = costs[j]
        # an empty mark list only occurs for a single-leaf tree
        masked = mask(c) if isinstance(c, CtHandle) else ev.sum(mask(m) for m in c)
        results.append(ev.add(masked, ev.enc_packed([labels[j]])))
    if not pack_output:
        return results
    out = []
    for start in range(0, len(results), s):
        group = results[start : start + s]
        out.append(ev.sum(ev.shift_right(c, t) for t, c in enumerate(group)))
    return out


def pdte_int_run(
    model: TreeModel,
    ev: Evaluator,
    inp: EncryptedInputInt,
    pack_output: bool = False,
    rng: Optional[random.Random] = None,
) -> list[CtHandle]:
    """Server side of one arithmetic classification."""
    for c in inp.handles():
        if not capacity_check(c):
            raise CapacityError("input ciphertext failed the capacity check")
    marks = path_marks(model, ev, inp, rng)
    labels = {v.id: v.clabel for v in model.leaves}
    return finalize_int(ev, [m for _, m in marks], [labels[i] for i, _ in marks], rng, pack_output)


def decrypt_int_results(sk: SecretKey, outputs: Sequence[CtHandle], count: int, packed: bool) -> list[int]:
    if packed:
        values = [int(a) for c in outputs for a in decrypt(sk, c)]
    else:
        values = [int(decrypt(sk, c)[0]) for c in outputs]
    return values[:count]


def client_decode_int(values: Sequence[int], k: int) -> int:
    """Pick the unique value that is a valid label in ``[0, k)``."""
    hits = [v for v in values if 0 <= v < k]
    if len(hits) != 1:
        raise AmbiguityError(f"{len(hits)} candidate labels among {len(values)} results")
    return hits[0]
