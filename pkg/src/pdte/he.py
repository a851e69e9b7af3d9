"""Leveled homomorphic encryption contract and its clear-simulation backend.

The reference backend performs no cryptography. A ciphertext handle stores the
plaintext slot vector together with the multiplicative depth it has consumed,
so every circuit built on top of it can be checked against a plaintext oracle
while depth and operation counts stay exact.

Levels follow the usual leveled-FHE abstraction: a fresh encryption has depth
0, additions and shifts are free, a multiplication produces
``max(depth_a, depth_b) + 1``. A handle whose depth exceeds the level budget
``L`` can no longer be decrypted.

Payloads of binary contexts are Python ints used as bit masks (bit ``i`` is
slot ``i``); integer contexts use tuples of residues.
"""
from __future__ import annotations

import json
import random
import struct
import threading
import uuid
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

BINARY = "binary"
INTEGER = "integer"

# 2**61 - 1 is prime; products of two residues stay exact in Python ints and
# decrypted slots still fit a signed 64-bit SlotVector.
DEFAULT_INT_MODULUS = 2**61 - 1


class HEError(Exception):
    pass


class CapacityError(HEError):
    """The ciphertext has no level left for the requested operation."""


class ContextMismatch(HEError):
    pass


@dataclass(frozen=True)
class HeParams:
    mode: str = BINARY
    slots: int = 1
    levels: int = 32
    modulus: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.mode not in (BINARY, INTEGER):
            raise HEError(f"unknown mode {self.mode!r}")
        if self.modulus is None:
            object.__setattr__(self, "modulus", 2 if self.mode == BINARY else DEFAULT_INT_MODULUS)
        if self.mode == BINARY and self.modulus != 2:
            raise HEError("binary mode works modulo 2")
        if self.mode == INTEGER and self.modulus < 3:
            raise HEError("integer mode needs a modulus above 2")
        if self.slots < 1:
            raise HEError("slot count must be positive")
        if self.levels < 1:
            raise HEError("level budget must be at least 1")


class HeContext:
    """Parameters, identity and RNG shared by all keys of one key generation."""

    def __init__(self, params: HeParams, context_id: Optional[bytes] = None):
        self.params = params
        if context_id is None:
            if params.seed is None:
                context_id = uuid.uuid4().bytes
            else:
                context_id = random.Random(f"ctx-{params.seed}").randbytes(16)
        if len(context_id) != 16:
            raise HEError("context id must be 16 bytes")
        self.id = context_id
        self.rng = random.Random(params.seed)
        self._full = (1 << params.slots) - 1

    p = property(lambda self: self.params.modulus)
    s = property(lambda self: self.params.slots)
    L = property(lambda self: self.params.levels)

    @property
    def binary(self) -> bool:
        return self.params.mode == BINARY

    # payload helpers -------------------------------------------------------

    def pack(self, values: Sequence[int]):
        values = [int(v) for v in values]
        if len(values) > self.s:
            raise HEError(f"{len(values)} values do not fit in {self.s} slots")
        for v in values:
            if not 0 <= v < self.p:
                raise HEError(f"slot value {v} outside [0, {self.p})")
        values += [0] * (self.s - len(values))
        if self.binary:
            return sum(v << i for i, v in enumerate(values))
        return tuple(values)

    def replicate(self, value: int):
        value = int(value)
        if not 0 <= value < self.p:
            raise HEError(f"value {value} outside [0, {self.p})")
        if self.binary:
            return self._full if value else 0
        return (value,) * self.s

    def unpack(self, payload) -> np.ndarray:
        if self.binary:
            return np.array([(payload >> i) & 1 for i in range(self.s)], dtype=np.int64)
        return np.array(payload, dtype=np.int64)

    def well_formed(self, payload) -> bool:
        if self.binary:
            return isinstance(payload, int) and 0 <= payload <= self._full
        return (
            isinstance(payload, tuple)
            and len(payload) == self.s
            and all(isinstance(v, int) and 0 <= v < self.p for v in payload)
        )

    def __repr__(self):
        return f"HeContext({self.params}, id={self.id.hex()[:8]})"


@dataclass(frozen=True, eq=False)
class CtHandle:
    """An (simulated) ciphertext.

    ``transparent`` marks trivial encryptions of public constants.
    """

    payload: object
    depth: int
    ctx: HeContext = field(repr=False)
    transparent: bool = False

    @property
    def context_id(self) -> bytes:
        return self.ctx.id

    @property
    def capacity(self) -> int:
        return self.ctx.L - self.depth


@dataclass(frozen=True)
class PublicKey:
    ctx: HeContext


@dataclass(frozen=True)
class SecretKey:
    ctx: HeContext


@dataclass(frozen=True)
class EvalKey:
    ctx: HeContext


@dataclass(frozen=True)
class KeyTriple:
    pk: PublicKey
    sk: SecretKey
    ek: EvalKey

    @property
    def ctx(self) -> HeContext:
        return self.pk.ctx


def keygen(params: HeParams, context_id: Optional[bytes] = None) -> KeyTriple:
    ctx = HeContext(params, context_id)
    return KeyTriple(PublicKey(ctx), SecretKey(ctx), EvalKey(ctx))


def encrypt(pk: PublicKey, value: int) -> CtHandle:
    """Encrypt one ring element, replicated to every slot."""
    return CtHandle(pk.ctx.replicate(value), 0, pk.ctx)


def encrypt_packed(pk: PublicKey, values: Sequence[int]) -> CtHandle:
    """Encrypt up to ``s`` values, one per slot; remaining slots hold 0."""
    return CtHandle(pk.ctx.pack(values), 0, pk.ctx)


def decrypt(sk: SecretKey, c: CtHandle) -> np.ndarray:
    """Return the slot vector. Fails once the handle's capacity is negative."""
    if c.ctx.id != sk.ctx.id:
        raise ContextMismatch("ciphertext belongs to another context")
    if c.capacity < 0:
        raise CapacityError(f"depth {c.depth} exceeds level budget {c.ctx.L}; noise overflow")
    return c.ctx.unpack(c.payload)


def decrypt_value(sk: SecretKey, c: CtHandle) -> int:
    """Slot 0 of :func:`decrypt`."""
    return int(decrypt(sk, c)[0])


def capacity_check(c: CtHandle) -> bool:
    """Public validity test run by a server on every received ciphertext."""
    return (
        isinstance(c, CtHandle)
        and isinstance(c.depth, int)
        and 0 <= c.depth <= c.ctx.L
        and c.ctx.well_formed(c.payload)
    )


# --------------------------------------------------------------------------
# evaluation


class OpCounter:
    """Thread-safe counts of homomorphic operations."""

    _fields = ("mul", "add", "shift", "cmp")

    def __init__(self):
        self._lock = threading.Lock()
        self.reset()

    def reset(self):
        for f in self._fields:
            setattr(self, f, 0)

    def bump(self, name: str, by: int = 1):
        with self._lock:
            setattr(self, name, getattr(self, name) + by)

    def snapshot(self) -> dict:
        return {f: getattr(self, f) for f in self._fields}


Operand = Union[CtHandle, int]


class Evaluator:
    """Homomorphic operations available to whoever holds the evaluation key.

    There is deliberately no decryption here: a server is handed an
    :class:`Evaluator` and a :class:`PublicKey`, never a :class:`SecretKey`.
    """

    def __init__(self, ek: EvalKey, pk: Optional[PublicKey] = None):
        self.ctx = ek.ctx
        self.pk = pk if pk is not None else PublicKey(ek.ctx)
        self.counter = OpCounter()

    def enc(self, value: int) -> CtHandle:
        """Fresh encryption of a private server value under the client's key."""
        return encrypt(self.pk, value % self.ctx.p)

    def enc_packed(self, values: Sequence[int]) -> CtHandle:
        return encrypt_packed(self.pk, [v % self.ctx.p for v in values])

    # constants -------------------------------------------------------------

    def const(self, value: int) -> CtHandle:
        """Trivial encryption of a public constant, replicated."""
        return CtHandle(self.ctx.replicate(value % self.ctx.p), 0, self.ctx, transparent=True)

    def const_packed(self, values: Sequence[int]) -> CtHandle:
        return CtHandle(self.ctx.pack([v % self.ctx.p for v in values]), 0, self.ctx, transparent=True)

    def _lift(self, x: Operand) -> CtHandle:
        if isinstance(x, CtHandle):
            if x.ctx.id != self.ctx.id:
                raise ContextMismatch("operands from different contexts")
            return x
        return self.const(int(x))

    # arithmetic ------------------------------------------------------------

    def add(self, a: Operand, b: Operand) -> CtHandle:
        a, b = self._lift(a), self._lift(b)
        self.counter.bump("add")
        if self.ctx.binary:
            pl = a.payload ^ b.payload
        else:
            p = self.ctx.p
            pl = tuple((x + y) % p for x, y in zip(a.payload, b.payload))
        return CtHandle(pl, max(a.depth, b.depth), self.ctx, a.transparent and b.transparent)

    def sub(self, a: Operand, b: Operand) -> CtHandle:
        a, b = self._lift(a), self._lift(b)
        self.counter.bump("add")
        if self.ctx.binary:
            pl = a.payload ^ b.payload
        else:
            p = self.ctx.p
            pl = tuple((x - y) % p for x, y in zip(a.payload, b.payload))
        return CtHandle(pl, max(a.depth, b.depth), self.ctx, a.transparent and b.transparent)

    def not_(self, a: CtHandle) -> CtHandle:
        """``1 - a``; for bits this is XOR with 1."""
        return self.sub(1, a) if not self.ctx.binary else self.add(a, 1)

    def sum(self, items: Iterable[CtHandle]) -> CtHandle:
        items = list(items)
        if not items:
            return self.const(0)
        acc = items[0]
        for c in items[1:]:
            acc = self.add(acc, c)
        return acc

    def mul(self, a: Operand, b: Operand) -> CtHandle:
        a, b = self._lift(a), self._lift(b)
        if min(a.capacity, b.capacity) <= 0:
            raise CapacityError(
                f"multiplication at depth {max(a.depth, b.depth)} exhausts level budget {self.ctx.L}"
            )
        self.counter.bump("mul")
        if self.ctx.binary:
            pl = a.payload & b.payload
        else:
            p = self.ctx.p
            pl = tuple((x * y) % p for x, y in zip(a.payload, b.payload))
        return CtHandle(pl, max(a.depth, b.depth) + 1, self.ctx, a.transparent and b.transparent)

    # slot moves ------------------------------------------------------------

    def shift_left(self, c: CtHandle, offset: int) -> CtHandle:
        """Slot ``i`` receives slot ``i + offset``; vacated slots are zero."""
        c = self._lift(c)
        s = self.ctx.s
        if not 0 <= offset <= s:
            raise HEError(f"shift offset {offset} outside [0, {s}]")
        self.counter.bump("shift")
        if self.ctx.binary:
            pl = c.payload >> offset
        else:
            pl = c.payload[offset:] + (0,) * offset
        return CtHandle(pl, c.depth, self.ctx, c.transparent)

    def shift_right(self, c: CtHandle, offset: int) -> CtHandle:
        """Slot ``i + offset`` receives slot ``i``; vacated slots are zero."""
        c = self._lift(c)
        s = self.ctx.s
        if not 0 <= offset <= s:
            raise HEError(f"shift offset {offset} outside [0, {s}]")
        self.counter.bump("shift")
        if self.ctx.binary:
            pl = (c.payload << offset) & self.ctx._full
        else:
            pl = (0,) * offset + c.payload[: s - offset]
        return CtHandle(pl, c.depth, self.ctx, c.transparent)


# --------------------------------------------------------------------------
# serialization

_HEADER = struct.Struct(">16sII")


def serialize(c: CtHandle) -> bytes:
    """Context id (16 bytes), depth (u32), slot count (u32), then u64 slot values."""
    slots = c.ctx.unpack(c.payload)
    return _HEADER.pack(c.ctx.id, c.depth, len(slots)) + struct.pack(f">{len(slots)}Q", *map(int, slots))


def deserialize(data: bytes, ctx: HeContext) -> CtHandle:
    if len(data) < _HEADER.size:
        raise HEError("truncated ciphertext header")
    cid, depth, count = _HEADER.unpack_from(data)
    if cid != ctx.id:
        raise ContextMismatch("ciphertext was produced under another context")
    if count != ctx.s or len(data) != _HEADER.size + 8 * count:
        raise HEError("ciphertext payload length does not match the context")
    values = struct.unpack_from(f">{count}Q", data, _HEADER.size)
    if any(v >= ctx.p for v in values):
        raise HEError("slot value outside the plaintext space")
    if ctx.binary:
        payload = sum(v << i for i, v in enumerate(values))
    else:
        payload = tuple(values)
    return CtHandle(payload, depth, ctx)


def params_to_text(ctx: HeContext, role: str = "context") -> str:
    p = ctx.params
    return (
        f'{{"role": "{role}", "context": "{ctx.id.hex()}", "mode": "{p.mode}", '
        f'"slots": {p.slots}, "levels": {p.levels}, "modulus": {p.modulus}, '
        f'"seed": {"null" if p.seed is None else p.seed}}}\n'
    )


def context_from_text(text: str) -> HeContext:
    doc = json.loads(text)
    params = HeParams(doc["mode"], doc["slots"], doc["levels"], doc["modulus"], doc["seed"])
    return HeContext(params, bytes.fromhex(doc["context"]))
