"""One-round client/server protocol: framing, channels, randomizer sessions.

Request layout (big-endian)::

    "PDTE" | version u8 | scheme u8 | packing u8 | mu u16 | n u16 | batch u16
    | count u32 | count x (length u32, blob)

``scheme`` is 0 (binary) or 1 (integer); bit ``0x80`` marks a blinded
request whose first blob names the randomizer session and the index of the
first mask, followed by one blinded slot vector per would-be ciphertext.
A response repeats the header, then carries ``result_count u32`` (number of
logical results), the result blobs, and a length-prefixed ``key=value`` cost
report.

The server is built from a model, a public key and an evaluation key only.
"""
from __future__ import annotations

import os
import random
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .arith import (
    EncryptedInputInt,
    client_decode_int,
    decrypt_int_results,
    encrypt_input_int,
    pdte_int_run,
)
from .binary import PACKINGS, EncryptedInputBin, decode_bin, encrypt_input_bin, pdte_bin_run
from .cost import CostReport
from .he import (
    CtHandle,
    EvalKey,
    Evaluator,
    HeContext,
    HEError,
    KeyTriple,
    PublicKey,
    capacity_check,
    deserialize,
    encrypt_packed,
    serialize,
)
from .tree import TreeModel

VERSION = 1
MAGIC = b"PDTE"
SCHEME_CODES = {"bin": 0, "int": 1}
BLINDED = 0x80

# integer-scheme packing flags
INT_PACK_OUTPUT = 0x01
INT_PACK_ENCODING = 0x02
INT_TIE_APPEND = 0x04

_HEADER = struct.Struct(">4sBBBHHH")
_U32 = struct.Struct(">I")
_SESSION = struct.Struct(">16sI")


class ProtocolError(Exception):
    pass


class SessionError(ProtocolError):
    """Unknown randomizer session or a mask used twice."""


# --------------------------------------------------------------------------
# messages


@dataclass
class Header:
    scheme: str
    packing: int
    mu: int
    n: int
    batch: int = 1
    blinded: bool = False
    version: int = VERSION

    def pack(self) -> bytes:
        code = SCHEME_CODES[self.scheme] | (BLINDED if self.blinded else 0)
        return _HEADER.pack(MAGIC, self.version, code, self.packing, self.mu, self.n, self.batch)

    @classmethod
    def unpack(cls, data: bytes) -> "Header":
        if len(data) < _HEADER.size:
            raise ProtocolError("truncated header")
        magic, version, code, packing, mu, n, batch = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ProtocolError("bad magic")
        if version != VERSION:
            raise ProtocolError(f"unsupported version {version}")
        schemes = {v: k for k, v in SCHEME_CODES.items()}
        if code & ~BLINDED not in schemes:
            raise ProtocolError(f"unknown scheme code {code}")
        return cls(schemes[code & ~BLINDED], packing, mu, n, batch, bool(code & BLINDED), version)


def _pack_blobs(blobs: Sequence[bytes]) -> bytes:
    return _U32.pack(len(blobs)) + b"".join(_U32.pack(len(b)) + b for b in blobs)


def _unpack_blobs(data: bytes, offset: int) -> tuple[list[bytes], int]:
    def u32(at):
        if at + 4 > len(data):
            raise ProtocolError("truncated message")
        return _U32.unpack_from(data, at)[0]

    count = u32(offset)
    offset += 4
    blobs = []
    for _ in range(count):
        size = u32(offset)
        offset += 4
        if offset + size > len(data):
            raise ProtocolError("truncated blob")
        blobs.append(data[offset : offset + size])
        offset += size
    return blobs, offset


@dataclass
class ClassifyRequest:
    header: Header
    blobs: list[bytes]

    def to_bytes(self) -> bytes:
        return self.header.pack() + _pack_blobs(self.blobs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ClassifyRequest":
        header = Header.unpack(data)
        blobs, end = _unpack_blobs(data, _HEADER.size)
        if end != len(data):
            raise ProtocolError("trailing bytes after request")
        return cls(header, blobs)


@dataclass
class ClassifyResponse:
    header: Header
    result_count: int
    blobs: list[bytes]
    report: str = ""

    def to_bytes(self) -> bytes:
        text = self.report.encode()
        return (
            self.header.pack()
            + _U32.pack(self.result_count)
            + _pack_blobs(self.blobs)
            + _U32.pack(len(text))
            + text
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "ClassifyResponse":
        header = Header.unpack(data)
        at = _HEADER.size
        if at + 4 > len(data):
            raise ProtocolError("truncated response")
        (result_count,) = _U32.unpack_from(data, at)
        blobs, at = _unpack_blobs(data, at + 4)
        if at + 4 > len(data):
            raise ProtocolError("truncated cost report")
        (size,) = _U32.unpack_from(data, at)
        at += 4
        if at + size != len(data):
            raise ProtocolError("cost report length mismatch")
        return cls(header, result_count, blobs, data[at:].decode())

    def cost(self) -> Optional[CostReport]:
        return CostReport.from_text(self.report) if self.report else None


# --------------------------------------------------------------------------
# randomizer


def _slots_to_bytes(values: Sequence[int]) -> bytes:
    return struct.pack(f">{len(values)}Q", *map(int, values))


def _bytes_to_slots(data: bytes, s: int) -> list[int]:
    if len(data) != 8 * s:
        raise ProtocolError("blinded vector has the wrong length")
    return list(struct.unpack(f">{s}Q", data))


@dataclass
class ClientMasks:
    session_id: bytes
    masks: list[list[int]]
    next: int = 0

    def take(self, count: int) -> tuple[int, list[list[int]]]:
        if self.next + count > len(self.masks):
            raise SessionError(f"only {len(self.masks) - self.next} masks left, {count} needed")
        start = self.next
        self.next += count
        return start, self.masks[start : start + count]


@dataclass
class ServerMasks:
    session_id: bytes
    encrypted: list[CtHandle]
    used: set = field(default_factory=set)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def consume(self, start: int, count: int) -> list[CtHandle]:
        idx = range(start, start + count)
        with self._lock:
            if start + count > len(self.encrypted):
                raise SessionError("mask index out of range")
            if any(i in self.used for i in idx):
                raise SessionError("mask reused")
            self.used.update(idx)
        return [self.encrypted[i] for i in idx]

    def offline_bytes(self) -> int:
        return sum(len(serialize(c)) for c in self.encrypted)


@dataclass
class RandomizerSession:
    client: ClientMasks
    server: ServerMasks


def randomizer_provision(pk: PublicKey, count: int, scheme: str, rng: Optional[random.Random] = None) -> RandomizerSession:
    """Offline phase: ``count`` single-use slot-vector masks and their encryptions.

    Binary masks are random bits (removed by XOR), integer masks uniform
    residues (removed by subtraction).
    """
    if scheme not in SCHEME_CODES:
        raise ValueError(f"unknown scheme {scheme!r}")
    rng = rng or random.Random()
    ctx = pk.ctx
    if (scheme == "bin") != ctx.binary:
        raise ValueError("scheme does not match the key's plaintext space")
    masks = [[rng.randrange(ctx.p) for _ in range(ctx.s)] for _ in range(count)]
    sid = rng.randbytes(16)
    return RandomizerSession(
        ClientMasks(sid, masks), ServerMasks(sid, [encrypt_packed(pk, m) for m in masks])
    )


# --------------------------------------------------------------------------
# parties


def _int_flags(packed_output: bool, packed_encoding: bool, tie_break: str) -> int:
    return (
        (INT_PACK_OUTPUT if packed_output else 0)
        | (INT_PACK_ENCODING if packed_encoding else 0)
        | (INT_TIE_APPEND if tie_break == "append" else 0)
    )


class Server:
    """Holds a model, the client's public key and evaluation key; never a secret key."""

    def __init__(
        self,
        model: TreeModel,
        pk: PublicKey,
        ek: EvalKey,
        path_alg: str = "dag",
        threads: int = 1,
        seed: Optional[int] = None,
    ):
        if pk.ctx.id != ek.ctx.id:
            raise ProtocolError("public and evaluation keys belong to different contexts")
        self.model = model
        self.pk = pk
        self.ek = ek
        self.ctx: HeContext = ek.ctx
        self.path_alg = path_alg
        self.threads = threads
        self.rng = random.Random(seed)
        self.sessions: dict[bytes, ServerMasks] = {}

    @property
    def scheme(self) -> str:
        return "bin" if self.ctx.binary else "int"

    def register(self, masks: ServerMasks) -> None:
        self.sessions[masks.session_id] = masks

    # --------------------------------------------------------------------

    def _expected_blobs(self, h: Header) -> int:
        if h.scheme == "bin":
            return h.n * h.mu
        width = h.mu + (1 if h.packing & INT_TIE_APPEND else 0)
        return 2 * h.n * (1 if h.packing & INT_PACK_ENCODING else width)

    def _check_header(self, h: Header, blob_count: int) -> None:
        p = self.model.params
        if h.scheme != self.scheme:
            raise ProtocolError(f"{h.scheme} request sent to a {self.scheme} server")
        if (h.mu, h.n) != (p.mu, p.n):
            raise ProtocolError(f"request is for mu={h.mu}, n={h.n}; model has mu={p.mu}, n={p.n}")
        if h.scheme == "bin":
            if h.packing >= len(PACKINGS):
                raise ProtocolError(f"unknown packing code {h.packing}")
            limit = self.ctx.s if PACKINGS[h.packing] == "attr" else 1
            if not 1 <= h.batch <= limit:
                raise ProtocolError(f"batch {h.batch} outside [1, {limit}]")
        elif h.packing & ~(INT_PACK_OUTPUT | INT_PACK_ENCODING | INT_TIE_APPEND) or h.batch != 1:
            raise ProtocolError("bad integer packing flags or batch")
        expected = self._expected_blobs(h) + (1 if h.blinded else 0)
        if blob_count != expected:
            raise ProtocolError(f"expected {expected} blobs, got {blob_count}")

    def _inputs(self, req: ClassifyRequest) -> list[CtHandle]:
        h = req.header
        if not h.blinded:
            try:
                cts = [deserialize(b, self.ctx) for b in req.blobs]
            except HEError as exc:
                raise ProtocolError(f"bad ciphertext: {exc}") from None
            # the capacity check runs before any evaluation
            for c in cts:
                if not capacity_check(c):
                    raise ProtocolError("input ciphertext failed the capacity check")
            return cts
        if len(req.blobs[0]) != _SESSION.size:
            raise ProtocolError("bad session reference")
        sid, start = _SESSION.unpack(req.blobs[0])
        if sid not in self.sessions:
            raise SessionError("unknown randomizer session")
        body = req.blobs[1:]
        masks = self.sessions[sid].consume(start, len(body))
        ev = Evaluator(self.ek, self.pk)
        out = []
        for blob, m in zip(body, masks):
            blinded = ev.const_packed(_bytes_to_slots(blob, self.ctx.s))
            out.append(ev.add(blinded, m) if self.ctx.binary else ev.sub(blinded, m))
        return out

    def handle(self, request: Union[bytes, ClassifyRequest]) -> ClassifyResponse:
        req = ClassifyRequest.from_bytes(request) if isinstance(request, bytes) else request
        h = req.header
        self._check_header(h, len(req.blobs))
        cts = self._inputs(req)
        ev = Evaluator(self.ek, self.pk)
        p = self.model.params
        if h.scheme == "bin":
            packing = PACKINGS[h.packing]
            bits = [cts[i * h.mu : (i + 1) * h.mu] for i in range(h.n)]
            inp = EncryptedInputBin(bits, packing, h.batch)
            outs = pdte_bin_run(self.model, ev, inp, packing, self.path_alg, self.threads)
            count = h.batch
        else:
            packed = bool(h.packing & INT_PACK_ENCODING)
            width = p.mu + (1 if h.packing & INT_TIE_APPEND else 0)
            per = 1 if packed else width
            rows = [cts[j * per : (j + 1) * per] for j in range(2 * h.n)]
            inp = EncryptedInputInt(
                rows[: h.n], rows[h.n :], width, packed, "append" if h.packing & INT_TIE_APPEND else "offset"
            )
            outs = pdte_int_run(self.model, ev, inp, bool(h.packing & INT_PACK_OUTPUT), self.rng)
            count = len(self.model.leaves)
        report = CostReport.measure(ev, outs, h.batch)
        return ClassifyResponse(h, count, [serialize(c) for c in outs], report.to_text())

    def handle_bytes(self, data: bytes) -> bytes:
        return self.handle(data).to_bytes()


class Client:
    """Holds the key triple; builds requests and decodes responses."""

    def __init__(
        self,
        keys: KeyTriple,
        n: int,
        mu: int,
        n_labels: int,
        packing: str = "none",
        pack_encoding: bool = False,
        tie_break: str = "offset",
        masks: Optional[ClientMasks] = None,
        seed: Optional[int] = None,
    ):
        self.keys = keys
        self.ctx = keys.ctx
        self.scheme = "bin" if self.ctx.binary else "int"
        self.n, self.mu, self.k = n, mu, n_labels
        self.packing = packing
        self.pack_encoding = pack_encoding
        self.tie_break = tie_break
        self.masks = masks
        self.rng = random.Random(seed)

    def _header(self, batch: int, blinded: bool) -> Header:
        if self.scheme == "bin":
            code = PACKINGS.index(self.packing)
        else:
            code = _int_flags(self.packing != "none", self.pack_encoding, self.tie_break)
        return Header(self.scheme, code, self.mu, self.n, batch, blinded)

    def _plain_vectors(self, x) -> tuple[list[CtHandle], int]:
        if self.scheme == "bin":
            inp = encrypt_input_bin(self.keys.pk, x, self.mu, self.packing)
            return list(inp.handles()), inp.batch
        inp = encrypt_input_int(self.keys.pk, x, self.mu, self.rng, self.pack_encoding, self.tie_break)
        return list(inp.handles()), 1

    def build_request(self, x) -> ClassifyRequest:
        """Encrypt ``x`` (or, with masks, blind it) into a single request."""
        cts, batch = self._plain_vectors(x)
        if self.masks is None:
            return ClassifyRequest(self._header(batch, False), [serialize(c) for c in cts])
        # blinded: send plaintext + mask instead of ciphertexts
        start, masks = self.masks.take(len(cts))
        p = self.ctx.p
        blobs = [_SESSION.pack(self.masks.session_id, start)]
        for c, m in zip(cts, masks):
            # with the simulation backend the payload is the plain slot vector;
            # a real backend would encode here instead of encrypting
            slots = self.ctx.unpack(c.payload)
            if self.ctx.binary:
                blinded = [int(a) ^ b for a, b in zip(slots, m)]
            else:
                blinded = [(int(a) + b) % p for a, b in zip(slots, m)]
            blobs.append(_slots_to_bytes(blinded))
        return ClassifyRequest(self._header(batch, True), blobs)

    def read_response(self, response: Union[bytes, ClassifyResponse]):
        resp = ClassifyResponse.from_bytes(response) if isinstance(response, bytes) else response
        outs = [deserialize(b, self.ctx) for b in resp.blobs]
        sk = self.keys.sk
        if self.scheme == "bin":
            width = max(1, (self.k - 1).bit_length())
            return decode_bin(sk, outs, self.packing, width, resp.header.batch)
        values = decrypt_int_results(sk, outs, resp.result_count, self.packing != "none")
        return client_decode_int(values, self.k)


# --------------------------------------------------------------------------
# transport


class LoopbackChannel:
    """In-memory transport that records every message."""

    def __init__(self, server: Server):
        self.server = server
        self.messages: list[tuple[str, bytes]] = []

    @property
    def message_count(self) -> int:
        return len(self.messages)

    def exchange(self, request: bytes) -> bytes:
        self.messages.append(("request", request))
        response = self.server.handle_bytes(request)
        self.messages.append(("response", response))
        return response


class FileChannel(LoopbackChannel):
    """Offline transport: each message is a file in ``directory``."""

    def __init__(self, server: Server, directory: Union[str, os.PathLike]):
        super().__init__(server)
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def exchange(self, request: bytes) -> bytes:
        n = self.message_count // 2
        req_path = self.directory / f"request-{n}.bin"
        resp_path = self.directory / f"response-{n}.bin"
        req_path.write_bytes(request)
        self.messages.append(("request", request))
        resp_path.write_bytes(self.server.handle_bytes(req_path.read_bytes()))
        response = resp_path.read_bytes()
        self.messages.append(("response", response))
        return response


def serve_classify(server: Server, request: bytes) -> bytes:
    return server.handle_bytes(request)


def client_round_trip(client: Client, channel: LoopbackChannel, x):
    """Encrypt, send one request, receive one response, decode."""
    response = channel.exchange(client.build_request(x).to_bytes())
    return client.read_response(response)
