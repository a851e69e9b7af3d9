"""Binary instantiation: bitwise-encrypted inputs, arithmetic modulo 2.

Evaluation runs in three stages over a :class:`BinaryEvaluation`:

1. :meth:`~BinaryEvaluation.eval_node` writes the encrypted decision bit of
   every decision node onto its two children,
2. one of the path aggregations turns each leaf's bit into the product of all
   bits on its root path (``naive``, ``logdepth`` or ``dag``),
3. :meth:`~BinaryEvaluation.eval_leaves` folds leaf bits and labels into the
   result ciphertexts.

Packing modes:

``none``
    one attribute vector, labels returned bit by bit (``|k-1|`` ciphertexts).
``label``
    as ``none`` but the label bits are packed in one ciphertext, MSB in slot 0.
``attr``
    up to ``s`` attribute vectors, one per slot, classified in one run.
``thresh``
    thresholds of the nodes sharing an attribute are packed across slots and
    compared in one shot; only slot 0 of each decision bit is meaningful.
"""
from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .circuits import bitlen, eval_mul, she_cmp, to_bits
from .he import CapacityError, CtHandle, Evaluator, PublicKey, SecretKey, capacity_check, decrypt, encrypt, encrypt_packed
from .tree import Node, TreeModel

PACKINGS = ("none", "label", "attr", "thresh")
PATH_ALGS = ("naive", "logdepth", "dag")


@dataclass
class EncryptedInputBin:
    """``bits[i][l]`` encrypts bit ``l`` (LSB first) of attribute ``i``."""

    bits: list[list[CtHandle]]
    packing: str = "none"
    batch: int = 1

    def handles(self):
        for row in self.bits:
            yield from row


def encrypt_input_bin(pk: PublicKey, x, mu: int, packing: str = "none") -> EncryptedInputBin:
    """Client-side bitwise encryption.

    With ``packing="attr"`` ``x`` is a list of up to ``s`` attribute vectors and
    slot ``j`` of every ciphertext belongs to vector ``j``.
    """
    if packing not in PACKINGS:
        raise ValueError(f"unknown packing {packing!r}")
    if packing == "attr":
        vectors = [list(v) for v in x]
        if not vectors or len(vectors) > pk.ctx.s:
            raise ValueError(f"attribute packing takes 1..{pk.ctx.s} vectors")
        n = len(vectors[0])
        bits = [
            [encrypt_packed(pk, [(v[i] >> l) & 1 for v in vectors]) for l in range(mu)]
            for i in range(n)
        ]
        return EncryptedInputBin(bits, packing, len(vectors))
    bits = [[encrypt(pk, b) for b in to_bits(int(xi), mu)] for xi in x]
    return EncryptedInputBin(bits, packing, 1)


# --------------------------------------------------------------------------
# dependency DAG (plaintext, one-time)


def _add_edge(v: Node, cur: int, dest: int) -> None:
    w = v
    while cur > dest:
        w = w.parent
        cur -= 1
    v.mdag.append(w)


def compute_dag(model: TreeModel, up: int = 1, low: int | None = None) -> None:
    """Fill every node's ``mdag`` dependency list for :meth:`eval_path_precomp`.

    The top-level call clears previous lists and covers levels ``1..d``, where
    the decision bits live.
    """
    if low is None:
        for v in model.nodes:
            v.mdag.clear()
        compute_dag(model, up, model.depth)
        model.dag_ready = True
        return
    if up >= low:
        return
    eta = low - up + 1
    mid = 2 ** (bitlen(eta - 1) - 1) - 1 + up
    for v in model.levels[low]:
        _add_edge(v, low, mid)
    # leaves that end strictly between mid and low
    for i in range(mid + 1, low):
        for v in model.levels[i]:
            if v.is_leaf:
                _add_edge(v, i, mid)
    compute_dag(model, up, mid)
    compute_dag(model, mid + 1, low)


# --------------------------------------------------------------------------
# evaluation


class BinaryEvaluation:
    """Per-run scratch state: ``cmp`` maps node id to its current ciphertext."""

    def __init__(self, model: TreeModel, ev: Evaluator, packing: str = "none", threads: int = 1):
        if packing not in PACKINGS:
            raise ValueError(f"unknown packing {packing!r}")
        if not ev.ctx.binary:
            raise ValueError("binary evaluation needs a binary context")
        self.model = model
        self.ev = ev
        self.packing = packing
        self.threads = threads
        self.cmp: dict[int, CtHandle] = {model.root.id: ev.const(1)}

    def _map(self, fn, items):
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(i) for i in items]

    # stage 1 ---------------------------------------------------------------

    def eval_node(self, inp: EncryptedInputBin) -> None:
        mu = self.model.params.mu
        if len(inp.bits) != self.model.params.n or any(len(r) != mu for r in inp.bits):
            raise ValueError("encrypted input does not match the model's n and mu")
        if self.packing == "thresh":
            self._eval_node_packed_thresholds(inp)
            return
        ev = self.ev

        def decide(v: Node):
            ybits = [ev.enc(b) for b in to_bits(v.thr, mu)]
            _, lt = she_cmp(ev, inp.bits[v.aindex], ybits)
            return v, lt

        for v, lt in self._map(decide, self.model.decision_nodes):
            self.cmp[v.right.id] = ev.add(lt, 1)  # [x >= thr]
            self.cmp[v.left.id] = lt

    def _eval_node_packed_thresholds(self, inp: EncryptedInputBin) -> None:
        ev = self.ev
        for attr, groups in pack_thresholds(self.model, ev).items():
            for nodes, ybits in groups:
                _, lt = she_cmp(ev, inp.bits[attr], ybits)
                for t, v in enumerate(nodes):
                    bit = ev.shift_left(lt, t)
                    self.cmp[v.right.id] = ev.add(bit, 1)
                    self.cmp[v.left.id] = bit

    # stage 2 ---------------------------------------------------------------

    def eval_path_naive(self) -> None:
        """Breadth-first running products; depth grows linearly with the tree."""
        ev, cmp = self.ev, self.cmp
        for v in self.model.decision_nodes:
            if v.parent is None:
                continue  # the root carries the constant 1
            for child in (v.left, v.right):
                cmp[child.id] = ev.mul(cmp[child.id], cmp[v.id])

    def eval_path_efficient(self) -> None:
        """Per-leaf logarithmic-depth product of the path bits."""
        ev, cmp, model = self.ev, self.cmp, self.model

        def product(leaf: Node):
            return leaf, eval_mul(ev, [cmp[u.id] for u in model.path(leaf)])

        for leaf, c in self._map(product, model.leaves):
            cmp[leaf.id] = c

    def eval_path_precomp(self) -> None:
        """Level-by-level products following the precomputed ``mdag`` lists.

        Shared path prefixes are multiplied once. Requires :func:`compute_dag`.
        """
        ev, cmp = self.ev, self.cmp
        for level in self.model.levels[1:]:
            for v in level:
                acc = cmp[v.id]
                for w in reversed(v.mdag):
                    acc = ev.mul(acc, cmp[w.id])
                cmp[v.id] = acc

    def eval_path(self, alg: str) -> None:
        if alg == "naive":
            self.eval_path_naive()
        elif alg == "logdepth":
            self.eval_path_efficient()
        elif alg == "dag":
            if not self.model.dag_ready:
                compute_dag(self.model)
            self.eval_path_precomp()
        else:
            raise ValueError(f"unknown path algorithm {alg!r}")

    # stage 3 ---------------------------------------------------------------

    def eval_leaves(self) -> list[CtHandle]:
        ev, model = self.ev, self.model
        width = model.label_bits
        leaves = model.leaves
        if self.packing == "label":
            if width > ev.ctx.s:
                raise ValueError(f"{width}-bit labels do not fit in {ev.ctx.s} slots")
            terms = [
                ev.mul(self.cmp[v.id], ev.enc_packed(to_bits(v.clabel, width)[::-1])) for v in leaves
            ]
            return [ev.sum(terms)]
        if self.packing == "thresh":
            if width > ev.ctx.s:
                raise ValueError(f"{width}-bit labels do not fit in {ev.ctx.s} slots")
            # the label plaintexts are zero beyond slot 0, which clears the junk
            # left in the other slots by the threshold shifts
            out = None
            for j in range(width):
                rj = ev.sum(ev.mul(self.cmp[v.id], ev.enc_packed([(v.clabel >> j) & 1])) for v in leaves)
                rj = ev.shift_right(rj, width - 1 - j)
                out = rj if out is None else ev.add(out, rj)
            return [out]
        return [
            ev.sum(ev.mul(self.cmp[v.id], ev.enc((v.clabel >> j) & 1)) for v in leaves)
            for j in range(width)
        ]


def pack_thresholds(model: TreeModel, ev: Evaluator) -> dict[int, list[tuple[list[Node], list[CtHandle]]]]:
    """Group decision nodes by attribute and pack their thresholds ``s`` per ciphertext.

    Returns ``{attr: [(nodes, ybits), ...]}`` with ``ceil(m_i / s)`` groups per
    attribute; slot ``t`` of ``ybits[l]`` is bit ``l`` of ``nodes[t].thr``.
    """
    mu, s = model.params.mu, ev.ctx.s
    by_attr: dict[int, list[Node]] = defaultdict(list)
    for v in model.decision_nodes:
        by_attr[v.aindex].append(v)
    packed = {}
    for attr, nodes in sorted(by_attr.items()):
        groups = []
        for start in range(0, len(nodes), s):
            chunk = nodes[start : start + s]
            ybits = [ev.enc_packed([(v.thr >> l) & 1 for v in chunk]) for l in range(mu)]
            groups.append((chunk, ybits))
        packed[attr] = groups
    return packed


def pdte_bin_run(
    model: TreeModel,
    ev: Evaluator,
    inp: EncryptedInputBin,
    packing: str | None = None,
    path_alg: str = "dag",
    threads: int = 1,
) -> list[CtHandle]:
    """Server side of one binary classification: nodes, paths, leaves."""
    packing = packing or inp.packing
    for c in inp.handles():
        if not capacity_check(c):
            raise CapacityError("input ciphertext failed the capacity check")
    run = BinaryEvaluation(model, ev, packing, threads)
    run.eval_node(inp)
    run.eval_path(path_alg)
    return run.eval_leaves()


def decode_bin(sk: SecretKey, outputs: Sequence[CtHandle], packing: str, width: int, batch: int = 1):
    """Client-side decryption. Returns a label, or a list of labels for ``attr`` packing."""
    if packing in ("label", "thresh"):
        slots = decrypt(sk, outputs[0])
        return sum(int(slots[i]) << (width - 1 - i) for i in range(width))
    rows = [decrypt(sk, c) for c in outputs]
    labels = [sum(int(rows[j][slot]) << j for j in range(width)) for slot in range(batch)]
    return labels if packing == "attr" else labels[0]
