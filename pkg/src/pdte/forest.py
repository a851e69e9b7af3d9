"""Random forests on top of the binary instantiation.

Every tree is classified with :func:`~pdte.binary.pdte_bin_run` into an
encrypted label (bit vector). Per label, equality bits against all trees are
summed by :func:`~pdte.circuits.she_fadder` into an encrypted frequency, and
one label is selected without decryption, either as the label whose
frequency reaches a threshold or as the label beating all others.

Ties are not resolved: with several qualifying labels the result is the XOR
of their encodings, and with none it is 0. Callers that care should stick to
tie-free forests; the plaintext oracles below return ``None`` on ties.
"""
from __future__ import annotations

import json
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .binary import PATH_ALGS, EncryptedInputBin, decode_bin, pdte_bin_run
from .circuits import bitlen, she_cmp, she_equal, she_fadder, to_bits
from .he import CtHandle, Evaluator, SecretKey
from .tree import ModelError, TreeModel, classify_plain, load_model, random_tree, save_model

FOREST_FORMAT = "pdte-forest"


@dataclass
class ForestModel:
    trees: list[TreeModel]

    def __post_init__(self):
        if not self.trees:
            raise ModelError("a forest needs at least one tree")
        first = self.trees[0].params
        for t in self.trees[1:]:
            p = t.params
            if (p.n, p.mu, p.k) != (first.n, first.mu, first.k):
                raise ModelError("trees disagree on attributes, bit length or label count")

    @property
    def size(self) -> int:
        return len(self.trees)

    @property
    def n_attributes(self) -> int:
        return self.trees[0].params.n

    @property
    def bits(self) -> int:
        return self.trees[0].params.mu

    @property
    def n_labels(self) -> int:
        return self.trees[0].params.k

    @property
    def label_bits(self) -> int:
        return self.trees[0].label_bits


def random_forest(
    size: int, d: int, mu: int, n_attributes: int = 4, n_labels: int = 3, seed=None
) -> ForestModel:
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    trees = [
        random_tree(rng.randint(1, d), mu, n_attributes, n_labels=n_labels, seed=rng) for _ in range(size)
    ]
    return ForestModel(trees)


# --------------------------------------------------------------------------
# plaintext oracles


def frequencies_plain(forest: ForestModel, x: Sequence[int]) -> list[int]:
    votes = Counter(classify_plain(t, x) for t in forest.trees)
    return [votes[i] for i in range(forest.n_labels)]


def majority_plain(forest: ForestModel, x: Sequence[int], threshold: Optional[int] = None) -> Optional[int]:
    """The unique label voted by at least ``threshold`` trees, else ``None``."""
    t = (forest.size + 1) // 2 if threshold is None else threshold
    hits = [i for i, f in enumerate(frequencies_plain(forest, x)) if f >= t]
    return hits[0] if len(hits) == 1 else None


def argmax_plain(forest: ForestModel, x: Sequence[int]) -> Optional[int]:
    """The label with a strictly unique maximal vote count, else ``None``."""
    freq = frequencies_plain(forest, x)
    top = max(freq)
    return freq.index(top) if freq.count(top) == 1 else None


# --------------------------------------------------------------------------
# encrypted voting


def _tree_outputs(forest, ev, inp, path_alg, threads):
    def run(tree):
        return pdte_bin_run(tree, ev, inp, packing="none", path_alg=path_alg)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(run, forest.trees))
    return [run(t) for t in forest.trees]


def _frequencies(forest, ev, outputs) -> list[list[CtHandle]]:
    w = forest.label_bits
    freq = []
    for i in range(forest.n_labels):
        label = [ev.enc(b) for b in to_bits(i, w)]
        hits = [she_equal(ev, r, label) for r in outputs]
        freq.append(she_fadder(ev, hits))
    return freq


def _select(forest, ev, flags: Sequence[CtHandle]) -> list[CtHandle]:
    """``sum(e_i * label_i)``: packed MSB first in slot 0 if it fits, else one handle per bit."""
    w = forest.label_bits
    if w <= ev.ctx.s:
        terms = [ev.mul(e, ev.enc_packed(to_bits(i, w)[::-1])) for i, e in enumerate(flags)]
        return [ev.sum(terms)]
    return [ev.sum(ev.mul(e, ev.enc((i >> j) & 1)) for i, e in enumerate(flags)) for j in range(w)]


def forest_majority(
    forest: ForestModel,
    ev: Evaluator,
    inp: EncryptedInputBin,
    threshold: Optional[int] = None,
    path_alg: str = "dag",
    threads: int = 1,
    trace: Optional[dict] = None,
) -> list[CtHandle]:
    """Encrypted label voted by at least ``threshold`` trees (default ``ceil(N/2)``).

    ``trace``, when given, receives the intermediate handles (``freq`` and
    ``flags``) so tests can inspect them with the secret key.
    """
    if path_alg not in PATH_ALGS:
        raise ValueError(f"unknown path algorithm {path_alg!r}")
    N = forest.size
    t = (N + 1) // 2 if threshold is None else threshold
    if not 0 <= t <= N:
        raise ValueError(f"threshold {t} outside [0, {N}]")
    outputs = _tree_outputs(forest, ev, inp, path_alg, threads)
    freq = _frequencies(forest, ev, outputs)
    tbits = [ev.enc(b) for b in to_bits(t, bitlen(N))]
    flags = [ev.add(she_cmp(ev, f, tbits)[1], 1) for f in freq]  # [f >= t]
    if trace is not None:
        trace.update(freq=freq, flags=flags)
    return _select(forest, ev, flags)


def forest_argmax(
    forest: ForestModel,
    ev: Evaluator,
    inp: EncryptedInputBin,
    path_alg: str = "dag",
    threads: int = 1,
    trace: Optional[dict] = None,
) -> list[CtHandle]:
    """Encrypted label whose frequency strictly exceeds every other one."""
    if path_alg not in PATH_ALGS:
        raise ValueError(f"unknown path algorithm {path_alg!r}")
    k = forest.n_labels
    outputs = _tree_outputs(forest, ev, inp, path_alg, threads)
    freq = _frequencies(forest, ev, outputs)
    beats = [[ev.const(1) if i == j else None for j in range(k)] for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            gt, lt = she_cmp(ev, freq[i], freq[j])
            beats[i][j], beats[j][i] = gt, lt
    wins = [she_fadder(ev, row) for row in beats]
    kbits = [ev.enc(b) for b in to_bits(k, bitlen(k))]
    flags = [she_equal(ev, r, kbits) for r in wins]
    if trace is not None:
        trace.update(freq=freq, wins=wins, flags=flags)
    return _select(forest, ev, flags)


def decode_forest(sk: SecretKey, outputs: Sequence[CtHandle], forest: ForestModel) -> int:
    packing = "label" if len(outputs) == 1 and forest.label_bits > 1 else "none"
    return decode_bin(sk, outputs, packing, forest.label_bits)


# --------------------------------------------------------------------------
# file format: one header line, then model documents separated by "---"


def save_forest(forest: ForestModel) -> str:
    header = {
        "format": FOREST_FORMAT,
        "trees": forest.size,
        "attributes": forest.n_attributes,
        "bits": forest.bits,
        "labels": forest.n_labels,
    }
    parts = [json.dumps(header) + "\n"] + [save_model(t) for t in forest.trees]
    return "---\n".join(parts)


def load_forest(text: str) -> ForestModel:
    parts = text.split("---\n")
    try:
        header = json.loads(parts[0])
    except json.JSONDecodeError as exc:
        raise ModelError(f"bad forest header: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != FOREST_FORMAT:
        raise ModelError("not a forest file")
    trees = [load_model(p) for p in parts[1:]]
    if len(trees) != header.get("trees"):
        raise ModelError(f"header announces {header.get('trees')} trees, found {len(trees)}")
    forest = ForestModel(trees)
    if (forest.n_attributes, forest.bits, forest.n_labels) != (
        header.get("attributes"),
        header.get("bits"),
        header.get("labels"),
    ):
        raise ModelError("trees disagree with the forest header")
    return forest
