"""Operation accounting: measured cost reports, closed-form predictions, bench runs."""
from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

from .arith import client_decode_int, decrypt_int_results, encrypt_input_int, pdte_int_run
from .binary import decode_bin, encrypt_input_bin, pdte_bin_run
from .circuits import bitlen
from .he import INTEGER, BINARY, CtHandle, Evaluator, HeParams, keygen
from .tree import TreeModel, classify_plain, random_tree

SCHEMES = ("bin", "int")


@dataclass
class CostReport:
    mult_count: Optional[int] = None
    add_count: Optional[int] = None
    comparison_count: Optional[int] = None
    max_depth: Optional[int] = None
    output_ctxt_count: Optional[int] = None
    amortized_per_slot: Optional[float] = None

    @classmethod
    def measure(cls, ev: Evaluator, outputs: Sequence[CtHandle], batch: int = 1) -> "CostReport":
        c = ev.counter.snapshot()
        return cls(
            mult_count=c["mul"],
            add_count=c["add"],
            comparison_count=c["cmp"],
            max_depth=max((o.depth for o in outputs), default=0),
            output_ctxt_count=len(outputs),
            amortized_per_slot=c["mul"] / batch,
        )

    def to_text(self) -> str:
        return "".join(f"{k}={'-' if v is None else v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "CostReport":
        kinds = {f.name: (float if f.name == "amortized_per_slot" else int) for f in fields(cls)}
        values = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, raw = line.partition("=")
            if key not in kinds:
                raise ValueError(f"unknown report field {key!r}")
            values[key] = None if raw == "-" else kinds[key](raw)
        return cls(**values)


def cost_predict(
    scheme: str,
    mu: int,
    d: int,
    packing: str = "none",
    slots: int = 1,
    leaves: Optional[int] = None,
    label_bits: Optional[int] = None,
) -> CostReport:
    """Closed-form depth and output size; the counts are left unset.

    ``leaves`` defaults to ``2**d`` and ``label_bits`` to ``d`` (complete trees).
    For the integer scheme, ``packing`` other than ``"none"`` means packed output.
    """
    if scheme == "bin":
        depth = bitlen(mu - 1) + bitlen(d - 1) + 2
        outputs = 1 if packing in ("label", "thresh") else (d if label_bits is None else label_bits)
    elif scheme == "int":
        depth = bitlen(mu - 1) + 1
        n = 2**d if leaves is None else leaves
        outputs = math.ceil(n / slots) if packing != "none" else n
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return CostReport(max_depth=depth, output_ctxt_count=outputs)


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    n: int  # attributes
    d: int  # depth
    m: int  # decision nodes


DATASETS = {
    s.name: s
    for s in (
        DatasetSpec("heart-disease", 13, 3, 5),
        DatasetSpec("housing", 13, 13, 92),
        DatasetSpec("spambase", 57, 17, 58),
        DatasetSpec("artificial", 16, 10, 500),
    )
}


@dataclass
class BenchResult:
    model: TreeModel
    report: CostReport
    predicted: CostReport
    label: object
    expected: object

    @property
    def correct(self) -> bool:
        return self.label == self.expected


def bench(
    shape: DatasetSpec,
    scheme: str = "bin",
    mu: int = 16,
    packing: str = "none",
    path_alg: str = "dag",
    slots: int = 1,
    levels: int = 64,
    seed: int = 0,
    threads: int = 1,
) -> BenchResult:
    """Classify one random input on a random tree of the given shape and count.

    Deterministic for a fixed ``seed``. For ``scheme="int"``, ``packing`` may be
    ``"none"`` or ``"output"`` (packed results).
    """
    rng = random.Random(seed)
    model = random_tree(shape.d, mu, shape.n, m=shape.m, seed=rng)
    p = model.params
    if scheme == "bin":
        kt = keygen(HeParams(BINARY, slots, levels, seed=seed))
        ev = Evaluator(kt.ek, kt.pk)
        batch = slots if packing == "attr" else 1
        xs = [[rng.randrange(2**mu) for _ in range(p.n)] for _ in range(batch)]
        inp = encrypt_input_bin(kt.pk, xs if packing == "attr" else xs[0], mu, packing)
        outs = pdte_bin_run(model, ev, inp, packing, path_alg, threads)
        label = decode_bin(kt.sk, outs, packing, model.label_bits, batch)
        expected = [classify_plain(model, x) for x in xs]
        if packing != "attr":
            expected = expected[0]
        predicted = cost_predict("bin", mu, p.d, packing, slots, label_bits=model.label_bits)
    elif scheme == "int":
        kt = keygen(HeParams(INTEGER, slots, levels, seed=seed))
        ev = Evaluator(kt.ek, kt.pk)
        batch = 1
        x = [rng.randrange(2**mu) for _ in range(p.n)]
        pack_output = packing != "none"
        inp = encrypt_input_int(kt.pk, x, mu, rng)
        outs = pdte_int_run(model, ev, inp, pack_output=pack_output)
        values = decrypt_int_results(kt.sk, outs, len(model.leaves), pack_output)
        label = client_decode_int(values, p.k)
        expected = classify_plain(model, x)
        predicted = cost_predict("int", mu, p.d, "output" if pack_output else "none", slots, len(model.leaves))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return BenchResult(model, CostReport.measure(ev, outs, batch), predicted, label, expected)
