"""Command-line front end: ``pdte keygen|encrypt|eval|decrypt|bench|report``.

Every verb prints ``key=value`` lines. The first four compose into one
round trip through files::

    pdte keygen  --scheme bin --keys k/ --seed 1
    pdte encrypt --keys k/ --bits 8 --input 3,200,17 --offline-dir run/
    pdte eval    --keys k/ --model tree.json --offline-dir run/
    pdte decrypt --keys k/ --labels 8 --offline-dir run/
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .binary import PACKINGS, PATH_ALGS
from .circuits import bitlen
from .cost import DATASETS, DatasetSpec, bench, cost_predict
from .he import BINARY, INTEGER, EvalKey, HEError, HeParams, KeyTriple, PublicKey, SecretKey, context_from_text, keygen, params_to_text
from .protocol import Client, ClassifyRequest, ProtocolError, Server
from .tree import ModelError, load_model

KEY_FILES = {"public": "public.key", "secret": "secret.key", "eval": "eval.key"}
REQUEST_FILE = "request.bin"
RESPONSE_FILE = "response.bin"


class CliError(Exception):
    pass


def _emit(**pairs) -> None:
    for k, v in pairs.items():
        print(f"{k}={v}")


def _load_keys(directory: str, *roles: str):
    ctx = None
    for role in roles:
        path = Path(directory) / KEY_FILES[role]
        if not path.exists():
            raise CliError(f"missing key file {path}")
        text = path.read_text()
        if f'"role": "{role}"' not in text:
            raise CliError(f"{path} is not a {role} key")
        c = context_from_text(text)
        if ctx is not None and c.id != ctx.id:
            raise CliError("key files belong to different contexts")
        ctx = ctx or c
    return ctx


def _message_path(args, explicit: Optional[str], default_name: str, writing: bool) -> Path:
    if explicit:
        return Path(explicit)
    if args.offline_dir:
        d = Path(args.offline_dir)
        if writing:
            d.mkdir(parents=True, exist_ok=True)
        return d / default_name
    raise CliError(f"give --offline-dir or an explicit path for {default_name}")


def _parse_input(text: str) -> list:
    """``1,2,3`` is one vector; ``1,2,3;4,5,6`` is a batch for attribute packing."""
    if Path(text).is_file():
        text = Path(text).read_text().strip()
    rows = [[int(a) for a in row.split(",") if a.strip()] for row in text.split(";") if row.strip()]
    if not rows:
        raise CliError("empty input")
    return rows


# --------------------------------------------------------------------------
# verbs


def _check_packing(args) -> None:
    if args.scheme == "bin" and args.packing == "output":
        raise CliError("--packing output is for the integer scheme; use label")
    if args.scheme == "int" and args.packing not in ("none", "output"):
        raise CliError(f"--packing {args.packing} is for the binary scheme; use output")


def cmd_keygen(args) -> None:
    mode = BINARY if args.scheme == "bin" else INTEGER
    kt = keygen(HeParams(mode, args.slots, args.levels, seed=args.seed))
    out = Path(args.keys)
    out.mkdir(parents=True, exist_ok=True)
    for role, name in KEY_FILES.items():
        (out / name).write_text(params_to_text(kt.ctx, role))
    _emit(scheme=args.scheme, context=kt.ctx.id.hex(), slots=args.slots, levels=args.levels, keys=out)


def cmd_encrypt(args) -> None:
    ctx = _load_keys(args.keys, "public", "secret", "eval")
    keys = KeyTriple(PublicKey(ctx), SecretKey(ctx), EvalKey(ctx))
    args.scheme = "bin" if ctx.binary else "int"
    _check_packing(args)
    rows = _parse_input(args.input)
    x = rows if args.packing == "attr" else rows[0]
    if args.packing != "attr" and len(rows) > 1:
        raise CliError("several input vectors need --packing attr")
    packing = args.packing
    client = Client(keys, len(rows[0]), args.bits, 2, packing, args.pack_encoding, args.tie_break, seed=args.seed)
    data = client.build_request(x).to_bytes()
    path = _message_path(args, args.request, REQUEST_FILE, writing=True)
    path.write_bytes(data)
    _emit(request=path, bytes=len(data), vectors=len(rows))


def cmd_eval(args) -> None:
    # the server side loads the public and evaluation keys only
    ctx = _load_keys(args.keys, "public", "eval")
    if not args.model:
        raise CliError("eval needs --model")
    model = load_model(Path(args.model).read_text())
    server = Server(model, PublicKey(ctx), EvalKey(ctx), args.path_alg, args.threads, seed=args.seed)
    req_path = _message_path(args, args.request, REQUEST_FILE, writing=False)
    resp = server.handle(ClassifyRequest.from_bytes(req_path.read_bytes()))
    data = resp.to_bytes()
    out = _message_path(args, args.response, RESPONSE_FILE, writing=True)
    out.write_bytes(data)
    _emit(response=out, bytes=len(data), results=resp.result_count)
    sys.stdout.write(resp.report)


def cmd_decrypt(args) -> None:
    ctx = _load_keys(args.keys, "public", "secret", "eval")
    keys = KeyTriple(PublicKey(ctx), SecretKey(ctx), EvalKey(ctx))
    if args.labels is None:
        raise CliError("decrypt needs --labels")
    path = _message_path(args, args.response, RESPONSE_FILE, writing=False)
    from .protocol import INT_PACK_OUTPUT, ClassifyResponse

    resp = ClassifyResponse.from_bytes(path.read_bytes())
    h = resp.header
    if ctx.binary:
        packing = PACKINGS[h.packing]
    else:
        packing = "output" if h.packing & INT_PACK_OUTPUT else "none"
    client = Client(keys, h.n, h.mu, args.labels, packing)
    label = client.read_response(resp)
    if isinstance(label, list):
        _emit(labels=",".join(map(str, label)))
    else:
        _emit(label=label)


def _shape(args) -> DatasetSpec:
    if args.dataset:
        if args.dataset not in DATASETS:
            raise CliError(f"unknown dataset {args.dataset!r}; choose from {', '.join(DATASETS)}")
        return DATASETS[args.dataset]
    if args.depth is None:
        raise CliError("give --dataset or --depth")
    m = args.nodes if args.nodes is not None else args.depth
    return DatasetSpec("custom", args.attributes, args.depth, m)


def _bench(args):
    shape = _shape(args)
    _check_packing(args)
    res = bench(shape, args.scheme, args.bits, args.packing, args.path_alg, args.slots, args.levels, args.seed, args.threads)
    return shape, res


def cmd_bench(args) -> None:
    shape, res = _bench(args)
    _emit(dataset=shape.name, scheme=args.scheme, n=shape.n, d=res.model.depth, m=res.model.params.m, mu=args.bits)
    sys.stdout.write(res.report.to_text())
    _emit(predicted_depth=res.predicted.max_depth, correct=str(res.correct).lower())


def cmd_report(args) -> None:
    if args.formula:
        if args.depth is None and not args.dataset:
            raise CliError("report --formula needs --depth or --dataset")
        d = args.depth if args.depth is not None else DATASETS[args.dataset].d
        mu = args.bits
        pred = cost_predict(args.scheme, mu, d, args.packing, args.slots)
        if args.scheme == "bin":
            formula = f"|mu-1|+|d-1|+2 = {bitlen(mu - 1)}+{bitlen(d - 1)}+2"
        else:
            formula = f"|mu-1|+1 = {bitlen(mu - 1)}+1"
        _emit(scheme=args.scheme, mu=mu, d=d, formula=formula, predicted_depth=pred.max_depth)
        if args.no_measure:
            return
    shape, res = _bench(args)
    _emit(measured_depth=res.report.max_depth, predicted_depth=res.predicted.max_depth,
          within_bound=str(res.report.max_depth <= res.predicted.max_depth).lower())


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scheme", choices=("bin", "int"), default="bin")
    common.add_argument("--packing", choices=PACKINGS + ("output",), default="none",
                        help="bin: none|label|attr|thresh; int: none|output")
    common.add_argument("--path-alg", choices=PATH_ALGS, default="dag")
    common.add_argument("--bits", type=int, default=16, metavar="MU")
    common.add_argument("--depth", type=int, metavar="D")
    common.add_argument("--slots", type=int, default=1, metavar="S")
    common.add_argument("--levels", type=int, default=64, metavar="L")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--offline-dir", metavar="PATH")
    common.add_argument("--keys", default="keys", metavar="DIR")

    parser = argparse.ArgumentParser(prog="pdte", description="Non-interactive private decision tree evaluation.")
    sub = parser.add_subparsers(dest="verb", required=True)

    sub.add_parser("keygen", parents=[common], help="generate a key triple")

    p = sub.add_parser("encrypt", parents=[common], help="encrypt an input into a request")
    p.add_argument("--input", required=True, help="comma-separated values, ';' between batch vectors, or a file")
    p.add_argument("--request", help="request file (default: <offline-dir>/request.bin)")
    p.add_argument("--pack-encoding", action="store_true", help="integer scheme: one ciphertext per encoding")
    p.add_argument("--tie-break", choices=("offset", "append"), default="offset")

    p = sub.add_parser("eval", parents=[common], help="server: evaluate a request on a model")
    p.add_argument("--model")
    p.add_argument("--request")
    p.add_argument("--response")

    p = sub.add_parser("decrypt", parents=[common], help="client: decrypt and decode a response")
    p.add_argument("--response")
    p.add_argument("--labels", type=int, metavar="K", help="number of class labels")

    for verb, text in (("bench", "cost report for one random model"), ("report", "predicted vs measured depth")):
        p = sub.add_parser(verb, parents=[common], help=text)
        p.add_argument("--dataset", choices=sorted(DATASETS))
        p.add_argument("--nodes", type=int, metavar="M", help="decision nodes (default: D)")
        p.add_argument("--attributes", type=int, default=4, metavar="N")
        if verb == "report":
            p.add_argument("--formula", action="store_true", help="print the closed-form depth")
            p.add_argument("--no-measure", action="store_true", help="skip the measured run")
    return parser


COMMANDS = {
    "keygen": cmd_keygen,
    "encrypt": cmd_encrypt,
    "eval": cmd_eval,
    "decrypt": cmd_decrypt,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.verb](args)
    except (CliError, ProtocolError, ModelError, HEError, ValueError, OSError) as exc:
        print(f"error={exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
