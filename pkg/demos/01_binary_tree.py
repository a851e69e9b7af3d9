"""
Classifying an encrypted input, bit by bit
==========================================

A small tree, an input encrypted bitwise, and the three ways of
multiplying decision bits down to the leaves.
"""
from pdte import (BINARY, Evaluator, HeParams, build_tree, classify_plain, complete_tree, compute_dag,
                  decode_bin, encrypt_input_bin, keygen, pdte_bin_run)

# (attribute, threshold, (left, right)); ints are leaf labels
spec = (0, 40, ((1, 9, (0, 1)), (1, 3, (2, 3))))
tree = build_tree(spec, n_attributes=2, bits=8)
x = [57, 2]
print("plaintext label:", classify_plain(tree, x))

kt = keygen(HeParams(BINARY, slots=4, levels=24, seed=1))
ev = Evaluator(kt.ek, kt.pk)   # the server never sees kt.sk
inp = encrypt_input_bin(kt.pk, x, mu=8)

compute_dag(tree)
for alg in ("naive", "logdepth", "dag"):
    ev.counter.reset()
    outs = pdte_bin_run(tree, ev, inp, "none", alg)
    label = decode_bin(kt.sk, outs, "none", tree.label_bits)
    print(f"{alg:9s} label={label} mults={ev.counter.mul} depth={max(c.depth for c in outs)}")

# on a full tree the shared prefixes start to pay off
big = complete_tree(6, 8, 2, seed=1)
compute_dag(big)
big_inp = encrypt_input_bin(kt.pk, x, 8)
for alg in ("logdepth", "dag"):
    ev.counter.reset()
    pdte_bin_run(big, ev, big_inp, "none", alg)
    print(f"depth-6 tree, {alg:8s} mults={ev.counter.mul}")

# one ciphertext per label bit unless the label is packed
outs = pdte_bin_run(tree, ev, encrypt_input_bin(kt.pk, x, 8, "label"), "label")
print("label packing:", len(outs), "ciphertext ->", decode_bin(kt.sk, outs, "label", tree.label_bits))
