"""
Sixteen inputs for the price of one
===================================

With attribute packing, slot j of every ciphertext belongs to input j.
"""
import random

from pdte import BINARY, Evaluator, HeParams, classify_plain, decode_bin, encrypt_input_bin, keygen, pdte_bin_run, random_tree

rng = random.Random(3)
tree = random_tree(5, 8, 4, seed=rng)
batch = [[rng.randrange(256) for _ in range(4)] for _ in range(16)]

kt = keygen(HeParams(BINARY, slots=16, levels=32, seed=3))
ev = Evaluator(kt.ek, kt.pk)

outs = pdte_bin_run(tree, ev, encrypt_input_bin(kt.pk, batch, 8, "attr"), "attr")
batched = ev.counter.mul
labels = decode_bin(kt.sk, outs, "attr", tree.label_bits, 16)

ev.counter.reset()
pdte_bin_run(tree, ev, encrypt_input_bin(kt.pk, batch[0], 8), "none")
single = ev.counter.mul

print("encrypted:", labels)
print("plaintext:", [classify_plain(tree, x) for x in batch])
print(f"mults for 16 inputs: {batched}, for one input: {single}")
