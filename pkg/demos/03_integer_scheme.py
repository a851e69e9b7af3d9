"""
Integer encodings and path marks
================================

Each integer becomes a 0-encoding and a 1-encoding. Comparing them gives
a mark that is 0 on the taken edge; a leaf whose marks are all 0 is the
answer. The server masks every leaf and adds the label, so the client
sees one value in the label range and noise elsewhere.
"""
import random

from pdte import (INTEGER, Evaluator, HeParams, classify_plain, client_decode_int, decrypt_int_results,
                  encode01, encrypt_input_int, keygen, pdte_int_run, random_tree)

rng = random.Random(5)

e = encode01(6, 3, rng)
print("6 as 1-encoding:", e.v1)
print("5 as 0-encoding:", encode01(5, 3, rng).v0)   # exactly one position matches

tree = random_tree(4, 12, 3, seed=rng)
x = [rng.randrange(2**12) for _ in range(3)]
kt = keygen(HeParams(INTEGER, slots=8, levels=16, seed=5))
ev = Evaluator(kt.ek, kt.pk)

outs = pdte_int_run(tree, ev, encrypt_input_int(kt.pk, x, 12, rng), pack_output=True, rng=rng)
values = decrypt_int_results(kt.sk, outs, len(tree.leaves), packed=True)
print(f"{len(tree.leaves)} leaves in {len(outs)} ciphertexts, depth {max(c.depth for c in outs)}")
print("decrypted:", values)
print("label:", client_decode_int(values, tree.params.k), "expected:", classify_plain(tree, x))
