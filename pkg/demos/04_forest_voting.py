"""
Private random-forest voting
============================

Every tree is evaluated on the same encrypted input; the votes are
counted under encryption and only the winning label is revealed.
When no label wins (a tie, or no majority) the result decodes to 0.
"""
import random

from pdte import (BINARY, Evaluator, HeParams, argmax_plain, decode_forest, encrypt_input_bin, forest_argmax,
                  forest_majority, keygen, majority_plain, random_forest)
from pdte.forest import frequencies_plain

rng = random.Random(11)
forest = random_forest(5, 3, 6, 3, n_labels=4, seed=rng)
kt = keygen(HeParams(BINARY, slots=1, levels=40, seed=11))
ev = Evaluator(kt.ek, kt.pk)

for _ in range(5):
    x = [rng.randrange(64) for _ in range(3)]
    inp = encrypt_input_bin(kt.pk, x, 6)
    maj = decode_forest(kt.sk, forest_majority(forest, ev, inp), forest)
    top = decode_forest(kt.sk, forest_argmax(forest, ev, inp), forest)
    print(f"x={x} votes={frequencies_plain(forest, x)} majority={maj} ({majority_plain(forest, x)}) "
          f"argmax={top} ({argmax_plain(forest, x)})")
