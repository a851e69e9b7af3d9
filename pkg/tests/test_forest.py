import random

import pytest

from pdte.binary import encrypt_input_bin
from pdte.circuits import from_bits
from pdte.forest import (
    ForestModel,
    argmax_plain,
    decode_forest,
    forest_argmax,
    forest_majority,
    frequencies_plain,
    load_forest,
    majority_plain,
    random_forest,
    save_forest,
)
from pdte.he import BINARY, decrypt
from pdte.tree import ModelError, build_tree, classify_plain, random_tree, save_model

from .conftest import make_keys


def constant_tree(label, k):
    return build_tree((0, 1, (label, label)), 1, 4, n_labels=k)


def forest_of(labels, k):
    return ForestModel([constant_tree(c, k) for c in labels])


@pytest.fixture(scope="module")
def keys():
    return make_keys(BINARY, slots=4, levels=64)


def run(forest, keys, fn, x=(3,), **kw):
    kt, ev = keys
    inp = encrypt_input_bin(kt.pk, list(x), forest.bits)
    return decode_forest(kt.sk, fn(forest, ev, inp, **kw), forest)


def test_majority_two_of_three(keys):
    f = forest_of([2, 1, 2], 3)
    assert majority_plain(f, [3]) == 2
    assert run(f, keys, forest_majority) == 2


def test_argmax_three_one_zero(keys):
    f = forest_of([0, 1, 0, 0], 3)
    assert frequencies_plain(f, [3]) == [3, 1, 0]
    assert run(f, keys, forest_argmax) == 0


def test_single_tree_is_plain_pdte(keys):
    rng = random.Random(1)
    t = random_tree(4, 6, 2, n_labels=5, seed=rng)
    f = ForestModel([t])
    for _ in range(10):
        x = [rng.randrange(64) for _ in range(2)]
        assert run(f, keys, forest_majority, x) == classify_plain(t, x)
        assert run(f, keys, forest_argmax, x) == classify_plain(t, x)


def test_single_label(keys):
    f = forest_of([0, 0], 1)
    assert run(f, keys, forest_argmax) == 0
    assert run(f, keys, forest_majority) == 0


def test_explicit_threshold(keys):
    f = forest_of([1, 1, 2, 2, 2], 3)
    assert run(f, keys, forest_majority, threshold=3) == 2
    with pytest.raises(ValueError):
        run(f, keys, forest_majority, threshold=6)


def test_tie_behaviour_is_documented(keys):
    # two labels reach t = 2 of N = 4: the result is the XOR of their encodings
    f = forest_of([1, 1, 2, 2], 4)
    assert majority_plain(f, [3]) is None
    assert run(f, keys, forest_majority) == 1 ^ 2
    # equal maxima: no label beats every other, so nothing is selected
    assert argmax_plain(f, [3]) is None
    assert run(f, keys, forest_argmax) == 0


def test_random_tie_free_forests(keys):
    rng = random.Random(2)
    done = {"maj": 0, "arg": 0}
    while min(done.values()) < 40:
        f = random_forest(rng.randint(1, 7), 4, 6, 3, rng.randint(2, 8), seed=rng)
        x = [rng.randrange(64) for _ in range(3)]
        m, a = majority_plain(f, x), argmax_plain(f, x)
        if m is not None:
            assert run(f, keys, forest_majority, x) == m
            done["maj"] += 1
        if a is not None:
            assert run(f, keys, forest_argmax, x) == a
            done["arg"] += 1


def test_debug_frequencies_sum_to_n(keys):
    kt, ev = keys
    rng = random.Random(3)
    for _ in range(10):
        f = random_forest(rng.randint(1, 7), 3, 5, 2, rng.randint(2, 6), seed=rng)
        x = [rng.randrange(32) for _ in range(2)]
        trace = {}
        forest_argmax(f, ev, encrypt_input_bin(kt.pk, x, 5), trace=trace)
        freq = [from_bits([int(decrypt(kt.sk, b)[0]) for b in fr]) for fr in trace["freq"]]
        assert freq == frequencies_plain(f, x) and sum(freq) == f.size


def test_threaded_trees(keys):
    f = forest_of([2, 1, 2], 3)
    assert run(f, keys, forest_majority, threads=3) == 2


def test_wide_labels_without_enough_slots():
    keys = make_keys(BINARY, slots=1)
    f = forest_of([5, 5, 1], 8)
    assert run(f, keys, forest_majority) == 5


def test_forest_file_round_trip():
    f = random_forest(3, 3, 4, 2, 4, seed=4)
    text = save_forest(f)
    assert text.count("---\n") == 3
    again = load_forest(text)
    assert [save_model(t) for t in again.trees] == [save_model(t) for t in f.trees]


def test_forest_file_errors():
    f = random_forest(2, 3, 4, 2, 4, seed=5)
    text = save_forest(f)
    with pytest.raises(ModelError):
        load_forest("{}\n---\n" + text.split("---\n", 1)[1])
    with pytest.raises(ModelError):
        load_forest(text.replace('"trees": 2', '"trees": 3'))
    with pytest.raises(ModelError):
        load_forest(text.replace('"labels": 4}', '"labels": 5}'))  # header disagrees


def test_trees_must_agree():
    with pytest.raises(ModelError):
        ForestModel([constant_tree(0, 2), constant_tree(0, 3)])
    with pytest.raises(ModelError):
        ForestModel([])
