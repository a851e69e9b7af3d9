import random

import pytest

from pdte.binary import (
    BinaryEvaluation,
    compute_dag,
    decode_bin,
    encrypt_input_bin,
    pack_thresholds,
    pdte_bin_run,
)
from pdte.circuits import bitlen
from pdte.he import BINARY, CapacityError, decrypt
from pdte.tree import build_tree, classify_plain, complete_tree, random_tree

from .conftest import make_keys

ALGS = ("naive", "logdepth", "dag")


def chain(levels):
    """Spine going right; every left child is a leaf labelled by its level."""
    spec = levels
    for lvl in range(levels, 0, -1):
        spec = (0, lvl, (lvl - 1, spec))
    return build_tree(spec, 1, 8)


def spine(model):
    v, out = model.root, []
    while not v.is_leaf:
        v = v.right
        out.append(v)
    return out  # out[i] sits at level i + 1


def leaf_bits(kt, run, model):
    return [int(decrypt(kt.sk, run.cmp[v.id])[0]) for v in model.leaves]


def run_stages(model, ev, inp, alg, packing="none"):
    run = BinaryEvaluation(model, ev, packing)
    run.eval_node(inp)
    run.eval_path(alg)
    return run


def test_decision_bits_stump():
    kt, ev = make_keys()
    t = build_tree((0, 5, (0, 1)), 1, 4)
    for x, right in ((7, 1), (5, 1), (3, 0)):
        run = BinaryEvaluation(t, ev)
        run.eval_node(encrypt_input_bin(kt.pk, [x], 4))
        assert int(decrypt(kt.sk, run.cmp[t.root.right.id])[0]) == right
        assert int(decrypt(kt.sk, run.cmp[t.root.left.id])[0]) == 1 - right


def test_input_shape_checked():
    kt, ev = make_keys()
    t = build_tree((0, 5, (0, 1)), 1, 4)
    with pytest.raises(ValueError):
        BinaryEvaluation(t, ev).eval_node(encrypt_input_bin(kt.pk, [1], 5))


@pytest.mark.parametrize("alg", ALGS)
def test_one_hot_leaves(alg):
    rng = random.Random(alg)
    kt, ev = make_keys()
    for _ in range(100):
        t = random_tree(rng.randint(1, 6), 6, 3, seed=rng)
        x = [rng.randrange(64) for _ in range(3)]
        bits = leaf_bits(kt, run_stages(t, ev, encrypt_input_bin(kt.pk, x, 6), alg), t)
        assert sum(bits) == 1
        assert t.leaves[bits.index(1)].clabel == classify_plain(t, x)


def test_path_algorithms_agree():
    rng = random.Random(8)
    kt, ev = make_keys()
    for _ in range(100):
        mu = rng.randint(1, 16)
        t = random_tree(rng.randint(1, 8), mu, 3, seed=rng)
        inp = encrypt_input_bin(kt.pk, [rng.randrange(2**mu) for _ in range(3)], mu)
        results = {alg: leaf_bits(kt, run_stages(t, ev, inp, alg), t) for alg in ALGS}
        assert results["naive"] == results["logdepth"] == results["dag"]


def test_d1_leaves_are_the_decision_bits():
    kt, ev = make_keys()
    t = build_tree((0, 5, (0, 1)), 1, 4)
    run = run_stages(t, ev, encrypt_input_bin(kt.pk, [9], 4), "naive")
    assert leaf_bits(kt, run, t) == [0, 1]


def test_logdepth_path_depth_bound():
    rng = random.Random(2)
    kt, ev = make_keys()
    for _ in range(50):
        mu, d = rng.randint(1, 16), rng.randint(1, 8)
        t = random_tree(d, mu, 2, seed=rng)
        run = run_stages(t, ev, encrypt_input_bin(kt.pk, [1, 2], mu), "logdepth")
        assert max(run.cmp[v.id].depth for v in t.leaves) <= bitlen(d - 1) + bitlen(mu - 1) + 1


# --- dependency DAG ------------------------------------------------------


def test_dag_chain_of_four():
    t = chain(4)
    compute_dag(t)
    a1, a2, a3, a4 = spine(t)
    assert a1.mdag == [] and a3.mdag == []
    assert a2.mdag == [a1]
    assert a4.mdag == [a2, a3]  # consumed last-in first: a3, then a2
    # off-spine leaves: level 2 -> a1, level 3 -> a2 (accumulated), level 4 like a4
    assert a1.left.mdag == [a1]
    assert a2.left.mdag == [a2]
    assert a3.left.mdag == [a2, a3]


def test_dag_chain_of_five():
    t = chain(5)
    compute_dag(t)
    a1, a2, a3, a4, a5 = spine(t)
    assert a5.mdag == [a4]
    assert a4.mdag == [a2, a3]
    assert a2.mdag == [a1]


def test_dag_depth_one_is_empty():
    t = complete_tree(1, 4, seed=0)
    compute_dag(t)
    assert t.dag_ready and all(v.mdag == [] for v in t.nodes)


def test_dag_lists_only_hold_ancestors():
    rng = random.Random(4)
    for _ in range(50):
        t = random_tree(rng.randint(1, 10), 4, seed=rng)
        compute_dag(t)
        for v in t.nodes:
            ancestors = set(map(id, t.path(v)[:-1]))
            assert all(id(w) in ancestors for w in v.mdag)


def test_dag_is_reusable():
    kt, ev = make_keys()
    t = complete_tree(5, 4, 2, seed=1)
    compute_dag(t)
    before = [list(v.mdag) for v in t.nodes]
    for x in ([1, 2], [15, 0], [7, 7]):
        run = run_stages(t, ev, encrypt_input_bin(kt.pk, x, 4), "dag")
        assert t.leaves[leaf_bits(kt, run, t).index(1)].clabel == classify_plain(t, x)
    assert [list(v.mdag) for v in t.nodes] == before


def test_dag_d2_one_multiplication_per_leaf():
    kt, ev = make_keys()
    t = complete_tree(2, 4, 1, seed=3)
    compute_dag(t)
    assert all(len(v.mdag) == 1 for v in t.leaves)
    run = BinaryEvaluation(t, ev)
    run.eval_node(encrypt_input_bin(kt.pk, [5], 4))
    base = {v.id: run.cmp[v.id].depth for v in t.leaves}
    ev.counter.reset()
    run.eval_path_precomp()
    assert ev.counter.mul == 4
    assert all(run.cmp[v.id].depth - base[v.id] <= 1 for v in t.leaves)


@pytest.mark.parametrize("d", [4, 6, 8])
def test_dag_shares_prefixes(d):
    kt, ev = make_keys()
    t = complete_tree(d, 4, 2, seed=d)
    compute_dag(t)
    inp = encrypt_input_bin(kt.pk, [3, 12], 4)
    counts, bits = {}, {}
    for alg in ("logdepth", "dag"):
        run = BinaryEvaluation(t, ev)
        run.eval_node(inp)
        ev.counter.reset()
        run.eval_path(alg)
        counts[alg] = ev.counter.mul
        bits[alg] = leaf_bits(kt, run, t)
    assert counts["dag"] < counts["logdepth"]
    assert bits["dag"] == bits["logdepth"]


# --- leaves, packings, end to end ---------------------------------------


def test_two_leaf_label():
    kt, ev = make_keys()
    t = build_tree((0, 5, (0, 1)), 1, 4)
    outs = pdte_bin_run(t, ev, encrypt_input_bin(kt.pk, [6], 4))
    assert len(outs) == 1 and decode_bin(kt.sk, outs, "none", t.label_bits) == 1


@pytest.mark.parametrize("alg", ALGS)
def test_complete_d6_oracle(alg):
    rng = random.Random(6)
    kt, ev = make_keys(BINARY, slots=8)
    for _ in range(10):
        t = complete_tree(6, 8, 3, seed=rng)
        x = [rng.randrange(256) for _ in range(3)]
        for packing, count in (("none", 6), ("label", 1), ("thresh", 1)):
            outs = pdte_bin_run(t, ev, encrypt_input_bin(kt.pk, x, 8, packing), path_alg=alg)
            assert len(outs) == count
            assert decode_bin(kt.sk, outs, packing, t.label_bits) == classify_plain(t, x)


def test_attribute_packing_matches_scalar_runs():
    rng = random.Random(5)
    s = 8
    kt, ev = make_keys(BINARY, slots=s)
    t = random_tree(5, 8, 3, seed=rng)
    xs = [[rng.randrange(256) for _ in range(3)] for _ in range(s)]
    ev.counter.reset()
    outs = pdte_bin_run(t, ev, encrypt_input_bin(kt.pk, xs, 8, "attr"))
    packed_mults = ev.counter.mul
    assert decode_bin(kt.sk, outs, "attr", t.label_bits, s) == [classify_plain(t, x) for x in xs]
    ev.counter.reset()
    pdte_bin_run(t, ev, encrypt_input_bin(kt.pk, xs[0], 8))
    assert ev.counter.mul == packed_mults


def test_threshold_groups():
    _, ev = make_keys(BINARY, slots=4)
    t = complete_tree(5, 6, 3, seed=9)
    groups = pack_thresholds(t, ev)
    for attr, gs in groups.items():
        m_i = sum(v.aindex == attr for v in t.decision_nodes)
        assert len(gs) == -(-m_i // 4)
        assert all(len(nodes) <= 4 and len(ybits) == 6 for nodes, ybits in gs)


def test_threshold_bits_equal_scalar_bits():
    rng = random.Random(10)
    kt, ev = make_keys(BINARY, slots=4)
    t = complete_tree(4, 6, 2, seed=rng)
    x = [rng.randrange(64), rng.randrange(64)]
    scalar = BinaryEvaluation(t, ev, "none")
    scalar.eval_node(encrypt_input_bin(kt.pk, x, 6))
    packed = BinaryEvaluation(t, ev, "thresh")
    packed.eval_node(encrypt_input_bin(kt.pk, x, 6, "thresh"))
    for v in t.nodes[1:]:
        assert decrypt(kt.sk, packed.cmp[v.id])[0] == decrypt(kt.sk, scalar.cmp[v.id])[0]


def test_label_packing_needs_slots():
    kt, ev = make_keys(BINARY, slots=2)
    t = complete_tree(3, 4, 1, seed=0)
    with pytest.raises(ValueError):
        pdte_bin_run(t, ev, encrypt_input_bin(kt.pk, [1], 4, "label"))


def test_threads_give_same_result():
    rng = random.Random(12)
    kt, ev = make_keys(BINARY, slots=1)
    t = random_tree(6, 8, 3, seed=rng)
    for _ in range(10):
        x = [rng.randrange(256) for _ in range(3)]
        for alg in ALGS:
            outs = pdte_bin_run(t, ev, encrypt_input_bin(kt.pk, x, 8), path_alg=alg, threads=4)
            assert decode_bin(kt.sk, outs, "none", t.label_bits) == classify_plain(t, x)


def test_total_depth_bound():
    rng = random.Random(13)
    kt, ev = make_keys(BINARY, slots=16)
    for _ in range(60):
        mu, d = rng.randint(1, 16), rng.randint(1, 8)
        t = random_tree(d, mu, 2, seed=rng)
        x = [rng.randrange(2**mu) for _ in range(2)]
        for packing in ("none", "label", "thresh"):
            for alg in ("logdepth", "dag"):
                outs = pdte_bin_run(t, ev, encrypt_input_bin(kt.pk, x, mu, packing), packing, alg)
                assert max(o.depth for o in outs) <= bitlen(mu - 1) + bitlen(d - 1) + 2


def test_mults_grow_like_d_2d():
    kt, ev = make_keys()
    ratios = []
    for d in range(2, 9):
        t = complete_tree(d, 8, 2, seed=d)
        ev.counter.reset()
        pdte_bin_run(t, ev, encrypt_input_bin(kt.pk, [1, 2], 8))
        ratios.append(ev.counter.mul / (d * 2**d))
    # comparisons dominate: about 3 * mu products per node, spread over d levels
    assert max(ratios) <= 3 * 8
    assert ratios[-1] < ratios[0]


def test_capacity_exhaustion_propagates():
    kt, ev = make_keys(BINARY, slots=1, levels=3)
    t = complete_tree(4, 8, 1, seed=0)
    with pytest.raises(CapacityError):
        pdte_bin_run(t, ev, encrypt_input_bin(kt.pk, [3], 8))


def test_unknown_options():
    kt, ev = make_keys()
    t = complete_tree(2, 4, 1, seed=0)
    with pytest.raises(ValueError):
        BinaryEvaluation(t, ev, "zip")
    with pytest.raises(ValueError):
        run_stages(t, ev, encrypt_input_bin(kt.pk, [1], 4), "fast")
    ki, evi = make_keys("integer")
    with pytest.raises(ValueError):
        BinaryEvaluation(t, evi)
