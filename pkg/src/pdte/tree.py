"""Decision tree model, plaintext classifier and the textual model format.

Nodes are indexed in breadth-first order starting at the root (index 0).
The classification rule at a decision node is ``x[attr] >= thr``: ``True``
moves right, ``False`` moves left.
"""
from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

DECISION = "decision"
LEAF = "leaf"


class ModelError(ValueError):
    """Raised for malformed model files or ill-formed inputs."""

    def __init__(self, message: str, node_id: Optional[int] = None):
        if node_id is not None:
            message = f"node {node_id}: {message}"
        super().__init__(message)
        self.node_id = node_id


@dataclass(eq=False)
class Node:
    id: int
    kind: str
    thr: Optional[int] = None
    aindex: Optional[int] = None
    clabel: Optional[int] = None
    parent: Optional["Node"] = field(default=None, repr=False)
    left: Optional["Node"] = field(default=None, repr=False)
    right: Optional["Node"] = field(default=None, repr=False)
    level: int = 0
    # dependency list filled by binary.compute_dag; pushed in order, consumed last-in first-out
    mdag: list["Node"] = field(default_factory=list, repr=False)

    @property
    def is_leaf(self) -> bool:
        return self.kind == LEAF


@dataclass(frozen=True)
class TreeParams:
    n: int  # attributes
    d: int  # depth (longest root-to-leaf edge count)
    m: int  # decision nodes
    M: int  # total nodes
    k: int  # labels
    mu: int  # input bit length


class TreeModel:
    """An immutable decision tree.

    Build one with :func:`build_tree`, :func:`complete_tree`,
    :func:`random_tree` or :func:`load_model`.
    """

    def __init__(self, root: Node, n_attributes: int, n_labels: int, bits: int):
        self.root = root
        self.nodes: list[Node] = list(_bfs(root))
        self.decision_nodes = [v for v in self.nodes if not v.is_leaf]
        self.leaves = [v for v in self.nodes if v.is_leaf]
        depth = max(v.level for v in self.nodes)
        self.levels: list[list[Node]] = [[] for _ in range(depth + 1)]
        for v in self.nodes:
            self.levels[v.level].append(v)
        self.dag_ready = False
        self.params = TreeParams(
            n=n_attributes,
            d=depth,
            m=len(self.decision_nodes),
            M=len(self.nodes),
            k=n_labels,
            mu=bits,
        )

    @property
    def depth(self) -> int:
        return self.params.d

    @property
    def label_bits(self) -> int:
        """Bit width of an encoded label, ``max(1, bitlength(k - 1))``."""
        return max(1, (self.params.k - 1).bit_length())

    def path(self, v: Node) -> list[Node]:
        """Nodes from the root's child down to ``v`` (the root is excluded)."""
        out = []
        while v.parent is not None:
            out.append(v)
            v = v.parent
        out.reverse()
        return out

    def __repr__(self) -> str:
        p = self.params
        return f"TreeModel(n={p.n}, d={p.d}, m={p.m}, M={p.M}, k={p.k}, mu={p.mu})"


def _bfs(root: Node) -> Iterator[Node]:
    q = deque([root])
    while q:
        v = q.popleft()
        yield v
        if not v.is_leaf:
            q.append(v.left)
            q.append(v.right)


def build_tree(spec, n_attributes: int, bits: int, n_labels: Optional[int] = None) -> TreeModel:
    """Build a model from a nested tuple description.

    ``spec`` is either an ``int`` label or a triple ``(attr, thr, (left, right))``.
    Node ids are assigned in BFS order. ``n_labels`` defaults to the largest
    label plus one.
    """

    def make(s, parent, level):
        if isinstance(s, int):
            return Node(id=-1, kind=LEAF, clabel=s, parent=parent, level=level)
        attr, thr, (lo, hi) = s
        v = Node(id=-1, kind=DECISION, aindex=attr, thr=thr, parent=parent, level=level)
        v.left = make(lo, v, level + 1)
        v.right = make(hi, v, level + 1)
        return v

    root = make(spec, None, 0)
    for i, v in enumerate(_bfs(root)):
        v.id = i
    if n_labels is None:
        n_labels = max(v.clabel for v in _bfs(root) if v.is_leaf) + 1
    model = TreeModel(root, n_attributes, n_labels, bits)
    validate(model)
    return model


def validate(model: TreeModel) -> None:
    p = model.params
    if p.n < 1 or p.mu < 1 or p.k < 1:
        raise ModelError("attributes, bits and labels must be positive")
    for v in model.nodes:
        if v.is_leaf:
            if v.left is not None or v.right is not None:
                raise ModelError("leaf with children", v.id)
            if v.clabel is None or not 0 <= v.clabel < p.k:
                raise ModelError(f"label {v.clabel} outside [0, {p.k - 1}]", v.id)
        else:
            if v.left is None or v.right is None:
                raise ModelError("decision node missing a child", v.id)
            if v.aindex is None or not 0 <= v.aindex < p.n:
                raise ModelError(f"attribute index {v.aindex} outside [0, {p.n - 1}]", v.id)
            if v.thr is None or not 0 <= v.thr < 2**p.mu:
                raise ModelError(f"threshold {v.thr} does not fit in {p.mu} bits", v.id)


def check_input(model: TreeModel, x: Sequence[int]) -> None:
    p = model.params
    if len(x) != p.n:
        raise ModelError(f"expected {p.n} attributes, got {len(x)}")
    for i, xi in enumerate(x):
        if not 0 <= int(xi) < 2**p.mu:
            raise ModelError(f"attribute {i} = {xi} does not fit in {p.mu} bits")


def classify_plain(model: TreeModel, x: Sequence[int]) -> int:
    """Evaluate the tree on a plaintext attribute vector."""
    check_input(model, x)
    v = model.root
    while not v.is_leaf:
        v = v.right if x[v.aindex] >= v.thr else v.left
    return v.clabel


# --------------------------------------------------------------------------
# generators


def complete_tree(d: int, mu: int, n_attributes: int = 4, seed=None) -> TreeModel:
    """Complete tree of depth ``d`` with leaves labelled ``0 .. 2**d - 1`` in BFS order."""
    if d < 1:
        raise ValueError("depth must be at least 1")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    nodes = []
    for i in range(2 ** (d + 1) - 1):
        level = (i + 1).bit_length() - 1
        if level < d:
            v = Node(i, DECISION, thr=rng.randrange(2**mu), aindex=rng.randrange(n_attributes))
        else:
            v = Node(i, LEAF, clabel=i - (2**d - 1))
        v.level = level
        if i:
            v.parent = nodes[(i - 1) // 2]
            if i % 2:
                v.parent.left = v
            else:
                v.parent.right = v
        nodes.append(v)
    return TreeModel(nodes[0], n_attributes, 2**d, mu)


def random_tree(
    d: int,
    mu: int,
    n_attributes: int = 4,
    m: Optional[int] = None,
    n_labels: Optional[int] = None,
    seed=None,
) -> TreeModel:
    """Random (generally ragged) tree of depth exactly ``d``.

    A root-to-depth-``d`` spine is grown first, then randomly chosen shallow
    leaves are split until the tree has ``m`` decision nodes (``m`` defaults to
    a random count). Leaves are labelled in BFS order unless ``n_labels`` is
    given, in which case labels are drawn uniformly from ``[0, n_labels)``.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    if d < 1:
        raise ValueError("depth must be at least 1")
    max_m = 2**d - 1
    if m is None:
        m = rng.randint(d, min(max_m, 4 * d))
    if not d <= m <= max_m:
        raise ValueError(f"m={m} impossible for depth {d}")

    def new_decision(parent, level):
        v = Node(-1, DECISION, thr=rng.randrange(2**mu), aindex=rng.randrange(n_attributes))
        v.parent, v.level = parent, level
        return v

    def new_leaf(parent, level):
        v = Node(-1, LEAF, clabel=0)
        v.parent, v.level = parent, level
        return v

    def split(leaf):
        # replace ``leaf`` in its parent by a fresh decision node
        v = new_decision(leaf.parent, leaf.level)
        if leaf.parent is not None:
            if leaf.parent.left is leaf:
                leaf.parent.left = v
            else:
                leaf.parent.right = v
        v.left = new_leaf(v, leaf.level + 1)
        v.right = new_leaf(v, leaf.level + 1)
        return v

    root = split(new_leaf(None, 0))
    frontier = [root.left, root.right]
    spine = rng.choice(frontier)
    for _ in range(d - 1):
        frontier.remove(spine)
        v = split(spine)
        frontier += [v.left, v.right]
        spine = rng.choice([v.left, v.right])
    count = d
    while count < m:
        candidates = [leaf for leaf in frontier if leaf.level < d]
        leaf = rng.choice(candidates)
        frontier.remove(leaf)
        v = split(leaf)
        frontier += [v.left, v.right]
        count += 1

    leaves = [v for v in _bfs(root) if v.is_leaf]
    for i, v in enumerate(_bfs(root)):
        v.id = i
    if n_labels is None:
        n_labels = len(leaves)
        for j, v in enumerate(leaves):
            v.clabel = j
    else:
        for v in leaves:
            v.clabel = rng.randrange(n_labels)
    return TreeModel(root, n_attributes, n_labels, mu)


# --------------------------------------------------------------------------
# textual format


def save_model(model: TreeModel) -> str:
    """Serialize to the canonical text form (one node per line, fixed key order)."""
    p = model.params
    lines = [f'{{"bits": {p.mu}, "attributes": {p.n}, "labels": {p.k}, "nodes": [']
    rows = []
    for v in model.nodes:
        if v.is_leaf:
            row = {"id": v.id, "kind": LEAF, "label": v.clabel}
        else:
            row = {
                "id": v.id,
                "kind": DECISION,
                "attr": v.aindex,
                "thr": v.thr,
                "left": v.left.id,
                "right": v.right.id,
            }
        rows.append(json.dumps(row))
    lines.append(",\n".join(rows))
    lines.append("]}")
    return "\n".join(lines) + "\n"


def load_model(text: str) -> TreeModel:
    """Parse the canonical text form, rebuilding parent links and levels."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"not a model document: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelError("top level must be an object")
    for key in ("bits", "attributes", "labels", "nodes"):
        if key not in doc:
            raise ModelError(f"missing field {key!r}")
    rows = doc["nodes"]
    if not isinstance(rows, list) or not rows:
        raise ModelError("nodes must be a non-empty list")

    nodes: dict[int, Node] = {}
    for row in rows:
        nid = row.get("id")
        if not isinstance(nid, int) or nid in nodes:
            raise ModelError("missing or duplicate id", nid)
        kind = row.get("kind")
        if kind == LEAF:
            nodes[nid] = Node(nid, LEAF, clabel=row.get("label"))
        elif kind == DECISION:
            nodes[nid] = Node(nid, DECISION, thr=row.get("thr"), aindex=row.get("attr"))
        else:
            raise ModelError(f"unknown kind {kind!r}", nid)

    for row in rows:
        v = nodes[row["id"]]
        if v.is_leaf:
            continue
        for side in ("left", "right"):
            cid = row.get(side)
            child = nodes.get(cid)
            if child is None:
                raise ModelError(f"dangling {side} child {cid}", v.id)
            if child.parent is not None or child.id == 0:
                raise ModelError(f"node {cid} has more than one parent", v.id)
            child.parent = v
            setattr(v, side, child)

    if 0 not in nodes:
        raise ModelError("no root (id 0)")
    root = nodes[0]
    order = list(_bfs(root))
    for v in order:
        if v.parent is not None:
            v.level = v.parent.level + 1
    if len(order) != len(nodes):
        orphan = min(set(nodes) - {v.id for v in order})
        raise ModelError("unreachable from root", orphan)
    for i, v in enumerate(order):
        if v.id != i:
            raise ModelError(f"id is not the BFS index {i}", v.id)

    model = TreeModel(root, doc["attributes"], doc["labels"], doc["bits"])
    validate(model)
    return model
