"""Dynamic draft tree: budgeted top-k expansion and flattening for verification.

The tree grows level by level.  At each depth every surviving frontier node
is expanded with the draft model's top-k proposals, then *all* nodes grown
so far compete for the node budget: they are ranked by cumulative log-score
and only the best ``max_nodes`` survive.  Because a child's cumulative score
never exceeds its parent's, the surviving set is automatically closed under
parents, and the final node list doubles as a topological order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import DraftModel, FeatureContext, PrefixState


class TreeStructureError(ValueError):
    """Raised for malformed trees: dangling parents, bad ordering, size mismatches."""


ROOT = -1  # parent marker for first-level nodes


@dataclass(frozen=True)
class TreeParams:
    top_k: int = 8
    max_depth: int = 4
    max_nodes: int = 50

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")


@dataclass(frozen=True)
class DraftNode:
    token: int
    parent: int  # index into the flattened node list, ROOT for depth-1 nodes
    depth: int  # root children have depth 1
    cum_score: float  # sum of proposal log-scores along the root path


@dataclass(frozen=True)
class DraftTree:
    nodes: tuple[DraftNode, ...]
    params: TreeParams

    def __len__(self) -> int:
        return len(self.nodes)

    def validate(self) -> None:
        seen_paths: set[tuple[int, ...]] = set()
        paths: list[tuple[int, ...]] = []
        if len(self.nodes) > self.params.max_nodes:
            raise TreeStructureError(
                f"{len(self.nodes)} nodes exceed budget {self.params.max_nodes}"
            )
        for i, node in enumerate(self.nodes):
            if node.parent != ROOT and not 0 <= node.parent < i:
                raise TreeStructureError(
                    f"node {i} has dangling or out-of-order parent {node.parent}"
                )
            expected_depth = 1 if node.parent == ROOT else self.nodes[node.parent].depth + 1
            if node.depth != expected_depth:
                raise TreeStructureError(f"node {i} depth {node.depth} != {expected_depth}")
            if node.depth > self.params.max_depth:
                raise TreeStructureError(f"node {i} exceeds max depth {self.params.max_depth}")
            path = (node.token,) if node.parent == ROOT else paths[node.parent] + (node.token,)
            if path in seen_paths:
                raise TreeStructureError(f"duplicate token path {path}")
            seen_paths.add(path)
            paths.append(path)

    def token_path(self, index: int) -> tuple[int, ...]:
        """Root-to-node tokens for the node at ``index``."""
        rev = []
        while index != ROOT:
            rev.append(self.nodes[index].token)
            index = self.nodes[index].parent
        return tuple(reversed(rev))


def _rank_key(cum_score: float, depth: int, path: tuple[int, ...]):
    # Total order: best score first, then shallower, then lexicographic token
    # path.  Fully structural, so builds and oracles agree on ties.
    return (-cum_score, depth, path)


def build_tree(
    state: PrefixState,
    ctx: FeatureContext,
    draft: DraftModel,
    params: TreeParams,
) -> DraftTree:
    """Grow a draft tree from ``state`` under the given expansion budget."""
    # Candidates are (cum_score, depth, path, parent_path); survivors are
    # re-selected from the full pool after every level.
    selected: dict[tuple[int, ...], tuple[float, int]] = {}  # path -> (cum, depth)
    frontier: list[tuple[int, ...]] = [()]  # paths to expand next, root first

    for depth in range(1, params.max_depth + 1):
        if not frontier:
            break
        states = [state.extend_many(path) for path in frontier]
        ctxs = [_extend_ctx(ctx, path) for path in frontier]
        proposals = draft.propose_many(states, ctxs, params.top_k)

        for path, props in zip(frontier, proposals):
            base = selected[path][0] if path else 0.0
            for token, logp in props:
                selected[path + (token,)] = (base + logp, depth)

        ranked = sorted(
            selected.items(), key=lambda item: _rank_key(item[1][0], item[1][1], item[0])
        )
        kept: dict[tuple[int, ...], tuple[float, int]] = {}
        for path, (cum, d) in ranked:
            if len(kept) == params.max_nodes:
                break
            if len(path) > 1 and path[:-1] not in kept:
                continue  # parent lost the budget race; drop the subtree
            kept[path] = (cum, d)
        selected = kept
        frontier = [p for p in selected if len(p) == depth]

    order = sorted(selected.items(), key=lambda item: _rank_key(item[1][0], item[1][1], item[0]))
    index_of: dict[tuple[int, ...], int] = {}
    nodes: list[DraftNode] = []
    for path, (cum, d) in order:
        parent = ROOT if len(path) == 1 else index_of[path[:-1]]
        index_of[path] = len(nodes)
        nodes.append(DraftNode(token=path[-1], parent=parent, depth=d, cum_score=cum))
    return DraftTree(nodes=tuple(nodes), params=params)


def _extend_ctx(ctx: FeatureContext, path: tuple[int, ...]) -> FeatureContext:
    for token in path:
        ctx = ctx.extend(token)
    return ctx


def flatten(tree: DraftTree) -> tuple[list[int], list[int], np.ndarray]:
    """Flatten to ``(tokens, parents, ancestor_mask)`` for batched verification.

    Row ``i`` of the boolean mask has bit ``j`` set iff node ``j`` lies on
    node ``i``'s path to the root, itself included — the attention pattern a
    tree-decoding verifier consumes.
    """
    tree.validate()
    n = len(tree.nodes)
    tokens = [node.token for node in tree.nodes]
    parents = [node.parent for node in tree.nodes]
    mask = np.zeros((n, n), dtype=bool)
    for i, node in enumerate(tree.nodes):
        if node.parent != ROOT:
            mask[i] = mask[node.parent]
        mask[i, i] = True
    return tokens, parents, mask


def enumerate_paths(tree: DraftTree) -> list[list[int]]:
    """All root-to-leaf node-index paths, best leaf cumulative score first.

    Node order already sorts by descending cumulative score (ties broken
    structurally), so filtering leaves preserves that order.
    """
    has_child = [False] * len(tree.nodes)
    for node in tree.nodes:
        if node.parent != ROOT:
            has_child[node.parent] = True
    paths = []
    for i, leaf in enumerate(has_child):
        if leaf:
            continue
        rev = []
        j = i
        while j != ROOT:
            rev.append(j)
            j = tree.nodes[j].parent
        paths.append(list(reversed(rev)))
    return paths
