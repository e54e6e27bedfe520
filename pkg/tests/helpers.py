"""Shared test fixtures: scripted models, random trees, and oracle math.

Everything here is deliberately independent of the engine's own code paths:
expectations are recomputed from first principles so the tests cross-check
the implementation instead of echoing it.
"""

import numpy as np

from specdec.draft_tree import ROOT, DraftNode, DraftTree, TreeParams
from specdec.models import Distribution, FeatureContext, TreeDistributions


def one_hot(token: int, vocab_size: int) -> Distribution:
    scores = np.zeros(vocab_size)
    scores[token] = 1.0
    return Distribution(scores=scores, argmax=int(token))


class ScriptedVerifier:
    """Verifier whose argmax depends only on the absolute position.

    Position i (number of tokens before it) always scores ``sequence[i mod
    len(sequence)]`` highest, regardless of which tokens were committed.
    """

    def __init__(self, sequence, vocab_size=257):
        self.sequence = [int(t) for t in sequence]
        self.vocab_size = vocab_size

    def _argmax_at(self, position: int) -> int:
        return self.sequence[position % len(self.sequence)]

    def next(self, state):
        return one_hot(self._argmax_at(state.position), self.vocab_size)

    def batch(self, state, tree):
        tree.validate()
        root = self.next(state)
        nodes = [
            one_hot(self._argmax_at(state.position + node.depth), self.vocab_size)
            for node in tree.nodes
        ]
        return TreeDistributions(root=root, nodes=nodes)

    def features(self, state):
        return FeatureContext.for_state(state)


class ScriptedDraft:
    """Draft model proposing a fixed token per absolute position.

    Top-1 is ``sequence[position mod len(sequence)]``; further proposals
    fill in neighboring bins with strictly decreasing scores.
    """

    def __init__(self, sequence, vocab_size=257):
        self.sequence = [int(t) for t in sequence]
        self.vocab_size = vocab_size

    def propose(self, state, ctx, k):
        if not 1 <= k <= self.vocab_size:
            raise ValueError(f"k must be in [1, {self.vocab_size}]")
        top = self.sequence[state.position % len(self.sequence)]
        tokens = [top]
        step = 0
        while len(tokens) < k:
            step += 1
            for candidate in (top - step, top + step):
                if 0 <= candidate < self.vocab_size and candidate not in tokens:
                    tokens.append(candidate)
                if len(tokens) == k:
                    break
        return [(t, -0.1 * i) for i, t in enumerate(tokens)]

    def propose_many(self, states, ctxs, k):
        return [self.propose(s, c, k) for s, c in zip(states, ctxs)]


def random_tree(rng: np.random.Generator, max_nodes=50, max_depth=4,
                vocab_size=256, top_k=8) -> DraftTree:
    """Structurally valid random tree, independent of build_tree."""
    n = int(rng.integers(1, max_nodes + 1))
    nodes = []
    paths = []
    path_set = set()
    for i in range(n):
        for _ in range(64):
            if nodes and rng.random() < 0.7:
                parent = int(rng.integers(0, len(nodes)))
                depth = nodes[parent].depth + 1
                if depth > max_depth:
                    continue
                base = paths[parent]
            else:
                parent, depth, base = ROOT, 1, ()
            token = int(rng.integers(0, vocab_size))
            path = base + (token,)
            if path in path_set:
                continue
            parent_score = 0.0 if parent == ROOT else nodes[parent].cum_score
            nodes.append(
                DraftNode(
                    token=token,
                    parent=parent,
                    depth=depth,
                    cum_score=parent_score - float(rng.random()),
                )
            )
            paths.append(path)
            path_set.add(path)
            break
    params = TreeParams(top_k=top_k, max_depth=max_depth, max_nodes=max_nodes)
    return DraftTree(nodes=tuple(nodes), params=params)


def ancestors_by_pointer_walk(tree: DraftTree, index: int) -> list[int]:
    """Reference ancestor chain (self included), via raw parent pointers."""
    chain = []
    while index != ROOT:
        chain.append(index)
        index = tree.nodes[index].parent
    return list(reversed(chain))


def reference_verify_path(path_tokens, verified, r_for_dim, start_position):
    """Independent linear scan: first failure index and the verifier token.

    ``r_for_dim`` maps an action dimension (0-6) to its threshold.
    """
    for i, token in enumerate(path_tokens):
        dim = (start_position + i) % 7
        if abs(int(token) - int(verified[i])) > r_for_dim(dim):
            return i, int(verified[i])
    return len(path_tokens), int(verified[len(path_tokens)])


def chain_q(agreement_p: float, noise_sigma: float, vocab_size: int, r: int) -> float:
    """Per-position acceptance probability for chain drafting.

    Brute-forced over the displacement kernel and a uniform verifier argmax,
    including the clamp at the vocabulary edges.  Matches the synthetic
    draft construction by definition, not by running the engine.
    """
    mags = np.arange(1, vocab_size, dtype=np.float64)
    w = np.exp(-(mags**2 - 1.0) / (2.0 * noise_sigma**2))
    offsets = np.concatenate([-mags[::-1], mags])
    probs = np.concatenate([w[::-1], w])
    probs /= probs.sum()

    argmaxes = np.arange(vocab_size)[:, None]
    displaced = np.clip(argmaxes + offsets[None, :], 0, vocab_size - 1)
    within = np.abs(displaced - argmaxes) <= r
    p_within_given_displaced = (within * probs[None, :]).sum(axis=1).mean()
    return agreement_p + (1.0 - agreement_p) * p_within_given_displaced


def chain_expected_accepted(q: float, depth: int) -> float:
    """Expected accepted draft tokens per pass: sum of q^i for i=1..depth."""
    return sum(q**i for i in range(1, depth + 1))
