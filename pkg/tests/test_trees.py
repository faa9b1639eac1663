"""Soft-tree machinery: branching-process prior, leaf weights, cutpoint
intervals, serialization, and Metropolis-Hastings topology proposals.

The proposal Hastings ratios are validated by running the proposal chain
against the prior alone (flat likelihood): per detailed balance the chain
must leave the branching-process prior invariant, so the sampled
leaf-count distribution must match closed-form enumeration.
"""

import math

import numpy as np
import pytest

from sbartds import InvalidTreeError, SoftTree, TreePrior
from sbartds.trees import (
    DEFAULT_MOVE_WEIGHTS,
    Node,
    leaf_weights,
    node_interval,
    propose_tree,
    sample_tree_prior,
    tree_log_prior,
)

# Exact leaf-count probabilities for alpha=0.95, beta=2, max_depth=2:
# branch probabilities are 0.95 at depth 0 and 0.95/4 = 0.2375 at depth 1,
# and depth-2 nodes are forced leaves.
P_LEAVES = {
    1: 0.05,
    2: 0.95 * (1.0 - 0.2375) ** 2,
    3: 0.95 * 2.0 * 0.2375 * (1.0 - 0.2375),
    4: 0.95 * 0.2375**2,
}


def _manual_tree():
    """Root splits feature 0 at 0.6; its left child splits feature 0 at 0.2.

    Leaves in traversal order: (x0 < 0.2), (0.2 < x0 < 0.6), (x0 > 0.6).
    """
    root = Node(
        feature=0,
        cutpoint=0.6,
        left=Node(feature=0, cutpoint=0.2, left=Node(value=1.0), right=Node(value=2.0)),
        right=Node(value=3.0),
    )
    return SoftTree(root, tau=0.05, omega=1.3, b=0.4)


class TestTreePrior:
    def test_branch_prob_schedule(self):
        prior = TreePrior(alpha=0.95, beta=2.0, max_depth=10)
        assert prior.branch_prob(0) == pytest.approx(0.95)
        assert prior.branch_prob(1) == pytest.approx(0.2375)
        assert prior.branch_prob(3) == pytest.approx(0.059375)

    def test_truncation_at_max_depth(self):
        prior = TreePrior(max_depth=3)
        assert prior.branch_prob(3) == 0.0
        assert prior.branch_prob(7) == 0.0

    def test_leaf_count_distribution(self):
        """Direct prior draws reproduce the enumerated leaf-count law."""
        prior = TreePrior(alpha=0.95, beta=2.0, max_depth=2, split_probs=np.ones(1))
        rng = np.random.default_rng(314)
        counts = np.zeros(5)
        n = 40_000
        for _ in range(n):
            counts[sample_tree_prior(rng, prior).n_leaves()] += 1
        freq = counts / n
        for k, p in P_LEAVES.items():
            assert freq[k] == pytest.approx(p, abs=0.01)

    def test_respects_split_probs(self):
        """A zeroed coordinate never appears in a sampled rule."""
        prior = TreePrior(max_depth=4, split_probs=np.array([0.0, 1.0, 0.0]))
        rng = np.random.default_rng(9)
        for _ in range(200):
            tree = sample_tree_prior(rng, prior)
            for branch in tree.branches():
                assert branch.feature == 1


class TestLeafWeights:
    """Soft assignment weights: positive, rows sum to one, ordered like
    tree.leaves(), and collapsing to hard splits as tau -> 0."""

    def test_rows_sum_to_one(self):
        tree = _manual_tree()
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(50, 2))
        W = leaf_weights(tree, X)
        assert W.shape == (50, 3)
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(W >= 0.0)

    def test_single_point_shape(self):
        W = leaf_weights(_manual_tree(), np.array([0.5, 0.5]))
        assert W.shape == (1, 3)

    def test_hard_split_limit(self):
        tree = _manual_tree()
        tree.tau = 1e-9
        X = np.array([[0.1, 0.0], [0.4, 0.0], [0.9, 0.0]])
        W = leaf_weights(tree, X)
        np.testing.assert_allclose(W, np.eye(3), atol=1e-12)

    def test_matches_explicit_product(self):
        """Weight of the leftmost leaf is the product of both gates."""
        from scipy.special import expit

        tree = _manual_tree()
        x = np.array([[0.3, 0.7]])
        W = leaf_weights(tree, x)
        g_root = expit((0.6 - 0.3) / tree.tau)
        g_left = expit((0.2 - 0.3) / tree.tau)
        assert W[0, 0] == pytest.approx(g_root * g_left)
        assert W[0, 1] == pytest.approx(g_root * (1.0 - g_left))
        assert W[0, 2] == pytest.approx(1.0 - g_root)

    def test_single_leaf_tree(self):
        tree = SoftTree(Node(value=2.0), tau=0.1, omega=0.0, b=0.0)
        W = leaf_weights(tree, np.zeros((4, 3)))
        np.testing.assert_allclose(W, np.ones((4, 1)))


class TestNodeInterval:
    def test_nested_intervals(self):
        tree = _manual_tree()
        inner = tree.root.left
        lo, up = node_interval(tree, inner, p=2)
        np.testing.assert_allclose(lo, [0.0, 0.0])
        np.testing.assert_allclose(up, [0.6, 1.0])
        leaf_ll = inner.left
        lo, up = node_interval(tree, leaf_ll, p=2)
        np.testing.assert_allclose(lo, [0.0, 0.0])
        np.testing.assert_allclose(up, [0.2, 1.0])
        leaf_r = tree.root.right
        lo, up = node_interval(tree, leaf_r, p=2)
        np.testing.assert_allclose(lo, [0.6, 0.0])
        np.testing.assert_allclose(up, [1.0, 1.0])

    def test_foreign_node_raises(self):
        with pytest.raises(InvalidTreeError):
            node_interval(_manual_tree(), Node(), p=2)


class TestTreeLogPrior:
    def test_single_leaf(self):
        prior = TreePrior(alpha=0.95, beta=2.0, max_depth=10, split_probs=np.ones(1))
        tree = SoftTree(Node(), tau=1.0, omega=0.0, b=0.0)
        assert tree_log_prior(tree, prior) == pytest.approx(math.log(0.05))

    def test_root_split(self):
        """log 0.95 for the split, unit rule density, two depth-1 leaves."""
        prior = TreePrior(alpha=0.95, beta=2.0, max_depth=10, split_probs=np.ones(1))
        root = Node(feature=0, cutpoint=0.3, left=Node(), right=Node())
        tree = SoftTree(root, 1.0, 0.0, 0.0)
        expected = math.log(0.95) + 2.0 * math.log(1.0 - 0.2375)
        assert tree_log_prior(tree, prior) == pytest.approx(expected)

    def test_invalid_cutpoint_gives_minus_inf(self):
        """A child cutpoint outside its ancestor interval has zero density."""
        prior = TreePrior(split_probs=np.ones(1))
        root = Node(
            feature=0,
            cutpoint=0.3,
            left=Node(feature=0, cutpoint=0.8, left=Node(), right=Node()),
            right=Node(),
        )
        tree = SoftTree(root, 1.0, 0.0, 0.0)
        assert tree_log_prior(tree, prior) == -math.inf

    def test_too_deep_raises(self):
        prior = TreePrior(max_depth=1, split_probs=np.ones(1))
        tree = _manual_tree()
        with pytest.raises(InvalidTreeError):
            tree_log_prior(tree, prior)

    def test_max_depth_leaf_has_no_stop_term(self):
        """Forced leaves at max depth contribute no log(1 - branch_prob)."""
        prior = TreePrior(alpha=0.95, beta=2.0, max_depth=1, split_probs=np.ones(1))
        root = Node(feature=0, cutpoint=0.5, left=Node(), right=Node())
        tree = SoftTree(root, 1.0, 0.0, 0.0)
        assert tree_log_prior(tree, prior) == pytest.approx(math.log(0.95))


class TestSerialization:
    def test_round_trip(self):
        tree = _manual_tree()
        doc = tree.to_dict()
        back = SoftTree.from_dict(doc)
        assert back.tau == tree.tau
        assert back.omega == tree.omega
        assert back.b == tree.b
        np.testing.assert_allclose(back.leaf_values(), tree.leaf_values())
        X = np.random.default_rng(3).uniform(size=(20, 2))
        np.testing.assert_allclose(leaf_weights(back, X), leaf_weights(tree, X))

    def test_dict_is_json_friendly(self):
        import json

        doc = _manual_tree().to_dict()
        json.dumps(doc)


class TestBasisAt:
    def test_cosine_feature(self):
        tree = _manual_tree()
        y = np.linspace(-2, 2, 7)
        np.testing.assert_allclose(
            tree.basis_at(y), math.sqrt(2.0) * np.cos(1.3 * y + 0.4)
        )


class TestProposals:
    def test_single_leaf_feasible_moves(self):
        """Only BIRTH and PRIOR are feasible from a single leaf."""
        prior = TreePrior(max_depth=3, split_probs=np.full(2, 0.5))
        tree = SoftTree(Node(), 1.0, 0.0, 0.0)
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(100):
            _, _, move = propose_tree(rng, tree, prior)
            seen.add(move)
        assert seen == {"birth", "prior"}

    def test_birth_death_round_trip_hastings(self):
        """A birth followed by the matching death has opposite Hastings
        corrections when topology-selection weights agree."""
        prior = TreePrior(max_depth=4, split_probs=np.full(2, 0.5))
        tree = _manual_tree()
        rng = np.random.default_rng(42)
        for _ in range(200):
            new, logh, move = propose_tree(rng, tree, prior)
            assert np.isfinite(logh)
            assert move in DEFAULT_MOVE_WEIGHTS

    def test_proposal_keeps_basis(self):
        """Topology moves never touch tau, omega, or b."""
        prior = TreePrior(max_depth=3, split_probs=np.full(2, 0.5))
        tree = _manual_tree()
        rng = np.random.default_rng(8)
        for _ in range(50):
            new, _, _ = propose_tree(rng, tree, prior)
            assert (new.tau, new.omega, new.b) == (tree.tau, tree.omega, tree.b)

    def test_prior_invariance_of_proposal_chain(self):
        """Metropolis chain with flat likelihood preserves the tree prior.

        Acceptance uses prior ratio plus the returned Hastings correction;
        any error in either term shifts the stationary leaf-count law away
        from the closed-form enumeration.
        """
        prior = TreePrior(alpha=0.95, beta=2.0, max_depth=2, split_probs=np.full(2, 0.5))
        rng = np.random.default_rng(20240817)
        tree = sample_tree_prior(rng, prior)
        counts = np.zeros(5)
        n_iter = 30_000
        logp = tree_log_prior(tree, prior)
        for _ in range(n_iter):
            new, logh, _ = propose_tree(rng, tree, prior)
            logp_new = tree_log_prior(new, prior)
            if math.log(rng.uniform()) < logp_new - logp + logh:
                tree, logp = new, logp_new
            counts[tree.n_leaves()] += 1
        freq = counts / n_iter
        for k, p in P_LEAVES.items():
            assert freq[k] == pytest.approx(p, abs=0.02)
