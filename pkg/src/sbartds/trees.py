"""Soft decision trees: the branching-process prior, leaf-weight evaluation,
and the Metropolis-Hastings topology proposals.

A tree routes an input x softly: at a branch with rule (j, C) the probability
of going left is psi((C - x_j) / tau) with psi the logistic cdf, so tau -> 0
recovers the hard split I(x_j <= C) going left. Each tree also owns the
bandwidth tau and its response basis (omega, b); leaf coefficients live on
the leaves themselves.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidTreeError

DEFAULT_MOVE_WEIGHTS = {"birth": 0.3, "death": 0.3, "change": 0.3, "prior": 0.1}


class Node:
    """One tree node; a leaf iff left is None."""

    __slots__ = ("feature", "cutpoint", "left", "right", "value")

    def __init__(self, feature=None, cutpoint=None, left=None, right=None, value=0.0):
        self.feature = feature
        self.cutpoint = cutpoint
        self.left = left
        self.right = right
        self.value = value

    @property
    def is_leaf(self):
        return self.left is None

    def clone(self):
        if self.is_leaf:
            return Node(value=self.value)
        return Node(self.feature, self.cutpoint, self.left.clone(), self.right.clone())


@dataclass
class TreePrior:
    """Branching-process prior: depth-d nodes branch w.p. alpha (1+d)^-beta,
    truncated to leaves at max_depth; rules are (j ~ Categorical(s),
    C ~ Uniform over the coordinate's valid interval)."""

    alpha: float = 0.95
    beta: float = 2.0
    max_depth: int = 10
    split_probs: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    def branch_prob(self, depth):
        if depth >= self.max_depth:
            return 0.0
        return self.alpha * (1.0 + depth) ** (-self.beta)


class SoftTree:
    def __init__(self, root, tau, omega, b):
        self.root = root
        self.tau = float(tau)
        self.omega = float(omega)
        self.b = float(b)

    def clone(self):
        return SoftTree(self.root.clone(), self.tau, self.omega, self.b)

    def leaves(self):
        out = []
        _collect(self.root, out, leaf=True)
        return out

    def branches(self):
        out = []
        _collect(self.root, out, leaf=False)
        return out

    def depth(self):
        return _max_depth(self.root, 0)

    def n_leaves(self):
        return len(self.leaves())

    def leaf_values(self):
        return np.array([node.value for node in self.leaves()])

    def set_leaf_values(self, values):
        leaves = self.leaves()
        if len(values) != len(leaves):
            raise InvalidTreeError("leaf value count does not match leaf count")
        for node, v in zip(leaves, values):
            node.value = float(v)

    def basis_at(self, y):
        return math.sqrt(2.0) * np.cos(self.omega * np.asarray(y) + self.b)

    def to_dict(self):
        nodes = []

        def rec(node, parent):
            idx = len(nodes)
            if node.is_leaf:
                nodes.append({"parent": parent, "value": node.value})
            else:
                nodes.append(
                    {
                        "parent": parent,
                        "feature": node.feature,
                        "cutpoint": node.cutpoint,
                    }
                )
                rec(node.left, idx)
                rec(node.right, idx)

        rec(self.root, -1)
        return {"tau": self.tau, "omega": self.omega, "b": self.b, "nodes": nodes}

    @classmethod
    def from_dict(cls, doc):
        nodes = doc["nodes"]

        def build(i):
            spec = nodes[i]
            if "feature" in spec:
                node = Node(feature=spec["feature"], cutpoint=spec["cutpoint"])
                left_idx = i + 1
                node.left, after = build(left_idx)
                node.right, after = build(after)
                return node, after
            return Node(value=spec["value"]), i + 1

        root, _ = build(0)
        return cls(root, doc["tau"], doc["omega"], doc["b"])


def _collect(node, out, leaf):
    if node.is_leaf:
        if leaf:
            out.append(node)
        return
    if not leaf:
        out.append(node)
    _collect(node.left, out, leaf)
    _collect(node.right, out, leaf)


def _max_depth(node, depth):
    if node.is_leaf:
        return depth
    return max(_max_depth(node.left, depth + 1), _max_depth(node.right, depth + 1))


def sample_tree_prior(rng, prior):
    """Draw a tree topology with rules from the branching-process prior.

    Leaf values are zeroed; tau and the basis are owned by their own priors
    and set by the caller (they default to 1 / a constant basis here).
    """
    p = len(prior.split_probs)

    def grow(depth, lower, upper):
        if rng.uniform() < prior.branch_prob(depth):
            j = int(rng.choice(p, p=prior.split_probs))
            c = rng.uniform(lower[j], upper[j])
            node = Node(feature=j, cutpoint=float(c))
            hi = upper.copy()
            hi[j] = c
            node.left = grow(depth + 1, lower, hi)
            lo = lower.copy()
            lo[j] = c
            node.right = grow(depth + 1, lo, upper)
            return node
        return Node()

    root = grow(0, np.zeros(p), np.ones(p))
    return SoftTree(root, tau=1.0, omega=0.0, b=0.0)


def leaf_weights(tree, x):
    """Soft assignment weights phi(x) over leaves, rows summing to 1.

    x may be a single point (P,) or a matrix (n, P); returns (n, L) with
    leaves in the same traversal order as tree.leaves().
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    n = X.shape[0]
    cols = []

    def rec(node, w):
        if node.is_leaf:
            cols.append(w)
            return
        go_left = special.expit((node.cutpoint - X[:, node.feature]) / tree.tau)
        rec(node.left, w * go_left)
        rec(node.right, w * (1.0 - go_left))

    rec(tree.root, np.ones(n))
    return np.column_stack(cols)


def node_interval(tree, target, p):
    """Valid cutpoint interval per coordinate at `target`, by hard-split
    descent from the root. Returns (lower, upper) arrays of length p."""
    lower = np.zeros(p)
    upper = np.ones(p)

    def rec(node):
        if node is target:
            return True
        if node.is_leaf:
            return False
        j, c = node.feature, node.cutpoint
        saved = (lower[j], upper[j])
        upper[j] = c
        if rec(node.left):
            return True
        lower[j], upper[j] = saved
        lower[j] = c
        if rec(node.right):
            return True
        lower[j], upper[j] = saved
        return False

    if not rec(tree.root):
        raise InvalidTreeError("node not found in tree")
    return lower, upper


def tree_log_prior(tree, prior):
    """Log prior density of the topology and rules; -inf when a cutpoint
    falls outside its valid interval (possible after a CHANGE proposal)."""
    p = len(prior.split_probs)
    total = 0.0

    def rec(node, depth, lower, upper):
        nonlocal total
        if depth > prior.max_depth:
            raise InvalidTreeError(
                f"tree exceeds the prior's maximum depth {prior.max_depth}"
            )
        prob = prior.branch_prob(depth)
        if node.is_leaf:
            if depth < prior.max_depth:
                total += math.log1p(-prob)
            return True
        if prob <= 0.0:
            # Branch at or past max_depth: unreachable by any proposal move.
            raise InvalidTreeError(
                f"branch node at depth {depth} with maximum depth {prior.max_depth}"
            )
        j, c = node.feature, node.cutpoint
        width = upper[j] - lower[j]
        if not (lower[j] < c < upper[j]) or prior.split_probs[j] <= 0.0:
            return False
        total += math.log(prob) + math.log(prior.split_probs[j]) - math.log(width)
        hi = upper.copy()
        hi[j] = c
        if not rec(node.left, depth + 1, lower, hi):
            return False
        lo = lower.copy()
        lo[j] = c
        return rec(node.right, depth + 1, lo, upper)

    if not rec(tree.root, 0, np.zeros(p), np.ones(p)):
        return -math.inf
    return total


def _growable_leaves(tree, max_depth):
    out = []

    def rec(node, depth):
        if node.is_leaf:
            if depth < max_depth:
                out.append(node)
            return
        rec(node.left, depth + 1)
        rec(node.right, depth + 1)

    rec(tree.root, 0)
    return out


def _terminal_branches(tree):
    return [b for b in tree.branches() if b.left.is_leaf and b.right.is_leaf]


def _feasible_weights(tree, prior, move_weights):
    """Normalized selection probabilities over feasible moves at `tree`."""
    has_branch = not tree.root.is_leaf
    feasible = {"prior": move_weights["prior"]}
    if _growable_leaves(tree, prior.max_depth):
        feasible["birth"] = move_weights["birth"]
    if has_branch:
        feasible["death"] = move_weights["death"]
        feasible["change"] = move_weights["change"]
    z = sum(feasible.values())
    return {k: v / z for k, v in feasible.items()}


def propose_tree(rng, tree, prior, move_weights=None):
    """One topology proposal; returns (proposal, log_hastings, move).

    log_hastings = log q(T' -> T) - log q(T -> T'), accounting for the
    selection probability of each move among the moves feasible at the
    current and proposed trees (DEATH and CHANGE are infeasible on a
    single-leaf tree, BIRTH on a tree with no leaf above max depth).
    """
    if move_weights is None:
        move_weights = DEFAULT_MOVE_WEIGHTS
    weights = _feasible_weights(tree, prior, move_weights)
    names = sorted(weights)
    move = names[int(rng.choice(len(names), p=[weights[k] for k in names]))]
    p = len(prior.split_probs)

    if move == "birth":
        leaves = _growable_leaves(tree, prior.max_depth)
        pick = int(rng.integers(len(leaves)))
        new = tree.clone()
        target = _growable_leaves(new, prior.max_depth)[pick]
        lower, upper = node_interval(new, target, p)
        j = int(rng.choice(p, p=prior.split_probs))
        c = float(rng.uniform(lower[j], upper[j]))
        target.feature, target.cutpoint = j, c
        target.left, target.right = Node(), Node()
        w_new = _feasible_weights(new, prior, move_weights)
        log_fwd = (
            math.log(weights["birth"])
            - math.log(len(leaves))
            + math.log(prior.split_probs[j])
            - math.log(upper[j] - lower[j])
        )
        log_rev = math.log(w_new["death"]) - math.log(len(_terminal_branches(new)))
        return new, log_rev - log_fwd, move

    if move == "death":
        terms = _terminal_branches(tree)
        pick = int(rng.integers(len(terms)))
        new = tree.clone()
        target = _terminal_branches(new)[pick]
        lower, upper = node_interval(new, target, p)
        j, width = target.feature, None
        width = upper[j] - lower[j]
        target.feature = target.cutpoint = None
        target.left = target.right = None
        target.value = 0.0
        w_new = _feasible_weights(new, prior, move_weights)
        log_fwd = math.log(weights["death"]) - math.log(len(terms))
        log_rev = (
            math.log(w_new["birth"])
            - math.log(len(_growable_leaves(new, prior.max_depth)))
            + math.log(prior.split_probs[j])
            - math.log(width)
        )
        return new, log_rev - log_fwd, move

    if move == "change":
        branches = tree.branches()
        pick = int(rng.integers(len(branches)))
        new = tree.clone()
        target = new.branches()[pick]
        lower, upper = node_interval(new, target, p)
        j_old, w_old = target.feature, upper[target.feature] - lower[target.feature]
        j_new = int(rng.choice(p, p=prior.split_probs))
        c_new = float(rng.uniform(lower[j_new], upper[j_new]))
        target.feature, target.cutpoint = j_new, c_new
        # Same topology on both sides: selection terms cancel; what remains
        # is the ratio of rule densities at this node.
        log_fwd = math.log(prior.split_probs[j_new]) - math.log(
            upper[j_new] - lower[j_new]
        )
        log_rev = math.log(prior.split_probs[j_old]) - math.log(w_old)
        return new, log_rev - log_fwd, move

    # PRIOR: independent redraw of the topology; the prior densities in the
    # Hastings ratio cancel the prior ratio in the acceptance, leaving the
    # likelihood ratio (times the selection correction at the boundary).
    topo = sample_tree_prior(rng, prior)
    new = SoftTree(topo.root, tree.tau, tree.omega, tree.b)
    w_new = _feasible_weights(new, prior, move_weights)
    log_h = (
        math.log(w_new["prior"])
        + tree_log_prior(tree, prior)
        - math.log(weights["prior"])
        - tree_log_prior(new, prior)
    )
    return new, log_h, move
