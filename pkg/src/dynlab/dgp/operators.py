"""Tree generation, crossover and mutation.

All operators take an explicit ``numpy.random.Generator`` and never touch
global random state. Offspring that would exceed ``max_depth`` or
``max_nodes`` are discarded and the parent is kept instead.
"""

import numpy as np

from .expr import OPS, ExprTree, Var, subtree_end

__all__ = [
    "TreeSpec",
    "random_tree",
    "random_individual",
    "crossover",
    "mutate",
    "check_individual",
    "tree_violations",
]


class TreeSpec:
    """Which leaves a tree slot may use, plus the size caps.

    State equations see ``z`` and ``y``; the readout only sees ``z``.
    """

    def __init__(self, n_z, n_y, const_range=(-5.0, 5.0), max_depth=8, max_nodes=64):
        self.n_z = n_z
        self.n_y = n_y
        self.const_range = tuple(const_range)
        self.max_depth = max_depth
        self.max_nodes = max_nodes

    def variables(self):
        return [Var("z", i) for i in range(self.n_z)] + [Var("y", j) for j in range(self.n_y)]

    def fits(self, tree):
        return tree.depth <= self.max_depth and tree.size <= self.max_nodes

    def random_leaf(self, rng):
        vars_ = self.variables()
        # half the leaves are constants, the rest split evenly over variables
        if not vars_ or rng.random() < 0.5:
            return float(rng.uniform(*self.const_range))
        return vars_[rng.integers(len(vars_))]

    @classmethod
    def for_slot(cls, config, n_z, n_y, readout):
        return cls(n_z, 0 if readout else n_y, config.const_init_range, config.max_depth,
                   config.max_nodes)


def _grow(rng, spec, depth, full):
    if depth <= 1:
        return [spec.random_leaf(rng)]
    if not full:
        # grow: a node is a leaf with probability proportional to the leaf share of the primitive set
        n_leaf = len(spec.variables()) + 1
        if rng.random() < n_leaf / (n_leaf + len(OPS)):
            return [spec.random_leaf(rng)]
    op = OPS[rng.integers(len(OPS))]
    return [op] + _grow(rng, spec, depth - 1, full) + _grow(rng, spec, depth - 1, full)


def random_tree(rng, spec, depth_budget, method=None):
    """Ramped half-and-half tree of depth at most ``depth_budget``.

    ``method`` is ``"full"``, ``"grow"`` or None (pick one at random). The
    tree is redrawn until it satisfies the size caps of ``spec``.
    """
    if depth_budget < 1:
        raise ValueError("depth_budget must be >= 1")
    depth_budget = min(depth_budget, spec.max_depth)
    while True:
        full = rng.random() < 0.5 if method is None else method == "full"
        tree = ExprTree(_grow(rng, spec, depth_budget, full))
        if spec.fits(tree):
            return tree


def random_individual(rng, specs, depth_budget, method=None, id=()):
    from .expr import Individual

    trees = [random_tree(rng, s, depth_budget, method) for s in specs]
    return Individual(tuple(trees[:-1]), trees[-1], id=id)


def _swap(a, b, rng):
    ta, tb = a.tokens, b.tokens
    i = int(rng.integers(len(ta)))
    j = int(rng.integers(len(tb)))
    ia, ib = subtree_end(ta, i), subtree_end(tb, j)
    child_a = ExprTree(ta[:i] + tb[j:ib] + ta[ia:])
    child_b = ExprTree(tb[:j] + ta[i:ia] + tb[ib:])
    return child_a, child_b


def crossover(a, b, rng, specs):
    """Swap random subtrees between the parents' trees in one random slot.

    Returns two new individuals (without fitness). If either child breaks
    the size caps, unchanged copies of the parents are returned.
    """
    slot = int(rng.integers(len(specs)))
    ca, cb = _swap(a.trees[slot], b.trees[slot], rng)
    if not (specs[slot].fits(ca) and specs[slot].fits(cb)):
        return a.with_trees(a.trees), b.with_trees(b.trees)
    ta, tb = list(a.trees), list(b.trees)
    ta[slot], tb[slot] = ca, cb
    return a.with_trees(ta), b.with_trees(tb)


def _point(tree, rng, spec):
    toks = list(tree.tokens)
    i = int(rng.integers(len(toks)))
    if isinstance(toks[i], str):
        others = [op for op in OPS if op != toks[i]]
        toks[i] = others[rng.integers(len(others))]
    else:
        toks[i] = spec.random_leaf(rng)
    return ExprTree(toks)


def _jitter(tree, rng, std):
    consts = [i for i, t in enumerate(tree.tokens) if isinstance(t, float)]
    if not consts:
        return tree
    toks = list(tree.tokens)
    i = consts[rng.integers(len(consts))]
    toks[i] = toks[i] + float(rng.normal(0.0, std))
    return ExprTree(toks)


def _replace_subtree(tree, rng, spec, depth_budget):
    toks = tree.tokens
    i = int(rng.integers(len(toks)))
    new = random_tree(rng, spec, depth_budget)
    return ExprTree(toks[:i] + new.tokens + toks[subtree_end(toks, i):])


def mutate(ind, rng, specs, p_subtree, p_point, p_const, const_std=0.5, subtree_depth=3):
    """Apply at most one mutation to one randomly chosen tree.

    A single uniform draw picks subtree replacement, point mutation,
    constant jitter or nothing, with the given probabilities.
    """
    u = rng.random()
    if u >= p_subtree + p_point + p_const:
        return ind
    slot = int(rng.integers(len(specs)))
    tree, spec = ind.trees[slot], specs[slot]
    if u < p_subtree:
        new = _replace_subtree(tree, rng, spec, subtree_depth)
    elif u < p_subtree + p_point:
        new = _point(tree, rng, spec)
    else:
        new = _jitter(tree, rng, const_std)
    if new is tree or not spec.fits(new):
        return ind
    trees = list(ind.trees)
    trees[slot] = new
    return ind.with_trees(trees, id=ind.id)


def tree_violations(tree, spec):
    """List structural problems of a tree; empty when valid."""
    problems = []
    toks = tree.tokens
    need = 1
    for pos, tok in enumerate(toks):
        if need == 0:
            problems.append(f"trailing token at {pos}")
            break
        need += 1 if isinstance(tok, str) else -1
        if isinstance(tok, str) and tok not in OPS:
            problems.append(f"unknown operator {tok!r}")
        if isinstance(tok, Var):
            limit = spec.n_z if tok.kind == "z" else spec.n_y
            if tok.index >= limit:
                problems.append(f"variable {tok} out of range")
        if isinstance(tok, float) and not np.isfinite(tok):
            problems.append("non-finite constant")
    if need != 0:
        problems.append("arity violation")
    if tree.depth > spec.max_depth:
        problems.append(f"depth {tree.depth} > {spec.max_depth}")
    if tree.size > spec.max_nodes:
        problems.append(f"size {tree.size} > {spec.max_nodes}")
    return problems


def check_individual(ind, specs):
    if len(ind.trees) != len(specs):
        return [f"expected {len(specs)} trees, got {len(ind.trees)}"]
    return [p for t, s in zip(ind.trees, specs) for p in tree_violations(t, s)]
