"""Discrete tree growth by uniform leaf replacement, embedding times, profiles.

The discrete tree with n internal nodes has the law of the continuous-time
branching tree stopped at its n-th death; shapes and death times are
independent, so the death times tau_n are sampled separately as sums of
scaled unit exponentials whenever a continuous-time quantity is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from profilelab.weight_model import WeightModel, sample_weights

__all__ = [
    "Tree",
    "Profile",
    "GrowthTrace",
    "ResourceLimitError",
    "grow",
    "replay",
    "profile",
    "sample_profile",
    "sample_tau",
    "yule_limit_samples",
    "subtree_fractions",
    "subtree_fraction_samples",
]

DEFAULT_NODE_CAP = 2**31


class ResourceLimitError(RuntimeError):
    """Requested simulation exceeds a configured resource cap."""


@dataclass
class Tree:
    """Arena-of-nodes tree; mutable during growth, treat as frozen afterwards.

    Node 0 is the root.  ``children[i]`` is None for leaves, ``depth[i]`` is
    the weighted depth vector D_u (root_shift included).
    """

    b: int
    d: int
    parent: list[int | None] = field(default_factory=lambda: [None])
    children: list[tuple[int, ...] | None] = field(default_factory=lambda: [None])
    depth: list[tuple[int, ...]] = field(default_factory=list)
    leaf_index: list[int] = field(default_factory=lambda: [0])
    internal_count: int = 0

    @property
    def leaf_count(self) -> int:
        return len(self.leaf_index)

    @property
    def node_count(self) -> int:
        return len(self.parent)

    def is_leaf(self, i: int) -> bool:
        return self.children[i] is None


@dataclass(frozen=True)
class Profile:
    """Sparse census of external nodes by weighted level l in Z^d."""

    counts: dict[tuple[int, ...], int]
    n: int

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def sorted_items(self):
        return sorted(self.counts.items())

    def get(self, level) -> int:
        if isinstance(level, int):
            level = (level,)
        return self.counts.get(tuple(level), 0)


@dataclass(frozen=True)
class GrowthTrace:
    """Replayable record of (leaf-choice index, atom index) per growth step."""

    steps: tuple[tuple[int, int], ...]


def _new_tree(model: WeightModel) -> Tree:
    t = Tree(b=model.b, d=model.d)
    t.depth = [tuple(model.root_shift)]
    return t


def _apply_step(tree: Tree, model: WeightModel, leaf_choice: int, atom_idx: int) -> None:
    b = tree.b
    node = tree.leaf_index[leaf_choice]
    base = tree.depth[node]
    weights = model.atoms[atom_idx][1]
    first = len(tree.parent)
    kids = tuple(range(first, first + b))
    tree.children[node] = kids
    for z in weights:
        tree.parent.append(node)
        tree.children.append(None)
        tree.depth.append(tuple(c + int(w) for c, w in zip(base, z)))
    # swap-remove keeps leaf selection O(1) and uniform
    tree.leaf_index[leaf_choice] = kids[0]
    tree.leaf_index.extend(kids[1:])
    tree.internal_count += 1


def grow(
    model: WeightModel,
    n: int,
    rng: np.random.Generator,
    trace: bool = False,
    max_nodes: int = DEFAULT_NODE_CAP,
) -> Tree | tuple[Tree, GrowthTrace]:
    """Grow the discrete tree to n internal nodes, replacing a uniformly
    chosen leaf with b weighted children at every step."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if 1 + n * model.b > max_nodes:
        raise ResourceLimitError(
            f"growing to n={n} needs {1 + n * model.b} nodes, cap is {max_nodes}"
        )
    cum = model.cum_probs
    tree = _new_tree(model)
    steps = [] if trace else None
    for _ in range(n):
        leaf_choice = int(rng.integers(0, tree.leaf_count))
        atom_idx = int(np.searchsorted(cum, rng.random(), side="right"))
        atom_idx = min(atom_idx, len(model.atoms) - 1)
        if steps is not None:
            steps.append((leaf_choice, atom_idx))
        _apply_step(tree, model, leaf_choice, atom_idx)
    if trace:
        return tree, GrowthTrace(steps=tuple(steps))
    return tree


def replay(model: WeightModel, trace: GrowthTrace, max_nodes: int = DEFAULT_NODE_CAP) -> Tree:
    """Rebuild the exact tree recorded by a growth trace."""
    if 1 + len(trace.steps) * model.b > max_nodes:
        raise ResourceLimitError("trace exceeds node cap")
    tree = _new_tree(model)
    for leaf_choice, atom_idx in trace.steps:
        _apply_step(tree, model, leaf_choice, atom_idx)
    return tree


def profile(tree: Tree) -> Profile:
    """Exact leaf census by weighted depth."""
    counts: dict[tuple[int, ...], int] = {}
    for i in tree.leaf_index:
        l = tree.depth[i]
        counts[l] = counts.get(l, 0) + 1
    return Profile(counts=counts, n=tree.internal_count)


# ---------------------------------------------------------------------------
# fast profile-only growth (no arena)
# ---------------------------------------------------------------------------


@njit(cache=False)
def _grow_levels(cum, deltas, b, n, u_leaf, u_atom, levels):
    # levels: preallocated ((b-1)n+1, d) int64, row 0 prefilled with root_shift
    count = 1
    natoms = cum.size
    d = levels.shape[1]
    for step in range(n):
        i = int(u_leaf[step] * count)
        if i >= count:
            i = count - 1
        a = np.searchsorted(cum, u_atom[step], side="right")
        if a >= natoms:
            a = natoms - 1
        for k in range(d):
            base = levels[i, k]
            levels[i, k] = base + deltas[a, 0, k]
            for j in range(1, b):
                levels[count + j - 1, k] = base + deltas[a, j, k]
        count += b - 1
    return count


def sample_leaf_levels(model: WeightModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Weighted depths of all (b-1)n+1 leaves, as an int64 array of shape
    (leaves, d).  Same growth law as grow(), on a flat array."""
    b = model.b
    leaves = (b - 1) * n + 1
    levels = np.empty((leaves, model.d), dtype=np.int64)
    levels[0] = np.asarray(model.root_shift, dtype=np.int64)
    u_leaf = rng.random(n)
    u_atom = rng.random(n)
    _grow_levels(model.cum_probs, model.weight_array, b, n, u_leaf, u_atom, levels)
    return levels


def sample_profile(model: WeightModel, n: int, rng: np.random.Generator) -> Profile:
    """Profile of one grown tree, via the flat-array kernel."""
    levels = sample_leaf_levels(model, n, rng)
    uniq, cnt = np.unique(levels, axis=0, return_counts=True)
    counts = {tuple(int(x) for x in row): int(c) for row, c in zip(uniq, cnt)}
    return Profile(counts=counts, n=n)


# ---------------------------------------------------------------------------
# embedding times and related limits
# ---------------------------------------------------------------------------


def _tau_rates(b: int, n: int) -> np.ndarray:
    j = np.arange(1, n + 1)
    return (b - 1) * (j - 1) + 1.0


def sample_tau(b: int, n: int, rng: np.random.Generator) -> float:
    """One draw of the n-th death time: sum of E_j / ((b-1)(j-1)+1)."""
    if n < 1 or b < 2:
        raise ValueError("need n >= 1 and b >= 2")
    return float((rng.exponential(size=n) / _tau_rates(b, n)).sum())


def yule_limit_samples(b: int, n: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    """reps draws of (b-1) n exp(-(b-1) tau_n); the large-n law is
    Gamma(shape 1/(b-1), rate 1/(b-1)), mean one."""
    rates = _tau_rates(b, n)
    out = np.empty(reps)
    chunk = max(1, int(2e7) // max(n, 1))
    for lo in range(0, reps, chunk):
        hi = min(lo + chunk, reps)
        taus = (rng.exponential(size=(hi - lo, n)) / rates).sum(axis=1)
        out[lo:hi] = (b - 1) * n * np.exp(-(b - 1) * taus)
    return out


# ---------------------------------------------------------------------------
# subtree sizes
# ---------------------------------------------------------------------------


def subtree_fractions(tree: Tree) -> tuple[float, ...]:
    """Leaf fractions of the b subtrees hanging off the root's children."""
    if tree.internal_count < 1:
        raise ValueError("root has not split yet")
    roots = tree.children[0]
    owner = {}
    for r in roots:
        owner[r] = r
    counts = dict.fromkeys(roots, 0)
    # resolve each leaf's root-child ancestor by walking up with memoization
    cache: dict[int, int] = {r: r for r in roots}

    def top(i: int) -> int:
        path = []
        while i not in cache:
            path.append(i)
            i = tree.parent[i]
        r = cache[i]
        for p in path:
            cache[p] = r
        return r

    for leaf in tree.leaf_index:
        counts[top(leaf)] += 1
    total = tree.leaf_count
    return tuple(counts[r] / total for r in roots)


@njit(cache=False)
def _subtree_counts(b, n, u_leaf, ids, counts):
    # step 0 already applied by caller: ids[0:b] = 0..b-1, count = b
    count = b
    for step in range(1, n):
        i = int(u_leaf[step - 1] * count)
        if i >= count:
            i = count - 1
        sid = ids[i]
        for j in range(1, b):
            ids[count + j - 1] = sid
        count += b - 1
    for i in range(count):
        counts[ids[i]] += 1


def subtree_fraction_samples(b: int, n: int, reps: int, rng: np.random.Generator) -> np.ndarray:
    """reps independent draws of the b-vector of root-subtree leaf fractions
    at size n, using the flat growth kernel (weights are irrelevant here)."""
    if n < 1:
        raise ValueError("need n >= 1")
    out = np.empty((reps, b))
    leaves = (b - 1) * n + 1
    for r in range(reps):
        ids = np.empty(leaves, dtype=np.int32)
        ids[:b] = np.arange(b)
        counts = np.zeros(b, dtype=np.int64)
        _subtree_counts(b, n, rng.random(n - 1), ids, counts)
        out[r] = counts / leaves
    return out
