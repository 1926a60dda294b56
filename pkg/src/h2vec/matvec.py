"""H2-matrix times hierarchical vector.

The product descends the block tree and stops at the input vector's
leaves.  Contributions of leaf blocks are collected through coupling
matrices; where a non-leaf block meets an input leaf, the raw input
coefficient is parked in an extra slot of the accumulator.  The result
therefore lives in the induced cluster basis: the row basis augmented,
per cluster, with the matrix columns hit by such parked coefficients.
Two backward transformations distribute the accumulators into leaf
coefficients: the slot-aware one below, or the standard one applied to
an explicitly materialized induced basis.

The product is exact; only the representation is unusual.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .basis import cross_gram_family
from .hvector import HVector
from .tree import Subtree

__all__ = [
    "MatvecPlan",
    "InducedHVector",
    "build_plan",
    "multiply",
    "multiply_via_basis",
    "standard_backward",
    "induced_to_dense",
    "to_hvector",
]


@dataclass
class MatvecPlan:
    """Per-(matrix, input basis) precomputation reused across products.

    nonleaf_cols[t] lists, in block construction order, the column
    clusters forming non-leaf blocks with row cluster t; offsets maps
    (t, s) to the slot of s inside t's accumulator; rank[t] is the
    induced rank of t.  cross[s] = W_s^T Q_s couples the matrix column
    basis with the input basis.
    """

    matrix: object
    input_basis: object
    cross: dict
    nonleaf_cols: dict
    offsets: dict
    rank: dict

    @property
    def max_rank(self):
        return max(self.rank.values())


def build_plan(matrix, input_basis):
    if input_basis.tree is not matrix.block_tree.col_tree:
        raise ValueError("input basis does not live on the column tree")
    cross = cross_gram_family(matrix.col_basis, input_basis)
    ka = matrix.rank
    k = input_basis.rank
    nonleaf_cols = {t: [] for t in range(len(matrix.block_tree.row_tree))}
    for b in matrix.block_tree.blocks:
        if not b.is_leaf:
            nonleaf_cols[b.row].append(b.col)
    nonleaf_cols = {t: tuple(v) for t, v in nonleaf_cols.items()}
    offsets = {}
    rank = {}
    for t, cols in nonleaf_cols.items():
        for j, s in enumerate(cols):
            offsets[(t, s)] = ka + j * k
        rank[t] = ka + k * len(cols)
    return MatvecPlan(matrix, input_basis, cross, nonleaf_cols, offsets, rank)


class InducedHVector:
    """Result of a product: subtree over the row tree plus, per leaf,
    one coefficient vector in the induced layout of its cluster."""

    def __init__(self, plan, sub, coeff):
        self.plan = plan
        self.sub = sub
        self.coeff = coeff


def _forward(x, plan, out):
    """Bottom-up pass computing W_s^T x|_s for every subtree member."""
    tree = x.basis.tree
    col_transfer = plan.matrix.col_basis.transfer

    def walk(s):
        if x.sub.is_leaf(s):
            out[s] = kernels.matvec(plan.cross[s], x.coeff[s])
            return
        acc = np.zeros(plan.matrix.rank)
        for s2 in tree.sons(s):
            walk(s2)
            acc = kernels.axpy(1.0, kernels.matvec(col_transfer[s2].T, out[s2]), acc)
        out[s] = acc

    walk(tree.root)


def _coupling(x, plan, xbar, y, bars):
    """Collect all block contributions, refining the result subtree."""
    bt = plan.matrix.block_tree
    row_tree = bt.row_tree
    k = plan.input_basis.rank

    def walk(bid):
        b = bt.blocks[bid]
        t, s = b.row, b.col
        if b.is_leaf:
            bars[t][: plan.matrix.rank] += kernels.matvec(
                plan.matrix.coupling[bid], xbar[s]
            )
        elif x.sub.is_leaf(s):
            o = plan.offsets[(t, s)]
            bars[t][o : o + k] = kernels.axpy(1.0, x.coeff[s], bars[t][o : o + k])
        else:
            if y.sub.is_leaf(t):
                y.sub.expand(t)
                for t2 in row_tree.sons(t):
                    bars[t2] = np.zeros(plan.rank[t2])
            for sid in b.sons:
                walk(sid)

    walk(bt.root)


def _induced_backward(plan, bars, y):
    """Top-down pass folding accumulators into leaf coefficients."""
    mat = plan.matrix
    bt = mat.block_tree
    row_tree = bt.row_tree
    col_tree = bt.col_tree
    row_transfer = mat.row_basis.transfer
    input_transfer = plan.input_basis.transfer
    ka = mat.rank
    k = plan.input_basis.rank

    def walk(t):
        if y.sub.is_leaf(t):
            y.coeff[t] = bars[t].copy()
            return
        for t2 in row_tree.sons(t):
            bars[t2][:ka] += kernels.matvec(row_transfer[t2], bars[t][:ka])
            for s in plan.nonleaf_cols[t]:
                o = plan.offsets[(t, s)]
                seg = bars[t][o : o + k]
                for s2 in col_tree.sons(s):
                    bid = bt.by_pair[(t2, s2)]
                    pushed = kernels.matvec(input_transfer[s2], seg)
                    if bt.blocks[bid].is_leaf:
                        bars[t2][:ka] += kernels.matvec(
                            mat.coupling[bid], kernels.matvec(plan.cross[s2], pushed)
                        )
                    else:
                        o2 = plan.offsets[(t2, s2)]
                        bars[t2][o2 : o2 + k] += pushed
            walk(t2)

    walk(row_tree.root)


def multiply(plan, x):
    """Exact product of the planned matrix with a hierarchical vector.

    Returns an InducedHVector.  Operation counts are attributed to the
    phases "forward", "coupling" and "backward".
    """
    if x.basis is not plan.input_basis:
        raise ValueError("plan was built for a different input basis")
    bt = plan.matrix.block_tree
    xbar = {}
    with kernels.phase("forward"):
        _forward(x, plan, xbar)
    y = InducedHVector(plan, Subtree(bt.row_tree), {})
    bars = {bt.row_tree.root: np.zeros(plan.rank[bt.row_tree.root])}
    with kernels.phase("coupling"):
        _coupling(x, plan, xbar, y, bars)
    with kernels.phase("backward"):
        _induced_backward(plan, bars, y)
    return y


def standard_backward(basis, sub, bars):
    """Distribute accumulators over a subtree via plain transfers.

    bars maps every member of sub to a rank-length vector; the result
    is the hierarchical vector collecting all contributions at the
    leaves.  The input dict is not modified.
    """
    tree = basis.tree
    work = {i: np.array(v, dtype=float, copy=True) for i, v in bars.items()}
    out = HVector(basis, sub.copy(), {})

    def walk(t):
        if sub.is_leaf(t):
            out.coeff[t] = work[t]
            return
        for t2 in tree.sons(t):
            work[t2] = kernels.axpy(
                1.0, kernels.matvec(basis.transfer[t2], work[t]), work[t2]
            )
            walk(t2)

    walk(tree.root)
    return out


def multiply_via_basis(plan, induced_basis, x):
    """Product routed through an explicit induced basis.

    Runs the same forward and coupling passes as `multiply`, then pads
    the accumulators to the uniform rank of the materialized induced
    basis and applies the standard backward transformation.  Returns
    an HVector over that basis.
    """
    if x.basis is not plan.input_basis:
        raise ValueError("plan was built for a different input basis")
    bt = plan.matrix.block_tree
    xbar = {}
    with kernels.phase("forward"):
        _forward(x, plan, xbar)
    y = InducedHVector(plan, Subtree(bt.row_tree), {})
    bars = {bt.row_tree.root: np.zeros(plan.rank[bt.row_tree.root])}
    with kernels.phase("coupling"):
        _coupling(x, plan, xbar, y, bars)
    rank = induced_basis.rank
    padded = {}
    for t, v in bars.items():
        w = np.zeros(rank)
        w[: v.size] = v
        padded[t] = w
    with kernels.phase("backward"):
        return standard_backward(induced_basis, y.sub, padded)


def to_hvector(y, induced_basis):
    """Reinterpret an InducedHVector over the materialized induced basis."""
    rank = induced_basis.rank
    coeff = {}
    for t, v in y.coeff.items():
        w = np.zeros(rank)
        w[: v.size] = v
        coeff[t] = w
    return HVector(induced_basis, y.sub.copy(), coeff)


def induced_to_dense(y, dense_matrix=None):
    """Dense expansion of an InducedHVector (tree position order).

    dense_matrix may supply a precomputed dense expansion of the
    planned matrix to avoid recomputing it.
    """
    from .h2matrix import to_dense as h2_to_dense

    plan = y.plan
    mat = plan.matrix
    row_tree = mat.block_tree.row_tree
    col_tree = mat.block_tree.col_tree
    if dense_matrix is None:
        dense_matrix = h2_to_dense(mat)
    ka = mat.rank
    k = plan.input_basis.rank
    out = np.zeros(row_tree.n)
    for t in y.sub.leaves():
        v = y.coeff[t]
        block = mat.row_basis.materialize(t) @ v[:ka]
        for s in plan.nonleaf_cols[t]:
            o = plan.offsets[(t, s)]
            seg = v[o : o + k]
            cols = plan.input_basis.materialize(s) @ seg
            block = block + dense_matrix[row_tree.positions(t), col_tree.positions(s)] @ cols
        out[row_tree.positions(t)] = block
    return out
