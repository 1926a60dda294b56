"""Adaptive basis conversion with exact error control.

Converting a hierarchical vector into a different (isometric) basis
descends the source subtree: where the exact projection error fits the
local budget the projected coefficient is committed, otherwise the
coefficient is pushed to the sons and the descent continues.  On the
way back up, sons are merged again whenever the exact merge error
keeps the accumulated bound inside the local budget.

The local budget at a cluster holding a fraction f of all indices is
eps * sqrt(f): committed leaves have disjoint supports, so the global
error is bounded by eps.  Accumulated bounds follow the recursion
acc(t) = local(t) + sqrt(sum of son acc squared), an upper bound for
the true error by the triangle inequality along refinement chains and
Pythagoras across disjoint supports.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .basis import ClusterBasis
from .hvector import HVector
from .tree import Subtree

__all__ = [
    "ToleranceBudget",
    "ConversionReport",
    "materialize_induced",
    "convert",
    "coarsen_pass",
]


@dataclass
class ToleranceBudget:
    """Global tolerance with per-cluster split and round-off floor.

    rel_floor widens acceptance tests by a tiny multiple of the local
    coefficient norm so that exact representations (errors at round-off
    level) are recognized even for eps = 0; accumulated bounds always
    use the true computed errors, never the floor.
    """

    eps: float
    rel_floor: float = 1e-12

    def local(self, size, total):
        return self.eps * math.sqrt(size / total)


@dataclass
class ConversionReport:
    """Per-cluster exact local errors committed during one conversion."""

    commit_errors: dict = field(default_factory=dict)
    merge_errors: dict = field(default_factory=dict)
    forced: list = field(default_factory=list)
    bound: float = 0.0
    cluster_count: int = 0

    def write_csv(self, path):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["cluster", "kind", "error"])
            for i, e in sorted(self.commit_errors.items()):
                writer.writerow([i, "commit", f"{e:.17g}"])
            for i, e in sorted(self.merge_errors.items()):
                writer.writerow([i, "merge", f"{e:.17g}"])
            writer.writerow(["total", "bound", f"{self.bound:.17g}"])
            writer.writerow(["total", "clusters", self.cluster_count])


def materialize_induced(plan):
    """Explicit nested basis realizing the induced layout of a plan.

    The rank is padded to the maximum induced rank; leaf matrices carry
    the row basis in the leading columns (leaves never own extra
    slots), and transfer matrices assemble the coupling, cross-gram and
    input-transfer products that the slot-aware backward transformation
    would apply.
    """
    mat = plan.matrix
    bt = mat.block_tree
    row_tree = bt.row_tree
    col_tree = bt.col_tree
    ka = mat.rank
    k = plan.input_basis.rank
    rank = plan.max_rank
    leaf_matrix = {}
    transfer = {}
    for t in range(len(row_tree)):
        if row_tree.is_leaf(t):
            u = np.zeros((row_tree.size(t), rank))
            u[:, :ka] = mat.row_basis.leaf_matrix[t]
            leaf_matrix[t] = u
        for t2 in row_tree.sons(t):
            e = np.zeros((rank, rank))
            e[:ka, :ka] = mat.row_basis.transfer[t2]
            for s in plan.nonleaf_cols[t]:
                o = plan.offsets[(t, s)]
                for s2 in col_tree.sons(s):
                    bid = bt.by_pair[(t2, s2)]
                    f = plan.input_basis.transfer[s2]
                    if bt.blocks[bid].is_leaf:
                        e[:ka, o : o + k] += kernels.matmul(
                            mat.coupling[bid], kernels.matmul(plan.cross[s2], f)
                        )
                    else:
                        o2 = plan.offsets[(t2, s2)]
                        e[o2 : o2 + k, o : o + k] = f
            transfer[t2] = e
    return ClusterBasis(row_tree, rank, leaf_matrix, transfer, isometric=False)


def convert(x, target, zfactors, pfactors, budget):
    """Approximate x in a different isometric basis, adaptively.

    Parameters
    ----------
    x : HVector over the source basis.
    target : isometric ClusterBasis on the same tree.
    zfactors : ProjectionFactors for (source, target).
    pfactors : merge factors of the target basis.
    budget : ToleranceBudget.

    Returns
    -------
    (y, bound, report) : the converted vector, the accumulated error
    bound acc(root) (an upper bound for the true Euclidean error), and
    the per-cluster report of exact local errors.
    """
    if zfactors.source is not x.basis or zfactors.target is not target:
        raise ValueError("projection factors do not match source/target bases")
    if not target.isometric:
        raise ValueError("target basis must be isometric")
    tree = target.tree
    total = tree.n
    kq = target.rank
    y = HVector(target, Subtree(tree), {tree.root: np.zeros(kq)})
    report = ConversionReport()

    def threshold(i, scale):
        return max(
            budget.local(tree.size(i), total), budget.rel_floor * scale
        )

    def commit(i, xhat):
        err = float(np.linalg.norm(kernels.matvec(zfactors.z[i], xhat)))
        fits = err <= threshold(i, float(np.linalg.norm(xhat)))
        if fits or tree.is_leaf(i):
            y.coeff[i] = kernels.matvec(zfactors.cross[i], xhat)
            report.commit_errors[i] = err
            if not fits:
                report.forced.append(i)
            return err
        y.sub.expand(i)
        y.coeff.pop(i, None)
        acc = 0.0
        for s in tree.sons(i):
            acc += commit(s, kernels.matvec(x.basis.transfer[s], xhat)) ** 2
        return _ascend(i, math.sqrt(acc))

    def descend(i):
        if x.sub.is_leaf(i):
            return commit(i, x.coeff[i])
        y.sub.expand(i)
        y.coeff.pop(i, None)
        acc = 0.0
        for s in tree.sons(i):
            acc += descend(s) ** 2
        return _ascend(i, math.sqrt(acc))

    def _ascend(i, acc):
        if not all(y.sub.is_leaf(s) for s in tree.sons(i)):
            return acc
        stacked = np.concatenate([y.coeff[s] for s in tree.sons(i)])
        transformed = pfactors[i].apply_adjoint(stacked)
        merge_err = float(np.linalg.norm(transformed[kq:]))
        candidate = merge_err + acc
        if candidate <= threshold(i, float(np.linalg.norm(stacked))):
            for s in tree.sons(i):
                del y.coeff[s]
            y.sub.contract(i)
            y.coeff[i] = transformed[:kq].copy()
            report.merge_errors[i] = merge_err
            return candidate
        return acc

    bound = descend(tree.root)
    report.bound = bound
    report.cluster_count = y.sub.count()
    return y, bound, report


def coarsen_pass(y, pfactors, budget):
    """Greedy bottom-up merging of an isometric hierarchical vector.

    Merges sons wherever the accumulated exact error stays inside the
    local budget; a second pass changes nothing.  Returns the total
    bound acc(root).
    """
    if not y.basis.isometric:
        raise ValueError("coarsening requires an isometric basis")
    tree = y.basis.tree
    total = tree.n
    kq = y.basis.rank

    def walk(i):
        if y.sub.is_leaf(i):
            return 0.0
        acc = 0.0
        for s in tree.sons(i):
            acc += walk(s) ** 2
        acc = math.sqrt(acc)
        if not all(y.sub.is_leaf(s) for s in tree.sons(i)):
            return acc
        stacked = np.concatenate([y.coeff[s] for s in tree.sons(i)])
        transformed = pfactors[i].apply_adjoint(stacked)
        merge_err = float(np.linalg.norm(transformed[kq:]))
        candidate = merge_err + acc
        limit = max(
            budget.local(tree.size(i), total),
            budget.rel_floor * float(np.linalg.norm(stacked)),
        )
        if candidate <= limit:
            for s in tree.sons(i):
                del y.coeff[s]
            y.sub.contract(i)
            y.coeff[i] = transformed[:kq].copy()
            return candidate
        return acc

    return walk(tree.root)
