"""Small dense linear-algebra kernels with an operation counter.

Every higher-level structure in this package keeps its data as small
dense matrices; the routines here are the only place where actual
floating-point work happens, so they also maintain the multiply-add
counter used by the complexity checks.

Counting convention: a product of an (m, n) matrix with an n-vector
costs m*n multiply-adds, a product with an (n, p) matrix costs m*n*p,
and applying one Householder reflection of active length L to a single
column costs 2*L.  Comparisons and copies are not counted.

The Householder routines fix signs so that the triangular factor has a
non-negative diagonal.  For input with orthonormal columns this forces
R = I, which means the leading columns of the accumulated transform
coincide with the input itself; one application of the adjoint
transform then yields both projection coefficients (leading rows) and
the exact residual (trailing rows).
"""

import contextlib
import contextvars

import numpy as np

__all__ = [
    "FlopCounter",
    "count_flops",
    "phase",
    "tally",
    "matmul",
    "matvec",
    "axpy",
    "vdot",
    "ReflectorStack",
    "triangularize",
    "triangular_factor",
    "OrthonormalComplement",
    "extend_to_orthonormal",
]

_COUNTER: contextvars.ContextVar = contextvars.ContextVar(
    "h2vec_flop_counter", default=None
)


class FlopCounter:
    """Tally of multiply-add operations, optionally split by phase."""

    def __init__(self):
        self.total = 0
        self.phases = {}
        self._phase = None

    def add(self, n):
        self.total += n
        if self._phase is not None:
            self.phases[self._phase] = self.phases.get(self._phase, 0) + n

    def reset(self):
        self.total = 0
        self.phases.clear()

    def __repr__(self):
        return f"FlopCounter(total={self.total}, phases={self.phases})"


@contextlib.contextmanager
def count_flops():
    """Install a fresh counter for the duration of the block.

    Counters nest; only the innermost active counter receives tallies,
    which keeps concurrent runs (each inside its own context) isolated.
    """
    counter = FlopCounter()
    token = _COUNTER.set(counter)
    try:
        yield counter
    finally:
        _COUNTER.reset(token)


@contextlib.contextmanager
def phase(name):
    """Attribute tallies inside the block to a named phase."""
    counter = _COUNTER.get()
    if counter is None:
        yield
        return
    previous = counter._phase
    counter._phase = name
    try:
        yield
    finally:
        counter._phase = previous


def tally(n):
    counter = _COUNTER.get()
    if counter is not None:
        counter.add(int(n))


def matmul(a, b):
    """Counted matrix-matrix product with shape check."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    tally(a.shape[0] * a.shape[1] * b.shape[1])
    return a @ b


def matvec(a, x):
    """Counted matrix-vector product with shape check."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if a.ndim != 2 or x.ndim != 1 or a.shape[1] != x.shape[0]:
        raise ValueError(f"matvec shape mismatch: {a.shape} x {x.shape}")
    tally(a.shape[0] * a.shape[1])
    return a @ x


def axpy(alpha, x, y):
    """Counted y + alpha*x for equal-length vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"axpy shape mismatch: {x.shape} vs {y.shape}")
    tally(x.size)
    return y + alpha * x


def vdot(x, y):
    """Counted inner product."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"vdot shape mismatch: {x.shape} vs {y.shape}")
    tally(x.size)
    return float(x @ y)


class ReflectorStack:
    """Product of Householder reflections plus a diagonal sign fix.

    Represents an orthogonal Q of size dim x dim through ``count``
    elementary reflections and a sign vector, such that Q^T A = [R; 0]
    with R upper triangular and non-negative on the diagonal.
    """

    def __init__(self, dim, vectors, betas, signs):
        self.dim = dim
        self.count = len(vectors)
        self.vectors = vectors
        self.betas = betas
        self.signs = signs

    def apply_adjoint(self, x):
        """Return Q^T x; x may be a vector or a matrix of columns.

        For input assembled as A*z with A the triangularized matrix,
        the leading ``count`` rows carry the coefficients R*z and the
        trailing rows the orthogonal-complement part.
        """
        y = np.array(x, dtype=float, copy=True)
        if y.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: {y.shape[0]} != {self.dim}")
        ncols = 1 if y.ndim == 1 else y.shape[1]
        for j in range(self.count):
            v = self.vectors[j]
            beta = self.betas[j]
            tally(2 * v.size * ncols)
            if beta == 0.0:
                continue
            seg = y[j:]
            if y.ndim == 1:
                seg -= (beta * (v @ seg)) * v
            else:
                seg -= np.outer(v, beta * (v.T @ seg))
        if y.ndim == 1:
            y[: self.count] *= self.signs
        else:
            y[: self.count] *= self.signs[:, None]
        tally(self.count * ncols)
        return y

    def apply(self, x):
        """Return Q x (inverse of apply_adjoint)."""
        y = np.array(x, dtype=float, copy=True)
        if y.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: {y.shape[0]} != {self.dim}")
        ncols = 1 if y.ndim == 1 else y.shape[1]
        if y.ndim == 1:
            y[: self.count] *= self.signs
        else:
            y[: self.count] *= self.signs[:, None]
        tally(self.count * ncols)
        for j in reversed(range(self.count)):
            v = self.vectors[j]
            beta = self.betas[j]
            tally(2 * v.size * ncols)
            if beta == 0.0:
                continue
            seg = y[j:]
            if y.ndim == 1:
                seg -= (beta * (v @ seg)) * v
            else:
                seg -= np.outer(v, beta * (v.T @ seg))
        return y

    def thin_q(self):
        """Materialize the leading ``count`` columns of Q."""
        e = np.zeros((self.dim, self.count))
        e[: self.count, : self.count] = np.eye(self.count)
        return self.apply(e)


def _householder_sweep(a):
    """In-place Householder sweep; returns (vectors, betas, reduced a)."""
    m, n = a.shape
    steps = min(m, n)
    vectors = []
    betas = []
    for j in range(steps):
        x = a[j:, j].copy()
        tally(3 * x.size)
        sigma = float(x[1:] @ x[1:])
        v = x.copy()
        v[0] = 1.0
        if sigma == 0.0 and x[0] >= 0.0:
            beta = 0.0
            alpha = x[0]
        elif sigma == 0.0:
            # pure sign flip of the leading entry
            beta = 2.0
            alpha = -x[0]
        else:
            mu = np.sqrt(x[0] * x[0] + sigma)
            # v0 = x[0] - mu in both branches; the second form avoids
            # cancellation for positive leading entries.
            if x[0] <= 0.0:
                v0 = x[0] - mu
            else:
                v0 = -sigma / (x[0] + mu)
            beta = 2.0 * v0 * v0 / (sigma + v0 * v0)
            v = x / v0
            v[0] = 1.0
            alpha = mu
        vectors.append(v)
        betas.append(beta)
        if beta != 0.0:
            block = a[j:, j:]
            tally(2 * block.size)
            block -= np.outer(v, beta * (v.T @ block))
        a[j, j] = alpha
        a[j + 1 :, j] = 0.0
    return vectors, betas, a


def triangularize(a):
    """Householder QR of a tall matrix with non-negative diagonal.

    Parameters
    ----------
    a : (m, n) array with m >= n and finite entries.

    Returns
    -------
    stack : ReflectorStack
        The orthogonal factor; ``stack.thin_q() @ r`` reproduces ``a``.
    r : (n, n) ndarray
        Upper triangular with non-negative diagonal.
    """
    a = np.array(a, dtype=float, copy=True, order="F")
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    m, n = a.shape
    if m < n:
        raise ValueError(f"need at least as many rows as columns, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries in input")
    vectors, betas, a = _householder_sweep(a)
    diag = np.diagonal(a)[:n].copy()
    signs = np.where(diag < 0.0, -1.0, 1.0)
    r = a[:n] * signs[:, None]
    return ReflectorStack(m, vectors, betas, signs), np.triu(r)


def triangular_factor(a):
    """Upper-trapezoidal factor of a QR with non-negative diagonal.

    Works for any shape; returns an array of shape (min(m, n), n) with
    the same column Gram matrix as ``a``.
    """
    a = np.array(a, dtype=float, copy=True, order="F")
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    m, n = a.shape
    if m == 0 or n == 0:
        return np.zeros((min(m, n), n))
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries in input")
    _, _, a = _householder_sweep(a)
    steps = min(m, n)
    r = a[:steps].copy()
    diag = np.diagonal(r).copy()
    signs = np.where(diag < 0.0, -1.0, 1.0)
    r *= signs[:, None]
    return np.triu(r)


class OrthonormalComplement:
    """Applicator for the orthonormal complement of an isometric matrix.

    Wraps the reflector stack of Q (m x n, orthonormal columns) so that
    ``apply_adjoint`` maps an m-vector to its (m - n) complement
    coefficients and ``apply`` embeds complement coefficients back.
    """

    def __init__(self, stack):
        self._stack = stack
        self.dim = stack.dim
        self.codim = stack.dim - stack.count

    def apply_adjoint(self, x):
        return self._stack.apply_adjoint(x)[self._stack.count :]

    def apply(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.codim:
            raise ValueError(f"dimension mismatch: {y.shape[0]} != {self.codim}")
        if y.ndim == 1:
            full = np.zeros(self.dim)
            full[self._stack.count :] = y
        else:
            full = np.zeros((self.dim, y.shape[1]))
            full[self._stack.count :] = y
        return self._stack.apply(full)

    def materialize(self):
        return self.apply(np.eye(self.codim))


def extend_to_orthonormal(q, tol=1e-12):
    """Extend an isometric matrix to an orthonormal basis.

    Returns an OrthonormalComplement P with [q, P] orthogonal.  Raises
    if q fails the isometry check ``max|q^T q - I| <= tol``.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] < q.shape[1]:
        raise ValueError(f"expected a tall matrix, got {q.shape}")
    gram = q.T @ q
    defect = np.max(np.abs(gram - np.eye(q.shape[1]))) if q.shape[1] else 0.0
    if defect > tol:
        raise ValueError(f"matrix is not isometric: defect {defect:.3e} > {tol:.3e}")
    stack, _ = triangularize(q)
    return OrthonormalComplement(stack)
