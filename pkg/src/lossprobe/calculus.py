"""
Gradients, Hessians and symmetric eigenvalues.

The production gradient is backpropagation through the fused
sigmoid/softmax + cross-entropy output. ``numeric_gradient`` is a plain
central-difference oracle kept independent of it. Hessians are central
differences of the analytic gradient, and their spectra come from a cyclic
Jacobi eigensolver.
"""

from __future__ import annotations

import warnings

import numba
import numpy as np

from .nn import elu_derivative, loss, output_delta, param_count, propagate, unpack

__all__ = [
    "CapExceeded",
    "NonSymmetricError",
    "DEFAULT_HESSIAN_CAP",
    "loss_and_gradient",
    "gradient",
    "numeric_gradient",
    "fd_hessian",
    "hessian",
    "eigvals_sym",
    "grad_norm",
]

DEFAULT_HESSIAN_CAP = 2000
HESSIAN_STEP = 1e-4
JACOBI_TOL = 1e-10


class CapExceeded(RuntimeError):
    """Raised when a Hessian is requested for more parameters than the cap allows."""


class NonSymmetricError(ValueError):
    pass


def loss_and_gradient(arch, params, batch):
    """Mean loss, its gradient and the output activations in one pass.

    ``params`` may be a stack ``(..., m)``; loss and gradient then carry the
    same leading axes.
    """
    batch.check(arch)
    out, cache = propagate(arch, params, batch.inputs)
    targets = batch.targets
    value = loss(out, targets)
    n = len(batch)
    layers = unpack(arch, params)

    delta = output_delta(arch, out, cache[-1][1], targets) / n
    grads = []
    for k in range(len(layers) - 1, -1, -1):
        a_in, _ = cache[k]
        dW = np.swapaxes(a_in, -1, -2) @ delta
        db = delta.sum(axis=-2, keepdims=True)
        grads.append(np.concatenate([dW, db], axis=-2))
        if k > 0:
            W = layers[k][0]
            delta = (delta @ np.swapaxes(W, -1, -2)) * elu_derivative(cache[k - 1][1])
    lead = np.shape(params)[:-1]
    flat = [g.reshape(*lead, -1) for g in reversed(grads)]
    return value, np.concatenate(flat, axis=-1), out


def gradient(arch, params, batch):
    """Gradient of the mean batch loss with respect to the flat parameter vector."""
    return loss_and_gradient(arch, params, batch)[1]


def numeric_gradient(objective, params, step=1e-5):
    """Central-difference gradient of a scalar ``objective``, one coordinate at a time."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(params, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        orig = x[j]
        x[j] = orig + step
        f_plus = objective(x)
        x[j] = orig - step
        f_minus = objective(x)
        x[j] = orig
        g[j] = (f_plus - f_minus) / (2.0 * step)
    return g


def fd_hessian(grad_fn, params, step=HESSIAN_STEP, stacked=False):
    """Symmetrised central-difference Hessian from a gradient function.

    Column ``j`` is ``(g(x + h e_j) - g(x - h e_j)) / 2h``. With ``stacked=True``
    ``grad_fn`` receives all ``2m`` shifted points at once as a ``(2m, m)`` array.
    """
    x = np.asarray(params, dtype=float)
    m = x.size
    shifts = step * np.eye(m)
    if stacked:
        g = grad_fn(np.concatenate([x + shifts, x - shifts]))
        g_plus, g_minus = g[:m], g[m:]
    else:
        g_plus = np.array([grad_fn(x + s) for s in shifts])
        g_minus = np.array([grad_fn(x - s) for s in shifts])
    # row j holds d(grad)/dx_j, i.e. column j of H
    H = (g_plus - g_minus) / (2.0 * step)
    return 0.5 * (H + H.T)


def hessian(arch, params, batch, cap=DEFAULT_HESSIAN_CAP, step=HESSIAN_STEP):
    m = param_count(arch)
    if m > cap:
        raise CapExceeded(f"{arch} has {m} parameters, above the Hessian cap of {cap}")
    return fd_hessian(lambda p: gradient(arch, p, batch), params, step, stacked=True)


@numba.njit(cache=True)
def _jacobi_diagonalise(A, tol, max_sweeps):
    # row-cyclic sweeps over all (p, q) pairs, rotating A in place
    n = A.shape[0]
    threshold = tol * np.sqrt(np.sum(A * A))
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += A[i, j] * A[i, j]
        if np.sqrt(off) <= threshold:
            return True
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
    return False


def eigvals_sym(H, tol=JACOBI_TOL, max_sweeps=100):
    """Eigenvalues of a symmetric matrix in ascending order.

    Cyclic Jacobi rotations, stopping once the off-diagonal Frobenius norm
    falls below ``tol * ||H||_F``.
    """
    A = np.array(H, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSymmetricError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = np.linalg.norm(A)
    if not np.allclose(A, A.T, rtol=1e-8, atol=1e-8 * scale):
        raise NonSymmetricError("matrix is not symmetric")
    A = np.ascontiguousarray(0.5 * (A + A.T))
    if not _jacobi_diagonalise(A, tol, max_sweeps):
        warnings.warn(f"Jacobi did not converge in {max_sweeps} sweeps", RuntimeWarning)
    return np.sort(np.diag(A))


def grad_norm(g):
    return float(np.sqrt(np.dot(g, g)))
