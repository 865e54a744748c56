"""Eigen-decompositions of the graph Laplacians and their heat kernels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import (DomainPartition, WeightedGraph, laplacian_matrix)

FULL, DIRICHLET, NEUMANN = "full", "dirichlet", "neumann"


class EigenError(RuntimeError):
    pass


def jacobi_eigh(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 100):
    """Cyclic Jacobi eigen-decomposition of a dense symmetric matrix.

    Returns ``(values, vectors)`` sorted ascending, vectors in columns.
    Stops once the off-diagonal Frobenius norm is at most
    ``tol * max(1, ||a||_F)``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix required")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    threshold = tol * max(1.0, np.linalg.norm(a))

    mask = ~np.eye(n, dtype=bool)

    def off(m):
        return np.sqrt(np.sum(m[mask] ** 2))

    for sweep in range(max_sweeps + 1):
        if off(a) <= threshold:
            break
        if sweep == max_sweeps:
            raise EigenError(f"Jacobi did not converge in {max_sweeps} sweeps")
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], v[:, order]


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues with mu-orthonormal eigenfunctions (columns).

    ``support`` holds the vertex indices the functions live on (V or the
    interior). ``extension`` maps interior values to boundary values for the
    Neumann kind (zero-flux), and is None otherwise.
    """

    kind: str
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    support: np.ndarray
    weights: np.ndarray
    extension: np.ndarray | None = None

    @property
    def size(self):
        return len(self.eigenvalues)

    def coefficients(self, u) -> np.ndarray:
        """Mode coefficients sum_x u(x) phi_j(x) mu(x); accepts (..., n) arrays."""
        return np.asarray(u) @ (self.eigenfunctions * self.weights[:, None])

    def synthesize(self, coef) -> np.ndarray:
        return np.asarray(coef) @ self.eigenfunctions.T

    def extended(self) -> np.ndarray | None:
        """Eigenfunctions on the boundary (Neumann zero-flux extension)."""
        if self.extension is None:
            return None
        return self.extension @ self.eigenfunctions

    def orthonormality_defect(self) -> float:
        g = self.eigenfunctions.T @ (self.eigenfunctions * self.weights[:, None])
        return float(np.max(np.abs(g - np.eye(self.size))))


def dirichlet_operator(p: DomainPartition) -> np.ndarray:
    """Matrix of -Delta on the interior with zero boundary values."""
    return -laplacian_matrix(p.graph)[np.ix_(p.inner, p.inner)]


def neumann_extension(p: DomainPartition) -> np.ndarray:
    """Boundary values making the normal derivative vanish: u(z) = weighted mean of interior neighbours."""
    wzy = p.interior_flux_weights()
    return wzy / wzy.sum(axis=1, keepdims=True)


def neumann_operator(p: DomainPartition) -> np.ndarray:
    """Matrix of -Delta on the interior after eliminating zero-flux boundary values."""
    g = p.graph
    w = g.weights
    inner, outer = p.inner, p.outer
    deg = w[inner].sum(axis=1)
    wxz = w[np.ix_(inner, outer)]
    s = np.diag(deg) - w[np.ix_(inner, inner)] - wxz @ neumann_extension(p)
    return s / g.measure[inner][:, None]


def _decompose(kind, op, mu, support, extension=None, cluster_gap=1e-9):
    r = np.sqrt(mu)
    sym = op * r[:, None] / r[None, :]
    vals, vecs = jacobi_eigh(0.5 * (sym + sym.T))
    phi = vecs / r[:, None]
    # re-orthonormalise near-degenerate clusters in the mu inner product
    start = 0
    for k in range(1, len(vals) + 1):
        if k == len(vals) or vals[k] - vals[k - 1] > cluster_gap:
            if k - start > 1:
                block = phi[:, start:k]
                for j in range(block.shape[1]):
                    for i in range(j):
                        block[:, j] -= np.sum(mu * block[:, i] * block[:, j]) * block[:, i]
                    block[:, j] /= np.sqrt(np.sum(mu * block[:, j] ** 2))
                phi[:, start:k] = block
            start = k
    phi /= np.sqrt(np.sum(mu[:, None] * phi * phi, axis=0))[None, :]
    for j in range(phi.shape[1]):
        if phi[np.argmax(np.abs(phi[:, j])), j] < 0:
            phi[:, j] = -phi[:, j]
    vals.setflags(write=False)
    phi.setflags(write=False)
    return EigenSystem(kind, vals, phi, np.asarray(support), mu.copy(), extension)


def full_eigensystem(graph: WeightedGraph) -> EigenSystem:
    return _decompose(FULL, -laplacian_matrix(graph), graph.measure.copy(), np.arange(graph.n))


def dirichlet_eigensystem(p: DomainPartition) -> EigenSystem:
    if not p.boundary:
        raise EigenError("Dirichlet problem needs a nonempty boundary")
    es = _decompose(DIRICHLET, dirichlet_operator(p), p.graph.measure[p.inner].copy(), p.inner)
    if np.any(es.eigenfunctions[:, 0] <= 0):
        raise EigenError("principal Dirichlet eigenfunction is not positive; is the interior connected?")
    return es


def neumann_eigensystem(p: DomainPartition) -> EigenSystem:
    if not p.boundary:
        raise EigenError("Neumann problem needs a nonempty boundary")
    wzy = p.interior_flux_weights()
    if np.any(wzy.sum(axis=1) <= 0):
        raise EigenError("boundary vertex without interior neighbour")
    return _decompose(NEUMANN, neumann_operator(p), p.graph.measure[p.inner].copy(), p.inner,
                      extension=neumann_extension(p))


def eigensystem(kind: str, graph: WeightedGraph, partition: DomainPartition | None = None):
    if kind == FULL:
        return full_eigensystem(graph)
    if partition is None:
        raise EigenError(f"{kind} eigensystem needs a domain partition")
    if kind == DIRICHLET:
        return dirichlet_eigensystem(partition)
    if kind == NEUMANN:
        return neumann_eigensystem(partition)
    raise ValueError(f"unknown kind {kind!r}")


@dataclass(frozen=True)
class HeatKernel:
    """K(x, y, t) = sum_j exp(-lambda_j t) phi_j(x) phi_j(y) mu(y) on the support."""

    kind: str
    t: float
    entries: np.ndarray
    support: np.ndarray

    def apply(self, u) -> np.ndarray:
        return self.entries @ np.asarray(u, dtype=float)


def heat_kernel(es: EigenSystem, t: float) -> HeatKernel:
    if t < 0:
        raise ValueError("t must be nonnegative")
    phi = es.eigenfunctions
    k = (phi * np.exp(-es.eigenvalues * t)[None, :]) @ (phi * es.weights[:, None]).T
    if t == 0:
        # exact identity rather than the rounded reconstruction
        k = np.eye(es.size)
    k.setflags(write=False)
    return HeatKernel(es.kind, float(t), k, es.support)


def reconstruct(es: EigenSystem) -> np.ndarray:
    """Operator matrix rebuilt from the eigensystem: Phi diag(lambda) Phi^T D_mu."""
    phi = es.eigenfunctions
    return (phi * es.eigenvalues[None, :]) @ (phi * es.weights[:, None]).T


def residual(es: EigenSystem, op: np.ndarray) -> float:
    phi = es.eigenfunctions
    return float(np.max(np.abs(op @ phi - phi * es.eigenvalues[None, :])))
