"""scikit-learn style wrappers around the spectral and dynamics routines.

Rows of ``X`` are graph functions (one value per vertex of the support).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import spectral
from .dynamics import classify_logistic_dirichlet
from .graph import DomainPartition, WeightedGraph


def _support_rows(X, width):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != width:
        raise ValueError(f"expected {width} columns, got {X.shape[1]}")
    return X


class SpectralBasis(TransformerMixin, BaseEstimator):
    """Project graph functions onto Laplacian eigenfunctions.

    ``fit`` takes a WeightedGraph (kind="full") or a DomainPartition
    (kind="dirichlet" or "neumann"). ``transform`` returns mode coefficients in
    the mu inner product, ``inverse_transform`` rebuilds the functions.
    """

    def __init__(self, kind: str = "full", n_modes: int | None = None):
        self.kind = kind
        self.n_modes = n_modes

    def fit(self, X, y=None):
        if self.kind == spectral.FULL:
            if not isinstance(X, WeightedGraph):
                raise TypeError("full spectra are fitted on a WeightedGraph")
            es = spectral.full_eigensystem(X)
        else:
            if not isinstance(X, DomainPartition):
                raise TypeError(f"{self.kind} spectra are fitted on a DomainPartition")
            es = spectral.eigensystem(self.kind, X.graph, X)
        k = es.size if self.n_modes is None else min(self.n_modes, es.size)
        self.eigensystem_ = es
        self.eigenvalues_ = es.eigenvalues[:k]
        self.components_ = es.eigenfunctions[:, :k].T
        self.n_features_in_ = es.eigenfunctions.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = _support_rows(X, self.n_features_in_)
        return (X * self.eigensystem_.weights) @ self.components_.T

    def inverse_transform(self, X):
        check_is_fitted(self)
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.components_


class HeatSmoother(TransformerMixin, BaseEstimator):
    """Apply the heat kernel at time ``t`` to each row."""

    def __init__(self, t: float = 1.0, kind: str = "full"):
        self.t = t
        self.kind = kind

    def fit(self, X, y=None):
        basis = SpectralBasis(self.kind).fit(X)
        self.kernel_ = spectral.heat_kernel(basis.eigensystem_, self.t)
        self.n_features_in_ = basis.n_features_in_
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = _support_rows(X, self.n_features_in_)
        return X @ self.kernel_.entries.T


class LogisticFate(ClassifierMixin, BaseEstimator):
    """Predict the long-time fate of logistic growth with zero Dirichlet data.

    ``fit`` takes a DomainPartition; ``predict`` takes initial data rows on the
    interior and returns outcome labels ("Extinction", "ConvergenceToState", ...).
    """

    def __init__(self, a: float = 1.0, b: float = 1.0, T: float = 200.0, dt: float = 1e-2):
        self.a = a
        self.b = b
        self.T = T
        self.dt = dt

    def fit(self, X, y=None):
        if not isinstance(X, DomainPartition):
            raise TypeError("fit expects a DomainPartition")
        self.partition_ = X
        self.lambda1_ = float(spectral.dirichlet_eigensystem(X).eigenvalues[0])
        self.n_features_in_ = X.n_interior
        self.classes_ = np.array(["ConvergenceToState", "Extinction", "Undecided"])
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = _support_rows(X, self.n_features_in_)
        return np.array([classify_logistic_dirichlet(self.partition_, self.a, self.b, row,
                                                     T=self.T, dt=self.dt).outcome for row in X])

    def score(self, X, y, sample_weight=None):
        return float(np.mean(self.predict(X) == np.asarray(y)))
