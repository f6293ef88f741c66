"""scikit-learn style wrapper around the region decomposition."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .config import DEFAULT_CAPS, DEFAULT_TOL
from .geometry import Polyhedron
from .marching import enumerate_regions
from .network import ReluNetwork

__all__ = ["PiecewiseAffineDecomposition"]


class PiecewiseAffineDecomposition(TransformerMixin, BaseEstimator):
    """Exact PWA form of a fixed ReLU network over a box.

    ``fit`` enumerates the regions over ``domain_box`` (or, when that is
    ``None``, over the bounding box of ``X``).  ``predict`` evaluates the PWA
    form, ``transform`` returns activation patterns, and ``region_index``
    returns the index of the region holding each sample.

    Parameters
    ----------
    network : ReluNetwork
    domain_box : array of shape (n_features, 2), optional
    seed : int
        Seed for choosing the marching start point.
    tol_feas : float
    region_cap : int
    n_workers : int
    """

    def __init__(self, network=None, domain_box=None, seed=0, tol_feas=DEFAULT_TOL.feas,
                 region_cap=DEFAULT_CAPS.regions, n_workers=1):
        self.network = network
        self.domain_box = domain_box
        self.seed = seed
        self.tol_feas = tol_feas
        self.region_cap = region_cap
        self.n_workers = n_workers

    def _check_network(self):
        if not isinstance(self.network, ReluNetwork):
            raise TypeError("network must be a ReluNetwork")
        return self.network

    def fit(self, X=None, y=None):
        net = self._check_network()
        if self.domain_box is not None:
            box = np.asarray(self.domain_box, dtype=float)
        elif X is not None:
            X = check_array(X)
            box = np.column_stack([X.min(axis=0), X.max(axis=0)])
        else:
            raise ValueError("need either domain_box or data X to fix the domain")
        if box.shape != (net.input_dim, 2) or np.any(box[:, 0] >= box[:, 1]):
            raise ValueError(f"domain box must have shape ({net.input_dim}, 2) with lo < hi")
        tol = DEFAULT_TOL.with_(feas=self.tol_feas)
        caps = replace(DEFAULT_CAPS, regions=int(self.region_cap))
        domain = Polyhedron.from_box(box[:, 0], box[:, 1])
        self.pwa_ = enumerate_regions(net, domain, tol=tol, caps=caps, seed=self.seed, workers=self.n_workers)
        self.n_regions_ = len(self.pwa_)
        self.n_features_in_ = net.input_dim
        self._index = {r.key: k for k, r in enumerate(self.pwa_.regions)}
        return self

    def _validate(self, X):
        check_is_fitted(self, "pwa_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def region_index(self, X) -> np.ndarray:
        """Region of each sample by activation pattern; ``-1`` when not enumerated."""
        X = self._validate(X)
        patterns = self.network.activation_pattern(X)
        return np.array([self._index.get(p.tobytes(), -1) for p in patterns], dtype=int)

    def predict(self, X) -> np.ndarray:
        X = self._validate(X)
        idx = self.region_index(X)
        if np.any(idx < 0):
            raise ValueError("some samples fall outside the fitted domain")
        out = np.empty((X.shape[0], self.network.output_dim))
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.pwa_.regions[k].map(X[sel])
        return out

    def transform(self, X) -> np.ndarray:
        X = self._validate(X)
        return self.network.activation_pattern(X)
