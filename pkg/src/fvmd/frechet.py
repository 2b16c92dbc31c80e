"""Gaussian fits of feature sets and the closed-form Frechet distance between them."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import DimensionMismatch, NotSymmetric, NumericalWarning, TooFewSamples
from .motion_features import MotionFeature

DEFAULT_EPS = 1e-6
SYMMETRY_TOL = 1e-8


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    n_samples: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class FvmdScore:
    value: float
    d: int
    n_gen: int
    n_ref: int
    eps: float = DEFAULT_EPS
    feature_config: dict = field(default_factory=dict)
    tracker_source: str = ""
    library_version: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def as_feature_matrix(features) -> np.ndarray:
    """Stack features (list of MotionFeature or rows of an array) into (n, d) float64."""
    if isinstance(features, np.ndarray):
        X = features
    else:
        features = list(features)
        kinds = {(f.fields, f.hist) for f in features if isinstance(f, MotionFeature)}
        if len(kinds) > 1:
            raise DimensionMismatch(f"mixed feature kinds {sorted(kinds)}")
        rows = [f.data if isinstance(f, MotionFeature) else np.asarray(f) for f in features]
        dims = {r.shape for r in rows}
        if len(dims) > 1:
            raise DimensionMismatch(f"features of differing shapes {sorted(dims)}")
        X = np.stack(rows) if rows else np.empty((0, 0))
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D feature matrix, got shape {X.shape}")
    return X


def fit_gaussian(features) -> GaussianStats:
    """Sample mean and unbiased (n - 1) covariance; the covariance is exactly symmetric."""
    X = as_feature_matrix(features)
    n, d = X.shape
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples to fit a Gaussian, got {n}")
    if n < d:
        warnings.warn(
            f"{n} samples for {d}-dimensional features: covariance is rank deficient",
            stacklevel=2,
        )
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    cov = (cov + cov.T) / 2
    return GaussianStats(mean, cov, n)


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {M.shape}")
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > SYMMETRY_TOL:
        raise NotSymmetric(f"matrix asymmetry {asym:.3g} exceeds {SYMMETRY_TOL}")
    return (M + M.T) / 2


def sqrtm_psd(M) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix; negative eigenvalues are clamped."""
    R = _psd_root(_check_symmetric(M))
    return (R + R.T) / 2


def _psd_root(M: np.ndarray) -> np.ndarray:
    w, Q = np.linalg.eigh(M)
    return (Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T


def _trace_sqrt_product(sa: np.ndarray, sb: np.ndarray) -> float:
    """tr((Sa Sb)^1/2) for symmetric PSD Sa, Sb.

    Sa^1/2 Sb Sa^1/2 = K^T K with K = Sb^1/2 Sa^1/2, so the trace is the sum of
    the singular values of K. Singular values carry absolute error near
    machine precision, whereas square-rooting tiny eigenvalues of the product
    would amplify round-off to its square root.
    """
    K = _psd_root(sb) @ _psd_root(sa)
    return float(np.sum(np.linalg.svd(K, compute_uv=False)))


def _add_diagonal(M: np.ndarray, eps: float) -> np.ndarray:
    M = np.array(M, dtype=np.float64)
    M.flat[:: M.shape[0] + 1] += eps
    return M


def _combine(mean_sq: float, trace_term: float, cross: float) -> float:
    raw = mean_sq + trace_term - 2.0 * cross
    if raw < 0 and -raw > 1e-6 * max(trace_term, np.finfo(float).tiny):
        warnings.warn(
            f"Frechet distance clamped from {raw:.6g}; covariances may be ill-conditioned",
            NumericalWarning,
            stacklevel=3,
        )
    return max(raw, 0.0)


def frechet_distance(a: GaussianStats, b: GaussianStats, eps: float = DEFAULT_EPS) -> FvmdScore:
    """Squared Frechet distance between two Gaussians.

    Both covariances get ``eps`` added to their diagonal before anything else
    (including the trace terms), so identical inputs give exactly zero in
    exact arithmetic. Small negative round-off is clamped to zero.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"feature dimensions differ: {a.dim} vs {b.dim}")
    sa = _add_diagonal(_check_symmetric(a.cov), eps)
    sb = _add_diagonal(_check_symmetric(b.cov), eps)
    diff = a.mean - b.mean
    trace_term = float(np.trace(sa) + np.trace(sb))
    value = _combine(float(diff @ diff), trace_term, _trace_sqrt_product(sa, sb))
    return FvmdScore(value, a.dim, a.n_samples, b.n_samples, eps)


def _frechet_low_rank(Xa: np.ndarray, Xb: np.ndarray, eps: float) -> float:
    """Same value as the dense formula, for na + nb <= d.

    Both sample covariances live in the span of the centred samples. An
    orthonormal basis of that span (m columns) reduces everything to m x m;
    on the orthogonal complement both covariances equal eps * I and each of
    the d - m remaining eigenvalues of the product contributes exactly eps.
    """
    d = Xa.shape[1]
    Ca = (Xa - Xa.mean(axis=0)) / np.sqrt(Xa.shape[0] - 1)
    Cb = (Xb - Xb.mean(axis=0)) / np.sqrt(Xb.shape[0] - 1)
    basis, _ = np.linalg.qr(np.concatenate([Ca, Cb]).T)
    m = basis.shape[1]
    Ga, Gb = Ca @ basis, Cb @ basis
    sa = _add_diagonal(Ga.T @ Ga, eps)
    sb = _add_diagonal(Gb.T @ Gb, eps)
    diff = Xa.mean(axis=0) - Xb.mean(axis=0)
    trace_term = float(np.sum(Ca * Ca) + np.sum(Cb * Cb) + 2 * d * eps)
    cross = _trace_sqrt_product(sa, sb) + (d - m) * eps
    return _combine(float(diff @ diff), trace_term, cross)


def fvmd(gen_features, ref_features, eps: float = DEFAULT_EPS) -> FvmdScore:
    """Frechet distance between Gaussian fits of generated and reference features."""
    Xg = as_feature_matrix(gen_features)
    Xr = as_feature_matrix(ref_features)
    if Xg.shape[1] != Xr.shape[1]:
        raise DimensionMismatch(f"feature dimensions differ: {Xg.shape[1]} vs {Xr.shape[1]}")
    kinds = {
        (f.fields, f.hist)
        for src in (gen_features, ref_features)
        if not isinstance(src, np.ndarray)
        for f in src
        if isinstance(f, MotionFeature)
    }
    if len(kinds) > 1:
        raise DimensionMismatch(f"feature kinds differ: {sorted(kinds)}")
    (ng, d), nr = Xg.shape, Xr.shape[0]
    if ng + nr > d:
        return frechet_distance(fit_gaussian(Xg), fit_gaussian(Xr), eps)
    for n in (ng, nr):
        if n < 2:
            raise TooFewSamples(f"need at least 2 samples to fit a Gaussian, got {n}")
    warnings.warn(f"{min(ng, nr)} samples for {d}-dimensional features: covariance is rank deficient", stacklevel=2)
    return FvmdScore(_frechet_low_rank(Xg, Xr, eps), d, ng, nr, eps)


class FrechetMotionDistance(BaseEstimator):
    """Reference-fitted Frechet distance.

    ``fit`` stores the Gaussian statistics of the reference features;
    ``distance`` fits the candidate features and returns the squared
    Frechet distance to the reference.

    >>> import numpy as np
    >>> X = np.random.default_rng(0).normal(size=(50, 3))
    >>> round(FrechetMotionDistance().fit(X).distance(X), 9)
    0.0
    """

    def __init__(self, eps=DEFAULT_EPS):
        self.eps = eps

    def fit(self, X, y=None):
        stats = fit_gaussian(X)
        self.mean_ = stats.mean
        self.covariance_ = stats.cov
        self.n_samples_ = stats.n_samples
        self.n_features_in_ = stats.dim
        return self

    def reference_stats(self) -> GaussianStats:
        check_is_fitted(self)
        return GaussianStats(self.mean_, self.covariance_, self.n_samples_)

    def compare(self, X) -> FvmdScore:
        return frechet_distance(fit_gaussian(X), self.reference_stats(), self.eps)

    def distance(self, X) -> float:
        return self.compare(X).value
