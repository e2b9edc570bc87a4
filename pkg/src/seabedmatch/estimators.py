"""
scikit-learn wrappers for the wavelet transform and the template matcher.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import GeoParams, MaterialType, SeafloorParams
from .library import TemplateRecord
from .matcher import MatchConfig, TemplateBank, classify
from .wavelet import DEFAULT_LMAX, dwt_multilevel, from_concatenated, idwt_multilevel


def _check_length(n: int, lmax: int) -> None:
    if n < 1 or n & (n - 1):
        raise ValueError(f"number of features {n} is not a power of two")
    if not 0 <= lmax <= n.bit_length() - 1:
        raise ValueError(f"lmax={lmax} is out of range for {n} features")


class HaarWaveletTransform(TransformerMixin, BaseEstimator):
    """Row-wise multilevel Haar transform.

    Each row is mapped to its concatenated coefficients
    ``(w^lmax, v^lmax, ..., v^1)``; the transform is orthonormal, so
    ``inverse_transform`` is exact.

    Parameters
    ----------
    lmax : int, default=5
        Number of levels.
    """

    def __init__(self, lmax: int = DEFAULT_LMAX):
        self.lmax = lmax

    def fit(self, X, y=None):
        X = check_array(X)
        _check_length(X.shape[1], self.lmax)
        self.n_features_in_ = X.shape[1]
        return self

    def _validate(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def transform(self, X):
        return dwt_multilevel(self._validate(X), self.lmax).concatenate()

    def inverse_transform(self, X):
        return idwt_multilevel(from_concatenated(self._validate(X), self.lmax))


class TemplateMatchingClassifier(ClassifierMixin, BaseEstimator):
    """Material classifier by multilevel template matching.

    ``fit`` stores the templates. ``predict`` treats the rows of ``X`` as
    consecutive segments along one track, so the geometry penalty links each
    row to the previous one.

    Parameters
    ----------
    epsilon_tol : float, default=2**-8
        Level tolerance; level ``l`` keeps misfits below ``epsilon_tol * 2^-l``.
    delta_penalty : float, default=0.02
        Weight of the geometry jump between neighbouring segments.
    lmax : int, default=5
        Number of wavelet levels.
    """

    def __init__(self, epsilon_tol: float = 2.0 ** -8, delta_penalty: float = 0.02,
                 lmax: int = DEFAULT_LMAX):
        self.epsilon_tol = epsilon_tol
        self.delta_penalty = delta_penalty
        self.lmax = lmax

    def fit(self, X, y, geometry=None):
        """Store templates.

        Parameters
        ----------
        X : array of shape (n_templates, n_samples)
            Template backscatter vectors.
        y : array of shape (n_templates,)
            Material names.
        geometry : array of shape (n_templates, 3), optional
            Ripple parameters ``(mg1, mg2, mg3)`` used by the penalty;
            zeros when omitted.
        """
        X, y = check_X_y(X, y, dtype=float)
        _check_length(X.shape[1], self.lmax)
        cfg = self._config()
        labels = [MaterialType.parse(v) for v in y]
        if geometry is None:
            geometry = np.zeros((len(X), 3))
        geometry = check_array(geometry)
        if geometry.shape != (len(X), 3):
            raise ValueError("geometry must have shape (n_templates, 3)")
        records = []
        for i, (row, m, g) in enumerate(zip(X, labels, geometry)):
            # amplitude 0: only the parameter vector matters here
            geo = GeoParams(*g, amplitude=0.0)
            params = SeafloorParams.metal(geo) if m is MaterialType.METAL \
                else SeafloorParams(m, geo)
            records.append(TemplateRecord(i, params, 0.0, row))
        self.bank_ = TemplateBank(records, cfg.lmax)
        self.classes_ = np.unique(np.array([m.value for m in labels]))
        self.n_features_in_ = X.shape[1]
        return self

    def _config(self) -> MatchConfig:
        return MatchConfig(float(self.epsilon_tol), float(self.delta_penalty), int(self.lmax))

    def match(self, X):
        """Full ``ClassificationResult`` for the segments in the rows of ``X``."""
        check_is_fitted(self, "bank_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return classify(X.ravel(), self.bank_, self._config())

    def predict(self, X):
        return np.array([m.value for m in self.match(X).material_map])

    def predict_geometry(self, X):
        return self.match(X).geometry
