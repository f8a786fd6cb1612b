"""scikit-learn style wrappers around the receiver DSP blocks.

Rows of ``X`` are equalizer input windows in time order; RLS is sequential,
so row order matters and ``fit`` consumes rows one at a time.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .framing import LEVELS
from .rxdsp import _run_rls, dd_rls_track, mlsd_viterbi, post_filter, tap_windows


def symbol_windows(x, n_taps: int, sps: int = 2, start: int = 0, n_symbols=None, wrap: bool = True):
    """Design matrix for an FFE: one ``n_taps`` window per symbol."""
    x = np.asarray(x, dtype=float)
    if n_symbols is None:
        n_symbols = len(x) // sps
    return tap_windows(x, start + sps * np.arange(n_symbols), n_taps, wrap)


class RLSEqualizer(RegressorMixin, BaseEstimator):
    """Linear FFE trained by exponentially weighted RLS.

    Parameters
    ----------
    forgetting : float
        lambda in (0, 1].
    delta : float
        Initial inverse correlation is ``I / delta``.
    warm_start : bool
        Continue from the previous ``coef_`` and ``P_`` on refit.

    Attributes
    ----------
    coef_ : ndarray of shape (n_taps,)
    P_ : ndarray of shape (n_taps, n_taps)
    training_mse_ : float
        Mean squared a-priori error over the last quarter of the fit rows.
    """

    def __init__(self, forgetting: float = 0.999, delta: float = 0.01, warm_start: bool = False):
        self.forgetting = forgetting
        self.delta = delta
        self.warm_start = warm_start

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if not 0 < self.forgetting <= 1:
            raise ValueError("forgetting must be in (0, 1]")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        n_taps = X.shape[1]
        if self.warm_start and hasattr(self, "coef_") and len(self.coef_) == n_taps:
            w, P = self.coef_.copy(), self.P_.copy()
        else:
            w, P = np.zeros(n_taps), np.eye(n_taps) / self.delta
        _, e, _ = _run_rls(X, y, np.ones(len(y), dtype=bool), w, P, self.forgetting)
        self.coef_, self.P_ = w, P
        self.training_mse_ = float(np.mean(e[-max(1, len(e) // 4):] ** 2))
        self.n_features_in_ = n_taps
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} taps, got {X.shape[1]}")
        return X @ self.coef_


class DecisionDirectedRLS(TransformerMixin, BaseEstimator):
    """Symbol-spaced decision-directed RLS tracker.

    ``fit`` is stateless; ``transform`` adapts along the sequence. ``X`` is a
    column of soft symbols, ``y`` optional known symbols (NaN where unknown).
    """

    def __init__(self, n_taps: int = 11, forgetting: float = 0.9999, delta: float = 1.0,
                 window: int = 256, growth: float = 2.0):
        self.n_taps = n_taps
        self.forgetting = forgetting
        self.delta = delta
        self.window = window
        self.growth = growth

    def fit(self, X, y=None):
        check_array(X, dtype=np.float64)
        self.n_features_in_ = 1
        return self

    def transform(self, X, y=None):
        check_is_fitted(self, "n_features_in_")
        x = check_array(X, dtype=np.float64).ravel()
        res = dd_rls_track(x, self.n_taps, self.forgetting, self.delta, y, self.window, self.growth)
        self.coef_ = res.taps
        self.frozen_at_ = res.frozen_at
        return res.output[:, None]

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).transform(X, y)


class PostFilterMLSD(ClassifierMixin, BaseEstimator):
    """``[1, alpha]`` post filter followed by Viterbi detection of PAM-4 levels."""

    def __init__(self, alpha: float = 0.6):
        self.alpha = alpha

    def fit(self, X, y=None):
        check_array(X, dtype=np.float64)
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")
        self.classes_ = LEVELS.copy()
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "classes_")
        x = check_array(X, dtype=np.float64).ravel()
        return mlsd_viterbi(post_filter(x, self.alpha), self.alpha)
