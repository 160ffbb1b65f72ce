"""ARIMA next-point predictor with an IQR residual boundary.

Estimation is conditional sum of squares: the residual recursion is run
with zero pre-sample values, residuals before index p are excluded from the
objective, and the (mean, AR, MA) parameters are refined by Gauss-Newton
with a numerically differentiated Jacobian. AR terms start at their
Yule-Walker estimates, MA terms at zero. Auto-order selection grid-searches
p in 0..3, d in 0..1, q in 0..2 by AIC.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import lfilter

from ..errors import FitFailure, InsufficientData, InvalidInput
from ..timeseries import Boundary, SeriesWindow, iqr_boundary
from .base import register_model_type

MODEL_TYPE = "arima_uv"

AUTO_P_GRID = range(0, 4)
AUTO_D_GRID = range(0, 2)
AUTO_Q_GRID = range(0, 3)

MAX_P = MAX_Q = 5
MAX_D = 2

STATIONARITY_SLACK = 1e-6


def min_training_length(p: int, q: int) -> int:
    return max(30, 10 * (p + q + 1))


def _ar_spectral_radius(phi: np.ndarray) -> float:
    p = len(phi)
    if p == 0:
        return 0.0
    companion = np.zeros((p, p))
    companion[0, :] = phi
    if p > 1:
        companion[1:, :-1] = np.eye(p - 1)
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def _yule_walker(w: np.ndarray, p: int) -> np.ndarray:
    """AR(p) start values from the sample autocovariances."""
    if p == 0:
        return np.zeros(0)
    n = len(w)
    gamma = np.array([float(np.dot(w[: n - k], w[k:])) / n for k in range(p + 1)])
    if gamma[0] <= 1e-12:
        return np.zeros(p)
    try:
        phi = np.linalg.solve(toeplitz(gamma[:p]), gamma[1:p + 1])
    except np.linalg.LinAlgError:
        phi = np.linalg.lstsq(toeplitz(gamma[:p]), gamma[1:p + 1], rcond=None)[0]
    return phi


def _css_residuals(w: np.ndarray, mean: float, phi: np.ndarray,
                   theta: np.ndarray) -> np.ndarray:
    b = np.concatenate(([1.0], -np.asarray(phi, float)))
    a = np.concatenate(([1.0], np.asarray(theta, float)))
    return lfilter(b, a, w - mean)


def _fit_css(w: np.ndarray, p: int, q: int,
             max_iter: int = 60) -> tuple[np.ndarray, float, int]:
    """Gauss-Newton CSS fit; returns (beta = [mean, phi, theta], sse, n_eff)."""
    beta = np.concatenate(([float(np.mean(w))],
                           _yule_walker(w - np.mean(w), p),
                           np.zeros(q)))

    def resid(b):
        return _css_residuals(w, b[0], b[1:1 + p], b[1 + p:])[p:]

    r = resid(beta)
    sse = float(r @ r)
    if not np.isfinite(sse):
        raise FitFailure("non-finite objective at start", orders=(p, q))
    n_par = len(beta)
    lam = 1e-3
    for _ in range(max_iter):
        jac = np.empty((len(r), n_par))
        for k in range(n_par):
            h = 1e-6 * max(1.0, abs(beta[k]))
            bumped = beta.copy()
            bumped[k] += h
            jac[:, k] = (resid(bumped) - r) / h
        g = jac.T @ r
        hess = jac.T @ jac
        improved = False
        prev = sse
        for _ in range(12):
            try:
                delta = np.linalg.solve(hess + lam * np.eye(n_par), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            cand = beta + delta
            rc = resid(cand)
            # diverged candidates can overflow; they are rejected below
            with np.errstate(over="ignore", invalid="ignore"):
                sc = float(rc @ rc)
            if np.isfinite(sc) and sc < sse:
                beta, r, sse = cand, rc, sc
                lam = max(lam / 10, 1e-12)
                improved = True
                break
            lam *= 10
        if not improved:
            break
        if prev - sse <= 1e-12 * (1.0 + sse):
            break
    if not np.all(np.isfinite(beta)):
        raise FitFailure("optimizer diverged", orders=(p, q))
    return beta, sse, len(r)


@dataclass
class ArimaModel:
    """Fitted ARIMA(p, d, q) with mean term and residual decision boundary."""

    p: int
    d: int
    q: int
    ar_coeffs: tuple[float, ...]
    ma_coeffs: tuple[float, ...]
    mean: float
    resid_boundary: Boundary
    train_summary: dict | None = None
    extras: dict = field(default_factory=dict)

    model_type = MODEL_TYPE
    flow = "univariate"

    def __post_init__(self):
        if self.d > MAX_D or self.p > MAX_P or self.q > MAX_Q:
            raise InvalidInput("orders out of range",
                               orders=(self.p, self.d, self.q))

    @property
    def intercept(self) -> float:
        return self.mean * (1.0 - sum(self.ar_coeffs))

    def _difference(self, values: np.ndarray) -> list[np.ndarray]:
        levels = [np.asarray(values, dtype=float)]
        for _ in range(self.d):
            levels.append(np.diff(levels[-1]))
        return levels

    def residuals(self, values) -> np.ndarray:
        """One-step in-sample residuals (differenced scale), length n - d."""
        w = self._difference(values)[-1]
        return _css_residuals(w, self.mean,
                              np.asarray(self.ar_coeffs),
                              np.asarray(self.ma_coeffs))

    def predicted_values(self, values) -> np.ndarray:
        """Per-point one-step predictions on the original scale.

        The first d points have no prediction and are returned as the
        observed values (zero residual).
        """
        x = np.asarray(values, dtype=float)
        e = self.residuals(x)
        pred = x.copy()
        pred[self.d:] = x[self.d:] - e
        return pred

    def forecast_next(self, values) -> float:
        levels = self._difference(values)
        w = levels[-1]
        e = _css_residuals(w, self.mean, np.asarray(self.ar_coeffs),
                           np.asarray(self.ma_coeffs)) if len(w) else np.zeros(0)
        pred = self.mean
        for i, phi in enumerate(self.ar_coeffs, start=1):
            pred += phi * (w[-i] - self.mean)
        for j, th in enumerate(self.ma_coeffs, start=1):
            pred += th * e[-j]
        for level in reversed(levels[:-1]):
            pred = level[-1] + pred
        return float(pred)

    def to_payload(self) -> dict:
        return {
            "p": self.p, "d": self.d, "q": self.q,
            "ar_coeffs": [float(c) for c in self.ar_coeffs],
            "ma_coeffs": [float(c) for c in self.ma_coeffs],
            "mean": float(self.mean),
            "boundary": {
                "lower": float(self.resid_boundary.lower),
                "upper": float(self.resid_boundary.upper),
                "method": self.resid_boundary.method,
                "params": self.resid_boundary.params,
            },
            "train_summary": self.train_summary,
            "extras": self.extras,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ArimaModel":
        b = payload["boundary"]
        return cls(
            p=payload["p"], d=payload["d"], q=payload["q"],
            ar_coeffs=tuple(payload["ar_coeffs"]),
            ma_coeffs=tuple(payload["ma_coeffs"]),
            mean=payload["mean"],
            resid_boundary=Boundary(b["lower"], b["upper"], b["method"],
                                    b.get("params", {})),
            train_summary=payload.get("train_summary"),
            extras=payload.get("extras", {}),
        )


register_model_type(MODEL_TYPE, ArimaModel.from_payload)


def _fit_orders(values: np.ndarray, p: int, d: int, q: int,
                iqr_multiplier: float) -> tuple[ArimaModel, float]:
    w = values
    for _ in range(d):
        w = np.diff(w)
    if len(w) <= p + q + 1:
        raise InsufficientData("series too short after differencing",
                               n=len(values), orders=(p, d, q))
    beta, sse, n_eff = _fit_css(w, p, q)
    phi = beta[1:1 + p]
    radius = _ar_spectral_radius(phi)
    if radius >= 1.0 + STATIONARITY_SLACK:
        raise FitFailure("AR polynomial is non-stationary",
                         orders=(p, d, q), spectral_radius=radius)
    resid = _css_residuals(w, beta[0], phi, beta[1 + p:])[p:]
    if len(resid) < 4:
        raise InsufficientData("too few residuals for the boundary",
                               orders=(p, d, q))
    boundary = iqr_boundary(resid, iqr_multiplier)
    aic = n_eff * float(np.log(max(sse, 1e-300) / n_eff)) + 2 * (p + q + 2)
    model = ArimaModel(
        p=p, d=d, q=q,
        ar_coeffs=tuple(float(c) for c in phi),
        ma_coeffs=tuple(float(c) for c in beta[1 + p:]),
        mean=float(beta[0]),
        resid_boundary=boundary,
    )
    return model, aic


def arima_fit(series: SeriesWindow, orders: tuple[int, int, int] | None = None,
              seed: int = 0, iqr_multiplier: float = 3.0) -> ArimaModel:
    """Fit an ARIMA model; grid-search orders by AIC when none are given.

    The fit itself is deterministic; ``seed`` is part of the plug-in
    contract and reserved for stochastic variants.
    """
    del seed
    values = series.values
    n = len(values)
    if orders is not None:
        p, d, q = orders
        if p > MAX_P or q > MAX_Q or d > MAX_D or min(p, d, q) < 0:
            raise InvalidInput("orders out of range", orders=orders)
        if n < min_training_length(p, q):
            raise InsufficientData("series shorter than minimum training length",
                                   n=n, required=min_training_length(p, q))
        model, _ = _fit_orders(values, p, d, q, iqr_multiplier)
        return model

    best = None
    best_aic = np.inf
    tried = []
    for d in AUTO_D_GRID:
        for p in AUTO_P_GRID:
            for q in AUTO_Q_GRID:
                if n < min_training_length(p, q):
                    continue
                tried.append((p, d, q))
                try:
                    model, aic = _fit_orders(values, p, d, q, iqr_multiplier)
                except (FitFailure, InsufficientData):
                    continue
                if aic < best_aic:
                    best, best_aic = model, aic
    if best is None:
        if not tried:
            raise InsufficientData("series shorter than minimum training length",
                                   n=n, required=min_training_length(0, 0))
        raise FitFailure("no candidate order converged", orders_tried=tried)
    return best


def arima_forecast(model: ArimaModel, history: SeriesWindow) -> float:
    """One-step-ahead prediction from the fitted model; deterministic."""
    need = model.p + model.d + model.q
    if len(history) < max(need, 1):
        raise InsufficientData("history shorter than p + d + q",
                               n=len(history), required=need)
    return model.forecast_next(history.values)
