"""Cox proportional hazards fitted by Newton-Raphson.

The fit maximizes the ties-adjusted log partial likelihood with a small
ridge penalty for numerical stability. Features are imputed and
standardized internally; constant columns are excluded from the
optimization and keep a zero coefficient. The baseline cumulative
hazard is the Breslow estimator at the fitted coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cohort import FeatureMatrix
from ..errors import ConvergenceError
from .base import StandardScaler, StepFunction, breslow_baseline
from .imputation import ImputationPolicy, fit_imputer, impute

TIES_METHODS = ("efron", "breslow")


@dataclass
class CoxModel:
    feature_names: list[str]
    ties: str
    ridge: float
    coefficients: np.ndarray  # standardized space, zeros for inactive columns
    scaler: StandardScaler
    imputer: ImputationPolicy
    baseline: StepFunction
    n_iterations: int
    objective_trace: list[float]

    @property
    def coefficients_raw(self) -> np.ndarray:
        """Coefficients on the original feature scale."""
        beta = np.zeros_like(self.coefficients)
        a = self.scaler.active
        beta[a] = self.coefficients[a] / self.scaler.sd[a]
        return beta

    def _standardized(self, matrix: FeatureMatrix) -> np.ndarray:
        filled = impute(self.imputer, matrix)
        if filled.column_names != self.feature_names:
            raise ValueError("matrix columns do not match the fitted model")
        return self.scaler.transform(filled.values)

    def predict_risk(self, matrix: FeatureMatrix) -> np.ndarray:
        """Linear predictor on standardized features; higher is worse."""
        return self._standardized(matrix) @ self.coefficients

    def predict_survival(self, matrix: FeatureMatrix, times) -> np.ndarray:
        """S(t | x) = exp(-H0(t) * exp(risk)); constant past the last event."""
        lp = self.predict_risk(matrix)
        h0 = self.baseline(times)
        return np.exp(-np.outer(np.exp(lp), h0))


class _PartialLikelihood:
    """Ties-adjusted log partial likelihood with gradient and Hessian.

    Precomputes the time ordering once; each evaluation walks the
    distinct times from latest to earliest, accumulating risk-set sums
    the way the Efron correction expects.
    """

    def __init__(self, X: np.ndarray, durations, events, ties: str):
        order = np.argsort(np.asarray(durations, dtype=float), kind="stable")
        self.X = X[order]
        self.t = np.asarray(durations, dtype=float)[order]
        self.e = np.asarray(events, dtype=bool)[order]
        self.ties = ties
        uniq, first = np.unique(self.t, return_index=True)
        bounds = np.append(first, self.t.size)
        self.groups = list(zip(bounds[:-1], bounds[1:]))
        self.n_events = int(self.e.sum())

    def __call__(self, beta: np.ndarray):
        X, e = self.X, self.e
        k = X.shape[1]
        eta = X @ beta
        eta_max = eta.max() if eta.size else 0.0
        phi = np.exp(eta - eta_max)  # common factor drops from all ratios
        phi_x = X * phi[:, None]

        ll = 0.0
        grad = np.zeros(k)
        hess = np.zeros((k, k))
        risk_phi = 0.0
        risk_phi_x = np.zeros(k)
        risk_phi_xx = np.zeros((k, k))

        for lo, hi in reversed(self.groups):
            Xg = X[lo:hi]
            pg = phi[lo:hi]
            risk_phi += pg.sum()
            risk_phi_x += phi_x[lo:hi].sum(axis=0)
            risk_phi_xx += Xg.T @ (Xg * pg[:, None])

            deaths = e[lo:hi]
            d = int(deaths.sum())
            if d == 0:
                continue
            Xd = Xg[deaths]
            if self.ties == "efron":
                pd = pg[deaths]
                tie_phi = pd.sum()
                tie_phi_x = phi_x[lo:hi][deaths].sum(axis=0)
                tie_phi_xx = Xd.T @ (Xd * pd[:, None])
                r = np.arange(d) / d
            else:
                tie_phi, tie_phi_x, tie_phi_xx = 0.0, 0.0, 0.0
                r = np.zeros(d)

            den = risk_phi - r * tie_phi  # (d,)
            num = risk_phi_x[None, :] - r[:, None] * np.atleast_2d(tie_phi_x)  # (d, k)
            ll += eta[lo:hi][deaths].sum() - d * eta_max - np.log(den).sum()
            grad += Xd.sum(axis=0) - (num / den[:, None]).sum(axis=0)
            sum_inv = (1.0 / den).sum()
            sum_r_inv = (r / den).sum()
            hess -= risk_phi_xx * sum_inv
            if self.ties == "efron":
                hess += tie_phi_xx * sum_r_inv
            hess += np.einsum("lj,lk,l->jk", num, num, 1.0 / den**2)
        return ll, grad, hess


def cox_fit(
    matrix: FeatureMatrix,
    durations,
    events,
    ties: str = "efron",
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> CoxModel:
    """Fit the model from beta = 0 with step-halved Newton updates.

    Convergence is declared when every component of the penalized score
    falls below ``tol``; exceeding ``max_iter`` raises ConvergenceError
    carrying the objective trace.
    """
    if ties not in TIES_METHODS:
        raise ValueError(f"unknown ties method {ties!r}, expected one of {TIES_METHODS}")
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    if not events.any():
        raise ValueError("no events in the training data")

    imputer = fit_imputer(matrix)
    filled = impute(imputer, matrix)
    scaler = StandardScaler.fit(filled.values)
    active = scaler.active
    X = scaler.transform(filled.values)[:, active]

    pl = _PartialLikelihood(X, durations, events, ties)

    def objective(beta):
        ll, grad, hess = pl(beta)
        ll_pen = ll - 0.5 * ridge * beta @ beta
        return ll_pen, grad - ridge * beta, hess - ridge * np.eye(beta.size)

    beta = np.zeros(int(active.sum()))
    ll_pen, grad, hess = objective(beta)
    trace = [ll_pen]
    n_iter = 0
    converged = np.max(np.abs(grad), initial=0.0) < tol
    while not converged and n_iter < max_iter:
        n_iter += 1
        step = np.linalg.solve(hess, -grad)
        alpha = 1.0
        for _ in range(40):
            cand = beta + alpha * step
            ll_new, grad_new, hess_new = objective(cand)
            if ll_new >= ll_pen - 1e-12:
                break
            alpha *= 0.5
        else:
            raise ConvergenceError(
                "step halving failed to improve the partial likelihood", trace
            )
        beta, ll_pen, grad, hess = cand, ll_new, grad_new, hess_new
        trace.append(ll_pen)
        converged = np.max(np.abs(grad)) < tol
    if not converged:
        raise ConvergenceError(
            f"Newton-Raphson did not converge in {max_iter} iterations", trace
        )

    coefficients = np.zeros(filled.n_features)
    coefficients[active] = beta
    lp = scaler.transform(filled.values) @ coefficients
    baseline = breslow_baseline(durations, events, lp)
    return CoxModel(
        feature_names=filled.column_names,
        ties=ties,
        ridge=ridge,
        coefficients=coefficients,
        scaler=scaler,
        imputer=imputer,
        baseline=baseline,
        n_iterations=n_iter,
        objective_trace=trace,
    )
