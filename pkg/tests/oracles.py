"""Independent reference implementations used to pin the package.

Everything here is written the slow, obvious way (explicit loops,
direct sums) and deliberately shares no code with the package. When a
package function and its oracle agree on random instances, a shared
bug is about the only way both can be wrong.
"""
import math

import numpy as np


def c_index_oracle(risks, durations, events) -> float:
    """O(n^2) concordance: loop every ordered pair, apply the rules.

    A pair is comparable when the earlier time is an event; equal times
    are comparable only when exactly one is an event (the event acts as
    the earlier one). Tied risks score half.
    """
    risks = np.asarray(risks, float)
    durations = np.asarray(durations, float)
    events = np.asarray(events, bool)
    num = 0.0
    den = 0.0
    n = len(risks)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if events[i] and durations[i] < durations[j]:
                pass  # i is the reference event
            elif (
                events[i]
                and not events[j]
                and durations[i] == durations[j]
            ):
                pass  # tied time, single event: treat the event as earlier
            else:
                continue
            den += 1.0
            if risks[i] > risks[j]:
                num += 1.0
            elif risks[i] == risks[j]:
                num += 0.5
    if den == 0:
        raise ZeroDivisionError("no comparable pairs")
    return num / den


def tau_b_oracle(x, y) -> float:
    """Kendall tau-b by brute-force pair counting."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    nc = nd = tx = ty = 0
    n = len(x)
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif dx * dy > 0:
                nc += 1
            else:
                nd += 1
    den = math.sqrt((nc + nd + tx) * (nc + nd + ty))
    if den == 0:
        raise ZeroDivisionError("degenerate")
    return (nc - nd) / den


class KmCensoringOracle:
    """Kaplan-Meier of the censoring distribution, naive version.

    Censorings are the 'events' here; deaths only shrink the risk set.
    """

    def __init__(self, durations, events):
        durations = np.asarray(durations, float)
        censored = ~np.asarray(events, bool)
        self.steps = []  # (time, surviving probability after time)
        surv = 1.0
        for t in sorted(set(durations)):
            at_risk = np.sum(durations >= t)
            d = np.sum(censored & (durations == t))
            surv *= 1.0 - d / at_risk
            self.steps.append((t, surv))

    def at(self, t) -> float:
        """Right-continuous G(t)."""
        out = 1.0
        for time, surv in self.steps:
            if time <= t:
                out = surv
            else:
                break
        return out

    def before(self, t) -> float:
        """Left limit G(t-)."""
        out = 1.0
        for time, surv in self.steps:
            if time < t:
                out = surv
            else:
                break
        return out


def brier_oracle(t, surv_at_t, durations, events) -> float:
    """Direct sum of IPCW squared errors at one time."""
    durations = np.asarray(durations, float)
    events = np.asarray(events, bool)
    g = KmCensoringOracle(durations, events)
    total = 0.0
    n = len(durations)
    for i in range(n):
        s = surv_at_t[i]
        if durations[i] <= t and events[i]:
            gi = g.before(durations[i])
            if gi > 0:
                total += (s**2) / gi
        elif durations[i] > t:
            gt = g.at(t)
            if gt > 0:
                total += ((1.0 - s) ** 2) / gt
    return total / n


def bll_oracle(t, surv_at_t, durations, events, clamp=1e-7) -> float:
    durations = np.asarray(durations, float)
    events = np.asarray(events, bool)
    g = KmCensoringOracle(durations, events)
    total = 0.0
    n = len(durations)
    for i in range(n):
        s = min(max(surv_at_t[i], clamp), 1.0 - clamp)
        if durations[i] <= t and events[i]:
            gi = g.before(durations[i])
            if gi > 0:
                total += math.log1p(-s) / gi
        elif durations[i] > t:
            gt = g.at(t)
            if gt > 0:
                total += math.log(s) / gt
    return total / n


def _trapezoid_over_grid(values0, values, times, horizon) -> float:
    ts = [0.0] + list(times)
    vs = [values0] + list(values)
    area = 0.0
    for k in range(1, len(ts)):
        area += 0.5 * (vs[k] + vs[k - 1]) * (ts[k] - ts[k - 1])
    return area / horizon


def ibs_oracle(times, surv_matrix, durations, events) -> float:
    values = [
        brier_oracle(t, surv_matrix[:, k], durations, events)
        for k, t in enumerate(times)
    ]
    v0 = brier_oracle(0.0, np.ones(len(durations)), durations, events)
    return _trapezoid_over_grid(v0, values, times, times[-1])


def nbll_oracle(times, surv_matrix, durations, events) -> float:
    values = [
        bll_oracle(t, surv_matrix[:, k], durations, events)
        for k, t in enumerate(times)
    ]
    v0 = bll_oracle(0.0, np.ones(len(durations)), durations, events)
    return -_trapezoid_over_grid(v0, values, times, times[-1])


def breslow_partial_loglik(beta, x, durations, events) -> float:
    """Cox partial log-likelihood (Breslow ties) by direct risk-set sums.

    ``x`` is (n,) single-covariate; risk set = everyone with duration
    >= the event's duration.
    """
    x = np.asarray(x, float)
    durations = np.asarray(durations, float)
    events = np.asarray(events, bool)
    total = 0.0
    for i in range(len(x)):
        if not events[i]:
            continue
        risk = durations >= durations[i]
        total += beta * x[i] - math.log(np.sum(np.exp(beta * x[risk])))
    return total


def grid_search_cox_beta(x, durations, events, lo=-5.0, hi=5.0, tol=1e-6):
    """Golden-section maximization of the Breslow partial likelihood."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc = breslow_partial_loglik(c, x, durations, events)
    fd = breslow_partial_loglik(d, x, durations, events)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = breslow_partial_loglik(c, x, durations, events)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = breslow_partial_loglik(d, x, durations, events)
    return 0.5 * (a + b)


def random_survival_instance(rng, n, with_ties=True):
    """A small instance with ties and censoring for oracle comparisons."""
    if with_ties:
        durations = rng.integers(1, max(3, n // 2), size=n).astype(float)
    else:
        durations = rng.uniform(1.0, 50.0, size=n)
    events = rng.random(n) < 0.7
    if not events.any():
        events[rng.integers(n)] = True
    risks = np.round(rng.normal(size=n), 1)  # rounding forces risk ties
    return durations, events, risks
