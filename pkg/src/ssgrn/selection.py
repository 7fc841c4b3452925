"""Choice of the hidden-state dimension by small-sample corrected AIC."""

from __future__ import annotations

from dataclasses import dataclass

from . import em
from .datamodel import max_hidden_k, param_count
from .errors import DataError, InfeasibleError


def aic(loglik: float, P: int) -> float:
    return -2.0 * loglik + 2.0 * P


def aicc(loglik: float, N: int, P: int) -> float:
    """``-2 loglik + 2 P N / (N - P - 1)``.

    Raises
    ------
    InfeasibleError
        If N <= P + 1, where the correction is undefined or negative.
    """
    if N <= P + 1:
        raise InfeasibleError(f"AICc undefined for N={N}, P={P} (need N > P + 1)")
    return -2.0 * loglik + 2.0 * P * N / (N - P - 1)


@dataclass(frozen=True)
class SelectionEntry:
    k: int
    loglik: float
    P: int
    N: int
    aicc: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class SelectionReport:
    entries: tuple
    chosen_k: int
    fits: dict

    def entry(self, k: int) -> SelectionEntry:
        return next(e for e in self.entries if e.k == k)


def parse_k_range(text: str) -> list:
    """Parse ``"0..4"`` (inclusive) or ``"1,3,5"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise DataError(f"cannot parse k range {text!r}")


def select_k(dataset, k_range, config: em.FitConfig | None = None) -> SelectionReport:
    """Fit every candidate k and pick the smallest AICc among converged fits.

    Ties go to the smaller k.  Candidates outside the feasibility bound are
    rejected before any fitting.
    """
    config = config or em.FitConfig()
    p, T, n_R = dataset.p, dataset.T, dataset.n_R
    N = p * T * n_R
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise DataError("empty k range")
    kmax = max_hidden_k(p, T, n_R)
    bad = [k for k in ks if k < 0 or k > kmax or N <= param_count(p, k) + 1]
    if bad:
        raise InfeasibleError(f"k values {bad} violate the bound k <= {kmax} for this dataset")

    entries, fits = [], {}
    for k in ks:
        fr = em.fit(dataset, k, config)
        P = param_count(p, k)
        fits[k] = fr
        entries.append(SelectionEntry(k, fr.loglik, P, N, aicc(fr.loglik, N, P),
                                      fr.converged, fr.iterations))
    pool = [e for e in entries if e.converged]
    if not pool:
        raise em.NumericalError("no candidate k converged; raise max_iter or tol")
    best = min(pool, key=lambda e: (e.aicc, e.k))
    return SelectionReport(tuple(entries), best.k, fits)
