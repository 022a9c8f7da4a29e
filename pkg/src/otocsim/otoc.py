"""Infinite-temperature OTOCs and their randomized-measurement estimators.

For each random unitary ``u`` the protocol records two expectation values on
``|psi_u> = u|psi_0>``::

    x_u(t) = <psi_u| U(t)^dag W U(t) |psi_u>
    y_u(t) = <psi_u| V^dag U(t)^dag W U(t) V |psi_u>

and estimates the correlator as ``mean(x y) / sqrt(mean(x^2) mean(y^2))``.
With global Haar ``u`` this converges to the OTOC ``Tr(W(t) V W(t) V)/2^N``;
with local Haar products it converges to the subset-summed modified OTOC.
"""
from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Callable, Iterable, TextIO

import numpy as np

from .kicked_ising import KickedIsingParams, evolution_series
from .operators import basis_state, partial_trace, site_operator
from .parallel import indexed_map, ordered_mean, rng_stream
from .random_unitary import Kind, RandomizationScheme, sample_unitary

SUBSET_WEIGHTINGS: dict[str, Callable[[int], float]] = {
    "uniform": lambda size: 1.0,
    "pow2": lambda size: float(2**size),
}

# Rows whose sampled second moments fall below this are flagged unreliable.
DEGENERATE_MOMENT = 1e-12


@dataclass(frozen=True)
class OtocConfig:
    params: KickedIsingParams = field(default_factory=KickedIsingParams)
    w_site: int = 4
    v_site: int = 1
    w_pauli: str = "Z"
    v_pauli: str = "Z"
    n_periods_max: int = 23
    n_unitaries: int = 50
    scheme: RandomizationScheme = field(default_factory=RandomizationScheme)
    initial_state: str | None = None
    seed: int = 0
    subset_weighting: str = "uniform"

    def __post_init__(self):
        n = self.params.n_spins
        for name in ("w_site", "v_site"):
            site = getattr(self, name)
            if not 1 <= site <= n:
                raise ValueError(f"{name}={site} outside the {n}-spin register")
        for name in ("w_pauli", "v_pauli"):
            if getattr(self, name) not in ("X", "Y", "Z"):
                raise ValueError(f"{name} must be one of X, Y, Z")
        if self.w_site == self.v_site:
            warnings.warn("W and V act on the same site; O(0) is no longer 1", stacklevel=2)
        if self.n_periods_max < 0:
            raise ValueError("n_periods_max must be non-negative")
        if self.initial_state is not None and (
            len(self.initial_state) != n or set(self.initial_state) - {"0", "1"}
        ):
            raise ValueError(f"initial_state must be a {n}-bit string")
        if self.subset_weighting not in SUBSET_WEIGHTINGS:
            raise ValueError(f"subset_weighting must be one of {sorted(SUBSET_WEIGHTINGS)}")

    @property
    def n_spins(self) -> int:
        return self.params.n_spins

    def W(self) -> np.ndarray:
        return site_operator(self.n_spins, {self.w_site: self.w_pauli})

    def V(self) -> np.ndarray:
        return site_operator(self.n_spins, {self.v_site: self.v_pauli})

    def psi0(self) -> np.ndarray:
        return basis_state(self.initial_state or "0" * self.n_spins, self.n_spins)


@dataclass
class OtocRow:
    n: int
    t: float
    exact: float
    exact_modified: float
    estimate: float = math.nan
    stderr: float = math.nan
    n_unitaries: int = 0
    reliable: bool = True


@dataclass
class OtocSeries:
    rows: list[OtocRow]
    scheme: str = ""

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def heisenberg(W: np.ndarray, U: np.ndarray) -> np.ndarray:
    return U.conj().T @ W @ U


def _otoc_value(Wt: np.ndarray, V: np.ndarray) -> float:
    d = Wt.shape[0]
    return float(np.trace(Wt.conj().T @ V.conj().T @ Wt @ V).real / d)


def nonempty_subsets(n: int) -> Iterable[tuple[int, ...]]:
    for size in range(1, n + 1):
        yield from itertools.combinations(range(1, n + 1), size)


def _modified_value(Wt: np.ndarray, V: np.ndarray, n: int, weight: Callable[[int], float]) -> float:
    vwv = V.conj().T @ Wt @ V
    num = den = 0.0
    for subset in nonempty_subsets(n):
        wa = partial_trace(Wt, subset, n)
        w = weight(len(subset))
        num += w * np.trace(wa @ partial_trace(vwv, subset, n)).real
        den += w * np.trace(wa @ wa).real
    return float(num / den)


def _weight(config: OtocConfig, weight) -> Callable[[int], float]:
    if weight is None:
        return SUBSET_WEIGHTINGS[config.subset_weighting]
    if isinstance(weight, str):
        return SUBSET_WEIGHTINGS[weight]
    return weight


def exact_otoc(config: OtocConfig, n: int) -> float:
    """``Re Tr(W(t)^dag V^dag W(t) V) / 2^N`` after ``n`` periods."""
    U = evolution_series(config.params, n)[-1]
    return _otoc_value(heisenberg(config.W(), U), config.V())


def exact_modified_otoc(config: OtocConfig, n: int, weight=None) -> float:
    """Subset-summed OTOC of reduced Heisenberg operators after ``n`` periods.

    Sums run over every non-empty subset ``A`` of the register; the reduced
    operator is the partial trace over the complement of ``A``. ``weight``
    maps ``|A|`` to a per-subset weight (default: the config's weighting).
    """
    U = evolution_series(config.params, n)[-1]
    return _modified_value(heisenberg(config.W(), U), config.V(), config.n_spins, _weight(config, weight))


def exact_series(config: OtocConfig, n_max: int | None = None, weight=None) -> list[OtocRow]:
    n_max = config.n_periods_max if n_max is None else n_max
    W, V = config.W(), config.V()
    wfn = _weight(config, weight)
    rows = []
    for n, U in enumerate(evolution_series(config.params, n_max)):
        Wt = heisenberg(W, U)
        rows.append(
            OtocRow(
                n=n,
                t=n * config.params.T,
                exact=_otoc_value(Wt, V),
                exact_modified=_modified_value(Wt, V, config.n_spins, wfn),
            )
        )
    return rows


def sample_pair(config: OtocConfig, u: np.ndarray, n: int) -> tuple[float, float]:
    """``(<W(t)>_u, <V^dag W(t) V>_u)`` on ``|psi_u> = u|psi_0>`` after ``n`` periods."""
    d = 2**config.n_spins
    if u.shape != (d, d):
        raise ValueError(f"unitary shape {u.shape} does not match a {config.n_spins}-spin register")
    U = evolution_series(config.params, n)[-1]
    return _pair_values(u @ config.psi0(), config.W(), config.V(), [U])[0]


def _pair_values(psi_u, W, V, Us) -> list[tuple[float, float]]:
    out = []
    psi_v = V @ psi_u
    for U in Us:
        a = U @ psi_u
        b = U @ psi_v
        out.append((float(np.vdot(a, W @ a).real), float(np.vdot(b, W @ b).real)))
    return out


@lru_cache(maxsize=8)
def _cached_series(params: KickedIsingParams, n_max: int) -> tuple[np.ndarray, ...]:
    return tuple(evolution_series(params, n_max))


def _unitary_samples(config: OtocConfig, periods: tuple[int, ...], index: int) -> np.ndarray:
    u = sample_unitary(config.scheme, config.n_spins, rng_stream(config.seed, index))
    Us = _cached_series(config.params, max(periods))
    return np.array(_pair_values(u @ config.psi0(), config.W(), config.V(), [Us[n] for n in periods]))


def collect_samples(config: OtocConfig, periods: Iterable[int], workers: int = 1) -> np.ndarray:
    """Array ``(n_unitaries, len(periods), 2)`` of per-unitary ``(x, y)`` values.

    Unitary ``i`` comes from stream ``(config.seed, i)`` and is reused for
    every period.
    """
    periods = tuple(periods)
    fn = partial(_unitary_samples, config, periods)
    return np.array(indexed_map(fn, config.n_unitaries, workers)).reshape(
        config.n_unitaries, len(periods), 2
    )


def correlation_estimate(x: np.ndarray, y: np.ndarray) -> tuple[float, float, bool]:
    """Normalised correlation ``mean(xy)/sqrt(mean(x^2) mean(y^2))`` with jackknife error.

    Returns ``(estimate, stderr, reliable)``; degenerate second moments give
    ``(nan, nan, False)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = len(x)
    if m < 2:
        raise ValueError("need at least two samples")
    sxy = math.fsum(x * y)
    sxx = math.fsum(x * x)
    syy = math.fsum(y * y)
    if sxx / m < DEGENERATE_MOMENT or syy / m < DEGENERATE_MOMENT:
        return math.nan, math.nan, False
    est = (sxy / m) / math.sqrt((sxx / m) * (syy / m))
    # leave-one-out replicates; the 1/(m-1) factors cancel in the ratio
    lxx = sxx - x * x
    lyy = syy - y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        reps = (sxy - x * y) / np.sqrt(lxx * lyy)
    if not np.all(np.isfinite(reps)):
        return est, math.nan, False
    mean_rep = ordered_mean(reps)
    se = math.sqrt((m - 1) / m * math.fsum((reps - mean_rep) ** 2))
    return est, se, True


def estimate_otoc(config: OtocConfig, workers: int = 1) -> OtocSeries:
    """Randomized-measurement estimate for ``n = 1 .. n_periods_max``."""
    if config.n_unitaries < 2:
        raise ValueError("n_unitaries must be at least 2")
    periods = tuple(range(1, config.n_periods_max + 1))
    samples = collect_samples(config, periods, workers)
    exact = {r.n: r for r in exact_series(config)}
    rows = []
    for j, n in enumerate(periods):
        est, se, ok = correlation_estimate(samples[:, j, 0], samples[:, j, 1])
        if not ok:
            warnings.warn(f"period {n}: degenerate sample moments, estimate unreliable", stacklevel=2)
        rows.append(
            OtocRow(
                n=n,
                t=n * config.params.T,
                exact=exact[n].exact,
                exact_modified=exact[n].exact_modified,
                estimate=est,
                stderr=se,
                n_unitaries=config.n_unitaries,
                reliable=ok,
            )
        )
    return OtocSeries(rows, scheme_label(config.scheme))


def sample_distribution(config: OtocConfig, n: int, workers: int = 1) -> list[tuple[float, float]]:
    samples = collect_samples(config, (n,), workers)
    return [(float(a), float(b)) for a, b in samples[:, 0, :]]


def scheme_label(scheme: RandomizationScheme) -> str:
    return Kind(scheme.kind).value


SERIES_HEADER = ("n", "t", "exact", "exact_modified", "estimate", "stderr", "n_unitaries", "scheme")
EXACT_HEADER = ("n", "t", "exact", "exact_modified")
SCATTER_HEADER = ("u_index", "w_exp", "vwv_exp")


def _fmt(x) -> str:
    return repr(float(x))


def write_series_csv(series: OtocSeries, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SERIES_HEADER)
    for r in series.rows:
        w.writerow([r.n, _fmt(r.t), _fmt(r.exact), _fmt(r.exact_modified), _fmt(r.estimate),
                    _fmt(r.stderr), r.n_unitaries, series.scheme])


def write_exact_csv(rows: list[OtocRow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EXACT_HEADER)
    for r in rows:
        w.writerow([r.n, _fmt(r.t), _fmt(r.exact), _fmt(r.exact_modified)])


def write_scatter_csv(points: list[tuple[float, float]], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SCATTER_HEADER)
    for i, (a, b) in enumerate(points):
        w.writerow([i, _fmt(a), _fmt(b)])
