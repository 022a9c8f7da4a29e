import itertools
import math
import warnings

import numpy as np
import pytest

from otocsim.kicked_ising import KickedIsingParams, evolve
from otocsim.operators import basis_state, kron_all, site_operator, PAULI
from otocsim.otoc import (
    OtocConfig,
    collect_samples,
    correlation_estimate,
    estimate_otoc,
    exact_modified_otoc,
    exact_otoc,
    exact_series,
    nonempty_subsets,
    sample_distribution,
    sample_pair,
)
from otocsim.random_unitary import Kind, RandomizationScheme, design_scheme, sample_haar

GLOBAL = RandomizationScheme(Kind.GLOBAL_HAAR)
LOCAL = RandomizationScheme(Kind.LOCAL_HAAR)


def loop_partial_trace(x, keep, n):
    """Reduced operator on ``keep`` (1-based) by explicit loops over bit strings."""
    keep = list(keep)
    out = np.zeros((2 ** len(keep), 2 ** len(keep)), dtype=complex)
    for r in range(2**n):
        for c in range(2**n):
            rb = [(r >> (n - 1 - q)) & 1 for q in range(n)]
            cb = [(c >> (n - 1 - q)) & 1 for q in range(n)]
            if any(rb[q] != cb[q] for q in range(n) if q + 1 not in keep):
                continue
            a = int("".join(str(rb[q - 1]) for q in keep), 2)
            b = int("".join(str(cb[q - 1]) for q in keep), 2)
            out[a, b] += x[r, c]
    return out


def brute_modified(Wt, V, n):
    vwv = V.conj().T @ Wt @ V
    num = den = 0.0
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(1, n + 1), size):
            wa = loop_partial_trace(Wt, subset, n)
            num += np.trace(wa @ loop_partial_trace(vwv, subset, n)).real
            den += np.trace(wa @ wa).real
    return num / den


def test_commuting_start_is_one():
    cfg = OtocConfig()
    assert exact_otoc(cfg, 0) == 1.0
    assert abs(exact_modified_otoc(cfg, 0) - 1.0) < 1e-12


def test_anticommuting_single_qubit():
    # h_x = h_z = 0 and a zero-length period leave U = I
    cfg = OtocConfig(
        params=KickedIsingParams(n_spins=2, h_x=0.0, h_z=0.0, JT=0.0),
        w_site=1, v_site=2, w_pauli="Z", v_pauli="X",
    )
    assert exact_otoc(cfg, 3) == 1.0
    with pytest.warns(UserWarning):
        same = OtocConfig(params=cfg.params, w_site=1, v_site=1, w_pauli="Z", v_pauli="X")
    assert exact_otoc(same, 0) == -1.0


@pytest.mark.parametrize("n", [1, 2, 5])
def test_modified_matches_brute_force_two_spins(n):
    cfg = OtocConfig(params=KickedIsingParams(n_spins=2), w_site=2, v_site=1)
    u = evolve(cfg.params, n)
    Wt = u.conj().T @ cfg.W() @ u
    assert exact_modified_otoc(cfg, n) == pytest.approx(brute_modified(Wt, cfg.V(), 2), abs=1e-12)


def test_modified_matches_brute_force_three_spins():
    cfg = OtocConfig(params=KickedIsingParams(n_spins=3), w_site=3, v_site=1)
    u = evolve(cfg.params, 4)
    Wt = u.conj().T @ cfg.W() @ u
    assert exact_modified_otoc(cfg, 4) == pytest.approx(brute_modified(Wt, cfg.V(), 3), abs=1e-12)


def test_nonempty_subset_count():
    subs = list(nonempty_subsets(4))
    assert len(subs) == 15 and len(set(subs)) == 15 and () not in subs


def test_otoc_bounded():
    for row in exact_series(OtocConfig()):
        assert abs(row.exact) <= 1 + 1e-9


def test_series_rows():
    rows = exact_series(OtocConfig())
    assert [r.n for r in rows] == list(range(24))
    assert rows[5].t == pytest.approx(5 * 1.6)


def test_long_window_modified_mean_is_one_third():
    # the finite-window average is noisy; over a long window the plateau sits at 1/3
    rows = exact_series(OtocConfig(), n_max=400)
    assert abs(np.mean([r.exact_modified for r in rows[15:]]) - 1 / 3) < 0.03


def test_pow2_weighting_changes_plateau():
    cfg = OtocConfig()
    assert exact_modified_otoc(cfg, 20, "pow2") != pytest.approx(exact_modified_otoc(cfg, 20))
    assert exact_modified_otoc(cfg, 0, "pow2") == pytest.approx(1.0, abs=1e-12)


def test_sample_pair_examples():
    cfg = OtocConfig()
    assert sample_pair(cfg, np.eye(16), 0) == (1.0, 1.0)
    flip = kron_all([PAULI["X"], PAULI["I"], PAULI["I"], PAULI["I"]])
    assert sample_pair(cfg, flip, 0) == (1.0, 1.0)
    with pytest.raises(ValueError):
        sample_pair(cfg, np.eye(8), 0)


def test_sample_pair_matches_operator_conjugation():
    cfg = OtocConfig()
    u = sample_haar(16, np.random.default_rng(8))
    x, y = sample_pair(cfg, u, 3)
    U = evolve(cfg.params, 3)
    Wt = U.conj().T @ cfg.W() @ U
    rho = u @ np.outer(basis_state("0000", 4), basis_state("0000", 4)) @ u.conj().T
    V = cfg.V()
    assert x == pytest.approx(np.trace(rho @ Wt).real, abs=1e-10)
    assert y == pytest.approx(np.trace(rho @ V.conj().T @ Wt @ V).real, abs=1e-10)
    assert -1 <= x <= 1 and -1 <= y <= 1


def test_correlation_estimate_examples():
    x = np.array([1.0, -1.0, 0.5, 0.2])
    est, se, ok = correlation_estimate(x, x)
    assert ok and est == pytest.approx(1.0) and se == pytest.approx(0.0, abs=1e-12)
    est, _, _ = correlation_estimate(x, -x)
    assert est == pytest.approx(-1.0)
    est, se, ok = correlation_estimate(np.zeros(5), np.ones(5))
    assert not ok and math.isnan(est)


def test_correlation_estimate_jackknife_oracle():
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal(30), rng.standard_normal(30)

    def ratio(a, b):
        return np.mean(a * b) / np.sqrt(np.mean(a * a) * np.mean(b * b))

    reps = np.array([ratio(np.delete(x, i), np.delete(y, i)) for i in range(30)])
    se_oracle = np.sqrt(29 / 30 * np.sum((reps - reps.mean()) ** 2))
    est, se, _ = correlation_estimate(x, y)
    assert est == pytest.approx(ratio(x, y), abs=1e-12)
    assert se == pytest.approx(se_oracle, abs=1e-12)


def test_estimator_role_swap_on_mirror_chain():
    # the open chain is mirror symmetric, so exchanging W on site 4 with V on site 1
    # leaves the exact OTOC unchanged and the estimates agree within their errors
    a = OtocConfig(n_unitaries=400, scheme=GLOBAL, seed=5, n_periods_max=10)
    b = OtocConfig(n_unitaries=400, scheme=GLOBAL, seed=5, n_periods_max=10, w_site=1, v_site=4)
    sa, sb = estimate_otoc(a), estimate_otoc(b)
    np.testing.assert_allclose(sa.column("exact"), sb.column("exact"), atol=1e-12)
    gap = np.abs(sa.column("estimate") - sb.column("estimate"))
    bound = np.maximum(0.1, 3 * np.hypot(sa.column("stderr"), sb.column("stderr")))
    assert np.all(gap <= bound)


@pytest.mark.parametrize("scheme", [GLOBAL, LOCAL, design_scheme()])
def test_estimate_deterministic_across_workers(scheme):
    cfg = OtocConfig(n_unitaries=12, scheme=scheme, seed=321, n_periods_max=6)
    a = estimate_otoc(cfg, workers=1)
    b = estimate_otoc(cfg, workers=3)
    assert a.column("estimate").tobytes() == b.column("estimate").tobytes()
    assert a.column("stderr").tobytes() == b.column("stderr").tobytes()


def test_samples_reuse_the_same_unitaries():
    cfg = OtocConfig(n_unitaries=6, scheme=GLOBAL, seed=4, n_periods_max=5)
    both = collect_samples(cfg, (2, 5))
    alone = collect_samples(cfg, (5,))
    np.testing.assert_array_equal(both[:, 1], alone[:, 0])


def test_global_convergence_trend():
    def errors(nu, seed):
        s = estimate_otoc(OtocConfig(n_unitaries=nu, scheme=GLOBAL, seed=seed))
        return np.abs(s.column("estimate") - s.column("exact"))

    big = np.mean([errors(800, r) for r in range(5)], axis=0)
    small = np.mean([errors(50, 5000 + r) for r in range(5)], axis=0)
    assert np.mean((big < small) | (big == small)) >= 0.8


def test_degenerate_rows_are_flagged():
    # no transverse kick: W = X on site 4 has zero expectation in every sampled state
    cfg = OtocConfig(
        params=KickedIsingParams(h_x=0.0), w_pauli="X", n_unitaries=4,
        scheme=design_scheme(period_ms=0.0), n_periods_max=3,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        series = estimate_otoc(cfg)
    assert not any(r.reliable for r in series.rows)
    assert caught


def test_needs_two_unitaries():
    with pytest.raises(ValueError):
        estimate_otoc(OtocConfig(n_unitaries=1))


@pytest.mark.parametrize("scheme", [GLOBAL, LOCAL])
def test_initial_distribution_on_diagonal(scheme):
    pts = np.array(sample_distribution(OtocConfig(n_unitaries=30, scheme=scheme, seed=1), 0))
    np.testing.assert_allclose(pts[:, 0], pts[:, 1], atol=1e-12)


def test_late_global_cloud_decorrelates():
    early = np.array(sample_distribution(OtocConfig(n_unitaries=200, scheme=GLOBAL, seed=3), 1))
    late = np.array(sample_distribution(OtocConfig(n_unitaries=200, scheme=GLOBAL, seed=3), 20))
    assert np.corrcoef(early.T)[0, 1] > 0.9
    assert abs(np.corrcoef(late.T)[0, 1]) < 0.5


@pytest.mark.parametrize(
    "kwargs",
    [{"w_site": 5}, {"w_pauli": "Q"}, {"initial_state": "01"}, {"subset_weighting": "cubic"}],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        OtocConfig(**kwargs)


def test_site_operator_consistency():
    np.testing.assert_array_equal(OtocConfig().W(), site_operator(4, {4: "Z"}))
