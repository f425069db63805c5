import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from fiid.construction import ConstructionConfig
from fiid.errors import ContractViolation, InsufficientDataError
from fiid.verification import (
    BUILTIN_SPECS,
    SampleBatch,
    TransportSpec,
    exact_suite,
    forking_existence_frequency,
    generate_batch,
    gw_depth_survival,
    gw_empirical_survival,
    gw_extinction_fixed_point,
    marginal_fairness,
    mass_transport_balance,
    pattern_chisquare,
    symmetry_audit,
)


@pytest.fixture(scope="module")
def small_batch():
    cfg = ConstructionConfig(radius=8, n_bits=3, interior_margin=3, audit=False)
    return generate_batch(cfg, range(100, 220))


def test_chisquare_rejects_constant():
    rep = pattern_chisquare(["000"] * 800, 3)
    assert rep.p_value < 1e-6 and not rep.passed()


def test_chisquare_equal_counts():
    words = [format(i % 8, "03b") for i in range(800)]
    rep = pattern_chisquare(words, 3)
    assert rep.statistic == 0 and rep.p_value == 1.0
    assert rep.dof == 7 and rep.in_band


def test_chisquare_needs_data():
    with pytest.raises(InsufficientDataError):
        pattern_chisquare(["000"] * 79, 3)


def test_chisquare_pvalues_uniform_under_null():
    rng = np.random.default_rng(2026)
    pvals = []
    for _ in range(200):
        words = [format(int(x), "03b") for x in rng.integers(0, 8, 800)]
        pvals.append(pattern_chisquare(words, 3).p_value)
    assert stats.kstest(pvals, "uniform").pvalue > 1e-3


def test_gw_closed_forms():
    assert gw_depth_survival(4, 0) == 1
    assert gw_depth_survival(4, 1) == pytest.approx(0.9375)
    assert gw_depth_survival(4, 1, exact=True) == Fraction(15, 16)
    # two levels by hand: e1 = 1/2, e2 = 1/2 + (1/2)^3 / 2 = 9/16
    assert gw_depth_survival(4, 2, exact=True) == 1 - Fraction(9, 16) ** 4


def test_gw_monotone_and_limit():
    vals = [gw_depth_survival(4, k) for k in range(60)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    e = (math.sqrt(5) - 1) / 2
    assert abs(e - (0.5 + e ** 3 / 2)) < 1e-15
    assert abs(gw_depth_survival(4, 200) - (1 - e ** 4)) < 1e-12
    assert abs(gw_extinction_fixed_point(4) - e) < 1e-12
    assert round(1 - e ** 4, 4) == 0.8541


def test_gw_exact_matches_float():
    assert float(gw_depth_survival(5, 9, exact=True)) == pytest.approx(gw_depth_survival(5, 9), abs=1e-15)


def test_gw_empirical_radius_one():
    rep = gw_empirical_survival(4, 1, 4000, seed=7)
    assert rep.oracle == pytest.approx(0.9375)
    assert abs(rep.z) <= 3


def test_gw_empirical_reports_forking():
    rep = gw_empirical_survival(4, 5, 300, seed=1)
    assert rep.forking_each_label is not None and 0 <= rep.forking_each_label <= 1
    big = gw_empirical_survival(4, 14, 20, seed=1)
    assert big.forking_each_label is None


def test_forking_frequency_grows_with_radius():
    freqs = [forking_existence_frequency(4, r, 300, seed=0) for r in (3, 5, 7)]
    assert freqs[0] <= freqs[2] + 0.05
    assert freqs[2] > 0.5


def test_trivial_transports_balance_exactly(small_batch):
    for name in ("self", "neighbors"):
        rep = mass_transport_balance(small_batch, name)
        assert rep.exact_mismatches == 0 and rep.passed(exact=True)
    nb = mass_transport_balance(small_batch, "neighbors")
    assert nb.mean_sent == nb.mean_received == 3.0


def test_distinguished_receives_exactly_one(small_batch):
    rep = mass_transport_balance(small_batch, "distinguished-vertex")
    assert rep.mean_received == 1.0 and rep.se_received == 0.0
    assert rep.mean_sent > 0


def _far_mass(ctx):
    return 1.0, 1.0


def test_transport_support_contract(small_batch):
    spec = TransportSpec("far", _far_mass, support_radius=small_batch.config.radius)
    with pytest.raises(ContractViolation):
        mass_transport_balance(small_batch, spec)


def test_custom_spec_in_batch():
    spec = TransportSpec("near", _far_mass, support_radius=1, exact=True)
    cfg = ConstructionConfig(radius=6, n_bits=1, interior_margin=2, audit=False)
    batch = generate_batch(cfg, range(5), specs=[spec])
    assert mass_transport_balance(batch, spec).exact_mismatches == 0


def test_batch_json_roundtrip(small_batch):
    text = small_batch.to_json()
    again = SampleBatch.from_json(text)
    assert again.to_json() == text
    assert again.seeds == list(range(100, 220))


def test_batch_parallel_matches_serial():
    cfg = ConstructionConfig(radius=7, n_bits=2, interior_margin=3, audit=False)
    a = generate_batch(cfg, range(12), jobs=1)
    b = generate_batch(cfg, range(12), jobs=2)
    assert a.to_json() == b.to_json()


def test_fairness_report(small_batch):
    rep = marginal_fairness(small_batch)
    assert len(rep.frequencies) == 3
    assert rep.band == pytest.approx(4 * math.sqrt(0.25 / rep.n_used))


def test_headline_on_small_batch(small_batch):
    good = small_batch.usable()
    assert good and all(s.headline_ok for s in good)


def test_symmetry_audit_small():
    rep = symmetry_audit(50, 6, seed=3)
    assert rep.passed and rep.checks["r_plus symmetry"] == 50


def test_exact_suite_small():
    rep = exact_suite(40, 7, seed=5)
    assert rep.passed, rep.violations[:3]
    assert rep.checks["vor connected"] == 40
    assert "fur[vertex] one seed per cell" in rep.checks


def test_builtin_specs_declare_support():
    assert BUILTIN_SPECS["self"].support_radius == 0
    assert BUILTIN_SPECS["neighbors"].support_radius == 1
    assert BUILTIN_SPECS["distinguished-vertex"].support_radius is None
