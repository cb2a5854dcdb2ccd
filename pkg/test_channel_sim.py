# test_channel_sim.py
import math

import numpy as np
import pytest

from channel_sim import (
    SourceDistribution,
    YieldModel,
    a_from_q,
    coincidence_gain_direct,
    coincidence_gain_exact,
    coincidence_gain_with_error,
    gain_exact,
    run_experiment,
    sample_clicks,
    source_factory,
    yield_at,
    yield_model_from_dict,
)
from decoy_core import EXACT, equal_spacing_schedule, estimate_y1, multimode_estimate, validate_schedule
from decoy_errors import (
    BudgetTooSmall,
    ConfigError,
    DomainError,
    IncompleteTensor,
    InvalidPulseCount,
    NonConvergent,
    TensorTailUnbounded,
)
from gain_records import GainRecord, intensity_key, missing_tuples
from seeded_streams import SeededStreams

E = math.e


# ---------- yields ----------

def test_loss_dark_yields():
    assert yield_at(YieldModel.loss_dark(0.3, 0.02), 0) == pytest.approx(0.02)
    assert yield_at(YieldModel.loss_dark(1.0, 0.0), 3) == 1.0
    assert yield_at(YieldModel.loss_dark(0.1, 0.0), 2) == pytest.approx(0.19)
    assert yield_at(YieldModel.loss_dark(1.0, 0.0), 0) == 0.0


def test_table_and_tensor_yields():
    t = YieldModel.table([0.1, 0.5], tail_value=0.9)
    assert [yield_at(t, k) for k in range(4)] == [0.1, 0.5, 0.9, 0.9]
    c = YieldModel.custom_tensor({(1, 1): 0.7}, tail_value=0.0)
    assert yield_at(c, (1, 1)) == 0.7
    assert yield_at(c, (2, 0)) == 0.0
    with pytest.raises(TensorTailUnbounded):
        yield_at(YieldModel.custom_tensor({(1, 1): 0.7}), (0, 0))


def test_yield_model_validation():
    with pytest.raises(DomainError):
        YieldModel.loss_dark(1.5, 0.0)
    with pytest.raises(DomainError):
        YieldModel.table([0.2, -0.1], tail_value=0.0)
    with pytest.raises(DomainError):
        yield_at(YieldModel.loss_dark(0.5, 0.0), -1)
    with pytest.raises(DomainError):
        yield_at(YieldModel.ideal_coincidence(2), (1,))


def test_yield_model_from_dict_round_trip():
    m = YieldModel.separable_product([YieldModel.loss_dark(0.5, 1e-5), YieldModel.table([0.0, 0.4], 0.8)])
    assert yield_model_from_dict(m.to_dict()) == m
    with pytest.raises(ConfigError):
        yield_model_from_dict({"kind": "laser"})


# ---------- exact gains ----------

def test_fock_source_gain_is_the_yield():
    model = YieldModel.loss_dark(0.3, 0.01)
    q, err = gain_exact(SourceDistribution.fock(1), model)
    assert q == yield_at(model, 1)
    assert err == 0.0


def test_poisson_gain_perfect_detector():
    q, err = gain_exact(SourceDistribution.poisson(1.0), YieldModel.loss_dark(1.0, 0.0))
    assert q == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert err < 1e-15


def test_poisson_gain_always_click():
    for mu in (0.0, 0.3, 2.0, 25.0):
        q, _ = gain_exact(SourceDistribution.poisson(mu), YieldModel.loss_dark(0.2, 1.0))
        assert q == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("mu", [0.05, 0.5, 1.0, 4.0, 40.0])
def test_poisson_truncation_is_certified(mu):
    eta, y0 = 0.37, 1e-3
    q, err = gain_exact(SourceDistribution.poisson(mu), YieldModel.loss_dark(eta, y0))
    closed = 1 - (1 - y0) * math.exp(-eta * mu)
    assert abs(q - closed) <= err + 1e-14 * closed


def test_table_source():
    src = SourceDistribution.table([0.5, 0.25, 0.25])
    q, err = gain_exact(src, YieldModel.loss_dark(1.0, 0.0))
    assert q == pytest.approx(0.5)
    with pytest.raises(DomainError):
        SourceDistribution.table([0.5, 0.4])
    with pytest.raises(NonConvergent):
        gain_exact(SourceDistribution("table", probs=(0.5, 0.4)), YieldModel.loss_dark(1.0, 0.0))


def test_gain_rel_tol_range():
    with pytest.raises(DomainError):
        gain_exact(SourceDistribution.poisson(1.0), YieldModel.loss_dark(1.0, 0.0), rel_tol=1e-3)


def test_a_from_q():
    assert a_from_q(0.0, 3.0) == 0.0
    assert a_from_q(1 - math.exp(-1), 1.0) == pytest.approx(E - 1)
    assert a_from_q(0.5, 0.0) == 0.5


def test_source_factory():
    assert source_factory("poisson")(0.4) == SourceDistribution.poisson(0.4)
    assert source_factory({"kind": "fock", "k0": 2})(0.4) == SourceDistribution.fock(2)
    with pytest.raises(ConfigError):
        source_factory("thermal")


# ---------- coincidences ----------

def test_coincidence_vacuum_is_dark_coincidence():
    model = YieldModel.separable_product([YieldModel.loss_dark(0.5, 0.1), YieldModel.loss_dark(0.5, 0.2)])
    assert coincidence_gain_exact((0.0, 0.0), model) == pytest.approx(0.02)


def test_ideal_coincidence_gain():
    a = coincidence_gain_exact((1.0, 1.0), YieldModel.ideal_coincidence(2))
    assert a == pytest.approx((E - 1) ** 2, rel=1e-13)


def test_separable_factorisation_matches_direct_sum():
    model = YieldModel.separable_product([YieldModel.loss_dark(0.3, 1e-4), YieldModel.loss_dark(0.8, 0.0)])
    for mus in [(0.5, 0.5), (1.0, 0.25), (0.0, 0.75)]:
        fac = coincidence_gain_exact(mus, model)
        assert fac == pytest.approx(coincidence_gain_direct(mus, model, K=60), rel=1e-12)
        single = [coincidence_gain_exact((m,), c) for m, c in zip(mus, model.components)]
        assert fac == pytest.approx(single[0] * single[1], rel=1e-12)


def test_custom_tensor_gain_matches_ideal_coincidence():
    entries = {}
    for k in range(0, 61):
        entries[(0, k)] = 0.0
        entries[(k, 0)] = 0.0
    model = YieldModel.custom_tensor(entries, tail_value=1.0)
    a, err = coincidence_gain_with_error((1.0, 1.0), model)
    assert a == pytest.approx((E - 1) ** 2, rel=1e-12)
    assert err == 0.0
    with pytest.raises(TensorTailUnbounded):
        coincidence_gain_exact((1.0, 1.0), YieldModel.custom_tensor({(1, 1): 1.0}))


# ---------- sampling ----------

def test_sample_clicks_extremes():
    assert sample_clicks(0.0, 10 ** 6, seed=3) == 0
    assert sample_clicks(1.0, 10 ** 6, seed=3) == 10 ** 6
    with pytest.raises(InvalidPulseCount):
        sample_clicks(0.5, 0, seed=3)


def test_sample_clicks_is_deterministic():
    assert sample_clicks(0.3, 10 ** 5, seed=99, stream=4) == sample_clicks(0.3, 10 ** 5, seed=99, stream=4)


def test_sample_clicks_mean():
    m, q = 10 ** 5, 0.3
    rates = [sample_clicks(q, m, seed=s) / m for s in range(200)]
    sigma = math.sqrt(q * (1 - q) / m)
    assert abs(np.mean(rates) - q) < 5 * sigma / math.sqrt(200)


def test_click_rate_spread_scales_as_inverse_sqrt_m():
    q = 0.3
    streams = SeededStreams(17)
    for m in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6):
        rates = np.array([streams.binomial(t, m, q) for t in range(1000)]) / m
        ratio = rates.std(ddof=1) * math.sqrt(m) / math.sqrt(q * (1 - q))
        assert 0.9 <= ratio <= 1.1


# ---------- experiments ----------

def test_exact_experiment_reproduces_gains():
    s = equal_spacing_schedule(2)
    model = YieldModel.loss_dark(0.4, 1e-4)
    rec = run_experiment(s, model)
    assert len(rec) == 3
    for e in rec:
        assert e.provenance == "exact"
        q, _ = gain_exact(SourceDistribution.poisson(e.intensities[0]), model)
        assert e.a_value == pytest.approx(a_from_q(q, e.intensities[0]), rel=1e-15)
        assert e.certified_error < 1e-14


def test_experiment_covers_full_tensor():
    rec = run_experiment(validate_schedule([0.5, 1.0]), YieldModel.ideal_coincidence(2), pulses=1000, seed=1)
    assert rec.mode_count == 2
    assert len(rec) == 9
    assert all(e.pulses == 1000 and e.seed == 1 for e in rec)


def test_near_duplicate_intensities_keep_separate_settings():
    s = validate_schedule([0.1, 0.1 + 3e-13, 0.5])
    rec = run_experiment(s, YieldModel.loss_dark(1.0, 0.0))
    assert len(rec) == 4
    assert intensity_key([0.1]) != intensity_key([0.1 + 3e-13])
    a, b = (rec.get((mu,)).a_value for mu in s.floats()[1:3])
    assert a < b
    assert missing_tuples(s.floats(), 1, rec) == []


def test_missing_tuples_lists_uncovered_settings():
    s = validate_schedule([0.5, 1.0])
    rec = run_experiment(s, YieldModel.ideal_coincidence(2))
    assert missing_tuples(s.floats(), 2, rec) == []
    partial = GainRecord(mode_count=2)
    for e in rec:
        if 1.0 not in e.intensities:
            partial.add(e)
    missing = missing_tuples(s.floats(), 2, partial)
    assert len(missing) == 5
    assert all(1.0 in t for t in missing)
    with pytest.raises(IncompleteTensor) as exc:
        multimode_estimate(partial, s, 2)
    assert exc.value.details["missing"] == missing


def test_experiment_is_deterministic_across_workers():
    s = equal_spacing_schedule(3)
    model = YieldModel.separable_product([YieldModel.loss_dark(0.5, 1e-3)] * 2)
    one = run_experiment(s, model, pulses=5000, seed=42, workers=1)
    many = run_experiment(s, model, pulses=5000, seed=42, workers=4)
    assert one.to_list() == many.to_list()
    other = run_experiment(s, model, pulses=5000, seed=43)
    assert one.to_list() != other.to_list()


def test_experiment_budget_split():
    rec = run_experiment(equal_spacing_schedule(2), YieldModel.loss_dark(0.5, 0.0), total_pulses=1000, seed=0)
    assert all(e.pulses == 333 for e in rec)
    assert rec.discarded_pulses == 1
    with pytest.raises(BudgetTooSmall):
        run_experiment(equal_spacing_schedule(2), YieldModel.loss_dark(0.5, 0.0), total_pulses=2, seed=0)


def test_experiment_rejects_bad_pulse_counts():
    s = equal_spacing_schedule(1)
    for bad in (0, -5, 2.5):
        with pytest.raises(InvalidPulseCount):
            run_experiment(s, YieldModel.loss_dark(0.5, 0.0), pulses=bad, seed=0)


def test_experiment_with_fock_source():
    rec = run_experiment(equal_spacing_schedule(1), YieldModel.loss_dark(0.5, 0.0),
                         source=source_factory({"kind": "fock", "k0": 1}))
    assert rec.get((1.0,)).a_value == pytest.approx(0.5 * E)


def test_sampled_estimate_tracks_exact_estimate():
    s = validate_schedule([1.0])
    model = YieldModel.loss_dark(0.5, 1e-5)
    exact = estimate_y1(run_experiment(s, model), s).y1_est
    m = 10 ** 6
    scale = math.sqrt(2) / math.sqrt(m)
    hits = sum(
        abs(estimate_y1(run_experiment(s, model, pulses=m, seed=seed), s).y1_est - exact) <= 4 * scale
        for seed in range(500)
    )
    assert hits >= 475


def test_estimate_spread_matches_statistical_model():
    s = validate_schedule([1.0])
    model = YieldModel.loss_dark(0.5, 1e-5)
    m = 10 ** 5
    ests = [estimate_y1(run_experiment(s, model, pulses=m, seed=seed), s).y1_est for seed in range(500)]
    predicted = math.sqrt(2) / math.sqrt(m)
    assert 0.75 <= np.std(ests, ddof=1) / predicted <= 1.25


def test_exact_mode_estimate_on_exact_gains():
    s = validate_schedule([0.5, 1.0])
    rec = run_experiment(s, YieldModel.loss_dark(1.0, 0.0))
    rep = estimate_y1(rec, s, EXACT)
    assert rep.raw_lo <= 1.0 + 1e-12 and 1.0 <= rep.raw_hi + 1e-12
