# test_precision_oracle.py
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from channel_sim import YieldModel, run_experiment, yield_at
from decoy_core import (
    EXACT,
    FLOAT,
    equal_spacing_schedule,
    estimate_y1,
    interval_delta_with_error,
    validate_schedule,
)
from decoy_errors import ConfigError, PreconditionViolation, TailNotCertifiable
from precision_oracle import (
    CertifiedValue,
    containment_campaign,
    export_golden_table,
    load_golden_table,
    oracle_delta,
    reference_delta_mp,
    remainder_expansion,
    saturation_gap,
)

E_MINUS_2 = "0.71828182845904523536028747135"


def _random_schedules(count, L, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        picks = sorted(rng.choice(np.arange(1, 21), size=L, replace=False))
        yield validate_schedule([Fraction(int(p), 10) for p in picks])


# ---------- remainder expansion ----------

def test_remainder_single_probe_sums_to_e_minus_2():
    exp = remainder_expansion(equal_spacing_schedule(1), 40)
    assert exp.sign == 1
    assert exp.terms[2] == Fraction(1, 2)
    assert exp.terms[5] == Fraction(1, 120)
    v = CertifiedValue(exp.partial_sum(), exp.certified_tail)
    with mpmath.workdps(50):
        assert v.contains(Fraction(str(mpmath.e - 2)[:45]), slack=1e-40)


def test_remainder_two_probe_terms_are_negative():
    exp = remainder_expansion(validate_schedule([0.5, 1.0]), 30)
    assert exp.sign == -1
    assert min(exp.terms) == 3
    assert all(c < 0 for c in exp.terms.values())


def test_remainder_preconditions():
    with pytest.raises(PreconditionViolation):
        remainder_expansion(equal_spacing_schedule(3), 3)
    with pytest.raises(TailNotCertifiable):
        remainder_expansion(validate_schedule([10.0]), 5)


# ---------- oracle values ----------

def test_oracle_brackets_two_probe_delta():
    d = oracle_delta(validate_schedule([0.5, 1.0]), K=60)
    assert d.tail < Fraction(1, 10 ** 25)
    assert float(d.value) == pytest.approx(0.123397, rel=1e-5)


@pytest.mark.parametrize("L", [1, 2, 3, 4, 6, 10])
def test_oracle_agrees_with_mpmath(L):
    s = equal_spacing_schedule(L)
    d = oracle_delta(s, K=80)
    ref = reference_delta_mp(s, dps=80)
    with mpmath.workdps(80):
        diff = abs(mpmath.mpf(d.value.numerator) / d.value.denominator - ref)
        assert diff <= mpmath.mpf(d.tail.numerator) / d.tail.denominator + mpmath.mpf("1e-60")


@pytest.mark.parametrize("L", range(1, 9))
def test_float_delta_within_its_certified_error(L):
    s = equal_spacing_schedule(L)
    value, err = interval_delta_with_error(s, FLOAT)
    d = oracle_delta(s, K=60)
    assert abs(Fraction(value) - d.value) <= Fraction(err) + d.tail


def test_exact_delta_matches_oracle():
    for L in (2, 5, 9, 13):
        s = equal_spacing_schedule(L)
        value, _ = interval_delta_with_error(s, EXACT)
        d = oracle_delta(s, K=80)
        assert abs(value - d.value) <= d.tail + d.value * Fraction(1, 10 ** 25)


# ---------- containment ----------

@pytest.mark.parametrize("L", range(1, 7))
def test_containment_equal_spacing(L):
    report = containment_campaign(equal_spacing_schedule(L), seed=2024, trials=10_000)
    assert report.ok, report.to_dict()
    assert report.max_excess == 0.0


@pytest.mark.parametrize("L", range(1, 7))
def test_containment_random_schedules(L):
    for i, s in enumerate(_random_schedules(2, L, seed=L)):
        report = containment_campaign(s, seed=i, trials=10_000)
        assert report.ok, report.to_dict()


def test_campaign_is_reproducible():
    s = equal_spacing_schedule(3)
    a = containment_campaign(s, seed=9, trials=500)
    b = containment_campaign(s, seed=9, trials=500)
    assert a.to_dict() == b.to_dict()
    with pytest.raises(PreconditionViolation):
        containment_campaign(s, seed=9, trials=0)


@pytest.mark.parametrize("L", range(1, 6))
def test_estimate_is_one_sided(L):
    s = equal_spacing_schedule(L)
    model = YieldModel.loss_dark(0.6, 1e-3)
    rep = estimate_y1(run_experiment(s, model), s, EXACT)
    y1 = Fraction(yield_at(model, 1))
    if L % 2 == 1:
        assert rep.bound == "upper" and rep.y1_est > y1
    else:
        assert rep.bound == "lower" and rep.y1_est < y1


# ---------- saturation ----------

@pytest.mark.parametrize("L", range(1, 7))
def test_adversarial_yields_saturate_the_interval_exactly(L):
    out = saturation_gap(equal_spacing_schedule(L), EXACT)
    assert abs(out["gap"]) < Fraction(1, 10 ** 20)


@pytest.mark.parametrize("L", range(1, 5))
def test_adversarial_yields_saturate_in_float(L):
    out = saturation_gap(equal_spacing_schedule(L), FLOAT)
    assert abs(out["gap"]) < 1e-9


# ---------- golden table ----------

def test_golden_table_round_trip(tmp_path):
    path = str(tmp_path / "golden.tsv")
    n = export_golden_table(path, L_values=(1, 2, 3), digits=30)
    assert n == 7
    rows = load_golden_table(path)
    assert rows[("delta_equal", 1)].startswith(E_MINUS_2[:27])
    assert rows[("f_squared_equal", 2)] == "26"
    assert float(rows[("delta_equal", 2)]) == pytest.approx(0.123397, rel=1e-5)
    assert float(rows[("delta2_closed_1_0.5", 2)]) == pytest.approx(float(rows[("delta_equal", 2)]), rel=1e-12)
    with open(path, encoding="utf-8") as f:
        assert f.readline().strip() == "# decoy-golden v1"


def test_golden_table_rejects_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_golden_table(str(tmp_path / "missing.tsv"))
    bad = tmp_path / "bad.tsv"
    bad.write_text("# decoy-golden v0\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_golden_table(str(bad))
    broken = tmp_path / "broken.tsv"
    broken.write_text("# decoy-golden v1\ndelta_equal\t1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_golden_table(str(broken))
