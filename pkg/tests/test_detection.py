"""Detector layer, shot sampling, coincidence tables, fits, deduction."""

import numpy as np
import pytest

from rydlink.detection import (
    ClickDistribution,
    CoincidenceTable,
    DetectionError,
    DetectionRecord,
    DetectorParams,
    PathSpec,
    binomial_stderr,
    click_probabilities,
    coincidence_tally,
    deduct_dark_counts,
    fit_visibility,
    herald_efficiency,
    joint_click_distribution,
    joint_outcome_probs,
    pattern_from_clicks,
    sample_pattern_indices,
    sample_shots,
    tally_from_click_weights,
)
from rydlink.photonics import InputStateId, MeasurementSetting, make_input_state, timebin_to_polarization
from rydlink.qstate import photon_register

PERFECT = DetectorParams(efficiency=1.0, dark_prob=0.0)


def converted_state(sid=InputStateId.D):
    photon = photon_register("p")
    state = timebin_to_polarization(make_input_state(sid, photon), photon, 0.0)
    return state, state.registers[0]


def test_click_probabilities_perfect_detector():
    state, reg = converted_state(InputStateId.D)
    p_plus, p_minus, p_none = click_probabilities(state, reg, MeasurementSetting.X, PERFECT)
    assert (p_plus, p_minus, p_none) == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)


def test_click_probabilities_reference_detector_efficiency():
    state, reg = converted_state(InputStateId.D)
    det = DetectorParams(efficiency=0.656, dark_prob=0.0)
    p_plus, _, p_none = click_probabilities(state, reg, MeasurementSetting.X, det)
    assert p_plus == pytest.approx(0.656, abs=1e-12)
    assert p_none == pytest.approx(1 - 0.656, abs=1e-12)


def test_click_probabilities_dark_only():
    # formula arithmetic: eta_d = 0 makes both detectors click independently
    # with the dark probability
    state, reg = converted_state(InputStateId.D)
    det = DetectorParams(efficiency=0.0, dark_prob=0.01)
    p_plus, p_minus, p_none = click_probabilities(state, reg, MeasurementSetting.X, det)
    assert p_plus == pytest.approx(0.01, abs=1e-12)
    assert p_minus == pytest.approx(0.01, abs=1e-12)
    assert p_none == pytest.approx(0.99 * 0.99, abs=1e-12)


def _single_path(det_plus=PERFECT, det_minus=PERFECT):
    return PathSpec("sig", "d_plus", "d_minus", det_plus, det_minus)


def test_joint_click_distribution_sums_to_one():
    state, reg = converted_state(InputStateId.R)
    probs = joint_outcome_probs(state, [(reg, MeasurementSetting.Z)])
    det = DetectorParams(0.7, 0.02)
    dist = joint_click_distribution(probs, [_single_path(det, det)])
    assert sum(dist.probabilities.values()) == pytest.approx(1.0, abs=1e-12)


def test_sample_shots_edge_cases():
    dist = ClickDistribution(("a", "b"), {(True, False): 1.0, (False, False): 0.0})
    assert sample_shots(dist, 0, seed=1) == []
    records = sample_shots(dist, 50, seed=1, setting=("X",), phase=0.25)
    assert len(records) == 50
    assert all(r.clicks == {"a": True, "b": False} for r in records)
    assert records[7].shot_index == 7 and records[7].phase == 0.25

    bad = ClickDistribution(("a",), {(True,): 0.5, (False,): 0.4})
    with pytest.raises(DetectionError, match="sum to 1"):
        sample_shots(bad, 10, seed=1)


def test_sample_shots_deterministic_and_counter_based():
    dist = ClickDistribution(("a",), {(True,): 0.3, (False,): 0.7})
    first = sample_pattern_indices(dist, 1000, seed=99)
    second = sample_pattern_indices(dist, 1000, seed=99)
    assert np.array_equal(first, second)
    # shot i depends only on (seed, i): a shorter run is a prefix
    prefix = sample_pattern_indices(dist, 100, seed=99)
    assert np.array_equal(first[:100], prefix)
    other_seed = sample_pattern_indices(dist, 1000, seed=100)
    assert not np.array_equal(first, other_seed)


def test_sample_shots_binomial_statistics():
    # binomial oracle: the empirical fraction of a fair coin over 1e6 draws
    # stays within 5 sigma = 5 * sqrt(0.25/n) = 0.0025 of one half
    dist = ClickDistribution(("a",), {(True,): 0.5, (False,): 0.5})
    indices = sample_pattern_indices(dist, 10**6, seed=7)
    # canonical order sorts (False,) before (True,)
    fraction = float(np.mean(indices == 1))
    assert abs(fraction - 0.5) < 5 * np.sqrt(0.25 / 10**6)


def _herald_paths():
    return [
        PathSpec("herald", "spd3", "spd4", PERFECT, PERFECT),
        PathSpec("node_b", "spd5", "spd6", PERFECT, PERFECT),
    ]


def _record(shot, clicks):
    return DetectionRecord(shot, ("X", "X"), 0.0, clicks)


def test_coincidence_tally_no_heralds():
    records = [
        _record(i, {"spd3": False, "spd4": False, "spd5": True, "spd6": False})
        for i in range(10)
    ]
    table = coincidence_tally(records, _herald_paths(), 0.0, "X/X")
    tally = table.points[(0.0, "X/X")]
    assert tally.trials == 10
    assert tally.coincidences() == {}
    assert tally.counts[("0", "+")] == 10


def test_coincidence_tally_perfect_correlation():
    records = []
    for i in range(20):
        sym = i % 2 == 0
        records.append(
            _record(
                i,
                {"spd3": sym, "spd4": not sym, "spd5": sym, "spd6": not sym},
            )
        )
    table = coincidence_tally(records, _herald_paths(), 0.0, "X/X")
    cells = table.points[(0.0, "X/X")].coincidences()
    assert cells[("+", "+")] == 10 and cells[("-", "-")] == 10
    assert ("+", "-") not in cells and ("-", "+") not in cells


def test_coincidence_tally_double_click_logged_not_counted():
    records = [
        _record(0, {"spd3": True, "spd4": False, "spd5": True, "spd6": True})
    ]
    tally = coincidence_tally(records, _herald_paths(), 0.0, "X/X").points[(0.0, "X/X")]
    assert tally.coincidences() == {}
    assert tally.counts[("+", "x")] == 1
    assert tally.heralded() == 1


def test_pattern_from_clicks_unknown_detector():
    with pytest.raises(DetectionError, match="unknown detector"):
        pattern_from_clicks({"spd3": True}, _herald_paths())


def test_coincidence_table_csv_roundtrip():
    table = CoincidenceTable(("herald", "node_b"))
    tally = table.point(0.5, "X/Z")
    tally.add(("+", "-"), 12.0)
    tally.add(("0", "0"), 88.0)
    tally.trials = 100.0
    text = table.to_csv()
    assert text.splitlines()[0] == "phase_rad,setting,pattern,count,trials"
    back = CoincidenceTable.from_csv(text, ("herald", "node_b"))
    assert back.points[(0.5, "X/Z")].counts == tally.counts
    assert back.points[(0.5, "X/Z")].trials == 100.0


def test_tally_kernel_matches_record_path():
    paths = _herald_paths()
    detector_ids = ("spd3", "spd4", "spd5", "spd6")
    weights = {
        (True, False, False, True): 3.0,
        (False, False, True, False): 2.0,
        (True, True, True, False): 1.0,
    }
    table_a = tally_from_click_weights(weights, detector_ids, paths, 6.0, 0.0, "X/X")
    records = []
    shot = 0
    for pattern, count in weights.items():
        for _ in range(int(count)):
            records.append(_record(shot, dict(zip(detector_ids, pattern))))
            shot += 1
    table_b = coincidence_tally(records, paths, 0.0, "X/X")
    assert table_a.points[(0.0, "X/X")].counts == table_b.points[(0.0, "X/X")].counts


# ---------------------------------------------------------------------------
# dark-count deduction


def _analytic_table(dark: float, correlation: float = 0.8, signal_rate: float = 0.13):
    """Expected coincidence table for a toy correlated pair with darks."""
    det = DetectorParams(efficiency=1.0, dark_prob=dark)
    paths = [
        PathSpec("herald", "spd3", "spd4", det, det),
        PathSpec("node_b", "spd5", "spd6", det, det),
    ]
    # herald always carries a photon, split evenly; signal correlated with it
    outcomes = {}
    for h, hsign in (("+", 1), ("-", -1)):
        for s, ssign in (("+", 1), ("-", -1)):
            p_corr = 0.5 * signal_rate * (1 + correlation * hsign * ssign) / 2
            outcomes[(h, s)] = p_corr
        outcomes[(h, "0")] = 0.5 * (1 - signal_rate)
    dist = joint_click_distribution(outcomes, paths)
    weights = {p: w * 1e6 for p, w in dist.probabilities.items()}
    return tally_from_click_weights(weights, dist.detector_ids, paths, 1e6, 0.0, "Z/Z")


def test_deduct_dark_counts_noop_without_darks():
    table = _analytic_table(dark=0.0)
    corrected = deduct_dark_counts(table, DetectorParams(1.0, 0.0))
    for key, tally in table.points.items():
        for pattern, count in tally.counts.items():
            assert corrected.points[key].counts.get(pattern, 0.0) == pytest.approx(
                count, abs=1e-9
            )


def test_deduct_dark_counts_pure_dark_table():
    # with zero signal weight every coincidence is accidental; correction
    # empties the cells up to rounding
    det = DetectorParams(efficiency=1.0, dark_prob=0.02)
    paths = [
        PathSpec("herald", "spd3", "spd4", det, det),
        PathSpec("node_b", "spd5", "spd6", det, det),
    ]
    outcomes = {("0", "0"): 1.0}
    dist = joint_click_distribution(outcomes, paths)
    weights = {p: w * 1e6 for p, w in dist.probabilities.items()}
    table = tally_from_click_weights(weights, dist.detector_ids, paths, 1e6, 0.0, "Z/Z")
    corrected = deduct_dark_counts(table, {"herald": 0.02, "node_b": 0.02})
    cells = corrected.points[(0.0, "Z/Z")].coincidences()
    assert all(abs(v) < 1e-6 for v in cells.values())


@pytest.mark.parametrize("dark", [0.005, 0.02, 0.05])
def test_deduct_dark_counts_inverts_injection(dark):
    # injecting independent darks analytically and deducting must reproduce
    # the dark-free table to first order (here: exactly, by kernel inversion)
    clean = _analytic_table(dark=0.0)
    dirty = _analytic_table(dark=dark)
    corrected = deduct_dark_counts(dirty, {"herald": dark, "node_b": dark})
    tol = dark * dark * 1e6
    clean_tally = clean.points[(0.0, "Z/Z")]
    corr_tally = corrected.points[(0.0, "Z/Z")]
    for pattern, count in clean_tally.counts.items():
        assert abs(corr_tally.counts.get(pattern, 0.0) - count) <= tol


def test_deduct_dark_counts_missing_path():
    table = _analytic_table(dark=0.01)
    with pytest.raises(DetectionError, match="missing dark_prob"):
        deduct_dark_counts(table, {"herald": 0.01})


# ---------------------------------------------------------------------------
# visibility fit


def _fringe(v, phi, phases, trials=1000.0):
    return [(p, (1 + v * np.sin(p + phi)) / 2, trials) for p in phases]


@pytest.mark.parametrize("v", [0.0, 0.25, 0.5, 0.75, 1.0])
@pytest.mark.parametrize("phi", [0.0, np.pi / 3, np.pi])
def test_fit_visibility_exact_recovery(v, phi):
    phases = np.linspace(0, 2 * np.pi, 9)
    fit_v, fit_phi, _ = fit_visibility(_fringe(v, phi, phases))
    assert fit_v == pytest.approx(v, abs=1e-6)
    if v > 0:
        delta = (fit_phi - phi + np.pi) % (2 * np.pi) - np.pi
        assert abs(delta) < 1e-6


def test_fit_visibility_constant_half():
    phases = np.linspace(0, 2 * np.pi, 9)
    v, _, _ = fit_visibility([(p, 0.5, 500.0) for p in phases])
    assert v == pytest.approx(0.0, abs=1e-9)


def test_fit_visibility_reference_amplitude():
    phases = np.linspace(0, 2 * np.pi, 13)
    v, _, _ = fit_visibility(_fringe(0.647, 0.3, phases))
    assert v == pytest.approx(0.647, abs=1e-6)


def test_fit_visibility_recovers_sampled_series():
    # Monte Carlo repetition oracle: sampled fractions at 1e4 trials/point
    # recover the amplitude within 3 fitted standard errors
    rng = np.random.default_rng(21)
    phases = np.linspace(0, 2 * np.pi, 13)
    n = 10_000
    series = []
    for p in phases:
        f_true = (1 + 0.9 * np.sin(p + 0.7)) / 2
        series.append((p, rng.binomial(n, f_true) / n, float(n)))
    v, _, v_err = fit_visibility(series)
    assert abs(v - 0.9) < 3 * v_err


def test_fit_visibility_input_validation():
    with pytest.raises(DetectionError, match="4 phase"):
        fit_visibility(_fringe(0.5, 0.0, [0.0, 1.0, 2.0]))
    with pytest.raises(DetectionError, match="distinct"):
        fit_visibility(_fringe(0.5, 0.0, [0.0, 0.0, 2.0, 2.0, 3.3]))
    with pytest.raises(DetectionError, match="span"):
        fit_visibility(_fringe(0.5, 0.0, [0.0, 0.5, 1.0, 1.5]))


def test_herald_efficiency_formula():
    assert herald_efficiency(0.068, 0.481, 0.656) == pytest.approx(0.0215, abs=5e-4)
    assert herald_efficiency(0.0, 0.5, 0.5) == 0.0
    assert herald_efficiency(1.0, 1.0, 1.0) == 1.0
    with pytest.raises(DetectionError):
        herald_efficiency(1.2, 0.5, 0.5)


def test_binomial_stderr():
    assert binomial_stderr(0.5, 100) == pytest.approx(0.05, abs=1e-12)
    assert np.isnan(binomial_stderr(0.5, 0))


def test_detector_params_validation():
    with pytest.raises(DetectionError):
        DetectorParams(efficiency=1.1)
    with pytest.raises(DetectionError):
        DetectorParams(dark_prob=-0.01)
