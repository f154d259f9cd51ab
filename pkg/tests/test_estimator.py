import dataclasses
import math
import warnings

import numpy as np
import pytest

from qdc.errors import ConfigurationError, DomainWarning, InfeasibleError
from qdc.estimator import (
    KAPPA_PRESETS,
    SWEEP_HEADER,
    FtCostParams,
    code_cycles_for_distillation,
    delay_factor,
    evaluate,
    logical_error_rate,
    per_state_failure,
    relative_time_cost,
    required_distance,
    select_distillation,
    sweep,
    sweep_to_csv,
    sweep_to_json,
    threshold_rows,
    DistillationScheme,
)

DEFAULT = FtCostParams()
N_RANGE = [2**k for k in range(4, 21)]


def scan_distance(params, cycles, tiles=None, share=None):
    """Exhaustive oracle: walk every distance and keep the first feasible one."""
    tiles = params.tiles if tiles is None else tiles
    share = params.budget / 2 if share is None else share
    for d in range(3, params.distance_cap + 1):
        if params.odd_only and d % 2 == 0:
            continue
        if tiles * cycles * (0.1 * (100 * params.p) ** ((d + 1) / 2) / d) < share:
            return d
    return None


class TestLogicalErrorRate:
    def test_d3(self):
        assert logical_error_rate(1e-3, 3) == pytest.approx(3.3333e-4, rel=1e-4)

    def test_d13(self):
        assert logical_error_rate(1e-3, 13) == pytest.approx(7.6923e-10, rel=1e-4)

    def test_monotone(self):
        rates = [logical_error_rate(1e-3, d) for d in range(3, 52)]
        assert all(b < a for a, b in zip(rates, rates[1:]))

    def test_small_distance_rejected(self):
        with pytest.raises(ConfigurationError):
            logical_error_rate(1e-3, 2)

    def test_threshold_warning(self):
        with pytest.warns(DomainWarning):
            logical_error_rate(0.02, 5)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            logical_error_rate(9e-3, 5)


class TestDistillation:
    def test_level1_is_35p3(self):
        assert per_state_failure(1e-3, 1) == 35 * (1e-3) ** 3

    def test_levels_decrease(self):
        f = [per_state_failure(1e-3, lv) for lv in range(1, 5)]
        assert all(b < a for a, b in zip(f, f[1:]))

    def test_million_states_level1(self):
        s = select_distillation(10**6, 1e-3, 0.05)
        assert s.level == 1
        assert 10**6 * s.per_state_failure == pytest.approx(0.035, rel=1e-12)

    def test_hundred_million_states(self):
        assert 10**8 * per_state_failure(1e-3, 1) == pytest.approx(3.5, rel=1e-12)
        for share in (0.01, 0.5, 0.999):
            assert select_distillation(10**8, 1e-3, share).level >= 2

    def test_single_state(self):
        assert select_distillation(1, 1e-3, 0.01).level == 1

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            select_distillation(10, 0.3, 1e-3)

    def test_inputs_per_output(self):
        assert DistillationScheme(2, 1e-3).inputs_per_output == 225


class TestRequiredDistance:
    def test_matches_scan_at_defaults(self):
        d = required_distance(DEFAULT, 10**8)
        assert d == scan_distance(DEFAULT, 10**8)

    def test_trivial_constraint(self):
        assert required_distance(DEFAULT, 1, tiles=1) == 3

    def test_monotone_in_cycles(self):
        ds = [required_distance(DEFAULT, 2**k) for k in range(0, 45)]
        assert ds == sorted(ds)

    def test_cap(self):
        with pytest.raises(InfeasibleError):
            required_distance(dataclasses.replace(DEFAULT, distance_cap=9), 10**12)

    def test_odd_only(self):
        p = dataclasses.replace(DEFAULT, odd_only=True)
        assert required_distance(p, 10**8) % 2 == 1

    def test_random_draws_against_exhaustive_scan(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            p = FtCostParams(
                p=float(10 ** rng.uniform(-4.5, -2.3)),
                budget=float(10 ** rng.uniform(-4, -0.5)),
                tiles=int(rng.integers(1, 2000)),
                odd_only=bool(rng.integers(2)),
            )
            cycles = int(10 ** rng.uniform(0, 13))
            expected = scan_distance(p, cycles)
            if expected is None:
                with pytest.raises(InfeasibleError):
                    required_distance(p, cycles)
            else:
                assert required_distance(p, cycles) == expected


class TestCodeCycles:
    def test_worked_example(self):
        n = code_cycles_for_distillation(10**6, DistillationScheme(1, 1e-3), 13, DEFAULT)
        assert n == 143_000_000

    def test_zero_states(self):
        assert code_cycles_for_distillation(0, None, 13, DEFAULT) == 0

    def test_two_factories(self):
        one = code_cycles_for_distillation(12345, DistillationScheme(1, 1e-3), 7, DEFAULT)
        two = code_cycles_for_distillation(12345, DistillationScheme(1, 1e-3), 7, dataclasses.replace(DEFAULT, factories=2))
        assert two == math.ceil(one / 2)

    def test_level_two_scaling(self):
        one = code_cycles_for_distillation(10, DistillationScheme(1, 1e-3), 5, DEFAULT)
        two = code_cycles_for_distillation(10, DistillationScheme(2, 1e-3), 5, DEFAULT)
        assert two == 15 * one


class TestDelay:
    def test_values(self):
        assert delay_factor(2**10, "sqrt", 1) == 32
        assert delay_factor(2**10, "log", 1) == 10
        assert delay_factor(2**10, "none", 5) == 0

    def test_bad_model(self):
        with pytest.raises(ConfigurationError):
            delay_factor(4, "cubic", 1)


class TestRelativeCost:
    def test_scenario_anchor_counts(self):
        assert DEFAULT.user_states == 10**6
        assert DEFAULT.outsourced_states == 99 * 10**6

    def test_delay_free_against_hand_arithmetic(self):
        p = dataclasses.replace(DEFAULT, delay_model="none")
        report = evaluate(p, 2**10)
        # hand-computed: level 2 in both scenarios (0.035 > 0.005 share), 175 tiles
        d_with, d_without = report.with_qdc.distance, report.without_qdc.distance
        cyc_with = 10**6 * 11 * 15 * d_with + 99 * 10**6
        cyc_without = 10**8 * 11 * 15 * d_without
        assert report.with_qdc.level == report.without_qdc.level == 2
        assert d_with == scan_distance(p, cyc_with, tiles=175)
        assert d_without == scan_distance(p, cyc_without, tiles=175)
        assert (d_with, d_without) == (23, 27)
        assert report.relative_time_cost == pytest.approx(cyc_with / cyc_without, rel=1e-15)
        assert report.relative_time_cost < 1

    def test_no_outsourcing_gives_exactly_one(self):
        p = dataclasses.replace(DEFAULT, f_outsourced=0.0, kappa=50)
        assert relative_time_cost(p, 2**16) == 1.0

    def test_full_outsourcing_floor(self):
        p = dataclasses.replace(DEFAULT, f_outsourced=1.0, delay_model="none")
        r = evaluate(p, 2**8)
        assert r.with_qdc.states_distilled == 0
        assert 0 < r.relative_time_cost < 1e-3

    def test_large_kappa_not_worthwhile(self):
        assert relative_time_cost(dataclasses.replace(DEFAULT, kappa=500), 2**10) > 10

    def test_total_error_within_budget(self):
        for n in (16, 2**10, 2**20):
            r = evaluate(DEFAULT, n)
            assert r.total_error < DEFAULT.budget
            assert r.without_qdc.total_error < DEFAULT.budget

    def test_minimal_distance(self):
        r = evaluate(DEFAULT, 2**12)
        d = r.chosen_distance
        s = r.with_qdc
        assert s.tiles * s.code_cycles * logical_error_rate(1e-3, d) < DEFAULT.logical_budget
        assert s.tiles * s.code_cycles * logical_error_rate(1e-3, d - 1) >= DEFAULT.logical_budget

    @pytest.mark.parametrize("model", ["sqrt", "log"])
    def test_nondecreasing_in_kappa_and_n(self, model):
        p = dataclasses.replace(DEFAULT, delay_model=model)
        by_kappa = [relative_time_cost(dataclasses.replace(p, kappa=k), 2**10) for k in (0, 0.1, 1, 3, 10)]
        assert by_kappa == sorted(by_kappa)
        by_n = [relative_time_cost(p, n) for n in N_RANGE]
        assert by_n == sorted(by_n)

    def test_config_rejects_unknown(self):
        with pytest.raises(ConfigurationError):
            FtCostParams.from_mapping({"kapa": 1})
        assert FtCostParams.from_mapping({"kappa": 2}).kappa == 2

    @pytest.mark.parametrize("bad", [{"f_outsourced": 1.5}, {"p": 0}, {"budget": 1}, {"tiles": 0}, {"delay_model": "x"}])
    def test_invalid_params(self, bad):
        with pytest.raises(ConfigurationError):
            FtCostParams(**bad)


class TestSweep:
    rows = sweep(DEFAULT, N_RANGE)

    def test_log_below_sqrt(self):
        assert all(r.ratio_log <= r.ratio_sqrt for r in self.rows)

    def test_columns_nondecreasing(self):
        for col in ("ratio_sqrt", "ratio_log"):
            vals = [getattr(r, col) for r in self.rows]
            assert vals == sorted(vals)

    def test_jumps_at_distance_increments(self):
        jumps = 0
        for a, b in zip(self.rows, self.rows[1:]):
            smooth = (1 + delay_factor(b.n, "sqrt", 1)) / (1 + delay_factor(a.n, "sqrt", 1))
            step = b.ratio_sqrt / a.ratio_sqrt
            if b.d_with > a.d_with:
                assert step > smooth * (1 + 1e-3)
                jumps += 1
            else:
                assert step == pytest.approx(smooth, rel=1e-3)
        assert jumps >= 1

    @pytest.mark.parametrize("threshold", sorted(KAPPA_PRESETS))
    def test_presets_cross_thresholds(self, threshold):
        rows = sweep(dataclasses.replace(DEFAULT, kappa=KAPPA_PRESETS[threshold]), N_RANGE)
        for col in ("ratio_sqrt", "ratio_log"):
            vals = [getattr(r, col) for r in rows]
            assert vals[0] < threshold <= vals[-1]

    def test_small_kappa_approaches_delay_free(self):
        floor = relative_time_cost(dataclasses.replace(DEFAULT, delay_model="none"), 16)
        row = sweep(dataclasses.replace(DEFAULT, kappa=1e-9), [16])[0]
        assert row.ratio_sqrt == pytest.approx(floor, rel=1e-6)
        assert row.ratio_log == pytest.approx(floor, rel=1e-6)

    def test_delay_model_none_columns(self):
        rows = sweep(dataclasses.replace(DEFAULT, delay_model="none"), [16, 2**20])
        assert rows[0].ratio_sqrt == rows[1].ratio_log

    def test_infeasible_row_flagged(self):
        rows = sweep(dataclasses.replace(DEFAULT, kappa=1e6, distance_cap=30), [16, 2**20])
        assert rows[-1].flags == "infeasible" and rows[-1].ratio_sqrt is None

    def test_csv(self):
        text = sweep_to_csv(self.rows[:2] + threshold_rows())
        lines = text.splitlines()
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert lines[1].startswith("16,")
        assert lines[-1] == ",10.0,10.0,,,threshold"

    def test_json_has_reports(self):
        import json

        payload = json.loads(sweep_to_json(self.rows[:1]))
        assert payload[0]["reports"]["sqrt"]["with_qdc"]["distance"] == self.rows[0].d_with

    def test_rejects_non_power(self):
        with pytest.raises(ConfigurationError):
            sweep(DEFAULT, [12])
