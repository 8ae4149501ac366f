import numpy as np
import pytest

from aoisim.energy import (
    EnergyConfig,
    EnergyState,
    HarvestTrace,
    TraceError,
    conservation_residual,
    debit,
    harvest,
    load_trace,
    synth_trace,
    tx_cost,
)

CFG = EnergyConfig().validate()


def make_trace(currents, cfg=CFG):
    return HarvestTrace(currents=np.asarray(currents, dtype=float), step_seconds=cfg.step_seconds)


class TestCapacity:
    def test_four_farads_is_18_joules(self):
        assert EnergyConfig(capacitance_farads=4.0).capacity_j == pytest.approx(18.0)

    def test_initial_charge_fraction(self):
        state = EnergyState.initial(EnergyConfig(capacitance_farads=4.0, initial_charge_frac=0.5))
        assert state.stored_j == pytest.approx(9.0)


class TestHarvest:
    def test_single_step_gain(self):
        # 3 V * 54 uA * 120 s = 19.44 mJ
        state = EnergyState(stored_j=0.0)
        harvest(state, make_trace([54e-6]), 1, CFG)
        assert state.stored_j == pytest.approx(3.0 * 54e-6 * 120.0)

    def test_clamped_at_capacity(self):
        state = EnergyState(stored_j=CFG.capacity_j)
        harvest(state, make_trace([1.0]), 1, CFG)
        assert state.stored_j == CFG.capacity_j

    def test_zero_current_is_noop(self):
        state = EnergyState(stored_j=1.0)
        harvest(state, make_trace([0.0]), 1, CFG)
        assert state.stored_j == 1.0

    def test_out_of_trace_step(self):
        with pytest.raises(IndexError):
            harvest(EnergyState(stored_j=0.0), make_trace([1e-5]), 2, CFG)


class TestDebit:
    def test_successful_debit(self):
        state = EnergyState(stored_j=0.1)
        assert debit(state, 0.035)
        assert state.stored_j == pytest.approx(0.065)

    def test_insufficient_leaves_state_unchanged(self):
        state = EnergyState(stored_j=0.030)
        assert not debit(state, 0.035)
        assert state.stored_j == 0.030
        assert state.total_out_j == 0.0

    def test_negative_amount_rejected(self):
        with pytest.raises(ValueError):
            debit(EnergyState(stored_j=1.0), -0.1)


class TestTxCost:
    def test_endpoints_and_interpolation(self):
        assert tx_cost(1, CFG) == pytest.approx(0.035)
        assert tx_cost(4, CFG) == pytest.approx(0.100)
        assert tx_cost(2, CFG) == pytest.approx(0.035 + 0.065 / 3)  # 56.67 mJ

    def test_monotone_and_bounded(self):
        costs = [tx_cost(m, CFG) for m in range(1, 5)]
        assert costs == sorted(costs)
        assert all(0.035 <= c <= 0.100 for c in costs)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            tx_cost(0, CFG)
        with pytest.raises(ValueError):
            tx_cost(5, CFG)


class TestSynthTrace:
    def test_daily_energy_hits_profile_target(self):
        for profile, target in [("low", 6.0), ("medium", 14.0), ("high", 20.0)]:
            trace = synth_trace(profile, days=3, seed=11)
            for day_j in trace.daily_joules(CFG.supply_volts):
                assert target * 0.9 <= day_j <= target * 1.1

    def test_night_steps_are_dark(self):
        trace = synth_trace("medium", days=1, seed=0)
        per_day = CFG.steps_per_day
        daylight = int(12 * 3600 / CFG.step_seconds)
        sunrise = (per_day - daylight) // 2
        assert np.all(trace.currents[:sunrise] == 0.0)
        assert np.all(trace.currents[sunrise + daylight :] == 0.0)

    def test_double_days_double_energy(self):
        one = sum(synth_trace("high", days=1, seed=5).daily_joules())
        two = sum(synth_trace("high", days=2, seed=5).daily_joules())
        assert two == pytest.approx(2 * one, rel=0.01)

    def test_deterministic_per_seed(self):
        a = synth_trace("low", days=2, seed=9)
        b = synth_trace("low", days=2, seed=9)
        c = synth_trace("low", days=2, seed=10)
        assert np.array_equal(a.currents, b.currents)
        assert not np.array_equal(a.currents, c.currents)

    def test_constant_current_for_14j_per_day(self):
        # 14 J / (3 V * 86400 s) = 54.0 uA
        amps = 14.0 / (3.0 * 86400.0)
        trace = make_trace([amps] * CFG.steps_per_day)
        assert trace.daily_joules()[0] == pytest.approx(14.0)
        assert amps == pytest.approx(54.0e-6, rel=1e-2)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            synth_trace("solar", days=1, seed=0)
        with pytest.raises(ValueError):
            synth_trace("low", days=0, seed=0)


class TestLoadTrace:
    def test_current_rows_ingested_verbatim(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("step,current_amps\n0,0\n1,1e-4\n2,5e-5\n")
        trace = load_trace(p, CFG)
        assert trace.currents.tolist() == [0.0, 1e-4, 5e-5]

    def test_lux_conversion(self, tmp_path):
        p = tmp_path / "lux.csv"
        p.write_text("timestamp,lux\n2024-01-01T00:00,100\n2024-01-01T00:02,250\n")
        trace = load_trace(p, CFG, lux_coeff=1e-6)
        assert trace.currents.tolist() == pytest.approx([1e-4, 2.5e-4])

    def test_lux_without_coefficient(self, tmp_path):
        p = tmp_path / "lux.csv"
        p.write_text("timestamp,lux\nx,1\n")
        with pytest.raises(TraceError, match="coefficient"):
            load_trace(p, CFG)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(TraceError, match="empty"):
            load_trace(p, CFG)

    def test_header_only(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("step,current_amps\n")
        with pytest.raises(TraceError, match="no data"):
            load_trace(p, CFG)

    def test_missing_file(self, tmp_path):
        with pytest.raises(TraceError, match="not found"):
            load_trace(tmp_path / "nope.csv", CFG)

    def test_malformed_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("step,current_amps\n0,abc\n")
        with pytest.raises(TraceError, match="non-numeric"):
            load_trace(p, CFG)

    def test_negative_current(self, tmp_path):
        p = tmp_path / "neg.csv"
        p.write_text("step,current_amps\n0,-1e-5\n")
        with pytest.raises(TraceError, match="negative"):
            load_trace(p, CFG)

    def test_unknown_header(self, tmp_path):
        p = tmp_path / "odd.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(TraceError, match="header"):
            load_trace(p, CFG)


class TestConservationFuzz:
    def test_random_op_sequences_hold_invariants(self):
        # Fuzz harvest/debit interleavings; bounds and the ledger identity must
        # hold after every operation.
        for seed in range(20):
            rng = np.random.default_rng(seed)
            cfg = EnergyConfig(capacitance_farads=float(rng.uniform(1, 10))).validate()
            trace = make_trace(rng.uniform(0, 3e-4, 500), cfg)
            state = EnergyState.initial(cfg)
            initial = state.stored_j
            for t in range(1, 501):
                harvest(state, trace, t, cfg)
                if rng.random() < 0.7:
                    debit(state, float(rng.uniform(0, 0.2)))
                assert 0.0 <= state.stored_j <= cfg.capacity_j
            assert conservation_residual(state, initial) < 1e-12
