"""Fusion statistic and the Monte Carlo estimators.

Oracles: direct Gaussian-mixture arithmetic via scipy.stats.norm, exact
solver values for the lifetime estimator, and distribution-free limits
(useless channels, perfectly separating channels).
"""

import dataclasses
import json
import math

import numpy as np
import pytest
from scipy import stats

from tests.conftest import tiny_config
from wsnpower import (
    ParameterError,
    ScopeError,
    build_network,
    fusion_llr,
    run_episodes,
    run_lifetime_value,
    run_trajectory,
    sweep,
    write_sweep_csv,
)
from wsnpower.mdp_core import (
    GlobalState,
    LocalState,
    local_state_index,
    random_policy,
    solve_suboptimal,
)
from wsnpower.monte_carlo import SWEEP_COLUMNS, McEstimate


def mixture_llr_reference(y, mu, p_f, p_d, var):
    """The statistic spelled out with scipy densities."""
    sigma = math.sqrt(var)
    total = 0.0
    for yk, muk, pf, pd in zip(y, mu, p_f, p_d):
        num = pd * stats.norm.pdf(yk, muk, sigma) + (1 - pd) * stats.norm.pdf(yk, 0, sigma)
        den = pf * stats.norm.pdf(yk, muk, sigma) + (1 - pf) * stats.norm.pdf(yk, 0, sigma)
        total += math.log(num / den)
    return total


class TestFusionLlr:
    def test_midpoint_is_exactly_neutral(self):
        # At y = mu/2 both mixture components have equal density, so the
        # weights cancel and the statistic is identically zero.
        assert fusion_llr([1.0], [1.0], [2.0], [0.4479], [0.9], 1.0) == 0.0

    def test_generic_point_matches_density_arithmetic(self):
        y, gains, amps = [1.5, -0.3], [1.0, 0.8], [2.0, 1.1]
        p_f, p_d = [0.4479, 0.3], [0.9, 0.8]
        mu = [g * a for g, a in zip(gains, amps)]
        got = fusion_llr(y, gains, amps, p_f, p_d, 1.0)
        assert got == pytest.approx(mixture_llr_reference(y, mu, p_f, p_d, 1.0), rel=1e-12)

    def test_silent_sensor_contributes_exactly_zero(self):
        base = fusion_llr([1.5], [1.0], [2.0], [0.4], [0.9], 1.0)
        padded = fusion_llr([1.5, 7.7], [1.0, 0.0], [2.0, 3.0], [0.4, 0.4], [0.9, 0.9], 1.0)
        assert padded == base
        assert fusion_llr([3.0], [1.0], [0.0], [0.4], [0.9], 1.0) == 0.0

    def test_additive_across_sensors(self):
        a = fusion_llr([1.5], [1.0], [2.0], [0.4], [0.9], 1.0)
        b = fusion_llr([-0.3], [0.8], [1.1], [0.3], [0.8], 1.0)
        both = fusion_llr([1.5, -0.3], [1.0, 0.8], [2.0, 1.1], [0.4, 0.3], [0.9, 0.8], 1.0)
        assert both == pytest.approx(a + b, rel=1e-12)

    def test_degenerate_rates_large_statistic(self):
        # p_f = 0, p_d = 1: the term reduces to the Gaussian log-ratio itself.
        got = fusion_llr([2.0], [1.0], [2.0], [0.0], [1.0], 1.0)
        assert got == pytest.approx((2.0 * 2.0 - 2.0) / 1.0, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            fusion_llr([1.0, 2.0], [1.0], [1.0], [0.4], [0.9], 1.0)


@pytest.fixture(scope="module")
def solved_tiny():
    net = build_network(tiny_config({"mc": {"runs": 2000}}))
    rep = solve_suboptimal(net)
    return net, rep.policies


class TestRunEpisodes:
    def test_deterministic_given_seed(self, solved_tiny):
        net, pols = solved_tiny
        a = run_episodes(net, pols, runs=500, seed=42)
        b = run_episodes(net, pols, runs=500, seed=42)
        c = run_episodes(net, pols, runs=500, seed=43)
        assert a == b
        assert a != c

    def test_estimate_fields(self, solved_tiny):
        net, pols = solved_tiny
        est = run_episodes(net, pols, runs=800, seed=1)
        assert est.runs == 800
        assert 0.0 <= est.p_e <= 1.0
        assert est.p_e_se > 0.0
        assert est.avg_j >= 2.0  # the silence floor of the divergence
        assert est.violations == 0  # slack budget, validated policy
        assert est.avg_power_mw <= net.sensors[0].battery.cell_power_mw * net.capacity

    def test_se_shrinks_with_run_count(self, solved_tiny):
        net, pols = solved_tiny
        small = run_episodes(net, pols, runs=2000, seed=7)
        large = run_episodes(net, pols, runs=8000, seed=7)
        assert large.p_e_se == pytest.approx(small.p_e_se / 2.0, rel=0.2)

    def test_useless_channel_decides_by_prior(self):
        # Noise variance far above any received power: the statistic carries
        # no information and the error rate sits at the smaller prior.
        net = build_network(tiny_config({"network": {"noise_var_mw": 1e6}}))
        pols = solve_suboptimal(net).policies
        est = run_episodes(net, pols, runs=4000, seed=11)
        assert est.p_e == pytest.approx(0.5, abs=0.03)

    def test_quantized_fusion_close_to_genie(self, solved_tiny):
        net, pols = solved_tiny
        genie = run_episodes(net, pols, runs=4000, seed=5)
        quant = run_episodes(net, pols, runs=4000, seed=5, fusion="quantized")
        # Reconstruction loses information: never materially better.
        assert quant.p_e >= genie.p_e - 2.0 * (genie.p_e_se + quant.p_e_se)

    def test_validation(self, solved_tiny):
        net, pols = solved_tiny
        with pytest.raises(ParameterError):
            run_episodes(net, pols, runs=0, seed=1)
        with pytest.raises(ParameterError):
            run_episodes(net, pols, runs=10, seed=1, fusion="psychic")

    def test_mismatched_priors_rejected(self):
        net = build_network(tiny_config({"network": {"n": 2}}))
        skewed = dataclasses.replace(
            net.sensors[1],
            sensing=dataclasses.replace(net.sensors[1].sensing, prior_null=0.6, prior_alt=0.4),
        )
        lopsided = dataclasses.replace(net, sensors=(net.sensors[0], skewed))
        pols = solve_suboptimal(net).policies
        with pytest.raises(ScopeError):
            run_episodes(lopsided, pols, runs=10, seed=1)


class TestRunTrajectory:
    def test_causality_invariants(self, solved_tiny):
        net, pols = solved_tiny
        tr = run_trajectory(net, pols, slots=500, seed=2, chains=4)
        assert tr.battery.shape == (500, 4, 1)
        assert (tr.spent_cells <= tr.battery).all()
        assert (tr.spent_cells >= 0).all()
        assert (tr.battery >= 0).all() and (tr.battery <= 2).all()
        assert (tr.level_now >= 1).all() and (tr.level_now <= 2).all()
        assert (tr.harvest_now >= 1).all() and (tr.harvest_now <= 2).all()
        assert ((tr.transmitted == 0) | (tr.transmitted == 1)).all()
        # Censored slots spend nothing; transmitting slots spend the
        # prescription.
        np.testing.assert_array_equal(tr.spent_cells, tr.transmitted * tr.prescribed_cells)

    def test_battery_recursion_holds_slotwise(self, solved_tiny):
        net, pols = solved_tiny
        tr = run_trajectory(net, pols, slots=300, seed=9, chains=2)
        incomes = np.asarray(net.sensors[0].harvest.levels)
        expected = np.minimum(
            tr.battery[:-1] - tr.spent_cells[:-1] + incomes[tr.harvest_now[:-1] - 1], 2
        )
        np.testing.assert_array_equal(tr.battery[1:], expected)

    def test_jsonl_dump(self, tmp_path, solved_tiny):
        net, pols = solved_tiny
        tr = run_trajectory(net, pols, slots=40, seed=4, chains=2)
        path = tmp_path / "trace.jsonl"
        tr.write_jsonl(path, chain=1)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 40
        first = json.loads(lines[0])
        assert first["slot"] == 0
        assert set(first) >= {"battery", "prescribed_cells", "decision", "statistic"}
        assert first["battery"] == tr.battery[0, 1].tolist()

    def test_decision_bookkeeping(self, solved_tiny):
        net, pols = solved_tiny
        tr = run_trajectory(net, pols, slots=200, seed=6, chains=3)
        np.testing.assert_array_equal(
            tr.correct, tr.decision == (tr.hypothesis == 1)
        )

    def test_deterministic_censoring_structure(self):
        # Threshold-mode censoring at 40 dB observation SNR underflows the
        # false-alarm rate to exactly 0 and pins detection at exactly 1, and
        # 5 J cells make the received mixtures nearly disjoint. Decisions
        # then have a sharp structure: no transmissions under the null,
        # prescribed-silence slots always decide the null (the statistic is
        # identically zero against an even-prior threshold), and active
        # slots err only on deep fades.
        cfg = tiny_config(
            {
                "network": {"p_tot_mw": 50_000.0},
                "sensing": {"snr_s_db": 40.0, "theta": 0.0},
                "energy": {"cell_energy_J": 5.0},
            }
        )
        net = build_network(cfg)
        assert net.sensors[0].censor.p_f == 0.0
        assert net.sensors[0].censor.p_d == 1.0
        pols = solve_suboptimal(net).policies
        tr = run_trajectory(net, pols, slots=400, seed=21, chains=8)
        assert (tr.hypothesis[tr.transmitted[:, :, 0]] == 1).all()
        silent = tr.prescribed_cells[:, :, 0] == 0
        assert (tr.decision[silent] == 0).all()
        active = ~silent
        assert active.sum() > 500
        assert tr.correct[active].mean() > 0.99


class TestRunLifetimeValue:
    def test_matches_exact_value(self):
        # The geometric-lifetime tally estimates the same discounted value
        # the solver computes in closed form.
        net = build_network(tiny_config())
        rep = solve_suboptimal(net)
        anchor = (2, 1, 1)
        idx = local_state_index(LocalState(b=2, l=1, m=1), 2, 2)
        exact = float(rep.values[0][idx])
        mean, se = run_lifetime_value(net, rep.policies, anchor, runs=4000, seed=12)
        assert se > 0.0
        assert abs(mean - exact) < 3.0 * se

    def test_anchor_forms_agree(self):
        net = build_network(tiny_config({"network": {"n": 2}}))
        pols = solve_suboptimal(net).policies
        shared = run_lifetime_value(net, pols, (2, 1, 1), runs=300, seed=8)
        listed = run_lifetime_value(net, pols, [(2, 1, 1), (2, 1, 1)], runs=300, seed=8)
        state = GlobalState(locals=(LocalState(2, 1, 1), LocalState(2, 1, 1)))
        boxed = run_lifetime_value(net, pols, state, runs=300, seed=8)
        assert shared == listed == boxed

    def test_global_policy_accepted(self):
        net = build_network(tiny_config())
        pol = random_policy(net, np.random.default_rng(1))
        mean, se = run_lifetime_value(net, pol, (1, 1, 1), runs=200, seed=3)
        assert math.isfinite(mean) and se >= 0.0

    def test_validation(self):
        net = build_network(tiny_config())
        pols = solve_suboptimal(net).policies
        with pytest.raises(ParameterError):
            run_lifetime_value(net, pols, (1, 1, 1), runs=0, seed=1)
        with pytest.raises(ScopeError):
            run_lifetime_value(net, pols, [(1, 1, 1), (1, 1, 1)], runs=10, seed=1)


def _double(value, index):
    return {"doubled": 2 * value, "index": index}


def _fail_on_three(value, index):
    if value == 3:
        raise ValueError("bad point")
    return {"doubled": 2 * value}


class TestSweep:
    def test_serial_rows(self):
        rows = sweep(_double, "knob", [1, 2, 3])
        assert [r["value"] for r in rows] == [1, 2, 3]
        assert [r["doubled"] for r in rows] == [2, 4, 6]
        assert [r["index"] for r in rows] == [0, 1, 2]
        assert all(r["axis"] == "knob" for r in rows)

    def test_parallel_matches_serial(self):
        serial = sweep(_double, "knob", [1, 2, 3, 4])
        parallel = sweep(_double, "knob", [1, 2, 3, 4], workers=2)
        assert serial == parallel

    def test_errors_name_the_failing_value(self):
        with pytest.raises(ValueError, match="knob=3"):
            sweep(_fail_on_three, "knob", [1, 3])

    def test_csv_layout(self, tmp_path):
        est = McEstimate(
            p_e=0.25,
            p_e_se=0.01,
            avg_j=2.5,
            avg_j_se=0.02,
            avg_power_mw=1.5,
            violations=0,
            runs=1000,
        )
        row = {"axis": "p_tot_mw", "value": 5.0}
        row.update(est.as_row())
        row["seed"] = 9
        path = tmp_path / "sweep.csv"
        write_sweep_csv(path, [row])
        lines = path.read_text().strip().split("\n")
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert lines[1].startswith("p_tot_mw,5,0.25,0.01,")
