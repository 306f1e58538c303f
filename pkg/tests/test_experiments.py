import math

import numpy as np
import pytest

from kaon_eraser import (
    Basis,
    DecayEvent,
    DecayMode,
    EventSet,
    ExperimentKind,
    ExperimentSpec,
    GeneratorConfig,
    Outcome,
    PhysicsParams,
    TimeWindow,
    classify_event_lifetime,
    full_table,
    generate,
    misidentification_rates,
    run_experiment,
    sort_passive_events,
    survival_weight,
    visibility,
    write_scan_csv,
)
from kaon_eraser.generator import Side

FAMILIES = ("like", "unlike", "s_ks", "s_kl")


@pytest.fixture(scope="module")
def events_1m(default_params):
    return generate(GeneratorConfig(seed=42, n_pairs=1_000_000), default_params)


@pytest.fixture(scope="module")
def grid_short():
    return tuple(np.round(np.arange(0.0, 8.001, 0.2), 10))


def _pass_stats(result):
    tested = bad = flagged = 0
    for row in result.rows:
        for fam in FAMILIES:
            est = getattr(row, fam)
            if est.flagged:
                flagged += 1
                continue
            tested += 1
            if abs(est.value - est.twin) > 3.0 * max(est.sigma, 1e-12):
                bad += 1
    return tested, bad, flagged


# ---------------------------------------------------------------------------
# classification and misidentification
# ---------------------------------------------------------------------------


def test_window_rule_boundary_is_ks(default_params):
    event = DecayEvent(Side.RIGHT, 2.0 + default_params.lifetime_window, DecayMode.OTHER)
    assert classify_event_lifetime(event, 2.0, default_params) is Outcome.KS
    later = DecayEvent(Side.RIGHT, 2.0 + default_params.lifetime_window + 1e-9, DecayMode.OTHER)
    assert classify_event_lifetime(later, 2.0, default_params) is Outcome.KL


def test_window_rule_needs_survival(default_params):
    event = DecayEvent(Side.RIGHT, 1.0, DecayMode.TWO_PI)
    assert classify_event_lifetime(event, 2.0, default_params) is None


def test_mode_rule(default_params):
    assert (
        classify_event_lifetime(
            DecayEvent(Side.LEFT, 1.0, DecayMode.TWO_PI), 0.0, default_params, method="mode"
        )
        is Outcome.KS
    )
    assert (
        classify_event_lifetime(
            DecayEvent(Side.LEFT, 1.0, DecayMode.THREE_PI), 0.0, default_params, method="mode"
        )
        is Outcome.KL
    )
    assert (
        classify_event_lifetime(
            DecayEvent(Side.LEFT, 1.0, DecayMode.SEMILEPTONIC_PLUS),
            0.0,
            default_params,
            method="mode",
        )
        is None
    )


def test_misidentification_rates(default_params):
    p_kl_as_ks, p_ks_as_kl = misidentification_rates(default_params)
    assert p_kl_as_ks == pytest.approx(1.0 - math.exp(-4.8 / 579.0), rel=1e-12)
    assert p_ks_as_kl == pytest.approx(math.exp(-4.8), rel=1e-12)
    assert p_kl_as_ks < 1e-2 and p_ks_as_kl < 1e-2
    wide = PhysicsParams(lifetime_window=200.0)
    assert misidentification_rates(wide)[1] == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError, match="tau_r0"):
        ExperimentSpec(ExperimentKind.ACTIVE_ACTIVE, -1.0, (0.0, 1.0), 0)
    with pytest.raises(ValueError, match="increasing"):
        ExperimentSpec(ExperimentKind.ACTIVE_ACTIVE, 1.0, (1.0, 0.5), 0)
    with pytest.raises(ValueError, match="nonempty"):
        ExperimentSpec(ExperimentKind.ACTIVE_ACTIVE, 1.0, (), 0)
    with pytest.raises(ValueError, match="event-based"):
        ExperimentSpec(ExperimentKind.PASSIVE_PASSIVE, 1.0, (0.0, 1.0), 0)
    spec = ExperimentSpec("a", 1.0, (0.0, 1.0), 0)
    assert spec.kind is ExperimentKind.ACTIVE_ACTIVE


# ---------------------------------------------------------------------------
# analytic columns
# ---------------------------------------------------------------------------


def test_analytic_fringe_has_visibility_envelope(default_params):
    # unlike-strangeness column oscillates inside the 1/cosh envelope
    grid = tuple(np.round(np.arange(0.0, 26.801, 0.2), 10))
    spec = ExperimentSpec(ExperimentKind.ACTIVE_ACTIVE, 0.0, grid, 0)
    result = run_experiment(spec, default_params)
    for row in result.rows:
        dt = row.tau_l - spec.tau_r0
        expected = 0.5 * (
            1.0 + visibility(dt, default_params) * math.cos(default_params.delta_m * dt)
        )
        assert row.unlike.value == pytest.approx(expected, abs=1e-12)
        assert row.like.value + row.unlike.value == pytest.approx(1.0, abs=1e-12)
        envelope = 0.5 * (1.0 + visibility(dt, default_params))
        assert row.unlike.value <= envelope + 1e-12


def test_partially_active_analytic_only(default_params, grid_short):
    spec = ExperimentSpec(ExperimentKind.PARTIALLY_ACTIVE, 2.0, grid_short, 0)
    result = run_experiment(spec, default_params)
    for row in result.rows:
        for fam in FAMILIES:
            est = getattr(row, fam)
            assert est.value == est.twin
            assert est.sigma == 0.0 and est.n == 0 and not est.flagged
        assert row.counts["strangeness"] == 0


def test_complementarity_per_outcome_pair(default_params):
    for tau_l in (0.0, 1.7, 9.4):
        table = full_table(Basis.STRANGENESS, Basis.STRANGENESS, tau_l, 2.0, default_params)
        for ol in (Outcome.K0, Outcome.K0BAR):
            row_sum = sum(table.p[(ol, o)] for o in (Outcome.K0, Outcome.K0BAR))
            assert row_sum == pytest.approx(0.5, abs=1e-9)
        assert table.total() == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# Monte Carlo columns vs analytic twins
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", list(ExperimentKind))
def test_estimates_match_twins(kind, default_params, events_1m, grid_short):
    spec = ExperimentSpec(
        kind=kind,
        tau_r0=2.0,
        tau_l_grid=grid_short,
        n_pairs=events_1m.n,
        seed=7,
        bin_width_l=0.2,
        bin_width_r=1.0,
    )
    result = run_experiment(spec, default_params, events=events_1m)
    tested, bad, flagged = _pass_stats(result)
    assert tested >= 30
    assert bad / tested <= 0.05


def test_threads_do_not_change_scan(default_params, events_1m, grid_short):
    spec = ExperimentSpec(
        kind=ExperimentKind.PASSIVE_METER,
        tau_r0=2.0,
        tau_l_grid=grid_short[:11],
        n_pairs=events_1m.n,
        seed=5,
        bin_width_r=1.0,
    )
    results = [
        run_experiment(spec, default_params, events=events_1m, threads=t) for t in (1, 4)
    ]
    for row_a, row_b in zip(results[0].rows, results[1].rows):
        for fam in FAMILIES:
            assert getattr(row_a, fam) == getattr(row_b, fam)


def test_family_sums_consistent(default_params, events_1m, grid_short):
    # like+unlike estimates a total of 1 (ratio) and the passive absolute
    # families sum to their analytic totals within errors
    spec = ExperimentSpec(
        kind=ExperimentKind.PASSIVE_PASSIVE,
        tau_r0=2.0,
        tau_l_grid=grid_short,
        n_pairs=events_1m.n,
        seed=7,
        bin_width_l=0.2,
        bin_width_r=1.0,
    )
    result = run_experiment(spec, default_params, events=events_1m)
    for row in result.rows:
        if row.s_ks.flagged or row.s_kl.flagged:
            continue
        total = row.s_ks.value + row.s_kl.value
        sigma = math.hypot(row.s_ks.sigma, row.s_kl.sigma)
        assert abs(total - 1.0) <= 4.0 * sigma


def test_partially_active_wave_and_particle_streams(default_params, events_1m, grid_short):
    spec = ExperimentSpec(
        kind=ExperimentKind.PARTIALLY_ACTIVE,
        tau_r0=2.0,
        tau_l_grid=grid_short,
        n_pairs=events_1m.n,
        seed=11,
        bin_width_r=1.0,
    )
    result = run_experiment(spec, default_params, events=events_1m)
    # both streams populated, plus the separate early semileptonic tally
    for row in result.rows:
        assert row.counts["strangeness"] > 0
        assert row.counts["lifetime"] > 0
        assert row.counts["early_strangeness"] >= 0
    assert any(row.counts["early_strangeness"] > 0 for row in result.rows)


def test_fringe_reconstruction_from_passive_sorting(rich_params):
    # at a feasible width ratio the fully passive experiment reconstructs
    # the oscillation fringes from joint semileptonic counts alone
    events = generate(GeneratorConfig(seed=21, n_pairs=400_000), rich_params)
    grid = tuple(np.round(np.arange(0.0, 8.01, 0.4), 10))
    spec = ExperimentSpec(
        kind=ExperimentKind.PASSIVE_PASSIVE,
        tau_r0=2.0,
        tau_l_grid=grid,
        n_pairs=events.n,
        seed=3,
        bin_width_l=0.4,
        bin_width_r=0.8,
    )
    result = run_experiment(spec, rich_params, events=events)
    unlike = [row.unlike for row in result.rows]
    assert all(not est.flagged for est in unlike)
    values = np.array([est.value for est in unlike])
    twins = np.array([est.twin for est in unlike])
    sigmas = np.array([est.sigma for est in unlike])
    assert np.mean(np.abs(values - twins) <= 3.0 * sigmas) >= 0.9
    # the fringe actually swings: the analytic twin range is substantial
    # and the estimates track it
    assert twins.max() - twins.min() > 0.3
    assert values.max() - values.min() > 0.25
    correlation = np.corrcoef(values, twins)[0, 1]
    assert correlation > 0.9


def test_delayed_choice_subsets_fit_same_form(rich_params):
    events = generate(GeneratorConfig(seed=22, n_pairs=400_000), rich_params)
    grid = tuple(np.round(np.arange(0.0, 8.01, 0.4), 10))
    spec = ExperimentSpec(
        kind=ExperimentKind.PASSIVE_PASSIVE,
        tau_r0=4.0,
        tau_l_grid=grid,
        n_pairs=events.n,
        seed=4,
        bin_width_l=0.4,
        bin_width_r=0.8,
    )
    result = run_experiment(spec, rich_params, events=events)
    for subset in (
        [r for r in result.rows if r.tau_l < spec.tau_r0],
        [r for r in result.rows if r.tau_l > spec.tau_r0],
    ):
        assert len(subset) >= 5
        tested = bad = 0
        for row in subset:
            for fam in FAMILIES:
                est = getattr(row, fam)
                if est.flagged:
                    continue
                tested += 1
                if abs(est.value - est.twin) > 3.0 * max(est.sigma, 1e-12):
                    bad += 1
        assert tested >= 10
        assert bad / tested <= 0.05


# ---------------------------------------------------------------------------
# passive sorting machinery
# ---------------------------------------------------------------------------


def test_sort_passive_synthetic_factorized_oracle(rich_params):
    # feed records drawn from a hand-built factorized density (independent
    # exponential times, independent mode draws) and check that the
    # estimator returns exactly synthetic-density / (extinction * widths)
    rng = np.random.default_rng(99)
    n = 400_000
    rate_l, rate_r = 1.0, 0.25
    p_left = {2: 0.5, 3: 0.5}
    p_right = {0: 0.7, 1: 0.3}
    tau_l = rng.exponential(1.0 / rate_l, size=n)
    tau_r = rng.exponential(1.0 / rate_r, size=n)
    mode_l = rng.choice(list(p_left), p=list(p_left.values()), size=n).astype(np.int8)
    mode_r = rng.choice(list(p_right), p=list(p_right.values()), size=n).astype(np.int8)
    events = EventSet(
        tau_l=tau_l, mode_l=mode_l, tau_r=tau_r, mode_r=mode_r,
        seed=99, tau_max=50.0, params_digest="synthetic",
    )
    grid = (1.0, 2.0)
    tau_r0, bw = 1.5, 0.5
    from kaon_eraser.decay import TransitionAmplitudes

    amps = TransitionAmplitudes.from_params(rich_params)
    tables = sort_passive_events(
        events, grid, bw, tau_r0, rich_params, kind_r=Basis.LIFETIME, min_count=5
    )
    for tau_l0, table in zip(grid, tables):
        w_l = TimeWindow.centered(tau_l0, bw)
        w_r = TimeWindow.centered(tau_r0, bw)
        d = survival_weight(w_l, w_r, rich_params)
        prob_l_bin = math.exp(-rate_l * w_l.lo) - math.exp(-rate_l * w_l.hi)
        prob_r_bin = math.exp(-rate_r * w_r.lo) - math.exp(-rate_r * w_r.hi)
        for (ol, outcome_r), value in table.p.items():
            mode_left = {Outcome.K0: 2, Outcome.K0BAR: 3}[ol]
            mode_right = {Outcome.KS: 0, Outcome.KL: 1}[outcome_r]
            joint = p_left[mode_left] * prob_l_bin * p_right[mode_right] * prob_r_bin
            from kaon_eraser.experiments import _MODE_FOR_OUTCOME

            width_l = amps.identified_width(_MODE_FOR_OUTCOME[ol])
            width_r = amps.identified_width(_MODE_FOR_OUTCOME[outcome_r])
            expected = joint / (d * width_l * width_r)
            sigma = table.sigma[(ol, outcome_r)]
            assert abs(value - expected) <= 3.0 * max(sigma, 1e-12)


def test_sort_passive_rejects_overlapping_bins(default_params, events_1m):
    with pytest.raises(ValueError, match="overlap"):
        sort_passive_events(events_1m, [1.0, 1.1], 0.5, 1.0, default_params)


def test_sort_passive_empty_bin_flagged(default_params, events_1m):
    tables = sort_passive_events(
        events_1m, [2_000.0], 0.2, 2_000.0, default_params, kind_r=Basis.STRANGENESS
    )
    table = tables[0]
    assert table.flagged
    assert table.n_events == 0
    assert all(v == 0.0 for v in table.p.values())
    assert all(s == 0.0 for s in table.sigma.values())


def test_sort_passive_error_scaling(default_params):
    # doubling the sample shrinks standard errors by sqrt(2)
    sigmas = {}
    for n in (500_000, 1_000_000):
        events = generate(GeneratorConfig(seed=31, n_pairs=n), default_params)
        tables = sort_passive_events(
            events,
            np.arange(0.5, 6.0, 0.5),
            0.5,
            0.5,
            default_params,
            kind_r=Basis.LIFETIME,
            bin_width_r=1.0,
            min_count=1,
        )
        pooled = [
            t.sigma[(Outcome.K0, Outcome.KS)]
            for t in tables
            if t.counts[(Outcome.K0, Outcome.KS)] >= 25
        ]
        sigmas[n] = np.mean(pooled)
    ratio = sigmas[500_000] / sigmas[1_000_000]
    assert ratio == pytest.approx(math.sqrt(2.0), rel=0.1)


# ---------------------------------------------------------------------------
# cross-protocol agreement (statistically rich configuration)
# ---------------------------------------------------------------------------


def test_protocols_agree_pairwise(rich_params):
    grid = tuple(np.round(np.arange(0.0, 6.01, 0.4), 10))
    results = {}
    for offset, kind in enumerate(ExperimentKind):
        events = generate(GeneratorConfig(seed=50 + offset, n_pairs=300_000), rich_params)
        spec = ExperimentSpec(
            kind=kind,
            tau_r0=2.0,
            tau_l_grid=grid,
            n_pairs=events.n,
            seed=60 + offset,
            bin_width_l=0.4,
            bin_width_r=0.8,
        )
        results[kind] = run_experiment(spec, rich_params, events=events)
    kinds = list(ExperimentKind)
    for i, kind_a in enumerate(kinds):
        for kind_b in kinds[i + 1 :]:
            compared = bad = 0
            for row_a, row_b in zip(results[kind_a].rows, results[kind_b].rows):
                for fam in FAMILIES:
                    est_a, est_b = getattr(row_a, fam), getattr(row_b, fam)
                    if est_a.flagged or est_b.flagged:
                        continue
                    compared += 1
                    residual = (est_a.value - est_a.twin) - (est_b.value - est_b.twin)
                    sigma = math.hypot(est_a.sigma, est_b.sigma)
                    if abs(residual) > 3.0 * max(sigma, 1e-12):
                        bad += 1
            assert compared >= 10, f"{kind_a} vs {kind_b}: too few comparable bins"
            assert bad / compared <= 0.05, f"{kind_a} vs {kind_b}"


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_scan_csv_deterministic(tmp_path, default_params, grid_short):
    spec = ExperimentSpec(
        kind=ExperimentKind.PASSIVE_PASSIVE,
        tau_r0=1.0,
        tau_l_grid=grid_short[:6],
        n_pairs=20_000,
        seed=14,
        bin_width_r=1.0,
    )
    payloads = []
    for threads in (1, 2, 8):
        result = run_experiment(spec, default_params, threads=threads)
        path = tmp_path / f"scan_{threads}.csv"
        write_scan_csv(path, result, "test")
        payloads.append(path.read_bytes())
    assert payloads[0] == payloads[1] == payloads[2]


def test_scan_csv_layout(tmp_path, default_params, grid_short):
    spec = ExperimentSpec(ExperimentKind.ACTIVE_ACTIVE, 0.5, grid_short[:4], 0)
    result = run_experiment(spec, default_params)
    path = tmp_path / "scan.csv"
    write_scan_csv(path, result, "test")
    lines = path.read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    assert any("params_digest" in ln for ln in comments)
    header = next(ln for ln in lines if not ln.startswith("#"))
    assert header.split(",")[0] == "tau_l"
    data = [ln for ln in lines if not ln.startswith("#")][1:]
    assert len(data) == 4
