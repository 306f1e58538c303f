"""The four quantum-eraser measurement protocols for entangled kaon pairs.

The left-moving kaon is the object: it is scanned in proper time tau_l,
looking for strangeness oscillation fringes.  The right-moving kaon is the
meter, handled at a fixed time tau_r0.  Four protocols differ in who (or
what) decides which observable the meter reveals:

  a  active-active:      strangeness detectors in both beams, or lifetime
                         observed on the right by free propagation; pairs
                         conditioned on survival to (tau_l, tau_r0).
  b  partially active:   detector fixed at tau_r0 on the right, but right
                         decays before tau_r0 are recorded: nonleptonic
                         early decays yield lifetime information (by
                         mode), semileptonic early decays measure
                         strangeness instead and are tallied separately.
  c  passive meter:      the right kaon is classified purely by its decay
                         mode near tau_r0 (semileptonic: strangeness;
                         nonleptonic: lifetime); the left side is still an
                         active measurement on survivors.
  d  passive-passive:    nothing is projected; joint decay records are
                         counted and sorted, and probabilities estimated
                         by dividing out the beam-extinction weight and
                         identified partial widths over the time bins.

All estimators are unbiased for the survival-weighted window averages of
the same closed-form probabilities (their "analytic twins"), so the four
protocols can be compared bin by bin; their agreement, irrespective of the
time ordering of the two measurements, is the point of the exercise.

Estimates come with standard errors (binomial for count ratios, Poisson
for width-scaled counts) and a low-statistics flag instead of silent
dropping.  Active projections are simulated by Born-rule draws from the
evolved pair state (amplitude path), never from the closed forms used as
twins.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .decay import DecayMode, TransitionAmplitudes
from .generator import DecayEvent, EventSet, GeneratorConfig, generate
from .kaon import Basis, Outcome
from .pair import evolve_pair, initial_state, normalize_surviving, project_pair
from .params import PhysicsParams
from .probabilities import (
    JointProbabilityTable,
    Source,
    TimeWindow,
    survival_weight,
    window_table,
)

_CODE_2PI, _CODE_3PI, _CODE_SLP, _CODE_SLM, _CODE_OTHER = range(5)

_S_CELLS = (
    (Outcome.K0, Outcome.K0),
    (Outcome.K0, Outcome.K0BAR),
    (Outcome.K0BAR, Outcome.K0),
    (Outcome.K0BAR, Outcome.K0BAR),
)
_MIXED_CELLS = (
    (Outcome.K0, Outcome.KS),
    (Outcome.K0, Outcome.KL),
    (Outcome.K0BAR, Outcome.KS),
    (Outcome.K0BAR, Outcome.KL),
)


class ExperimentKind(Enum):
    ACTIVE_ACTIVE = "a"
    PARTIALLY_ACTIVE = "b"
    PASSIVE_METER = "c"
    PASSIVE_PASSIVE = "d"


@dataclasses.dataclass(frozen=True)
class ExperimentSpec:
    """Configuration of one eraser scan.

    ``tau_l_grid`` is the ordered list of object measurement times;
    ``tau_r0`` the fixed meter time; ``n_pairs`` the Monte Carlo sample
    size (0 means analytic columns only, allowed for kinds a and b);
    ``bin_width_l``/``bin_width_r`` the event-sorting bin widths on the
    object/meter time axis; rows backed by fewer than ``min_count`` events
    are flagged as low-statistics.
    """

    kind: ExperimentKind
    tau_r0: float
    tau_l_grid: tuple[float, ...]
    n_pairs: int
    seed: int = 0
    bin_width_l: float = 0.2
    bin_width_r: float = 0.2
    min_count: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "tau_l_grid", tuple(float(t) for t in self.tau_l_grid))
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        if self.tau_r0 < 0:
            raise ValueError(f"tau_r0 must be >= 0, got {self.tau_r0}")
        grid = self.tau_l_grid
        if not grid:
            raise ValueError("tau_l_grid must be nonempty")
        if grid[0] < 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("tau_l_grid must be strictly increasing and nonnegative")
        if self.n_pairs < 0:
            raise ValueError("n_pairs must be >= 0")
        if self.n_pairs == 0 and self.kind in (
            ExperimentKind.PASSIVE_METER,
            ExperimentKind.PASSIVE_PASSIVE,
        ):
            raise ValueError(f"kind {self.kind.value!r} is event-based; n_pairs must be >= 1")
        if self.bin_width_l <= 0 or self.bin_width_r <= 0:
            raise ValueError("bin widths must be > 0")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")


@dataclasses.dataclass(frozen=True)
class Estimate:
    """One probability estimate with its exact analytic twin."""

    value: float
    sigma: float
    twin: float
    n: int
    flagged: bool


@dataclasses.dataclass(frozen=True)
class ScanRow:
    """One grid point of a scan.

    ``counts`` are the per-row classification tallies (events sorted as
    strangeness-measured, lifetime-measured, discarded; the partially
    active protocol additionally tallies early semileptonic decays, which
    measure strangeness at an uncontrolled time and feed no column).  The
    probability columns carry their own backing counts in ``Estimate.n``.
    """

    tau_l: float
    like: Estimate
    unlike: Estimate
    s_ks: Estimate
    s_kl: Estimate
    counts: dict[str, int]


@dataclasses.dataclass(frozen=True)
class ScanResult:
    spec: ExperimentSpec
    params: PhysicsParams
    rows: tuple[ScanRow, ...]

    def column(self, name: str) -> list[Estimate]:
        return [getattr(row, name) for row in self.rows]


# --------------------------------------------------------------------------
# Classification helpers
# --------------------------------------------------------------------------


def misidentification_rates(params: PhysicsParams) -> tuple[float, float]:
    """(P(K_L tagged K_S), P(K_S tagged K_L)) for the decay-time window rule.

    A kaon observed at ``t`` is called K_S if it decays within
    ``lifetime_window`` afterwards, K_L otherwise.  A true K_L decays that
    early with probability 1 - exp(-gamma_l * window); a true K_S outlives
    the window with probability exp(-gamma_s * window).
    """
    w = params.lifetime_window
    p_kl_as_ks = -np.expm1(-params.gamma_l * w)
    p_ks_as_kl = np.exp(-params.gamma_s * w)
    return float(p_kl_as_ks), float(p_ks_as_kl)


def classify_event_lifetime(
    event: DecayEvent,
    measurement_time: float,
    params: PhysicsParams,
    method: str = "window",
) -> Optional[Outcome]:
    """Lifetime identification of a single decay record.

    ``method="window"``: active-style rule anchored at ``measurement_time``;
    decay at or before measurement_time + lifetime_window means K_S (closed
    upper boundary), later means K_L.  Decays before the measurement time
    are unclassifiable (the kaon never reached the measurement point).

    ``method="mode"``: passive rule; 2pi tags K_S, 3pi tags K_L, any other
    mode is unclassifiable for lifetime.
    """
    if method == "mode":
        if event.mode is DecayMode.TWO_PI:
            return Outcome.KS
        if event.mode is DecayMode.THREE_PI:
            return Outcome.KL
        return None
    if method != "window":
        raise ValueError(f"method must be 'window' or 'mode', got {method!r}")
    if event.tau < measurement_time:
        return None
    if event.tau <= measurement_time + params.lifetime_window:
        return Outcome.KS
    return Outcome.KL


# --------------------------------------------------------------------------
# Born-rule draws from the evolved pair state (amplitude path)
# --------------------------------------------------------------------------


def _born_cell_probs(
    tau_l: float, tau_r: float, params: PhysicsParams, cells
) -> np.ndarray:
    state = normalize_surviving(
        evolve_pair(initial_state(Basis.LIFETIME), tau_l, tau_r, params)
    )
    p = np.array([project_pair(state, ol, outcome_r) for ol, outcome_r in cells])
    return p / p.sum()


def _pair_coeffs(tau_l: float, tau_r: np.ndarray, params: PhysicsParams):
    """Un-normalized lifetime-basis pair coefficients, vectorized in tau_r."""
    sqrt_half = np.sqrt(0.5)
    c_sl = -sqrt_half * np.exp(-1j * (params.lambda_s * tau_l + params.lambda_l * tau_r))
    c_ls = sqrt_half * np.exp(-1j * (params.lambda_l * tau_l + params.lambda_s * tau_r))
    return c_sl, c_ls


# --------------------------------------------------------------------------
# Estimate constructors
# --------------------------------------------------------------------------


def _ratio_estimate(count: int, total: int, twin: float, min_count: int) -> Estimate:
    if total == 0:
        return Estimate(0.0, 0.0, twin, 0, True)
    value = count / total
    sigma = np.sqrt(max(value * (1.0 - value), 0.0) / total)
    # the binomial error is only trustworthy when both cells are populated
    flagged = min(count, total - count) < min_count
    return Estimate(float(value), float(sigma), twin, total, flagged)


def _scaled_estimate(count: int, scale: float, twin: float, min_count: int) -> Estimate:
    if scale <= 0.0:
        return Estimate(0.0, 0.0, twin, int(count), True)
    value = count / scale
    sigma = np.sqrt(count) / scale
    return Estimate(float(value), float(sigma), twin, int(count), count < min_count)


def _analytic_estimate(twin: float) -> Estimate:
    return Estimate(twin, 0.0, twin, 0, False)


def _family_sums(table: JointProbabilityTable) -> tuple[float, float]:
    p = table.p
    if table.obs_r_kind is Basis.STRANGENESS:
        like = p[(Outcome.K0, Outcome.K0)] + p[(Outcome.K0BAR, Outcome.K0BAR)]
        unlike = p[(Outcome.K0, Outcome.K0BAR)] + p[(Outcome.K0BAR, Outcome.K0)]
        return like, unlike
    ks = p[(Outcome.K0, Outcome.KS)] + p[(Outcome.K0BAR, Outcome.KS)]
    kl = p[(Outcome.K0, Outcome.KL)] + p[(Outcome.K0BAR, Outcome.KL)]
    return ks, kl


# --------------------------------------------------------------------------
# Per-kind row builders
# --------------------------------------------------------------------------


def _row_active_active(
    spec: ExperimentSpec, params: PhysicsParams, events: Optional[EventSet], row: int
) -> ScanRow:
    """Both sides projected at (tau_l, tau_r0) on pairs surviving to both.

    Survival is decided by rejection on the generated decay times; the
    joint outcome is then a Born draw from the survival-normalized pair
    state, once in the strangeness-strangeness setup and once with the
    meter matter removed (strangeness-lifetime setup).
    """
    tau_l = spec.tau_l_grid[row]
    point_l = TimeWindow.point(tau_l)
    point_r = TimeWindow.point(spec.tau_r0)
    twin_like, twin_unlike = _family_sums(
        window_table(Basis.STRANGENESS, Basis.STRANGENESS, point_l, point_r, params)
    )
    twin_ks, twin_kl = _family_sums(
        window_table(Basis.STRANGENESS, Basis.LIFETIME, point_l, point_r, params)
    )
    if events is None:
        return ScanRow(
            tau_l,
            _analytic_estimate(twin_like),
            _analytic_estimate(twin_unlike),
            _analytic_estimate(twin_ks),
            _analytic_estimate(twin_kl),
            counts={"strangeness": 0, "lifetime": 0, "discarded": 0},
        )
    survivors = int(np.sum((events.tau_l > tau_l) & (events.tau_r > spec.tau_r0)))
    rng = np.random.default_rng([spec.seed, row, 0])
    c_s = rng.multinomial(survivors, _born_cell_probs(tau_l, spec.tau_r0, params, _S_CELLS))
    c_m = rng.multinomial(survivors, _born_cell_probs(tau_l, spec.tau_r0, params, _MIXED_CELLS))
    mc = spec.min_count
    return ScanRow(
        tau_l,
        like=_ratio_estimate(int(c_s[0] + c_s[3]), survivors, twin_like, mc),
        unlike=_ratio_estimate(int(c_s[1] + c_s[2]), survivors, twin_unlike, mc),
        s_ks=_ratio_estimate(int(c_m[0] + c_m[2]), survivors, twin_ks, mc),
        s_kl=_ratio_estimate(int(c_m[1] + c_m[3]), survivors, twin_kl, mc),
        counts={
            "strangeness": survivors,
            "lifetime": survivors,
            "discarded": events.n - survivors,
        },
    )


def _row_partially_active(
    spec: ExperimentSpec, params: PhysicsParams, events: Optional[EventSet], row: int
) -> ScanRow:
    """Meter matter fixed at tau_r0; the meter chooses by decaying or not.

    Pairs whose meter survives to tau_r0 get the active strangeness
    projection there (fringe columns).  Meter decays before tau_r0 carry
    lifetime information: nonleptonic ones are classified by mode and, for
    the ones inside the one-sided window [tau_r0 - bin_width_r, tau_r0),
    converted into width-scaled estimates; early semileptonic decays
    measure strangeness instead and are tallied separately; other modes
    are discarded.  The lifetime/early tallies cover all early decays.
    """
    tau_l = spec.tau_l_grid[row]
    point_l = TimeWindow.point(tau_l)
    point_r = TimeWindow.point(spec.tau_r0)
    early_lo = max(0.0, spec.tau_r0 - spec.bin_width_r)
    early = TimeWindow(early_lo, spec.tau_r0)
    twin_like, twin_unlike = _family_sums(
        window_table(Basis.STRANGENESS, Basis.STRANGENESS, point_l, point_r, params)
    )
    twin_ks, twin_kl = _family_sums(
        window_table(Basis.STRANGENESS, Basis.LIFETIME, point_l, early, params)
    )
    if events is None:
        return ScanRow(
            tau_l,
            _analytic_estimate(twin_like),
            _analytic_estimate(twin_unlike),
            _analytic_estimate(twin_ks),
            _analytic_estimate(twin_kl),
            counts={"strangeness": 0, "lifetime": 0, "early_strangeness": 0, "discarded": 0},
        )
    amps = TransitionAmplitudes.from_params(params)
    left_alive = events.tau_l > tau_l
    survivors = int(np.sum(left_alive & (events.tau_r > spec.tau_r0)))
    rng = np.random.default_rng([spec.seed, row, 1])
    c_s = rng.multinomial(survivors, _born_cell_probs(tau_l, spec.tau_r0, params, _S_CELLS))

    early_mask = left_alive & (events.tau_r < spec.tau_r0)
    early_modes = events.mode_r[early_mask]
    n_early_sl = int(np.sum((early_modes == _CODE_SLP) | (early_modes == _CODE_SLM)))
    n_early_other = int(np.sum(early_modes == _CODE_OTHER))
    in_window = early_mask & (events.tau_r >= early.lo)
    c_2pi = int(np.sum(in_window & (events.mode_r == _CODE_2PI)))
    c_3pi = int(np.sum(in_window & (events.mode_r == _CODE_3PI)))
    d = survival_weight(point_l, early, params)
    n_total = events.n
    mc = spec.min_count
    return ScanRow(
        tau_l,
        like=_ratio_estimate(int(c_s[0] + c_s[3]), survivors, twin_like, mc),
        unlike=_ratio_estimate(int(c_s[1] + c_s[2]), survivors, twin_unlike, mc),
        s_ks=_scaled_estimate(
            c_2pi, n_total * amps.identified_width(DecayMode.TWO_PI) * d, twin_ks, mc
        ),
        s_kl=_scaled_estimate(
            c_3pi, n_total * amps.identified_width(DecayMode.THREE_PI) * d, twin_kl, mc
        ),
        counts={
            "strangeness": survivors,
            "lifetime": int(np.sum((early_modes == _CODE_2PI) | (early_modes == _CODE_3PI))),
            "early_strangeness": n_early_sl,
            "discarded": n_early_other,
        },
    )


def _row_passive_meter(
    spec: ExperimentSpec, params: PhysicsParams, events: EventSet, row: int
) -> ScanRow:
    """Meter read purely from its decay record near tau_r0; object active.

    Meter decays inside the window centered on tau_r0 are classified by
    mode (semileptonic: strangeness, nonleptonic: lifetime).  For each
    semileptonic record the object outcome is drawn from the pair
    amplitude conditioned on that record, so the strangeness fringes come
    out as plain count ratios; the lifetime columns are width-scaled
    counts as in the fully passive protocol.
    """
    tau_l = spec.tau_l_grid[row]
    point_l = TimeWindow.point(tau_l)
    window_r = TimeWindow.centered(spec.tau_r0, spec.bin_width_r)
    twin_like, twin_unlike = _family_sums(
        window_table(Basis.STRANGENESS, Basis.STRANGENESS, point_l, window_r, params)
    )
    twin_ks, twin_kl = _family_sums(
        window_table(Basis.STRANGENESS, Basis.LIFETIME, point_l, window_r, params)
    )
    amps = TransitionAmplitudes.from_params(params)
    kept = (
        (events.tau_l > tau_l)
        & (events.tau_r >= window_r.lo)
        & (events.tau_r <= window_r.hi)
    )
    modes_r = events.mode_r[kept]
    taus_r = events.tau_r[kept]

    # semileptonic meter decays: strangeness tag; draw the left active
    # outcome from the conditional pair amplitude given the meter record
    sl_mask = (modes_r == _CODE_SLP) | (modes_r == _CODE_SLM)
    t_sl = taus_r[sl_mask]
    n_sl = int(t_sl.size)
    c_like = 0
    if n_sl:
        sign = np.where(modes_r[sl_mask] == _CODE_SLP, 1.0, -1.0)
        c_sl, c_ls = _pair_coeffs(tau_l, t_sl, params)
        num = np.abs(sign * c_sl + c_ls) ** 2
        den = 2.0 * (np.abs(c_sl) ** 2 + np.abs(c_ls) ** 2)
        p_k0 = num / den
        rng = np.random.default_rng([spec.seed, row, 2])
        left_k0 = rng.random(n_sl) < p_k0
        right_k0 = modes_r[sl_mask] == _CODE_SLP
        c_like = int(np.sum(left_k0 == right_k0))

    c_2pi = int(np.sum(modes_r == _CODE_2PI))
    c_3pi = int(np.sum(modes_r == _CODE_3PI))
    d = survival_weight(point_l, window_r, params)
    mc = spec.min_count
    return ScanRow(
        tau_l,
        like=_ratio_estimate(c_like, n_sl, twin_like, mc),
        unlike=_ratio_estimate(n_sl - c_like, n_sl, twin_unlike, mc),
        s_ks=_scaled_estimate(
            c_2pi, events.n * amps.identified_width(DecayMode.TWO_PI) * d, twin_ks, mc
        ),
        s_kl=_scaled_estimate(
            c_3pi, events.n * amps.identified_width(DecayMode.THREE_PI) * d, twin_kl, mc
        ),
        counts={
            "strangeness": n_sl,
            "lifetime": c_2pi + c_3pi,
            "discarded": int(np.sum(modes_r == _CODE_OTHER)),
        },
    )


def _row_passive_passive(
    spec: ExperimentSpec, params: PhysicsParams, events: EventSet, row: int
) -> ScanRow:
    """Nothing projected: counting and sorting of joint decay records.

    Both decay times are binned (object bin around tau_l, meter bin around
    tau_r0) and the four identifying mode cells per observable family are
    turned into probabilities by :func:`sort_passive_events`.
    """
    tau_l = spec.tau_l_grid[row]
    table_s = sort_passive_events(
        events,
        [tau_l],
        spec.bin_width_l,
        spec.tau_r0,
        params,
        kind_r=Basis.STRANGENESS,
        bin_width_r=spec.bin_width_r,
        min_count=spec.min_count,
    )[0]
    table_m = sort_passive_events(
        events,
        [tau_l],
        spec.bin_width_l,
        spec.tau_r0,
        params,
        kind_r=Basis.LIFETIME,
        bin_width_r=spec.bin_width_r,
        min_count=spec.min_count,
    )[0]
    window_l = TimeWindow.centered(tau_l, spec.bin_width_l)
    window_r = TimeWindow.centered(spec.tau_r0, spec.bin_width_r)
    twin_like, twin_unlike = _family_sums(
        window_table(Basis.STRANGENESS, Basis.STRANGENESS, window_l, window_r, params)
    )
    twin_ks, twin_kl = _family_sums(
        window_table(Basis.STRANGENESS, Basis.LIFETIME, window_l, window_r, params)
    )

    def combine(table, cells, twin):
        value = sum(table.p[c] for c in cells)
        sigma = np.sqrt(sum(table.sigma[c] ** 2 for c in cells))
        n = sum(table.counts[c] for c in cells)
        return Estimate(float(value), float(sigma), twin, n, n < spec.min_count)

    in_bins = (
        (events.tau_l >= window_l.lo)
        & (events.tau_l <= window_l.hi)
        & (events.tau_r >= window_r.lo)
        & (events.tau_r <= window_r.hi)
    )
    left_sl = (events.mode_l == _CODE_SLP) | (events.mode_l == _CODE_SLM)
    right_sl = (events.mode_r == _CODE_SLP) | (events.mode_r == _CODE_SLM)
    right_nl = (events.mode_r == _CODE_2PI) | (events.mode_r == _CODE_3PI)
    n_ss = int(np.sum(in_bins & left_sl & right_sl))
    n_sl_ = int(np.sum(in_bins & left_sl & right_nl))
    return ScanRow(
        tau_l,
        like=combine(
            table_s, [(Outcome.K0, Outcome.K0), (Outcome.K0BAR, Outcome.K0BAR)], twin_like
        ),
        unlike=combine(
            table_s, [(Outcome.K0, Outcome.K0BAR), (Outcome.K0BAR, Outcome.K0)], twin_unlike
        ),
        s_ks=combine(
            table_m, [(Outcome.K0, Outcome.KS), (Outcome.K0BAR, Outcome.KS)], twin_ks
        ),
        s_kl=combine(
            table_m, [(Outcome.K0, Outcome.KL), (Outcome.K0BAR, Outcome.KL)], twin_kl
        ),
        counts={
            "strangeness": n_ss,
            "lifetime": n_sl_,
            "discarded": int(np.sum(in_bins)) - n_ss - n_sl_,
        },
    )


# --------------------------------------------------------------------------
# Passive sorting (the fully passive estimator)
# --------------------------------------------------------------------------

_MODE_FOR_OUTCOME = {
    Outcome.K0: DecayMode.SEMILEPTONIC_PLUS,
    Outcome.K0BAR: DecayMode.SEMILEPTONIC_MINUS,
    Outcome.KS: DecayMode.TWO_PI,
    Outcome.KL: DecayMode.THREE_PI,
}
_CODE_FOR_OUTCOME = {
    Outcome.K0: _CODE_SLP,
    Outcome.K0BAR: _CODE_SLM,
    Outcome.KS: _CODE_2PI,
    Outcome.KL: _CODE_3PI,
}


def sort_passive_events(
    events: EventSet,
    grid,
    bin_width: float,
    tau_r0: float,
    params: PhysicsParams,
    kind_l: Basis = Basis.STRANGENESS,
    kind_r: Basis = Basis.STRANGENESS,
    bin_width_r: Optional[float] = None,
    min_count: int = 5,
) -> list[JointProbabilityTable]:
    """Binned probability estimation from purely passive decay records.

    For every grid point, events whose left decay falls in the bin around
    it and whose right decay falls in the bin around ``tau_r0`` are sorted
    into the four identifying-mode cells of the requested observable pair.
    Each count is divided by

        n_pairs * #integral of the extinction factor over the bins#
                * gamma(K_l -> f_l) * gamma(K_r -> f_r),

    which makes it an unbiased estimate of the survival-weighted bin
    average of the joint probability.  Standard errors are Poisson; tables
    backed by fewer than ``min_count`` events in total are flagged (an
    empty bin reports zero probabilities with zero error, flagged).
    """
    if bin_width <= 0 or (bin_width_r is not None and bin_width_r <= 0):
        raise ValueError("bin widths must be > 0")
    grid_arr = np.asarray(list(grid), dtype=float)
    if grid_arr.size > 1 and np.any(np.diff(grid_arr) < bin_width - 1e-12):
        raise ValueError("grid spacing must be at least bin_width (bins must not overlap)")
    width_r = bin_width if bin_width_r is None else bin_width_r
    amps = TransitionAmplitudes.from_params(params)
    window_r = TimeWindow.centered(tau_r0, width_r)
    outcomes_l = (
        (Outcome.K0, Outcome.K0BAR) if kind_l is Basis.STRANGENESS else (Outcome.KS, Outcome.KL)
    )
    outcomes_r = (
        (Outcome.K0, Outcome.K0BAR) if kind_r is Basis.STRANGENESS else (Outcome.KS, Outcome.KL)
    )
    in_window_r = (events.tau_r >= window_r.lo) & (events.tau_r <= window_r.hi)
    tables = []
    for tau_l in grid:
        window_l = TimeWindow.centered(float(tau_l), bin_width)
        in_bin = (
            in_window_r & (events.tau_l >= window_l.lo) & (events.tau_l <= window_l.hi)
        )
        d = survival_weight(window_l, window_r, params)
        p: dict[tuple[Outcome, Outcome], float] = {}
        sigma: dict[tuple[Outcome, Outcome], float] = {}
        counts: dict[tuple[Outcome, Outcome], int] = {}
        total = 0
        for ol in outcomes_l:
            mask_l = in_bin & (events.mode_l == _CODE_FOR_OUTCOME[ol])
            for outcome_r in outcomes_r:
                count = int(
                    np.sum(mask_l & (events.mode_r == _CODE_FOR_OUTCOME[outcome_r]))
                )
                total += count
                counts[(ol, outcome_r)] = count
                scale = (
                    events.n
                    * d
                    * amps.identified_width(_MODE_FOR_OUTCOME[ol])
                    * amps.identified_width(_MODE_FOR_OUTCOME[outcome_r])
                )
                if scale > 0.0:
                    p[(ol, outcome_r)] = count / scale
                    sigma[(ol, outcome_r)] = np.sqrt(count) / scale
                else:
                    p[(ol, outcome_r)] = 0.0
                    sigma[(ol, outcome_r)] = 0.0
        tables.append(
            JointProbabilityTable(
                obs_l_kind=kind_l,
                obs_r_kind=kind_r,
                tau_l=float(tau_l),
                tau_r=tau_r0,
                p=p,
                sigma=sigma,
                source=Source.MONTE_CARLO,
                n_events=total,
                flagged=total < min_count,
                counts=counts,
            )
        )
    return tables


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

_ROW_BUILDERS = {
    ExperimentKind.ACTIVE_ACTIVE: _row_active_active,
    ExperimentKind.PARTIALLY_ACTIVE: _row_partially_active,
    ExperimentKind.PASSIVE_METER: _row_passive_meter,
    ExperimentKind.PASSIVE_PASSIVE: _row_passive_passive,
}


def run_experiment(
    spec: ExperimentSpec,
    params: PhysicsParams,
    events: Optional[EventSet] = None,
    threads: int = 1,
) -> ScanResult:
    """Run one eraser protocol over the object-time grid.

    ``events`` may be a pre-generated event set (reused as-is); otherwise
    ``spec.n_pairs`` events are generated with ``spec.seed``.  The result
    is independent of ``threads``.
    """
    if events is None and spec.n_pairs > 0:
        events = generate(
            GeneratorConfig(seed=spec.seed, n_pairs=spec.n_pairs), params, threads=threads
        )
    if events is None and spec.kind in (
        ExperimentKind.PASSIVE_METER,
        ExperimentKind.PASSIVE_PASSIVE,
    ):
        raise ValueError(f"kind {spec.kind.value!r} requires events")
    builder = _ROW_BUILDERS[spec.kind]
    indices = range(len(spec.tau_l_grid))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda i: builder(spec, params, events, i), indices))
    else:
        rows = [builder(spec, params, events, i) for i in indices]
    return ScanResult(spec=spec, params=params, rows=tuple(rows))


# --------------------------------------------------------------------------
# Scan serialization (CSV with a documented comment header)
# --------------------------------------------------------------------------

_FAMILIES = ("like", "unlike", "s_ks", "s_kl")
_COUNT_KEYS = {
    ExperimentKind.ACTIVE_ACTIVE: ("strangeness", "lifetime", "discarded"),
    ExperimentKind.PARTIALLY_ACTIVE: (
        "strangeness",
        "lifetime",
        "early_strangeness",
        "discarded",
    ),
    ExperimentKind.PASSIVE_METER: ("strangeness", "lifetime", "discarded"),
    ExperimentKind.PASSIVE_PASSIVE: ("strangeness", "lifetime", "discarded"),
}


def write_scan_csv(path: Union[str, Path], result: ScanResult, tool_version: str) -> None:
    spec = result.spec
    count_keys = _COUNT_KEYS[spec.kind]
    columns = ["tau_l"]
    for fam in _FAMILIES:
        columns += [fam, f"{fam}_sigma", f"{fam}_twin", f"{fam}_n", f"{fam}_flag"]
    columns += [f"count_{key}" for key in count_keys]
    grid = spec.tau_l_grid
    with open(path, "w") as fh:
        fh.write("# kaon-eraser scan v1\n")
        fh.write(
            f"# tool_version={tool_version} kind={spec.kind.value}"
            f" tau_r0={spec.tau_r0:.17g} grid={grid[0]:.17g}:{grid[-1]:.17g}:{len(grid)}"
            f" n_pairs={spec.n_pairs} seed={spec.seed}"
            f" bin_width_l={spec.bin_width_l:.17g} bin_width_r={spec.bin_width_r:.17g}"
            f" min_count={spec.min_count}\n"
        )
        fh.write(f"# params_digest={result.params.digest()}\n")
        fh.write(
            "# estimates are survival-conditioned probabilities; *_twin is the exact\n"
            "# analytic expectation of the estimator; *_flag=1 marks low statistics\n"
        )
        fh.write(",".join(columns) + "\n")
        for row in result.rows:
            fields = [f"{row.tau_l:.17g}"]
            for fam in _FAMILIES:
                est: Estimate = getattr(row, fam)
                fields += [
                    f"{est.value:.17g}",
                    f"{est.sigma:.17g}",
                    f"{est.twin:.17g}",
                    str(est.n),
                    str(int(est.flagged)),
                ]
            fields += [str(row.counts.get(key, 0)) for key in count_keys]
            fh.write(",".join(fields) + "\n")
