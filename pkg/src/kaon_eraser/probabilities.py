"""Closed-form joint detection probabilities for measurements on the pair.

All probabilities here are conditional on both pair members surviving up
to their measurement times (survival-normalized state).  With
dG = gamma_l - gamma_s < 0 and dt = tau_l - tau_r:

  strangeness (x) strangeness, like pairs:    (1 - V(dt) cos(dm*dt)) / 4
                               unlike pairs:  (1 + V(dt) cos(dm*dt)) / 4
  visibility:                  V(dt) = 1 / cosh(dG*dt/2)
  strangeness (x) lifetime:    P[*, K_S] = 1 / (2 (1 + e^{dG*dt}))
                               P[*, K_L] = 1 / (2 (1 + e^{-dG*dt}))
  lifetime (x) lifetime:       P[K_S, K_L] = e^{dG*dt} / (1 + e^{dG*dt})
                               P[K_L, K_S] = 1 / (1 + e^{dG*dt}), diagonal 0.

The lifetime (x) lifetime table never oscillates and is a direct readout
of the squared moduli of the survival-normalized amplitudes; it is
included for completeness.

This module also provides survival-weighted averages of the same
quantities over finite time windows (exact closed-form integrals), which
are the unbiased targets of the binned event-counting estimators in
:mod:`kaon_eraser.experiments`.
"""

from __future__ import annotations

import dataclasses
import math
from enum import Enum
from typing import Mapping, Optional

import numpy as np
from scipy.special import expit

from .kaon import Basis, Outcome
from .params import PhysicsParams

_S_OUTCOMES = (Outcome.K0, Outcome.K0BAR)
_L_OUTCOMES = (Outcome.KS, Outcome.KL)

#: Analytic tables must sum to 1 within this tolerance.
TABLE_SUM_TOL = 1e-9


class Source(Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte_carlo"


@dataclasses.dataclass(frozen=True)
class Observable:
    """A measurement kind together with one of its outcomes."""

    kind: Basis
    outcome: Outcome

    def __post_init__(self) -> None:
        if self.outcome.basis is not self.kind:
            raise ValueError(f"outcome {self.outcome} inconsistent with kind {self.kind}")


@dataclasses.dataclass(frozen=True)
class JointProbabilityTable:
    """Probabilities for the four outcomes of a chosen observable pair."""

    obs_l_kind: Basis
    obs_r_kind: Basis
    tau_l: float
    tau_r: float
    p: Mapping[tuple[Outcome, Outcome], float]
    sigma: Mapping[tuple[Outcome, Outcome], float]
    source: Source
    n_events: int = 0
    flagged: bool = False
    counts: Optional[Mapping[tuple[Outcome, Outcome], int]] = None

    def __post_init__(self) -> None:
        if self.source is Source.ANALYTIC:
            if any(v < -1e-12 or v > 1.0 + 1e-12 for v in self.p.values()):
                raise ValueError("analytic probabilities must lie in [0, 1]")
            total = sum(self.p.values())
            if abs(total - 1.0) > TABLE_SUM_TOL:
                raise ValueError(f"analytic table sums to {total!r}, not 1")

    def outcomes(self) -> tuple[tuple[Outcome, Outcome], ...]:
        return tuple(self.p.keys())

    def total(self) -> float:
        return float(sum(self.p.values()))


def _outcomes_for(kind: Basis) -> tuple[Outcome, Outcome]:
    return _S_OUTCOMES if kind is Basis.STRANGENESS else _L_OUTCOMES


def visibility(delta_tau: float, params: PhysicsParams) -> float:
    """Fringe contrast of the strangeness oscillations, 1/cosh(dG*dt/2)."""
    x = abs(0.5 * params.delta_gamma * delta_tau)
    # sech(x) written to avoid cosh overflow at large |x|
    return 2.0 * math.exp(-x) / (1.0 + math.exp(-2.0 * x))


def _check_times(tau_l: float, tau_r: float) -> None:
    if tau_l < 0 or tau_r < 0:
        raise ValueError(f"measurement times must be >= 0, got ({tau_l}, {tau_r})")


def joint_strangeness(
    tau_l: float,
    tau_r: float,
    outcome_l: Outcome,
    outcome_r: Outcome,
    params: PhysicsParams,
) -> float:
    """Probability of a joint strangeness outcome, both sides measured."""
    _check_times(tau_l, tau_r)
    if outcome_l.basis is not Basis.STRANGENESS or outcome_r.basis is not Basis.STRANGENESS:
        raise ValueError("joint_strangeness takes strangeness outcomes")
    dt = tau_l - tau_r
    fringe = visibility(dt, params) * math.cos(params.delta_m * dt)
    like = outcome_l is outcome_r
    return 0.25 * (1.0 - fringe) if like else 0.25 * (1.0 + fringe)


def joint_strangeness_lifetime(
    tau_l: float,
    tau_r: float,
    outcome_l: Outcome,
    outcome_r: Outcome,
    params: PhysicsParams,
) -> float:
    """Strangeness on the left, lifetime on the right; never oscillates.

    Independent of the strangeness outcome: the lifetime record on one
    side does not bias the strangeness result on the other.
    """
    _check_times(tau_l, tau_r)
    if outcome_l.basis is not Basis.STRANGENESS or outcome_r.basis is not Basis.LIFETIME:
        raise ValueError("joint_strangeness_lifetime takes (strangeness, lifetime) outcomes")
    x = params.delta_gamma * (tau_l - tau_r)
    # 1/(1+e^x) = expit(-x), numerically stable for any x
    if outcome_r is Outcome.KS:
        return 0.5 * float(expit(-x))
    return 0.5 * float(expit(x))


def full_table(
    kind_l: Basis,
    kind_r: Basis,
    tau_l: float,
    tau_r: float,
    params: PhysicsParams,
) -> JointProbabilityTable:
    """All four outcome probabilities for the chosen observable pair."""
    _check_times(tau_l, tau_r)
    p: dict[tuple[Outcome, Outcome], float] = {}
    if kind_l is Basis.STRANGENESS and kind_r is Basis.STRANGENESS:
        for ol in _S_OUTCOMES:
            for outcome_r in _S_OUTCOMES:
                p[(ol, outcome_r)] = joint_strangeness(tau_l, tau_r, ol, outcome_r, params)
    elif kind_l is Basis.STRANGENESS and kind_r is Basis.LIFETIME:
        for ol in _S_OUTCOMES:
            for outcome_r in _L_OUTCOMES:
                p[(ol, outcome_r)] = joint_strangeness_lifetime(
                    tau_l, tau_r, ol, outcome_r, params
                )
    elif kind_l is Basis.LIFETIME and kind_r is Basis.STRANGENESS:
        # exchange symmetry of the antisymmetric state: swap sides, negate dt
        for ol in _L_OUTCOMES:
            for outcome_r in _S_OUTCOMES:
                p[(ol, outcome_r)] = joint_strangeness_lifetime(
                    tau_r, tau_l, outcome_r, ol, params
                )
    else:
        x = params.delta_gamma * (tau_l - tau_r)
        p[(Outcome.KS, Outcome.KS)] = 0.0
        p[(Outcome.KL, Outcome.KL)] = 0.0
        p[(Outcome.KS, Outcome.KL)] = float(expit(x))
        p[(Outcome.KL, Outcome.KS)] = float(expit(-x))
    sigma = {key: 0.0 for key in p}
    return JointProbabilityTable(
        obs_l_kind=kind_l,
        obs_r_kind=kind_r,
        tau_l=tau_l,
        tau_r=tau_r,
        p=p,
        sigma=sigma,
        source=Source.ANALYTIC,
    )


# --------------------------------------------------------------------------
# Survival-weighted window averages (exact integrals of the closed forms)
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class TimeWindow:
    """A measurement-time point (lo == hi) or bin [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo < 0 or self.hi < self.lo:
            raise ValueError(f"invalid time window [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, tau: float) -> "TimeWindow":
        return cls(tau, tau)

    @classmethod
    def centered(cls, tau: float, width: float) -> "TimeWindow":
        """Bin of ``width`` centered on ``tau``, clipped at 0."""
        return cls(max(0.0, tau - 0.5 * width), tau + 0.5 * width)

    @property
    def is_point(self) -> bool:
        return self.hi == self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)


def _exp_factor(c: complex, window: TimeWindow) -> complex:
    """exp(-c*tau) at a point, or its integral over the window."""
    if window.is_point:
        return np.exp(-c * window.lo)
    if abs(c) * (window.hi - window.lo) < 1e-12:
        return complex(window.hi - window.lo)
    return (np.exp(-c * window.lo) - np.exp(-c * window.hi)) / c


def survival_weight(
    window_l: TimeWindow, window_r: TimeWindow, params: PhysicsParams
) -> float:
    """Pair-survival probability density integrated over the windows.

    For point windows this is the beam-extinction factor
    N(tau_l, tau_r) = exp(-(gamma_s+gamma_l)(tau_l+tau_r)/2)
                      * cosh((gamma_l-gamma_s)(tau_l-tau_r)/2).
    """
    f_s_l = _exp_factor(params.gamma_s, window_l).real
    f_l_l = _exp_factor(params.gamma_l, window_l).real
    f_s_r = _exp_factor(params.gamma_s, window_r).real
    f_l_r = _exp_factor(params.gamma_l, window_r).real
    return 0.5 * (f_s_l * f_l_r + f_l_l * f_s_r)


def window_table(
    kind_l: Basis,
    kind_r: Basis,
    window_l: TimeWindow,
    window_r: TimeWindow,
    params: PhysicsParams,
) -> JointProbabilityTable:
    """Survival-weighted average of :func:`full_table` over time windows.

    This is the exact expectation of an event-counting estimator whose
    decay (or measurement) times are binned into the given windows; for
    point windows it reduces to :func:`full_table`.
    """
    d = survival_weight(window_l, window_r, params)
    gbar = 0.5 * (params.gamma_s + params.gamma_l)
    p: dict[tuple[Outcome, Outcome], float] = {}
    if kind_l is Basis.STRANGENESS and kind_r is Basis.STRANGENESS:
        z = _exp_factor(gbar - 1j * params.delta_m, window_l) * _exp_factor(
            gbar + 1j * params.delta_m, window_r
        )
        fringe = z.real / d
        for ol in _S_OUTCOMES:
            for outcome_r in _S_OUTCOMES:
                sign = -1.0 if ol is outcome_r else 1.0
                p[(ol, outcome_r)] = 0.25 * (1.0 + sign * fringe)
    else:
        # the non-oscillating families factorize into single-exponential weights
        f_s_l = _exp_factor(params.gamma_s, window_l).real
        f_l_l = _exp_factor(params.gamma_l, window_l).real
        f_s_r = _exp_factor(params.gamma_s, window_r).real
        f_l_r = _exp_factor(params.gamma_l, window_r).real
        w_ks_r = 0.5 * f_l_l * f_s_r / d  # right identified K_S (left is K_L-paced)
        w_kl_r = 0.5 * f_s_l * f_l_r / d
        if kind_l is Basis.STRANGENESS and kind_r is Basis.LIFETIME:
            for ol in _S_OUTCOMES:
                p[(ol, Outcome.KS)] = 0.5 * w_ks_r
                p[(ol, Outcome.KL)] = 0.5 * w_kl_r
        elif kind_l is Basis.LIFETIME and kind_r is Basis.STRANGENESS:
            for outcome_r in _S_OUTCOMES:
                p[(Outcome.KS, outcome_r)] = 0.5 * w_kl_r
                p[(Outcome.KL, outcome_r)] = 0.5 * w_ks_r
        else:
            p[(Outcome.KS, Outcome.KS)] = 0.0
            p[(Outcome.KL, Outcome.KL)] = 0.0
            p[(Outcome.KS, Outcome.KL)] = w_kl_r
            p[(Outcome.KL, Outcome.KS)] = w_ks_r
    sigma = {key: 0.0 for key in p}
    return JointProbabilityTable(
        obs_l_kind=kind_l,
        obs_r_kind=kind_r,
        tau_l=window_l.center,
        tau_r=window_r.center,
        p=p,
        sigma=sigma,
        source=Source.ANALYTIC,
    )
