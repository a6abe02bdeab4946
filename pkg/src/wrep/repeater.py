"""Nested W-state repeater: swap three working copies, purify back to the working point.

Every swap in this module enumerates all three first-step outcome
arrangements (``swap(..., all_patterns=True)``): the result is the exact
mixture held by the stations after a successful round, and it keeps the
cyclic symmetry the improved purification relies on.

Quantities at operational noise ``p``:

* ``f_max``: upper fidelity envelope of the improved-EPP attractor.
* ``f_p``: lowest locally depolarized W fidelity that still purifies.
* ``f_r``: lowest working fidelity (working states are real EPP iterates)
  whose swapped state still purifies onto the attractor.
* ``p_min``: smallest ``p`` where ``f_max`` meets ``f_r``, i.e. where the
  attractor state itself survives a swap.

``f_r`` supports two readings of "still purifies". ``"direct"`` (default)
runs the improved EPP on the swapped state itself. ``"fidelity"`` only asks
that the swapped fidelity reach ``f_p`` and so ignores the state shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .linalg import DensityOperator, fidelity_with_pure
from .purification import (
    Attractor,
    DegenerateOutcomeError,
    NoFixedPointError,
    depolarized_w_with_fidelity,
    epp_attractor,
    epp_fixed_point,
    epp_threshold,
    is_purifiable,
    select,
    symmetrize_parties,
)
from .states import w_state
from .swapping import DegenerateSwapError, SwapResult, swap

TARGET_MARGIN = 1e-6
MAX_PURIFY_STEPS = 400
TRAJECTORY_STEPS = 60
F_R_CRITERIA = ("direct", "fidelity")
_W = w_state()


class NonOperationalError(RuntimeError):
    """The repeater loop does not close at the requested working point."""


@dataclass(frozen=True)
class RepeaterRoundResult:
    f_before_swap: float
    f_after_swap: float
    purify_steps: int
    f_after_purify: float
    f_after_one_step: float  # fidelity after a single EPP iteration on the swapped state
    swap_success_prob: float
    resources_round: float  # expected elementary working copies per output copy
    success: bool
    state: DensityOperator | None = field(default=None, repr=False)


def swap_working(state: DensityOperator, p: float) -> SwapResult:
    """Swap three copies of ``state`` with operational noise ``p``."""
    return swap([state] * 3, p, all_patterns=True)


def repeater_round(
    working_state: DensityOperator,
    p: float,
    target_fidelity: float,
    f_max: float | None = None,
    max_steps: int = MAX_PURIFY_STEPS,
) -> RepeaterRoundResult:
    """Swap three copies of ``working_state``, then run improved-EPP steps until
    the fidelity reaches ``target_fidelity``.

    The round fails (``success=False``) when purification never gets there
    within ``max_steps`` or hits a degenerate outcome.
    """
    if f_max is None:
        f_max = epp_fixed_point("improved", p)
    if target_fidelity > f_max - TARGET_MARGIN:
        raise ValueError(
            f"target fidelity {target_fidelity} exceeds F_max(p={p}) - {TARGET_MARGIN} = {f_max - TARGET_MARGIN:.9f}"
        )
    f_before = fidelity_with_pure(working_state, _W)
    try:
        sw = swap_working(working_state, p)
    except DegenerateSwapError:
        return RepeaterRoundResult(f_before, 0.0, 0, 0.0, 0.0, 0.0, math.inf, False)

    resources = 3 / sw.success_probability
    state, f_now, f_one, steps = sw.state, sw.fidelity, sw.fidelity, 0
    while f_now < target_fidelity and steps < max_steps:
        try:
            chosen, _ = select(state, "improved", p)
        except DegenerateOutcomeError:
            break
        steps += 1
        resources *= chosen.copies / chosen.eta
        state, f_now = chosen.state, chosen.fidelity
        if steps == 1:
            f_one = f_now
    if steps == 0 and f_now >= target_fidelity:
        # no purification needed; still report what one EPP step would give
        try:
            f_one = select(state, "improved", p)[0].fidelity
        except DegenerateOutcomeError:
            pass
    success = f_now >= target_fidelity
    return RepeaterRoundResult(
        f_before,
        sw.fidelity,
        steps,
        f_now,
        f_one,
        sw.success_probability,
        resources,
        success,
        state if success else None,
    )


def epp_iterates(p: float, start_fidelity: float, steps: int = TRAJECTORY_STEPS) -> list[tuple[float, DensityOperator]]:
    """(fidelity, state) along the improved-EPP trajectory from a depolarized W start.

    The start itself is excluded. Stops early on a degenerate outcome.
    """
    state = depolarized_w_with_fidelity(start_fidelity)
    out = []
    for _ in range(steps):
        try:
            chosen, _ = select(state, "improved", p)
        except DegenerateOutcomeError:
            break
        state = symmetrize_parties(chosen.state)
        out.append((chosen.fidelity, state))
    return out


def working_state(p: float, working_fidelity: float) -> DensityOperator:
    """EPP iterate with the smallest fidelity at or above ``working_fidelity``.

    Candidates come from trajectories started just below the working fidelity
    and at 0.95.
    """
    starts = {max(working_fidelity - 0.05, 0.3), 0.95}
    candidates = [it for s in sorted(starts) for it in epp_iterates(p, s) if it[0] >= working_fidelity]
    if not candidates:
        raise NonOperationalError(f"no EPP iterate reaches F={working_fidelity} at p={p}")
    return min(candidates, key=lambda it: it[0])[1]


def repeater_resources(
    p: float,
    working_fidelity: float,
    nesting: int = 3,
    f_max: float | None = None,
) -> float:
    """Expected elementary working copies consumed per round per output copy, M.

    Runs ``nesting`` consecutive rounds (1..4) from a realistic working state so
    its shape settles, and reports M of the last round.
    """
    if not 1 <= nesting <= 4:
        raise ValueError("nesting must lie in 1..4")
    if f_max is None:
        try:
            f_max = epp_fixed_point("improved", p)
        except NoFixedPointError as exc:
            raise NonOperationalError(str(exc)) from exc
    if working_fidelity > f_max - TARGET_MARGIN:
        raise ValueError(f"working fidelity {working_fidelity} exceeds F_max(p={p}) - {TARGET_MARGIN}")
    state = working_state(p, working_fidelity)
    last = None
    for _ in range(nesting):
        last = repeater_round(state, p, working_fidelity, f_max=f_max)
        if not last.success:
            raise NonOperationalError(
                f"loop does not close at p={p}, F={working_fidelity}: "
                f"post-swap fidelity {last.f_after_swap:.4f} is not purified back"
            )
        state = last.state
    return last.resources_round


def _survives(state: DensityOperator, p: float, attractor: Attractor, criterion: str, f_p: float | None) -> bool:
    try:
        post = swap_working(state, p)
    except DegenerateSwapError:
        return False
    if criterion == "fidelity":
        return post.fidelity >= f_p
    return is_purifiable(post.state, "improved", p, attractor, symmetrize=False)


def swap_survives(p: float, attractor: Attractor | None = None) -> bool:
    """Does the attractor state, swapped at noise ``p``, purify back onto the attractor?"""
    if attractor is None:
        try:
            epp_fixed_point("improved", p)
        except NoFixedPointError:
            return False
        attractor = epp_attractor("improved", p)
    return _survives(attractor.state, p, attractor, "direct", None)


def find_p_min(lo: float = 0.95, hi: float = 1.0, tol: float = 2.5e-4) -> float:
    """Smallest p (to ``tol``) at which a swapped attractor state still purifies."""
    if not swap_survives(hi):
        raise NonOperationalError(f"repeater loop is open even at p={hi}")
    if swap_survives(lo):
        return lo
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if swap_survives(mid):
            hi = mid
        else:
            lo = mid
    return hi


def min_repeater_fidelity(
    p: float,
    attractor: Attractor,
    f_p: float,
    criterion: str = "direct",
) -> float | None:
    """F_min^(R)(p), or None when not even the attractor state survives a swap.

    The candidate working states are EPP iterates from depolarized W starts at
    ``f_p + 0.005`` and 0.95, plus the attractor state. Surviving is assumed
    monotone in fidelity, so the sorted candidates are bisected.
    """
    if criterion not in F_R_CRITERIA:
        raise ValueError(f"criterion must be one of {F_R_CRITERIA}")
    if not _survives(attractor.state, p, attractor, criterion, f_p):
        return None
    cands = {(round(f, 12)): s for start in (min(f_p + 0.005, 0.95), 0.95) for f, s in epp_iterates(p, start)}
    cands[round(attractor.fidelity, 12)] = attractor.state
    fids = sorted(f for f in cands if f <= attractor.fidelity)
    lo, hi = -1, len(fids) - 1  # fids[hi] survives, fids[lo] does not (lo=-1: sentinel)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _survives(cands[fids[mid]], p, attractor, criterion, f_p):
            hi = mid
        else:
            lo = mid
    return fids[hi]


@dataclass
class ThresholdCurves:
    grid: list[float]
    f_max: list[float | None]  # None marks a gap: no purification regime at that p
    f_p: list[float | None]
    f_r: list[float | None]
    p_min: float | None
    criterion: str = "direct"


def repeater_threshold_curves(
    p_grid: Sequence[float],
    tol: float = 2.5e-4,
    criterion: str = "direct",
    refine: bool = True,
) -> ThresholdCurves:
    """F_max, F^(P) and F_min^(R) on ``p_grid`` with the refined crossing ``p_min``."""
    if tol < 1e-4:
        raise ValueError("tol must be >= 1e-4")
    if criterion not in F_R_CRITERIA:
        raise ValueError(f"criterion must be one of {F_R_CRITERIA}")
    grid = sorted(float(p) for p in p_grid)
    if not grid or grid[0] < 0.95 or grid[-1] > 1.0:
        raise ValueError("p grid must be non-empty and lie within [0.95, 1.0]")
    f_max: list[float | None] = []
    f_p: list[float | None] = []
    f_r: list[float | None] = []
    atts: dict[float, tuple[Attractor, float]] = {}
    for p in grid:
        try:
            epp_fixed_point("improved", p)
        except NoFixedPointError:
            f_max.append(None)
            f_p.append(None)
            f_r.append(None)
            continue
        att = epp_attractor("improved", p)
        fp = epp_threshold("improved", p, tol=tol, attractor=att)
        atts[p] = (att, fp)
        f_max.append(att.fidelity)
        f_p.append(fp)
        f_r.append(min_repeater_fidelity(p, att, fp, criterion))

    p_min = None
    closed = [p for p, r in zip(grid, f_r) if r is not None]
    if closed:
        hi = min(closed)
        below = [p for p in grid if p < hi]
        p_min = hi
        if refine and below:
            lo = max(below)

            def ok(p: float) -> bool:
                if criterion == "direct":
                    return swap_survives(p)
                try:
                    epp_fixed_point("improved", p)
                except NoFixedPointError:
                    return False
                att = epp_attractor("improved", p)
                fp = epp_threshold("improved", p, tol=tol, attractor=att)
                return _survives(att.state, p, att, "fidelity", fp)

            while hi - lo > tol:
                mid = (lo + hi) / 2
                if ok(mid):
                    hi = mid
                else:
                    lo = mid
            p_min = hi
    return ThresholdCurves(grid, f_max, f_p, f_r, p_min, criterion)
