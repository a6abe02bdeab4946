"""Recurrence purification of W states.

Two protocols share the three-copy stabilizer subroutine ``P``:

* ``stabilizer``: ``P`` or its dual ``Pbar`` (three copies each),
* ``improved``:   ``P`` or the two-copy parity subroutine ``Pprime``.

Each iteration evaluates both candidate subroutines on the current state and
keeps whichever output has the higher fidelity with |W>. Operational noise of
strength ``p`` depolarizes every qubit of every input copy before the
subroutine acts.

With operational noise the greedy map often settles on a short cycle
(typically period 2, alternating subroutines) instead of a fixed point, and
the stabilizer protocol keeps oscillating even without noise. Runs therefore
detect periodic attractors and report their upper fidelity envelope.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Hashable, Sequence

import numpy as np

from .linalg import DensityOperator, clamp_psd, permute_qubits, tensor_product, tensor_states
from .noise import check_strength, depolarize_register, depolarized_w
from .states import STABILIZER_SUCCESS, build_epp_operator, w_state

DEGENERATE_TOL = 1e-12
MAX_PERIOD = 4
PARTIES = ("A", "B", "C")
PROTOCOLS = {"stabilizer": ("P", "Pbar"), "improved": ("P", "Pprime")}
COPIES = {"P": 3, "Pbar": 3, "Pprime": 2}
_W = w_state()


class DegenerateOutcomeError(ArithmeticError):
    """Subroutine success probability below DEGENERATE_TOL."""


class NoFixedPointError(RuntimeError):
    """No purifying attractor for the requested protocol and noise."""


@dataclass(frozen=True)
class SubroutineOutcome:
    tag: str
    eta: float
    state: DensityOperator = field(repr=False)
    fidelity: float
    copies: int


def _fid(m: np.ndarray) -> float:
    return float(np.real(np.vdot(_W, m @ _W)))


def party_major(state: DensityOperator, copies: int) -> DensityOperator:
    """``state``^(x copies) regrouped so each party's qubits are adjacent.

    Slot order is (A copy 1, A copy 2, ..., B copy 1, ...), copy 1 most significant.
    """
    if state.n_qubits != 3:
        raise ValueError("purification acts on 3-qubit states")
    copy_major = tensor_states(
        *(state.relabel([(party, c) for party in PARTIES]) for c in range(1, copies + 1))
    )
    order = [(party, c) for party in PARTIES for c in range(1, copies + 1)]
    return permute_qubits(copy_major, order)


@lru_cache(maxsize=None)
def _triple(kind: str, index: str | None = None) -> np.ndarray:
    op = build_epp_operator(kind, index)
    out = tensor_product(op, op, op)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _pbar_measure() -> np.ndarray:
    # V applied before the Mbar projection, as a sandwich
    v3 = _triple("V")
    out = v3.conj().T @ _triple("Mbar_000") @ v3
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _parity_triple() -> np.ndarray:
    pe = build_epp_operator("Ptilde_e")
    pe = pe.conj().T @ pe  # P^e on two qubits
    out = tensor_product(pe, pe, pe)
    out.setflags(write=False)
    return out


def _finish(tag: str, eta: float, out: np.ndarray, labels: tuple[Hashable, ...]) -> SubroutineOutcome:
    if eta < DEGENERATE_TOL:
        raise DegenerateOutcomeError(f"{tag}: success probability {eta:.3e}")
    state = clamp_psd(DensityOperator(labels, out / eta))
    state = DensityOperator(labels, state.matrix / state.weight)
    return SubroutineOutcome(tag, float(eta), state, _fid(state.matrix), COPIES[tag])


def _trace_prod(op_t_flat: np.ndarray, big: np.ndarray) -> float:
    """tr(A B) given A transposed and flattened."""
    return float(np.real(np.dot(op_t_flat, big.ravel())))


@lru_cache(maxsize=None)
def _flat_t(key: str) -> np.ndarray:
    if key == "Pbar":
        a = _pbar_measure()
    elif key == "Pprime":
        a = _parity_triple()
    else:
        a = _triple("M", key)
    out = np.ascontiguousarray(a.T).ravel()
    out.setflags(write=False)
    return out


class _Prepared:
    """Noisy input and its party-major copies, shared by competing subroutines."""

    def __init__(self, state: DensityOperator, p: float):
        check_strength(p)
        self.labels = state.labels
        self.noisy = depolarize_register(state, None, p)
        self._big: dict[int, np.ndarray] = {}

    def big(self, copies: int) -> np.ndarray:
        if copies not in self._big:
            self._big[copies] = party_major(self.noisy, copies).matrix
        return self._big[copies]


def _p(prep: _Prepared) -> SubroutineOutcome:
    big = prep.big(3)
    eta = 0.0
    out = np.zeros((8, 8), dtype=complex)
    for ijk in STABILIZER_SUCCESS:
        eta += _trace_prod(_flat_t(ijk), big)
        n3 = _triple("N", ijk)
        out += n3 @ big @ n3.conj().T
    return _finish("P", eta, out, prep.labels)


def _pbar(prep: _Prepared) -> SubroutineOutcome:
    big = prep.big(3)
    eta = _trace_prod(_flat_t("Pbar"), big)
    nb = _triple("Nbar")
    return _finish("Pbar", eta, nb @ big @ nb.conj().T, prep.labels)


def _pprime(prep: _Prepared) -> SubroutineOutcome:
    big = prep.big(2)
    eta = _trace_prod(_flat_t("Pprime"), big)
    pt = _triple("Ptilde_e")
    return _finish("Pprime", eta, pt @ big @ pt.conj().T, prep.labels)


def subroutine_p(state: DensityOperator, p: float = 1.0) -> SubroutineOutcome:
    """Three-copy stabilizer subroutine: all parties find the same outcome in {001, 010, 100}."""
    return _p(_Prepared(state, p))


def subroutine_pbar(state: DensityOperator, p: float = 1.0) -> SubroutineOutcome:
    """Three-copy dual subroutine: basis change V, then all parties find Mbar^000."""
    return _pbar(_Prepared(state, p))


def subroutine_pprime(state: DensityOperator, p: float = 1.0) -> SubroutineOutcome:
    """Two-copy parity subroutine: all parties find even parity, then |00>->|0>, |11>->|1>."""
    return _pprime(_Prepared(state, p))


_IMPL = {"P": _p, "Pbar": _pbar, "Pprime": _pprime}


SUBROUTINES: dict[str, Callable[[DensityOperator, float], SubroutineOutcome]] = {
    "P": subroutine_p,
    "Pbar": subroutine_pbar,
    "Pprime": subroutine_pprime,
}


def symmetrize_parties(state: DensityOperator) -> DensityOperator:
    """Average over all permutations of the three parties."""
    acc = np.zeros_like(state.matrix)
    for perm in itertools.permutations(state.labels):
        acc = acc + permute_qubits(state, perm).relabel(state.labels).matrix
    return DensityOperator(state.labels, acc / 6)


def is_party_symmetric(state: DensityOperator, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(symmetrize_parties(state).matrix - state.matrix)) < tol)


def select(state: DensityOperator, protocol: str, p: float = 1.0) -> tuple[SubroutineOutcome, SubroutineOutcome | None]:
    """Greedy choice: (chosen outcome, rejected outcome or None if it was degenerate).

    The three-copy subroutine ``P`` wins only when its fidelity is strictly higher.
    """
    first, second = PROTOCOLS[_check_protocol(protocol)]
    prep = _Prepared(state, p)
    results = []
    for tag in (first, second):
        try:
            results.append(_IMPL[tag](prep))
        except DegenerateOutcomeError:
            results.append(None)
    a, b = results
    if a is None and b is None:
        raise DegenerateOutcomeError(f"both subroutines of {protocol} are degenerate")
    if b is None or (a is not None and a.fidelity > b.fidelity):
        return a, b
    return b, a


def _check_protocol(protocol: str) -> str:
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {sorted(PROTOCOLS)}, got {protocol!r}")
    return protocol


@dataclass(frozen=True)
class EppStep:
    k: int
    subroutine: str
    fidelity: float
    success_prob: float
    copies: int
    resources: float


@dataclass
class EppTrace:
    protocol: str
    p: float
    initial_fidelity: float
    steps: list[EppStep] = field(default_factory=list)
    converged: bool = False
    period: int | None = None
    failed_at: int | None = None
    error: str | None = None
    final_state: DensityOperator | None = field(default=None, repr=False)
    # states of the last cycle, aligned with the last ``period`` steps
    cycle_states: list[DensityOperator] = field(default_factory=list, repr=False)

    @property
    def fidelities(self) -> list[float]:
        return [s.fidelity for s in self.steps]

    @property
    def resources(self) -> list[float]:
        return [s.resources for s in self.steps]

    def envelope(self, window: int | None = None) -> tuple[float, float]:
        """(min, max) fidelity over the attractor: the last cycle if converged,
        otherwise the trailing ``window`` steps."""
        f = self.fidelities or [self.initial_fidelity]
        n = self.period if self.converged and self.period else (window or min(len(f), 64))
        tail = f[-n:]
        return min(tail), max(tail)

    @property
    def fixed_point_fidelity(self) -> float:
        return self.envelope()[1]

    @property
    def final_fidelity(self) -> float:
        return self.steps[-1].fidelity if self.steps else self.initial_fidelity


def _detect_period(f: list[float], tol: float) -> int | None:
    for t in range(1, MAX_PERIOD + 1):
        if len(f) < 2 * t + 1:
            break
        if all(abs(f[-1 - i] - f[-1 - i - t]) < tol for i in range(t)):
            return t
    return None


def epp_run(
    initial: DensityOperator,
    protocol: str = "improved",
    p: float = 1.0,
    max_iters: int = 200,
    conv_tol: float = 1e-9,
    symmetrize: bool | None = None,
) -> EppTrace:
    """Iterate greedy purification from ``initial``.

    Stops when the fidelity sequence repeats with period <= MAX_PERIOD to
    within ``conv_tol`` or after ``max_iters`` iterations. Party
    symmetrization of every iterate (default: on iff ``initial`` is
    party-symmetric) suppresses round-off growth along asymmetric directions
    that the exact map never leaves.
    """
    _check_protocol(protocol)
    check_strength(p)
    if not 1 <= max_iters <= 1000:
        raise ValueError("max_iters must lie in 1..1000")
    if conv_tol <= 0:
        raise ValueError("conv_tol must be positive")
    if symmetrize is None:
        symmetrize = is_party_symmetric(initial)
    state = initial
    trace = EppTrace(protocol, p, _fid(initial.matrix))
    resources = 1.0
    history: list[DensityOperator] = []
    for k in range(1, max_iters + 1):
        try:
            chosen, _ = select(state, protocol, p)
        except (DegenerateOutcomeError, ValueError) as exc:
            trace.failed_at = k
            trace.error = str(exc)
            break
        resources *= chosen.copies / chosen.eta
        state = symmetrize_parties(chosen.state) if symmetrize else chosen.state
        trace.steps.append(EppStep(k, chosen.tag, _fid(state.matrix), chosen.eta, chosen.copies, resources))
        history.append(state)
        del history[: -MAX_PERIOD]
        period = _detect_period(trace.fidelities, conv_tol)
        if period is not None:
            trace.converged = True
            trace.period = period
            trace.cycle_states = history[-period:]
            break
    trace.final_state = state
    if not trace.cycle_states:
        trace.cycle_states = [state]
    return trace


def depolarized_w_with_fidelity(fidelity: float) -> DensityOperator:
    """Member of the locally depolarized W family with the given fidelity (>= 1/8)."""
    if not 1 / 8 <= fidelity <= 1:
        raise ValueError("depolarized W fidelities lie in [1/8, 1]")
    return depolarized_w(_q_for_fidelity(fidelity))


def w_family_fidelity(q: float) -> float:
    return _fid(depolarized_w(q).matrix)


def _q_for_fidelity(fidelity: float) -> float:
    from scipy.optimize import brentq

    if fidelity >= 1:
        return 1.0
    if fidelity <= 1 / 8:
        return 0.0
    return brentq(lambda q: w_family_fidelity(q) - fidelity, 0.0, 1.0, xtol=1e-14)


@dataclass(frozen=True)
class Attractor:
    protocol: str
    p: float
    fidelity: float  # upper envelope
    low: float  # lower envelope
    converged: bool
    period: int | None
    state: DensityOperator = field(repr=False)  # iterate at the upper envelope
    trace: EppTrace = field(repr=False)


HIGH_START_FIDELITY = 0.95
LOW_START_FIDELITY = 0.3


def epp_attractor(
    protocol: str,
    p: float = 1.0,
    start_fidelity: float = HIGH_START_FIDELITY,
    max_iters: int = 400,
    conv_tol: float = 1e-9,
) -> Attractor:
    """Attractor reached from a high-fidelity depolarized W start."""
    trace = epp_run(depolarized_w_with_fidelity(start_fidelity), protocol, p, max_iters, conv_tol)
    if trace.failed_at is not None and not trace.steps:
        raise NoFixedPointError(f"{protocol} at p={p}: {trace.error}")
    lo, hi = trace.envelope()
    if trace.converged:
        best = max(trace.cycle_states, key=lambda s: _fid(s.matrix))
    else:
        best = trace.final_state
    return Attractor(protocol, p, hi, lo, trace.converged, trace.period, best, trace)


def _low_attractor(protocol: str, p: float, max_iters: int, conv_tol: float) -> tuple[float, float]:
    """Envelope of the collapse attractor, reached from a low-fidelity depolarized W.

    I/8 itself is invariant under both protocols and is not used as reference.
    """
    tr = epp_run(depolarized_w_with_fidelity(LOW_START_FIDELITY), protocol, p, max_iters, conv_tol)
    return tr.envelope()


def epp_fixed_point(
    protocol: str,
    p: float = 1.0,
    max_iters: int = 400,
    conv_tol: float = 1e-9,
) -> float:
    """Maximum achievable fidelity F_max(p).

    Raises NoFixedPointError when the high-fidelity start ends on the same
    attractor as a low-fidelity start, i.e. there is no purification regime.
    """
    att = epp_attractor(protocol, p, max_iters=max_iters, conv_tol=conv_tol)
    low_lo, low_hi = _low_attractor(protocol, p, max_iters, conv_tol)
    if att.low <= low_hi + 1e-3:
        raise NoFixedPointError(
            f"{protocol} at p={p}: high start ends at F<={att.fidelity:.6f}, "
            f"indistinguishable from the collapse attractor (F<={low_hi:.6f})"
        )
    return att.fidelity


def is_purifiable(
    state: DensityOperator,
    protocol: str,
    p: float,
    target: Attractor,
    max_iters: int = 400,
    conv_tol: float = 1e-9,
    symmetrize: bool | None = None,
) -> bool:
    """True when greedy purification from ``state`` lands on ``target``.

    For a settled target the trajectory's final envelope must reach within
    1e-3 of the target's upper fidelity. For a target that never settled
    (bounded oscillation) it must end in the target's fidelity band.
    """
    tr = epp_run(state, protocol, p, max_iters, conv_tol, symmetrize)
    if tr.failed_at is not None:
        return False
    lo, hi = tr.envelope()
    if target.converged:
        return hi >= target.fidelity - 1e-3
    return hi >= target.low


def epp_threshold(
    protocol: str,
    p: float = 1.0,
    tol: float = 1e-4,
    max_iters: int = 400,
    conv_tol: float = 1e-9,
    attractor: Attractor | None = None,
) -> float:
    """Minimum required fidelity F^(P)(p) over the depolarized W family.

    Bisection in the family parameter until the bracketing fidelities differ by
    less than ``tol``; returns the purifiable end of the bracket.
    """
    _check_protocol(protocol)
    if tol < 1e-4:
        raise ValueError("tol must be >= 1e-4")
    if attractor is None:
        epp_fixed_point(protocol, p, max_iters, conv_tol)
        attractor = epp_attractor(protocol, p, max_iters=max_iters, conv_tol=conv_tol)

    def ok(q: float) -> bool:
        return is_purifiable(depolarized_w(q), protocol, p, attractor, max_iters, conv_tol)

    hi = _q_for_fidelity(min(attractor.fidelity, HIGH_START_FIDELITY))
    if not ok(hi):
        raise NoFixedPointError(f"{protocol} at p={p}: no purifiable member of the depolarized W family")
    lo = 0.0
    while w_family_fidelity(hi) - w_family_fidelity(lo) >= tol:
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return w_family_fidelity(hi)


def threshold_for_family(
    family: Callable[[float], DensityOperator],
    bracket: tuple[float, float],
    protocol: str,
    p: float,
    attractor: Attractor,
    tol: float = 1e-4,
    max_iters: int = 400,
) -> float:
    """Threshold fidelity for an arbitrary one-parameter family, purifiable at ``bracket[1]``."""
    lo, hi = bracket

    def fid(x: float) -> float:
        return _fid(family(x).matrix)

    def ok(x: float) -> bool:
        return is_purifiable(family(x), protocol, p, attractor, max_iters)

    if not ok(hi):
        raise NoFixedPointError("family is not purifiable at the upper bracket")
    if ok(lo):
        return fid(lo)
    while abs(fid(hi) - fid(lo)) >= tol:
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return fid(hi)


def noise_tolerance(
    protocol: str = "improved",
    p_bracket: tuple[float, float] = (0.95, 1.0),
    tol: float = 1e-4,
    max_iters: int = 400,
) -> float:
    """Smallest p (largest noise 1 - p) with a purifying attractor, by bisection."""
    lo, hi = p_bracket

    def has(p: float) -> bool:
        try:
            epp_fixed_point(protocol, p, max_iters)
            return True
        except NoFixedPointError:
            return False

    if not has(hi):
        raise NoFixedPointError(f"{protocol}: no purifying attractor even at p={hi}")
    if has(lo):
        return lo
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if has(mid):
            hi = mid
        else:
            lo = mid
    return hi


def cumulative_resources(steps: Sequence[EppStep]) -> float:
    return math.prod(s.copies / s.success_prob for s in steps)
