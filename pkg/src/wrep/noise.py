"""Local depolarizing noise.

``D(rho) = q rho + (1 - q)/4 * sum_k s_k rho s_k`` with ``s_k`` in {I, X, Z, Y}.
``q = 1`` is the identity channel, ``q = 0`` fully depolarizes the qubit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

from .linalg import DensityOperator, apply_local, hermitize
from .states import PAULIS, w_state


@dataclass(frozen=True)
class NoiseParams:
    q: float = 1.0  # channel / preparation
    p: float = 1.0  # operations

    def __post_init__(self):
        check_strength(self.q)
        check_strength(self.p)


def check_strength(strength: float) -> float:
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"depolarizing strength must lie in [0, 1], got {strength}")
    return strength


def depolarize_qubit(state: DensityOperator, target: Hashable, strength: float) -> DensityOperator:
    check_strength(strength)
    if strength == 1.0:
        return state
    w = (1.0 - strength) / 4.0
    acc = strength * state.matrix
    for s in PAULIS:
        acc = acc + w * apply_local(state, s, [target]).matrix
    return DensityOperator(state.labels, hermitize(acc))


def depolarize_register(
    state: DensityOperator, targets: Sequence[Hashable] | None, strength: float
) -> DensityOperator:
    """Independent depolarizing channel on each target (all qubits if ``targets`` is None)."""
    check_strength(strength)
    targets = state.labels if targets is None else targets
    for t in targets:
        state = depolarize_qubit(state, t, strength)
    return state


def depolarized_w(q: float, labels: Sequence[Hashable] = ("A", "B", "C")) -> DensityOperator:
    """D_q applied to every qubit of |W><W|."""
    return depolarize_register(DensityOperator.from_vector(labels, w_state()), None, q)
