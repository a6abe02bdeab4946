"""Entanglement swapping of three 3-qubit W states into one longer-distance W state.

Copy ``i`` holds qubits ``(l_i, u_i, r_i)``, stored copy-major. The three
repeater stations measure the pairs ``(r1, l3)``, ``(u1, l2)`` and ``(r2, u3)``;
the surviving qubits ``(l1, u2, r3)`` carry the output state.

First-step parity outcomes come in three cyclic arrangements. The
representative arrangement (odd, odd, even on the three pairs, or its
complement even, even, odd) is simulated directly; the other two are its
images under the relabeling that rotates the triangle copy 1 -> 2 -> 3 -> 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .linalg import (
    DensityOperator,
    QubitLabel,
    apply_local,
    fidelity_with_pure,
    partial_trace,
    permute_qubits,
    qubits,
    tensor_product,
    tensor_states,
)
from .noise import check_strength, depolarize_register, depolarized_w
from .states import PAULI, basis_ket, bell_state, parity_projector, projector, w_state

REGISTER = qubits("l1", "u1", "r1", "l2", "u2", "r2", "l3", "u3", "r3")
PAIRS = (qubits("r1", "l3"), qubits("u1", "l2"), qubits("r2", "u3"))
OUTPUT = qubits("l1", "u2", "r3")
SUCCESS_PROBABILITY = 2 / 3
IDENTICAL_TOL = 1e-12
DEGENERATE_TOL = 1e-12

# triangle rotation: copy 1 -> 2 -> 3 -> 1, stations and outputs map onto themselves
ROTATION = dict(
    zip(
        qubits("l1", "u1", "r1", "l2", "u2", "r2", "l3", "u3", "r3"),
        qubits("u2", "r2", "l2", "u3", "r3", "l3", "u1", "r1", "l1"),
    )
)


class DegenerateSwapError(ArithmeticError):
    """No branch of the swapping protocol has appreciable probability."""


def _bell(name: str) -> np.ndarray:
    return projector(bell_state(name))


# (pair projectors on PAIRS, correction Paulis on OUTPUT)
_BRANCH_TABLE = {
    1: (("psi+", "psi+", "e"), "III"),
    2: (("psi+", "psi-", "e"), "IZI"),
    3: (("psi-", "psi+", "e"), "IIZ"),
    4: (("psi-", "psi-", "e"), "ZII"),
    5: (("00", "phi+", "psi+"), "XII"),
    6: (("00", "phi+", "psi-"), "YZI"),
    7: (("00", "phi-", "psi+"), "YII"),
    8: (("00", "phi-", "psi-"), "XZI"),
}


def _pair_projector(name: str) -> np.ndarray:
    if name == "e":
        return parity_projector("even")
    if name in ("00", "01", "10", "11"):
        return projector(basis_ket(name))
    return _bell(name)


@dataclass(frozen=True)
class SwapBranch:
    j: int
    pairs: tuple[tuple[QubitLabel, QubitLabel], ...]
    projectors: tuple[np.ndarray, ...] = field(repr=False)
    output: tuple[QubitLabel, ...]
    correction: np.ndarray = field(repr=False)
    correction_name: str

    @property
    def pattern(self) -> tuple[str, str, str]:
        """First-step parity outcome on the three pairs."""
        return ("o", "o", "e") if self.j <= 4 else ("e", "e", "o")

    @property
    def operator(self) -> np.ndarray:
        """O^(j) as a 64x64 matrix on the flattened pairs, first pair most significant."""
        return tensor_product(*self.projectors)

    def rotated(self, times: int = 1) -> "SwapBranch":
        pairs, output = self.pairs, self.output
        for _ in range(times % 3):
            pairs = tuple(tuple(ROTATION[q] for q in pr) for pr in pairs)
            output = tuple(ROTATION[q] for q in output)
        return SwapBranch(self.j, pairs, self.projectors, output, self.correction, self.correction_name)


@lru_cache(maxsize=None)
def build_branch(j: int) -> SwapBranch:
    """Measurement projector O^(j) and Pauli correction C^(j) for success branch ``j``."""
    if j not in _BRANCH_TABLE:
        raise ValueError(f"branch index must be in 1..8, got {j}")
    names, corr = _BRANCH_TABLE[j]
    projs = tuple(_pair_projector(n) for n in names)
    for p in projs:
        p.setflags(write=False)
    c = tensor_product(*(PAULI[c] for c in corr))
    c.setflags(write=False)
    return SwapBranch(j, PAIRS, projs, OUTPUT, c, corr)


def _branch_output(rho: DensityOperator, branch: SwapBranch) -> tuple[float, np.ndarray]:
    """(probability, unnormalized corrected state on OUTPUT order) for one branch.

    The register is reordered as (output qubits, measured pairs), so the
    reduced post-measurement state is tr_pairs(O rho O) = sum_cd rho[x c, y d] O[d, c]
    for the projector O on the pairs.
    """
    order = list(branch.output) + [q for pair in branch.pairs for q in pair]
    blocks = permute_qubits(rho, order).matrix.reshape(8, 64, 8, 64)
    reduced = np.einsum("xcyd,dc->xy", blocks, branch.operator)
    weight = float(np.real(np.trace(reduced)))
    c = branch.correction
    corrected = DensityOperator(branch.output, c @ reduced @ c.conj().T)
    # back to the physical (l1, u2, r3) slot order
    corrected = permute_qubits(corrected, OUTPUT) if branch.output != OUTPUT else corrected
    return weight, corrected.matrix


@dataclass(frozen=True)
class SwapResult:
    success_probability: float
    state: DensityOperator
    branch_probabilities: tuple[float, ...]
    fidelity: float
    all_patterns: bool = False


def joint_register(inputs: Sequence[DensityOperator]) -> DensityOperator:
    if len(inputs) != 3:
        raise ValueError(f"swapping needs exactly three input states, got {len(inputs)}")
    for s in inputs:
        if s.n_qubits != 3:
            raise ValueError("every swapping input must be a 3-qubit state")
        if not s.is_valid():
            raise ValueError("swapping input is not a valid density operator")
    return tensor_states(*(s.relabel(REGISTER[3 * i : 3 * i + 3]) for i, s in enumerate(inputs)))


def _identical(inputs: Sequence[DensityOperator]) -> bool:
    m0 = inputs[0].matrix
    return all(np.max(np.abs(s.matrix - m0)) < IDENTICAL_TOL for s in inputs[1:])


def swap(
    inputs: Sequence[DensityOperator],
    p: float = 1.0,
    all_patterns: bool | None = None,
) -> SwapResult:
    """Merge three W-like states into one over twice the distance.

    Operational noise of strength ``p`` hits every input qubit first. With
    identical inputs only the representative outcome arrangement is simulated
    and its probability is tripled; pass ``all_patterns=True`` (forced for
    non-identical inputs) to enumerate the three arrangements explicitly.

    The output is relabeled to the register of ``inputs[0]`` in the order
    ``l1 -> slot 0``, ``u2 -> slot 1``, ``r3 -> slot 2``.
    """
    check_strength(p)
    inputs = [depolarize_register(s, None, p) for s in inputs]
    rho = joint_register(inputs)
    if all_patterns is None:
        all_patterns = not _identical(inputs)
    elif not all_patterns and not _identical(inputs):
        raise ValueError("the symmetric shortcut requires three identical input copies")

    rotations = (0, 1, 2) if all_patterns else (0,)
    probs = []
    acc = np.zeros((8, 8), dtype=complex)
    for k in rotations:
        for j in range(1, 9):
            w, m = _branch_output(rho, build_branch(j).rotated(k))
            probs.append(w)
            acc += m
    total = float(sum(probs))
    if total < DEGENERATE_TOL:
        raise DegenerateSwapError(f"total branch probability {total:.3e} is degenerate")
    out = DensityOperator(inputs[0].labels, (acc + acc.conj().T) / (2 * total))
    p_succ = total if all_patterns else 3 * total
    return SwapResult(
        success_probability=p_succ,
        state=out,
        branch_probabilities=tuple(probs),
        fidelity=fidelity_with_pure(out, w_state()),
        all_patterns=all_patterns,
    )


def branch_states(inputs: Sequence[DensityOperator], p: float = 1.0) -> list[tuple[int, float, DensityOperator | None]]:
    """Per-branch (j, probability, normalized corrected state) for the representative arrangement."""
    inputs = [depolarize_register(s, None, p) for s in inputs]
    rho = joint_register(inputs)
    out = []
    for j in range(1, 9):
        w, m = _branch_output(rho, build_branch(j))
        out.append((j, w, DensityOperator(OUTPUT, m / w) if w > DEGENERATE_TOL else None))
    return out


@dataclass(frozen=True)
class Outcome:
    pattern: tuple[str, str, str]  # parity seen on PAIRS
    detail: tuple[str, ...]  # second-step outcomes, empty for failed patterns
    probability: float
    success: bool


_BELL_NAMES = ("phi+", "phi-", "psi+", "psi-")
_COMP_NAMES = ("00", "01", "10", "11")


def outcome_tree(inputs: Sequence[DensityOperator], p: float = 1.0) -> list[Outcome]:
    """Every measurement record of the protocol with its probability.

    Patterns with two odd pairs Bell-measure those pairs; patterns with two even
    pairs measure one even pair in the computational basis (the pair playing the
    ``(r1, l3)`` role after rotation) and Bell-measure the other two. All-odd
    and all-even patterns abort. Probabilities sum to the input weight.
    """
    from itertools import product

    inputs = [depolarize_register(s, None, p) for s in inputs]
    rho = joint_register(inputs)
    # every record is a projector on the pairs, so the pair marginal suffices
    pair_qubits = [q for pair in PAIRS for q in pair]
    pairs = permute_qubits(partial_trace(rho, pair_qubits), pair_qubits).matrix
    parity = {"e": parity_projector("even"), "o": parity_projector("odd")}

    def prob(projs: Sequence[np.ndarray]) -> float:
        return float(np.real(np.sum(tensor_product(*projs) * pairs.T)))

    out = []
    for pattern in product("oe", repeat=3):
        n_odd = pattern.count("o")
        if n_odd in (0, 3):
            out.append(Outcome(pattern, (), prob([parity[x] for x in pattern]), False))
            continue
        if n_odd == 2:
            bases = [_BELL_NAMES if par == "o" else None for par in pattern]
        else:
            # the even pair preceding the odd one cyclically is read out in the computational basis
            odd = pattern.index("o")
            comp = (odd + 1) % 3
            bases = [_COMP_NAMES if i == comp else _BELL_NAMES for i in range(3)]
        measured = [i for i in range(3) if bases[i] is not None]
        for names in product(*(bases[i] for i in measured)):
            chosen = dict(zip(measured, names))
            projs = [
                parity[par] @ _pair_projector(chosen[i]) if i in chosen else parity[par]
                for i, par in enumerate(pattern)
            ]
            out.append(Outcome(pattern, tuple(names), prob(projs), _is_success(pattern, chosen)))
    return out


def _is_success(pattern: tuple[str, ...], names: dict[int, str]) -> bool:
    if pattern.count("o") == 2:
        return all(n.startswith("psi") for n in names.values())
    for i, n in names.items():
        if n in _COMP_NAMES:
            if n != "00":
                return False
        elif pattern[i] == "e" and not n.startswith("phi"):
            return False
        elif pattern[i] == "o" and not n.startswith("psi"):
            return False
    return True


@dataclass(frozen=True)
class RelayRow:
    n: int
    distance: int
    fidelity: float
    success_prob: float


def relay_simulate(q: float, p: float = 1.0, n_max: int = 10, f_stop: float = 0.465) -> list[RelayRow]:
    """Nested swapping without purification, starting from locally depolarized W states.

    One row per round; the round whose fidelity first drops below ``f_stop``
    is recorded and ends the run.
    """
    check_strength(q)
    check_strength(p)
    if not 0 <= n_max <= 12:
        raise ValueError(f"n_max must lie in 0..12, got {n_max}")
    state = depolarized_w(q)
    rows = []
    for n in range(1, n_max + 1):
        res = swap([state] * 3, p)
        state = res.state
        rows.append(RelayRow(n, 2**n, res.fidelity, res.success_probability))
        if res.fidelity < f_stop:
            break
    return rows


def achievable_rounds(q: float, p: float = 1.0, n_max: int = 12, f_stop: float = 0.465) -> int:
    """Number of rounds whose output fidelity stays at or above ``f_stop``."""
    return sum(1 for r in relay_simulate(q, p, n_max, f_stop) if r.fidelity >= f_stop)


def relay_resources(n: int, p_succ: float = SUCCESS_PROBABILITY) -> tuple[float, float]:
    """(total elementary copies, copies per segment) after ``n`` noiseless doublings.

    Total follows R_L = 3 R_{L/2} / p_succ with R_l = 1; the per-segment count
    is that total divided by the 3**n elementary segments feeding one output,
    computed directly as (1/p_succ)**n to avoid rounding in the division.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    return (3 / p_succ) ** n, (1 / p_succ) ** n
