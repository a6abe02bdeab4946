"""Dense density-matrix kernels over labeled qubit registers.

States are stored as ``2**n x 2**n`` complex arrays whose tensor slots follow
the order of ``DensityOperator.labels`` (first label = most significant bit).
Every operation returns a new object; nothing is mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, NamedTuple, Sequence

import numpy as np

HERM_TOL = 1e-9
PSD_TOL = 1e-9
EMPTY_BRANCH = 1e-12
MAX_QUBITS = 10


class LabelError(KeyError):
    """Unknown, duplicated or otherwise invalid qubit label."""


class DimensionError(ValueError):
    """Operator or vector dimension does not fit its targets."""


class QubitLabel(NamedTuple):
    copy: int
    pos: str

    def __str__(self) -> str:
        return f"{self.pos}{self.copy}"


def qubits(*names: str) -> tuple[QubitLabel, ...]:
    """Shorthand: ``qubits("l1", "u2")`` -> ``(QubitLabel(1, "l"), QubitLabel(2, "u"))``."""
    return tuple(QubitLabel(int(n[1:]), n[0]) for n in names)


@dataclass(frozen=True)
class DensityOperator:
    """Density matrix over an ordered register of qubit labels.

    The matrix may be unnormalized; its trace is then the branch weight.
    """

    labels: tuple[Hashable, ...]
    matrix: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate labels in register {labels}")
        if len(labels) > MAX_QUBITS:
            raise DimensionError(f"{len(labels)} qubits exceeds the {MAX_QUBITS}-qubit ceiling")
        m = np.array(self.matrix, dtype=complex)
        dim = 2 ** len(labels)
        if m.shape != (dim, dim):
            raise DimensionError(f"matrix shape {m.shape} does not match {len(labels)} qubits")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_vector(cls, labels: Sequence[Hashable], vec: np.ndarray) -> "DensityOperator":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        return cls(tuple(labels), np.outer(v, v.conj()))

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return 2 ** len(self.labels)

    @property
    def weight(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def normalized(self) -> "DensityOperator":
        w = self.weight
        if w < EMPTY_BRANCH:
            raise ValueError(f"cannot normalize a state of weight {w:.3e}")
        return DensityOperator(self.labels, self.matrix / w)

    def relabel(self, labels: Sequence[Hashable]) -> "DensityOperator":
        """Rename tensor slots without touching the matrix."""
        return DensityOperator(tuple(labels), self.matrix)

    def index(self, label: Hashable) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"label {label!r} not in register {self.labels}") from None

    def is_valid(self, tol: float = HERM_TOL) -> bool:
        """Hermitian, unit trace and PSD within ``tol``."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > tol:
            return False
        if abs(np.trace(m) - 1) > tol:
            return False
        return bool(np.min(np.linalg.eigvalsh((m + m.conj().T) / 2)) >= -PSD_TOL)


def hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def clamp_psd(state: DensityOperator) -> DensityOperator:
    """Zero out eigenvalues in [-PSD_TOL, 0); anything more negative is an error."""
    m = hermitize(state.matrix)
    vals, vecs = np.linalg.eigh(m)
    if vals.min() < -PSD_TOL:
        raise ValueError(f"state has eigenvalue {vals.min():.3e} below -{PSD_TOL}")
    if vals.min() >= 0:
        return DensityOperator(state.labels, m)
    vals = np.where(vals < 0, 0.0, vals)
    return DensityOperator(state.labels, (vecs * vals) @ vecs.conj().T)


def tensor_product(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product, leftmost factor most significant."""
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def tensor_states(*states: DensityOperator) -> DensityOperator:
    labels: tuple = ()
    for s in states:
        labels += s.labels
    return DensityOperator(labels, tensor_product(*(s.matrix for s in states)))


def _as_tensor(state: DensityOperator) -> np.ndarray:
    n = state.n_qubits
    return state.matrix.reshape((2,) * (2 * n))


def _target_indices(state: DensityOperator, targets: Sequence[Hashable]) -> list[int]:
    idx = [state.index(t) for t in targets]
    if len(set(idx)) != len(idx):
        raise LabelError(f"repeated target labels {tuple(targets)}")
    return idx


def partial_trace(state: DensityOperator, keep: Sequence[Hashable]) -> DensityOperator:
    """Trace out every qubit not in ``keep``; survivors keep their register order."""
    keep_set = set(keep)
    for k in keep_set:
        state.index(k)
    n = state.n_qubits
    kept = [i for i, lab in enumerate(state.labels) if lab in keep_set]
    traced = [i for i in range(n) if i not in kept]
    t = _as_tensor(state)
    # bring kept row/col axes forward, traced axes last, then contract traced pairs
    t = t.transpose(kept + [n + i for i in kept] + traced + [n + i for i in traced])
    dk, dt = 2 ** len(kept), 2 ** len(traced)
    t = t.reshape(dk, dk, dt, dt)
    reduced = np.einsum("abcc->ab", t)
    return DensityOperator(tuple(state.labels[i] for i in kept), reduced)


def permute_qubits(state: DensityOperator, new_order: Sequence[Hashable]) -> DensityOperator:
    """Reorder tensor slots so the register reads ``new_order``."""
    new_order = tuple(new_order)
    if len(new_order) != state.n_qubits or set(new_order) != set(state.labels):
        raise LabelError(f"{new_order} is not a permutation of {state.labels}")
    perm = [state.index(lab) for lab in new_order]
    if perm == list(range(state.n_qubits)):
        return state
    n = state.n_qubits
    t = _as_tensor(state).transpose(perm + [n + i for i in perm])
    return DensityOperator(new_order, t.reshape(state.dim, state.dim))


def apply_local(
    state: DensityOperator,
    op: np.ndarray,
    targets: Sequence[Hashable],
    out_labels: Sequence[Hashable] | None = None,
) -> DensityOperator:
    """Sandwich ``O rho O^dagger`` with ``op`` acting on ``targets``.

    ``op`` may be rectangular (``2**k x 2**m`` for ``m`` targets), in which case the
    targets are replaced by ``out_labels`` at the slot of the first target. The
    result is not renormalized.
    """
    op = np.asarray(op, dtype=complex)
    idx = _target_indices(state, targets)
    m = len(idx)
    rows, cols = op.shape
    if cols != 2**m:
        raise DimensionError(f"operator with {cols} columns cannot act on {m} qubits")
    if out_labels is None:
        if rows != cols:
            raise DimensionError("rectangular operator needs out_labels")
        out_labels = tuple(targets)
    out_labels = tuple(out_labels)
    if rows != 2 ** len(out_labels):
        raise DimensionError(f"operator with {rows} rows cannot produce {len(out_labels)} qubits")

    n = state.n_qubits
    rest = [i for i in range(n) if i not in idx]
    t = _as_tensor(state).transpose(idx + rest + [n + i for i in idx] + [n + i for i in rest])
    dr = 2 ** len(rest)
    t = t.reshape(cols, dr, cols, dr)
    out = np.einsum("ai,ixjy,bj->axby", op, t, op.conj(), optimize=True)

    k = len(out_labels)
    if rows == cols and out_labels == tuple(targets):
        order = list(idx) + rest
        labels = state.labels
    else:
        first = min(idx)
        rest_labels = [state.labels[i] for i in rest]
        insert_at = sum(1 for i in rest if i < first)
        labels = tuple(rest_labels[:insert_at]) + out_labels + tuple(rest_labels[insert_at:])
        order = list(range(insert_at, insert_at + k)) + [
            i for i in range(len(labels)) if not insert_at <= i < insert_at + k
        ]
    n_out = len(labels)
    out = out.reshape((2,) * (2 * n_out))
    inv = np.argsort(order)
    out = out.transpose(list(inv) + [n_out + i for i in inv])
    d = 2**n_out
    return DensityOperator(tuple(labels), hermitize(out.reshape(d, d)))


def apply_unitary(state: DensityOperator, op: np.ndarray, targets: Sequence[Hashable]) -> DensityOperator:
    return apply_local(state, op, targets)


@dataclass(frozen=True)
class BranchResult:
    label: object
    probability: float
    state: DensityOperator | None  # None when the branch is empty


def measure(
    state: DensityOperator,
    projectors: Sequence[np.ndarray],
    targets: Sequence[Hashable],
    labels: Sequence[object] | None = None,
) -> list[BranchResult]:
    """Projective measurement on ``targets``; one branch per projector."""
    d = 2 ** len(targets)
    total = np.zeros((d, d), dtype=complex)
    for p in projectors:
        total = total + np.asarray(p, dtype=complex)
    if np.max(np.abs(total - np.eye(d))) > HERM_TOL:
        raise ValueError("projectors do not sum to the identity")
    labels = list(range(len(projectors))) if labels is None else list(labels)
    out = []
    for lab, p in zip(labels, projectors):
        branch = apply_local(state, p, targets)
        w = branch.weight
        post = branch.normalized() if w >= EMPTY_BRANCH else None
        out.append(BranchResult(lab, w, post))
    return out


def fidelity_with_pure(state: DensityOperator, target: np.ndarray) -> float:
    """<psi| rho |psi> for a normalized ket ``target``."""
    psi = np.asarray(target, dtype=complex).reshape(-1)
    if psi.shape[0] != state.dim:
        raise DimensionError(f"target of length {psi.shape[0]} vs state dim {state.dim}")
    if abs(np.vdot(psi, psi) - 1) > HERM_TOL:
        raise ValueError("target vector is not normalized")
    val = np.vdot(psi, state.matrix @ psi)
    if abs(val.imag) > HERM_TOL:
        raise ValueError(f"fidelity has imaginary part {val.imag:.3e}; state not Hermitian")
    return float(val.real)
