"""Named states and operators: Bell and W states, the W basis, parity
projectors and the per-party operators used by the purification subroutines.

All operators are built directly from their defining formulas so matrix
entries (including global phases) are reproducible.
"""

from __future__ import annotations

from enum import Enum
from functools import lru_cache

import numpy as np

from .linalg import tensor_product

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

# Pauli ordering used by the depolarizing channel: identity, X, Z, Y
PAULIS = (I2, X, Z, Y)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
KET_PLUS = (KET0 + KET1) / np.sqrt(2)
KET_MINUS = (KET0 - KET1) / np.sqrt(2)

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
X3 = tensor_product(X, X, X)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def basis_ket(bits: str) -> np.ndarray:
    """Computational basis ket, e.g. ``basis_ket("011")``."""
    if not bits or any(b not in "01" for b in bits):
        raise ValueError(f"malformed bitstring {bits!r}")
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def embed(op: np.ndarray, position: int, n: int) -> np.ndarray:
    """Single-qubit ``op`` at ``position`` (0 = most significant) of ``n`` qubits."""
    mats = [I2] * n
    mats[position] = op
    return tensor_product(*mats)


def w_state() -> np.ndarray:
    """(|001> + |010> + |100>)/sqrt(3)."""
    return (basis_ket("001") + basis_ket("010") + basis_ket("100")) / np.sqrt(3)


BELL_NAMES = ("phi+", "phi-", "psi+", "psi-")


def bell_state(which: str) -> np.ndarray:
    aliases = {"φ+": "phi+", "φ-": "phi-", "ψ+": "psi+", "ψ-": "psi-"}
    which = aliases.get(which, which)
    if which not in BELL_NAMES:
        raise ValueError(f"unknown Bell state {which!r}; expected one of {BELL_NAMES}")
    a, b = ("00", "11") if which.startswith("phi") else ("01", "10")
    sign = 1 if which.endswith("+") else -1
    return (basis_ket(a) + sign * basis_ket(b)) / np.sqrt(2)


def w_basis_state(ijk: str) -> np.ndarray:
    """|W^{ijk}> = (Z2 X3 + Z1 X2 + X1 Z3)|ijk>/sqrt(3), qubit 1 most significant."""
    if len(ijk) != 3:
        raise ValueError(f"W-basis index must have 3 bits, got {ijk!r}")
    ket = basis_ket(ijk)
    gen = (
        tensor_product(I2, Z, X)
        + tensor_product(Z, X, I2)
        + tensor_product(X, I2, Z)
    )
    return gen @ ket / np.sqrt(3)


W_BASIS_INDICES = tuple(format(i, "03b") for i in range(8))
# success outcomes of the three-copy stabilizer subroutine
STABILIZER_SUCCESS = ("001", "010", "100")


def parity_projector(parity: str) -> np.ndarray:
    if parity in ("e", "even"):
        return projector(basis_ket("00")) + projector(basis_ket("11"))
    if parity in ("o", "odd"):
        return projector(basis_ket("01")) + projector(basis_ket("10"))
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


class EppOp(str, Enum):
    M = "M"
    N = "N"
    MBAR = "Mbar_000"
    NBAR = "Nbar"
    V = "V"
    LAMBDA = "Lambda"
    PTILDE_E = "Ptilde_e"


def _m(ijk: str) -> np.ndarray:
    w = w_basis_state(ijk)
    return projector(w) + X3 @ projector(w) @ X3


def _n(ijk: str) -> np.ndarray:
    w = w_basis_state(ijk)
    return np.outer(KET0, w.conj()) + np.outer(KET1, w.conj()) @ X3


def _v() -> np.ndarray:
    d = basis_ket("000") - basis_ket("111")
    return X3 + np.outer(d, d.conj())


def _lambda() -> np.ndarray:
    # H1 H2 H3 SWAP_{1,3}; SWAP_{1,3} on three qubits exchanges the outer slots
    swap13 = np.zeros((8, 8), dtype=complex)
    for i in range(8):
        b = format(i, "03b")
        swap13[int(b[2] + b[1] + b[0], 2), i] = 1
    return tensor_product(H, H, H) @ swap13


@lru_cache(maxsize=None)
def _build(kind: EppOp, index: str | None) -> np.ndarray:
    if kind is EppOp.M:
        return _frozen(_m(index))
    if kind is EppOp.N:
        return _frozen(_n(index))
    if kind is EppOp.V:
        return _frozen(_v())
    if kind is EppOp.LAMBDA:
        return _frozen(_lambda())
    if kind is EppOp.MBAR:
        lam = _lambda()
        return _frozen(lam.conj().T @ _m("000") @ lam)
    if kind is EppOp.NBAR:
        bra = np.outer(KET_PLUS, w_basis_state("111").conj()) - np.outer(
            KET_MINUS, w_basis_state("000").conj()
        )
        return _frozen(bra @ _lambda() @ _v())
    if kind is EppOp.PTILDE_E:
        return _frozen(np.outer(KET0, basis_ket("00")) + np.outer(KET1, basis_ket("11")))
    raise ValueError(f"unknown operator kind {kind!r}")


def build_epp_operator(kind: EppOp | str, index: str | None = None) -> np.ndarray:
    """Per-party operator used by the purification subroutines.

    ``M``/``N`` take a W-basis index ``ijk``; every other kind takes none.
    Returned arrays are read-only and cached.
    """
    kind = EppOp(kind)
    indexed = kind in (EppOp.M, EppOp.N)
    if indexed != (index is not None):
        raise ValueError(f"{kind.value} {'requires' if indexed else 'takes no'} index")
    if indexed and index not in W_BASIS_INDICES:
        raise ValueError(f"malformed W-basis index {index!r}")
    return _build(kind, index)
