"""Reference computations written independently of the package.

Everything here works on plain numpy arrays with qubit 0 as the most
significant bit. Nothing is imported from ``wrep``.
"""

from __future__ import annotations

import itertools
from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = [I2, X, Y, Z]


def kron(*ops):
    return reduce(np.kron, ops)


def ket(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1
    return v


W = (ket("001") + ket("010") + ket("100")) / np.sqrt(3)
PHI_P = (ket("00") + ket("11")) / np.sqrt(2)
PHI_M = (ket("00") - ket("11")) / np.sqrt(2)
PSI_P = (ket("01") + ket("10")) / np.sqrt(2)
PSI_M = (ket("01") - ket("10")) / np.sqrt(2)


def proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


# ---------------------------------------------------------------- noise

def kraus_weights(q: float) -> list[float]:
    """Weights of I, X, Y, Z for the trace-preserving channel q rho + (1-q)/4 sum sigma rho sigma."""
    return [q + (1 - q) / 4, (1 - q) / 4, (1 - q) / 4, (1 - q) / 4]


def kraus_depolarize_1(rho: np.ndarray, q: float) -> np.ndarray:
    """Four-term Kraus sum on a single qubit."""
    return sum(w * s @ rho @ s.conj().T for w, s in zip(kraus_weights(q), PAULIS))


def kraus_depolarize_3(rho: np.ndarray, q: float) -> np.ndarray:
    """All 64 Kraus operators sqrt(w_i w_j w_k) s_i x s_j x s_k on three qubits."""
    w = kraus_weights(q)
    out = np.zeros((8, 8), dtype=complex)
    for i, j, k in itertools.product(range(4), repeat=3):
        K = np.sqrt(w[i] * w[j] * w[k]) * kron(PAULIS[i], PAULIS[j], PAULIS[k])
        out += K @ rho @ K.conj().T
    return out


def depolarize_qubit_dense(rho: np.ndarray, target: int, n: int, q: float) -> np.ndarray:
    w = kraus_weights(q)
    out = np.zeros_like(rho)
    for wi, s in zip(w, PAULIS):
        K = kron(*[s if m == target else I2 for m in range(n)])
        out += wi * K @ rho @ K.conj().T
    return out


def depolarized_w_fidelity(q: float) -> float:
    """Closed form of <W| D_q^{x3}(|W><W|) |W>, expanded over depolarized subsets.

    A depolarized subset S contributes <W| tr_S(W) x I_S/2^|S| |W>, which is
    1, 5/18, 5/36 and 1/8 for |S| = 0, 1, 2, 3.
    """
    return q**3 + 3 * q**2 * (1 - q) * 5 / 18 + 3 * q * (1 - q) ** 2 * 5 / 36 + (1 - q) ** 3 / 8


# ---------------------------------------------------------------- qubit shuffling

def permutation_matrix(order: list[int]) -> np.ndarray:
    """P with P|b_0 ... b_{n-1}> = |b_order[0] ... b_order[n-1]>, built bit by bit."""
    n = len(order)
    P = np.zeros((2**n, 2**n))
    for i in range(2**n):
        bits = format(i, f"0{n}b")
        P[int("".join(bits[o] for o in order), 2), i] = 1
    return P


def op_on(op: np.ndarray, targets: list[int], n: int) -> np.ndarray:
    """Embed ``op`` (acting on ``targets`` in that order) into n qubits."""
    rest = [m for m in range(n) if m not in targets]
    order = list(targets) + rest
    P = permutation_matrix(order)
    full = np.kron(op, np.eye(2 ** len(rest)))
    return P.T @ full @ P


def partial_trace_loop(rho: np.ndarray, keep: list[int], n: int) -> np.ndarray:
    """Reduced state on ``keep`` by explicit summation over basis labels."""
    k = len(keep)
    out = np.zeros((2**k, 2**k), dtype=complex)
    for a in range(2**n):
        ba = format(a, f"0{n}b")
        for b in range(2**n):
            bb = format(b, f"0{n}b")
            if any(ba[m] != bb[m] for m in range(n) if m not in keep):
                continue
            out[int("".join(ba[m] for m in keep), 2), int("".join(bb[m] for m in keep), 2)] += rho[a, b]
    return out


# ---------------------------------------------------------------- swapping

# qubits of three copies, copy by copy: l1 u1 r1 l2 u2 r2 l3 u3 r3
Q = {name: i for i, name in enumerate(["l1", "u1", "r1", "l2", "u2", "r2", "l3", "u3", "r3"])}
P_EVEN = proj(ket("00")) + proj(ket("11"))

BRANCHES = {
    1: ([(PSI_P, "r1", "l3"), (PSI_P, "u1", "l2"), (P_EVEN, "r2", "u3")], {}),
    2: ([(PSI_P, "r1", "l3"), (PSI_M, "u1", "l2"), (P_EVEN, "r2", "u3")], {"u2": Z}),
    3: ([(PSI_M, "r1", "l3"), (PSI_P, "u1", "l2"), (P_EVEN, "r2", "u3")], {"r3": Z}),
    4: ([(PSI_M, "r1", "l3"), (PSI_M, "u1", "l2"), (P_EVEN, "r2", "u3")], {"l1": Z}),
    5: ([(ket("00"), "r1", "l3"), (PHI_P, "u1", "l2"), (PSI_P, "r2", "u3")], {"l1": X}),
    6: ([(ket("00"), "r1", "l3"), (PHI_P, "u1", "l2"), (PSI_M, "r2", "u3")], {"l1": Y, "u2": Z}),
    7: ([(ket("00"), "r1", "l3"), (PHI_M, "u1", "l2"), (PSI_P, "r2", "u3")], {"l1": Y}),
    8: ([(ket("00"), "r1", "l3"), (PHI_M, "u1", "l2"), (PSI_M, "r2", "u3")], {"l1": X, "u2": Z}),
}
KEEP = [Q["l1"], Q["u2"], Q["r3"]]


def branch_operator(j: int) -> np.ndarray:
    ops, _ = BRANCHES[j]
    O = np.eye(512, dtype=complex)
    for item, a, b in ops:
        P2 = item if item.ndim == 2 else proj(item)
        O = op_on(P2, [Q[a], Q[b]], 9) @ O
    return O


def correction(j: int) -> np.ndarray:
    _, corr = BRANCHES[j]
    return kron(*[corr.get(name, I2) for name in ("l1", "u2", "r3")])


def swap_dense(rho3: np.ndarray) -> tuple[float, np.ndarray, list[float]]:
    """Representative-arrangement swap of a 512x512 register state.

    Returns (3 * sum of branch weights, normalized corrected mixture on l1 u2 r3,
    branch weights).
    """
    acc = np.zeros((8, 8), dtype=complex)
    weights = []
    for j in range(1, 9):
        O = branch_operator(j)
        out = O @ rho3 @ O.conj().T
        w = float(np.real(np.trace(out)))
        weights.append(w)
        red = partial_trace_loop_fast(out, KEEP, 9)
        C = correction(j)
        acc += C @ red @ C.conj().T
    total = sum(weights)
    return 3 * total, acc / total, weights


def partial_trace_loop_fast(rho: np.ndarray, keep: list[int], n: int) -> np.ndarray:
    """Same as ``partial_trace_loop`` but vectorized by reordering with a permutation matrix."""
    rest = [m for m in range(n) if m not in keep]
    P = permutation_matrix(list(keep) + rest)
    r = P @ rho @ P.T
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    return np.trace(r.reshape(dk, dr, dk, dr), axis1=1, axis2=3)


# ---------------------------------------------------------------- purification operators

def w_basis(ijk: str) -> np.ndarray:
    """|W^{ijk}> = (Z_2 X_3 + Z_1 X_2 + X_1 Z_3)|ijk> / sqrt(3)."""
    op = kron(I2, Z, X) + kron(Z, X, I2) + kron(X, I2, Z)
    return op @ ket(ijk) / np.sqrt(3)


X3 = kron(X, X, X)


def M_op(ijk: str) -> np.ndarray:
    v = w_basis(ijk)
    return proj(v) + X3 @ proj(v) @ X3


def N_op(ijk: str) -> np.ndarray:
    v = w_basis(ijk).conj()
    return np.outer(ket("0"), v) + np.outer(ket("1"), v @ X3)


def V_op() -> np.ndarray:
    d = ket("000") - ket("111")
    return X3 + np.outer(d, d)


def Lambda_op() -> np.ndarray:
    # H on all three copy-qubits after exchanging copies 1 and 3
    return kron(H, H, H) @ permutation_matrix([2, 1, 0])


def Nbar_op() -> np.ndarray:
    plus = (ket("0") + ket("1")) / np.sqrt(2)
    minus = (ket("0") - ket("1")) / np.sqrt(2)
    return (np.outer(plus, w_basis("111").conj()) - np.outer(minus, w_basis("000").conj())) @ Lambda_op() @ V_op()


def party_major_perm(copies: int) -> np.ndarray:
    """Permutation taking copy-major (A1 B1 C1 A2 ...) to party-major (A1 A2 .. B1 B2 .. C1 ..)."""
    order = [c * 3 + party for party in range(3) for c in range(copies)]
    return permutation_matrix(order)


def subroutine_dense(rho: np.ndarray, local_ops: list[np.ndarray]) -> tuple[float, np.ndarray]:
    """Apply sum over branches of A x B x C party-local maps on rho^{x copies}.

    ``local_ops`` lists, per branch, the per-party map (same for every party).
    Returns (eta, normalized 3-qubit output).
    """
    copies = int(round(np.log2(local_ops[0].shape[1])))
    big = kron(*[rho] * copies)
    P = party_major_perm(copies)
    big = P @ big @ P.T
    out = np.zeros((8, 8), dtype=complex)
    for L in local_ops:
        K = kron(L, L, L)
        out += K @ big @ K.conj().T
    eta = float(np.real(np.trace(out)))
    return eta, out / eta


def p_dense(rho: np.ndarray) -> tuple[float, np.ndarray]:
    return subroutine_dense(rho, [N_op(s) for s in ("001", "010", "100")])


def pbar_dense(rho: np.ndarray) -> tuple[float, np.ndarray]:
    return subroutine_dense(rho, [Nbar_op()])


def pprime_dense(rho: np.ndarray) -> tuple[float, np.ndarray]:
    pe = np.outer(ket("0"), ket("00")) + np.outer(ket("1"), ket("11"))
    return subroutine_dense(rho, [pe])


# ---------------------------------------------------------------- random states

def random_density(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    d = 2**n
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = g @ g.conj().T
    return m / np.trace(m)
