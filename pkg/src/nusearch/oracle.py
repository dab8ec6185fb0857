"""Brute-force reference: compose whole-circuit matrices and apply them to |0…0⟩.

Nothing here calls into the state-vector engine or the eigenbasis
construction of the dilation; every gate is embedded as a full
``2**nq × 2**nq`` matrix by index arithmetic and the sine block comes from a
numerical symmetric eigensolver rather than the analytic Hadamard basis.
Only meant for small registers.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import eigh

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def embed(op: np.ndarray, targets: Sequence[int], nq: int) -> np.ndarray:
    """Full matrix of ``op`` acting on ``targets`` (big-endian) of ``nq`` qubits."""
    dim = 2**nq
    basis = np.arange(dim)
    sub = np.zeros(dim, dtype=np.int64)
    for q in targets:
        sub = (sub << 1) | ((basis >> (nq - 1 - q)) & 1)
    tmask = 0
    for q in targets:
        tmask |= 1 << (nq - 1 - q)
    rest = basis & ~tmask
    same_rest = rest[:, None] == rest[None, :]
    return np.where(same_rest, np.asarray(op, dtype=complex)[sub[:, None], sub[None, :]], 0)


def controlled(op: np.ndarray, value: int = 1) -> np.ndarray:
    d = op.shape[0]
    out = np.eye(2 * d, dtype=complex)
    sl = slice(value * d, (value + 1) * d)
    out[sl, sl] = op
    return out


def mark_matrix(n: int, marked: Iterable[int]) -> np.ndarray:
    d = np.ones(2**n, dtype=complex)
    for x in marked:
        d[x] = -1
    return np.diag(d)


def hadamard_all(nq: int, qubits: Iterable[int]) -> np.ndarray:
    out = np.eye(2**nq, dtype=complex)
    for q in qubits:
        out = embed(_H, [q], nq) @ out
    return out


def run(ops: Sequence[np.ndarray], nq: int) -> np.ndarray:
    """Multiply the composed circuit matrix onto ``|0…0⟩``."""
    U = np.eye(2**nq, dtype=complex)
    for op in ops:
        U = op @ U
    psi0 = np.zeros(2**nq, dtype=complex)
    psi0[0] = 1
    return U @ psi0


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    # scipy's sqrtm loses about half the digits on singular inputs, and
    # I - Ĉ² is singular whenever Ĉ has eigenvalue ±1.
    w, V = eigh(A)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def dilation_by_sqrtm(C_hat: np.ndarray) -> np.ndarray:
    d = C_hat.shape[0]
    S = psd_sqrt(np.eye(d) - C_hat @ C_hat)
    return np.block([[C_hat, -S], [S, C_hat]])


def c_tensor(k: int, a: float) -> np.ndarray:
    out = np.array([[a, -1], [-1, a]], dtype=complex)
    for _ in range(k - 1):
        out = np.kron(np.ones((2, 2)) / 2, out)
    return out


# Circuits -----------------------------------------------------------------

def direct_circuit(n: int, marked: Sequence[int], gate: np.ndarray) -> np.ndarray:
    """Hadamard wall, controlled mark, 2×2 gate on the top qubit."""
    nq = n + 1
    ops = [
        hadamard_all(nq, range(nq)),
        embed(controlled(mark_matrix(n, marked)), list(range(nq)), nq),
        embed(gate, [0], nq),
    ]
    return run(ops, nq)


def dilated_circuit(n: int, k: int, a: float, marked: Sequence[int]) -> np.ndarray:
    """Dilation ancilla, mark qubit, k-1 select qubits, n index qubits."""
    nq = 1 + 1 + (k - 1) + n
    mark_q = 1
    sel = list(range(2, 2 + k - 1))
    idx = list(range(1 + k, nq))
    frak = dilation_by_sqrtm(c_tensor(k, a) / (a + 1))
    ops = [
        hadamard_all(nq, [mark_q] + sel + idx),
        embed(controlled(mark_matrix(n, marked)), [mark_q] + idx, nq),
        embed(frak, [0] + sel + [mark_q], nq),
    ]
    return run(ops, nq)


def amplified(psi_final: np.ndarray, steps: int) -> list[np.ndarray]:
    """States after 0..steps applications of ``(I - 2|ψ⟩⟨ψ|)(Z ⊗ I)``."""
    d = len(psi_final)
    Uaa = np.eye(d) - 2 * np.outer(psi_final, psi_final.conj())
    Us = np.kron(np.diag([1, -1]), np.eye(d // 2))
    G = Uaa @ Us
    out = [psi_final]
    for _ in range(steps):
        out.append(G @ out[-1])
    return out


def multidb_state(n: int, K: int, marked: Sequence[int], a: float) -> np.ndarray:
    """Non-unitary block-diagonal M applied to the stacked database state."""
    N = 2**n
    u = np.ones(N) / math.sqrt(N)
    blocks = []
    for x in marked:
        v = u.copy()
        v[x] *= -1
        blocks += [u, v]
    psi1 = np.concatenate(blocks) / math.sqrt(2 * K)
    M = np.array([[a, -1], [-1, a]], dtype=complex)
    big = np.kron(np.kron(np.eye(K), M), np.eye(N))
    return big @ psi1


def grouping_output(signs: Sequence[int], weights: Sequence[float], a: float) -> np.ndarray:
    """Literal 4×4 grouping matrix ⊗ I applied to the normalized stacked vector."""
    p = np.asarray(weights, dtype=float)
    u_init = p / np.linalg.norm(p)
    u_marked = np.asarray(signs) * u_init
    z = np.zeros_like(u_init)
    stacked = np.concatenate([u_marked, u_init, z, z]) / math.sqrt(2)
    r = math.sqrt(a)
    G = np.array([[a, -1, -r, -r], [-1, a, -r, -r], [r, r, a, -1], [r, r, -1, a]]) / (a + 1)
    return np.kron(G, np.eye(len(p))) @ stacked
