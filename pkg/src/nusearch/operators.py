"""Factories for every named operator used by the search circuits.

All scaling constants are explicit arguments. Matrices are returned as fresh
``complex128`` arrays, so callers may treat them as immutable values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .linalg import (
    H1,
    I2,
    MAX_TOTAL_QUBITS,
    SizeLimitError,
    X,
    Z,
    as_matrix,
    hadamard_basis,
    identity,
    in_basis,
    is_unitary,
    kron,
    kron_all,
    max_abs_diff,
    sqrt_complement_in_basis,
)

POLICY_KINDS = ("exact_N", "poly_n", "barm_n", "barm_n2", "fixed")


@dataclass(frozen=True)
class APolicy:
    """How the real parameter ``a`` (or the M̄ coefficient) depends on ``n``.

    ``exact_N``  a = (N-2)/N
    ``poly_n``   a = (n-1)/n
    ``barm_n``   c = (n-2)/n
    ``barm_n2``  c = (n²-2)/n²
    ``fixed``    a = value
    """

    kind: str
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown a-policy {self.kind!r}; choose from {POLICY_KINDS}")
        if self.kind == "fixed":
            if self.value is None or not (0.0 < self.value <= 1.0):
                raise ValueError("fixed a-policy needs a value in (0, 1]")

    @classmethod
    def parse(cls, text: str) -> "APolicy":
        """Parse ``exact_N``, ``fixed:0.75`` or a bare number."""
        text = text.strip()
        if text.startswith("fixed:"):
            return cls("fixed", float(text.split(":", 1)[1]))
        try:
            return cls("fixed", float(text))
        except ValueError:
            return cls(text)

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.value!r}"
        return self.kind

    def resolve(self, n: int) -> float:
        N = 2**n
        if self.kind == "exact_N":
            a = (N - 2) / N
        elif self.kind == "poly_n":
            a = (n - 1) / n
        elif self.kind == "barm_n":
            if n < 3:
                raise ValueError("barm_n needs n >= 3 so that (n-2)/n > 0")
            a = (n - 2) / n
        elif self.kind == "barm_n2":
            a = (n * n - 2) / (n * n)
        else:
            a = float(self.value)
        if not (0.0 < a <= 1.0):
            raise ValueError(f"policy {self} gives a={a} outside (0, 1] at n={n}")
        return a


def _check_a(a: float) -> None:
    if not (0.0 < a <= 1.0):
        raise ValueError(f"a={a} must lie in (0, 1]")


def make_M() -> np.ndarray:
    """The singular search gate ``½[[1, -1], [-1, 1]]``."""
    return np.array([[1, -1], [-1, 1]], dtype=complex) / 2


def make_M_a(a: float, kappa: float) -> np.ndarray:
    """``(1/κ)[[a, -1], [-1, a]]``; Hadamard eigenvectors, eigenvalues (a∓1)/κ."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return np.array([[a, -1], [-1, a]], dtype=complex) / kappa


def M_a_eigvals(a: float, kappa: float) -> list[float]:
    """Eigenvalues of :func:`make_M_a` paired with the columns of ``H``."""
    return [(a - 1) / kappa, (a + 1) / kappa]


def make_Mtilde(N: int, rho: float = 1.0, symmetric: bool = False) -> np.ndarray:
    if N < 2 or N & (N - 1):
        raise ValueError("N must be a power of two >= 2")
    alpha = (N - 2) / N
    last = -alpha if symmetric else -1.0
    return np.array([[-alpha, 1], [1, last]], dtype=complex) / rho


def barm_coefficient(n: int, policy: APolicy) -> float:
    if policy.kind not in ("barm_n", "barm_n2"):
        raise ValueError("M̄ needs the barm_n or barm_n2 policy")
    return policy.resolve(n)


def make_Mbar(n: int, rho: float, policy: APolicy) -> np.ndarray:
    c = barm_coefficient(n, policy)
    return np.array([[-c, 1], [1, -1]], dtype=complex) / rho


def make_J(kappa: float) -> np.ndarray:
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return np.ones((2, 2), dtype=complex) / kappa


def J_eigvals(kappa: float) -> list[float]:
    """Eigenvalues of :func:`make_J` paired with the columns of ``H``."""
    return [2 / kappa, 0.0]


def make_C_tensor(k: int, a: float, kappa_J: float = 2.0, kappa_M: float = 1.0) -> np.ndarray:
    """``J ⊗ … ⊗ J ⊗ M`` with ``k - 1`` copies of J and M last."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > MAX_TOTAL_QUBITS:
        raise SizeLimitError(f"k={k} exceeds {MAX_TOTAL_QUBITS} qubits")
    return kron_all([make_J(kappa_J)] * (k - 1) + [make_M_a(a, kappa_M)])


def C_tensor_eigvals(k: int, a: float, kappa_J: float = 2.0, kappa_M: float = 1.0) -> np.ndarray:
    """Eigenvalues of :func:`make_C_tensor` in ``hadamard_basis(k)`` column order."""
    lam = np.ones(1)
    for _ in range(k - 1):
        lam = np.kron(lam, J_eigvals(kappa_J))
    return np.kron(lam, M_a_eigvals(a, kappa_M))


def dilate(C, kappa_C: float, basis, eigvals: Sequence[float]) -> np.ndarray:
    """Unitary dilation ``[[Ĉ, -S], [S, Ĉ]]`` with ``Ĉ = C/κ_C``.

    ``eigvals`` are the eigenvalues of ``C`` itself in the column order of
    ``basis``; they are divided by ``κ_C`` here.
    """
    if kappa_C <= 0:
        raise ValueError("kappa_C must be positive")
    C = as_matrix(C)
    basis = as_matrix(basis)
    lam = np.asarray(eigvals, dtype=float) / kappa_C
    C_hat = C / kappa_C
    if max_abs_diff(in_basis(lam, basis), C_hat) > 1e-10:
        raise ValueError("basis/eigvals do not diagonalize C")
    S = sqrt_complement_in_basis(lam, basis)
    return np.block([[C_hat, -S], [S, C_hat]])


def make_U_mark(n: int, marked: Iterable[int]) -> np.ndarray:
    """Diagonal ±1 oracle with -1 on the marked indices."""
    marked = sorted(set(int(x) for x in marked))
    N = 2**n
    if not marked:
        raise ValueError("marked set must be nonempty")
    if marked[0] < 0 or marked[-1] >= N:
        raise ValueError(f"marked indices must lie in [0, {N - 1}]")
    d = np.ones(N, dtype=complex)
    d[marked] = -1
    return np.diag(d)


def make_projector_reflection(psi) -> np.ndarray:
    """``[[P, I-P], [I-P, P]]`` with ``P = |ψ⟩⟨ψ|``.

    Applied to ``|0⟩⊗|v₁⟩ = (v₁; 0)`` with ``ψ = v₀`` this returns ``(αv₀; v₁ - αv₀)``,
    the Gram-Schmidt pair, where ``α = ⟨v₀|v₁⟩``.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    if abs(np.linalg.norm(psi) - 1) > 1e-12:
        raise ValueError("psi must be normalized")
    P = np.outer(psi, np.conj(psi))
    Q = np.eye(len(psi)) - P
    return np.block([[P, Q], [Q, P]])


@dataclass(frozen=True)
class LcuTerm:
    coefficient: complex
    unitary: np.ndarray

    def __post_init__(self):
        if not is_unitary(self.unitary, atol=1e-12):
            raise ValueError("LCU term matrix is not unitary")


def lcu_terms(kind: str, alpha: Optional[float] = None,
              beta: float = 0.0, eta: float = 0.0) -> list[LcuTerm]:
    """Coefficient/unitary pairs for the LCU forms of M and M̃.

    ``Mtilde_five_term`` is the five-term sum exactly as printed; it
    assembles to ``[[α, 1], [1, -1]]``. ``Mtilde_five_term_corrected`` flips
    the sign of α so that the sum equals M̃ (ρ = 1).
    """
    if kind == "M_two_term":
        return [LcuTerm(-0.5, X), LcuTerm(0.5, I2)]
    if kind in ("Mtilde_five_term", "Mtilde_five_term_corrected"):
        if alpha is None:
            raise ValueError("alpha required for the M̃ expansion")
        s = alpha if kind == "Mtilde_five_term" else -alpha
        return [LcuTerm(s / 2, I2), LcuTerm(s / 2, Z), LcuTerm(1.0, X),
                LcuTerm(-0.5, I2), LcuTerm(0.5, Z)]
    if kind == "M_padded":
        if not (math.isfinite(beta) and math.isfinite(eta)):
            raise ValueError("beta and eta must be finite")
        return lcu_terms("M_two_term") + [
            LcuTerm(beta, Z), LcuTerm(-beta, Z), LcuTerm(eta, H1), LcuTerm(-eta, H1)]
    raise ValueError(f"unknown LCU kind {kind!r}")


def assemble_lcu(terms: Sequence[LcuTerm]) -> np.ndarray:
    """``Σ cᵢ Uᵢ`` with each entry summed by ``math.fsum``.

    Correct rounding makes cancelling pairs such as ``βZ - βZ`` vanish exactly.
    """
    if not terms:
        raise ValueError("no terms")
    shape = terms[0].unitary.shape
    if any(t.unitary.shape != shape for t in terms):
        raise ValueError("LCU terms have mismatched dimensions")
    prods = np.stack([t.coefficient * t.unitary for t in terms]).reshape(len(terms), -1)
    re = [math.fsum(col) for col in prods.real.T]
    im = [math.fsum(col) for col in prods.imag.T]
    return (np.array(re) + 1j * np.array(im)).reshape(shape)


def make_blockdiag(op, K: int) -> np.ndarray:
    """``K`` copies of ``op`` along the diagonal (``I_K ⊗ op``)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return kron(identity(K), op)


# Grouping circuit ----------------------------------------------------------

V_GATE = np.array([[1, 1], [-1, 1]], dtype=complex) / np.sqrt(2)


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def make_group_CS(a: float) -> tuple[np.ndarray, np.ndarray]:
    """Cosine/sine pair of the 4×4 grouping unitary; ``C² + S² = I``."""
    _check_a(a)
    C = np.array([[a, -1], [-1, a]], dtype=complex) / (a + 1)
    S = math.sqrt(a) / (a + 1) * np.ones((2, 2), dtype=complex)
    return C, S


def make_group_unitary(a: float) -> np.ndarray:
    C, S = make_group_CS(a)
    return np.block([[C, -S], [S, C]])


def group_phi(a: float) -> float:
    """Rotation angle with cos(φ/2) = (a-1)/(a+1), sin(φ/2) = 2√a/(a+1)."""
    _check_a(a)
    return 2.0 * math.atan2(2.0 * math.sqrt(a) / (a + 1), (a - 1) / (a + 1))


@dataclass(frozen=True)
class Gate:
    name: str
    matrix: np.ndarray
    target: int
    control: Optional[int] = None
    angle: Optional[float] = None


def group_gate_sequence(a: float) -> list[Gate]:
    """Three-gate circuit for the grouping unitary on two qubits.

    Qubit 0 is the top ancilla, qubit 1 the second one; gates are listed in
    time order.
    """
    phi = group_phi(a)
    return [
        Gate("Ry(pi/2)", ry(math.pi / 2), target=1, angle=math.pi / 2),
        Gate("CRy(phi)", ry(phi), target=0, control=1, angle=phi),
        Gate("Ry(-pi/2)", ry(-math.pi / 2), target=1, angle=-math.pi / 2),
    ]


def gate_on_two_qubits(g: Gate) -> np.ndarray:
    P0 = np.diag([1, 0]).astype(complex)
    P1 = np.diag([0, 1]).astype(complex)
    if g.control is None:
        return kron(g.matrix, I2) if g.target == 0 else kron(I2, g.matrix)
    if (g.control, g.target) == (1, 0):
        return kron(I2, P0) + kron(g.matrix, P1)
    if (g.control, g.target) == (0, 1):
        return kron(P0, I2) + kron(P1, g.matrix)
    raise ValueError(f"bad two-qubit gate placement {g}")


def compose_gates(gates: Sequence[Gate]) -> np.ndarray:
    """Product of a time-ordered two-qubit gate list (last gate leftmost)."""
    out = np.eye(4, dtype=complex)
    for g in gates:
        out = gate_on_two_qubits(g) @ out
    return out


def group_D(a: float) -> np.ndarray:
    """Block form ``[[D_C, -D_S], [D_S, D_C]]`` in the V eigenbasis."""
    _check_a(a)
    DC = np.diag([1.0, (a - 1) / (a + 1)]).astype(complex)
    DS = np.diag([0.0, 2 * math.sqrt(a) / (a + 1)]).astype(complex)
    return np.block([[DC, -DS], [DS, DC]])


__all__ = [
    "APolicy", "LcuTerm", "Gate", "make_M", "make_M_a", "make_Mtilde", "make_Mbar",
    "make_J", "make_C_tensor", "C_tensor_eigvals", "dilate", "make_U_mark",
    "make_projector_reflection", "lcu_terms", "assemble_lcu", "make_blockdiag",
    "make_group_CS", "make_group_unitary", "group_phi", "group_gate_sequence",
    "compose_gates", "group_D", "hadamard_basis", "ry", "V_GATE",
]
