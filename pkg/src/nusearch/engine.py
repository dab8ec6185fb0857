"""Dense state-vector evolution and measurement statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .linalg import (
    H1,
    MAX_AUX_QUBITS,
    MAX_INDEX_QUBITS,
    SizeLimitError,
    Z,
    as_matrix,
    is_unitary,
)

NORM_TOL = 1e-10

DEFAULT_ORDER = ("dilation", "mark", "select", "index")
SELECT_FIRST_ORDER = ("dilation", "select", "mark", "index")


class NotNormalizedError(ValueError):
    pass


class ZeroProbabilityError(ValueError):
    pass


@dataclass(frozen=True)
class RegisterLayout:
    """Named qubit segments, listed top to bottom.

    ``mark`` holds the mark-control qubit(s) and, for the LCU circuit, the
    coefficient ancilla above it. The default order puts the select qubits
    below the mark qubit; the multi-database and multi-group circuits use
    ``SELECT_FIRST_ORDER`` so that each database occupies a contiguous block.
    """

    dilation: int = 0
    mark: int = 1
    select: int = 0
    index: int = 1
    order: tuple = DEFAULT_ORDER

    def __post_init__(self):
        if self.order not in (DEFAULT_ORDER, SELECT_FIRST_ORDER):
            raise ValueError(f"bad segment order {self.order}")
        if min(self.dilation, self.mark, self.select, self.index) < 0:
            raise ValueError("segment sizes must be >= 0")
        if self.index > MAX_INDEX_QUBITS:
            raise SizeLimitError(f"{self.index} index qubits > {MAX_INDEX_QUBITS}")
        if self.dilation + self.mark + self.select > MAX_AUX_QUBITS:
            raise SizeLimitError(f"auxiliary qubits exceed {MAX_AUX_QUBITS}")
        if self.total < 1:
            raise ValueError("layout has no qubits")

    @property
    def total(self) -> int:
        return self.dilation + self.mark + self.select + self.index

    @property
    def dim(self) -> int:
        return 2**self.total

    def qubits(self, segment: str) -> list[int]:
        start = 0
        for name in self.order:
            size = getattr(self, name)
            if name == segment:
                return list(range(start, start + size))
            start += size
        raise KeyError(segment)


@dataclass
class StateVector:
    layout: RegisterLayout
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).ravel()
        if self.amplitudes.shape != (self.layout.dim,):
            raise ValueError(
                f"{self.amplitudes.size} amplitudes do not fit a {self.layout.total}-qubit layout"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.layout, self.amplitudes.copy(), self.normalized)

    def renormalized(self) -> "StateVector":
        nrm = self.norm
        if nrm < 1e-300:
            raise ZeroProbabilityError("cannot normalize the zero vector")
        return StateVector(self.layout, self.amplitudes / nrm, True)


@dataclass
class TrajectoryRecord:
    step: int
    p_first_zero: float
    p_marked_given_zero: float
    marked_amplitude_abs: float
    marked_amplitude_abs_branch1: float = float("nan")
    n: Optional[int] = None
    a: Optional[float] = None


def zero_state(layout: RegisterLayout) -> StateVector:
    amp = np.zeros(layout.dim, dtype=complex)
    amp[0] = 1.0
    return StateVector(layout, amp, True)


def _require_normalized(s: StateVector) -> None:
    if abs(s.norm - 1.0) > NORM_TOL:
        raise NotNormalizedError(f"state norm {s.norm:.3e} != 1")


def apply_on_qubits(op, targets: Sequence[int], s: StateVector) -> StateVector:
    """Apply ``op`` to the listed qubits (first target = most significant)."""
    op = as_matrix(op)
    targets = list(targets)
    nq = s.layout.total
    m = len(targets)
    if len(set(targets)) != m:
        raise ValueError(f"duplicate target in {targets}")
    if any(t < 0 or t >= nq for t in targets):
        raise ValueError(f"target out of range in {targets}")
    if op.shape != (2**m, 2**m):
        raise ValueError(f"operator shape {op.shape} does not match {m} target qubits")
    psi = s.amplitudes.reshape([2] * nq)
    psi = np.moveaxis(psi, targets, list(range(m)))
    rest = psi.shape[m:]
    out = (op @ psi.reshape(2**m, -1)).reshape((2,) * m + rest)
    out = np.moveaxis(out, list(range(m)), targets).reshape(-1)
    unitary = is_unitary(op)
    return StateVector(s.layout, out, s.normalized and unitary)


def _sub_index(s: StateVector, qubits: Sequence[int]) -> np.ndarray:
    nq = s.layout.total
    basis = np.arange(s.layout.dim)
    out = np.zeros(s.layout.dim, dtype=np.int64)
    for q in qubits:
        out = (out << 1) | ((basis >> (nq - 1 - q)) & 1)
    return out


def apply_diagonal(diag, targets: Sequence[int], s: StateVector,
                   control: Optional[int] = None, control_value: int = 1) -> StateVector:
    """Multiply by a diagonal operator given as its diagonal vector.

    With ``control`` set, only basis states whose control bit equals
    ``control_value`` are touched.
    """
    diag = np.asarray(diag, dtype=complex).ravel()
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target in {targets}")
    if control is not None and control in targets:
        raise ValueError("control qubit overlaps targets")
    if diag.shape != (2 ** len(targets),):
        raise ValueError("diagonal length does not match target count")
    factor = diag[_sub_index(s, targets)]
    if control is not None:
        factor = np.where(_qubit_bits(s, control) == control_value, factor, 1)
    unitary = bool(np.all(np.abs(np.abs(diag) - 1) <= 1e-10))
    return StateVector(s.layout, s.amplitudes * factor, s.normalized and unitary)


def apply_controlled(control: int, op, targets: Sequence[int], s: StateVector,
                     control_value: int = 1) -> StateVector:
    """Apply ``op`` on ``targets`` in the subspace where ``control`` equals ``control_value``.

    A 1-D ``op`` is taken as the diagonal of a diagonal operator.
    """
    targets = list(targets)
    if control in targets:
        raise ValueError("control qubit overlaps targets")
    if np.ndim(op) == 1:
        return apply_diagonal(op, targets, s, control, control_value)
    op = as_matrix(op)
    m = len(targets)
    d = 2**m
    P = np.zeros((2, 2), dtype=complex)
    P[control_value, control_value] = 1
    full = np.kron(np.eye(2) - P, np.eye(d)) + np.kron(P, op)
    return apply_on_qubits(full, [control] + targets, s)


def hadamard_wall(s: StateVector, qubits: Iterable[int]) -> StateVector:
    for q in qubits:
        s = apply_on_qubits(H1, [q], s)
    return s


def prepare_uniform(layout: RegisterLayout, segments: Sequence[str]) -> StateVector:
    """Hadamard every qubit of the selected segments of ``|0…0⟩``."""
    s = zero_state(layout)
    for seg in segments:
        s = hadamard_wall(s, layout.qubits(seg))
    return s


def _qubit_bits(s: StateVector, qubit: int) -> np.ndarray:
    nq = s.layout.total
    return (np.arange(s.layout.dim) >> (nq - 1 - qubit)) & 1


def p_first_zero(s: StateVector) -> float:
    """Probability that the top qubit measures 0."""
    _require_normalized(s)
    half = s.layout.dim // 2
    return float(np.sum(np.abs(s.amplitudes[:half]) ** 2))


def probability(s: StateVector, qubit: int, outcome: int) -> float:
    _require_normalized(s)
    mask = _qubit_bits(s, qubit) == outcome
    return float(np.sum(np.abs(s.amplitudes[mask]) ** 2))


def collapse(s: StateVector, qubit: int, outcome: int) -> StateVector:
    """Project ``qubit`` onto ``outcome`` and renormalize the full register."""
    mask = _qubit_bits(s, qubit) == outcome
    amp = np.where(mask, s.amplitudes, 0)
    p = float(np.sum(np.abs(amp) ** 2)) / s.norm**2
    if p <= 1e-15:
        raise ZeroProbabilityError(f"qubit {qubit} outcome {outcome} has probability {p:.3e}")
    return StateVector(s.layout, amp / np.linalg.norm(amp), True)


def index_values(layout: RegisterLayout) -> np.ndarray:
    """Index-register value of each basis state."""
    # The index segment is the trailing segment in every supported order.
    return np.arange(layout.dim) & (2**layout.index - 1)


def marked_stats(s: StateVector, marked: Iterable[int],
                 condition: Optional[tuple[int, int]] = None) -> dict:
    """Marked-element statistics on the index segment.

    Returns the probability of a marked index given ``condition`` (a
    ``(qubit, bit)`` pair, or ``None`` for no conditioning) together with
    the raw magnitudes of the marked component in the condition qubit's 0
    and 1 branches. Raw magnitudes are root-sum-squares over the marked set
    and are taken from the amplitudes as stored, so unnormalized states give
    unnormalized magnitudes.
    """
    marked = sorted(set(int(x) for x in marked))
    if not marked:
        raise ValueError("marked set must be nonempty")
    w = np.abs(s.amplitudes) ** 2
    is_marked = np.isin(index_values(s.layout), marked)
    cq = condition[0] if condition is not None else 0
    bits = _qubit_bits(s, cq)
    branch = [float(np.sqrt(np.sum(w[is_marked & (bits == b)]))) for b in (0, 1)]
    if condition is None:
        sel = np.ones_like(is_marked)
    else:
        sel = bits == condition[1]
    total = float(np.sum(w[sel]))
    if total <= 1e-30:
        raise ZeroProbabilityError(f"condition {condition} has zero probability")
    p_marked = float(np.sum(w[sel & is_marked])) / total
    return {
        "p_marked_given_condition": min(max(p_marked, 0.0), 1.0),
        "marked_amplitude_abs": branch[0] if condition is None or condition[1] == 0 else branch[1],
        "branch0": branch[0],
        "branch1": branch[1],
    }


def make_Us(layout: RegisterLayout) -> np.ndarray:
    """``(2|0⟩⟨0| - I) ⊗ I`` on the whole register (a Z on the top qubit)."""
    return np.kron(Z, np.eye(layout.dim // 2, dtype=complex))


def make_Uaa(psi_final: StateVector) -> np.ndarray:
    """Dense diffusion ``I - 2|ψ⟩⟨ψ|``."""
    _require_normalized(psi_final)
    v = psi_final.amplitudes
    return np.eye(len(v), dtype=complex) - 2 * np.outer(v, np.conj(v))


def _aa_step(psi: np.ndarray, psi_final: np.ndarray) -> np.ndarray:
    # U_aa · 𝔘_s without materializing either operator.
    half = len(psi) // 2
    out = psi.copy()
    out[half:] *= -1
    return out - 2 * psi_final * np.vdot(psi_final, out)


def aa_iterate(psi_final: StateVector, steps: int, marked: Iterable[int],
               condition_qubit: int = 0) -> list[TrajectoryRecord]:
    """Amplify the top-qubit-|0⟩ branch of ``psi_final`` ``steps`` times.

    Record 0 holds the unamplified statistics. The diffusion is applied as a
    rank-one update, which equals multiplying by :func:`make_Uaa` but keeps
    the cost linear in the state dimension.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    _require_normalized(psi_final)
    marked = list(marked)
    records = []
    cur = psi_final
    for j in range(steps + 1):
        if j:
            cur = StateVector(cur.layout, _aa_step(cur.amplitudes, psi_final.amplitudes), True)
        st = marked_stats(cur, marked, (condition_qubit, 0))
        records.append(TrajectoryRecord(
            step=j,
            p_first_zero=p_first_zero(cur),
            p_marked_given_zero=st["p_marked_given_condition"],
            marked_amplitude_abs=st["branch0"],
            marked_amplitude_abs_branch1=st["branch1"],
        ))
    return records


def sample(s: StateVector, seed: int, shots: int) -> dict[int, int]:
    """Seeded basis-state draws; returns ``{basis index: count}``."""
    _require_normalized(s)
    p = np.abs(s.amplitudes) ** 2
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p)
    return {int(i): int(c) for i, c in enumerate(counts) if c}
