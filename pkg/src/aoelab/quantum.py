"""Exact finite-dimensional quantum mechanics on labelled qubit registers.

Qubit ordering follows the register: the first label is the most significant
bit of the amplitude index. Computational state |0> carries outcome +1.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

ALGEBRAIC_TOL = 1e-12
COMPOSED_TOL = 1e-9

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


class QuantumError(ValueError):
    pass


class LabelCollisionError(QuantumError):
    pass


class UnknownLabelError(QuantumError):
    pass


class NotReadyError(QuantumError):
    """Raised when a memory qubit is not in its ready state |0>."""


class NullCollapseError(QuantumError):
    """Raised when collapsing onto an outcome of zero probability."""


@dataclass(frozen=True, eq=False)
class PureState:
    register: tuple[str, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        register = tuple(self.register)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if len(set(register)) != len(register):
            raise LabelCollisionError(f"duplicate labels in register {register}")
        if amps.shape[0] != 2 ** len(register):
            raise QuantumError(
                f"{amps.shape[0]} amplitudes for a {len(register)}-qubit register"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ALGEBRAIC_TOL:
            raise QuantumError(f"state is not normalised (squared norm {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "register", register)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, register: Sequence[str], amplitudes, normalize=True):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise QuantumError("zero vector is not a state")
            amps = amps / norm
        return cls(tuple(register), amps)

    @classmethod
    def basis(cls, register: Sequence[str], bits: Sequence[int]) -> "PureState":
        amps = np.zeros(2 ** len(register), dtype=complex)
        index = int("".join(str(b) for b in bits), 2) if bits else 0
        amps[index] = 1.0
        return cls(tuple(register), amps)

    @property
    def n_qubits(self) -> int:
        return len(self.register)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def index_of(self, label: str) -> int:
        try:
            return self.register.index(label)
        except ValueError:
            raise UnknownLabelError(f"qubit {label!r} not in register {self.register}") from None

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def inner(self, other: "PureState") -> complex:
        if other.register != self.register:
            other = other.reorder(self.register)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def reorder(self, register: Sequence[str]) -> "PureState":
        register = tuple(register)
        if sorted(register) != sorted(self.register):
            raise UnknownLabelError(f"cannot reorder {self.register} to {register}")
        perm = [self.index_of(lab) for lab in register]
        tensor = np.transpose(self.as_tensor(), perm)
        return PureState(register, tensor.reshape(-1))

    def apply(self, operator: np.ndarray, targets: Sequence[str]) -> "PureState":
        """Apply a unitary acting on ``targets`` (in the given order)."""
        new = _apply_operator(self, operator, targets)
        return PureState(self.register, new)

    def __repr__(self):
        return f"PureState(register={self.register}, amplitudes={np.round(self.amplitudes, 6)})"


def _apply_operator(state: PureState, operator: np.ndarray, targets: Sequence[str]) -> np.ndarray:
    targets = tuple(targets)
    k = len(targets)
    operator = np.asarray(operator, dtype=complex)
    if operator.shape != (2**k, 2**k):
        raise QuantumError(f"operator shape {operator.shape} does not match {k} targets")
    idx = [state.index_of(t) for t in targets]
    if len(set(idx)) != k:
        raise LabelCollisionError(f"repeated target labels {targets}")
    rest = [i for i in range(state.n_qubits) if i not in idx]
    perm = idx + rest
    tensor = np.transpose(state.as_tensor(), perm).reshape(2**k, -1)
    tensor = operator @ tensor
    tensor = tensor.reshape((2,) * state.n_qubits)
    inverse = np.argsort(perm)
    return np.transpose(tensor, inverse).reshape(-1)


def tensor(a: PureState, b: PureState) -> PureState:
    clash = set(a.register) & set(b.register)
    if clash:
        raise LabelCollisionError(f"registers overlap on {sorted(clash)}")
    return PureState(a.register + b.register, np.kron(a.amplitudes, b.amplitudes))


def ket(label: str, bit: int = 0) -> PureState:
    return PureState.basis((label,), (bit,))


@dataclass(frozen=True)
class QubitObservable:
    """cos(angle) Z + sin(angle) X with outcomes +1 / -1."""

    angle: float

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise QuantumError(f"observable angle must be finite, got {self.angle!r}")

    def matrix(self) -> np.ndarray:
        return math.cos(self.angle) * PAULI_Z + math.sin(self.angle) * PAULI_X

    def eigenvector(self, outcome: int) -> np.ndarray:
        half = self.angle / 2
        if outcome == 1:
            return np.array([math.cos(half), math.sin(half)], dtype=complex)
        if outcome == -1:
            return np.array([-math.sin(half), math.cos(half)], dtype=complex)
        raise QuantumError(f"outcome must be +1 or -1, got {outcome!r}")

    def projector(self, outcome: int) -> np.ndarray:
        v = self.eigenvector(outcome)
        return np.outer(v, v.conj())

    def measurement(self, target: str) -> "ProjectiveMeasurement":
        return ProjectiveMeasurement(
            (target,), ((1, self.projector(1)), (-1, self.projector(-1)))
        )


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    targets: tuple[str, ...]
    outcomes: tuple[tuple[Hashable, np.ndarray], ...]

    def __post_init__(self):
        targets = tuple(self.targets)
        outcomes = tuple((label, np.asarray(p, dtype=complex)) for label, p in self.outcomes)
        dim = 2 ** len(targets)
        if not outcomes:
            raise QuantumError("measurement needs at least one outcome")
        labels = [label for label, _ in outcomes]
        if len(set(labels)) != len(labels):
            raise QuantumError(f"duplicate outcome labels {labels}")
        total = np.zeros((dim, dim), dtype=complex)
        for label, p in outcomes:
            if p.shape != (dim, dim):
                raise QuantumError(f"projector for {label!r} has shape {p.shape}, expected {(dim, dim)}")
            if np.abs(p @ p - p).max() > ALGEBRAIC_TOL or np.abs(p - p.conj().T).max() > ALGEBRAIC_TOL:
                raise QuantumError(f"operator for outcome {label!r} is not an orthogonal projector")
            total = total + p
        for (la, pa), (lb, pb) in itertools.combinations(outcomes, 2):
            if np.abs(pa @ pb).max() > ALGEBRAIC_TOL:
                raise QuantumError(f"projectors {la!r} and {lb!r} are not orthogonal")
        if np.abs(total - np.eye(dim)).max() > ALGEBRAIC_TOL:
            raise QuantumError("projectors do not sum to the identity")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.outcomes)

    def projector(self, label) -> np.ndarray:
        for lab, p in self.outcomes:
            if lab == label:
                return p
        raise QuantumError(f"unknown outcome {label!r}; expected one of {self.labels}")


def product_measurement(parts: Sequence[ProjectiveMeasurement]) -> ProjectiveMeasurement:
    """Joint measurement of commuting measurements on disjoint targets.

    Outcome labels are tuples of the component labels.
    """
    targets: tuple[str, ...] = ()
    for part in parts:
        if set(targets) & set(part.targets):
            raise LabelCollisionError(f"overlapping targets in product measurement {part.targets}")
        targets += part.targets
    outcomes = []
    for combo in itertools.product(*(part.outcomes for part in parts)):
        label = tuple(lab for lab, _ in combo)
        proj = np.ones((1, 1), dtype=complex)
        for _, p in combo:
            proj = np.kron(proj, p)
        outcomes.append((label, proj))
    return ProjectiveMeasurement(targets, tuple(outcomes))


def _project(state: PureState, projector: np.ndarray, targets: Sequence[str]) -> np.ndarray:
    return _apply_operator(state, projector, targets)


def born_probabilities(state: PureState, m: ProjectiveMeasurement) -> dict:
    """Born probabilities keyed by outcome label."""
    for t in m.targets:
        state.index_of(t)
    probs = {}
    for label, p in m.outcomes:
        projected = _project(state, p, m.targets)
        probs[label] = float(np.vdot(projected, projected).real)
    return probs


def born_distribution(state: PureState, m: ProjectiveMeasurement, variables: Sequence[str] | None = None):
    """Born-rule distribution of ``m`` on ``state`` as a JointDistribution.

    Scalar outcome labels are wrapped as one-variable tuples. ``variables``
    names the components; defaults to the measurement targets.
    """
    from aoelab.distributions import JointDistribution

    probs = born_probabilities(state, m)
    cells = {}
    for label, p in probs.items():
        key = label if isinstance(label, tuple) else (label,)
        cells[key] = p
    width = len(next(iter(cells)))
    if variables is None:
        variables = m.targets if len(m.targets) == width else tuple(f"v{i}" for i in range(width))
    return JointDistribution(tuple(variables), cells)


def collapse(state: PureState, m: ProjectiveMeasurement, outcome) -> tuple[PureState, float]:
    projected = _project(state, m.projector(outcome), m.targets)
    prob = float(np.vdot(projected, projected).real)
    if prob < ALGEBRAIC_TOL:
        raise NullCollapseError(f"outcome {outcome!r} has probability {prob:.3g}; cannot collapse")
    return PureState(state.register, projected / math.sqrt(prob)), prob


@dataclass(frozen=True)
class FriendDilation:
    """Copy-style unitary model of a friend measuring ``system`` into ``memory``.

    |e_k>|0> -> |e_k>|k>, where e_0 / e_1 are the +1 / -1 eigenvectors of
    ``basis`` and memory |k> records outcome +1 (k=0) or -1 (k=1).
    """

    system: str
    memory: str
    basis: QubitObservable

    def __post_init__(self):
        if self.system == self.memory:
            raise LabelCollisionError("system and memory must be different qubits")

    def unitary(self) -> np.ndarray:
        e0 = self.basis.projector(1)
        e1 = self.basis.projector(-1)
        return np.kron(e0, IDENTITY) + np.kron(e1, PAULI_X.astype(complex))

    def logical_vector(self, k: int) -> np.ndarray:
        """|e_k>|k> on (system, memory)."""
        outcome = 1 if k == 0 else -1
        mem = np.zeros(2, dtype=complex)
        mem[k] = 1.0
        return np.kron(self.basis.eigenvector(outcome), mem)

    def record_measurement(self) -> ProjectiveMeasurement:
        """Reading the memory in its computational basis ("asking" the friend)."""
        return ProjectiveMeasurement(
            (self.memory,),
            ((1, np.diag([1, 0]).astype(complex)), (-1, np.diag([0, 1]).astype(complex))),
        )

    def supermeasurement(self, super_angle: float) -> ProjectiveMeasurement:
        """Rotated logical-basis measurement on (system, memory).

        Inside the span of |e_0 0>, |e_1 1> the +1 vector is
        cos(t/2)|e_0 0> + sin(t/2)|e_1 1> with t = super_angle - friend angle;
        the orthogonal complement is split between the outcomes.
        """
        t = super_angle - self.basis.angle
        l0, l1 = self.logical_vector(0), self.logical_vector(1)
        plus = math.cos(t / 2) * l0 + math.sin(t / 2) * l1
        minus = -math.sin(t / 2) * l0 + math.cos(t / 2) * l1
        mem0 = np.array([1, 0], dtype=complex)
        mem1 = np.array([0, 1], dtype=complex)
        off0 = np.kron(self.basis.eigenvector(1), mem1)
        off1 = np.kron(self.basis.eigenvector(-1), mem0)
        p_plus = np.outer(plus, plus.conj()) + np.outer(off0, off0.conj())
        p_minus = np.outer(minus, minus.conj()) + np.outer(off1, off1.conj())
        return ProjectiveMeasurement((self.system, self.memory), ((1, p_plus), (-1, p_minus)))


def memory_is_ready(state: PureState, memory: str) -> bool:
    one = np.diag([0, 1]).astype(complex)
    excited = _project(state, one, (memory,))
    return float(np.vdot(excited, excited).real) < ALGEBRAIC_TOL


def apply_dilation(state: PureState, d: FriendDilation) -> PureState:
    state.index_of(d.system)
    if not memory_is_ready(state, d.memory):
        raise NotReadyError(f"memory qubit {d.memory!r} is not in the ready state |0>")
    return state.apply(d.unitary(), (d.system, d.memory))


def effective_wing_observable(d: FriendDilation, super_angle: float) -> QubitObservable:
    """Single-qubit observable equivalent to supermeasuring the dilated lab.

    Pulls the supermeasurement back through the isometry |s> -> U(|s>|0>).
    """
    isometry = d.unitary()[:, [0, 2]]  # columns for |s=0, m=0> and |s=1, m=0>
    sup = d.supermeasurement(super_angle)
    op = sup.projector(1) - sup.projector(-1)
    pulled = isometry.conj().T @ op @ isometry
    z = 0.5 * np.trace(pulled @ PAULI_Z).real
    x = 0.5 * np.trace(pulled @ PAULI_X).real
    return QubitObservable(math.atan2(x, z))


def bloch_angle(state: PureState) -> float:
    """Angle of a single-qubit state in the X-Z plane (real amplitudes up to phase)."""
    if state.n_qubits != 1:
        raise QuantumError("bloch_angle needs a one-qubit state")
    amps = state.amplitudes
    phase = amps[np.argmax(np.abs(amps))]
    amps = amps * (abs(phase) / phase)
    if np.abs(amps.imag).max() > 1e-9:
        raise QuantumError("state is not in the X-Z plane")
    return 2 * math.atan2(amps[1].real, amps[0].real)


# named presets -------------------------------------------------------------

def singlet(labels: Sequence[str] = ("S_C", "S_D")) -> PureState:
    return PureState.from_amplitudes(labels, [0, 1, -1, 0])


def ghz(labels: Sequence[str] = ("S1", "S2", "S3")) -> PureState:
    amps = np.zeros(8)
    amps[0] = amps[7] = 1
    return PureState.from_amplitudes(labels, amps)


def plus(label: str = "S") -> PureState:
    return PureState.from_amplitudes((label,), [1, 1])


def schmidt_state(angle: float, labels: Sequence[str] = ("S_C", "S_D")) -> PureState:
    """cos(angle)|00> + sin(angle)|11>."""
    return PureState.from_amplitudes(labels, [math.cos(angle), 0, 0, math.sin(angle)])


def y_to_z_frame() -> np.ndarray:
    """Rotation W = exp(-i pi/4 X), so that W^dag Z W = Y and W^dag X W = X.

    Measuring Z (resp. X) on W|psi> reproduces Y (resp. X) statistics on |psi>.
    """
    c = math.cos(math.pi / 4)
    return np.array([[c, -1j * c], [-1j * c, c]], dtype=complex)
