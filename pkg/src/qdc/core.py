"""Dense state-vector and density-matrix simulation over named registers.

Qubit ordering is register-major: the first register listed in a layout holds
the most significant bits of the basis index, and inside a register the first
qubit is the most significant. Global qubit ``0`` is therefore the leftmost
character of a basis label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from qdc.config import DEFAULT_TOLERANCES, Tolerances, make_rng
from qdc.errors import ConfigurationError, GateTargetError, LayoutError, PreconditionError


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered, named qubit registers."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(name), int(width)) for name, width in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [name for name, _ in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        for name, width in regs:
            if width < 1:
                raise LayoutError(f"register {name!r} has width {width} < 1")

    @classmethod
    def of(cls, **widths: int) -> RegisterLayout:
        """``RegisterLayout.of(Q1=2, Q2=1)``; keyword order is register order."""
        return cls(tuple(widths.items()))

    @property
    def total_qubits(self) -> int:
        return sum(width for _, width in self.registers)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.registers)

    @property
    def dim(self) -> int:
        return 1 << self.total_qubits

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def width(self, name: str) -> int:
        for reg, width in self.registers:
            if reg == name:
                return width
        raise LayoutError(f"no register named {name!r} in {self.names}")

    def offset(self, name: str) -> int:
        start = 0
        for reg, width in self.registers:
            if reg == name:
                return start
            start += width
        raise LayoutError(f"no register named {name!r} in {self.names}")

    def qubits(self, name: str) -> tuple[int, ...]:
        start = self.offset(name)
        return tuple(range(start, start + self.width(name)))

    def shift(self, name: str) -> int:
        """Bit position of the register's least significant qubit."""
        return self.total_qubits - self.offset(name) - self.width(name)

    def subset(self, names: Iterable[str]) -> RegisterLayout:
        """Layout of ``names`` kept in this layout's order."""
        wanted = set(names)
        for name in wanted:
            self.width(name)
        return RegisterLayout(tuple(r for r in self.registers if r[0] in wanted))

    def concat(self, other: RegisterLayout) -> RegisterLayout:
        return RegisterLayout(self.registers + other.registers)

    def field(self, name: str) -> np.ndarray:
        """Value of register ``name`` for every basis index (read-only).

        Cached for layouts up to 16 qubits.
        """
        if self.total_qubits > 16:
            return (_indices(self.total_qubits) >> self.shift(name)) & ((1 << self.width(name)) - 1)
        return _field(self.registers, name)


@lru_cache(maxsize=4)
def _indices(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=64)
def _field(registers: tuple[tuple[str, int], ...], name: str) -> np.ndarray:
    layout = RegisterLayout(registers)
    values = (_indices(layout.total_qubits) >> layout.shift(name)) & ((1 << layout.width(name)) - 1)
    values.setflags(write=False)
    return values


def _check_cap(layout: RegisterLayout, mixed: bool, tol: Tolerances) -> None:
    cap = tol.max_mixed_qubits if mixed else tol.max_pure_qubits
    if layout.total_qubits > cap:
        kind = "density matrix" if mixed else "state vector"
        raise ConfigurationError(
            f"{layout.total_qubits} qubits exceeds the {kind} cap of {cap}"
        )


@dataclass(frozen=True, eq=False)
class QuantumState:
    """A pure state vector or a density matrix over a register layout.

    The constructor validates normalisation (and Hermiticity / positivity for
    density matrices). Arrays are made read-only; every operation returns a
    new state.
    """

    layout: RegisterLayout
    data: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        dim = self.layout.dim
        if data.ndim == 1:
            _check_cap(self.layout, False, self.tol)
            if data.shape != (dim,):
                raise LayoutError(f"state vector of length {data.shape[0]} for {dim}-dim layout")
            norm = float(np.vdot(data, data).real)
            if abs(norm - 1.0) > self.tol.norm:
                raise ConfigurationError(f"state vector norm^2 {norm!r} differs from 1")
        elif data.ndim == 2:
            _check_cap(self.layout, True, self.tol)
            if data.shape != (dim, dim):
                raise LayoutError(f"density matrix of shape {data.shape} for {dim}-dim layout")
            if np.max(np.abs(data - data.conj().T)) > self.tol.norm:
                raise ConfigurationError("density matrix is not Hermitian")
            trace = float(np.trace(data).real)
            if abs(trace - 1.0) > self.tol.norm:
                raise ConfigurationError(f"density matrix trace {trace!r} differs from 1")
            if np.linalg.eigvalsh(data)[0] < -self.tol.psd:
                raise ConfigurationError("density matrix is not positive semidefinite")
        else:
            raise ConfigurationError("state data must be a vector or a square matrix")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def _trusted(cls, layout: RegisterLayout, data: np.ndarray) -> QuantumState:
        # Skips validation; only for results of norm-preserving operations.
        state = object.__new__(cls)
        data = np.asarray(data, dtype=complex)
        data.setflags(write=False)
        object.__setattr__(state, "layout", layout)
        object.__setattr__(state, "data", data)
        object.__setattr__(state, "tol", DEFAULT_TOLERANCES)
        return state

    @property
    def kind(self) -> str:
        return "pure" if self.data.ndim == 1 else "mixed"

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    @property
    def n_qubits(self) -> int:
        return self.layout.total_qubits

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def to_mixed(self) -> QuantumState:
        if not self.is_pure:
            return self
        _check_cap(self.layout, True, DEFAULT_TOLERANCES)
        return QuantumState._trusted(self.layout, self.density())

    def probabilities(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.clip(np.diag(self.data).real, 0.0, None)

    def register_probabilities(self, name: str) -> np.ndarray:
        values = self.layout.field(name)
        return np.bincount(values, weights=self.probabilities(), minlength=1 << self.layout.width(name))

    def __repr__(self) -> str:
        return f"QuantumState({self.kind}, {self.layout.registers})"


# --- construction -----------------------------------------------------------


def initialize(layout: RegisterLayout, basis_label: str) -> QuantumState:
    """Computational basis state labelled by a bitstring (MSB first)."""
    if len(basis_label) != layout.total_qubits or set(basis_label) - {"0", "1"}:
        raise ConfigurationError(
            f"basis label {basis_label!r} does not match {layout.total_qubits} qubits"
        )
    _check_cap(layout, False, DEFAULT_TOLERANCES)
    vec = np.zeros(layout.dim, dtype=complex)
    vec[int(basis_label, 2) if basis_label else 0] = 1.0
    return QuantumState._trusted(layout, vec)


def basis_state(layout: RegisterLayout, values: Mapping[str, int] | None = None) -> QuantumState:
    """Basis state with integer ``values`` per register (missing registers are 0)."""
    values = dict(values or {})
    label = []
    for name, width in layout.registers:
        v = int(values.pop(name, 0))
        if not 0 <= v < (1 << width):
            raise ConfigurationError(f"value {v} does not fit register {name!r} of width {width}")
        label.append(format(v, f"0{width}b"))
    if values:
        raise LayoutError(f"unknown registers {sorted(values)}")
    return initialize(layout, "".join(label))


def from_vector(layout: RegisterLayout, amplitudes: Sequence[complex], normalize: bool = False) -> QuantumState:
    vec = np.asarray(amplitudes, dtype=complex)
    if normalize:
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ConfigurationError("cannot normalise the zero vector")
        vec = vec / norm
    return QuantumState(layout, vec)


def from_density(layout: RegisterLayout, rho: np.ndarray) -> QuantumState:
    return QuantumState(layout, np.asarray(rho, dtype=complex))


def maximally_mixed(layout: RegisterLayout) -> QuantumState:
    _check_cap(layout, True, DEFAULT_TOLERANCES)
    return QuantumState._trusted(layout, np.eye(layout.dim, dtype=complex) / layout.dim)


def random_state(layout: RegisterLayout, seed=None) -> QuantumState:
    """Haar-random pure state."""
    rng = make_rng(seed)
    vec = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    return QuantumState._trusted(layout, vec / np.linalg.norm(vec))


def _kron_vectors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # large products of sparse vectors only touch the nonzero blocks
    if len(a) * len(b) < 1 << 14:
        return np.kron(a, b)
    ia, ib = np.flatnonzero(a != 0), np.flatnonzero(b != 0)
    if len(ia) * len(ib) * 8 >= len(a) * len(b):
        return np.kron(a, b)
    out = np.zeros((len(a), len(b)), dtype=np.result_type(a, b))
    out[np.ix_(ia, ib)] = np.outer(a[ia], b[ib])
    return out.reshape(-1)


def tensor(*states: QuantumState) -> QuantumState:
    """Tensor product; register names must stay unique."""
    if not states:
        raise ConfigurationError("tensor() needs at least one state")
    layout = states[0].layout
    for s in states[1:]:
        layout = layout.concat(s.layout)
    if all(s.is_pure for s in states):
        _check_cap(layout, False, DEFAULT_TOLERANCES)
        data = states[0].data
        for s in states[1:]:
            data = _kron_vectors(data, s.data)
    else:
        _check_cap(layout, True, DEFAULT_TOLERANCES)
        data = states[0].density()
        for s in states[1:]:
            data = np.kron(data, s.density())
    return QuantumState._trusted(layout, data)


def rename(state: QuantumState, mapping: Mapping[str, str]) -> QuantumState:
    layout = RegisterLayout(tuple((mapping.get(n, n), w) for n, w in state.layout.registers))
    return QuantumState._trusted(layout, state.data)


# --- gates ------------------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_FIXED = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "H": _H,
    "S": np.diag([1, 1j]),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
}
_ARITY = {"CNOT": 2, "CPHASE": 2, "Toffoli": 3, "CSWAP": 3, "U": 1, **{k: 1 for k in _FIXED}}


def _controlled(u: np.ndarray, controls: int) -> np.ndarray:
    dim = u.shape[0] << controls
    out = np.eye(dim, dtype=complex)
    out[-u.shape[0]:, -u.shape[0]:] = u
    return out


_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]


@dataclass(frozen=True, eq=False)
class GateOp:
    """A gate on explicit global qubit indices.

    Controls come first in ``targets``: ``CNOT(c, t)``, ``Toffoli(c1, c2, t)``,
    ``CSWAP(c, a, b)``. ``CPHASE`` is symmetric and takes ``theta``; ``U`` takes a
    2x2 ``matrix``.
    """

    kind: str
    targets: tuple[int, ...]
    theta: float | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind not in _ARITY:
            raise ConfigurationError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != _ARITY[self.kind]:
            raise ConfigurationError(f"{self.kind} acts on {_ARITY[self.kind]} qubits, got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ConfigurationError(f"repeated target in {self.targets}")
        if self.kind == "CPHASE" and self.theta is None:
            raise ConfigurationError("CPHASE needs theta")
        if self.kind == "U":
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (2, 2):
                raise ConfigurationError("U needs a 2x2 matrix")
            if np.max(np.abs(m @ m.conj().T - np.eye(2))) > DEFAULT_TOLERANCES.unitary:
                raise ConfigurationError("U matrix is not unitary")
            object.__setattr__(self, "matrix", m)

    def unitary(self) -> np.ndarray:
        if self.kind in _FIXED:
            return _FIXED[self.kind]
        if self.kind == "U":
            return self.matrix
        if self.kind == "CNOT":
            return _controlled(_FIXED["X"], 1)
        if self.kind == "Toffoli":
            return _controlled(_FIXED["X"], 2)
        if self.kind == "CSWAP":
            return _controlled(_SWAP, 1)
        return np.diag([1, 1, 1, np.exp(1j * self.theta)])

    def inverse(self) -> GateOp:
        if self.kind in ("S", "T", "U"):
            return GateOp("U", self.targets, matrix=self.unitary().conj().T)
        if self.kind == "CPHASE":
            return GateOp("CPHASE", self.targets, theta=-self.theta)
        return self


def gate(kind: str, *targets: int, theta: float | None = None, matrix=None) -> GateOp:
    return GateOp(kind, targets, theta=theta, matrix=matrix)


def _apply_on_axes(tensor_: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, tensor_, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_unitary(state: QuantumState, u: np.ndarray, qubits: Sequence[int]) -> QuantumState:
    """Apply a ``2^k x 2^k`` unitary to global qubits (first listed = MSB of ``u``)."""
    n = state.n_qubits
    for q in qubits:
        if not 0 <= q < n:
            raise GateTargetError(f"qubit {q} outside 0..{n - 1}")
    u = np.asarray(u, dtype=complex)
    if state.is_pure:
        psi = _apply_on_axes(state.data.reshape((2,) * n), u, qubits)
        return QuantumState._trusted(state.layout, psi.reshape(-1))
    rho = state.data.reshape((2,) * (2 * n))
    rho = _apply_on_axes(rho, u, qubits)
    rho = _apply_on_axes(rho, u.conj(), [n + q for q in qubits])
    return QuantumState._trusted(state.layout, rho.reshape(state.data.shape))


def apply(state: QuantumState, op: GateOp) -> QuantumState:
    return apply_unitary(state, op.unitary(), op.targets)


def apply_permutation(state: QuantumState, perm: np.ndarray) -> QuantumState:
    """Basis permutation ``|k> -> |perm[k]>``."""
    perm = np.asarray(perm)
    if state.is_pure:
        nz = np.flatnonzero(state.data != 0)
        if len(nz) * 8 < len(perm):
            out = np.zeros(state.data.shape, dtype=state.data.dtype)
            out[perm[nz]] = state.data[nz]
        else:
            out = np.empty_like(state.data)
            out[perm] = state.data
    else:
        out = np.empty_like(state.data)
        out[np.ix_(perm, perm)] = state.data
    return QuantumState._trusted(state.layout, out)


# --- measurement and reduction ----------------------------------------------


def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b")


def measure(state: QuantumState, register: str, seed=None) -> tuple[str, QuantumState]:
    """Projective computational-basis measurement of one register.

    Outcomes are drawn with the Born rule from ``seed`` (an int or a
    ``numpy.random.Generator``); the returned state is renormalised.
    """
    width = state.layout.width(register)
    probs = state.register_probabilities(register)
    probs = probs / probs.sum()
    outcome = int(make_rng(seed).choice(len(probs), p=probs))
    return _bits(outcome, width), collapse(state, register, outcome)


def collapse(state: QuantumState, register: str, value: int) -> QuantumState:
    """Post-measurement state for outcome ``value`` of ``register``."""
    mask = state.layout.field(register) == value
    if state.is_pure:
        out = np.where(mask, state.data, 0)
        norm = np.linalg.norm(out)
        if norm == 0:
            raise PreconditionError(f"outcome {value} of {register!r} has zero probability")
        return QuantumState._trusted(state.layout, out / norm)
    out = state.data * np.outer(mask, mask)
    trace = np.trace(out).real
    if trace <= 0:
        raise PreconditionError(f"outcome {value} of {register!r} has zero probability")
    return QuantumState._trusted(state.layout, out / trace)


def dephase(state: QuantumState, register: str) -> QuantumState:
    """Non-selective computational-basis measurement of ``register``."""
    values = state.layout.field(register)
    rho = state.density() * (values[:, None] == values[None, :])
    return QuantumState._trusted(state.layout, rho)


def reorder(state: QuantumState, names: Sequence[str]) -> QuantumState:
    """Permute whole registers into the order ``names``."""
    layout = state.layout
    if sorted(names) != sorted(layout.names):
        raise LayoutError(f"{names} is not a permutation of {layout.names}")
    if tuple(names) == layout.names:
        return state
    dims = [1 << w for _, w in layout.registers]
    order = [layout.names.index(n) for n in names]
    new_layout = RegisterLayout(tuple(layout.registers[i] for i in order))
    if state.is_pure:
        data = state.data.reshape(dims).transpose(order).reshape(-1)
    else:
        k = len(dims)
        data = state.data.reshape(dims + dims).transpose(order + [k + i for i in order])
        data = data.reshape(state.data.shape)
    return QuantumState._trusted(new_layout, data)


def partial_trace(state: QuantumState, keep: Iterable[str]) -> QuantumState:
    """Reduced density matrix on ``keep`` (registers stay in layout order)."""
    keep = set(keep)
    if not keep:
        raise ConfigurationError("partial_trace needs at least one register to keep")
    kept_layout = state.layout.subset(keep)
    _check_cap(kept_layout, True, DEFAULT_TOLERANCES)
    traced = [n for n in state.layout.names if n not in keep]
    ordered = reorder(state, list(kept_layout.names) + traced)
    dk = kept_layout.dim
    dt = state.layout.dim // dk
    if state.is_pure:
        m = ordered.data.reshape(dk, dt)
        rho = m @ m.conj().T
    else:
        rho = np.einsum("ijkj->ik", ordered.data.reshape(dk, dt, dk, dt))
    return QuantumState._trusted(kept_layout, rho)


def marginal_pure(state: QuantumState, keep: Iterable[str], tol: float = 1e-9) -> QuantumState:
    """Pure reduced state of registers known to factor out of the rest.

    Works through the smaller Gram matrix, so the kept registers may be larger
    than the density-matrix cap. The global phase is arbitrary. Raises when
    the kept registers are entangled with the rest beyond ``tol``.
    """
    keep = set(keep)
    kept_layout = state.layout.subset(keep)
    if not state.is_pure:
        rho = partial_trace(state, keep)
        w, v = np.linalg.eigh(rho.data)
        if 1 - w[-1] > tol:
            raise PreconditionError(f"registers {sorted(keep)} are not in a pure state")
        return QuantumState._trusted(kept_layout, v[:, -1])
    traced = [n for n in state.layout.names if n not in keep]
    ordered = reorder(state, list(kept_layout.names) + traced)
    m = ordered.data.reshape(kept_layout.dim, -1)
    if m.shape[0] <= m.shape[1]:
        w, v = np.linalg.eigh(m @ m.conj().T)
        vec, weight = v[:, -1], w[-1]
    else:
        w, v = np.linalg.eigh(m.conj().T @ m)
        weight = w[-1]
        vec = m @ v[:, -1]
        vec = vec / np.linalg.norm(vec)
    if 1 - weight > tol:
        raise PreconditionError(f"registers {sorted(keep)} are entangled with the rest of the state")
    return QuantumState._trusted(kept_layout, vec)


def drop_register(state: QuantumState, name: str, value: int = 0, tol: float = 1e-10) -> QuantumState:
    """Remove a register known to sit in basis state ``|value>``."""
    mask = state.layout.field(name) == value
    leaked = float(state.probabilities()[~mask].sum())
    if leaked > tol:
        raise PreconditionError(f"register {name!r} is not in |{value}>: weight {leaked:.3e} elsewhere")
    layout = RegisterLayout(tuple(r for r in state.layout.registers if r[0] != name))
    if state.is_pure:
        data = state.data[mask]
        data = data / np.linalg.norm(data)
    else:
        data = state.data[np.ix_(mask, mask)]
        data = data / np.trace(data).real
    return QuantumState._trusted(layout, data)


def replace_qubits_with_zero(state: QuantumState, qubits: Sequence[int]) -> QuantumState:
    """Trace out single qubits and re-prepare each in ``|0>`` (erasure/reset)."""
    n = state.n_qubits
    rho = state.to_mixed().data.reshape((2,) * (2 * n))
    for q in qubits:
        if not 0 <= q < n:
            raise GateTargetError(f"qubit {q} outside 0..{n - 1}")
        reduced = np.trace(rho, axis1=q, axis2=n + q)
        rho = np.zeros_like(rho)
        idx = [slice(None)] * (2 * n)
        idx[q] = 0
        idx[n + q] = 0
        rho[tuple(idx)] = reduced
    return QuantumState._trusted(state.layout, rho.reshape(state.layout.dim, state.layout.dim))


def depolarize(state: QuantumState, registers: Iterable[str], p: float) -> QuantumState:
    """``rho -> (1-p) rho + p Tr_R(rho) (x) I/d_R`` on the listed registers."""
    registers = list(registers)
    if not 0 <= p <= 1:
        raise ConfigurationError(f"depolarizing probability {p} outside [0, 1]")
    mixed = state.to_mixed()
    if p == 0 or not registers:
        return mixed
    rest = [n for n in state.layout.names if n not in registers]
    noise_layout = state.layout.subset(registers)
    noise = maximally_mixed(RegisterLayout(tuple((n, noise_layout.width(n)) for n in registers)))
    replaced = tensor(partial_trace(mixed, rest), noise) if rest else noise
    replaced = reorder(replaced, list(state.layout.names))
    return QuantumState._trusted(state.layout, (1 - p) * mixed.data + p * replaced.data)


# --- distance measures -------------------------------------------------------


def _same_layout(a: QuantumState, b: QuantumState) -> None:
    if a.layout.registers != b.layout.registers:
        raise LayoutError(f"layout mismatch: {a.layout.registers} vs {b.layout.registers}")


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """Uhlmann fidelity ``(Tr|sqrt(a) sqrt(b)|)^2``; ``|<a|b>|^2`` for pure states."""
    _same_layout(a, b)
    if a.is_pure and b.is_pure:
        value = abs(np.vdot(a.data, b.data)) ** 2
    elif a.is_pure:
        value = np.vdot(a.data, b.data @ a.data).real
    elif b.is_pure:
        value = np.vdot(b.data, a.data @ b.data).real
    else:
        w, v = np.linalg.eigh(a.data)
        sqrt_a = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
        inner = np.linalg.eigvalsh(sqrt_a @ b.data @ sqrt_a)
        value = np.sum(np.sqrt(np.clip(inner, 0, None))) ** 2
    return float(min(max(value, 0.0), 1.0))


def trace_distance(a: QuantumState, b: QuantumState) -> float:
    """Half the trace norm of ``a - b``."""
    _same_layout(a, b)
    if a.is_pure and b.is_pure:
        value = np.sqrt(max(0.0, 1.0 - abs(np.vdot(a.data, b.data)) ** 2))
    else:
        value = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(a.density() - b.density())))
    return float(min(max(value, 0.0), 1.0))


def purity(state: QuantumState) -> float:
    if state.is_pure:
        return 1.0
    return float(np.real(np.vdot(state.data, state.data)))
