"""QRAM query semantics, unary-to-binary compression and query cost accounting.

Queries act directly as basis permutations on the joint address/bus/memory
space; no router tree is simulated. Default register names are ``Q1`` for the
address, ``Q2`` for the bus (output) register and ``D1 .. DN`` for memory
cells, where ``D1`` holds address 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from qdc.config import DEFAULT_TOLERANCES, Tolerances
from qdc.core import (
    QuantumState,
    RegisterLayout,
    apply_permutation,
    basis_state,
    initialize,
    marginal_pure,
    partial_trace,
    purity,
    rename,
    tensor,
)
from qdc.errors import ConfigurationError, LayoutError, PreconditionError, SubspaceViolationError

ADDRESS = "Q1"
BUS = "Q2"
MODES = ("classical", "quantum")


def log2_exact(n: int) -> int:
    """``log2(n)`` for a power of two ``n >= 2``."""
    n = int(n)
    if n < 2 or n & (n - 1):
        raise ConfigurationError(f"database size {n} is not a power of two >= 2")
    return n.bit_length() - 1


def cell_names(n: int) -> list[str]:
    return [f"D{j + 1}" for j in range(n)]


def query_layout(n: int, word_width: int, cells: bool = False) -> RegisterLayout:
    """``Q1 (log N) , Q2 (w)`` and optionally ``D1 .. DN (w each)``."""
    regs = [(ADDRESS, log2_exact(n)), (BUS, word_width)]
    if cells:
        regs += [(name, word_width) for name in cell_names(n)]
    return RegisterLayout(tuple(regs))


@dataclass(frozen=True, eq=False)
class QramInstance:
    """A database of ``n`` words (classical) or ``n`` quantum cells.

    In quantum mode ``quantum_cells`` is a state whose layout contains the
    registers ``D1 .. DN`` of width ``word_width``.
    """

    n: int
    mode: str
    word_width: int
    classical_data: tuple[int, ...] = ()
    quantum_cells: QuantumState | None = None

    def __post_init__(self):
        log2_exact(self.n)
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.word_width < 1:
            raise ConfigurationError("word width must be at least 1")
        if self.mode == "classical":
            data = tuple(int(x) for x in self.classical_data)
            if len(data) != self.n:
                raise ConfigurationError(f"expected {self.n} classical words, got {len(data)}")
            for x in data:
                if not 0 <= x < (1 << self.word_width):
                    raise ConfigurationError(f"word {x} does not fit in {self.word_width} bits")
            object.__setattr__(self, "classical_data", data)
        else:
            if self.quantum_cells is None:
                raise ConfigurationError("quantum mode needs quantum_cells")
            for name in cell_names(self.n):
                if self.quantum_cells.layout.width(name) != self.word_width:
                    raise LayoutError(f"cell {name} is not {self.word_width} qubits wide")

    @classmethod
    def classical(cls, data: Sequence[int], word_width: int) -> QramInstance:
        return cls(len(data), "classical", word_width, tuple(data))

    @classmethod
    def quantum(cls, cells: QuantumState, n: int, word_width: int) -> QramInstance:
        return cls(n, "quantum", word_width, quantum_cells=cells)

    @classmethod
    def empty_quantum(cls, n: int, word_width: int) -> QramInstance:
        layout = RegisterLayout(tuple((name, word_width) for name in cell_names(n)))
        return cls.quantum(initialize(layout, "0" * layout.total_qubits), n, word_width)

    @property
    def address_width(self) -> int:
        return log2_exact(self.n)

    def to_json(self) -> str:
        if self.mode == "classical":
            data = list(self.classical_data)
        else:
            raw = self.quantum_cells.data
            if raw.ndim == 1:
                data = [[float(z.real), float(z.imag)] for z in raw]
            else:
                data = [[[float(z.real), float(z.imag)] for z in row] for row in raw]
            if self.quantum_cells.layout.names != tuple(cell_names(self.n)):
                raise ConfigurationError("only memories made of D1..DN alone can be serialised")
        doc = {"N": self.n, "mode": self.mode, "word_width": self.word_width, "data": data}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> QramInstance:
        doc = json.loads(text)
        unknown = set(doc) - {"N", "mode", "word_width", "data"}
        if unknown:
            raise ConfigurationError(f"unknown keys {sorted(unknown)}")
        try:
            n, mode, w, data = int(doc["N"]), doc["mode"], int(doc["word_width"]), doc["data"]
        except KeyError as exc:
            raise ConfigurationError(f"missing key {exc}") from None
        if mode == "classical":
            return cls(n, mode, w, tuple(data))
        arr = np.asarray(data, dtype=float)
        amps = arr[..., 0] + 1j * arr[..., 1]
        layout = RegisterLayout(tuple((name, w) for name in cell_names(n)))
        return cls.quantum(QuantumState(layout, amps), n, w)


# --- classical data: XOR the word into the bus ---------------------------------


@lru_cache(maxsize=16)
def _xor_permutation(registers, data: tuple[int, ...], address: str, output: str) -> np.ndarray:
    layout = RegisterLayout(registers)
    idx = np.arange(layout.dim, dtype=np.int64)
    table = np.asarray(data, dtype=np.int64)
    perm = idx ^ (table[layout.field(address)] << layout.shift(output))
    perm.setflags(write=False)
    return perm


def classical_query(
    state: QuantumState,
    db: QramInstance,
    *,
    address: str = ADDRESS,
    output: str = BUS,
    permissive: bool = False,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> QuantumState:
    """``sum_i a_i |i>|0> -> sum_i a_i |i>|x_i>``.

    Realised as ``|i>|y> -> |i>|y XOR x_i>``, which is self-inverse. The bus
    must start in ``|0>`` on every branch unless ``permissive`` is set.
    """
    if db.mode != "classical":
        raise ConfigurationError("classical_query needs a classical database")
    layout = state.layout
    if layout.width(address) != db.address_width:
        raise LayoutError(f"address register must have {db.address_width} qubits")
    if layout.width(output) != db.word_width:
        raise LayoutError(f"output register must have {db.word_width} qubits")
    if not permissive:
        dirty = float(state.probabilities()[layout.field(output) != 0].sum())
        if dirty > tol.subspace:
            raise PreconditionError(f"output register not cleared: weight {dirty:.3e} on nonzero values")
    perm = _xor_permutation(layout.registers, db.classical_data, address, output)
    return apply_permutation(state, perm)


# --- quantum data: controlled swap of bus and cell -----------------------------


@lru_cache(maxsize=16)
def _swap_permutation(registers, address: str, bus: str, cells: tuple[str, ...]) -> np.ndarray:
    layout = RegisterLayout(registers)
    idx = np.arange(layout.dim, dtype=np.int64)
    perm = idx.copy()
    addr = layout.field(address)
    bus_vals = layout.field(bus)
    bus_shift = layout.shift(bus)
    wmask = (1 << layout.width(bus)) - 1
    for i, cell in enumerate(cells):
        sel = addr == i
        cell_shift = layout.shift(cell)
        clear = ~((wmask << bus_shift) | (wmask << cell_shift))
        cell_vals = layout.field(cell)[sel]
        perm[sel] = (idx[sel] & clear) | (cell_vals << bus_shift) | (bus_vals[sel] << cell_shift)
    perm.setflags(write=False)
    return perm


def quantum_query_swap(
    state: QuantumState,
    *,
    address: str = ADDRESS,
    bus: str = BUS,
    cells: Sequence[str] | None = None,
) -> QuantumState:
    """Conditioned on ``address = |i>``, swap the bus with cell ``i``.

    Linear, unitary and self-inverse; entangled memories are handled by
    linearity.
    """
    layout = state.layout
    n = 1 << layout.width(address)
    cells = tuple(cells) if cells is not None else tuple(cell_names(n))
    if len(cells) != n:
        raise LayoutError(f"{len(cells)} cells for a {layout.width(address)}-qubit address")
    w = layout.width(bus)
    for cell in cells:
        if layout.width(cell) != w:
            raise LayoutError(f"cell {cell} width {layout.width(cell)} differs from bus width {w}")
    return apply_permutation(state, _swap_permutation(layout.registers, address, bus, cells))


def write(db: QramInstance, address, payload):
    """Upload a word or a quantum payload.

    Classical mode takes an integer address and word and returns the updated
    instance. Quantum mode swaps ``payload`` into the addressed cell through
    :func:`quantum_query_swap`; ``address`` may be an integer or a state of the
    ``Q1`` register. It returns ``(instance, joint)`` where ``joint`` is the
    state of ``Q1, Q2, D1..DN`` after the swap (the old cell content is now in
    ``Q2``) and the instance's cells hold the reduced memory state.
    """
    if db.mode == "classical":
        address = int(address)
        if not 0 <= address < db.n:
            raise ConfigurationError(f"address {address} outside 0..{db.n - 1}")
        if not 0 <= int(payload) < (1 << db.word_width):
            raise ConfigurationError(f"word {payload} does not fit in {db.word_width} bits")
        data = list(db.classical_data)
        data[address] = int(payload)
        return replace(db, classical_data=tuple(data))

    if isinstance(address, QuantumState):
        if address.layout.total_qubits != db.address_width or len(address.layout.names) != 1:
            raise LayoutError(f"address state must be one {db.address_width}-qubit register")
        addr_state = rename(address, {address.layout.names[0]: ADDRESS})
    else:
        address = int(address)
        if not 0 <= address < db.n:
            raise ConfigurationError(f"address {address} outside 0..{db.n - 1}")
        addr_state = basis_state(RegisterLayout.of(Q1=db.address_width), {ADDRESS: address})
    if payload.layout.total_qubits != db.word_width or len(payload.layout.names) != 1:
        raise LayoutError(f"payload must be one {db.word_width}-qubit register")
    payload = rename(payload, {payload.layout.names[0]: BUS})
    joint = quantum_query_swap(tensor(addr_state, payload, db.quantum_cells))
    cells = cell_names(db.n)
    extra = [n for n in db.quantum_cells.layout.names if n not in cells]
    keep = cells + extra
    try:
        memory = marginal_pure(joint, keep)
    except PreconditionError:
        memory = partial_trace(joint, keep)
    return replace(db, quantum_cells=memory), joint


# --- unary-to-binary compression --------------------------------------------


def _one_hot_count(layout: RegisterLayout, cells: Sequence[str]) -> np.ndarray:
    count = np.zeros(layout.dim, dtype=np.int64)
    for cell in cells:
        count += layout.field(cell)
    return count


@lru_cache(maxsize=8)
def _subspace_mask(registers, address: str, cells: tuple[str, ...], allow_vacuum: bool) -> np.ndarray:
    layout = RegisterLayout(registers)
    count = _one_hot_count(layout, cells)
    valid = (layout.field(address) == 0) & ((count == 1) | ((count == 0) & allow_vacuum))
    valid.setflags(write=False)
    return valid


@lru_cache(maxsize=8)
def _encode_permutation(registers, address: str, cells: tuple[str, ...]) -> np.ndarray:
    layout = RegisterLayout(registers)
    acc = np.zeros(layout.dim, dtype=np.int64)
    for i, cell in enumerate(cells):
        acc ^= layout.field(cell) * i
    perm = np.arange(layout.dim, dtype=np.int64) ^ (acc << layout.shift(address))
    perm.setflags(write=False)
    return perm


def _unary_cells(layout: RegisterLayout, address: str, cells) -> tuple[str, ...]:
    n = 1 << layout.width(address)
    cells = tuple(cells) if cells is not None else tuple(cell_names(n))
    if len(cells) != n:
        raise LayoutError(f"{len(cells)} memory qubits for a {layout.width(address)}-qubit address")
    for cell in cells:
        if layout.width(cell) != 1:
            raise LayoutError(f"unary memory cell {cell} must be a single qubit")
    return cells


def leaked_weight(
    state: QuantumState,
    *,
    address: str = ADDRESS,
    cells: Sequence[str] | None = None,
    allow_vacuum: bool = False,
) -> float:
    """Probability outside ``|0>_address (x) single-excitation(cells)``."""
    layout = state.layout
    cells = _unary_cells(layout, address, cells)
    valid = _subspace_mask(layout.registers, address, cells, bool(allow_vacuum))
    return float(state.probabilities()[~valid].sum())


def encode_address_U(
    state: QuantumState,
    *,
    address: str = ADDRESS,
    cells: Sequence[str] | None = None,
    permissive: bool = False,
    allow_vacuum: bool = False,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> QuantumState:
    """``|0>_Q1 sum_i a_i |one-hot i> -> sum_i a_i |i>_Q1 |one-hot i>``.

    Built from ``N`` controlled writes: for every cell ``D_i`` in ``|1>``, ``i``
    is XORed into the address register. The input is checked against the
    single-excitation subspace unless ``permissive`` is set.
    """
    cells = _unary_cells(state.layout, address, cells)
    if not permissive:
        leak = leaked_weight(state, address=address, cells=cells, allow_vacuum=allow_vacuum)
        if leak > tol.subspace:
            raise SubspaceViolationError(leak)
    return apply_permutation(state, _encode_permutation(state.layout.registers, address, cells))


def _unary_layout(memory: QuantumState) -> int:
    n = len(memory.layout.names)
    log2_exact(n)
    for name, width in memory.layout.registers:
        if width != 1:
            raise LayoutError(f"unary memory register {name} must be a single qubit")
    return n


def compress_joint(
    memory: QuantumState,
    *,
    allow_vacuum: bool = False,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> QuantumState:
    """Run ``U`` then one swap query and return the joint ``Q1, Q2`` state.

    Every memory qubit ends in ``|0>``; the memory is dropped from the result.
    With ``allow_vacuum`` the empty memory maps to ``|0>_Q1 |0>_Q2``.
    """
    n = _unary_layout(memory)
    names = memory.layout.names
    head = initialize(RegisterLayout.of(Q1=log2_exact(n), Q2=1), "0" * (log2_exact(n) + 1))
    joint = tensor(head, memory)
    joint = encode_address_U(joint, cells=names, allow_vacuum=allow_vacuum, tol=tol)
    joint = quantum_query_swap(joint, cells=names)
    dim_mem = 1 << n
    layout = RegisterLayout.of(Q1=log2_exact(n), Q2=1)
    if joint.is_pure:
        block = joint.data.reshape(-1, dim_mem)
        left = float(np.sum(np.abs(block[:, 1:]) ** 2))
        out = block[:, 0]
    else:
        rho = joint.data.reshape(layout.dim, dim_mem, layout.dim, dim_mem)
        left = float(1 - np.trace(rho[:, 0, :, 0]).real)
        out = rho[:, 0, :, 0]
    if left > tol.subspace:
        raise SubspaceViolationError(left, f"memory not cleared by compression: weight {left:.3e}")
    if out.ndim == 1:
        out = out / np.linalg.norm(out)
    else:
        out = out / np.trace(out).real
    return QuantumState._trusted(layout, out)


def compress_unary(
    memory: QuantumState,
    *,
    allow_vacuum: bool = False,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[QuantumState, QuantumState]:
    """Compress a single-excitation memory into ``(Q1 binary state, Q2 flag)``.

    Raises :class:`SubspaceViolationError` for inputs outside the subspace, and
    :class:`PreconditionError` when a vacuum/excitation superposition leaves
    ``Q1`` entangled with the flag.
    """
    joint = compress_joint(memory, allow_vacuum=allow_vacuum, tol=tol)
    if joint.is_pure:
        block = joint.data.reshape(-1, 2)
        if not allow_vacuum:
            k = joint.layout.width(ADDRESS)
            binary = QuantumState._trusted(RegisterLayout.of(Q1=k), block[:, 1] / np.linalg.norm(block[:, 1]))
            return binary, initialize(RegisterLayout.of(Q2=1), "1")
        binary = marginal_pure(joint, [ADDRESS])
        flag = marginal_pure(joint, [BUS])
        return binary, flag
    return partial_trace(joint, [ADDRESS]), partial_trace(joint, [BUS])


def decompress(binary: QuantumState, n: int | None = None) -> QuantumState:
    """Inverse of :func:`compress_unary` for a flag in ``|1>``.

    Returns the unary memory over ``D1 .. DN``.
    """
    if len(binary.layout.names) != 1:
        raise LayoutError("binary state must be a single register")
    k = binary.layout.total_qubits
    n = 1 << k if n is None else n
    if log2_exact(n) != k:
        raise LayoutError(f"{k}-qubit register cannot address {n} cells")
    binary = rename(binary, {binary.layout.names[0]: ADDRESS})
    mem_layout = RegisterLayout(tuple((name, 1) for name in cell_names(n)))
    joint = tensor(binary, initialize(RegisterLayout.of(Q2=1), "1"), initialize(mem_layout, "0" * n))
    joint = quantum_query_swap(joint)
    joint = encode_address_U(joint, permissive=True)
    head = 1 << (k + 1)
    if joint.is_pure:
        out = joint.data.reshape(head, -1)[0]
    else:
        d = 1 << n
        out = joint.data.reshape(head, d, head, d)[0, :, 0, :]
    return QuantumState._trusted(mem_layout, out)


def unary_state(amplitudes: Sequence[complex]) -> QuantumState:
    """``sum_i a_i |one-hot i>`` over ``D1 .. DN``; amplitudes are normalised."""
    amps = np.asarray(amplitudes, dtype=complex)
    n = len(amps)
    log2_exact(n)
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ConfigurationError("amplitudes are all zero")
    vec = np.zeros(1 << n, dtype=complex)
    for i, a in enumerate(amps / norm):
        vec[1 << (n - 1 - i)] = a
    return QuantumState._trusted(RegisterLayout(tuple((name, 1) for name in cell_names(n))), vec)


def binary_state(amplitudes: Sequence[complex], name: str = ADDRESS) -> QuantumState:
    """``sum_i a_i |i>`` on a ``log2 N``-qubit register; amplitudes are normalised."""
    amps = np.asarray(amplitudes, dtype=complex)
    k = log2_exact(len(amps))
    return QuantumState(RegisterLayout(((name, k),)), amps / np.linalg.norm(amps))


def compressed_purity(memory: QuantumState) -> float:
    """Purity of the address register after compression."""
    joint = compress_joint(memory)
    return purity(partial_trace(joint, [ADDRESS]))


# --- cost descriptor ---------------------------------------------------------


def _ceil(x: float) -> int:
    r = round(x)
    return int(r) if abs(x - r) < 1e-9 else math.ceil(x)


@dataclass(frozen=True)
class QueryCost:
    """Resources for one query of an ``n``-word database.

    ``magic_states = ceil(c_magic sqrt(N))`` is what a user distils to run the
    query locally; ``transmitted_qubits = 2 (log2 N + w)`` is the round trip
    of ``Q1`` and ``Q2`` when the query is outsourced.
    """

    n: int
    word_width: int
    magic_states: int
    ancilla_qubits: int
    transmitted_qubits: int
    c_magic: float = 1.0
    c_anc: float = 1.0


def query_cost(n: int, word_width: int = 1, c_magic: float = 1.0, c_anc: float = 1.0) -> QueryCost:
    k = log2_exact(n)
    root = math.sqrt(n)
    return QueryCost(
        n=n,
        word_width=word_width,
        magic_states=_ceil(c_magic * root),
        ancilla_qubits=_ceil(c_anc * root),
        transmitted_qubits=2 * (k + word_width),
        c_magic=c_magic,
        c_anc=c_anc,
    )
