"""Single-photon sensing with compressed which-band / which-time records.

A photon lands in one of ``R`` frequency bands and ``T_bin`` time bins,
possibly in superposition. Each time step it is captured into ``R`` memory
qubits, the memory is compressed to a ``log2 R`` band address plus a presence
flag, and the flag writes the step index into a ``log2 T_bin`` time register.

Two sites sharing one photon can compare phases after shipping only their
compressed ``log2 N + 1`` qubits.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from qdc.config import spawn
from qdc.core import (
    QuantumState,
    RegisterLayout,
    apply,
    apply_permutation,
    drop_register,
    fidelity,
    from_vector,
    gate,
    initialize,
    tensor,
)
from qdc.errors import ConfigurationError, LayoutError
from qdc.netsim import Network
from qdc.qram import BUS, cell_names, compress_unary, encode_address_U, log2_exact, quantum_query_swap

GRID = 1024


def _pow2(x: int, name: str, minimum: int = 1) -> int:
    x = int(x)
    if x < minimum or x & (x - 1):
        raise ConfigurationError(f"{name}={x} must be a power of two >= {minimum}")
    return x.bit_length() - 1


@dataclass(frozen=True, eq=False)
class ArrivalModel:
    """``amplitudes[r, t]`` for band ``r`` and time bin ``t``."""

    R: int
    T_bin: int
    amplitudes: np.ndarray
    phi: float = 0.0

    def __post_init__(self):
        _pow2(self.R, "R", 2)
        _pow2(self.T_bin, "T_bin", 2)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.R, self.T_bin):
            raise ConfigurationError(f"amplitudes must have shape ({self.R}, {self.T_bin})")
        if abs(np.linalg.norm(amps) - 1) > 1e-10:
            raise ConfigurationError("arrival amplitudes must be normalized")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def single(cls, R: int, T_bin: int, r: int, t: int) -> ArrivalModel:
        amps = np.zeros((R, T_bin), dtype=complex)
        amps[r, t] = 1
        return cls(R, T_bin, amps)

    @classmethod
    def superposed(cls, R: int, T_bin: int, weights: dict[tuple[int, int], complex]) -> ArrivalModel:
        amps = np.zeros((R, T_bin), dtype=complex)
        for (r, t), a in weights.items():
            amps[r, t] = a
        return cls(R, T_bin, amps / np.linalg.norm(amps))


def capture_step(model: ArrivalModel, t: int) -> QuantumState:
    """Memory state ``D1 .. DR`` at step ``t``, conditioned on arrival then.

    The all-zero (vacuum) state when no amplitude sits in bin ``t``.
    """
    if not 0 <= t < model.T_bin:
        raise ConfigurationError(f"time step {t} outside 0..{model.T_bin - 1}")
    layout = RegisterLayout(tuple((c, 1) for c in cell_names(model.R)))
    col = model.amplitudes[:, t]
    norm = np.linalg.norm(col)
    if norm == 0:
        return initialize(layout, "0" * model.R)
    vec = np.zeros(layout.dim, dtype=complex)
    for r, a in enumerate(col / norm):
        vec[1 << (model.R - 1 - r)] = a
    return from_vector(layout, vec)


def compress_which_frequency(memory: QuantumState) -> tuple[QuantumState, QuantumState]:
    """``(band address Q1, presence flag Q2)``; vacuum gives ``|0..0>, |0>``."""
    return compress_unary(memory, allow_vacuum=True)


def _xor_where(layout: RegisterLayout, target: str, value: int, mask: np.ndarray) -> np.ndarray:
    idx = np.arange(layout.dim, dtype=np.int64)
    return np.where(mask, idx ^ (int(value) << layout.shift(target)), idx)


def encode_which_time(
    flag: QuantumState,
    t: int,
    time_register: QuantumState | None = None,
    *,
    flag_name: str = BUS,
    time_name: str = "T",
) -> QuantumState:
    """Controlled on ``flag_name = |1>``, XOR ``t`` into the time register.

    ``flag`` may already contain the time register, in which case
    ``time_register`` is omitted.
    """
    state = flag if time_register is None else tensor(flag, time_register)
    layout = state.layout
    if layout.width(flag_name) != 1:
        raise LayoutError("flag register must be a single qubit")
    if not 0 <= t < 1 << layout.width(time_name):
        raise ConfigurationError(f"time {t} does not fit register {time_name}")
    return apply_permutation(state, _xor_where(layout, time_name, t, layout.field(flag_name) == 1))


@dataclass(frozen=True)
class CaptureResult:
    state: QuantumState
    target: QuantumState
    fidelity: float


def capture_layout(R: int, T_bin: int) -> RegisterLayout:
    """Field mode, time, band, presence, scratch flag and the memory qubits."""
    field_width = max(1, (R * T_bin).bit_length())
    regs = [("FIELD", field_width), ("T", _pow2(T_bin, "T_bin", 2)), ("A", _pow2(R, "R", 2)), ("P", 1), ("F", 1)]
    return RegisterLayout(tuple(regs + [(c, 1) for c in cell_names(R)]))


def run_capture(model: ArrivalModel) -> CaptureResult:
    """Step through every time bin and compare with ``sum a_rt |t>|r>|1>``.

    The field register holds ``1 + r T_bin + t`` while the photon is in flight
    and ``0`` once absorbed.
    """
    R, T = model.R, model.T_bin
    layout = capture_layout(R, T)
    cells = cell_names(R)
    vec = np.zeros(layout.dim, dtype=complex)
    shift = layout.shift("FIELD")
    for r in range(R):
        for t in range(T):
            vec[(1 + r * T + t) << shift] = model.amplitudes[r, t]
    state = from_vector(layout, vec)
    field = layout.field("FIELD")
    idx = np.arange(layout.dim, dtype=np.int64)
    for t in range(T):
        for r, cell in enumerate(cells):
            mode = 1 + r * T + t
            m = layout.field(cell)
            cs = layout.shift(cell)
            absorb = (field == mode) & (m == 0)
            emit = (field == 0) & (m == 1)
            perm = idx.copy()
            perm[absorb] = idx[absorb] - (mode << shift) + (1 << cs)
            perm[emit] = idx[emit] + (mode << shift) - (1 << cs)
            state = apply_permutation(state, perm)
        state = encode_address_U(state, address="A", cells=cells, permissive=True, allow_vacuum=True)
        state = quantum_query_swap(state, address="A", bus="F", cells=cells)
        state = encode_which_time(state, t, flag_name="F", time_name="T")
        state = apply_permutation(state, _xor_where(layout, "P", 1, layout.field("F") == 1))
        done = (layout.field("P") == 1) & (layout.field("T") == t)
        state = apply_permutation(state, _xor_where(layout, "F", 1, done))
    for name in ["FIELD", "F", *cells]:
        state = drop_register(state, name, 0, tol=1e-9)
    tgt_layout = state.layout
    tvec = np.zeros(tgt_layout.dim, dtype=complex)
    for r in range(R):
        for t in range(T):
            tvec[basis_index(tgt_layout, T=t, A=r, P=1)] = model.amplitudes[r, t]
    target = from_vector(tgt_layout, tvec)
    return CaptureResult(state, target, fidelity(state, target))


def basis_index(layout: RegisterLayout, **values: int) -> int:
    return int(sum(v << layout.shift(k) for k, v in values.items()))


# --- cost accounting -----------------------------------------------------------------


@dataclass(frozen=True)
class CostAccount:
    R: int
    T_bin: int
    N: int
    qubits_scheme_reference: int
    qubits_scheme_qdc: int
    entangled_pairs_unary: int
    entangled_pairs_binary: int

    @property
    def inverted(self) -> bool:
        """True where unit constants make the compressed scheme cost more."""
        return self.qubits_scheme_qdc > self.qubits_scheme_reference

    def to_dict(self) -> dict:
        return asdict(self) | {"inverted": self.inverted}


def hardware_cost(R: int, T_bin: int, N: int | None = None) -> CostAccount:
    """Unit-constant qubit counts: ``R log T_bin`` against ``R + log T_bin``."""
    _pow2(R, "R")
    lt = _pow2(T_bin, "T_bin")
    N = R * T_bin if N is None else N
    ln = _pow2(N, "N")
    return CostAccount(R, T_bin, N, R * lt, R + lt, N, ln)


def binary_entropy(p: float) -> float:
    if not 0 <= p <= 1:
        raise ConfigurationError("p must lie in [0, 1]")
    if p in (0, 1):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def schumacher_qubits(m: int, p: float) -> float:
    """Compressed size bound ``m H(p)`` for ``m`` sparse-excitation qubits."""
    return m * binary_entropy(p)


# --- two-site phase estimation -------------------------------------------------------


SITE_A = "siteA"
SITE_B = "siteB"


def _site_cells(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{j + 1}" for j in range(n)]


def _compress_site(state: QuantumState, prefix: str, addr: str, flag: str, n: int) -> QuantumState:
    k = log2_exact(n)
    cells = _site_cells(prefix, n)
    state = tensor(initialize(RegisterLayout.of(**{addr: k, flag: 1}), "0" * (k + 1)), state)
    state = encode_address_U(state, address=addr, cells=cells, allow_vacuum=True)
    state = quantum_query_swap(state, address=addr, bus=flag, cells=cells)
    for c in cells:
        state = drop_register(state, c, 0, tol=1e-9)
    return state


def shared_photon(n: int, b: int, phi: float) -> QuantumState:
    """``(|bin b>_A |0>_B + e^{i phi} |0>_A |bin b>_B) / sqrt 2`` in unary memories."""
    regs = tuple((c, 1) for c in _site_cells("DA", n) + _site_cells("DB", n))
    layout = RegisterLayout(regs)
    vec = np.zeros(layout.dim, dtype=complex)
    vec[1 << (2 * n - 1 - b)] = 1 / math.sqrt(2)
    vec[1 << (n - 1 - b)] = np.exp(1j * phi) / math.sqrt(2)
    return from_vector(layout, vec)


def compressed_event(n: int, b: int, phi: float) -> QuantumState:
    """Both sites compressed to ``(QA, FA)`` and ``(QB, FB)``."""
    state = _compress_site(shared_photon(n, b, phi), "DA", "QA", "FA", n)
    return _compress_site(state, "DB", "QB", "FB", n)


def interfere(state: QuantumState) -> QuantumState:
    """At site A: swap addresses if B saw the photon, fold B's flag, Hadamard."""
    layout = state.layout
    idx = np.arange(layout.dim, dtype=np.int64)
    qa, qb = layout.field("QA"), layout.field("QB")
    sa, sb = layout.shift("QA"), layout.shift("QB")
    sel = layout.field("FB") == 1
    swapped = idx ^ ((qa ^ qb) << sa) ^ ((qa ^ qb) << sb)
    state = apply_permutation(state, np.where(sel, swapped, idx))
    fa = layout.qubits("FA")[0]
    state = apply(state, gate("CNOT", fa, layout.qubits("FB")[0]))
    return apply(state, gate("H", fa))


def zero_probability(state: QuantumState) -> float:
    return float(state.register_probabilities("FA")[0])


def estimate_phase(n0: int, n1: int, grid: int = GRID) -> float:
    """Grid maximum-likelihood estimate on ``[0, pi]`` for ``P(0) = (1 + cos phi) / 2``."""
    phis = 2 * np.pi * np.arange(grid // 2 + 1) / grid
    p0 = (1 + np.cos(phis)) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.where(n0 > 0, n0 * np.log(p0), 0.0) + np.where(n1 > 0, n1 * np.log(1 - p0), 0.0)
    return float(phis[int(np.argmax(ll))])


@dataclass(frozen=True)
class PhaseResult:
    phi_true: float
    phi_est: float
    rmse: float
    shots: int
    trials: int
    n_bins: int
    pairs_consumed_per_event: float
    pairs_uncompressed_per_event: int
    zero_probability: float
    cost_account: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def phase_estimation_run(
    phi_true: float,
    n_bins: int,
    shots: int,
    seed=None,
    *,
    trials: int = 32,
    grid: int = GRID,
    R: int = 4,
    T_bin: int = 256,
) -> PhaseResult:
    """Event-by-event estimate through the network, plus an RMSE over ``trials``.

    Each event draws the photon's bin uniformly, teleports site B's
    compressed registers to site A and measures A's flag after interfering.
    Events with the same bin are identical up to the outcome, so the
    compressed state and outcome law are computed once per bin.
    """
    if shots < 1:
        raise ConfigurationError("shots must be >= 1")
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    k = log2_exact(n_bins)
    if 2 * n_bins + k + 1 > 22:
        raise ConfigurationError(f"{n_bins} bins exceed the simulator's qubit cap")
    events = [compressed_event(n_bins, b, phi_true) for b in range(n_bins)]
    p0 = np.array([zero_probability(interfere(e)) for e in events])

    rng_main, rng_trials = spawn(seed, 2)
    net = Network(rng_main)
    ch = net.connect(SITE_B, SITE_A)
    bins = rng_main.integers(n_bins, size=shots)
    net.distribute_epr(ch, shots * (k + 1))
    zeros = 0
    for b in bins:
        moved = net.teleport(ch, events[b], registers=["QB", "FB"])
        p = zero_probability(interfere(moved.state)) if moved.erased else p0[b]
        zeros += rng_main.random() < p
    phi_est = estimate_phase(zeros, shots - zeros, grid)

    errors = []
    for trng in rng_trials.spawn(trials):
        b = trng.integers(n_bins, size=shots)
        z = int(np.count_nonzero(trng.random(shots) < p0[b]))
        errors.append(estimate_phase(z, shots - z, grid) - phi_true)
    rmse = float(np.sqrt(np.mean(np.square(errors))))
    return PhaseResult(
        phi_true=float(phi_true),
        phi_est=phi_est,
        rmse=rmse,
        shots=int(shots),
        trials=int(trials),
        n_bins=int(n_bins),
        pairs_consumed_per_event=net.metrics.epr_consumed / shots,
        pairs_uncompressed_per_event=int(n_bins),
        zero_probability=float(p0.mean()),
        cost_account=hardware_cost(R, T_bin).to_dict(),
    )


__all__ = [
    "ArrivalModel",
    "CaptureResult",
    "CostAccount",
    "PhaseResult",
    "binary_entropy",
    "capture_step",
    "compress_which_frequency",
    "compressed_event",
    "encode_which_time",
    "estimate_phase",
    "hardware_cost",
    "interfere",
    "phase_estimation_run",
    "run_capture",
    "schumacher_qubits",
    "shared_photon",
]
