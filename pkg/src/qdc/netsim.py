"""Discrete-event network of users and data-center nodes.

Qubits move only by teleportation: every qubit consumes one EPR pair from the
channel's pool and two classical bits. Lost qubits come out as flagged
erasures (traced out and reset to ``|0>``). A node serves one query at a time:
it is busy for ``1 / throughput`` and each query completes ``tau`` after it
starts.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qdc.config import make_rng
from qdc.core import QuantumState, RegisterLayout, depolarize, from_vector, measure, replace_qubits_with_zero, tensor
from qdc.errors import ConfigurationError, LayoutError, PreconditionError, ResourceError
from qdc.qram import ADDRESS, BUS, QramInstance, cell_names, classical_query, quantum_query_swap, query_cost


@dataclass
class NetworkMetrics:
    qubits_teleported: int = 0
    epr_consumed: int = 0
    classical_bits_sent: int = 0
    elapsed_time: float = 0.0
    queries_completed: int = 0
    qubits_erased: int = 0

    def copy(self) -> NetworkMetrics:
        return dataclasses.replace(self)

    def minus(self, before: NetworkMetrics) -> NetworkMetrics:
        return NetworkMetrics(**{k: v - getattr(before, k) for k, v in dataclasses.asdict(self).items()})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class Channel:
    endpoints: tuple[str, str]
    epr_pool: int = 0
    loss_probability: float = 0.0
    hop_latency: float = 0.0

    def __post_init__(self):
        if self.epr_pool < 0:
            raise ConfigurationError("epr_pool must be >= 0")
        if not 0 <= self.loss_probability < 1:
            raise ConfigurationError("loss_probability must lie in [0, 1)")
        if self.hop_latency < 0:
            raise ConfigurationError("hop_latency must be >= 0")


@dataclass
class QdcNode:
    """A data center: a QRAM plus its query timing.

    ``epsilon`` is reported and only applied when ``depolarizing`` is set.
    ``measures_address`` turns the node into a dishonest server that measures
    the incoming address register.
    """

    id: str
    qram: QramInstance
    tau: float = 1.0
    throughput: float = 1.0
    epsilon: float = 0.0
    depolarizing: bool = False
    measures_address: bool = False
    busy_until: float = 0.0
    memory: QuantumState | None = None

    def __post_init__(self):
        if self.tau <= 0 or self.throughput <= 0:
            raise ConfigurationError("tau and throughput must be > 0")
        if not 0 <= self.epsilon <= 1:
            raise ConfigurationError("epsilon must lie in [0, 1]")
        if self.memory is None and self.qram.mode == "quantum":
            self.memory = self.qram.quantum_cells

    @property
    def n(self) -> int:
        return self.qram.n


@dataclass(frozen=True)
class Teleported:
    state: QuantumState
    erased: tuple[int, ...]


@dataclass(frozen=True)
class QueryResult:
    state: QuantumState
    metrics: NetworkMetrics
    erased: tuple[int, ...]
    address_outcome: str | None
    submitted: float
    started: float
    returned: float


def t_state() -> QuantumState:
    return from_vector(RegisterLayout.of(M=1), [1, np.exp(1j * np.pi / 4)], normalize=True)


class Network:
    """Owns nodes, channels, metrics, the RNG and the event log."""

    def __init__(self, seed=None):
        self.rng = make_rng(seed)
        self.nodes: dict[str, QdcNode] = {}
        self.channels: dict[frozenset, Channel] = {}
        self.metrics = NetworkMetrics()
        self.clock = 0.0
        self._events: list[tuple[float, int, dict]] = []

    # --- topology -------------------------------------------------------------

    def add_node(self, node: QdcNode) -> QdcNode:
        if node.id in self.nodes:
            raise ConfigurationError(f"duplicate node id {node.id!r}")
        self.nodes[node.id] = node
        return node

    def connect(self, a: str, b: str, *, epr_pool: int = 0, loss_probability: float = 0.0, hop_latency: float = 0.0) -> Channel:
        if a == b:
            raise ConfigurationError("a channel needs two distinct endpoints")
        ch = Channel((a, b), epr_pool, loss_probability, hop_latency)
        self.channels[frozenset((a, b))] = ch
        return ch

    def channel(self, a: str, b: str) -> Channel:
        try:
            return self.channels[frozenset((a, b))]
        except KeyError:
            raise ConfigurationError(f"no channel between {a!r} and {b!r}") from None

    # --- events ---------------------------------------------------------------

    def _log(self, time: float, kind: str, **fields) -> None:
        self._events.append((time, len(self._events), {"t": time, "event": kind, **fields}))

    def events(self) -> list[dict]:
        return [e for _, _, e in sorted(self._events, key=lambda x: (x[0], x[1]))]

    def event_log(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events())

    def advance(self, time: float) -> None:
        """Move the user-side clock forward to ``time``."""
        if time < self.clock:
            raise ConfigurationError("the clock cannot run backwards")
        self.clock = time

    def _finish(self, time: float) -> None:
        self.metrics.elapsed_time = max(self.metrics.elapsed_time, time)

    # --- primitives -----------------------------------------------------------

    def distribute_epr(self, channel: Channel, count: int) -> Channel:
        if count < 0:
            raise ConfigurationError("count must be >= 0")
        channel.epr_pool += count
        self._log(self.clock, "epr", endpoints=list(channel.endpoints), count=count, pool=channel.epr_pool)
        return channel

    def teleport(
        self,
        channel: Channel,
        state: QuantumState,
        seed=None,
        *,
        registers: Sequence[str] | None = None,
        time: float | None = None,
    ) -> Teleported:
        """Send ``registers`` (default: the whole state) across ``channel``.

        All or nothing: a short pool raises before any qubit moves.
        """
        registers = list(state.layout.names if registers is None else registers)
        qubits = [q for r in registers for q in state.layout.qubits(r)]
        if channel.epr_pool < len(qubits):
            raise ResourceError(f"need {len(qubits)} EPR pairs, pool holds {channel.epr_pool}")
        rng = self.rng if seed is None else make_rng(seed)
        channel.epr_pool -= len(qubits)
        lost = rng.random(len(qubits)) < channel.loss_probability if channel.loss_probability else np.zeros(len(qubits), bool)
        erased = tuple(q for q, flag in zip(qubits, lost) if flag)
        out = replace_qubits_with_zero(state, erased) if erased else state
        m = self.metrics
        m.qubits_teleported += len(qubits)
        m.epr_consumed += len(qubits)
        m.classical_bits_sent += 2 * len(qubits)
        m.qubits_erased += len(erased)
        self._log(
            self.clock if time is None else time,
            "teleport",
            endpoints=list(channel.endpoints),
            registers=registers,
            qubits=len(qubits),
            erased=list(erased),
        )
        return Teleported(out, erased)

    # --- data-center interface --------------------------------------------------

    def _node(self, node) -> QdcNode:
        return node if isinstance(node, QdcNode) else self.nodes[node]

    def outsourced_query(
        self,
        user: str,
        node,
        state: QuantumState,
        *,
        submit_time: float | None = None,
        auto_epr: bool = False,
        address: str = ADDRESS,
        bus: str = BUS,
        seed=None,
    ) -> QueryResult:
        """Ship ``address`` and ``bus`` to the node, query, ship them back.

        ``state`` may carry further user registers; they never leave. For a
        quantum database the node's memory registers join the returned state.
        """
        node = self._node(node)
        ch = self.channel(user, node.id)
        k, w = node.qram.address_width, node.qram.word_width
        if state.layout.width(address) != k:
            raise LayoutError(f"address register must have {k} qubits for N={node.n}")
        if state.layout.width(bus) != w:
            raise LayoutError(f"bus register must have {w} qubits")
        rng = self.rng if seed is None else make_rng(seed)
        before = self.metrics.copy()
        moved = 2 * (k + w)
        if auto_epr:
            self.distribute_epr(ch, max(0, moved - ch.epr_pool))
        if ch.epr_pool < moved:
            raise ResourceError(f"round trip needs {moved} EPR pairs, pool holds {ch.epr_pool}")

        submitted = self.clock if submit_time is None else submit_time
        arrival = submitted + ch.hop_latency
        out = self.teleport(ch, state, rng, registers=[address, bus], time=submitted)
        erased = list(out.erased)
        st = out.state

        started = max(arrival, node.busy_until)
        node.busy_until = started + 1 / node.throughput
        completed = started + node.tau
        self._log(started, "query_start", node=node.id, mode=node.qram.mode)

        outcome = None
        if node.measures_address:
            outcome, st = measure(st, address, rng)
        if node.qram.mode == "classical":
            st = classical_query(st, node.qram, address=address, output=bus, permissive=True)
        else:
            cells = cell_names(node.n)
            if not all(c in st.layout for c in cells):
                if node.memory is None:
                    raise PreconditionError(f"memory of node {node.id!r} is held elsewhere")
                st = tensor(st, node.memory)
            node.memory = None
            st = quantum_query_swap(st, address=address, bus=bus, cells=cells)
        if node.depolarizing and node.epsilon:
            st = depolarize(st, [address, bus], node.epsilon)
        self._log(completed, "query_done", node=node.id, epsilon=node.epsilon)

        returned = completed + ch.hop_latency
        back = self.teleport(ch, st, rng, registers=[address, bus], time=completed)
        erased += back.erased
        self.metrics.queries_completed += 1
        self._finish(returned)
        self._log(returned, "query_returned", node=node.id, user=user)
        return QueryResult(
            back.state, self.metrics.minus(before), tuple(erased), outcome, submitted, started, returned
        )

    def naive_magic_shipping(
        self,
        user: str,
        node,
        query_n: int,
        *,
        c_magic: float = 1.0,
        auto_epr: bool = False,
        submit_time: float | None = None,
    ) -> NetworkMetrics:
        """Ship one ``|T>`` state per magic state a local query would consume."""
        node = self._node(node)
        ch = self.channel(user, node.id)
        m = query_cost(query_n, 1, c_magic=c_magic).magic_states
        before = self.metrics.copy()
        if auto_epr:
            self.distribute_epr(ch, max(0, m - ch.epr_pool))
        if ch.epr_pool < m:
            raise ResourceError(f"shipping needs {m} EPR pairs, pool holds {ch.epr_pool}")
        submitted = self.clock if submit_time is None else submit_time
        started = max(submitted, node.busy_until)
        node.busy_until = started + m / node.throughput
        magic = t_state()
        for j in range(m):
            self.teleport(ch, magic, time=started + j / node.throughput)
        self._finish(node.busy_until + ch.hop_latency)
        self._log(node.busy_until + ch.hop_latency, "shipping_done", node=node.id, user=user, magic_states=m)
        return self.metrics.minus(before)


def transmitted_qubits(n: int, word_width: int = 1) -> int:
    """Counter-free version of the outsourced round trip size."""
    return query_cost(n, word_width).transmitted_qubits


def shipped_qubits(n: int, c_magic: float = 1.0) -> int:
    return query_cost(n, 1, c_magic=c_magic).magic_states


__all__ = [
    "Channel",
    "Network",
    "NetworkMetrics",
    "QdcNode",
    "QueryResult",
    "Teleported",
    "shipped_qubits",
    "t_state",
    "transmitted_qubits",
]
