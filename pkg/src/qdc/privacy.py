"""Private storage and retrieval of quantum secrets across several data centers.

* Secret sharing is an ``(n, n)`` quantum one-time pad: the secret is padded
  with a random Pauli ``X^a Z^b`` and the classical pad key is XOR-split into
  ``n`` parts. Share 0 carries the padded qubits and key part 0.
* Private queries follow a decoy scheme: next to the plain query ``|j>`` the
  user sends ``(|0> + |j>)/sqrt 2`` and checks that it returns coherent.
* Swap reads fetch a quantum cell by swapping in a maximally mixed probe,
  which leaves the server's marginal of its memory unchanged.

Pad keys are ``2w``-bit integers: the high ``w`` bits are ``a`` and the low
``w`` bits are ``b``, both MSB-first over the secret's qubits.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import reduce
from operator import xor
from typing import Mapping, Sequence

import numpy as np

from qdc.config import make_rng, spawn
from qdc.core import (
    QuantumState,
    RegisterLayout,
    apply_unitary,
    basis_state,
    dephase,
    fidelity,
    from_density,
    from_vector,
    initialize,
    marginal_pure,
    maximally_mixed,
    measure,
    partial_trace,
    rename,
    reorder,
    tensor,
    trace_distance,
)
from qdc.errors import ConfigurationError, ReconstructionError
from qdc.netsim import Network, QdcNode
from qdc.qram import ADDRESS, BUS, QramInstance, cell_names, classical_query, log2_exact, quantum_query_swap, write

ADVERSARIES = ("honest", "measuring", "colluding")
REFERENCE = "R"

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_I = np.eye(2, dtype=complex)


# --- one-time-pad secret sharing -----------------------------------------------


def pad_operator(key: int, w: int) -> np.ndarray:
    """``X^a Z^b`` for the key ``(a, b)``."""
    a, b = key >> w, key & ((1 << w) - 1)
    ops = []
    for q in range(w):
        bit = w - 1 - q
        op = _I
        if (b >> bit) & 1:
            op = _Z @ op
        if (a >> bit) & 1:
            op = _X @ op
        ops.append(op)
    return reduce(np.kron, ops)


def apply_pad(state: QuantumState, key: int, inverse: bool = False) -> QuantumState:
    w = state.n_qubits
    p = pad_operator(key, w)
    return apply_unitary(state, p.conj().T if inverse else p, range(w))


@dataclass(frozen=True)
class Share:
    index: int
    quantum_part: QuantumState | None
    key_part: str

    @property
    def key(self) -> int:
        return int(self.key_part, 2)


@dataclass(frozen=True)
class ShareSet:
    n: int
    w: int
    shares: tuple[Share, ...]
    scheme: str = "(n,n) one-time pad"

    def __getitem__(self, k: int) -> Share:
        return self.shares[k]

    def __len__(self) -> int:
        return len(self.shares)


def qss_split(secret: QuantumState, n: int, seed=None) -> ShareSet:
    if n < 2:
        raise ConfigurationError("a sharing needs n >= 2 shares")
    w = secret.n_qubits
    keys = [int(k) for k in make_rng(seed).integers(0, 4**w, size=n)]
    padded = apply_pad(secret, reduce(xor, keys))
    shares = [Share(k, padded if k == 0 else None, format(keys[k], f"0{2 * w}b")) for k in range(n)]
    return ShareSet(n, w, tuple(shares))


def qss_reconstruct(shares: ShareSet | Sequence[Share], n: int | None = None) -> QuantumState:
    """Undo the pad; every one of the ``n`` shares must be present."""
    if isinstance(shares, ShareSet):
        n = shares.n if n is None else n
        shares = shares.shares
    shares = list(shares)
    n = len(shares) if n is None else n
    held = sorted(s.index for s in shares)
    if held != list(range(n)):
        missing = sorted(set(range(n)) - set(held))
        raise ReconstructionError(f"need all {n} shares exactly once; missing {missing}, got {held}")
    quantum = next(s.quantum_part for s in shares if s.index == 0)
    if quantum is None:
        raise ReconstructionError("share 0 carries no quantum part")
    return apply_pad(quantum, reduce(xor, (s.key for s in shares)), inverse=True)


def share_view(secret: QuantumState, n: int, subset: Sequence[int]) -> QuantumState:
    """Joint state of the shares in ``subset``, averaged over all key splits.

    Registers: ``S`` (the padded qubits, when share 0 is held) and ``K<m>``
    (key part ``m`` as a basis state) for each held ``m``.
    """
    subset = sorted(set(subset))
    if not subset or subset[0] < 0 or subset[-1] >= n:
        raise ConfigurationError(f"subset {subset} is not a nonempty subset of 0..{n - 1}")
    w = secret.n_qubits
    q = 4**w
    rho = secret.density()
    padded = np.stack([pad_operator(k, w) @ rho @ pad_operator(k, w).conj().T for k in range(q)])
    parts = np.indices((q,) * n).reshape(n, -1)
    pads = reduce(np.bitwise_xor, parts)
    held = np.zeros(parts.shape[1], dtype=np.int64)
    for m in subset:
        held = held * q + parts[m]
    counts = np.zeros((q ** len(subset), q))
    np.add.at(counts, (held, pads), 1)
    counts /= parts.shape[1]

    regs = ([("S", w)] if 0 in subset else []) + [(f"K{m}", 2 * w) for m in subset]
    layout = RegisterLayout(tuple(regs))
    view = np.zeros((layout.dim, layout.dim), dtype=complex)
    for h in range(counts.shape[0]):
        e = np.zeros((counts.shape[0], counts.shape[0]))
        e[h, h] = 1
        if 0 in subset:
            view += np.kron(np.tensordot(counts[h], padded, axes=1), e)  # ``S`` is the leading register
        else:
            view += counts[h].sum() * e
    return from_density(layout, view)


def reference_secrets(w: int) -> list[QuantumState]:
    """``|0..0>, |1..1>, |+..+>, |+i..+i>`` on register ``S``."""
    singles = [
        np.array([1, 0], complex),
        np.array([0, 1], complex),
        np.array([1, 1], complex) / np.sqrt(2),
        np.array([1, 1j], complex) / np.sqrt(2),
    ]
    return [from_vector(RegisterLayout.of(S=w), reduce(np.kron, [v] * w)) for v in singles]


# --- swap reads with a maximally mixed probe ---------------------------------------


@dataclass(frozen=True)
class SwapRead:
    payload: QuantumState
    backreaction: float
    state: QuantumState


def bell_probe(w: int) -> QuantumState:
    """``w`` Bell pairs between the bus ``Q2`` and a reference ``R``."""
    vec = np.zeros(4**w, dtype=complex)
    vec[np.arange(2**w) * (2**w + 1)] = 2 ** (-w / 2)
    return from_vector(RegisterLayout.of(**{BUS: w, REFERENCE: w}), vec)


def private_read_swap(memory: QuantumState, address, probe: QuantumState | None = None) -> SwapRead:
    """Swap the bus into cell ``address`` and report the memory's disturbance.

    ``memory`` holds ``D1 .. DN`` and may carry further registers (e.g. pad
    keys) that purify it. Without an explicit ``probe`` the bus starts as half
    of Bell pairs whose partners ``R`` stay in the returned joint state (pure
    memories) or as the exact ``I / 2^w`` density (mixed memories).

    ``backreaction`` is the trace distance between the reduced state of all
    cells before and after.
    """
    cells = [r for r in memory.layout.names if r.startswith("D") and r[1:].isdigit()]
    n = len(cells)
    k = log2_exact(n)
    if cells != cell_names(n):
        raise ConfigurationError(f"memory cells must be D1..D{n}")
    w = memory.layout.width(cells[0])
    if isinstance(address, QuantumState):
        addr = rename(address, {address.layout.names[0]: ADDRESS})
    else:
        if not 0 <= int(address) < n:
            raise ConfigurationError(f"address {address} outside 0..{n - 1}")
        addr = basis_state(RegisterLayout.of(**{ADDRESS: k}), {ADDRESS: int(address)})
    if probe is None:
        bus = bell_probe(w) if memory.is_pure else maximally_mixed(RegisterLayout.of(**{BUS: w}))
    else:
        if BUS not in probe.layout:
            if len(probe.layout.names) != 1:
                raise ConfigurationError(f"a multi-register probe needs a {BUS} register")
            probe = rename(probe, {probe.layout.names[0]: BUS})
        if probe.layout.width(BUS) != w:
            raise ConfigurationError(f"probe must have {w} qubits")
        bus = probe
    joint = tensor(memory, addr, bus)
    after = quantum_query_swap(joint, cells=cells)
    before_view = partial_trace(memory, cells)
    after_view = partial_trace(after, cells)
    return SwapRead(partial_trace(after, [BUS]), trace_distance(before_view, after_view), after)


# --- decoy-based private queries ----------------------------------------------------


@dataclass(frozen=True)
class AdversaryModel:
    """``members`` lists the misbehaving data centers; ``None`` means all."""

    kind: str = "honest"
    members: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ADVERSARIES:
            raise ConfigurationError(f"adversary must be one of {ADVERSARIES}")

    def includes(self, qdc: int) -> bool:
        return self.kind != "honest" and (self.members is None or qdc in self.members)


def _adversary(value) -> AdversaryModel:
    return value if isinstance(value, AdversaryModel) else AdversaryModel(str(value))


@dataclass(frozen=True)
class QpqResult:
    answer: int
    verified: bool
    order: tuple[str, str]
    pass_probability: float


def _query_states(j: int, db: QramInstance) -> tuple[QuantumState, QuantumState, QuantumState]:
    """Plain query, decoy query and the decoy's expected return."""
    k, w = db.address_width, db.word_width
    layout = RegisterLayout.of(**{ADDRESS: k, BUS: w})
    plain = basis_state(layout, {ADDRESS: j})
    dec = np.zeros(layout.dim, dtype=complex)
    dec[0] += 1
    dec[j << w] += 1
    decoy = from_vector(layout, dec, normalize=True)
    return plain, decoy, classical_query(decoy, db)


def _serve(state: QuantumState, db: QramInstance, measuring: bool, rng) -> QuantumState:
    if measuring:
        _, state = measure(state, ADDRESS, rng)
    return classical_query(state, db, permissive=True)


def _overlap(state: QuantumState, expected: QuantumState) -> float:
    v = expected.data
    if state.is_pure:
        p = abs(np.vdot(v, state.data)) ** 2
    else:
        p = float(np.real(np.vdot(v, state.data @ v)))
    return min(1.0, max(0.0, p))


def qpq_detection_probability(j: int, db: QramInstance, adversary="honest") -> float:
    """Exact chance that the decoy check fails, from the density-matrix channel."""
    _, decoy, expected = _query_states(j, db)
    rho = decoy.to_mixed()
    if _adversary(adversary).kind == "measuring":
        rho = dephase(rho, ADDRESS)
    return 1.0 - _overlap(classical_query(rho, db), expected)


def qpq_query(
    j: int,
    db: QramInstance,
    adversary="honest",
    seed=None,
    *,
    network: Network | None = None,
    user: str | None = None,
    node: str | None = None,
) -> QpqResult:
    """Plain plus decoy query in seeded random order.

    Locally simulated unless ``network``, ``user`` and ``node`` are given, in
    which case both queries travel through the network and the node's own
    ``measures_address`` flag decides whether it cheats.
    """
    if db.mode != "classical":
        raise ConfigurationError("private queries need a classical database")
    if not 0 <= j < db.n:
        raise ConfigurationError(f"address {j} outside 0..{db.n - 1}")
    rng = make_rng(seed)
    measuring = _adversary(adversary).kind == "measuring"
    plain, decoy, expected = _query_states(j, db)
    order = ("plain", "decoy") if rng.random() < 0.5 else ("decoy", "plain")
    returned = {}
    for name in order:
        st = plain if name == "plain" else decoy
        if network is None:
            returned[name] = _serve(st, db, measuring, rng)
        else:
            returned[name] = network.outsourced_query(user, node, st, auto_epr=True, seed=rng).state
    bits, _ = measure(returned["plain"], BUS, rng)
    p_pass = _overlap(returned["decoy"], expected)
    return QpqResult(int(bits, 2), bool(rng.random() < p_pass), order, p_pass)


# --- end-to-end session -----------------------------------------------------------------


@dataclass
class SessionReport:
    delivered_fidelities: dict[str, float]
    detection_events: int
    decoy_queries: int
    expected_detection_rate: float
    privacy: dict[str, float]
    privacy_exact: dict[str, bool]
    backreaction: dict[str, float]
    colluder_fidelities: dict[str, float]
    coalition_privacy: float | None
    metrics: dict
    share_holders: dict[str, list[int]]
    transcript: str = field(default="", repr=False)

    @property
    def detection_rate(self) -> float:
        return self.detection_events / self.decoy_queries if self.decoy_queries else 0.0

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "transcript"}
        out["detection_rate"] = self.detection_rate
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _stored_views(secret: QuantumState, n: int, m: int, read: bool, tag: str) -> list[QuantumState]:
    """What a data center holding share ``m`` sees, at storage and after the read."""
    view = share_view(secret, n, [m])
    mapping = {r: f"{r}_{tag}" for r in view.layout.names}
    views = [rename(view, mapping)]
    if m == 0 and read:
        w = secret.n_qubits
        after = tensor(maximally_mixed(RegisterLayout.of(S=w)), partial_trace(view, ["K0"]))
        views.append(rename(after, mapping))
    else:
        views.append(views[0])
    return views


def _view_distance(a: list[QuantumState], b: list[QuantumState], cap: int) -> tuple[float, bool]:
    """Trace distance of two product views; an upper bound when too large."""
    if not a:
        return 0.0, True
    if sum(s.n_qubits for s in a) <= cap:
        return trace_distance(tensor(*a), tensor(*b)), True
    return float(sum(trace_distance(x, y) for x, y in zip(a, b))), False


def _purified_cell(secret: QuantumState, n_cells: int, address: int) -> QuantumState:
    """Pad key ``K`` entangled with the padded secret in ``D<address+1>``."""
    w = secret.n_qubits
    vec = secret.data
    branches = [pad_operator(k, w) @ vec for k in range(4**w)]
    key_cell = np.concatenate(branches) / 2**w
    regs = [("K", 2 * w), (f"D{address + 1}", w)]
    state = from_vector(RegisterLayout(tuple(regs)), key_cell)
    others = [initialize(RegisterLayout.of(**{c: w}), "0" * w) for c in cell_names(n_cells) if c != f"D{address + 1}"]
    return reorder(tensor(state, *others), ["K"] + cell_names(n_cells))


def run_session(
    senders: int | Sequence[QuantumState],
    receivers: int,
    pairing: Mapping[int, int],
    qdc_count: int,
    adversary="honest",
    seed=None,
    *,
    n_shares: int = 2,
    word_width: int = 1,
    max_permutations: int = 24,
) -> SessionReport:
    """Split, upload, store, privately retrieve and reconstruct every secret.

    ``pairing`` maps sender index to receiver index (a partial matching).
    Share ``k`` of sender ``i`` is stored by data center
    ``(i + k + offset) mod qdc_count`` at the public address ``i``; the offset
    is drawn from the seed.
    """
    adversary = _adversary(adversary)
    rng_setup, rng_run = spawn(seed, 2)
    if isinstance(senders, int):
        secrets = [
            from_vector(RegisterLayout.of(S=word_width), v, normalize=True)
            for v in rng_setup.normal(size=(senders, 2**word_width)) + 1j * rng_setup.normal(size=(senders, 2**word_width))
        ]
    else:
        secrets = [rename(s, {s.layout.names[0]: "S"}) if len(s.layout.names) == 1 else s for s in senders]
        word_width = secrets[0].n_qubits
    s_count = len(secrets)
    if s_count < 1 or receivers < 1:
        raise ConfigurationError("need at least one sender and one receiver")
    if qdc_count < n_shares:
        raise ConfigurationError(f"{qdc_count} data centers cannot hold {n_shares} distinct shares")
    if len(set(pairing.values())) != len(pairing):
        raise ConfigurationError("pairing must be a partial matching")
    for i, j in pairing.items():
        if not (0 <= i < s_count and 0 <= j < receivers):
            raise ConfigurationError(f"pairing entry {i}->{j} out of range")
    w = word_width
    n_addr = max(2, 1 << (s_count - 1).bit_length())
    k_addr = log2_exact(n_addr)
    if n_addr * w + k_addr + 4 * w > 22:
        raise ConfigurationError("session too large to simulate exactly")
    offset = int(rng_setup.integers(qdc_count))
    holders = {i: [(i + k + offset) % qdc_count for k in range(n_shares)] for i in range(s_count)}

    net = Network(rng_run)
    qdc_ids = [f"QDC{q}" for q in range(qdc_count)]
    for q, qid in enumerate(qdc_ids):
        net.add_node(
            QdcNode(
                qid,
                QramInstance.classical([0] * n_addr, 2 * w),
                measures_address=adversary.kind == "measuring" and adversary.includes(q),
            )
        )
    users = [f"A{i}" for i in range(s_count)] + [f"B{j}" for j in range(receivers)]
    for u in users:
        for qid in qdc_ids:
            net.connect(u, qid)

    def send(user, qid, state, registers=None):
        ch = net.channel(user, qid)
        need = sum(state.layout.width(r) for r in (registers or state.layout.names))
        net.distribute_epr(ch, need)
        return net.teleport(ch, state, registers=registers).state

    # upload and storage
    sharesets, cells = {}, {}
    for i, secret in enumerate(secrets):
        ss = qss_split(secret, n_shares, rng_run)
        sharesets[i] = ss
        for k, share in enumerate(ss.shares):
            qid = qdc_ids[holders[i][k]]
            if share.quantum_part is not None:
                cells[i] = send(f"A{i}", qid, share.quantum_part)
            key_qubits = initialize(RegisterLayout.of(K=2 * w), share.key_part)
            stored = send(f"A{i}", qid, key_qubits)
            node = net.nodes[qid]
            node.qram = write(node.qram, i, int(np.argmax(stored.probabilities())))

    # colluders pool shares, unpad, re-pad and put the share back
    colluder_fid = {}
    coalition_privacy = None
    if adversary.kind == "colluding":
        coalition = set(range(qdc_count)) if adversary.members is None else set(adversary.members)
        worst = 0.0
        for i, secret in enumerate(secrets):
            held = [k for k in range(n_shares) if holders[i][k] in coalition]
            if len(held) == n_shares:
                pooled = [Share(0, cells[i], sharesets[i][0].key_part)] + list(sharesets[i].shares[1:])
                colluder_fid[f"A{i}"] = fidelity(qss_reconstruct(pooled, n_shares), secret)
            if held:
                views = [share_view(t, n_shares, held) for t in reference_secrets(w) + [secret]]
                worst = max(worst, max(trace_distance(a, b) for a in views for b in views))
        coalition_privacy = worst

    # retrieval
    fidelities, backreaction = {}, {}
    events = decoys = 0
    expected = 0.0
    for i, j in sorted(pairing.items()):
        user = f"B{j}"
        q0 = qdc_ids[holders[i][0]]
        memory = tensor(
            *[
                rename(cells[i], {"S": c}) if c == f"D{i + 1}" else initialize(RegisterLayout.of(**{c: w}), "0" * w)
                for c in cell_names(n_addr)
            ]
        )
        request = tensor(basis_state(RegisterLayout.of(**{ADDRESS: k_addr}), {ADDRESS: i}), bell_probe(w))
        request = send(user, q0, request, [ADDRESS, BUS])
        read = private_read_swap(
            memory, marginal_pure(request, [ADDRESS]), probe=marginal_pure(request, [BUS, REFERENCE])
        )
        back = send(user, q0, read.state, [ADDRESS, BUS])
        padded = rename(partial_trace(back, [BUS]), {BUS: "S"})
        keys = []
        for k in range(n_shares):
            q = holders[i][k]
            node = net.nodes[qdc_ids[q]]
            res = qpq_query(i, node.qram, seed=rng_run, network=net, user=user, node=qdc_ids[q])
            decoys += 1
            events += not res.verified
            expected += qpq_detection_probability(i, node.qram, "measuring" if node.measures_address else "honest")
            keys.append(Share(k, padded if k == 0 else None, format(res.answer, f"0{2 * w}b")))
        fidelities[f"A{i}->B{j}"] = fidelity(qss_reconstruct(keys, n_shares), secrets[i])
        backreaction[f"A{i}"] = private_read_swap(_purified_cell(secrets[i], n_addr, i), i).backreaction

    # privacy of each data center's holdings across counterfactuals
    cap = 8
    perms = list(itertools.islice(itertools.permutations(range(receivers)), max_permutations))
    cases = [(secrets, dict(pairing))]
    cases += [([t] * s_count, dict(pairing)) for t in reference_secrets(w)]
    cases += [(secrets, {i: p[j] for i, j in pairing.items()}) for p in perms[1:]]
    privacy, exact = {}, {}
    for q, qid in enumerate(qdc_ids):
        def views(case):
            secs, pair = case
            out = [[], []]
            for i in range(s_count):
                for k in range(n_shares):
                    if holders[i][k] == q:
                        v = _stored_views(secs[i], n_shares, k, i in pair, f"{i}")
                        out[0].append(v[0])
                        out[1].append(v[1])
            return out

        base = views(cases[0])
        worst, is_exact = 0.0, True
        for case in cases[1:]:
            other = views(case)
            for stage in range(2):
                d, ex = _view_distance(base[stage], other[stage], cap)
                worst, is_exact = max(worst, d), is_exact and ex
        privacy[qid], exact[qid] = worst, is_exact

    return SessionReport(
        delivered_fidelities=fidelities,
        detection_events=int(events),
        decoy_queries=decoys,
        expected_detection_rate=expected / decoys if decoys else 0.0,
        privacy=privacy,
        privacy_exact=exact,
        backreaction=backreaction,
        colluder_fidelities=colluder_fid,
        coalition_privacy=coalition_privacy,
        metrics=net.metrics.to_dict(),
        share_holders={f"A{i}": h for i, h in holders.items()},
        transcript=net.event_log(),
    )
