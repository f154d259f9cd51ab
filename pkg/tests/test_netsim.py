import json
import math

import numpy as np
import pytest

from qdc.core import RegisterLayout, fidelity, from_vector, initialize, random_state, tensor
from qdc.errors import ConfigurationError, LayoutError, ResourceError
from qdc.netsim import Network, QdcNode, shipped_qubits, transmitted_qubits
from qdc.qram import QramInstance, cell_names, classical_query, quantum_query_swap, query_layout


def address_state(n, w, rng):
    k = n.bit_length() - 1
    amps = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
    vec = np.zeros(2 ** (k + w), dtype=complex)
    vec[np.arange(2**k) << w] = amps
    return from_vector(query_layout(n, w), vec, normalize=True)


def network_with(db, seed=0, **channel):
    net = Network(seed)
    net.add_node(QdcNode("qdc", db, tau=channel.pop("tau", 1.0), throughput=channel.pop("throughput", 1.0)))
    net.connect("user", "qdc", **channel)
    return net


class TestEpr:
    def test_distribute(self):
        net = network_with(QramInstance.classical([0, 1], 1))
        ch = net.channel("user", "qdc")
        before = net.metrics.copy()
        net.distribute_epr(ch, 5)
        assert ch.epr_pool == 5
        net.distribute_epr(ch, 2)
        assert ch.epr_pool == 7
        assert net.metrics == before

    def test_negative(self):
        net = network_with(QramInstance.classical([0, 1], 1))
        with pytest.raises(ConfigurationError):
            net.distribute_epr(net.channel("user", "qdc"), -1)


class TestTeleport:
    def test_ideal(self):
        net = network_with(QramInstance.classical([0, 1], 1), epr_pool=10)
        s = random_state(RegisterLayout.of(A=3), seed=2)
        out = net.teleport(net.channel("user", "qdc"), s)
        assert fidelity(out.state, s) == pytest.approx(1, abs=1e-12)
        assert out.erased == ()
        assert net.metrics.epr_consumed == 3 and net.metrics.classical_bits_sent == 6
        assert net.channel("user", "qdc").epr_pool == 7

    def test_loss_rate(self):
        net = network_with(QramInstance.classical([0, 1], 1), epr_pool=10**4, loss_probability=0.1)
        ch = net.channel("user", "qdc")
        q = initialize(RegisterLayout.of(A=1), "1")
        lost = sum(bool(net.teleport(ch, q).erased) for _ in range(10**4))
        assert 0.09 <= lost / 10**4 <= 0.11
        assert net.metrics.qubits_erased == lost

    def test_erasure_resets_qubit(self):
        net = network_with(QramInstance.classical([0, 1], 1), epr_pool=200, loss_probability=0.5)
        ch = net.channel("user", "qdc")
        s = initialize(RegisterLayout.of(A=1), "1")
        for _ in range(100):
            out = net.teleport(ch, s)
            if out.erased:
                assert fidelity(out.state, initialize(RegisterLayout.of(A=1), "0")) == pytest.approx(1)
                return
        pytest.fail("no erasure in 100 tries at loss 0.5")

    def test_atomic(self):
        net = network_with(QramInstance.classical([0, 1], 1), epr_pool=2)
        ch = net.channel("user", "qdc")
        with pytest.raises(ResourceError):
            net.teleport(ch, initialize(RegisterLayout.of(A=3), "000"))
        assert ch.epr_pool == 2
        assert net.metrics.qubits_teleported == 0

    def test_bad_loss(self):
        with pytest.raises(ConfigurationError):
            network_with(QramInstance.classical([0, 1], 1), loss_probability=1.0)


class TestOutsourcedQuery:
    def test_n4_matches_local(self):
        db = QramInstance.classical([3, 0, 1, 2], 2)
        net = network_with(db, epr_pool=100)
        s = address_state(4, 2, np.random.default_rng(1))
        res = net.outsourced_query("user", "qdc", s)
        assert fidelity(res.state, classical_query(s, db)) == pytest.approx(1, abs=1e-12)
        assert res.metrics.qubits_teleported == 2 * (2 + 2)
        assert res.metrics.queries_completed == 1

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_equivalence_random_inputs(self, n):
        rng = np.random.default_rng(n)
        for _ in range(100):
            data = [int(x) for x in rng.integers(0, 2, size=n)]
            db = QramInstance.classical(data, 1)
            net = network_with(db, epr_pool=4 * n)
            s = address_state(n, 1, rng)
            res = net.outsourced_query("user", "qdc", s)
            assert fidelity(res.state, classical_query(s, db)) >= 1 - 1e-10

    def test_quantum_node(self):
        cells = random_state(RegisterLayout(tuple((c, 1) for c in cell_names(2))), seed=3)
        db = QramInstance.quantum(cells, 2, 1)
        net = network_with(db, epr_pool=4)
        s = address_state(2, 1, np.random.default_rng(0))
        res = net.outsourced_query("user", "qdc", s)
        assert fidelity(res.state, quantum_query_swap(tensor(s, cells))) == pytest.approx(1)
        assert net.nodes["qdc"].memory is None

    def test_user_registers_stay_home(self):
        db = QramInstance.classical([1, 0], 1)
        net = network_with(db, epr_pool=4)
        s = tensor(address_state(2, 1, np.random.default_rng(5)), random_state(RegisterLayout.of(E=2), seed=1))
        res = net.outsourced_query("user", "qdc", s)
        assert res.metrics.qubits_teleported == 4
        assert fidelity(res.state, classical_query(s, db)) == pytest.approx(1)

    def test_back_to_back_schedule(self):
        net = network_with(QramInstance.classical([0, 1], 1), tau=3.0, throughput=1.0, epr_pool=8)
        s = address_state(2, 1, np.random.default_rng(0))
        first = net.outsourced_query("user", "qdc", s)
        second = net.outsourced_query("user", "qdc", s)
        # hand schedule: starts at 0 and 1 (spacing 1/T), each finishes tau later
        assert (first.started, first.returned) == (0.0, 3.0)
        assert (second.started, second.returned) == (1.0, 4.0)
        assert net.metrics.elapsed_time == 4.0

    def test_hop_latency(self):
        net = network_with(QramInstance.classical([0, 1], 1), tau=2.0, hop_latency=0.5, epr_pool=4)
        res = net.outsourced_query("user", "qdc", address_state(2, 1, np.random.default_rng(0)))
        assert res.returned == 0.5 + 2.0 + 0.5

    def test_short_pool(self):
        net = network_with(QramInstance.classical([0, 1], 1), epr_pool=3)
        with pytest.raises(ResourceError):
            net.outsourced_query("user", "qdc", address_state(2, 1, np.random.default_rng(0)))
        assert net.channel("user", "qdc").epr_pool == 3

    def test_auto_epr(self):
        net = network_with(QramInstance.classical([0, 1, 1, 0], 1))
        res = net.outsourced_query("user", "qdc", address_state(4, 1, np.random.default_rng(0)), auto_epr=True)
        assert res.metrics.epr_consumed == 6

    def test_width_check(self):
        net = network_with(QramInstance.classical([0, 1, 1, 0], 1), epr_pool=10)
        with pytest.raises(LayoutError):
            net.outsourced_query("user", "qdc", address_state(2, 1, np.random.default_rng(0)))

    def test_depolarizing_node(self):
        db = QramInstance.classical([1, 0], 1)
        net = Network(0)
        net.add_node(QdcNode("qdc", db, epsilon=0.2, depolarizing=True))
        net.connect("user", "qdc", epr_pool=4)
        s = address_state(2, 1, np.random.default_rng(0))
        res = net.outsourced_query("user", "qdc", s)
        assert fidelity(res.state, classical_query(s, db)) < 1 - 1e-3

    def test_event_log_monotone_and_deterministic(self):
        def run():
            net = network_with(QramInstance.classical([0, 1], 1), tau=3.0, epr_pool=100, loss_probability=0.2)
            s = address_state(2, 1, np.random.default_rng(0))
            for _ in range(3):
                net.outsourced_query("user", "qdc", s)
            net.naive_magic_shipping("user", "qdc", 16)
            return net.event_log(), net.metrics.to_json()

        log, metrics = run()
        times = [json.loads(line)["t"] for line in log.splitlines()]
        assert times == sorted(times)
        assert run() == (log, metrics)


class TestShipping:
    @pytest.mark.parametrize("n,m", [(2**10, 32), (2**20, 1024), (2, 2)])
    def test_counts(self, n, m):
        net = network_with(QramInstance.classical([0, 1], 1))
        delta = net.naive_magic_shipping("user", "qdc", n, auto_epr=True)
        assert delta.qubits_teleported == m
        assert delta.elapsed_time == m

    def test_against_outsourced(self):
        assert transmitted_qubits(2**10) == 22 and shipped_qubits(2**10) == 32
        assert transmitted_qubits(2**20) == 42 and shipped_qubits(2**20) == 1024

    def test_ratio_vanishes(self):
        ratios = [transmitted_qubits(2**k) / shipped_qubits(2**k) for k in range(4, 21)]
        assert all(b <= a for a, b in zip(ratios, ratios[1:]))
        assert ratios[-1] < 0.05

    def test_metrics_monotone(self):
        net = network_with(QramInstance.classical([0, 1], 1), epr_pool=1000)
        snaps = [net.metrics.copy()]
        rng = np.random.default_rng(3)
        for j in range(6):
            if j % 2:
                net.naive_magic_shipping("user", "qdc", 64)
            else:
                net.outsourced_query("user", "qdc", address_state(2, 1, rng))
            snaps.append(net.metrics.copy())
        for a, b in zip(snaps, snaps[1:]):
            for k, v in a.to_dict().items():
                assert getattr(b, k) >= v
        assert snaps[-1].epr_consumed == snaps[-1].qubits_teleported
        assert math.isclose(snaps[-1].classical_bits_sent, 2 * snaps[-1].qubits_teleported)
