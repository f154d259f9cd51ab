"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``. Every test also
enforces the criterion's runtime limit.
"""

import contextlib
import dataclasses
import math
import time

import numpy as np
import pytest

from qdc.cli import main
from qdc.core import (
    RegisterLayout,
    fidelity,
    from_vector,
    maximally_mixed,
    partial_trace,
    purity,
)
from qdc.estimator import (
    KAPPA_PRESETS,
    FtCostParams,
    delay_factor,
    evaluate,
    per_state_failure,
    select_distillation,
    sweep,
)
from qdc.netsim import Network, QdcNode
from qdc.privacy import AdversaryModel, private_read_swap, qpq_detection_probability, qpq_query, run_session, share_view
from qdc.qram import (
    QramInstance,
    classical_query,
    compress_joint,
    compress_unary,
    decompress,
    quantum_query_swap,
    query_layout,
    unary_state,
)
from qdc.sensing import hardware_cost, phase_estimation_run


@contextlib.contextmanager
def criterion(capsys, number, title, limit):
    start = time.perf_counter()
    status = "FAIL"
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < limit, f"runtime {elapsed:.2f} s exceeds {limit} s"
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - start
        with capsys.disabled():
            print(f"\nCRITERION {number}: {status} {title} [{elapsed:.2f} s, limit {limit} s]")


def random_vector(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


# --- brute-force oracles ----------------------------------------------------------------


def xor_oracle_matrix(data, k, w):
    dim = 2 ** (k + w)
    m = np.zeros((dim, dim))
    for i in range(2**k):
        for y in range(2**w):
            m[(i << w) | (y ^ data[i]), (i << w) | y] = 1
    return m


def swap_oracle_permutation(n, w):
    """Bit-string manipulation: swap bus with the addressed cell, qubit by qubit."""
    k = n.bit_length() - 1
    total = k + w + n * w
    perm = np.zeros(2**total, dtype=int)
    for idx in range(2**total):
        bits = list(format(idx, f"0{total}b"))
        addr = int("".join(bits[:k]), 2)
        for b in range(w):
            bus, cell = k + b, k + w + addr * w + b
            bits[bus], bits[cell] = bits[cell], bits[bus]
        perm[idx] = int("".join(bits), 2)
    return perm


def test_criterion_1_qram_semantics(capsys):
    with criterion(capsys, 1, "QRAM queries match brute-force oracles", 10):
        rng = np.random.default_rng(1)
        worst = 0.0
        for n in (2, 4):
            k = n.bit_length() - 1
            for w in (1, 2):
                layout = query_layout(n, w)
                perm = swap_oracle_permutation(n, w)
                qlayout = query_layout(n, w, cells=True)
                # operator check: distinct amplitudes reveal the whole basis map
                probe = np.arange(1, qlayout.dim + 1, dtype=complex)
                out = quantum_query_swap(from_vector(qlayout, probe, normalize=True))
                expected = np.zeros(qlayout.dim, complex)
                expected[perm] = probe / np.linalg.norm(probe)
                worst = max(worst, np.max(np.abs(out.data - expected)))
                for _ in range(100):
                    data = [int(x) for x in rng.integers(0, 2**w, size=n)]
                    db = QramInstance.classical(data, w)
                    oracle = xor_oracle_matrix(data, k, w)
                    operator = np.column_stack(
                        [
                            classical_query(from_vector(layout, np.eye(layout.dim)[c]), db, permissive=True).data
                            for c in range(layout.dim)
                        ]
                    )
                    worst = max(worst, np.max(np.abs(operator - oracle)))
                    v = random_vector(rng, layout.dim)
                    out = classical_query(from_vector(layout, v), db, permissive=True).data
                    worst = max(worst, np.max(np.abs(out - oracle @ v)))
                    # bus cleared: the strict precondition path
                    v = np.zeros(layout.dim, complex)
                    v[np.arange(n) << w] = random_vector(rng, n)
                    worst = max(worst, np.max(np.abs(classical_query(from_vector(layout, v), db).data - oracle @ v)))
                    u = random_vector(rng, qlayout.dim)
                    expected = np.zeros_like(u)
                    expected[perm] = u
                    worst = max(worst, np.max(np.abs(quantum_query_swap(from_vector(qlayout, u)).data - expected)))
        assert worst < 1e-10, worst


def test_criterion_2_compression(capsys):
    with criterion(capsys, 2, "unary-to-binary compression", 30):
        rng = np.random.default_rng(2)
        for n in (2, 4, 8, 16):
            k = n.bit_length() - 1
            for _ in range(100):
                amps = random_vector(rng, n)
                memory = unary_state(amps)
                binary, flag = compress_unary(memory)
                target = from_vector(RegisterLayout.of(Q1=k), amps)
                assert fidelity(binary, target) >= 1 - 1e-10
                assert abs(flag.data[1]) ** 2 >= 1 - 1e-10
                joint = compress_joint(memory)
                assert purity(partial_trace(joint, ["Q1"])) >= 1 - 1e-10
                assert fidelity(decompress(binary), memory) >= 1 - 1e-10


def test_criterion_3_estimator_arithmetic(capsys):
    with criterion(capsys, 3, "estimator arithmetic for the 10^8 T-gate scenario", 1):
        params = FtCostParams(t_count_total=10**8, p=1e-3, f_outsourced=0.99)
        assert params.user_states == 10**6
        level_one = 35 * (1e-3) ** 3
        assert per_state_failure(1e-3, 1) == pytest.approx(level_one, rel=1e-12)
        mass = params.user_states * per_state_failure(1e-3, 1)
        assert mass == pytest.approx(3.5e-2, rel=1e-12)
        # same order of magnitude as the ~0.01 rule of thumb
        assert abs(math.log10(mass) - math.log10(0.01)) < 1
        without = 10**8 * per_state_failure(1e-3, 1)
        assert without == pytest.approx(3.5, rel=1e-12)
        assert without > params.budget
        assert select_distillation(10**8, 1e-3, params.distillation_budget).level >= 2
        report = evaluate(dataclasses.replace(params, delay_model="none"), 2**10)
        assert report.without_qdc.level >= 2
        assert report.without_qdc.distillation_failure < params.distillation_budget


def test_criterion_4_sweep_shape(capsys):
    with criterion(capsys, 4, "relative time-cost sweep over N = 2^4..2^20", 10):
        n_range = [2**k for k in range(4, 21)]
        rows = sweep(FtCostParams(), n_range)
        assert not any(r.flags for r in rows)
        sq = [r.ratio_sqrt for r in rows]
        lg = [r.ratio_log for r in rows]
        assert all(a <= b for a, b in zip(lg, sq))
        assert all(b >= a for a, b in zip(sq, sq[1:]))
        assert all(b >= a for a, b in zip(lg, lg[1:]))
        jumps = 0
        for a, b in zip(rows, rows[1:]):
            smooth = (1 + delay_factor(b.n, "sqrt", 1.0)) / (1 + delay_factor(a.n, "sqrt", 1.0))
            if b.d_with > a.d_with and b.ratio_sqrt / a.ratio_sqrt > smooth * (1 + 1e-3):
                jumps += 1
        assert jumps >= 1
        for threshold, kappa in KAPPA_PRESETS.items():
            preset = sweep(FtCostParams(kappa=kappa), n_range)
            for col in ("ratio_sqrt", "ratio_log"):
                vals = [getattr(r, col) for r in preset]
                assert any(a < threshold <= b for a, b in zip(vals, vals[1:])), (threshold, col)


def test_criterion_5_privacy(capsys):
    with criterion(capsys, 5, "secret sharing, delivery, backreaction, collusion", 60):
        rng = np.random.default_rng(5)
        s1 = RegisterLayout.of(S=1)
        for _ in range(20):
            a = from_vector(s1, random_vector(rng, 2))
            b = from_vector(s1, random_vector(rng, 2))
            for m in (0, 1):
                view_a, view_b = share_view(a, 2, [m]), share_view(b, 2, [m])
                assert 0.5 * np.abs(np.linalg.eigvalsh(view_a.data - view_b.data)).sum() < 1e-10
        honest = run_session(2, 2, {0: 1, 1: 0}, 2, "honest", seed=5)
        assert all(abs(f - 1) < 1e-9 for f in honest.delivered_fidelities.values())
        assert all(v < 1e-10 for v in honest.backreaction.values())
        # stored cell is a padded share: purify the pad into K, read with an I/2 probe
        psi = random_vector(rng, 2)
        z, x = np.diag([1, -1]), np.array([[0, 1], [1, 0]])
        cell = np.concatenate([p @ psi for p in (np.eye(2), z, x, x @ z)]) / 2
        memory = from_vector(RegisterLayout.of(K=2, D1=1, D2=1), np.kron(cell, [1, 0]))
        read = private_read_swap(memory, 0, probe=maximally_mixed(RegisterLayout.of(Q2=1)))
        assert read.backreaction < 1e-10
        colluding = run_session(2, 2, {0: 0, 1: 1}, 2, AdversaryModel("colluding"), seed=5)
        assert colluding.colluder_fidelities
        assert all(abs(f - 1) < 1e-9 for f in colluding.colluder_fidelities.values())


def test_criterion_6_cheat_detection(capsys):
    with criterion(capsys, 6, "measuring-server detection rate", 60):
        db = QramInstance.classical([2, 1, 3, 0], 2)
        trials = 10**4
        rng = np.random.default_rng(6)
        caught = sum(not qpq_query(3, db, "measuring", rng).verified for _ in range(trials))
        p = qpq_detection_probability(3, db, "measuring")
        assert p == pytest.approx(0.5, abs=1e-12)
        assert abs(caught / trials - p) <= 3 * math.sqrt(p * (1 - p) / trials)
        false_alarms = sum(not qpq_query(3, db, "honest", rng).verified for _ in range(trials))
        assert false_alarms == 0


def test_criterion_7_communication(capsys):
    with criterion(capsys, 7, "outsourced queries versus naive magic-state shipping", 1):
        rng = np.random.default_rng(7)
        for k in (1, 2, 3, 4, 6, 8, 10, 20):
            n = 2**k
            for w in (1, 2) if k <= 10 else (1,):
                db = QramInstance.classical(rng.integers(0, 2**w, size=n).tolist(), w)
                net = Network(k)
                net.add_node(QdcNode("qdc", db))
                net.connect("user", "qdc")
                layout = query_layout(n, w)
                vec = np.zeros(layout.dim, complex)
                vec[0] = 1
                res = net.outsourced_query("user", "qdc", from_vector(layout, vec), auto_epr=True)
                assert res.metrics.qubits_teleported == 2 * (k + w)
            shipped = net.naive_magic_shipping("user", "qdc", n, auto_epr=True)
            assert shipped.qubits_teleported == math.isqrt(n - 1) + 1
        assert res.metrics.qubits_teleported / shipped.qubits_teleported < 0.05


def test_criterion_8_sensing(capsys):
    with criterion(capsys, 8, "two-site phase estimation and hardware cost", 60):
        for phi in (0.0, math.pi / 2, 1.0):
            r = phase_estimation_run(phi, 4, 10**4, seed=8)
            assert abs(r.phi_est - phi) < 0.05, (phi, r.phi_est)
        for n in (2, 4, 8):
            r = phase_estimation_run(1.0, n, 200, seed=8, trials=1)
            assert r.pairs_consumed_per_event == math.log2(n) + 1
            assert r.pairs_uncompressed_per_event == n
        c = hardware_cost(4, 256)
        assert (c.qubits_scheme_reference, c.qubits_scheme_qdc) == (32, 12)


def test_criterion_9_determinism(capsys, tmp_path):
    with criterion(capsys, 9, "byte-identical command output per seed", 60):
        commands = [
            ["estimate"],
            ["qram"],
            ["protocol", "--adversary", "measuring", "--sessions", "5"],
            ["sense", "--shots", "2000"],
        ]
        for argv in commands:
            outputs = []
            for run in ("a", "b"):
                out = tmp_path / f"{argv[0]}-{run}"
                assert main([*argv, "--seed", "9", "--out", str(out)]) == 0
                files = sorted(tmp_path.glob(f"{argv[0]}-{run}*"))
                outputs.append([f.read_bytes() for f in files])
            assert outputs[0] == outputs[1], argv[0]
