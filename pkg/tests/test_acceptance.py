"""Acceptance gate.  Each criterion prints one PASS/FAIL line to the terminal.

Run with ``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""

import csv
import io
import os
import random
import subprocess
import sys
import time
from decimal import Decimal

import pytest

from edgetoll.chainsim import ETHER, FEE_SINK, GWEI, ChainConfig, Ledger
from edgetoll.channel import ChannelError, ClaimBook, PaymentChannelContract
from edgetoll.crypto import KeyPair, keccak256, recover, sign

EMPTY_KECCAK = "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"


def report(number, title, ok, detail, capsys):
    with capsys.disabled():
        print(f"\ncriterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})")


def run_cli(*args, tmp_path, name):
    out = tmp_path / name
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "edgetoll", *args, "--out", str(out)],
                          capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    return proc, (out.read_bytes() if out.exists() else b""), elapsed


def rows_of(data: bytes):
    return list(csv.DictReader(io.StringIO(data.decode())))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def benefit(workdir):
    return run_cli("channel-benefit", tmp_path=workdir, name="benefit.csv")


def test_criterion_1_gas_fees(benefit, capsys):
    proc, data, elapsed = benefit
    gas = {(r["mode"], int(r["tasks"]), int(r["gas_price_gwei"])): Decimal(r["mean"])
           for r in rows_of(data) if r["experiment"] == "channel_benefit_gas"}
    wpc = gas.get(("WPC", 50, 7), Decimal(0))
    ratios = [gas[("WPC", 50, g)] / gas[("PC", 50, g)] for g in (1, 4, 7)] if gas else []
    pc_constant = bool(gas) and all(len({v for (m, _, g), v in gas.items() if m == "PC" and g == price}) == 1
                                    for price in (1, 4, 7))
    ok = (proc.returncode == 0
          and abs(wpc - Decimal("0.0057")) <= Decimal("0.02") * Decimal("0.0057")
          and len(ratios) == 3 and all(abs(r - Decimal("4.40")) <= Decimal("0.01") for r in ratios)
          and pc_constant and elapsed < 10)
    report(1, "gas-fee reproduction", ok,
           f"WPC(50, 7 Gwei)={wpc} ether, WPC/PC={[f'{r:.4f}' for r in ratios]}, "
           f"PC constant={pc_constant}, runtime={elapsed:.2f}s", capsys)
    assert ok


def test_criterion_2_latency(benefit, capsys):
    proc, data, _ = benefit
    times = {(r["mode"], int(r["tasks"]), float(r["interval_s"])): float(r["mean"])
             for r in rows_of(data) if r["experiment"] == "channel_benefit_time"}
    reductions = {i: (times[("WPC", 50, i)] - times[("PC", 50, i)]) / times[("PC", 50, i)]
                  for i in (5.0, 10.0, 15.0)} if times else {}
    at5 = reductions.get(5.0, 0.0)
    increasing = bool(reductions) and reductions[5.0] < reductions[10.0] < reductions[15.0]
    ok = proc.returncode == 0 and abs(at5 - 0.318) <= 0.01 and increasing
    report(2, "latency model", ok,
           "reductions " + ", ".join(f"{int(i)}s={r:.1%}" for i, r in reductions.items())
           + f", increasing={increasing}", capsys)
    assert ok


def test_criterion_3_cost_min(workdir, capsys):
    proc, data, _ = run_cli("cost-min", "--edge-counts", "1", "5", "10", "15", "20",
                            tmp_path=workdir, name="cost.csv")
    saved = {(int(r["scheme"]), int(r["tasks"]), int(r["edges"])): r
             for r in rows_of(data) if r["mode"] == "saved"}
    target = saved[(3, 20, 20)]
    mean, se = float(target["mean"]), float(target["stddev"]) / 100 ** 0.5
    analytic = 20 * (0.20 - (0.17 + 0.06 / 21))
    within = abs(mean - analytic) <= 3 * se
    single_zero = all(Decimal(r["mean"]) == 0 and Decimal(r["stddev"]) == 0
                      for (s, t, e), r in saved.items() if e == 1)
    multi = [(t, e) for (s, t, e) in saved if s == 1 and e > 1]
    stable_smaller = all(Decimal(saved[(2, t, e)]["mean"]) < Decimal(saved[(1, t, e)]["mean"]) for t, e in multi)
    ok = proc.returncode == 0 and within and single_zero and stable_smaller
    report(3, "cost minimization", ok,
           f"saved(s3, 20x20)={mean:.5f} vs {analytic:.5f} ({abs(mean - analytic) / se:.2f} SE), "
           f"1 edge zero={single_zero}, scheme 2 < scheme 1 at {len(multi)} points={stable_smaller}", capsys)
    assert ok


def safety_sessions(n_sessions, seed=0):
    """Randomized channel sessions over a shared key pool; returns counters."""
    rng = random.Random(seed)
    pool = [KeyPair.from_seed("safety", i) for i in range(24)]
    outsiders = [KeyPair.from_seed("safety-outsider", i) for i in range(4)]
    ledger = Ledger(ChainConfig(15.0, GWEI), {k.address: 10**9 * ETHER for k in pool})
    contract = PaymentChannelContract(ledger)
    stats = dict(sessions=0, conservation=0, monotone=0, forged=0, forged_rejected=0, over=0,
                 over_rejected=0, collateral_zero=0, unknown_zero=0, replays=0, replay_rejected=0)
    previous = {}  # pair -> an agreement signed on an earlier channel
    supply = ledger.total_supply()
    for _ in range(n_sessions):
        sender, receiver = rng.sample(pool, 2)
        deposit = rng.randrange(1, 5 * ETHER)
        ch = contract.open_channel(sender, receiver.address, deposit)
        pair = (sender.address, receiver.address)
        old = previous.get(pair)
        if old is not None:
            stats["replays"] += 1
            stats["replay_rejected"] += not contract.verify_agreement(old)
        book = ClaimBook(contract)
        best, monotone = 0, True
        for _ in range(rng.randrange(1, 4)):
            value = rng.randrange(0, deposit + 1)
            book.accept_claim(ch, contract.sign_agreement(sender, ch, value))
            best = max(best, value)
            monotone &= book.best_value(ch) == best
        if rng.random() < 0.5:
            stats["forged"] += 1
            forger = rng.choice(outsiders + [receiver])
            try:
                book.accept_claim(ch, contract.sign_agreement(forger, ch, rng.randrange(best, deposit + 1)))
            except ChannelError:
                stats["forged_rejected"] += 1
        if rng.random() < 0.3:
            stats["over"] += 1
            try:
                book.accept_claim(ch, contract.sign_agreement(sender, ch, deposit + rng.randrange(1, ETHER)))
            except ChannelError:
                stats["over_rejected"] += 1
        monotone &= book.best_value(ch) == best
        stats["unknown_zero"] += contract.collateral(rng.choice(outsiders).address, receiver.address) == 0
        before_s, before_r = ledger.balance(sender.address), ledger.balance(receiver.address)
        settlement = contract.close_channel(book.best(ch), receiver)
        gained_r = ledger.balance(receiver.address) - before_r + settlement.gas_charged
        gained_s = ledger.balance(sender.address) - before_s
        stats["conservation"] += (settlement.paid_to_receiver + settlement.refunded_to_sender == deposit
                                  and gained_r == best and gained_s == deposit - best)
        stats["monotone"] += monotone
        stats["collateral_zero"] += contract.collateral(*pair) == 0
        previous[pair] = book.best(ch)
        stats["sessions"] += 1
    stats["supply_conserved"] = ledger.total_supply() == supply and ledger.balance(contract.address) == 0
    stats["fee_sink"] = ledger.balance(FEE_SINK)
    return stats


def test_criterion_4_channel_safety(capsys):
    start = time.perf_counter()
    s = safety_sessions(10_000)
    elapsed = time.perf_counter() - start
    n = s["sessions"]
    ok = (n == 10_000 and s["conservation"] == n and s["monotone"] == n
          and s["forged"] > 0 and s["forged_rejected"] == s["forged"]
          and s["over"] > 0 and s["over_rejected"] == s["over"]
          and s["collateral_zero"] == n and s["unknown_zero"] == n
          and s["replays"] > 0 and s["replay_rejected"] == s["replays"]
          and s["supply_conserved"] and elapsed < 30)
    report(4, "channel safety suite", ok,
           f"{n} sessions, conservation {s['conservation']}/{n}, forgeries rejected "
           f"{s['forged_rejected']}/{s['forged']}, over-deposit rejected {s['over_rejected']}/{s['over']}, "
           f"replays rejected {s['replay_rejected']}/{s['replays']}, runtime={elapsed:.2f}s", capsys)
    assert ok


def test_criterion_5_crypto_vectors(capsys):
    empty_ok = keccak256(b"").hex() == EMPTY_KECCAK
    rng = random.Random(2024)
    round_trips = 0
    for _ in range(1000):
        key = KeyPair.generate(rng)
        digest = rng.randbytes(32)
        round_trips += recover(digest, sign(key, digest)) == key.address
    script = ("from edgetoll.crypto import KeyPair, keccak256, sign\n"
              "print(''.join(sign(KeyPair.from_seed('det', i), keccak256(bytes([i]))).hex() for i in range(20)))")
    runs = [subprocess.run([sys.executable, "-c", script], capture_output=True, text=True, check=True).stdout
            for _ in range(2)]
    deterministic = runs[0] == runs[1] and len(runs[0]) > 100
    ok = empty_ok and round_trips == 1000 and deterministic
    report(5, "crypto vectors", ok,
           f"empty keccak={empty_ok}, round trips {round_trips}/1000, identical across runs={deterministic}", capsys)
    assert ok


def test_criterion_6_integration(workdir, capsys):
    proc, data, elapsed = run_cli("integration", tmp_path=workdir, name="integration.csv")
    checks = {r["check"]: r for r in rows_of(data)}
    balances = [r for name, r in checks.items() if name.startswith("balance_")]
    ok = (proc.returncode == 0 and len(balances) >= 5 and all(r["ok"] == "1" for r in checks.values())
          and checks.get("user_channel_closed", {}).get("actual") == "True"
          and checks.get("collateral_after_withdraw", {}).get("actual") == "0"
          and checks.get("tasks_completed", {}).get("actual") == "5")
    report(6, "end-to-end integration", ok,
           f"exit={proc.returncode}, {len(checks)} checks, {len(balances)} wei-exact balances, "
           f"runtime={elapsed:.2f}s", capsys)
    assert ok


def test_criterion_7_determinism(workdir, benefit, capsys):
    outcomes = {}
    _, first, _ = benefit
    _, second, _ = run_cli("channel-benefit", tmp_path=workdir, name="benefit-2.csv")
    outcomes["channel-benefit"] = bool(first) and first == second
    for command in ("cost-min", "integration"):
        a = run_cli(command, "--seed", "17", tmp_path=workdir, name=f"{command}-a.csv")[1]
        b = run_cli(command, "--seed", "17", tmp_path=workdir, name=f"{command}-b.csv")[1]
        outcomes[command] = bool(a) and a == b
    ok = all(outcomes.values())
    report(7, "determinism", ok, ", ".join(f"{k} identical={v}" for k, v in outcomes.items()), capsys)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([os.path.abspath(__file__), "-q"]))
