import base64

import pytest

from edgetoll.chainsim import ETHER, FEE_SINK, GWEI, ChainConfig, Ledger
from edgetoll.channel import PaymentChannelContract
from edgetoll.crypto import KeyPair
from edgetoll.node import (
    EdgeNode,
    LocalEdgeLink,
    Mode,
    NodeError,
    Task,
    Terminal,
    locate_face,
    make_task,
    synthetic_image,
)
from edgetoll.pricing import PriceBoard, scheme
from edgetoll.proxy import EdgeStatus, Proxy

T_SERVICE = 14.9


class World:
    def __init__(self, interval=15.0, gas_gwei=1, n_edges=3, seed=0):
        self.proxy_key = KeyPair.from_seed("node-test", "proxy")
        self.user = KeyPair.from_seed("node-test", "user")
        keys = [KeyPair.from_seed("node-test", "edge", i) for i in range(n_edges)]
        genesis = {self.proxy_key.address: 40 * ETHER, self.user.address: 30 * ETHER}
        genesis.update({k.address: ETHER for k in keys})
        self.ledger = Ledger(ChainConfig(interval, gas_gwei * GWEI), genesis)
        self.contract = PaymentChannelContract(self.ledger)
        link = LocalEdgeLink()
        self.proxy = Proxy(self.proxy_key, self.contract, PriceBoard(scheme(1), seed), edge_link=link)
        self.edges = []
        for key in keys:
            node = EdgeNode(key, self.contract, self.proxy_key.address, T_SERVICE)
            link.add(node)
            self.proxy.register_edge(key.address, wait=False)
            self.edges.append(node)
        self.proxy.sync()
        self.terminal = Terminal(self.user, self.proxy, self.contract, link.resolve)

    def run(self, mode, n, deposit=12 * ETHER):
        session = self.terminal.open_session(mode, deposit=deposit)
        return session, self.terminal.run_tasks(session, n)


def test_serve_task_is_deterministic():
    edge = World(n_edges=1).edges[0]
    task = make_task(1, synthetic_image(1))
    first = edge.serve_task(task)
    assert edge.serve_task(task) == first
    assert first.service_time_s == T_SERVICE


def test_distinct_payloads_distinct_boxes():
    boxes = {locate_face(synthetic_image(i), 640, 480) for i in range(200)}
    assert len(boxes) > 190
    for box in boxes:
        assert 0 <= box.x and box.x + box.width <= 640
        assert 0 <= box.y and box.y + box.height <= 480


@pytest.mark.parametrize("payload", ["", "not base64!!"])
def test_bad_payload(payload):
    edge = World(n_edges=1).edges[0]
    with pytest.raises(NodeError) as err:
        edge.serve_task(Task(1, payload))
    assert err.value.code == "bad_payload"
    reply = edge.handle_message({"type": "task", "id": 1, "image_b64": payload})
    assert reply == {"type": "error", "code": "bad_payload", "detail": reply["detail"]}


def test_task_message_shape():
    edge = World(n_edges=1).edges[0]
    image = synthetic_image(3)
    reply = edge.handle_message({"type": "task", "id": 3, "image_b64": base64.b64encode(image).decode()})
    assert reply["type"] == "result" and reply["id"] == 3
    assert set(reply["face"]) == {"x", "y", "w", "h"}


def test_discovery_filters_busy_edges():
    world = World()
    assert len(world.terminal.discover_edges()) == 3
    world.proxy.set_status(world.edges[0].address, EdgeStatus.BUSY)
    assert len(world.terminal.discover_edges()) == 2
    assert World(n_edges=0).terminal.discover_edges() == []


def test_make_agreement_running_sum():
    world = World()
    session = world.terminal.open_session(Mode.PC, deposit=ETHER)
    fifth = ETHER // 5
    assert world.terminal.make_agreement(session, fifth).cumulative_value == fifth
    assert world.terminal.make_agreement(session, fifth).cumulative_value == 2 * fifth
    with pytest.raises(NodeError) as err:
        world.terminal.make_agreement(session, ETHER)
    assert err.value.code == "over_deposit"
    assert session.cumulative_paid == 2 * fifth


def test_make_agreement_needs_pc_session():
    world = World()
    session = world.terminal.open_session(Mode.WPC)
    with pytest.raises(NodeError):
        world.terminal.make_agreement(session, 1)


@pytest.mark.parametrize("n", [1, 5, 50])
def test_pc_gas_is_constant(n):
    _, report = World(gas_gwei=7).run(Mode.PC, n)
    assert report.total_gas_wei == 183_000 * 7 * GWEI


@pytest.mark.parametrize("n", [1, 5, 50])
def test_wpc_gas_is_linear(n):
    _, report = World(gas_gwei=4).run(Mode.WPC, n)
    assert report.total_gas_wei == n * 16_100 * 4 * GWEI


@pytest.mark.parametrize("interval", [5.0, 10.0, 15.0])
@pytest.mark.parametrize("n", [1, 10, 50])
def test_completion_time_formulas(interval, n):
    _, pc = World(interval=interval).run(Mode.PC, n)
    _, wpc = World(interval=interval).run(Mode.WPC, n)
    assert pc.total_time_s == pytest.approx(n * T_SERVICE + 2 * interval)
    assert wpc.total_time_s == pytest.approx(n * (T_SERVICE + interval))


def test_single_task_times_are_close():
    _, pc = World(interval=5.0).run(Mode.PC, 1)
    _, wpc = World(interval=5.0).run(Mode.WPC, 1)
    assert abs(pc.total_time_s - wpc.total_time_s) <= 2 * 5.0


def test_gap_grows_with_tasks():
    gaps = []
    for n in (2, 5, 10, 20):
        _, pc = World(interval=10.0).run(Mode.PC, n)
        _, wpc = World(interval=10.0).run(Mode.WPC, n)
        gaps.append(wpc.total_time_s - pc.total_time_s)
    assert gaps[0] >= 0
    assert all(a < b for a, b in zip(gaps, gaps[1:]))


def test_pc_session_conservation():
    world = World()
    ledger = world.ledger
    user, proxy = world.user.address, world.proxy.address
    user_start, sink_start = ledger.balance(user), ledger.balance(FEE_SINK)
    session, report = world.run(Mode.PC, 50)
    paid = report.total_paid_wei
    assert session.closed and session.settlement.paid_to_receiver == paid
    assert paid == sum(t.price for t in session.tasks)
    for edge in world.edges:
        edge.settle()
    assert world.proxy.rotations > 0
    earned = sum(e.earned for e in world.edges)
    edge_gas = sum(s.gas_charged for e in world.edges for s in e.settlements)
    assert ledger.balance(user) == user_start - paid - 103_000 * GWEI
    assert paid == earned + world.proxy.fees_retained
    proxy_gas = 80_000 * GWEI + world.proxy.rotations * 103_000 * GWEI
    assert ledger.balance(FEE_SINK) - sink_start == 103_000 * GWEI + proxy_gas + edge_gas
    assert ledger.balance(world.contract.address) == world.contract.escrow_total()
    assert ledger.total_supply() == ledger.genesis_supply


def test_failed_task_retried_once():
    world = World(n_edges=1)
    session = world.terminal.open_session(Mode.PC)
    calls = {"n": 0}
    original = world.proxy.pay

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            from edgetoll.proxy import ProxyError
            raise ProxyError("transient", "dropped")
        return original(*args, **kwargs)

    world.proxy.pay = flaky
    report = world.terminal.run_tasks(session, 2)
    assert report.tasks == 2 and calls["n"] == 3
