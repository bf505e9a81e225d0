import socket

import pytest

from edgetoll.chainsim import ETHER, GWEI, ChainConfig, Ledger
from edgetoll.channel import PaymentChannelContract
from edgetoll.crypto import KeyPair
from edgetoll.node import EdgeClient, EdgeNode, EdgeServer, NodeError, make_task, synthetic_image
from edgetoll.pricing import PriceBoard, scheme
from edgetoll.proxy import MatchRequest, Proxy, ProxyClient, ProxyError, ProxyServer
from edgetoll.wire import Connection, NDJSONServer, WireError, decode, encode, parse_hostport


class Echo(NDJSONServer):
    def dispatch(self, message):
        return {"type": "echo", "payload": message}


def test_encode_is_canonical():
    assert encode({"type": "x", "b": 1, "a": [1, 2]}) == b'{"a":[1,2],"b":1,"type":"x"}\n'
    assert decode(encode({"type": "t", "n": 3})) == {"type": "t", "n": 3}


@pytest.mark.parametrize("line", [b"not json", b"[1,2]", b'{"no_type":1}', b"\xff\xfe"])
def test_decode_rejects_malformed(line):
    with pytest.raises(WireError):
        decode(line)


def test_parse_hostport():
    assert parse_hostport("127.0.0.1:8080") == ("127.0.0.1", 8080)
    assert parse_hostport(":9") == ("127.0.0.1", 9)
    with pytest.raises(ValueError):
        parse_hostport("localhost")


def test_round_trip_and_bad_frame():
    with Echo() as server:
        with Connection(server.address) as conn:
            assert conn.request({"type": "ping", "k": 1}) == {"type": "echo", "payload": {"type": "ping", "k": 1}}
            assert conn.request({"type": "again"})["payload"]["type"] == "again"
        with socket.create_connection(parse_hostport(server.address)) as sock:
            sock.sendall(b"garbage\n")
            reply = decode(sock.makefile("rb").readline())
        assert reply["type"] == "error" and reply["code"] == "bad_frame"


def test_unreachable_server_raises():
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    with pytest.raises(OSError):
        Connection(f"127.0.0.1:{port}", timeout=1).request({"type": "ping"})


@pytest.fixture
def network():
    proxy_key, user = KeyPair.from_seed("wire", "proxy"), KeyPair.from_seed("wire", "user")
    edge_key = KeyPair.from_seed("wire", "edge")
    ledger = Ledger(ChainConfig(15.0, GWEI), {proxy_key.address: 10 * ETHER, user.address: 10 * ETHER,
                                              edge_key.address: ETHER})
    contract = PaymentChannelContract(ledger)
    proxy = Proxy(proxy_key, contract, PriceBoard(scheme(3), 1))
    edge = EdgeNode(edge_key, contract, proxy_key.address)
    with ProxyServer(proxy) as proxy_server, EdgeServer(edge) as edge_server:
        yield proxy, ProxyClient(proxy_server.address), edge, EdgeClient(edge_server.address), user, contract


def test_proxy_protocol(network):
    proxy, client, edge, _, user, contract = network
    assert client.audit_fingerprint() == proxy.audit_fingerprint()
    record = client.register_edge(edge.address, "127.0.0.1:1")
    assert record.channel_id is not None
    with pytest.raises(ProxyError) as err:
        client.register_edge(edge.address, "127.0.0.1:1")
    assert err.value.code == "duplicate_edge"
    assert [r.ledger_address for r in client.discover()] == [edge.address]
    match = client.schedule(MatchRequest(user.address, (edge.address,), "task:0"))
    assert match.chosen_edge == edge.address
    ch = contract.open_channel(user, proxy.address, ETHER)
    receipt = client.pay(contract.sign_agreement(user, ch, match.quoted_price), edge.address)
    assert receipt.edge_agreement.cumulative_value == match.quoted_price
    with pytest.raises(ProxyError) as err:
        client.schedule(MatchRequest(user.address, (), ""))
    assert err.value.code == "no_candidates"


def test_edge_protocol(network):
    _, _, edge, client, _, _ = network
    task = make_task(7, synthetic_image(7))
    assert client.serve_task(task) == edge.serve_task(task)
    with pytest.raises(NodeError) as err:
        client.serve_task(make_task(8, b""))
    assert err.value.code == "bad_payload"
    with pytest.raises(NodeError) as err:
        client._call({"type": "nonsense"})
    assert err.value.code == "unknown_type"
