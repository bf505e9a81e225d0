"""Edge and terminal actors.

An edge serves face-location tasks and collects the proxy's claims on its
channel.  A terminal opens one channel to the proxy (PC mode) or pays every
task with an on-chain transfer (WPC mode), and keeps a session clock: the
simulated seconds its tasks took, counting service time and the
confirmation waits it had to sit through.
"""

from __future__ import annotations

import base64
import binascii
import enum
import logging
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

from edgetoll.chainsim import ETHER, ChainError, InsufficientFunds, check_amount
from edgetoll.channel import (
    Channel,
    ChannelError,
    ClaimBook,
    PaymentChannelContract,
    Settlement,
    SignedAgreement,
)
from edgetoll.crypto import Address, KeyPair, keccak256
from edgetoll.proxy import EdgeRecord, MatchRequest, ProxyError
from edgetoll.wire import Connection, NDJSONServer, WireError

log = logging.getLogger(__name__)

DEFAULT_T_SERVICE = 14.9
DEFAULT_IMAGE_SIZE = (640, 480)


class NodeError(Exception):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


@dataclass(frozen=True, slots=True)
class Task:
    id: int
    image_b64: str
    posted_at: float = 0.0

    def image(self) -> bytes:
        raw = _unb64(self.image_b64)
        if raw is None:
            raise NodeError("bad_payload", "image is not valid base64")
        if not raw:
            raise NodeError("bad_payload", "image is empty")
        return raw

    def to_json(self) -> dict:
        return {"type": "task", "id": self.id, "image_b64": self.image_b64}


@lru_cache(maxsize=1 << 12)
def _unb64(payload) -> Optional[bytes]:
    try:
        return base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError, TypeError):
        return None


@dataclass(frozen=True, slots=True)
class FaceBox:
    x: int
    y: int
    width: int
    height: int

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.width, "h": self.height}

    @classmethod
    def from_json(cls, obj: dict) -> FaceBox:
        return cls(int(obj["x"]), int(obj["y"]), int(obj["w"]), int(obj["h"]))


@dataclass(frozen=True, slots=True)
class ServiceResult:
    task_id: int
    face: FaceBox
    service_time_s: float


@lru_cache(maxsize=1 << 12)
def synthetic_image(task_id: int, owner: bytes = b"") -> bytes:
    """Stand-in image bytes for a task; distinct per (owner, task id)."""
    seed = keccak256(b"image/" + bytes(owner) + task_id.to_bytes(8, "big"))
    return b"\xff\xd8" + seed + keccak256(seed)


def make_task(task_id: int, image: bytes, posted_at: float = 0.0) -> Task:
    return Task(task_id, _b64(image), posted_at)


@lru_cache(maxsize=1 << 12)
def _b64(image: bytes) -> str:
    return base64.b64encode(image).decode()


@lru_cache(maxsize=1 << 12)
def locate_face(image: bytes, width: int, height: int) -> FaceBox:
    """Deterministic face box derived from the image hash; always in bounds."""
    h = keccak256(image)
    w = 16 + int.from_bytes(h[0:4], "big") % (width // 2 - 15)
    hh = 16 + int.from_bytes(h[4:8], "big") % (height // 2 - 15)
    x = int.from_bytes(h[8:12], "big") % (width - w + 1)
    y = int.from_bytes(h[12:16], "big") % (height - hh + 1)
    return FaceBox(x, y, w, hh)


class EdgeNode:
    """An edge provider: serves tasks and keeps its best claim from the proxy."""

    def __init__(self, key: KeyPair, contract: PaymentChannelContract, proxy_address: bytes,
                 t_service: float = DEFAULT_T_SERVICE, image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE):
        if t_service < 0:
            raise ValueError("t_service must be non-negative")
        width, height = image_size
        if width < 32 or height < 32:
            raise ValueError("image must be at least 32x32")
        self.key = key
        self.address = key.address
        self.contract = contract
        self.proxy_address = Address(proxy_address)
        self.t_service = t_service
        self.image_size = (width, height)
        self.claims = ClaimBook(contract)
        self.settlements: list[Settlement] = []
        self.tasks_served = 0
        self._lock = threading.Lock()

    def serve_task(self, task: Task) -> ServiceResult:
        face = locate_face(task.image(), *self.image_size)
        self.tasks_served += 1
        return ServiceResult(task.id, face, self.t_service)

    def channel(self) -> Optional[Channel]:
        return self.contract.channel_for(self.proxy_address, self.address)

    def accept_payment(self, agreement: SignedAgreement) -> SignedAgreement:
        with self._lock:
            ch = self.channel()
            if ch is None:
                raise NodeError("no_channel", "no open channel from the proxy")
            try:
                return self.claims.accept_claim(ch, agreement)
            except ChannelError as exc:
                raise NodeError(exc.code, exc.detail) from exc

    def settle(self) -> Optional[Settlement]:
        """Close the proxy channel with the best claim; None if nothing to claim."""
        with self._lock:
            ch = self.channel()
            best = self.claims.best(ch) if ch is not None else None
            if best is None:
                return None
            settlement = self.contract.close_channel(best, self.key)
            self.claims.forget(ch)
            self.settlements.append(settlement)
            return settlement

    @property
    def earned(self) -> int:
        return sum(s.paid_to_receiver for s in self.settlements)

    def handle_message(self, message: dict) -> dict:
        kind = message.get("type")
        try:
            if kind == "task":
                task = Task(int(message["id"]), message.get("image_b64", ""))
                result = self.serve_task(task)
                return {"type": "result", "id": result.task_id, "face": result.face.to_json(),
                        "service_time_s": result.service_time_s}
            if kind == "claim":
                best = self.accept_payment(SignedAgreement.from_json(message["agreement"]))
                return {"type": "claim_ack", "cumulative_value": str(best.cumulative_value)}
            if kind == "settle":
                s = self.settle()
                return {"type": "settled", "paid": None if s is None else str(s.paid_to_receiver)}
            return {"type": "error", "code": "unknown_type"}
        except NodeError as exc:
            return {"type": "error", "code": exc.code, "detail": exc.detail}
        except ChannelError as exc:
            return {"type": "error", "code": exc.code, "detail": exc.detail}
        except (KeyError, TypeError, ValueError) as exc:
            return {"type": "error", "code": "bad_request", "detail": str(exc)}


class EdgeServer(NDJSONServer):
    def __init__(self, edge: EdgeNode, host: str = "127.0.0.1", port: int = 0):
        super().__init__(host, port)
        self.edge = edge

    def dispatch(self, message: dict) -> dict:
        return self.edge.handle_message(message)


class EdgeClient:
    """Talks to an :class:`EdgeServer`; mirrors the EdgeNode calls a peer needs."""

    def __init__(self, address: str, timeout: float = 5.0):
        self.conn = Connection(address, timeout)

    def _call(self, message: dict) -> dict:
        reply = self.conn.request(message)
        if reply["type"] == "error":
            raise NodeError(reply.get("code", "error"), reply.get("detail", ""))
        return reply

    def serve_task(self, task: Task) -> ServiceResult:
        reply = self._call(task.to_json())
        return ServiceResult(int(reply["id"]), FaceBox.from_json(reply["face"]), float(reply["service_time_s"]))

    def accept_payment(self, agreement: SignedAgreement) -> None:
        self._call({"type": "claim", "agreement": agreement.to_json()})

    def settle(self) -> None:
        self._call({"type": "settle"})

    def close(self) -> None:
        self.conn.close()


class LocalEdgeLink:
    """Proxy-to-edge link for in-process edges."""

    def __init__(self, edges: dict | None = None):
        self.edges: dict[Address, EdgeNode] = dict(edges or {})

    def add(self, edge: EdgeNode) -> None:
        self.edges[edge.address] = edge

    def deliver(self, record: EdgeRecord, agreement: SignedAgreement) -> None:
        self.edges[record.ledger_address].accept_payment(agreement)

    def request_settle(self, record: EdgeRecord) -> None:
        self.edges[record.ledger_address].settle()

    def resolve(self, record: EdgeRecord) -> EdgeNode:
        return self.edges[record.ledger_address]


class NetworkEdgeLink:
    """Proxy-to-edge link over each edge's advertised host:port."""

    def __init__(self, timeout: float = 5.0):
        self.timeout = timeout
        self._clients: dict[str, EdgeClient] = {}
        self._lock = threading.Lock()

    def resolve(self, record: EdgeRecord) -> EdgeClient:
        with self._lock:
            client = self._clients.get(record.network_address)
            if client is None:
                client = self._clients[record.network_address] = EdgeClient(record.network_address, self.timeout)
            return client

    def deliver(self, record: EdgeRecord, agreement: SignedAgreement) -> None:
        self.resolve(record).accept_payment(agreement)

    def request_settle(self, record: EdgeRecord) -> None:
        self.resolve(record).settle()

    def close(self) -> None:
        for client in self._clients.values():
            client.close()


class Mode(enum.Enum):
    PC = "PC"
    WPC = "WPC"


@dataclass(slots=True)
class TaskRecord:
    task_id: int
    edge: Address
    price: int
    service_time_s: float
    payment_wait_s: float
    face: FaceBox


@dataclass(slots=True)
class TerminalSession:
    key: KeyPair
    mode: Mode
    channel: Optional[Channel] = None
    cumulative_paid: int = 0
    clock: float = 0.0
    gas_paid: int = 0
    closed: bool = False
    settlement: Optional[Settlement] = None
    tasks: list = field(default_factory=list)

    @property
    def deposit(self) -> int:
        return self.channel.deposit if self.channel is not None else 0


@dataclass(frozen=True)
class SessionReport:
    mode: Mode
    tasks: int
    total_time_s: float
    total_gas_wei: int
    total_paid_wei: int


class Terminal:
    """A user device.

    ``proxy`` is a :class:`~edgetoll.proxy.Proxy` or a
    :class:`~edgetoll.proxy.ProxyClient`; ``edge_resolver`` maps an
    EdgeRecord to something with ``serve_task``.
    """

    def __init__(self, key: KeyPair, proxy, contract: PaymentChannelContract,
                 edge_resolver: Callable[[EdgeRecord], object],
                 discovery_attempts: int = 3, backoff_s: float = 0.05):
        self.key = key
        self.address = key.address
        self.proxy = proxy
        self.contract = contract
        self.ledger = contract.ledger
        self.edge_resolver = edge_resolver
        self.discovery_attempts = discovery_attempts
        self.backoff_s = backoff_s
        self.proxy_address = Address(proxy.address)

    def open_session(self, mode: Mode, deposit: int = 2 * ETHER) -> TerminalSession:
        session = TerminalSession(self.key, mode)
        if mode is Mode.PC:
            try:
                handle = self.contract.submit_open(self.key, self.proxy_address, deposit)
            except ChannelError as exc:
                raise NodeError(exc.code, exc.detail) from exc
            self.ledger.wait(handle)
            if handle.result is None:
                raise NodeError("reverted", handle.error or "")
            session.channel = handle.result
            session.clock += handle.latency
            session.gas_paid += handle.fee
        return session

    def discover_edges(self) -> list[EdgeRecord]:
        delay = self.backoff_s
        for attempt in range(self.discovery_attempts):
            try:
                return self.proxy.discover()
            except (ConnectionError, OSError, WireError) as exc:
                if attempt + 1 == self.discovery_attempts:
                    raise NodeError("proxy_unreachable", str(exc)) from exc
                log.info("discovery failed (%s); retrying in %.2fs", exc, delay)
                time.sleep(delay)
                delay *= 2
        raise NodeError("proxy_unreachable", "no discovery attempts configured")

    def make_agreement(self, session: TerminalSession, increment: int) -> SignedAgreement:
        if session.mode is not Mode.PC or session.channel is None or session.closed:
            raise NodeError("no_channel", "agreements need an open PC session")
        check_amount(increment)
        total = session.cumulative_paid + increment
        if total > session.channel.deposit:
            raise NodeError("over_deposit", f"cumulative {total} would exceed deposit {session.channel.deposit}")
        agreement = self.contract.sign_agreement(self.key, session.channel, total)
        session.cumulative_paid = total
        return agreement

    def _one_task(self, session: TerminalSession, task: Task, withdraw: bool) -> TaskRecord:
        edges = self.discover_edges()
        if not edges:
            raise NodeError("no_edges", "no edge available")
        by_address = {e.ledger_address: e for e in edges}
        match = self.proxy.schedule(MatchRequest(self.address, tuple(by_address), f"task:{task.id}"))
        edge = self.edge_resolver(by_address[match.chosen_edge])
        wait = 0.0
        if session.mode is Mode.PC:
            before = session.cumulative_paid
            agreement = self.make_agreement(session, match.quoted_price)
            try:
                receipt = self.proxy.pay(agreement, match.chosen_edge, withdraw)
            except Exception:
                session.cumulative_paid = before
                raise
            result = edge.serve_task(task)
            if receipt.settlement is not None:
                wait = receipt.close_latency
                session.gas_paid += receipt.settlement.gas_charged
                session.settlement = receipt.settlement
                session.closed = True
        else:
            result = edge.serve_task(task)
            try:
                handle = self.ledger.transfer(self.address, match.chosen_edge, match.quoted_price)
            except InsufficientFunds as exc:
                raise NodeError("insufficient_funds", str(exc)) from exc
            self.ledger.wait(handle)
            wait = handle.latency
            session.gas_paid += handle.fee
            session.cumulative_paid += match.quoted_price
        session.clock += result.service_time_s + wait
        rec = TaskRecord(task.id, match.chosen_edge, match.quoted_price, result.service_time_s, wait, result.face)
        session.tasks.append(rec)
        return rec

    def run_tasks(self, session: TerminalSession, n: int, withdraw_at_end: bool = True,
                  images: Callable[[int], bytes] | None = None) -> SessionReport:
        """Run ``n`` tasks back to back; in PC mode the last payment withdraws."""
        if n < 0:
            raise ValueError("task count must be non-negative")
        images = images or (lambda i: synthetic_image(i, self.address))
        start = len(session.tasks)
        for i in range(start, start + n):
            task = make_task(i, images(i), session.clock)
            withdraw = withdraw_at_end and session.mode is Mode.PC and i == start + n - 1
            for attempt in (0, 1):
                try:
                    self._one_task(session, task, withdraw)
                    break
                except (ProxyError, NodeError, ChainError, ChannelError, ConnectionError, OSError) as exc:
                    if attempt:
                        raise
                    log.warning("task %d failed (%s); retrying once", task.id, exc)
        return SessionReport(session.mode, len(session.tasks), session.clock, session.gas_paid,
                             session.cumulative_paid)
