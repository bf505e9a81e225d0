"""The matching-and-relay intermediary.

The proxy holds one channel from each user and one channel to each edge.
Users pay the proxy with cumulative agreements; for every verified increment
the proxy signs a matching increment (less its fee) on its channel to the
chosen edge.  Edge choice is greedy: the cheapest current quote among the
user's candidates.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from typing import Optional, Protocol

from edgetoll.chainsim import ETHER, check_amount
from edgetoll.channel import (
    ChannelError,
    ClaimBook,
    PaymentChannelContract,
    Settlement,
    SignedAgreement,
)
from edgetoll.crypto import Address, Digest, KeyPair, keccak256
from edgetoll.pricing import PriceBoard
from edgetoll.wire import Connection, NDJSONServer, WireError

log = logging.getLogger(__name__)

SCHEDULING_POLICY = "greedy-min-price"


class ProxyError(Exception):
    def __init__(self, code: str, detail: str = "", retry_after: Optional[float] = None):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail
        self.retry_after = retry_after

    def to_json(self) -> dict:
        out = {"type": "error", "code": self.code, "detail": self.detail}
        if self.retry_after is not None:
            out["retry_after"] = self.retry_after
        return out


@dataclass(frozen=True)
class ProxyConfig:
    edge_deposit: int = ETHER
    fee: int = 0
    unsalted_digest: bool = False
    registry_path: Optional[str] = None

    def __post_init__(self):
        check_amount(self.edge_deposit)
        check_amount(self.fee)
        if self.edge_deposit <= 0:
            raise ValueError("edge_deposit must be positive")


class EdgeStatus(enum.Enum):
    PENDING = "pending"  # channel not yet confirmed, or proxy could not fund it
    AVAILABLE = "available"
    BUSY = "busy"


@dataclass(slots=True)
class EdgeRecord:
    ledger_address: Address
    network_address: str
    registered_at: float
    status: EdgeStatus = EdgeStatus.PENDING
    channel_id: Optional[Digest] = None
    _open_handle: object = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "ledger_address": str(self.ledger_address),
            "network_address": self.network_address,
            "registered_at": self.registered_at,
            "status": self.status.value,
            "channel_id": None if self.channel_id is None else str(self.channel_id),
        }

    @classmethod
    def from_json(cls, obj: dict) -> EdgeRecord:
        return cls(
            Address(obj["ledger_address"]),
            obj["network_address"],
            float(obj["registered_at"]),
            EdgeStatus(obj.get("status", "pending")),
            None if obj.get("channel_id") is None else Digest(obj["channel_id"]),
        )


@dataclass(frozen=True, slots=True)
class MatchRequest:
    user: Address
    candidates: tuple
    task_descriptor: str = ""

    def to_json(self) -> dict:
        return {"user": str(self.user), "candidates": [str(c) for c in self.candidates],
                "task_descriptor": self.task_descriptor}

    @classmethod
    def from_json(cls, obj: dict) -> MatchRequest:
        return cls(Address(obj["user"]), tuple(Address(c) for c in obj["candidates"]),
                   str(obj.get("task_descriptor", "")))


@dataclass(frozen=True, slots=True)
class MatchResult:
    chosen_edge: Address
    quoted_price: int
    epoch: int

    def to_json(self) -> dict:
        return {"chosen_edge": str(self.chosen_edge), "quoted_price": str(self.quoted_price), "epoch": self.epoch}

    @classmethod
    def from_json(cls, obj: dict) -> MatchResult:
        return cls(Address(obj["chosen_edge"]), int(obj["quoted_price"]), int(obj["epoch"]))


@dataclass(frozen=True, slots=True)
class PayReceipt:
    edge: Address
    edge_agreement: SignedAgreement
    settlement: Optional[Settlement] = None
    close_latency: float = 0.0

    def to_json(self) -> dict:
        out = {"edge": str(self.edge), "agreement": self.edge_agreement.to_json(),
               "close_latency": self.close_latency, "settlement": None}
        if self.settlement is not None:
            s = self.settlement
            out["settlement"] = {"channel_id": str(s.channel_id), "paid_to_receiver": str(s.paid_to_receiver),
                                 "refunded_to_sender": str(s.refunded_to_sender), "gas_charged": str(s.gas_charged)}
        return out

    @classmethod
    def from_json(cls, obj: dict) -> PayReceipt:
        s = obj.get("settlement")
        settlement = None
        if s is not None:
            settlement = Settlement(Digest(s["channel_id"]), int(s["paid_to_receiver"]),
                                    int(s["refunded_to_sender"]), int(s["gas_charged"]))
        return cls(Address(obj["edge"]), SignedAgreement.from_json(obj["agreement"]), settlement,
                   float(obj["close_latency"]))


def choose_edge(quotes) -> tuple:
    """Greedy pick from ``(price, registered_at, address)`` triples.

    Lowest price wins; ties go to the earliest registration, then the
    lexicographically smallest address.
    """
    # addresses are bytes, so plain tuple order is the tie-break order
    return min(quotes)


class EdgeLink(Protocol):
    """How the proxy reaches an edge: hand over a claim, ask it to settle."""

    def deliver(self, record: EdgeRecord, agreement: SignedAgreement) -> None: ...

    def request_settle(self, record: EdgeRecord) -> None: ...


class Proxy:
    """Edge registry, greedy scheduler and payment relay.

    All state changes happen under one re-entrant lock; ledger operations
    additionally take the ledger lock (always in that order).
    """

    def __init__(self, key: KeyPair, contract: PaymentChannelContract, prices: PriceBoard,
                 config: ProxyConfig | None = None, edge_link: EdgeLink | None = None):
        self.key = key
        self.address = key.address
        self.contract = contract
        self.ledger = contract.ledger
        self.prices = prices
        self.config = config or ProxyConfig()
        if self.config.unsalted_digest != contract.unsalted_digest:
            raise ValueError("proxy and contract disagree on unsalted_digest")
        self.edge_link = edge_link
        self.user_claims = ClaimBook(contract)
        self.fees_retained = 0
        self.relayed_to_edges = 0
        self.rotations = 0
        self._records: dict[Address, EdgeRecord] = {}
        self._owed: dict[Digest, int] = {}  # cumulative promised per proxy->edge channel
        self._lock = threading.RLock()
        if self.config.registry_path and os.path.exists(self.config.registry_path):
            self._replay(self.config.registry_path)

    # -- registry ------------------------------------------------------

    def register_edge(self, ledger_address: bytes, network_address: str = "", wait: bool = True) -> EdgeRecord:
        """Record the edge and open a channel to it funded with ``edge_deposit``."""
        edge = Address(ledger_address)
        with self._lock:
            if edge in self._records:
                raise ProxyError("duplicate_edge", f"{edge} is already registered")
            if edge == self.address:
                raise ProxyError("bad_edge", "the proxy cannot register itself")
            record = EdgeRecord(edge, network_address, self.ledger.clock)
            self._records[edge] = record
            self.prices.add_edge(edge)
            self._log({"event": "register", **record.to_json()})
            self._start_open(record)
            if wait:
                self.sync()
            return record

    def _start_open(self, record: EdgeRecord) -> None:
        # a pre-deposit condition check on the edge would go here; none is applied
        try:
            record._open_handle = self.contract.submit_open(self.key, record.ledger_address,
                                                            self.config.edge_deposit)
        except ChannelError as exc:
            if exc.code == "insufficient_funds":
                log.warning("registration of %s held pending: %s", record.ledger_address, exc)
                record._open_handle = None
                return
            if exc.code != "duplicate_channel":
                raise ProxyError(exc.code, exc.detail) from exc
            # channel already exists (e.g. after registry replay): adopt it
            record._open_handle = None

    def sync(self) -> list[EdgeRecord]:
        """Wait for pending channel opens and retry registrations held for funds."""
        ready = []
        with self._lock:
            for record in self._records.values():
                if record.status is not EdgeStatus.PENDING:
                    continue
                if record._open_handle is not None:
                    self.ledger.wait(record._open_handle)
                    record._open_handle = None
                ch = self.contract.channel_for(self.address, record.ledger_address)
                if ch is None:
                    self._start_open(record)
                    if record._open_handle is None:
                        continue
                    self.ledger.wait(record._open_handle)
                    record._open_handle = None
                    ch = self.contract.channel_for(self.address, record.ledger_address)
                    if ch is None:
                        continue
                self._attach(record, ch)
                ready.append(record)
        return ready

    def _attach(self, record: EdgeRecord, ch) -> None:
        record.channel_id = ch.id
        record.status = EdgeStatus.AVAILABLE
        self._owed.setdefault(ch.id, 0)
        self._log({"event": "channel", "ledger_address": str(record.ledger_address), "channel_id": str(ch.id)})

    def record(self, edge: bytes) -> EdgeRecord:
        try:
            return self._records[Address(edge)]
        except KeyError:
            raise ProxyError("unknown_edge", f"{Address(edge)} is not registered") from None

    def set_status(self, edge: bytes, status: EdgeStatus) -> None:
        with self._lock:
            record = self.record(edge)
            if record.status is EdgeStatus.PENDING and status is not EdgeStatus.PENDING:
                raise ProxyError("no_channel", "edge has no confirmed channel yet")
            record.status = status

    @property
    def edges(self) -> list[EdgeRecord]:
        return list(self._records.values())

    def discover(self) -> list[EdgeRecord]:
        """Edges currently available for matching, in registration order."""
        return [r for r in self._records.values() if r.status is EdgeStatus.AVAILABLE]

    # -- matching ------------------------------------------------------

    def schedule(self, request: MatchRequest) -> MatchResult:
        """Greedy argmin over the candidates' quotes; consumes one price epoch."""
        if not request.candidates:
            raise ProxyError("no_candidates", "candidate list is empty")
        with self._lock:
            quotes = []
            busy = 0
            records = self._records
            price = self.prices.price
            for edge in request.candidates:
                record = records.get(edge) or self.record(edge)
                if record.status is EdgeStatus.AVAILABLE:
                    quotes.append((price(record.ledger_address), record.registered_at, record.ledger_address))
                elif record.status is EdgeStatus.BUSY:
                    busy += 1
            if not quotes:
                if busy:
                    raise ProxyError("all_busy", "every candidate is busy", retry_after=1.0)
                raise ProxyError("no_available_edge", "no candidate has an open channel")
            price, _, edge = choose_edge(quotes)
            epoch = self.prices.epoch
            self.prices.advance()
            return MatchResult(edge, price, epoch)

    # -- payments ------------------------------------------------------

    def relay_payment(self, agreement: SignedAgreement, edge: bytes, withdraw: bool = False) -> PayReceipt:
        """Verify the user's agreement and sign the matching edge increment."""
        edge = Address(edge)
        with self._lock:
            if agreement.receiver != self.address:
                raise ProxyError("wrong_receiver", "agreement is not addressed to this proxy")
            if not self.contract.verify_agreement(agreement):
                raise ProxyError("bad_signature", "user agreement failed verification")
            user_ch = self.contract.channel_for(agreement.sender, self.address)
            increment = agreement.cumulative_value - self.user_claims.best_value(user_ch)
            if increment <= 0:
                raise ProxyError("stale_claim", "agreement does not increase the cumulative value")
            if increment < self.config.fee:
                raise ProxyError("below_fee", f"increment {increment} is below the relay fee")
            record = self.record(edge)
            if record.channel_id is None:
                raise ProxyError("no_channel", "edge channel not confirmed")
            edge_ch = self.contract.channel(record.channel_id)
            if not edge_ch.is_open:
                raise ProxyError("no_channel", "edge channel is closed")
            owed = self._owed[edge_ch.id] + increment - self.config.fee
            if owed > edge_ch.deposit:
                raise ProxyError("channel_exhausted", f"edge channel would owe {owed} > deposit {edge_ch.deposit}")
            self.user_claims.accept_claim(user_ch, agreement, verified=True)
            edge_agreement = self.contract.sign_agreement(self.key, edge_ch, owed)
            self._owed[edge_ch.id] = owed
            self.fees_retained += self.config.fee
            self.relayed_to_edges += increment - self.config.fee
            if self.edge_link is not None:
                try:
                    self.edge_link.deliver(record, edge_agreement)
                except (ConnectionError, OSError, WireError) as exc:
                    # the signed claim stands; the edge can still collect it later
                    log.warning("delivery to %s failed: %s", edge, exc)
            settlement, latency = None, 0.0
            if withdraw:
                settlement, latency = self._close_user(agreement)
            return PayReceipt(edge, edge_agreement, settlement, latency)

    def pay(self, agreement: SignedAgreement, edge: bytes, withdraw: bool = False) -> PayReceipt:
        """``relay_payment``, rotating an exhausted edge channel once if needed."""
        with self._lock:
            try:
                return self.relay_payment(agreement, edge, withdraw)
            except ProxyError as exc:
                # exhaustion is detected before any state changes, so a retry is clean
                if exc.code != "channel_exhausted" or self.edge_link is None:
                    raise
            self.rotate(edge)
            return self.relay_payment(agreement, edge, withdraw)

    def rotate(self, edge: bytes) -> EdgeRecord:
        """Have the edge settle its channel, then open a fresh one."""
        with self._lock:
            record = self.record(edge)
            if self.edge_link is None:
                raise ProxyError("channel_exhausted", "no way to ask the edge to settle")
            self.edge_link.request_settle(record)
            if self.contract.collateral(self.address, record.ledger_address):
                raise ProxyError("channel_exhausted", "edge did not settle its channel")
            self._owed.pop(record.channel_id, None)
            record.channel_id = None
            record.status = EdgeStatus.PENDING
            self._start_open(record)
            self.sync()
            if record.status is not EdgeStatus.AVAILABLE:
                raise ProxyError("insufficient_funds", "proxy could not fund a new edge channel")
            self.rotations += 1
            return record

    def _close_user(self, agreement: SignedAgreement):
        best = self.user_claims.best(self.contract.channel_for(agreement.sender, self.address))
        try:
            handle = self.contract.submit_close(best, self.key)
        except ChannelError as exc:
            raise ProxyError(exc.code, exc.detail) from exc
        self.ledger.wait(handle)
        if handle.result is None:
            raise ProxyError("reverted", handle.error or "")
        self.user_claims.forget(self.contract.channel(handle.result.channel_id))
        return handle.result, handle.latency

    def owed(self, edge: bytes) -> int:
        record = self.record(edge)
        return self._owed.get(record.channel_id, 0) if record.channel_id else 0

    # -- audit ---------------------------------------------------------

    def canonical_config(self) -> bytes:
        return json.dumps({
            "proxy": str(self.address),
            "edge_deposit": str(self.config.edge_deposit),
            "fee": str(self.config.fee),
            "unsalted_digest": self.config.unsalted_digest,
            "policy": SCHEDULING_POLICY,
            "tie_break": ["registered_at", "ledger_address"],
        }, sort_keys=True, separators=(",", ":")).encode()

    def audit_fingerprint(self) -> Digest:
        return keccak256(self.canonical_config())

    def info(self) -> dict:
        return {"address": str(self.address), "fee": str(self.config.fee),
                "edge_deposit": str(self.config.edge_deposit), "fingerprint": str(self.audit_fingerprint()),
                "unsalted_digest": self.config.unsalted_digest}

    # -- registry log --------------------------------------------------

    def _log(self, event: dict) -> None:
        if self.config.registry_path:
            with open(self.config.registry_path, "a") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay(self, path: str) -> None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError:
                    log.warning("%s:%d: skipping unreadable registry line", path, lineno)
                    continue
                if event.get("event") == "register":
                    record = EdgeRecord.from_json(event)
                    record.status, record.channel_id = EdgeStatus.PENDING, None
                    self._records.setdefault(record.ledger_address, record)
                    self.prices.add_edge(record.ledger_address)
        for record in self._records.values():
            ch = self.contract.channel_for(self.address, record.ledger_address)
            if ch is not None:
                record.channel_id = ch.id
                record.status = EdgeStatus.AVAILABLE
                self._owed.setdefault(ch.id, 0)


class ProxyServer(NDJSONServer):
    """Serves a :class:`Proxy` over NDJSON: ``{"type": ..., "payload": ...}``."""

    def __init__(self, proxy: Proxy, host: str = "127.0.0.1", port: int = 0):
        super().__init__(host, port)
        self.proxy = proxy

    def dispatch(self, message: dict) -> dict:
        kind = message["type"]
        payload = message.get("payload") or {}
        try:
            if kind == "hello":
                return {"type": "proxy_info", "payload": self.proxy.info()}
            if kind == "register_edge":
                record = self.proxy.register_edge(payload["ledger_address"], payload.get("network_address", ""))
                return {"type": "register_ack", "payload": record.to_json()}
            if kind == "discover":
                return {"type": "edges", "payload": {"edges": [r.to_json() for r in self.proxy.discover()]}}
            if kind == "match_request":
                result = self.proxy.schedule(MatchRequest.from_json(payload))
                return {"type": "match_result", "payload": result.to_json()}
            if kind == "pay":
                receipt = self.proxy.pay(SignedAgreement.from_json(payload["agreement"]), payload["edge"],
                                         bool(payload.get("withdraw", False)))
                return {"type": "pay_ack", "payload": receipt.to_json()}
            raise ProxyError("unknown_type", f"unsupported message type {kind!r}")
        except ProxyError as exc:
            return exc.to_json()
        except ChannelError as exc:
            return ProxyError(exc.code, exc.detail).to_json()
        except (KeyError, TypeError, ValueError) as exc:
            return ProxyError("bad_request", str(exc)).to_json()


class ProxyClient:
    """Network stand-in for :class:`Proxy` with the same calling surface."""

    def __init__(self, address: str, timeout: float = 5.0):
        self.conn = Connection(address, timeout)
        self._info = None

    def _call(self, kind: str, payload: dict | None = None) -> dict:
        reply = self.conn.request({"type": kind, "payload": payload or {}})
        if reply["type"] == "error":
            raise ProxyError(reply.get("code", "error"), reply.get("detail", ""), reply.get("retry_after"))
        return reply.get("payload") or {}

    def info(self) -> dict:
        if self._info is None:
            self._info = self._call("hello")
        return self._info

    @property
    def address(self) -> Address:
        return Address(self.info()["address"])

    def audit_fingerprint(self) -> Digest:
        return Digest(self.info()["fingerprint"])

    def register_edge(self, ledger_address: bytes, network_address: str = "") -> EdgeRecord:
        return EdgeRecord.from_json(self._call("register_edge", {"ledger_address": str(Address(ledger_address)),
                                                                 "network_address": network_address}))

    def discover(self) -> list[EdgeRecord]:
        return [EdgeRecord.from_json(e) for e in self._call("discover")["edges"]]

    def schedule(self, request: MatchRequest) -> MatchResult:
        return MatchResult.from_json(self._call("match_request", request.to_json()))

    def pay(self, agreement: SignedAgreement, edge: bytes, withdraw: bool = False) -> PayReceipt:
        return PayReceipt.from_json(self._call("pay", {"agreement": agreement.to_json(),
                                                       "edge": str(Address(edge)), "withdraw": withdraw}))

    def close(self) -> None:
        self.conn.close()
