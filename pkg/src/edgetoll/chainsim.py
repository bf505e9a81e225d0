"""Deterministic simulated blockchain with gas accounting.

Blocks sit on a fixed grid: block ``k`` has timestamp ``k * block_interval_s``.
A transaction submitted at time ``t`` is included in the first block strictly
after ``t``; value and gas are debited at inclusion.  Gas fees are paid to a
fee-sink account, so ``total_supply()`` is constant for the lifetime of a
ledger.

Time only moves when someone calls :meth:`Ledger.advance_until` or
:meth:`Ledger.wait`.  Off-chain work is accounted by the caller, not here.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
import threading
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Mapping, Optional

from edgetoll.crypto import Address, Digest, keccak256

WEI = 1
GWEI = 10**9
ETHER = 10**18
MAX_WEI = 2**256 - 1

_UNITS = {"wei": WEI, "gwei": GWEI, "ether": ETHER}

FEE_SINK = Address(keccak256(b"edgetoll/fee-sink")[12:])


def to_wei(amount, unit: str = "ether") -> int:
    """Exact conversion; ``to_wei("0.207")`` is 207 * 10**15."""
    scaled = Decimal(str(amount)) * _UNITS[unit]
    if scaled != scaled.to_integral_value():
        raise ValueError(f"{amount} {unit} is not a whole number of wei")
    wei = int(scaled)
    check_amount(wei)
    return wei


def from_wei(wei: int, unit: str = "ether") -> Decimal:
    return Decimal(wei) / _UNITS[unit]


def check_amount(wei: int) -> int:
    if type(wei) is int and 0 <= wei <= MAX_WEI:
        return wei
    if not isinstance(wei, int) or isinstance(wei, bool):
        raise TypeError(f"token amounts are integers of wei, got {type(wei).__name__}")
    if not 0 <= wei <= MAX_WEI:
        raise ValueError(f"token amount out of range: {wei}")
    return wei


class ChainError(Exception):
    """Rejected ledger operation; the ledger is unchanged."""


class InsufficientFunds(ChainError):
    pass


class ContractError(ChainError):
    """Raised by inclusion hooks to revert a transaction (gas is still charged)."""


class TxKind(enum.Enum):
    TRANSFER = "transfer"
    CHANNEL_OPEN = "channel_open"
    CHANNEL_CLOSE = "channel_close"


@dataclass(frozen=True)
class GasSchedule:
    transfer_gas: int = 16_100
    open_gas: int = 103_000
    close_gas: int = 80_000

    def __post_init__(self):
        for name in ("transfer_gas", "open_gas", "close_gas"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def gas_for(self, kind: TxKind) -> int:
        if kind is TxKind.TRANSFER:
            return self.transfer_gas
        if kind is TxKind.CHANNEL_OPEN:
            return self.open_gas
        return self.close_gas


@dataclass(frozen=True)
class ChainConfig:
    block_interval_s: float = 15.0
    gas_price: int = GWEI
    gas_schedule: GasSchedule = field(default_factory=GasSchedule)

    def __post_init__(self):
        if not self.block_interval_s > 0:
            raise ValueError("block_interval_s must be positive")
        if self.gas_price <= 0:
            raise ValueError("gas_price must be positive")

    def fee(self, kind: TxKind) -> int:
        return self.gas_schedule.gas_for(kind) * self.gas_price


@dataclass(slots=True)
class Transaction:
    sender: Address
    to: Address
    value: int
    kind: TxKind = TxKind.TRANSFER
    submitted_at: Optional[float] = None
    gas_used: Optional[int] = None
    # contract logic run at inclusion; raising ContractError reverts the value move
    on_include: Optional[Callable[["TxHandle", "Block"], object]] = field(default=None, repr=False, compare=False)


class TxStatus(enum.Enum):
    PENDING = "pending"
    INCLUDED = "included"
    REVERTED = "reverted"


@dataclass(slots=True)
class TxHandle:
    seq: int
    tx: Transaction
    fee: int
    status: TxStatus = TxStatus.PENDING
    block_number: Optional[int] = None
    included_at: Optional[float] = None
    result: object = None
    error: Optional[str] = None

    @property
    def done(self) -> bool:
        return self.status is not TxStatus.PENDING

    @property
    def latency(self) -> float:
        if self.included_at is None:
            raise ChainError("transaction not yet included")
        return self.included_at - self.tx.submitted_at


@dataclass(frozen=True, slots=True)
class Block:
    number: int
    timestamp: float
    transactions: tuple


class Ledger:
    """Accounts, balances, and block production on a simulated clock.

    Not thread-safe by itself; concurrent actors must hold ``ledger.lock``
    (the payment-channel contract and the network servers do).
    """

    def __init__(self, config: ChainConfig | None = None, genesis: Mapping[bytes, int] | None = None,
                 fee_sink: Address = FEE_SINK):
        self.config = config or ChainConfig()
        self.fee_sink = Address(fee_sink)
        self.lock = threading.RLock()
        self.clock = 0.0
        self.height = 0
        self._balances: dict[Address, int] = {}
        self._reserved: dict[Address, int] = {}
        self._pending: deque[TxHandle] = deque()
        self._seq = itertools.count()
        for addr, amount in (genesis or {}).items():
            self._credit(Address(addr), check_amount(amount))
        self._supply = sum(self._balances.values())
        self.history: list[Block] = [Block(0, 0.0, ())]

    # -- queries -------------------------------------------------------

    def balance(self, address: bytes) -> int:
        return self._balances.get(Address(address), 0)

    def total_supply(self) -> int:
        return sum(self._balances.values())

    @property
    def genesis_supply(self) -> int:
        return self._supply

    @property
    def pending(self) -> tuple:
        return tuple(self._pending)

    def next_boundary(self, t: float) -> float:
        return self.block_time(self._next_block_number(t))

    def block_time(self, number: int) -> float:
        return number * self.config.block_interval_s

    def confirmation_latency(self, submit_time: float) -> float:
        return self.next_boundary(submit_time) - submit_time

    def fee(self, kind: TxKind) -> int:
        return self.config.fee(kind)

    # -- mutation ------------------------------------------------------

    def fund(self, address: bytes, amount: int) -> None:
        """Mint into an account (test and harness setup only)."""
        self._credit(Address(address), check_amount(amount))
        self._supply += amount

    def submit(self, tx: Transaction) -> TxHandle:
        with self.lock:
            check_amount(tx.value)
            expected_gas = self.config.gas_schedule.gas_for(tx.kind)
            if tx.gas_used is None:
                tx.gas_used = expected_gas
            elif tx.gas_used != expected_gas:
                raise ChainError(f"{tx.kind.value} uses {expected_gas} gas, got {tx.gas_used}")
            if tx.submitted_at is None:
                tx.submitted_at = self.clock
            elif tx.submitted_at < self.clock:
                raise ChainError("cannot submit in the past")
            fee = tx.gas_used * self.config.gas_price
            sender = Address(tx.sender)
            committed = self._reserved.get(sender, 0)
            spendable = self._balances.get(sender, 0) - committed
            if spendable < tx.value + fee:
                raise InsufficientFunds(f"{sender} holds {spendable} spendable wei, needs {tx.value + fee}")
            self._reserved[sender] = committed + tx.value + fee
            handle = TxHandle(next(self._seq), tx, fee)
            self._pending.append(handle)
            return handle

    def transfer(self, sender: bytes, to: bytes, value: int) -> TxHandle:
        return self.submit(Transaction(Address(sender), Address(to), value, TxKind.TRANSFER))

    def advance_until(self, t: float) -> list[Block]:
        """Produce every block with timestamp in (clock, t] and set clock = t."""
        with self.lock:
            if t < self.clock:
                raise ChainError(f"time regression: {t} < {self.clock}")
            produced = []
            interval = self.config.block_interval_s
            while (self.height + 1) * interval <= t:
                produced.append(self._produce(self.height + 1))
            self.clock = t
            return produced

    def wait(self, handle: TxHandle) -> TxHandle:
        """Advance to the block that includes ``handle``."""
        with self.lock:
            if not handle.done:
                self.advance_until(self.next_boundary(handle.tx.submitted_at))
            return handle

    def wait_all(self, handles) -> list[TxHandle]:
        with self.lock:
            return [self.wait(h) for h in handles]

    # -- internals -----------------------------------------------------

    def _next_block_number(self, t: float) -> int:
        interval = self.config.block_interval_s
        n = math.floor(t / interval) + 1
        while n * interval <= t:
            n += 1
        while n > 1 and (n - 1) * interval > t:
            n -= 1
        return n

    def _credit(self, address: Address, amount: int) -> None:
        new = self._balances.get(address, 0) + amount
        if new > MAX_WEI:
            raise ChainError("balance overflow")
        self._balances[address] = new

    def _debit(self, address: Address, amount: int) -> None:
        have = self._balances.get(address, 0)
        if have < amount:
            raise InsufficientFunds(f"{address} holds {have} wei, needs {amount}")
        self._balances[address] = have - amount

    def move(self, source: bytes, dest: bytes, amount: int) -> None:
        """Internal value move used by contract hooks during inclusion."""
        check_amount(amount)
        if amount:
            self._debit(Address(source), amount)
            self._credit(Address(dest), amount)

    def _move(self, source: Address, dest: Address, amount: int) -> None:
        if amount:
            self._debit(source, amount)
            self._credit(dest, amount)

    def _produce(self, number: int) -> Block:
        timestamp = self.block_time(number)
        pending = self._pending
        if all(h.tx.submitted_at < timestamp for h in pending):
            included = list(pending)
            pending.clear()
        else:
            included = [h for h in pending if h.tx.submitted_at < timestamp]
            self._pending = deque(h for h in pending if h.tx.submitted_at >= timestamp)
        block = Block(number, timestamp, tuple(included))
        for handle in included:
            self._apply(handle, block)
        self.history.append(block)
        self.height = number
        return block

    def _apply(self, handle: TxHandle, block: Block) -> None:
        tx = handle.tx
        sender = Address(tx.sender)
        left = self._reserved[sender] - tx.value - handle.fee
        if left:
            self._reserved[sender] = left
        else:
            del self._reserved[sender]
        self._move(sender, self.fee_sink, handle.fee)
        self._move(sender, tx.to, tx.value)
        handle.block_number = block.number
        handle.included_at = block.timestamp
        if tx.on_include is None:
            handle.status = TxStatus.INCLUDED
            return
        try:
            handle.result = tx.on_include(handle, block)
            handle.status = TxStatus.INCLUDED
        except ContractError as exc:
            self._move(tx.to, sender, tx.value)
            handle.status = TxStatus.REVERTED
            handle.error = str(exc)

    def history_digest(self) -> Digest:
        """keccak256 over a canonical serialization of every block."""
        rows = []
        for block in self.history:
            rows.append([
                block.number,
                repr(block.timestamp),
                [[h.seq, str(h.tx.sender), str(h.tx.to), str(h.tx.value), h.tx.kind.value,
                  repr(h.tx.submitted_at), h.tx.gas_used, h.status.value] for h in block.transactions],
            ])
        return keccak256(json.dumps(rows, separators=(",", ":")).encode())
