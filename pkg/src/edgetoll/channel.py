"""Uni-directional payment channels settled on the simulated ledger.

A channel locks the sender's deposit in the contract's escrow account.  The
sender then hands the receiver signed agreements carrying *cumulative*
values; checking one is a free read.  Only the receiver may close, with its
best agreement: the receiver gets the agreed value, the sender gets the rest
of the deposit back, and the closer pays the close gas from its own balance.

Each agreement is bound to one channel by a 32-byte salt equal to the channel
id, so a signature cannot be replayed on a later channel between the same
pair.  ``unsalted_digest=True`` drops the salt (all-zero) to reproduce the
unsalted three-field digest and its replay weakness.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Optional

from edgetoll.chainsim import (
    ContractError,
    InsufficientFunds,
    Ledger,
    Transaction,
    TxHandle,
    TxKind,
    TxStatus,
    check_amount,
)
from edgetoll.crypto import (
    ZERO_SALT,
    Address,
    CryptoError,
    Digest,
    KeyPair,
    Signature,
    agreement_digest,
    keccak256,
    sign,
    verify,
)

CONTRACT_ADDRESS = Address(keccak256(b"edgetoll/payment-channel-contract")[12:])


class ChannelError(Exception):
    """Rejected channel operation; ``code`` is a stable machine-readable tag."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class ChannelStatus(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(slots=True)
class Channel:
    id: Digest
    sender: Address
    receiver: Address
    deposit: int
    opened_at: float
    status: ChannelStatus = ChannelStatus.OPEN
    closed_at: Optional[float] = None

    @property
    def is_open(self) -> bool:
        return self.status is ChannelStatus.OPEN


@dataclass(frozen=True, slots=True)
class SignedAgreement:
    sender: Address
    receiver: Address
    cumulative_value: int
    signature: Signature

    def to_json(self) -> dict:
        return {
            "sender": str(self.sender),
            "receiver": str(self.receiver),
            "cumulative_value": str(self.cumulative_value),
            "signature": {
                "r": "0x%064x" % self.signature.r,
                "s": "0x%064x" % self.signature.s,
                "v": self.signature.v,
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> SignedAgreement:
        try:
            sig = obj["signature"]
            value = int(obj["cumulative_value"])
            return cls(
                Address(obj["sender"]),
                Address(obj["receiver"]),
                check_amount(value),
                Signature(int(sig["r"], 16), int(sig["s"], 16), int(sig["v"])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ChannelError("bad_agreement", str(exc)) from exc


@dataclass(frozen=True, slots=True)
class Settlement:
    channel_id: Digest
    paid_to_receiver: int
    refunded_to_sender: int
    gas_charged: int


def channel_id_for(sender: bytes, receiver: bytes, block_number: int) -> Digest:
    return keccak256(bytes(sender) + bytes(receiver) + block_number.to_bytes(32, "big"))


class PaymentChannelContract:
    """Channel registry living on a :class:`~edgetoll.chainsim.Ledger`.

    ``open_channel``/``close_channel`` submit a transaction and wait for its
    block; the ``submit_*`` variants return the pending handle instead, whose
    ``result`` becomes the Channel or Settlement once included.
    """

    def __init__(self, ledger: Ledger, unsalted_digest: bool = False, address: Address = CONTRACT_ADDRESS):
        self.ledger = ledger
        self.unsalted_digest = unsalted_digest
        self.address = Address(address)
        self._channels: dict[Digest, Channel] = {}
        self._open: dict[tuple[Address, Address], Digest] = {}
        self._pending_open: set[tuple[Address, Address]] = set()
        self._pending_close: set[Digest] = set()
        self._lock: threading.RLock = ledger.lock

    # -- reads (free) --------------------------------------------------

    def channel(self, channel_id: bytes) -> Channel:
        try:
            return self._channels[Digest(channel_id)]
        except KeyError:
            raise ChannelError("no_channel", f"unknown channel {Digest(channel_id)}") from None

    def channel_for(self, sender: bytes, receiver: bytes) -> Optional[Channel]:
        # Address hashes and compares as plain bytes, so raw bytes keys work
        cid = self._open.get((sender, receiver))
        if cid is None and (isinstance(sender, str) or isinstance(receiver, str)):
            cid = self._open.get((Address(sender), Address(receiver)))
        return None if cid is None else self._channels[cid]

    def collateral(self, sender: bytes, receiver: bytes) -> int:
        """Deposit of the open channel for the pair; 0 if closed or never opened."""
        ch = self.channel_for(sender, receiver)
        return ch.deposit if ch is not None else 0

    def salt(self, channel: Channel) -> bytes:
        return ZERO_SALT if self.unsalted_digest else bytes(channel.id)

    def digest_for(self, channel: Channel, cumulative_value: int) -> Digest:
        return agreement_digest(channel.sender, channel.receiver, cumulative_value, self.salt(channel))

    def sign_agreement(self, key: KeyPair, channel: Channel, cumulative_value: int) -> SignedAgreement:
        check_amount(cumulative_value)
        sig = sign(key, self.digest_for(channel, cumulative_value))
        return SignedAgreement(channel.sender, channel.receiver, cumulative_value, sig)

    def verify_agreement(self, agreement: SignedAgreement) -> bool:
        """Open channel exists, value within deposit, and the sender signed it."""
        ch = self.channel_for(agreement.sender, agreement.receiver)
        if ch is None or not 0 <= agreement.cumulative_value <= ch.deposit:
            return False
        try:
            digest = self.digest_for(ch, agreement.cumulative_value)
        except CryptoError:
            return False
        return verify(digest, agreement.signature, ch.sender)

    # -- open ----------------------------------------------------------

    def submit_open(self, sender_key: KeyPair, receiver: bytes, deposit: int) -> TxHandle:
        sender, receiver = sender_key.address, Address(receiver)
        check_amount(deposit)
        if deposit <= 0:
            raise ChannelError("bad_deposit", "deposit must be positive")
        if sender == receiver:
            raise ChannelError("bad_receiver", "sender and receiver must differ")
        pair = (sender, receiver)
        with self._lock:
            if pair in self._open or pair in self._pending_open:
                raise ChannelError("duplicate_channel", f"{sender} -> {receiver} already has a channel")
            tx = Transaction(sender, self.address, deposit, TxKind.CHANNEL_OPEN,
                             on_include=lambda h, b: self._include_open(pair, deposit, b))
            try:
                handle = self.ledger.submit(tx)
            except InsufficientFunds as exc:
                raise ChannelError("insufficient_funds", str(exc)) from exc
            self._pending_open.add(pair)
            return handle

    def open_channel(self, sender_key: KeyPair, receiver: bytes, deposit: int) -> Channel:
        handle = self.submit_open(sender_key, receiver, deposit)
        self.ledger.wait(handle)
        return self._result(handle)

    def _include_open(self, pair, deposit, block) -> Channel:
        self._pending_open.discard(pair)
        if pair in self._open:
            raise ContractError("duplicate_channel")
        cid = channel_id_for(pair[0], pair[1], block.number)
        ch = Channel(cid, pair[0], pair[1], deposit, block.timestamp)
        self._channels[cid] = ch
        self._open[pair] = cid
        return ch

    # -- close ---------------------------------------------------------

    def submit_close(self, agreement: SignedAgreement, caller_key: KeyPair) -> TxHandle:
        with self._lock:
            ch = self.channel_for(agreement.sender, agreement.receiver)
            if ch is None:
                raise ChannelError("no_channel", "no open channel for this pair")
            if ch.id in self._pending_close:
                raise ChannelError("channel_closing", "close already submitted")
            if caller_key.address != ch.receiver:
                raise ChannelError("not_receiver", "only the channel receiver may close")
            if agreement.cumulative_value > ch.deposit:
                raise ChannelError("over_deposit", "agreement exceeds the channel deposit")
            if not self.verify_agreement(agreement):
                raise ChannelError("bad_signature", "agreement does not recover to the channel sender")
            tx = Transaction(ch.receiver, self.address, 0, TxKind.CHANNEL_CLOSE,
                             on_include=lambda h, b: self._include_close(ch, agreement, h, b))
            try:
                handle = self.ledger.submit(tx)
            except InsufficientFunds as exc:
                raise ChannelError("insufficient_funds", str(exc)) from exc
            self._pending_close.add(ch.id)
            return handle

    def close_channel(self, agreement: SignedAgreement, caller_key: KeyPair) -> Settlement:
        handle = self.submit_close(agreement, caller_key)
        self.ledger.wait(handle)
        return self._result(handle)

    def _include_close(self, ch: Channel, agreement: SignedAgreement, handle: TxHandle, block) -> Settlement:
        self._pending_close.discard(ch.id)
        if not ch.is_open or not self.verify_agreement(agreement):
            raise ContractError("agreement no longer valid at inclusion")
        paid = agreement.cumulative_value
        refund = ch.deposit - paid
        self.ledger.move(self.address, ch.receiver, paid)
        self.ledger.move(self.address, ch.sender, refund)
        ch.status = ChannelStatus.CLOSED
        ch.closed_at = block.timestamp
        del self._open[(ch.sender, ch.receiver)]
        return Settlement(ch.id, paid, refund, handle.fee)

    @staticmethod
    def _result(handle: TxHandle):
        if handle.status is TxStatus.REVERTED:
            raise ChannelError("reverted", handle.error or "")
        return handle.result

    def escrow_total(self) -> int:
        return sum(ch.deposit for ch in self._channels.values() if ch.is_open)


class ClaimBook:
    """Receiver-side store of the best (largest) verified claim per channel."""

    def __init__(self, contract: PaymentChannelContract):
        self.contract = contract
        self._best: dict[Digest, SignedAgreement] = {}

    def accept_claim(self, channel: Channel, agreement: SignedAgreement,
                     verified: bool = False) -> SignedAgreement:
        """Keep ``agreement`` if it beats the stored claim.

        ``verified=True`` skips the signature check for callers that just ran
        ``verify_agreement`` on the same agreement.
        """
        if (agreement.sender, agreement.receiver) != (channel.sender, channel.receiver):
            raise ChannelError("wrong_channel", "agreement is for a different pair")
        current = self.contract.channel_for(channel.sender, channel.receiver)
        if current is None or current.id != channel.id:
            raise ChannelError("no_channel", "channel is not open")
        best = self._best.get(channel.id)
        if best is not None and agreement.cumulative_value <= best.cumulative_value:
            return best
        if agreement.cumulative_value > channel.deposit:
            raise ChannelError("over_deposit", "claim exceeds the channel deposit")
        if not verified and not self.contract.verify_agreement(agreement):
            raise ChannelError("bad_signature", "claim does not recover to the channel sender")
        self._best[channel.id] = agreement
        return agreement

    def best(self, channel: Channel) -> Optional[SignedAgreement]:
        return self._best.get(channel.id)

    def best_value(self, channel: Channel) -> int:
        best = self._best.get(channel.id)
        return best.cumulative_value if best is not None else 0

    def forget(self, channel: Channel) -> None:
        self._best.pop(channel.id, None)
