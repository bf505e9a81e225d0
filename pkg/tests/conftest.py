import pytest

from edgetoll.chainsim import ETHER, GWEI, ChainConfig, Ledger
from edgetoll.channel import PaymentChannelContract
from edgetoll.crypto import KeyPair


@pytest.fixture
def keys():
    return {name: KeyPair.from_seed("tests", name) for name in ("alice", "bob", "carol", "proxy", "mallory")}


@pytest.fixture
def ledger(keys):
    return Ledger(ChainConfig(15.0, GWEI), {k.address: 10 * ETHER for k in keys.values()})


@pytest.fixture
def contract(ledger):
    return PaymentChannelContract(ledger)
