"""Per-task edge price generation and the analytic oracle for greedy savings.

Prices are in ether, drawn per task epoch for every edge, and quantized to
whole multiples of 10**12 wei (one micro-ether) by rounding half up.  Every
edge gets its own numpy sub-stream so adding an edge never perturbs the
prices of the others.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from edgetoll.chainsim import ETHER

QUANTUM_WEI = 10**12
_QUANTA_PER_ETHER = ETHER // QUANTUM_WEI


@dataclass(frozen=True)
class Normal:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("std must be positive")
        if not self.mean > 0:
            raise ValueError("mean must be positive")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = rng.normal(self.mean, self.std, size)
        bad = out < 0
        while bad.any():  # truncate at zero by rejection
            out[bad] = rng.normal(self.mean, self.std, int(bad.sum()))
            bad = out < 0
        return out

    @property
    def upper(self) -> float:
        """A practical ceiling used for deposit sizing (mean + 6 std)."""
        return self.mean + 6 * self.std


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 <= self.lo < self.hi:
            raise ValueError("need 0 <= lo < hi")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size)

    @property
    def upper(self) -> float:
        return self.hi


PriceModel = Union[Normal, Uniform]

SCHEMES: dict[int, PriceModel] = {
    1: Normal(0.207, 0.01),
    2: Normal(0.207, 0.005),
    3: Uniform(0.17, 0.23),
}


def scheme(number: int) -> PriceModel:
    try:
        return SCHEMES[number]
    except KeyError:
        raise ValueError(f"unknown price scheme {number}; choose from {sorted(SCHEMES)}") from None


def quantize(ether: np.ndarray | float) -> np.ndarray | int:
    """Ether amounts to wei, rounded half up to the nearest micro-ether."""
    quanta = np.floor(np.asarray(ether, dtype=np.float64) * _QUANTA_PER_ETHER + 0.5).astype(np.int64)
    if quanta.ndim == 0:
        return int(quanta) * QUANTUM_WEI
    return quanta


def quanta_to_wei(quanta) -> int:
    return int(quanta) * QUANTUM_WEI


def sample_price(model: PriceModel, rng: np.random.Generator) -> int:
    """One price draw in wei."""
    return quantize(float(model.draw(rng, 1)[0]))


def expected_min_uniform(lo: float, hi: float, n: int) -> float:
    """E[min of n i.i.d. Uniform(lo, hi)] = lo + (hi - lo) / (n + 1)."""
    if n < 1:
        raise ValueError("need at least one draw")
    return lo + (hi - lo) / (n + 1)


def edge_stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


class _Streams:
    def __init__(self):
        self.edges: dict[bytes, int] = {}
        self.rngs: list[np.random.Generator] = []
        self.buffers: list[list[int]] = []  # prices in micro-ether quanta


@dataclass(frozen=True)
class PriceQuote:
    edge: bytes
    price: int
    epoch: int


class PriceBoard:
    """Current price of every edge, re-drawn each epoch.

    Edge ``i`` draws from sub-stream ``(*stream_key, i)`` of ``seed``.  Draws
    are made in fixed blocks of 64 and buffered, so the quote for a given
    (edge index, epoch) depends only on the seed.
    """

    _BLOCK = 64

    def __init__(self, model: PriceModel, seed: int = 0, stream_key: tuple = ()):
        self.model = model
        self.seed = seed
        self.stream_key = tuple(stream_key)
        self.epoch = 0
        self._shared = _Streams()

    @property
    def _edges(self) -> dict:
        return self._shared.edges

    @property
    def _rngs(self) -> list:
        return self._shared.rngs

    @property
    def _buffers(self) -> list:
        return self._shared.buffers

    def add_edge(self, edge: bytes) -> int:
        edge = bytes(edge)
        if edge in self._edges:
            return self._edges[edge]
        index = len(self._rngs)
        self._edges[edge] = index
        self._rngs.append(edge_stream(self.seed, *self.stream_key, index))
        self._buffers.append([])
        return index

    def __contains__(self, edge: bytes) -> bool:
        return bytes(edge) in self._edges

    def _ensure(self, index: int, upto: int) -> None:
        buf = self._buffers[index]
        if upto < len(buf):
            return
        while len(buf) <= upto:
            buf.extend(quantize(self.model.draw(self._rngs[index], self._BLOCK)).tolist())

    def view(self) -> PriceBoard:
        """A board at epoch 0 sharing this board's edges and drawn prices.

        Runs that must see identical quotes (common random numbers across
        grid points) each take a view of one board.
        """
        other = PriceBoard.__new__(PriceBoard)
        other.model, other.seed, other.stream_key = self.model, self.seed, self.stream_key
        other.epoch = 0
        other._shared = self._shared
        return other

    def price(self, edge: bytes, epoch: int | None = None) -> int:
        """Quote in wei for ``edge`` at ``epoch`` (default: current epoch)."""
        index = self._edges[edge]
        epoch = self.epoch if epoch is None else epoch
        buf = self._buffers[index]
        if epoch >= len(buf):
            self._ensure(index, epoch)
        return buf[epoch] * QUANTUM_WEI

    def quote(self, edge: bytes, epoch: int | None = None) -> PriceQuote:
        epoch = self.epoch if epoch is None else epoch
        return PriceQuote(bytes(edge), self.price(edge, epoch), epoch)

    def advance(self) -> int:
        self.epoch += 1
        return self.epoch

    def matrix(self, epochs: int) -> np.ndarray:
        """Prices in micro-ether quanta, shape (epochs, edges), from epoch 0."""
        if not self._rngs:
            return np.empty((epochs, 0), dtype=np.int64)
        for i in range(len(self._rngs)):
            self._ensure(i, epochs - 1)
        return np.array([b[:epochs] for b in self._buffers], dtype=np.int64).T
