import numpy as np
import pytest

from edgetoll.chainsim import ETHER
from edgetoll.crypto import Address
from edgetoll.pricing import (
    QUANTUM_WEI,
    Normal,
    PriceBoard,
    Uniform,
    edge_stream,
    expected_min_uniform,
    quantize,
    sample_price,
    scheme,
)


def test_schemes():
    assert scheme(1) == Normal(0.207, 0.01)
    assert scheme(2) == Normal(0.207, 0.005)
    assert scheme(3) == Uniform(0.17, 0.23)
    with pytest.raises(ValueError):
        scheme(4)


def test_model_invariants():
    with pytest.raises(ValueError):
        Normal(0.2, 0)
    with pytest.raises(ValueError):
        Uniform(0.3, 0.2)


def test_quantize_rounds_half_up():
    assert quantize(0.207) == 207 * 10**15
    assert quantize(0.0000015) == 2 * QUANTUM_WEI
    assert quantize(0.0000014) == QUANTUM_WEI
    assert list(quantize(np.array([0.1, 0.2]))) == [100_000, 200_000]


def test_uniform_draws_stay_in_interval():
    rng = edge_stream(0, 1)
    wei = quantize(scheme(3).draw(rng, 100_000)) * QUANTUM_WEI
    assert wei.min() >= 17 * ETHER // 100
    assert wei.max() <= 23 * ETHER // 100


def test_normal_sample_mean():
    n = 10_000
    draws = scheme(2).draw(edge_stream(0, 2), n)
    assert abs(draws.mean() - 0.207) < 3 * 0.005 / n**0.5


def test_normal_truncated_at_zero():
    draws = Normal(0.01, 0.05).draw(edge_stream(0, 3), 50_000)
    assert draws.min() >= 0


def test_sample_price_deterministic():
    a = [sample_price(scheme(1), edge_stream(9)) for _ in range(3)]
    b = [sample_price(scheme(1), edge_stream(9)) for _ in range(3)]
    assert a == b and a[0] % QUANTUM_WEI == 0


def test_expected_min_uniform():
    assert expected_min_uniform(0.17, 0.23, 1) == pytest.approx(0.20)
    assert expected_min_uniform(0.17, 0.23, 20) == pytest.approx(0.17 + 0.06 / 21)
    values = [expected_min_uniform(0.17, 0.23, n) for n in range(1, 200)]
    assert all(a > b for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        expected_min_uniform(0.17, 0.23, 0)


def test_expected_min_uniform_monte_carlo():
    rng = np.random.default_rng(5)
    mins = rng.uniform(0.17, 0.23, (1_000_000 // 20, 20)).min(axis=1)
    se = mins.std(ddof=1) / len(mins) ** 0.5
    assert abs(mins.mean() - expected_min_uniform(0.17, 0.23, 20)) < 3 * se


def test_board_is_seed_deterministic_and_per_edge():
    edges = [Address(bytes([i]) * 20) for i in range(1, 4)]

    def quotes(seed):
        board = PriceBoard(scheme(3), seed, (7,))
        for e in edges:
            board.add_edge(e)
        return board.matrix(100)

    first = quotes(1)
    assert np.array_equal(first, quotes(1))
    assert not np.array_equal(first, quotes(2))
    assert not np.array_equal(first[:, 0], first[:, 1])


def test_board_quotes_follow_epochs():
    board = PriceBoard(scheme(1), 3)
    edge = Address(b"\x05" * 20)
    board.add_edge(edge)
    p0 = board.price(edge)
    board.advance()
    assert board.quote(edge).epoch == 1
    assert board.price(edge, 0) == p0
    assert board.matrix(200)[0, 0] * QUANTUM_WEI == p0


def test_view_shares_prices():
    board = PriceBoard(scheme(3), 4)
    edge = Address(b"\x06" * 20)
    board.add_edge(edge)
    board.advance()
    view = board.view()
    assert view.epoch == 0
    assert view.price(edge) == board.price(edge, 0)


def test_adding_edges_does_not_shift_existing_quotes():
    a, b = Address(b"\x01" * 20), Address(b"\x02" * 20)
    one = PriceBoard(scheme(3), 8)
    one.add_edge(a)
    before = [one.price(a, k) for k in range(70)]
    two = PriceBoard(scheme(3), 8)
    two.add_edge(a)
    two.add_edge(b)
    two.price(b, 100)
    assert [two.price(a, k) for k in range(70)] == before
