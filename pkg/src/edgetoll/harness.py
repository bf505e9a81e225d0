"""Experiment driver: payment-channel benefit, cost minimization, and a
socket-level end-to-end run.

Every repetition draws from its own numpy sub-stream.  Within a repetition,
all grid points see the same prices (common random numbers), so differences
between grid points come from the variable under study, not from sampling.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from decimal import Decimal, localcontext
from itertools import zip_longest
from typing import Optional, Sequence

import numpy as np

from edgetoll.chainsim import ETHER, GWEI, ChainConfig, GasSchedule, Ledger, to_wei
from edgetoll.channel import PaymentChannelContract
from edgetoll.crypto import KeyPair
from edgetoll.node import EdgeNode, LocalEdgeLink, Mode, Terminal
from edgetoll.pricing import QUANTUM_WEI, PriceBoard, edge_stream, scheme

log = logging.getLogger(__name__)

CSV_COLUMNS = ["experiment", "mode", "tasks", "interval_s", "gas_price_gwei", "edges", "scheme",
               "mean", "stddev", "unit"]

EXPERIMENTS = ("channel_benefit", "channel_benefit_time", "channel_benefit_gas", "cost_min")

# sub-stream tags keep the experiments' random draws disjoint
_BENEFIT_PRICES = 1
_COST_PRICES = 2
_COST_PICKS = 3
_INTEGRATION_PRICES = 4


class ConfigError(ValueError):
    """Invalid experiment configuration (a usage error)."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "channel_benefit"
    task_counts: Optional[tuple] = None
    block_intervals_s: tuple = (5.0, 10.0, 15.0)
    gas_prices_gwei: tuple = (1, 4, 7)
    repetitions: int = 100
    edge_counts: tuple = (5, 10, 15, 20)
    price_scheme: tuple = (1, 2, 3)
    seed: int = 0
    output_path: Optional[str] = None
    t_service_s: float = 14.9
    benefit_edges: int = 3
    benefit_scheme: int = 1
    edge_deposit_ether: str = "1"
    default_interval_s: float = 15.0
    default_gas_price_gwei: int = 1
    transfer_gas: int = 16_100
    open_gas: int = 103_000
    close_gas: int = 80_000
    jobs: int = 0  # worker processes; 0 means one per available core

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.task_counts is None:
            default = (5, 10, 15, 20) if self.experiment == "cost_min" else (1,) + tuple(range(5, 51, 5))
            object.__setattr__(self, "task_counts", default)
        for name in ("task_counts", "block_intervals_s", "gas_prices_gwei", "edge_counts", "price_scheme"):
            value = getattr(self, name)
            if isinstance(value, (int, float)):
                value = (value,)
            object.__setattr__(self, name, tuple(value))
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if not self.task_counts or any(n < 1 for n in self.task_counts):
            raise ConfigError("task_counts must be a non-empty list of positive integers")
        if any(e < 1 for e in self.edge_counts) or not self.edge_counts:
            raise ConfigError("edge_counts must be positive")
        if any(i <= 0 for i in self.block_intervals_s) or not self.block_intervals_s:
            raise ConfigError("block intervals must be positive")
        if any(g <= 0 for g in self.gas_prices_gwei) or not self.gas_prices_gwei:
            raise ConfigError("gas prices must be positive")
        if self.benefit_edges < 1:
            raise ConfigError("benefit_edges must be positive")
        if self.t_service_s < 0:
            raise ConfigError("t_service_s must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.jobs < 0:
            raise ConfigError("jobs must be non-negative")
        try:
            for s in self.price_scheme + (self.benefit_scheme,):
                scheme(s)
            GasSchedule(self.transfer_gas, self.open_gas, self.close_gas)
            to_wei(self.edge_deposit_ether)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str, **overrides) -> ExperimentConfig:
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict({**data, **overrides})

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @property
    def gas_schedule(self) -> GasSchedule:
        return GasSchedule(self.transfer_gas, self.open_gas, self.close_gas)


@dataclass(frozen=True)
class ExperimentRow:
    experiment: str
    mode: str
    tasks: int
    interval_s: Optional[float]
    gas_price_gwei: Optional[int]
    edges: int
    scheme: int
    mean: str
    stddev: str
    unit: str
    samples: tuple = field(default=(), repr=False, compare=False)

    def as_csv(self) -> list:
        return [self.experiment, self.mode, self.tasks,
                "" if self.interval_s is None else _fmt_number(self.interval_s),
                "" if self.gas_price_gwei is None else self.gas_price_gwei,
                self.edges, self.scheme, self.mean, self.stddev, self.unit]


def _fmt_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def seconds_row(samples: Sequence[float], **key) -> ExperimentRow:
    mean = math.fsum(samples) / len(samples)
    sd = statistics.stdev(samples) if len(samples) > 1 else 0.0
    return ExperimentRow(mean=repr(mean), stddev=repr(sd), unit="s", samples=tuple(samples), **key)


def ether_row(samples_wei: Sequence[int], **key) -> ExperimentRow:
    """Mean in ether computed exactly from integer wei samples."""
    n = len(samples_wei)
    with localcontext() as ctx:
        ctx.prec = 60
        mean = Decimal(sum(samples_wei)) / Decimal(n) / Decimal(ETHER)
        if n > 1:
            mu = Decimal(sum(samples_wei)) / Decimal(n)
            var = sum((Decimal(x) - mu) ** 2 for x in samples_wei) / Decimal(n - 1)
            sd = var.sqrt() / Decimal(ETHER)
        else:
            sd = Decimal(0)
        mean_s = _fmt_decimal(mean)
        sd_s = _fmt_decimal(sd.quantize(Decimal(1).scaleb(-24)))
    return ExperimentRow(mean=mean_s, stddev=sd_s, unit="ether", samples=tuple(samples_wei), **key)


def _fmt_decimal(d: Decimal) -> str:
    text = format(d.normalize(), "f")
    return text if text not in ("-0",) else "0"


def write_csv(rows: Sequence[ExperimentRow], out=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.as_csv())
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


# -- channel benefit ----------------------------------------------------

@dataclass
class _World:
    ledger: Ledger
    contract: PaymentChannelContract
    terminal: Terminal
    edges: list
    spend_cap: int


class _Actors:
    """Keys for one seed; identical across repetitions and grid points."""

    def __init__(self, seed: int, n_edges: int):
        self.proxy = KeyPair.from_seed("edgetoll", seed, "proxy")
        self.user = KeyPair.from_seed("edgetoll", seed, "user")
        self.edges = [KeyPair.from_seed("edgetoll", seed, "edge", i) for i in range(n_edges)]


def build_world(cfg: ExperimentConfig, actors: _Actors, board: PriceBoard, interval_s: float,
                gas_price_gwei: int, tasks: int) -> _World:
    """A fresh ledger with a proxy, its edge channels, and one terminal."""
    from edgetoll.proxy import Proxy, ProxyConfig

    model = scheme(cfg.benefit_scheme)
    # user deposit scales with the task count so it never runs dry
    spend_cap = max(2 * ETHER, (tasks * int(model.upper * 10**6) + 1) * QUANTUM_WEI)
    edge_deposit = to_wei(cfg.edge_deposit_ether)
    genesis = {
        actors.proxy.address: 2 * spend_cap + (cfg.benefit_edges + 2) * edge_deposit + ETHER,
        actors.user.address: 2 * spend_cap + ETHER,
    }
    for key in actors.edges:
        genesis[key.address] = ETHER
    ledger = Ledger(ChainConfig(interval_s, gas_price_gwei * GWEI, cfg.gas_schedule), genesis)
    contract = PaymentChannelContract(ledger)
    link = LocalEdgeLink()
    proxy = Proxy(actors.proxy, contract, board, ProxyConfig(edge_deposit=edge_deposit), link)
    edges = []
    for key in actors.edges:
        edge = EdgeNode(key, contract, actors.proxy.address, cfg.t_service_s)
        link.add(edge)
        proxy.register_edge(key.address, wait=False)
        edges.append(edge)
    proxy.sync()
    terminal = Terminal(actors.user, proxy, contract, link.resolve)
    return _World(ledger, contract, terminal, edges, spend_cap)


def run_session(cfg: ExperimentConfig, actors: _Actors, board: PriceBoard, interval_s: float,
                gas_price_gwei: int, tasks: int, mode: Mode):
    world = build_world(cfg, actors, board.view(), interval_s, gas_price_gwei, tasks)
    session = world.terminal.open_session(mode, deposit=world.spend_cap)
    return world.terminal.run_tasks(session, tasks)


def _benefit_plan(cfg: ExperimentConfig):
    """Pair intervals with gas prices so each session feeds one time row and one gas row.

    Completion time does not depend on gas price and gas does not depend on
    the block interval, so the i-th interval and the i-th gas price share a
    session.  The shorter list is padded with the default value; padded
    entries produce no rows.
    """
    want_time = cfg.experiment in ("channel_benefit", "channel_benefit_time")
    want_gas = cfg.experiment in ("channel_benefit", "channel_benefit_gas")
    intervals = cfg.block_intervals_s if want_time else ()
    prices = cfg.gas_prices_gwei if want_gas else ()
    plan = []
    for interval, price in zip_longest(intervals, prices):
        plan.append((cfg.default_interval_s if interval is None else interval,
                     cfg.default_gas_price_gwei if price is None else price,
                     interval is not None, price is not None))
    return plan


def _benefit_rep(args):
    cfg, rep = args
    actors = _Actors(cfg.seed, cfg.benefit_edges)
    board = PriceBoard(scheme(cfg.benefit_scheme), cfg.seed, (_BENEFIT_PRICES, rep))
    for key in actors.edges:
        board.add_edge(key.address)
    out = {}
    for p, (interval, price, _, _) in enumerate(_benefit_plan(cfg)):
        for n in cfg.task_counts:
            for mode in (Mode.PC, Mode.WPC):
                report = run_session(cfg, actors, board, interval, price, n, mode)
                out[(p, n, mode)] = (report.total_time_s, report.total_gas_wei)
    return out


def _worker_count(cfg: ExperimentConfig) -> int:
    if cfg.jobs:
        return cfg.jobs
    try:
        cores = len(os.sched_getaffinity(0))
    except AttributeError:  # not available on every platform
        cores = os.cpu_count() or 1
    return max(1, min(cores, cfg.repetitions))


def _map_reps(fn, cfg: ExperimentConfig):
    work = [(cfg, rep) for rep in range(cfg.repetitions)]
    jobs = _worker_count(cfg)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(fn, work, chunksize=max(1, len(work) // (4 * jobs))))
    return [fn(w) for w in work]


def run_channel_benefit(cfg: ExperimentConfig) -> list[ExperimentRow]:
    if cfg.experiment == "cost_min":
        raise ConfigError("run_channel_benefit needs a channel_benefit experiment")
    per_rep = _map_reps(_benefit_rep, cfg)
    rows = []
    plan = _benefit_plan(cfg)
    for p, (interval, _, emit_time, _) in enumerate(plan):
        if not emit_time:
            continue
        for n in cfg.task_counts:
            for mode in (Mode.PC, Mode.WPC):
                rows.append(seconds_row([r[(p, n, mode)][0] for r in per_rep],
                                        experiment="channel_benefit_time", mode=mode.value, tasks=n,
                                        interval_s=interval, gas_price_gwei=None,
                                        edges=cfg.benefit_edges, scheme=cfg.benefit_scheme))
    for p, (_, price, _, emit_gas) in enumerate(plan):
        if not emit_gas:
            continue
        for n in cfg.task_counts:
            for mode in (Mode.PC, Mode.WPC):
                rows.append(ether_row([r[(p, n, mode)][1] for r in per_rep],
                                      experiment="channel_benefit_gas", mode=mode.value, tasks=n,
                                      interval_s=None, gas_price_gwei=price,
                                      edges=cfg.benefit_edges, scheme=cfg.benefit_scheme))
    return rows


def check_channel_benefit(rows: Sequence[ExperimentRow]) -> list[str]:
    """Grid invariants; returns human-readable violations."""
    problems = []
    gas: dict = {}
    time: dict = {}
    for r in rows:
        if r.experiment == "channel_benefit_gas":
            gas.setdefault((r.gas_price_gwei, r.mode), []).append((r.tasks, Decimal(r.mean)))
        elif r.experiment == "channel_benefit_time":
            time.setdefault((r.interval_s, r.mode), {})[r.tasks] = float(r.mean)
    for (price, mode), series in sorted(gas.items()):
        series.sort()
        values = [v for _, v in series]
        if mode == "PC" and len(set(values)) > 1:
            problems.append(f"PC gas is not constant across task counts at {price} Gwei")
        if mode == "WPC" and any(b <= a for a, b in zip(values, values[1:])):
            problems.append(f"WPC gas is not strictly increasing in task count at {price} Gwei")
    for (interval, mode), series in sorted(time.items()):
        if mode != "PC":
            continue
        wpc = time.get((interval, "WPC"), {})
        gaps = [(n, wpc[n] - series[n]) for n in sorted(series) if n in wpc and n >= 2]
        if any(g < 0 for _, g in gaps):
            problems.append(f"WPC finishes before PC at interval {interval}s")
        if any(b[1] <= a[1] for a, b in zip(gaps, gaps[1:])):
            problems.append(f"WPC-PC gap is not increasing in task count at interval {interval}s")
    return problems


# -- cost minimization --------------------------------------------------

def _cost_rep(args):
    cfg, rep = args
    max_edges = max(cfg.edge_counts)
    max_tasks = max(cfg.task_counts)
    out = {}
    for number in cfg.price_scheme:
        # one stream per repetition shared by all schemes: normal schemes
        # then differ only in scale, which isolates the effect of volatility
        board = PriceBoard(scheme(number), cfg.seed, (_COST_PRICES, rep))
        for i in range(max_edges):
            board.add_edge(i.to_bytes(20, "big"))
        prices = board.matrix(max_tasks)
        for edges in cfg.edge_counts:
            picks = edge_stream(cfg.seed, _COST_PICKS, rep, edges).integers(0, edges, size=max_tasks)
            chosen_random = prices[np.arange(max_tasks), picks]
            cheapest = prices[:, :edges].min(axis=1)
            cm = np.cumsum(cheapest)
            wcm = np.cumsum(chosen_random)
            for n in cfg.task_counts:
                out[(number, edges, n)] = (int(cm[n - 1]) * QUANTUM_WEI, int(wcm[n - 1]) * QUANTUM_WEI)
    return out


def run_cost_min(cfg: ExperimentConfig) -> list[ExperimentRow]:
    if cfg.experiment != "cost_min":
        cfg = replace(cfg, experiment="cost_min")
    per_rep = _map_reps(_cost_rep, cfg)
    rows = []
    for number in cfg.price_scheme:
        for n in cfg.task_counts:
            for edges in cfg.edge_counts:
                cm = [r[(number, edges, n)][0] for r in per_rep]
                wcm = [r[(number, edges, n)][1] for r in per_rep]
                key = dict(experiment="cost_min", tasks=n, interval_s=None, gas_price_gwei=None,
                           edges=edges, scheme=number)
                rows.append(ether_row(cm, mode="CM", **key))
                rows.append(ether_row(wcm, mode="WCM", **key))
                rows.append(ether_row([w - c for c, w in zip(cm, wcm)], mode="saved", **key))
    return rows


def check_cost_min(rows: Sequence[ExperimentRow]) -> list[str]:
    problems = []
    saved = {(r.scheme, r.tasks, r.edges): r for r in rows if r.mode == "saved"}
    for (number, tasks, edges), row in sorted(saved.items()):
        if any(s < 0 for s in row.samples):
            problems.append(f"negative saving at scheme {number}, {tasks} tasks, {edges} edges")
        if edges == 1 and any(row.samples):
            problems.append(f"nonzero saving with a single edge (scheme {number}, {tasks} tasks)")
    for (number, tasks, edges), row in sorted(saved.items()):
        bigger = [e for (s, t, e) in saved if s == number and t == tasks and e > edges]
        if not bigger:
            continue
        nxt = saved[(number, tasks, min(bigger))]
        a, b = _mean_se(row.samples), _mean_se(nxt.samples)
        if b[0] + 3 * math.hypot(a[1], b[1]) < a[0]:
            problems.append(f"saving drops from {edges} to {min(bigger)} edges (scheme {number}, {tasks} tasks)")
    return problems


def _mean_se(samples) -> tuple[float, float]:
    xs = [s / ETHER for s in samples]
    if len(xs) < 2:
        return (xs[0] if xs else 0.0), 0.0
    return statistics.fmean(xs), statistics.stdev(xs) / math.sqrt(len(xs))


# -- end-to-end over sockets -------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    expected: str = ""
    actual: str = ""


@dataclass
class IntegrationReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def first_failure(self) -> Optional[Check]:
        return next((c for c in self.checks if not c.ok), None)

    def expect(self, name: str, expected, actual) -> bool:
        self.checks.append(Check(name, expected == actual, str(expected), str(actual)))
        return expected == actual

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["check", "ok", "expected", "actual"])
        for c in self.checks:
            writer.writerow([c.name, int(c.ok), c.expected, c.actual])
        return buf.getvalue()


def run_integration(cfg: ExperimentConfig, tasks: int = 5, n_edges: int = 3,
                    forge_after: Optional[int] = 3) -> IntegrationReport:
    """Proxy, edges and a terminal talking NDJSON over loopback sockets.

    Runs ``tasks`` PC tasks, injects one forged agreement after
    ``forge_after`` tasks, withdraws on the last payment, lets every edge
    settle, then checks each balance against the wei it must hold.
    """
    from edgetoll.channel import SignedAgreement
    from edgetoll.node import EdgeServer, NetworkEdgeLink
    from edgetoll.proxy import Proxy, ProxyClient, ProxyConfig, ProxyError, ProxyServer

    report = IntegrationReport()
    gas = cfg.gas_schedule
    chain = ChainConfig(cfg.default_interval_s, cfg.default_gas_price_gwei * GWEI, gas)
    proxy_key = KeyPair.from_seed("edgetoll-integration", cfg.seed, "proxy")
    user_key = KeyPair.from_seed("edgetoll-integration", cfg.seed, "user")
    edge_keys = [KeyPair.from_seed("edgetoll-integration", cfg.seed, "edge", i) for i in range(n_edges)]
    edge_deposit = to_wei(cfg.edge_deposit_ether)
    user_deposit = 2 * ETHER
    initial = {proxy_key.address: 10 * ETHER + n_edges * edge_deposit * (tasks + 1), user_key.address: 5 * ETHER}
    for key in edge_keys:
        initial[key.address] = ETHER
    ledger = Ledger(chain, initial)
    supply = ledger.total_supply()
    contract = PaymentChannelContract(ledger)
    board = PriceBoard(scheme(cfg.benefit_scheme), cfg.seed, (_INTEGRATION_PRICES,))

    proxy_link = NetworkEdgeLink()
    proxy = Proxy(proxy_key, contract, board, ProxyConfig(edge_deposit=edge_deposit), proxy_link)
    servers = []
    clients = []
    try:
        proxy_server = ProxyServer(proxy).start()
        servers.append(proxy_server)
        edges = []
        for key in edge_keys:
            edge = EdgeNode(key, contract, proxy_key.address, cfg.t_service_s)
            server = EdgeServer(edge).start()
            servers.append(server)
            edges.append(edge)
            registrar = ProxyClient(proxy_server.address)
            clients.append(registrar)
            registrar.register_edge(key.address, server.address)
        report.expect("registered_edges", n_edges, len(proxy.discover()))
        for key in edge_keys:
            report.expect(f"collateral_proxy_to_{key.address}", edge_deposit,
                          contract.collateral(proxy_key.address, key.address))

        proxy_client = ProxyClient(proxy_server.address)
        clients.append(proxy_client)
        report.expect("proxy_fingerprint", str(proxy.audit_fingerprint()), str(proxy_client.audit_fingerprint()))
        user_link = NetworkEdgeLink()
        terminal = Terminal(user_key, proxy_client, contract, user_link.resolve)
        session = terminal.open_session(Mode.PC, deposit=user_deposit)
        report.expect("collateral_user_to_proxy", user_deposit,
                      contract.collateral(user_key.address, proxy_key.address))

        first = min(forge_after, tasks) if forge_after is not None else tasks
        terminal.run_tasks(session, first, withdraw_at_end=(first == tasks))
        if forge_after is not None and first < tasks:
            owed_before = ";".join(f"{k.address}={proxy.owed(k.address)}" for k in edge_keys)
            forger = KeyPair.from_seed("edgetoll-integration", cfg.seed, "forger")
            target = proxy.discover()[0].ledger_address
            bumped = session.cumulative_paid + 10**15
            forged = contract.sign_agreement(forger, session.channel, bumped)
            forged = SignedAgreement(user_key.address, proxy_key.address, bumped, forged.signature)
            try:
                proxy_client.pay(forged, target)
                report.expect("forged_agreement_rejected", "bad_signature", "accepted")
            except ProxyError as exc:
                report.expect("forged_agreement_rejected", "bad_signature", exc.code)
            report.expect("edges_unchanged_after_forgery", owed_before,
                          ";".join(f"{k.address}={proxy.owed(k.address)}" for k in edge_keys))
            terminal.run_tasks(session, tasks - first, withdraw_at_end=True)

        report.expect("tasks_completed", tasks, len(session.tasks))
        report.expect("user_channel_closed", True, session.closed)
        report.expect("collateral_after_withdraw", 0, contract.collateral(user_key.address, proxy_key.address))

        settlements = {}
        for edge in edges:
            # edges that were paid collect now; an edge with no claim keeps its channel open
            edge.settle()
            settlements[edge.address] = list(edge.settlements)
    finally:
        for client in clients:
            client.close()
        for server in servers:
            server.stop()

    fee = {kind: getattr(gas, f"{kind}_gas") * chain.gas_price for kind in ("transfer", "open", "close")}
    cumulative = sum(r.price for r in session.tasks)
    report.expect("user_cumulative_equals_prices", cumulative, session.cumulative_paid)
    earned = {k.address: sum(r.price for r in session.tasks if r.edge == k.address) for k in edge_keys}
    closes = {a: len(s) for a, s in settlements.items()}
    open_edge_channels = sum(1 for k in edge_keys if contract.channel_for(proxy_key.address, k.address))
    proxy_opens = n_edges + proxy.rotations
    expected = {
        user_key.address: initial[user_key.address] - fee["open"] - cumulative,
        proxy_key.address: (initial[proxy_key.address] - proxy_opens * fee["open"] - fee["close"]
                            + cumulative - sum(earned.values()) - open_edge_channels * edge_deposit),
        contract.address: open_edge_channels * edge_deposit,
        ledger.fee_sink: (proxy_opens + 1) * fee["open"] + (1 + sum(closes.values())) * fee["close"],
    }
    for key in edge_keys:
        expected[key.address] = initial[key.address] + earned[key.address] - closes[key.address] * fee["close"]
    for address, want in expected.items():
        report.expect(f"balance_{address}", want, ledger.balance(address))
    report.expect("total_supply_conserved", supply, ledger.total_supply())
    report.expect("proxy_retained_fees", 0, proxy.fees_retained)
    return report
