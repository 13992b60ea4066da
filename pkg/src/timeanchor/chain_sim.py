"""Deterministic discrete-event simulation of a small Bitcoin-like network.

Timestamp rules implemented (per-node):

  1. candidate timestamp  > median of the previous <=11 block timestamps
     (lower-middle element for even counts), and
  2. candidate timestamp - 7200 < the node's network time, where network
     time is local time plus the median peer offset clamped to +-4200 s.

One ``random.Random(seed)`` drives everything.  Draw order: at start, one
clock offset per miner (uniform integer in [-clock_drift, clock_drift]);
then per block: interval, miner selection, nonce, decoy payloads.  Equal
configs therefore yield byte-identical chains and event logs.

The simulator produces a single linear chain; a miner that stamps an
invalid timestamp still extends the chain, with the violation recorded in
the event log.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import (
    Block,
    BlockHeader,
    Transaction,
    TxKind,
    ZERO_DIGEST,
    build_block,
    header_hash,
)

TWO_HOURS = 7200
CLAMP_SECONDS = 4200  # 70 minutes

STRATEGY_KINDS = (
    "honest",
    "shift_fixed",
    "shift_max_future",
    "shift_max_past",
    "censor_commitments",
)


class SimError(ValueError):
    """Raised on invalid simulation configuration or usage."""


class SimulationExhausted(SimError):
    """The configured run length was reached while more blocks were needed."""


@dataclass(frozen=True)
class NodeClock:
    local_time: int
    peer_offsets: Tuple[int, ...] = ()


def median_lower(values: Sequence[int]) -> int:
    """Median; for even counts the lower of the two middle values."""
    if not values:
        raise SimError("median of empty sequence")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def median_past_11(headers: Sequence[BlockHeader]) -> int:
    """Median timestamp of the supplied (up to eleven) recent headers."""
    if not headers:
        raise SimError("median_past_11 needs at least one header")
    return median_lower([hd.timestamp for hd in headers[-11:]])


def network_time(clock: NodeClock) -> int:
    if not clock.peer_offsets:
        return clock.local_time
    offset = median_lower(clock.peer_offsets)
    offset = max(-CLAMP_SECONDS, min(CLAMP_SECONDS, offset))
    return clock.local_time + offset


def validate_block_timestamp(candidate_t: int, prev_headers: Sequence[BlockHeader],
                             clock: NodeClock) -> bool:
    return (
        candidate_t > median_past_11(prev_headers)
        and candidate_t - TWO_HOURS < network_time(clock)
    )


@dataclass(frozen=True)
class MinerStrategy:
    kind: str = "honest"
    shift_seconds: int = 0
    censor_targets: Optional[Tuple[bytes, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise SimError(f"unknown miner strategy {self.kind!r}")

    def censors(self, tx: Transaction) -> bool:
        if self.kind != "censor_commitments":
            return False
        if tx.kind is TxKind.PAYMENT:
            return False
        if self.censor_targets is None:
            return True
        return tx.payload in self.censor_targets

    @classmethod
    def from_dict(cls, data: dict) -> "MinerStrategy":
        targets = data.get("censor_targets")
        if targets is not None:
            targets = tuple(bytes.fromhex(t) for t in targets)
        return cls(
            kind=data.get("kind", "honest"),
            shift_seconds=int(data.get("shift_seconds", 0)),
            censor_targets=targets,
        )

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.shift_seconds:
            out["shift_seconds"] = self.shift_seconds
        if self.censor_targets is not None:
            out["censor_targets"] = [t.hex() for t in self.censor_targets]
        return out


@dataclass(frozen=True)
class SimulationConfig:
    seed: int
    miner_count: int
    adversary_strategy: Tuple[MinerStrategy, ...]
    run_length: int
    mean_block_interval: float = 600.0
    propagation_delay: float = 2.0
    clock_drift: int = 0
    start_time: int = 1_700_000_000
    min_block_interval: float = 5.0
    decoy_txs_per_block: int = 3
    inclusion_delay_blocks: int = 0
    hash_shares: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.miner_count < 1:
            raise SimError("miner_count must be positive")
        if len(self.adversary_strategy) != self.miner_count:
            raise SimError("need one strategy per miner")
        if self.mean_block_interval <= self.min_block_interval:
            raise SimError("mean_block_interval must exceed min_block_interval")
        if self.decoy_txs_per_block < 1:
            raise SimError("decoy_txs_per_block must be at least 1")
        if self.hash_shares is not None and len(self.hash_shares) != self.miner_count:
            raise SimError("need one hash share per miner")

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        strategies = data.get("adversary_strategy", {"kind": "honest"})
        miner_count = int(data["miner_count"])
        if isinstance(strategies, dict):
            strategies = [strategies] * miner_count
        shares = data.get("hash_shares")
        return cls(
            seed=int(data["seed"]),
            miner_count=miner_count,
            adversary_strategy=tuple(MinerStrategy.from_dict(s) for s in strategies),
            run_length=int(data["run_length"]),
            mean_block_interval=float(data.get("mean_block_interval", 600.0)),
            propagation_delay=float(data.get("propagation_delay", 2.0)),
            clock_drift=int(data.get("clock_drift", 0)),
            start_time=int(data.get("start_time", 1_700_000_000)),
            min_block_interval=float(data.get("min_block_interval", 5.0)),
            decoy_txs_per_block=int(data.get("decoy_txs_per_block", 3)),
            inclusion_delay_blocks=int(data.get("inclusion_delay_blocks", 0)),
            hash_shares=tuple(shares) if shares is not None else None,
        )


@dataclass(frozen=True)
class SimulationEvent:
    sim_time: float
    kind: str
    details: Dict[str, object] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {"sim_time": self.sim_time, "kind": self.kind}
        payload.update(self.details)
        return json.dumps(payload)


@dataclass
class _PendingTx:
    tx: Transaction
    arrival_time: float
    blocks_to_skip: int


class Simulation:
    """Single event loop owning all network state.

    Blocks are mined on demand (``mine_next``); ``run_length`` caps the
    total.  An observer node with a drift-free clock receives every block
    after the propagation delay and re-validates its timestamp.
    """

    def __init__(self, config: SimulationConfig) -> None:
        self.config = config
        self.rng = random.Random(config.seed)
        self.clock_offsets = [
            self.rng.randint(-config.clock_drift, config.clock_drift)
            if config.clock_drift
            else 0
            for _ in range(config.miner_count)
        ]
        shares = config.hash_shares or tuple([1.0] * config.miner_count)
        total = sum(shares)
        self._cum_shares = []
        acc = 0.0
        for s in shares:
            acc += s / total
            self._cum_shares.append(acc)
        genesis_tx = Transaction(TxKind.PAYMENT, b"genesis")
        self.chain: List[Block] = [
            build_block(0, ZERO_DIGEST, config.start_time, 0, [genesis_tx])
        ]
        self.mined_times: List[float] = [float(config.start_time)]
        self.miner_of: List[int] = [-1]
        self.events: List[SimulationEvent] = [
            SimulationEvent(float(config.start_time), "block_mined",
                            {"height": 0, "miner": -1,
                             "timestamp": config.start_time})
        ]
        self.mempool: List[_PendingTx] = []
        self.never_included: List[Transaction] = []

    # -- clocks ------------------------------------------------------------

    def miner_clock(self, miner: int, sim_time: float) -> NodeClock:
        own = self.clock_offsets[miner]
        peers = tuple(
            off - own for j, off in enumerate(self.clock_offsets) if j != miner
        )
        return NodeClock(local_time=int(sim_time) + own, peer_offsets=peers)

    def observer_clock(self, sim_time: float) -> NodeClock:
        return NodeClock(
            local_time=int(sim_time), peer_offsets=tuple(self.clock_offsets)
        )

    # -- transaction submission -------------------------------------------

    def submit_tx(self, tx: Transaction, at_time: float) -> None:
        self.mempool.append(
            _PendingTx(
                tx=tx,
                arrival_time=at_time + self.config.propagation_delay,
                blocks_to_skip=self.config.inclusion_delay_blocks,
            )
        )
        self.events.append(
            SimulationEvent(at_time, "tx_submitted",
                            {"txid": tx.txid.hex(), "kind": tx.kind.value})
        )

    # -- mining ------------------------------------------------------------

    def _pick_miner(self) -> int:
        u = self.rng.random()
        for i, edge in enumerate(self._cum_shares):
            if u <= edge:
                return i
        return len(self._cum_shares) - 1

    def _strategy_timestamp(self, strategy: MinerStrategy, miner: int,
                            sim_time: float) -> int:
        clock = self.miner_clock(miner, sim_time)
        net = network_time(clock)
        floor = median_past_11([b.header for b in self.chain]) + 1
        if strategy.kind == "honest" or strategy.kind == "censor_commitments":
            return max(net, floor)
        if strategy.kind == "shift_fixed":
            return max(net + strategy.shift_seconds, floor)
        if strategy.kind == "shift_max_future":
            return max(net + TWO_HOURS - 1, floor)
        if strategy.kind == "shift_max_past":
            return floor
        raise SimError(f"unhandled strategy {strategy.kind!r}")

    def mine_next(self) -> Block:
        cfg = self.config
        if len(self.chain) - 1 >= cfg.run_length:
            raise SimulationExhausted(
                f"run length of {cfg.run_length} blocks reached"
            )
        interval = cfg.min_block_interval + self.rng.expovariate(
            1.0 / (cfg.mean_block_interval - cfg.min_block_interval)
        )
        sim_time = self.mined_times[-1] + interval
        miner = self._pick_miner()
        nonce = self.rng.getrandbits(64)
        strategy = cfg.adversary_strategy[miner]

        txs: List[Transaction] = []
        for pending in list(self.mempool):
            if pending.arrival_time > sim_time:
                continue
            if pending.blocks_to_skip > 0:
                pending.blocks_to_skip -= 1
                continue
            if strategy.censors(pending.tx):
                self.events.append(
                    SimulationEvent(sim_time, "tx_censored",
                                    {"txid": pending.tx.txid.hex(),
                                     "miner": miner,
                                     "height": len(self.chain)})
                )
                continue
            txs.append(pending.tx)
            self.mempool.remove(pending)
        for _ in range(cfg.decoy_txs_per_block):
            txs.append(
                Transaction(TxKind.PAYMENT, self.rng.getrandbits(256).to_bytes(32, "big"))
            )

        timestamp = self._strategy_timestamp(strategy, miner, sim_time)
        parent = self.chain[-1]
        block = build_block(
            height=len(self.chain),
            prev_hash=header_hash(parent.header),
            timestamp=timestamp,
            nonce=nonce,
            txs=txs,
        )
        self.chain.append(block)
        self.mined_times.append(sim_time)
        self.miner_of.append(miner)
        self.events.append(
            SimulationEvent(sim_time, "block_mined",
                            {"height": block.header.height, "miner": miner,
                             "strategy": strategy.kind,
                             "timestamp": timestamp})
        )
        for tx in txs:
            if tx.kind is not TxKind.PAYMENT:
                self.events.append(
                    SimulationEvent(sim_time, "tx_included",
                                    {"txid": tx.txid.hex(),
                                     "height": block.header.height})
                )

        arrival = sim_time + cfg.propagation_delay
        prev_headers = [b.header for b in self.chain[:-1]][-11:]
        clock = self.observer_clock(arrival)
        rule_valid = validate_block_timestamp(timestamp, prev_headers, clock)
        deviation = timestamp - int(arrival)
        slack = int(cfg.propagation_delay) + cfg.clock_drift + 2
        self.events.append(
            SimulationEvent(arrival, "block_received",
                            {"height": block.header.height,
                             "rule_valid": rule_valid,
                             "deviation": deviation,
                             "deviation_ok": abs(deviation) <= slack})
        )
        return block

    def arrival_time(self, height: int) -> float:
        return self.mined_times[height] + self.config.propagation_delay

    def finish(self) -> None:
        """Mark still-pending transactions as never included."""
        self.never_included = [p.tx for p in self.mempool]
        self.mempool = []

    def sorted_events(self) -> List[SimulationEvent]:
        return sorted(self.events, key=lambda e: e.sim_time)


class ObserverView:
    """The verifier's read/submit interface onto a running simulation.

    ``next_block`` advances the simulation until the observer has received
    one more block; ``now`` is the observer's clock at the latest receipt.
    """

    def __init__(self, sim: Simulation) -> None:
        self.sim = sim
        self.cursor = 0
        self._now = float(sim.config.start_time)

    def now(self) -> float:
        return self._now

    def next_block(self) -> Block:
        if self.cursor + 1 >= len(self.sim.chain):
            self.sim.mine_next()
        self.cursor += 1
        self._now = self.sim.arrival_time(self.cursor)
        return self.sim.chain[self.cursor]

    def submit(self, tx: Transaction) -> None:
        self.sim.submit_tx(tx, self._now)


def run_simulation(config: SimulationConfig,
                   injected_txs: Iterable[Tuple[float, Transaction]] = ()
                   ) -> Tuple[List[Block], List[SimulationEvent]]:
    """Mine ``run_length`` blocks, feeding in the scheduled transactions.

    Scheduled transactions whose time falls beyond the run end up in
    ``never_included`` on the returned simulation's event trail (reported
    via a final ``tx_censored``-free summary by callers).
    """
    sim = Simulation(config)
    schedule = sorted(injected_txs, key=lambda item: item[0])
    idx = 0
    while len(sim.chain) - 1 < config.run_length:
        next_time = sim.mined_times[-1]
        while idx < len(schedule) and schedule[idx][0] <= next_time:
            sim.submit_tx(schedule[idx][1], schedule[idx][0])
            idx += 1
        sim.mine_next()
        while idx < len(schedule) and schedule[idx][0] <= sim.mined_times[-1]:
            sim.submit_tx(schedule[idx][1], schedule[idx][0])
            idx += 1
    for when, tx in schedule[idx:]:
        sim.submit_tx(tx, when)
    sim.finish()
    return sim.chain, sim.sorted_events()


# ---------------------------------------------------------------------------
# Chain / event serialization

def block_to_dict(block: Block) -> dict:
    return {
        "header": {
            "height": block.header.height,
            "prev_hash": block.header.prev_hash.hex(),
            "merkle_root": block.header.merkle_root.hex(),
            "timestamp": block.header.timestamp,
            "nonce": block.header.nonce,
        },
        "transactions": [
            {"kind": tx.kind.value, "payload": tx.payload.hex(),
             "txid": tx.txid.hex()}
            for tx in block.transactions
        ],
    }


def block_from_dict(data: dict) -> Block:
    hd = data["header"]
    header = BlockHeader(
        height=hd["height"],
        prev_hash=bytes.fromhex(hd["prev_hash"]),
        merkle_root=bytes.fromhex(hd["merkle_root"]),
        timestamp=hd["timestamp"],
        nonce=hd["nonce"],
    )
    txs = tuple(
        Transaction(TxKind(t["kind"]), bytes.fromhex(t["payload"]))
        for t in data["transactions"]
    )
    return Block(header=header, transactions=txs)


def write_chain(path, chain: Sequence[Block]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for block in chain:
            fh.write(json.dumps(block_to_dict(block)) + "\n")


def read_chain(path) -> List[Block]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(block_from_dict(json.loads(line)))
    return out


def write_events(path, events: Sequence[SimulationEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(event.to_json() + "\n")
