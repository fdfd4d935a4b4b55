"""Synthetic labeled transaction fixtures.

Each category gets a behavioral template (activity level, lifetime, role
mix, amount scale, fan-in/fan-out, burstiness) with per-subject random
variation. Nothing here resembles real chain data beyond the record shape;
it exists to exercise the pipeline end to end.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .model import COINBASE, SATOSHI_PER_BTC, SECONDS_PER_DAY, Category, RateTable, Transaction, TxInput, TxOutput

GENESIS_TIME = 1231006505  # 2009-01-03T18:15:05Z
BLOCK_SECONDS = 600


def block_time(height: int) -> int:
    return GENESIS_TIME + height * BLOCK_SECONDS


def txid_for(*parts) -> str:
    return hashlib.sha256("/".join(map(str, parts)).encode()).hexdigest()


def synthetic_rates(first_height: int, last_height: int) -> RateTable:
    """Smooth logistic price curve, one entry per day in the height range."""
    d0 = block_time(first_height) // SECONDS_PER_DAY
    d1 = block_time(last_height) // SECONDS_PER_DAY
    epoch = dt.date(1970, 1, 1)
    table = {}
    for d in range(d0, d1 + 1):
        rate = 0.5 + 9000.0 / (1.0 + math.exp(-(d - 16500) / 250.0))
        table[epoch + dt.timedelta(days=d)] = round(rate, 2)
    return RateTable(table)


@dataclass(frozen=True)
class Template:
    n_tx: tuple[int, int]
    lifetime_days: tuple[float, float]
    p_received: float
    p_coinbase: float
    amount_btc: float  # median inflow
    amount_sigma: float
    spend_inputs: tuple[int, int]
    spend_outputs: tuple[int, int]
    p_payback: float
    burstiness: float  # 0 = regular spacing, 1 = strongly clustered
    drift: float = 0.0  # > 0: receives early and spends late; < 0: the reverse


TEMPLATES = {
    # Exchange, HYIP and Market share their per-transaction behavior: HYIP
    # differs in how its role mix drifts over its lifetime, Market in how
    # clustered its activity is.
    Category.Exchange: Template((40, 120), (100, 600), 0.5, 0.0, 1.0, 0.5, (1, 4), (2, 3), 0.5, 0.0),
    Category.Faucet: Template((20, 100), (100, 400), 0.2, 0.0, 0.3, 0.5, (1, 2), (3, 10), 0.7, 0.1),
    Category.Gambling: Template((20, 120), (60, 400), 0.5, 0.0, 0.1, 1.0, (1, 3), (2, 3), 0.6, 0.9),
    Category.HYIP: Template((40, 120), (100, 600), 0.5, 0.0, 1.0, 0.5, (1, 4), (2, 3), 0.5, 0.0, 1.0),
    Category.Market: Template((40, 120), (100, 600), 0.5, 0.0, 1.0, 0.5, (1, 4), (2, 3), 0.5, 1.0),
    Category.Mixer: Template((4, 20), (0, 10), 0.5, 0.0, 10.0, 1.0, (1, 2), (2, 5), 0.1, 0.9),
    Category.Pool: Template((20, 80), (100, 400), 0.1, 0.4, 10.0, 0.5, (1, 2), (5, 20), 0.5, 0.1),
}


@dataclass
class Fixture:
    transactions: list[Transaction]
    rates: RateTable
    labels: dict[str, Category]
    owners: dict[str, str]  # address -> synthetic owner id


def _heights(rng, n, start, lifetime_days, burstiness) -> list[int]:
    span = max(int(lifetime_days * 144), 0)
    if n == 1 or span == 0:
        return [start] * n
    gaps = rng.exponential(1.0, n - 1) ** (1.0 + 3.0 * burstiness)
    gaps = gaps / gaps.sum() * span
    h = start + np.concatenate([[0.0], np.cumsum(gaps)])
    return [int(round(x)) for x in h]


def generate_fixture(
    n_per_category: int = 30,
    seed: int = 0,
    addresses_per_subject: int = 1,
    categories=tuple(Category),
) -> Fixture:
    rng = np.random.default_rng(seed)
    txs: list[Transaction] = []
    labels: dict[str, Category] = {}
    owners: dict[str, str] = {}
    counter = [0]

    def cp_address() -> str:
        counter[0] += 1
        return f"1cp{seed}x{counter[0]:07d}"

    for cat in categories:
        tpl = TEMPLATES[cat]
        for s in range(n_per_category):
            owner = f"{cat.name.lower()}{s:03d}"
            addrs = [f"1{owner}s{seed}a{j}" for j in range(addresses_per_subject)]
            for a in addrs:
                labels[a] = cat
                owners[a] = owner
            n = int(rng.integers(tpl.n_tx[0], tpl.n_tx[1] + 1))
            life = rng.uniform(*tpl.lifetime_days)
            start = int(rng.integers(150_000, 450_000))
            heights = _heights(rng, n, start, life, tpl.burstiness)
            scale = tpl.amount_btc * math.exp(rng.normal(0, 0.3))
            linked = addresses_per_subject == 1
            for k, h in enumerate(heights):
                def amount() -> int:
                    v = scale * math.exp(rng.normal(0, tpl.amount_sigma))
                    return max(1, int(v * SATOSHI_PER_BTC))

                u = rng.random()
                pos = k / max(n - 1, 1)
                p_recv = min(max(tpl.p_received + tpl.drift * (0.5 - pos), 0.0), 1.0 - tpl.p_coinbase)
                own = addrs[int(rng.integers(0, len(addrs)))]
                if u < tpl.p_coinbase:
                    reward = int(25 * SATOSHI_PER_BTC * math.exp(rng.normal(0, 0.05)))
                    inputs = (TxInput(COINBASE, reward),)
                    outputs = (TxOutput(own, reward),)
                elif u < tpl.p_coinbase + p_recv:
                    v = amount()
                    n_src = int(rng.integers(1, 4))
                    inputs = tuple(TxInput(cp_address(), v // n_src + 1000) for _ in range(n_src))
                    outputs = (TxOutput(own, v), TxOutput(cp_address(), int(rng.integers(1000, 10**6))))
                else:
                    n_in = int(rng.integers(tpl.spend_inputs[0], tpl.spend_inputs[1] + 1))
                    if not linked:
                        ins = list(addrs)
                        linked = True
                    else:
                        ins = [addrs[int(rng.integers(0, len(addrs)))] for _ in range(n_in)]
                    total = sum(amount() for _ in ins)
                    inputs = tuple(TxInput(a, max(1, total // len(ins))) for a in ins)
                    n_out = int(rng.integers(tpl.spend_outputs[0], tpl.spend_outputs[1] + 1))
                    payback = rng.random() < tpl.p_payback
                    budget = sum(i.value_satoshi for i in inputs) - 1000
                    share = max(1, budget // (n_out + (1 if payback else 0)))
                    outputs = tuple(TxOutput(cp_address(), share) for _ in range(n_out))
                    if payback:
                        outputs = outputs + (TxOutput(own, share),)
                tx = Transaction(
                    txid_for(seed, owner, k),
                    h,
                    block_time(h) + int(rng.integers(-300, 300)) if h > 0 else GENESIS_TIME,
                    inputs,
                    outputs,
                    int(rng.integers(0, 3000)) if inputs[0].address != COINBASE else 0,
                )
                txs.append(tx)
    txs.sort(key=lambda t: t.sort_key)
    lo = min(t.block_height for t in txs)
    hi = max(t.block_height for t in txs)
    return Fixture(txs, synthetic_rates(lo - 1000, hi + 1000), labels, owners)


def write_fixture(fx: Fixture, directory) -> dict[str, Path]:
    """Write ``transactions.jsonl``, ``rates.csv`` and ``labels.csv``."""
    from .ingest import write_labels, write_rate_table, write_transactions

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {"transactions": d / "transactions.jsonl", "rates": d / "rates.csv", "labels": d / "labels.csv"}
    with open(paths["transactions"], "w", encoding="utf-8", newline="") as fh:
        write_transactions(fx.transactions, fh)
    with open(paths["rates"], "w", encoding="utf-8", newline="") as fh:
        write_rate_table(fx.rates, fh)
    with open(paths["labels"], "w", encoding="utf-8", newline="") as fh:
        write_labels(fx.labels, fh)
    return paths


def stream_transactions(n_tx: int, n_addresses: int, seed: int = 0) -> Iterator[Transaction]:
    """Canonically ordered random payments among ``n_addresses`` addresses,
    produced lazily."""
    rng = np.random.default_rng(seed)
    batch = 4096
    k = 0
    while k < n_tx:
        m = min(batch, n_tx - k)
        src = rng.integers(0, n_addresses, m)
        dst = rng.integers(0, n_addresses, m)
        val = rng.integers(1_000, 10**9, m)
        for j in range(m):
            i = k + j
            h = 200_000 + i // 8
            v = int(val[j])
            a = f"1addr{int(src[j]):06d}"
            yield Transaction(
                f"{i:064x}",
                h,
                block_time(h),
                (TxInput(a, v + 500),),
                (TxOutput(f"1addr{int(dst[j]):06d}", v // 2), TxOutput(a, v - v // 2)),
                i % 8,
            )
        k += m
