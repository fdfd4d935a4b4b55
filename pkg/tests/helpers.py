"""Small random record generators shared by several test modules."""

from __future__ import annotations

import datetime as dt
import random

from txhist.model import COINBASE, RateTable, Transaction, TxInput, TxOutput
from txhist.synthetic import block_time, txid_for

DAY0 = dt.date(2012, 1, 1)


def tx(txid, height, inputs, outputs, *, time=None, pos=0) -> Transaction:
    """Shorthand: ``inputs``/``outputs`` are ``(address, satoshi)`` pairs."""
    return Transaction(
        txid if len(txid) == 64 else txid_for(txid),
        height,
        block_time(height) if time is None else time,
        tuple(TxInput(a, v) for a, v in inputs),
        tuple(TxOutput(a, v) for a, v in outputs),
        pos,
    )


def random_rates(rng: random.Random, days: int = 4000, start=dt.date(2009, 1, 1),
                 holes: float = 0.2) -> RateTable:
    """Daily rates with a fraction of missing days (some gaps longer than the
    look-back window)."""
    table = {}
    d = 0
    while d < days:
        if rng.random() < holes:
            d += rng.choice([1, 2, 9])
            continue
        table[start + dt.timedelta(days=d)] = round(rng.uniform(0.05, 60000.0), 2)
        d += 1
    return RateTable(table)


def random_history_txs(rng: random.Random, subject_addrs, n_tx: int, *, tag="h",
                       start_height: int = 150_000) -> list[Transaction]:
    """``n_tx`` transactions each mentioning at least one subject address,
    mixing every role, payback, repeated blocks and tiny/huge amounts."""
    out = []
    h = start_height
    for k in range(n_tx):
        h += rng.choice([0, 0, 1, 3, 50, 144, 1000, 20000])
        own = rng.choice(subject_addrs)
        kind = rng.random()
        amount = lambda: rng.choice([1, 999, 10**4, 10**6, 10**8, 3 * 10**9, 10**12])  # noqa: E731
        if kind < 0.15:
            ins = [(COINBASE, 25 * 10**8)]
            outs = [(own, 25 * 10**8)] + ([(f"x{tag}{k}", 1)] if rng.random() < 0.3 else [])
        elif kind < 0.55:
            ins = [(f"src{tag}{k}_{j}", amount()) for j in range(rng.randint(1, 3))]
            outs = [(own, amount())] + [(f"o{tag}{k}", amount())] * rng.randint(0, 1)
        else:
            ins = [(rng.choice(subject_addrs), amount()) for _ in range(rng.randint(1, 3))]
            outs = [(f"d{tag}{k}_{j}", amount()) for j in range(rng.randint(1, 4))]
            if rng.random() < 0.4:
                outs.append((rng.choice(subject_addrs), amount()))
        out.append(tx(f"{tag}/{k}", h, ins, outs, pos=k))
    return out
