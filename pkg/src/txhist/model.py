"""Domain types shared across the pipeline.

Amounts are integer satoshis everywhere; BTC and USD are derived at the
edges. Block height is the time axis for moment features, timestamps are
only used for calendar-day arithmetic (lifetime, USD conversion).
"""

from __future__ import annotations

import bisect
import datetime as dt
import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

SATOSHI_PER_BTC = 100_000_000
SECONDS_PER_DAY = 86_400
COINBASE = "COINBASE"

#: Missing-rate fallback window (days) for :meth:`RateTable.resolve`.
RATE_LOOKBACK_DAYS = 7


class Category(enum.IntEnum):
    """Service categories; the ordinal is the tie-break order in prediction."""

    Exchange = 0
    Faucet = 1
    Gambling = 2
    HYIP = 3
    Market = 4
    Mixer = 5
    Pool = 6

    @classmethod
    def parse(cls, text: str) -> "Category":
        key = text.strip().lower()
        for c in cls:
            if c.name.lower() == key:
                return c
        valid = ", ".join(c.name for c in cls)
        raise ValueError(f"unknown category {text!r}; expected one of: {valid}")


N_CATEGORIES = len(Category)


class RoleKind(enum.IntEnum):
    Coinbase = 0
    Spent = 1
    Received = 2


class TxRole(NamedTuple):
    kind: RoleKind
    payback: bool = False


@dataclass(frozen=True, slots=True)
class TxInput:
    address: str
    value_satoshi: int

    @property
    def is_coinbase(self) -> bool:
        return self.address == COINBASE


@dataclass(frozen=True, slots=True)
class TxOutput:
    address: str
    value_satoshi: int


@dataclass(frozen=True, slots=True)
class Transaction:
    txid: str
    block_height: int
    timestamp: int
    inputs: tuple[TxInput, ...]
    outputs: tuple[TxOutput, ...]
    position_in_block: int = 0

    def __post_init__(self) -> None:
        problems = transaction_problems(self)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def is_coinbase(self) -> bool:
        return any(i.is_coinbase for i in self.inputs)

    @property
    def sort_key(self) -> tuple[int, int, str]:
        return (self.block_height, self.position_in_block, self.txid)

    @property
    def day(self) -> int:
        """UTC day number since the Unix epoch."""
        return self.timestamp // SECONDS_PER_DAY

    @property
    def input_sat(self) -> int:
        return sum(i.value_satoshi for i in self.inputs)

    @property
    def output_sat(self) -> int:
        return sum(o.value_satoshi for o in self.outputs)

    @property
    def fee_sat(self) -> int:
        return self.input_sat - self.output_sat


def transaction_problems(tx: Transaction) -> list[str]:
    out = []
    for name in ("block_height", "timestamp", "position_in_block"):
        v = getattr(tx, name)
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            out.append(f"{name} must be a non-negative integer, got {v!r}")
    if not tx.outputs:
        out.append("transaction has no outputs")
    n_coinbase = sum(1 for i in tx.inputs if i.is_coinbase)
    if n_coinbase and len(tx.inputs) != 1:
        out.append("coinbase input must be the only input")
    if not tx.inputs:
        out.append("non-coinbase transaction has no inputs")
    for side, items in (("input", tx.inputs), ("output", tx.outputs)):
        for k, item in enumerate(items):
            v = item.value_satoshi
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                out.append(f"{side} {k} value must be a non-negative integer, got {v!r}")
            if not isinstance(item.address, str) or not item.address:
                out.append(f"{side} {k} has an empty address")
    for k, o in enumerate(tx.outputs):
        if o.address == COINBASE:
            out.append(f"output {k} uses the coinbase sentinel as address")
    return out


@dataclass(frozen=True)
class TransactionHistory:
    """Relevant transactions of one subject, canonically ordered.

    ``addresses`` is the subject's address set (one address, or an entity's
    members); roles are relative to that set.
    """

    subject: str
    addresses: frozenset[str]
    entries: tuple[tuple[Transaction, TxRole], ...]
    category: Category | None = None

    def __post_init__(self) -> None:
        prev = None
        for tx, _ in self.entries:
            key = tx.sort_key
            if prev is not None and not prev < key:
                raise ValueError(
                    f"history of {self.subject} not strictly sorted at txid {tx.txid}"
                )
            prev = key
            if not any(a.address in self.addresses for a in tx.inputs) and not any(
                o.address in self.addresses for o in tx.outputs
            ):
                raise ValueError(f"transaction {tx.txid} does not mention {self.subject}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def transactions(self) -> list[Transaction]:
        return [tx for tx, _ in self.entries]

    @property
    def roles(self) -> list[TxRole]:
        return [r for _, r in self.entries]


@dataclass(frozen=True)
class Moments:
    m1: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0
    sample_count: int = 0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.m1, self.m2, self.m3, self.m4)


def _epoch_day(d: dt.date) -> int:
    return (d - dt.date(1970, 1, 1)).days


@dataclass(frozen=True)
class RateTable:
    """Daily USD/BTC rates keyed by UTC date."""

    rates: Mapping[dt.date, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for d, r in self.rates.items():
            if not r > 0:
                raise ValueError(f"non-positive rate {r!r} on {d}")
        days = sorted((_epoch_day(d), float(r)) for d, r in self.rates.items())
        object.__setattr__(self, "_days", [d for d, _ in days])
        object.__setattr__(self, "_values", [r for _, r in days])

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[dt.date, float]]) -> "RateTable":
        table: dict[dt.date, float] = {}
        for d, r in pairs:
            if d in table:
                raise ValueError(f"duplicate date {d.isoformat()}")
            table[d] = r
        return cls(table)

    def __len__(self) -> int:
        return len(self.rates)

    def resolve(self, day: int) -> tuple[float, bool]:
        """Rate for an epoch day: exact date, else nearest earlier date within
        :data:`RATE_LOOKBACK_DAYS`. Returns ``(0.0, False)`` when nothing
        qualifies."""
        k = bisect.bisect_right(self._days, day) - 1
        if k >= 0 and day - self._days[k] <= RATE_LOOKBACK_DAYS:
            return self._values[k], True
        return 0.0, False

    def rate_on(self, date: dt.date) -> float:
        return self.resolve(_epoch_day(date))[0]


# -- canonical feature layout -------------------------------------------------

MAGNITUDE_EXPONENTS = tuple(range(-3, 7))


def _exp_label(e: int) -> str:
    return f"1e{e}"


BASIC_FEATURES: tuple[str, ...] = (
    ("f_tx", "r_received", "r_coinbase")
    + tuple(f"f_spent_{_exp_label(e)}" for e in MAGNITUDE_EXPONENTS)
    + tuple(f"f_received_{_exp_label(e)}" for e in MAGNITUDE_EXPONENTS)
    + ("r_payback", "mean_n_inputs", "mean_n_outputs")
)

EXTRA_FEATURES: tuple[str, ...] = (
    "lifetime",
    "btc_spent",
    "btc_received",
    "usd_spent",
    "usd_received",
    "n_tx",
    "n_spent",
    "n_received",
    "n_coinbase",
    "n_payback",
    "mean_balance_btc",
    "std_balance_btc",
    "mean_balance_usd",
    "std_balance_usd",
)

MOMENT_DISTRIBUTIONS = ("overall", "spent", "received", "coinbase", "payback", "interval")

MOMENT_FEATURES: tuple[str, ...] = tuple(
    f"m{n}_{d}" for d in MOMENT_DISTRIBUTIONS for n in (1, 2, 3, 4)
)

FEATURE_NAMES: tuple[str, ...] = BASIC_FEATURES + EXTRA_FEATURES + MOMENT_FEATURES
N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

FEATURE_GROUPS = {
    "basic": range(0, len(BASIC_FEATURES)),
    "extra": range(len(BASIC_FEATURES), len(BASIC_FEATURES) + len(EXTRA_FEATURES)),
    "moments": range(len(BASIC_FEATURES) + len(EXTRA_FEATURES), N_FEATURES),
}

assert N_FEATURES == 64 and len(BASIC_FEATURES) == 26 and len(EXTRA_FEATURES) == 14


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} features, got {len(self.values)}")
        for name, v in zip(FEATURE_NAMES, self.values):
            if v != v or v in (float("inf"), float("-inf")):
                raise ValueError(f"non-finite feature {name}={v!r}")

    def __getitem__(self, key: int | str) -> float:
        if isinstance(key, str):
            key = FEATURE_INDEX[key]
        return self.values[key]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))
