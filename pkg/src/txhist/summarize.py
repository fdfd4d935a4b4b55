"""Transaction history summaries: 26 basic statistics, 14 extra statistics
and 24 transaction moments per subject.

Two code paths compute the same vector:

* :func:`summarize` works on a materialized :class:`TransactionHistory`.
* :class:`StreamingSummarizer` consumes a canonically ordered transaction
  stream once and keeps a fixed-size state per subject. The CLI uses it.

Flow conventions (subject viewpoint): a transaction's *inflow* is the sum of
outputs paid to subject addresses, its *outflow* the sum of subject-owned
inputs. Received totals include coinbase rewards and payback change. USD
values are taken at each transaction's own date.
"""

from __future__ import annotations

import math
import statistics
from collections.abc import Callable, Hashable, Iterable, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .model import (
    COINBASE,
    MAGNITUDE_EXPONENTS,
    N_FEATURES,
    SATOSHI_PER_BTC,
    FeatureVector,
    Moments,
    RateTable,
    RoleKind,
    Transaction,
    TransactionHistory,
    TxRole,
)
from .moments import IntMomentAccumulator, min_shifted_moments, raw_moments

N_BINS = len(MAGNITUDE_EXPONENTS)
_LO_EXP = MAGNITUDE_EXPONENTS[0]
_HI_EXP = MAGNITUDE_EXPONENTS[-1]


class ContractViolation(ValueError):
    pass


def subject_flows(tx: Transaction, addresses) -> tuple[TxRole, int, int] | None:
    """Role plus (outflow, inflow) satoshis; ``None`` when the transaction
    does not mention the subject."""
    outflow = 0
    in_inputs = False
    for i in tx.inputs:
        if i.address in addresses:
            in_inputs = True
            outflow += i.value_satoshi
    inflow = 0
    in_outputs = False
    for o in tx.outputs:
        if o.address in addresses:
            in_outputs = True
            inflow += o.value_satoshi
    if not (in_inputs or in_outputs):
        return None
    if tx.inputs[0].address == COINBASE:
        kind = RoleKind.Coinbase
    elif in_inputs:
        kind = RoleKind.Spent
    else:
        kind = RoleKind.Received
    return TxRole(kind, in_inputs and in_outputs), outflow, inflow


def assign_role(tx: Transaction, subject_addresses) -> TxRole:
    flows = subject_flows(tx, subject_addresses)
    if flows is None:
        raise ContractViolation(f"transaction {tx.txid} does not mention the subject")
    return flows[0]


# Every finite double is an integer multiple of 2**-1074, so USD sums can be
# carried exactly as plain integers at that scale. int / int true division
# is correctly rounded, which makes the final floats equal to the Fraction
# results of the materialized path.
_FIX_BITS = 1074
_FIX_ONE = 1 << _FIX_BITS


def _fix(x: float) -> int:
    num, den = x.as_integer_ratio()
    return num << (_FIX_BITS + 1 - den.bit_length())


def _usd(sat: int, rate: float) -> float:
    return sat / SATOSHI_PER_BTC * rate


def usd_value(sat: int, date, rates: RateTable) -> float:
    """USD worth of ``sat`` on ``date`` (a ``datetime.date`` or epoch day)."""
    if isinstance(date, int):
        rate = rates.resolve(date)[0]
    else:
        rate = rates.rate_on(date)
    return _usd(sat, rate)


def magnitude_bin(usd: float) -> int | None:
    """Index 0..9 of the order of magnitude of ``usd`` (10^-3 .. 10^6,
    clamped); ``None`` for non-positive amounts."""
    if not usd > 0:
        return None
    e = math.floor(math.log10(usd))
    # log10 can be off by one ulp right at powers of ten
    if 10.0**e > usd:
        e -= 1
    elif 10.0 ** (e + 1) <= usd:
        e += 1
    return min(max(e, _LO_EXP), _HI_EXP) - _LO_EXP


def interval_samples(history: TransactionHistory) -> list[int]:
    heights = [tx.block_height for tx in history.transactions]
    return [b - a for a, b in zip(heights, heights[1:])]


@dataclass(frozen=True)
class BalanceTrace:
    balance_sat: tuple[int, ...]
    balance_usd: tuple[float, ...]
    negative_steps: int


def _flows(history: TransactionHistory):
    for tx, _ in history.entries:
        role, outflow, inflow = subject_flows(tx, history.addresses)
        yield tx, role, outflow, inflow


def balance_trace(history: TransactionHistory, rates: RateTable) -> BalanceTrace:
    sat, usd = [], []
    bal = 0
    bal_usd = Fraction(0)
    for tx, _, outflow, inflow in _flows(history):
        rate = rates.resolve(tx.day)[0]
        bal += inflow - outflow
        bal_usd += Fraction(_usd(inflow, rate)) - Fraction(_usd(outflow, rate))
        sat.append(bal)
        usd.append(float(bal_usd))
    return BalanceTrace(tuple(sat), tuple(usd), sum(1 for b in sat if b < 0))


def _lifetime_days(history: TransactionHistory) -> int:
    days = [tx.day for tx in history.transactions]
    return max(days) - min(days)


def _require_nonempty(history: TransactionHistory) -> None:
    if len(history) == 0:
        raise ContractViolation(f"empty history for {history.subject}")


def basic_stats(history: TransactionHistory, rates: RateTable) -> list[float]:
    _require_nonempty(history)
    n_tx = len(history)
    kinds = [r.kind for r in history.roles]
    spent_bins = [0] * N_BINS
    recv_bins = [0] * N_BINS
    n_in, n_out = [], []
    for tx, role, outflow, inflow in _flows(history):
        rate = rates.resolve(tx.day)[0]
        if role.kind is RoleKind.Spent:
            n_in.append(len(tx.inputs))
            n_out.append(len(tx.outputs))
            b = magnitude_bin(_usd(outflow, rate))
            if b is not None:
                spent_bins[b] += 1
        elif role.kind is RoleKind.Received:
            b = magnitude_bin(_usd(inflow, rate))
            if b is not None:
                recv_bins[b] += 1

    def freqs(bins):
        total = sum(bins)
        return [c / total if total else 0.0 for c in bins]

    return [
        n_tx / max(_lifetime_days(history), 1),
        kinds.count(RoleKind.Received) / n_tx,
        kinds.count(RoleKind.Coinbase) / n_tx,
        *freqs(spent_bins),
        *freqs(recv_bins),
        sum(1 for r in history.roles if r.payback) / n_tx,
        statistics.fmean(n_in) if n_in else 0.0,
        statistics.fmean(n_out) if n_out else 0.0,
    ]


def extra_stats(history: TransactionHistory, rates: RateTable) -> list[float]:
    _require_nonempty(history)
    spent_sat = received_sat = 0
    usd_spent = usd_received = Fraction(0)
    for tx, role, outflow, inflow in _flows(history):
        rate = rates.resolve(tx.day)[0]
        if role.kind is RoleKind.Spent:
            spent_sat += outflow
            usd_spent += Fraction(_usd(outflow, rate))
        received_sat += inflow
        usd_received += Fraction(_usd(inflow, rate))
    trace = balance_trace(history, rates)
    kinds = [r.kind for r in history.roles]
    btc = [Fraction(b, SATOSHI_PER_BTC) for b in trace.balance_sat]
    usd = [Fraction(u) for u in trace.balance_usd]
    return [
        float(_lifetime_days(history)),
        spent_sat / SATOSHI_PER_BTC,
        received_sat / SATOSHI_PER_BTC,
        float(usd_spent),
        float(usd_received),
        float(len(history)),
        float(kinds.count(RoleKind.Spent)),
        float(kinds.count(RoleKind.Received)),
        float(kinds.count(RoleKind.Coinbase)),
        float(sum(1 for r in history.roles if r.payback)),
        float(statistics.mean(btc)),
        _pstdev(btc),
        float(statistics.mean(usd)),
        _pstdev(usd),
    ]


def _pstdev(values: list[Fraction]) -> float:
    n = len(values)
    s1 = sum(values)
    s2 = sum(v * v for v in values)
    return math.sqrt(float((n * s2 - s1 * s1) / (n * n)))


def moment_features(history: TransactionHistory) -> list[float]:
    heights: dict[str, list[int]] = {
        "overall": [], "spent": [], "received": [], "coinbase": [], "payback": []
    }
    by_kind = {RoleKind.Spent: "spent", RoleKind.Received: "received", RoleKind.Coinbase: "coinbase"}
    for tx, role in history.entries:
        h = tx.block_height
        heights["overall"].append(h)
        heights[by_kind[role.kind]].append(h)
        if role.payback:
            heights["payback"].append(h)
    out: list[float] = []
    for key in ("overall", "spent", "received", "coinbase", "payback"):
        out.extend(min_shifted_moments(heights[key]).as_tuple())
    out.extend(raw_moments(interval_samples(history)).as_tuple())
    return out


def summarize(history: TransactionHistory, rates: RateTable) -> FeatureVector:
    values = basic_stats(history, rates) + extra_stats(history, rates) + moment_features(history)
    return FeatureVector(tuple(v + 0.0 for v in values))


# -- single pass ---------------------------------------------------------------


class _SubjectState:
    """Fixed-size running summary of one subject."""

    __slots__ = (
        "last_key", "n_tx", "n_spent", "n_received", "n_coinbase", "n_payback",
        "min_day", "max_day", "spent_bins", "recv_bins", "sum_n_in", "sum_n_out",
        "spent_sat", "received_sat", "usd_spent", "usd_received",
        "bal_sat", "bal_usd", "bal_sat_acc", "bal_usd_n", "bal_usd_s1", "bal_usd_s2",
        "overall", "spent", "received", "coinbase", "payback", "interval", "last_height",
    )

    def __init__(self) -> None:
        self.last_key = None
        self.n_tx = self.n_spent = self.n_received = self.n_coinbase = self.n_payback = 0
        self.min_day = self.max_day = 0
        self.spent_bins = [0] * N_BINS
        self.recv_bins = [0] * N_BINS
        self.sum_n_in = self.sum_n_out = 0
        self.spent_sat = self.received_sat = 0
        self.usd_spent = self.usd_received = 0
        self.bal_sat = 0
        self.bal_usd = 0
        self.bal_sat_acc = IntMomentAccumulator()
        self.bal_usd_n = 0
        self.bal_usd_s1 = self.bal_usd_s2 = 0
        self.overall = IntMomentAccumulator()
        self.spent = IntMomentAccumulator()
        self.received = IntMomentAccumulator()
        self.coinbase = IntMomentAccumulator()
        self.payback = IntMomentAccumulator()
        self.interval = IntMomentAccumulator()
        self.last_height = 0

    def update(self, tx: Transaction, role: TxRole, outflow: int, inflow: int, rate: float) -> None:
        h = tx.block_height
        day = tx.day
        if self.n_tx == 0:
            self.min_day = self.max_day = day
        else:
            self.interval.add(h - self.last_height)
            if day < self.min_day:
                self.min_day = day
            elif day > self.max_day:
                self.max_day = day
        self.last_height = h
        self.n_tx += 1
        self.overall.add(h)
        out_usd = _usd(outflow, rate)
        in_usd = _usd(inflow, rate)
        kind = role.kind
        if kind is RoleKind.Spent:
            self.n_spent += 1
            self.spent.add(h)
            self.sum_n_in += len(tx.inputs)
            self.sum_n_out += len(tx.outputs)
            self.spent_sat += outflow
            if out_usd:
                self.usd_spent += _fix(out_usd)
            b = magnitude_bin(out_usd)
            if b is not None:
                self.spent_bins[b] += 1
        elif kind is RoleKind.Received:
            self.n_received += 1
            self.received.add(h)
            b = magnitude_bin(in_usd)
            if b is not None:
                self.recv_bins[b] += 1
        else:
            self.n_coinbase += 1
            self.coinbase.add(h)
        if role.payback:
            self.n_payback += 1
            self.payback.add(h)
        self.received_sat += inflow
        if in_usd:
            self.usd_received += _fix(in_usd)
        self.bal_sat += inflow - outflow
        self.bal_sat_acc.add(self.bal_sat)
        if in_usd or out_usd:
            self.bal_usd += _fix(in_usd) - _fix(out_usd)
        b_usd = _fix(self.bal_usd / _FIX_ONE)
        self.bal_usd_n += 1
        self.bal_usd_s1 += b_usd
        self.bal_usd_s2 += b_usd * b_usd

    def features(self) -> FeatureVector:
        n = self.n_tx
        if n == 0:
            raise ContractViolation("empty history")
        lifetime = self.max_day - self.min_day

        def freqs(bins):
            total = sum(bins)
            return [c / total if total else 0.0 for c in bins]

        basic = [
            n / max(lifetime, 1),
            self.n_received / n,
            self.n_coinbase / n,
            *freqs(self.spent_bins),
            *freqs(self.recv_bins),
            self.n_payback / n,
            self.sum_n_in / self.n_spent if self.n_spent else 0.0,
            self.sum_n_out / self.n_spent if self.n_spent else 0.0,
        ]
        m = self.bal_usd_n
        extra = [
            float(lifetime),
            self.spent_sat / SATOSHI_PER_BTC,
            self.received_sat / SATOSHI_PER_BTC,
            self.usd_spent / _FIX_ONE,
            self.usd_received / _FIX_ONE,
            float(n),
            float(self.n_spent),
            float(self.n_received),
            float(self.n_coinbase),
            float(self.n_payback),
            float(self._balance_mean_btc()),
            self._balance_std_btc(),
            self.bal_usd_s1 / (m * _FIX_ONE),
            math.sqrt((m * self.bal_usd_s2 - self.bal_usd_s1**2) / (m * m * _FIX_ONE * _FIX_ONE)),
        ]
        moments: list[float] = []
        for acc in (self.overall, self.spent, self.received, self.coinbase, self.payback):
            moments.extend(acc.moments(min_shift=True).as_tuple())
        moments.extend(self.interval.moments(min_shift=False).as_tuple())
        values = basic + extra + moments
        assert len(values) == N_FEATURES
        return FeatureVector(tuple(v + 0.0 for v in values))

    def _balance_std_btc(self) -> float:
        acc = self.bal_sat_acc
        n = acc.n
        return math.sqrt(float(Fraction(n * acc.s2 - acc.s1 * acc.s1, n * n * SATOSHI_PER_BTC**2)))

    def _balance_mean_btc(self) -> Fraction:
        acc = self.bal_sat_acc
        return (Fraction(acc.s1, acc.n) + acc.origin) / SATOSHI_PER_BTC


class StreamingSummarizer:
    """Single-pass summarizer over a canonically sorted transaction stream.

    ``subject_of`` maps an address to its subject key (the address itself,
    or an entity id); addresses it does not know are ignored. Memory is one
    :class:`_SubjectState` per subject seen, independent of stream length.
    ``peak_states`` records the largest number of live states.
    """

    def __init__(
        self,
        subject_of: Mapping[str, Hashable] | Callable[[str], Hashable | None],
        rates: RateTable,
        *,
        max_tx: int | None = None,
    ):
        self._subject_of = subject_of.get if isinstance(subject_of, Mapping) else subject_of
        self._rates = rates
        self._max_tx = max_tx
        self._states: dict[Hashable, _SubjectState] = {}
        self.transactions_seen = 0
        self.missing_rate_lookups = 0
        self.peak_states = 0

    def feed(self, tx: Transaction) -> None:
        self.transactions_seen += 1
        touched: dict[Hashable, set[str]] = {}
        lookup = self._subject_of
        for end in tx.inputs + tx.outputs:
            s = lookup(end.address)
            if s is not None:
                touched.setdefault(s, set()).add(end.address)
        if not touched:
            return
        rate, found = self._rates.resolve(tx.day)
        key = tx.sort_key
        for subject, addrs in touched.items():
            state = self._states.get(subject)
            if state is None:
                state = self._states[subject] = _SubjectState()
                if len(self._states) > self.peak_states:
                    self.peak_states = len(self._states)
            elif not state.last_key < key:
                raise ValueError(
                    f"stream not in canonical order for subject {subject!r} at txid {tx.txid}"
                )
            state.last_key = key
            if self._max_tx is not None and state.n_tx >= self._max_tx:
                continue
            role, outflow, inflow = subject_flows(tx, addrs)
            if not found and (outflow or inflow):
                self.missing_rate_lookups += 1
            state.update(tx, role, outflow, inflow, rate)

    def feed_all(self, txs: Iterable[Transaction]) -> "StreamingSummarizer":
        for tx in txs:
            self.feed(tx)
        return self

    @property
    def subjects(self) -> list[Hashable]:
        return list(self._states)

    def result(self, subject: Hashable) -> FeatureVector:
        return self._states[subject].features()

    def results(self) -> dict[Hashable, FeatureVector]:
        return {s: st.features() for s, st in self._states.items()}


def _summarize_shard(args):
    txs, subject_of, rates, max_tx = args
    s = StreamingSummarizer(subject_of, rates, max_tx=max_tx).feed_all(txs)
    return s.results(), s.missing_rate_lookups


def summarize_subjects(
    txs: list[Transaction],
    subject_of: Mapping[str, Hashable],
    rates: RateTable,
    *,
    max_tx: int | None = None,
    workers: int = 1,
) -> tuple[dict[Hashable, FeatureVector], int]:
    """Summarize every subject in ``subject_of`` over sorted ``txs``.

    Subjects are split into ``workers`` shards; each shard replays the stream
    with its own summarizer, so per-subject arithmetic does not depend on the
    sharding. Returns features keyed by subject (sorted key order) and the
    number of missing-rate lookups.
    """
    subjects = sorted(set(subject_of.values()), key=_subject_sort_key)
    workers = max(1, min(workers, len(subjects) or 1))
    if workers == 1:
        parts = [_summarize_shard((txs, subject_of, rates, max_tx))]
    else:
        shard_of = {s: k % workers for k, s in enumerate(subjects)}
        jobs = []
        for w in range(workers):
            mapping = {a: s for a, s in subject_of.items() if shard_of[s] == w}
            jobs.append((txs, mapping, rates, max_tx))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_summarize_shard, jobs))
    merged: dict[Hashable, FeatureVector] = {}
    missing = 0
    for res, miss in parts:
        merged.update(res)
        missing += miss
    return {s: merged[s] for s in subjects if s in merged}, missing


def _subject_sort_key(s):
    return (0, s, "") if isinstance(s, int) else (1, 0, str(s))
