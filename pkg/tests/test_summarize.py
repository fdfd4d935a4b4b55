import datetime as dt
import math
import random

import pytest

from txhist.clustering import address_index, history_for
from txhist.model import (
    COINBASE,
    FEATURE_GROUPS,
    FEATURE_INDEX,
    FEATURE_NAMES,
    Category,
    RateTable,
    RoleKind,
    TransactionHistory,
)
from txhist.summarize import (
    ContractViolation,
    StreamingSummarizer,
    assign_role,
    balance_trace,
    basic_stats,
    extra_stats,
    interval_samples,
    magnitude_bin,
    summarize,
    summarize_subjects,
    usd_value,
)
from txhist.synthetic import block_time

import oracles
from helpers import random_history_txs, random_rates, tx

SEVEN_HEIGHTS = [193967, 194101, 194157, 200000, 200373, 212118, 212272]


def history(txs, addrs=("A",), category=None):
    idx = address_index(txs)
    return history_for(addrs[0], addrs, idx, category)


def flat_rates(rate=100.0, start=dt.date(2009, 1, 1), days=6000):
    return RateTable({start + dt.timedelta(days=d): rate for d in range(days)})


def f(vec, name):
    return vec.values[FEATURE_INDEX[name]]


# -- roles ---------------------------------------------------------------------


def test_roles():
    cb = tx("cb", 10, [(COINBASE, 50)], [("A", 50)])
    assert assign_role(cb, {"A"}) == (RoleKind.Coinbase, False)
    # Alice pays Bob and takes change back
    pay = tx("p", 11, [("A", 100)], [("B", 50), ("A", 49)])
    assert assign_role(pay, {"A"}) == (RoleKind.Spent, True)
    recv = tx("r", 12, [("B", 10)], [("A", 9)])
    assert assign_role(recv, {"A"}) == (RoleKind.Received, False)
    with pytest.raises(ContractViolation):
        assign_role(recv, {"Z"})


def test_usd_and_bins():
    rates = RateTable({dt.date(2013, 1, 1): 100.0, dt.date(2013, 1, 2): 12.0})
    assert usd_value(10**8, dt.date(2013, 1, 1), rates) == 100.0
    assert usd_value(0, dt.date(2013, 1, 1), rates) == 0.0
    assert usd_value(250_000_000, dt.date(2013, 1, 2), rates) == 30.0
    # nearest earlier date within a week, else zero
    assert usd_value(10**8, dt.date(2013, 1, 9), rates) == 12.0
    assert usd_value(10**8, dt.date(2013, 1, 10), rates) == 0.0
    assert usd_value(10**8, dt.date(2012, 12, 31), rates) == 0.0
    assert magnitude_bin(250.0) == 5
    assert magnitude_bin(0.0005) == 0
    assert magnitude_bin(5_000_000.0) == 9
    assert magnitude_bin(1e9) == 9
    assert magnitude_bin(0.0) is None and magnitude_bin(-1.0) is None
    for e in range(-3, 7):
        assert magnitude_bin(10.0**e) == e + 3
        assert magnitude_bin(math.nextafter(10.0**e, 0)) == max(e + 2, 0)


def test_bins_match_exact_oracle():
    rng = random.Random(3)
    for _ in range(3000):
        v = 10 ** rng.uniform(-5, 8)
        assert magnitude_bin(v) == oracles.magnitude_index(v)


# -- intervals and moments -------------------------------------------------------


def test_intervals():
    txs = [tx(f"t{k}", h, [("S", 1)], [("A", 1)], pos=k) for k, h in enumerate([5, 5, 9])]
    assert interval_samples(history(txs)) == [0, 4]
    assert interval_samples(history(txs[:1])) == []
    seven = [tx(f"f{k}", h, [("S", 1)], [("A", 1)]) for k, h in enumerate(SEVEN_HEIGHTS)]
    assert interval_samples(history(seven)) == [134, 56, 5843, 373, 11745, 154]


def test_seven_heights_overall_moment():
    seven = [tx(f"f{k}", h, [("S", 1)], [("A", 1)]) for k, h in enumerate(SEVEN_HEIGHTS)]
    v = summarize(history(seven), flat_rates())
    assert f(v, "m1_overall") == pytest.approx(sum(SEVEN_HEIGHTS) / 7 - 193967, rel=1e-12)
    assert f(v, "m1_overall") == oracles.moments(SEVEN_HEIGHTS, min_shift=True)[0]
    # all received: the received block repeats the overall one, others are empty
    assert [f(v, f"m{i}_received") for i in range(1, 5)] == [f(v, f"m{i}_overall") for i in range(1, 5)]
    for g in ("spent", "coinbase", "payback"):
        assert [f(v, f"m{i}_{g}") for i in range(1, 5)] == [0.0] * 4


# -- basic and extra statistics ---------------------------------------------------------


def test_single_received_100_usd():
    rates = flat_rates(100.0)
    v = summarize(history([tx("a", 200_000, [("S", 10**8 + 5)], [("A", 10**8)])]), rates)
    assert f(v, "f_tx") == 1.0 and f(v, "r_received") == 1.0 and f(v, "r_coinbase") == 0.0
    assert f(v, "f_received_1e2") == 1.0
    assert sum(v.values[FEATURE_INDEX["f_received_1e-3"]:FEATURE_INDEX["f_received_1e6"] + 1]) == 1.0
    assert f(v, "r_payback") == 0.0 and f(v, "mean_n_inputs") == 0.0 and f(v, "mean_n_outputs") == 0.0
    assert f(v, "lifetime") == 0.0 and f(v, "btc_received") == 1.0 and f(v, "btc_spent") == 0.0
    assert f(v, "n_tx") == f(v, "n_received") == 1.0
    assert f(v, "mean_balance_btc") == 1.0 and f(v, "std_balance_btc") == 0.0
    for g in ("overall", "spent", "received", "coinbase", "payback", "interval"):
        assert [f(v, f"m{i}_{g}") for i in (2, 3, 4)] == [0.0] * 3
    assert f(v, "m1_overall") == 0.0


def test_two_coinbase_consecutive_days():
    t0 = block_time(300_000)
    txs = [tx("c1", 300_000, [(COINBASE, 10)], [("A", 10)], time=t0),
           tx("c2", 300_144, [(COINBASE, 10)], [("A", 10)], time=t0 + 86400)]
    v = summarize(history(txs), flat_rates())
    assert f(v, "r_coinbase") == 1.0 and f(v, "f_tx") == 2.0 and f(v, "lifetime") == 1.0
    assert f(v, "btc_received") == 20 / 1e8


def test_constant_fanout_spends():
    txs = [tx(f"s{k}", 200_000 + k, [("A", 10), ("A", 10)], [("X", 1), ("Y", 1), ("Z", 1)])
           for k in range(4)]
    v = summarize(history(txs), flat_rates())
    assert f(v, "mean_n_inputs") == 2.0 and f(v, "mean_n_outputs") == 3.0
    assert f(v, "n_spent") == 4.0


def test_balance_examples():
    txs = [tx("r", 200_000, [("S", 2 * 10**8)], [("A", 2 * 10**8)]),
           tx("s", 200_001, [("A", 2 * 10**8)], [("B", 2 * 10**8)])]
    h = history(txs)
    assert balance_trace(h, flat_rates()).balance_sat == (2 * 10**8, 0)
    e = extra_stats(h, flat_rates())
    assert e[10:12] == [1.0, 1.0]
    mixer = [tx("r", 200_000, [("S", 10**10)], [("A", 10**10)]),
             tx("s", 200_003, [("A", 10**10)], [("B", 10**10)])]
    e = extra_stats(history(mixer), flat_rates())
    assert e[0] == 0.0 and e[11] == 50.0


def test_negative_balance_is_counted():
    h = history([tx("s", 200_000, [("A", 500)], [("B", 500)])])
    t = balance_trace(h, flat_rates())
    assert t.balance_sat == (-500,) and t.negative_steps == 1


def test_empty_history_is_a_contract_violation():
    h = TransactionHistory("A", frozenset({"A"}), ())
    with pytest.raises(ContractViolation):
        basic_stats(h, flat_rates())
    with pytest.raises(ContractViolation):
        summarize(h, flat_rates())


# -- oracle comparisons ----------------------------------------------------------------


def _assert_close(got, want, ctx):
    for name, g, w in zip(FEATURE_NAMES, got, want):
        assert math.isclose(g, w, rel_tol=1e-9, abs_tol=1e-12), (ctx, name, g, w)


@pytest.mark.parametrize("seed", range(40))
def test_random_history_matches_oracle(seed):
    rng = random.Random(seed)
    rates = random_rates(rng)
    addrs = ["A"] if seed % 2 else ["A", "A2", "A3"]
    txs = random_history_txs(rng, addrs, 30, tag=str(seed))
    h = history_for("A", addrs, address_index(txs))
    got = summarize(h, rates).values
    want = oracles.summarize(txs, addrs, dict(rates.rates))
    _assert_close(got, want, seed)


def test_invariants_on_random_histories():
    rng = random.Random(99)
    rates = random_rates(rng)
    for seed in range(60):
        txs = random_history_txs(rng, ["A"], rng.randint(1, 40), tag=f"i{seed}")
        v = summarize(history(txs), rates).values
        assert len(v) == 64 and all(math.isfinite(x) for x in v)
        counts = [v[FEATURE_INDEX[n]] for n in ("n_spent", "n_received", "n_coinbase")]
        assert sum(counts) == v[FEATURE_INDEX["n_tx"]]
        for side in ("spent", "received"):
            lo = FEATURE_INDEX[f"f_{side}_1e-3"]
            s = math.fsum(v[lo:lo + 10])
            assert s == 0.0 or math.isclose(s, 1.0, rel_tol=1e-12)


def test_streaming_equals_materialized():
    rng = random.Random(5)
    rates = random_rates(rng)
    txs, subjects = [], {}
    for s in range(25):
        addrs = [f"S{s}a", f"S{s}b"] if s % 3 == 0 else [f"S{s}a"]
        txs += random_history_txs(rng, addrs, rng.randint(1, 35), tag=f"s{s}",
                                  start_height=150_000 + 37 * s)
        for a in addrs:
            subjects[a] = f"S{s}"
    # shared transactions touching two subjects at once
    txs.append(tx("shared", 151_000, [("S1a", 10**6), ("S2a", 10**6)], [("S4a", 10**6)]))
    txs.sort(key=lambda t: t.sort_key)
    idx = address_index(txs)
    stream = StreamingSummarizer(subjects, rates).feed_all(txs)
    members = {}
    for a, s in subjects.items():
        members.setdefault(s, []).append(a)
    for s, addrs in members.items():
        want = summarize(history_for(s, addrs, idx), rates).values
        assert stream.result(s).values == want, s
    assert stream.peak_states == len(members)


def test_streaming_rejects_unsorted_input():
    a = tx("a", 10, [("S", 1)], [("A", 1)])
    b = tx("b", 9, [("S", 1)], [("A", 1)])
    s = StreamingSummarizer({"A": "A"}, flat_rates())
    s.feed(a)
    with pytest.raises(ValueError, match="canonical order"):
        s.feed(b)


def test_max_tx_cap_matches_prefix():
    rng = random.Random(8)
    rates = random_rates(rng)
    txs = sorted(random_history_txs(rng, ["A"], 30), key=lambda t: t.sort_key)
    capped = StreamingSummarizer({"A": "A"}, rates, max_tx=10).feed_all(txs).result("A")
    assert capped.values == summarize(history_for("A", ["A"], address_index(txs), max_tx=10),
                                      rates).values
    assert capped.values == summarize(history(txs[:10]), rates).values


def test_sharded_summaries_equal_single_worker():
    rng = random.Random(21)
    rates = random_rates(rng)
    txs = []
    for s in range(8):
        txs += random_history_txs(rng, [f"W{s}"], 15, tag=f"w{s}")
    txs.sort(key=lambda t: t.sort_key)
    mapping = {f"W{s}": f"W{s}" for s in range(8)}
    one, m1 = summarize_subjects(txs, mapping, rates, workers=1)
    three, m3 = summarize_subjects(txs, mapping, rates, workers=3)
    assert list(one) == list(three) and m1 == m3
    assert all(one[k].values == three[k].values for k in one)


def test_missing_rates_give_zero_usd_and_count():
    txs = [tx("r", 200_000, [("S", 10**8)], [("A", 10**8)])]
    s = StreamingSummarizer({"A": "A"}, RateTable({})).feed_all(txs)
    v = s.result("A")
    assert f(v, "usd_received") == 0.0 and s.missing_rate_lookups == 1
    assert sum(v.values[FEATURE_GROUPS["basic"][3]:FEATURE_GROUPS["basic"][23]]) == 0.0


def test_category_does_not_change_features():
    txs = [tx("r", 200_000, [("S", 10**8)], [("A", 10**8)])]
    assert summarize(history(txs, category=Category.Pool), flat_rates()) == summarize(
        history(txs), flat_rates())
