import datetime as dt
import io
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from txhist.ingest import (
    IngestStats,
    ParseError,
    ValidationError,
    decode_transaction,
    encode_transaction,
    iter_transactions,
    parse_labels,
    parse_rate_table,
    parse_transactions,
    write_labels,
    write_rate_table,
    write_transactions,
)
from txhist.model import Category, RateTable, Transaction, TxInput, TxOutput

DATA = Path(__file__).parent / "data"
TXID = "ab" * 32


def record(**kw):
    base = {"txid": TXID, "height": 1, "time": 1231006505, "pos": 0,
            "in": [{"addr": "1A", "sat": 5}], "out": [{"addr": "1B", "sat": 4}]}
    base.update(kw)
    return json.dumps(base)


def test_decode_minimal_record():
    t = decode_transaction(record())
    assert t == Transaction(TXID, 1, 1231006505, (TxInput("1A", 5),), (TxOutput("1B", 4),), 0)


def test_coinbase_record():
    t = decode_transaction(record(**{"in": [{"addr": "COINBASE", "sat": 5000000000}]}))
    assert t.is_coinbase


@pytest.mark.parametrize("text, err", [
    ("{not json", ParseError),
    ("[1, 2]", ParseError),
    (record(txid="xyz"), ValidationError),
    (record(height=-1), ValidationError),
    (record(height=1.5), ValidationError),
    (record(time=True), ValidationError),
    (record(out=[]), ValidationError),
    (record(**{"in": []}), ValidationError),
    (record(**{"in": [{"addr": "COINBASE", "sat": 1}, {"addr": "1A", "sat": 1}]}), ValidationError),
    (record(out=[{"addr": "1B", "sat": -4}]), ValidationError),
    (record(out=[{"addr": "", "sat": 4}]), ValidationError),
    (record(out=[{"addr": "1B"}]), ValidationError),
    (record(out=[{"addr": "COINBASE", "sat": 4}]), ValidationError),
    (record(extra=1), ParseError),
    (json.dumps({"txid": TXID}), ParseError),
])
def test_invalid_records(text, err):
    with pytest.raises(err):
        decode_transaction(text)


def test_line_context_and_skip_mode():
    good = record()
    lines = f"{good}\n\n{record(height=-3)}\n{good}\n"
    with pytest.raises(ValidationError) as exc:
        parse_transactions(io.StringIO(lines), source="tx.jsonl")
    assert exc.value.line == 3 and "tx.jsonl:3:" in str(exc.value)
    stats = IngestStats()
    txs = parse_transactions(io.BytesIO(lines.encode()), skip_invalid=True, stats=stats)
    assert len(txs) == 2 and stats.records == 2 and stats.skipped == 1


def test_streaming_is_lazy():
    def lines():
        yield record().encode()
        raise AssertionError("read past the first record")

    it = iter_transactions(lines())
    assert next(it).txid == TXID


def test_golden_transactions_round_trip_bytes():
    raw = (DATA / "transactions.jsonl").read_bytes()
    txs = parse_transactions(io.BytesIO(raw))
    out = io.StringIO()
    write_transactions(txs, out)
    assert out.getvalue().encode() == raw
    assert parse_transactions(io.StringIO(out.getvalue())) == txs


address_st = st.text(st.characters(codec="utf-8", exclude_categories=("Cs",)), min_size=1,
                     max_size=12).filter(lambda s: s != "COINBASE")
endpoint_st = st.tuples(address_st, st.integers(0, 21 * 10**14))


@settings(max_examples=200, deadline=None)
@given(st.from_regex(r"[0-9a-f]{64}", fullmatch=True), st.integers(0, 10**7),
       st.integers(0, 2**32), st.integers(0, 5000),
       st.lists(endpoint_st, min_size=1, max_size=4), st.lists(endpoint_st, min_size=1, max_size=4))
def test_round_trip_property(txid, h, t, pos, ins, outs):
    tx = Transaction(txid, h, t, tuple(TxInput(*i) for i in ins), tuple(TxOutput(*o) for o in outs), pos)
    line = encode_transaction(tx)
    assert "\n" not in line
    back = decode_transaction(line)
    assert back == tx and encode_transaction(back) == line


def test_rate_table_parsing():
    rt = parse_rate_table(io.BytesIO(b"date,usd_per_btc\n2013-01-01,13.30\n"))
    assert rt.rates == {dt.date(2013, 1, 1): 13.30}
    assert len(parse_rate_table(io.StringIO("date,usd_per_btc\n"))) == 0
    with pytest.raises(ValidationError, match="duplicate"):
        parse_rate_table(io.StringIO("date,usd_per_btc\n2013-01-01,1\n2013-01-01,2\n"))
    with pytest.raises(ValidationError):
        parse_rate_table(io.StringIO("date,usd_per_btc\n2013-01-01,0\n"))
    with pytest.raises(ParseError):
        parse_rate_table(io.StringIO("date,usd_per_btc\n2013-13-01,1\n"))
    with pytest.raises(ParseError):
        parse_rate_table(io.StringIO("day,rate\n"))
    with pytest.raises(ParseError):
        parse_rate_table(io.StringIO(""))


def test_rate_table_round_trip():
    raw = (DATA / "rates.csv").read_text()
    rt = parse_rate_table(io.StringIO(raw))
    out = io.StringIO()
    write_rate_table(rt, out)
    assert out.getvalue() == raw


def test_labels_parsing():
    labels = parse_labels(io.StringIO("address,category\n1A2b,Mixer\n1xyz,exchange\n"))
    assert labels == {"1A2b": Category.Mixer, "1xyz": Category.Exchange}
    # addresses are case sensitive
    assert len(parse_labels(io.StringIO("address,category\n1ab,Pool\n1AB,Pool\n"))) == 2
    with pytest.raises(ValidationError, match="both"):
        parse_labels(io.StringIO("address,category\n1A,Mixer\n1A,Exchange\n"))
    with pytest.raises(ValidationError) as exc:
        parse_labels(io.StringIO("address,category\n1A,Casino\n"))
    for c in Category:
        assert c.name in str(exc.value)


def test_labels_round_trip():
    raw = (DATA / "labels.csv").read_text()
    labels = parse_labels(io.StringIO(raw))
    out = io.StringIO()
    write_labels(labels, out)
    assert out.getvalue() == raw


def test_rate_lookup_policy():
    rt = RateTable({dt.date(2013, 1, 1): 5.0})
    day = (dt.date(2013, 1, 1) - dt.date(1970, 1, 1)).days
    assert rt.resolve(day) == (5.0, True)
    assert rt.resolve(day + 7) == (5.0, True)
    assert rt.resolve(day + 8) == (0.0, False)
    assert rt.resolve(day - 1) == (0.0, False)
