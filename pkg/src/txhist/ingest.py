"""Readers and writers for the three input files.

Transaction records are JSON lines::

    {"txid":"<hex64>","height":<uint>,"time":<unix-seconds>,"pos":<uint>,
     "in":[{"addr":"<string|COINBASE>","sat":<uint>},...],
     "out":[{"addr":"<string>","sat":<uint>},...]}

Rates are CSV ``date,usd_per_btc`` with ISO dates; labels are CSV
``address,category``. Addresses are case-sensitive, category names are not.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import re
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .model import (
    Category,
    RateTable,
    Transaction,
    TxInput,
    TxOutput,
)

_HEX64 = re.compile(r"[0-9a-fA-F]{64}\Z")
_RECORD_KEYS = ("txid", "height", "time", "pos", "in", "out")


class IngestError(ValueError):
    """Bad input data; ``line`` is 1-based (header is line 1 for CSV)."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ParseError(IngestError):
    pass


class ValidationError(IngestError):
    pass


@dataclass
class IngestStats:
    records: int = 0
    skipped: int = 0


def _lines(stream: IO[bytes] | IO[str] | Iterable[bytes | str]) -> Iterator[str]:
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield raw


def _uint(obj: dict, key: str, what: str) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ValidationError(f"{what} {key!r} must be an integer, got {v!r}")
    if v < 0:
        raise ValidationError(f"{what} {key!r} must be non-negative, got {v}")
    return v


def _endpoint(obj, what: str) -> tuple[str, int]:
    if not isinstance(obj, dict) or set(obj) != {"addr", "sat"}:
        raise ValidationError(f"{what} must be an object with keys 'addr' and 'sat'")
    addr = obj["addr"]
    if not isinstance(addr, str) or not addr:
        raise ValidationError(f"{what} address must be a non-empty string")
    return addr, _uint(obj, "sat", what)


def decode_transaction(text: str) -> Transaction:
    """Decode one record; raises :class:`ParseError` or :class:`ValidationError`
    without line context."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object")
    missing = [k for k in _RECORD_KEYS if k not in obj]
    if missing:
        raise ParseError(f"missing keys: {', '.join(missing)}")
    extra = sorted(set(obj) - set(_RECORD_KEYS))
    if extra:
        raise ParseError(f"unexpected keys: {', '.join(extra)}")
    txid = obj["txid"]
    if not isinstance(txid, str) or not _HEX64.match(txid):
        raise ValidationError(f"txid must be 64 hex characters, got {txid!r}")
    height = _uint(obj, "height", "record")
    time = _uint(obj, "time", "record")
    pos = _uint(obj, "pos", "record")
    if not isinstance(obj["in"], list) or not isinstance(obj["out"], list):
        raise ParseError("'in' and 'out' must be arrays")
    inputs = tuple(TxInput(*_endpoint(e, f"input {k}")) for k, e in enumerate(obj["in"]))
    outputs = tuple(TxOutput(*_endpoint(e, f"output {k}")) for k, e in enumerate(obj["out"]))
    try:
        tx = Transaction(txid, height, time, inputs, outputs, pos)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return tx


def iter_transactions(
    stream,
    *,
    skip_invalid: bool = False,
    stats: IngestStats | None = None,
    source: str | None = None,
) -> Iterator[Transaction]:
    """Yield transactions in file order. Blank lines are ignored.

    With ``skip_invalid`` bad records are counted in ``stats.skipped``
    instead of raising.
    """
    stats = stats if stats is not None else IngestStats()
    for lineno, line in enumerate(_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            tx = decode_transaction(line)
        except IngestError as exc:
            if skip_invalid:
                stats.skipped += 1
                continue
            raise type(exc)(str(exc), line=lineno, source=source) from None
        stats.records += 1
        yield tx


def parse_transactions(stream, *, skip_invalid: bool = False, stats: IngestStats | None = None,
                       source: str | None = None) -> list[Transaction]:
    return list(iter_transactions(stream, skip_invalid=skip_invalid, stats=stats, source=source))


def encode_transaction(tx: Transaction) -> str:
    """Canonical single-line encoding (no trailing newline)."""
    rec = {
        "txid": tx.txid,
        "height": tx.block_height,
        "time": tx.timestamp,
        "pos": tx.position_in_block,
        "in": [{"addr": i.address, "sat": i.value_satoshi} for i in tx.inputs],
        "out": [{"addr": o.address, "sat": o.value_satoshi} for o in tx.outputs],
    }
    return json.dumps(rec, separators=(",", ":"), ensure_ascii=False)


def write_transactions(txs: Iterable[Transaction], stream: IO[str]) -> None:
    for tx in txs:
        stream.write(encode_transaction(tx))
        stream.write("\n")


def _csv_rows(stream, header: tuple[str, ...], source: str | None):
    text = io.TextIOWrapper(stream, encoding="utf-8", newline="") if _is_binary(stream) else stream
    reader = csv.reader(text)
    first = next(reader, None)
    if first is None:
        raise ParseError("empty file, expected a header", line=1, source=source)
    if tuple(c.strip() for c in first) != header:
        raise ParseError(f"expected header {','.join(header)!r}, got {','.join(first)!r}",
                         line=1, source=source)
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(row)}",
                             line=reader.line_num, source=source)
        yield reader.line_num, [c.strip() for c in row]


def _is_binary(stream) -> bool:
    return isinstance(stream, (io.BufferedIOBase, io.RawIOBase)) or "b" in getattr(stream, "mode", "")


def parse_rate_table(stream, *, source: str | None = None) -> RateTable:
    table: dict[dt.date, float] = {}
    for lineno, (date_s, rate_s) in _csv_rows(stream, ("date", "usd_per_btc"), source):
        try:
            date = dt.date.fromisoformat(date_s)
        except ValueError:
            raise ParseError(f"unparseable date {date_s!r}", line=lineno, source=source) from None
        try:
            rate = float(rate_s)
        except ValueError:
            raise ParseError(f"unparseable rate {rate_s!r}", line=lineno, source=source) from None
        if not rate > 0 or rate == float("inf"):
            raise ValidationError(f"rate must be positive and finite, got {rate_s}",
                                  line=lineno, source=source)
        if date in table:
            raise ValidationError(f"duplicate date {date.isoformat()}", line=lineno, source=source)
        table[date] = rate
    return RateTable(table)


def write_rate_table(rates: RateTable, stream: IO[str]) -> None:
    stream.write("date,usd_per_btc\n")
    for d in sorted(rates.rates):
        stream.write(f"{d.isoformat()},{rates.rates[d]!r}\n")


def parse_labels(stream, *, source: str | None = None) -> dict[str, Category]:
    labels: dict[str, Category] = {}
    for lineno, (addr, cat_s) in _csv_rows(stream, ("address", "category"), source):
        if not addr:
            raise ValidationError("empty address", line=lineno, source=source)
        try:
            cat = Category.parse(cat_s)
        except ValueError as exc:
            raise ValidationError(str(exc), line=lineno, source=source) from None
        prev = labels.get(addr)
        if prev is not None and prev != cat:
            raise ValidationError(
                f"address {addr} labeled both {prev.name} and {cat.name}", line=lineno, source=source
            )
        labels[addr] = cat
    return labels


def write_labels(labels: dict[str, Category], stream: IO[str]) -> None:
    stream.write("address,category\n")
    for addr in sorted(labels):
        stream.write(f"{addr},{labels[addr].name}\n")
