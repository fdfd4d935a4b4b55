"""Independent second implementations used as test oracles.

They are deliberately naive: every intermediate list is materialized, all
arithmetic is rational (``Fraction``) and square roots go through
``Decimal`` at 60 digits. Nothing here imports from the package except the
plain record types.
"""

from __future__ import annotations

import datetime as dt
from decimal import Decimal, localcontext
from fractions import Fraction

SAT = 100_000_000
EPOCH = dt.date(1970, 1, 1)


def _sqrt(q: Fraction) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = 60
        return (Decimal(q.numerator) / Decimal(q.denominator)).sqrt()


def _ratio_over_sqrt3(num: Fraction, m2: Fraction) -> float:
    """num / m2**1.5 at high precision."""
    with localcontext() as ctx:
        ctx.prec = 60
        d = _sqrt(m2) ** 3
        return float(Decimal(num.numerator) / Decimal(num.denominator) / d)


def moments(xs, min_shift: bool = False) -> tuple[float, float, float, float]:
    """Population mean, variance, skewness, kurtosis with the zero rules for
    degenerate samples; with ``min_shift`` the mean is taken after
    subtracting the minimum."""
    xs = [Fraction(x) for x in xs]
    n = len(xs)
    if n == 0:
        return (0.0, 0.0, 0.0, 0.0)
    mean = sum(xs) / n
    m1 = mean - min(xs) if min_shift else mean
    dev = [x - mean for x in xs]
    m2 = sum(d**2 for d in dev) / n
    if n == 1 or m2 == 0:
        return (float(m1), 0.0, 0.0, 0.0)
    c3 = sum(d**3 for d in dev) / n
    c4 = sum(d**4 for d in dev) / n
    return (float(m1), float(m2), _ratio_over_sqrt3(c3, m2), float(c4 / m2**2))


# -- summarizer ----------------------------------------------------------------


def rate_for(rates: dict[dt.date, float], day: dt.date) -> float:
    for back in range(8):
        r = rates.get(day - dt.timedelta(days=back))
        if r is not None:
            return r
    return 0.0


def usd(sat: int, rate: float) -> float:
    # the documented conversion, one double per transaction
    return sat / 1e8 * rate


def magnitude_index(value: float) -> int | None:
    if value <= 0:
        return None
    q = Fraction(value)
    e = 0
    while Fraction(10) ** e > q:
        e -= 1
    while Fraction(10) ** (e + 1) <= q:
        e += 1
    return min(max(e, -3), 6) + 3


def _pstdev(values: list[Fraction]) -> float:
    n = len(values)
    mean = sum(values) / n
    return float(_sqrt(sum((v - mean) ** 2 for v in values) / n))


def summarize(txs, addresses, rates: dict[dt.date, float]) -> list[float]:
    """The 64 features of the subject owning ``addresses`` over ``txs``
    (any order; they are sorted here by height, position, txid)."""
    addresses = set(addresses)
    txs = sorted(
        (t for t in txs
         if any(e.address in addresses for e in t.inputs + t.outputs)),
        key=lambda t: (t.block_height, t.position_in_block, t.txid),
    )
    assert txs, "empty history"
    rows = []
    for t in txs:
        own_in = [i.value_satoshi for i in t.inputs if i.address in addresses]
        own_out = [o.value_satoshi for o in t.outputs if o.address in addresses]
        if any(i.address == "COINBASE" for i in t.inputs):
            kind = "coinbase"
        elif own_in:
            kind = "spent"
        else:
            kind = "received"
        day = EPOCH + dt.timedelta(days=t.timestamp // 86400)
        rows.append({
            "tx": t,
            "kind": kind,
            "payback": bool(own_in) and bool(own_out),
            "out": sum(own_in),
            "in": sum(own_out),
            "day": day,
            "rate": rate_for(rates, day),
        })
    n = len(rows)
    days = [r["day"] for r in rows]
    lifetime = (max(days) - min(days)).days
    spent = [r for r in rows if r["kind"] == "spent"]
    received = [r for r in rows if r["kind"] == "received"]
    coinbase = [r for r in rows if r["kind"] == "coinbase"]
    payback = [r for r in rows if r["payback"]]

    def bins(side, key):
        idx = [magnitude_index(usd(r[key], r["rate"])) for r in side]
        idx = [i for i in idx if i is not None]
        return [Fraction(idx.count(b), len(idx)) if idx else Fraction(0) for b in range(10)]

    basic = [
        Fraction(n, max(lifetime, 1)),
        Fraction(len(received), n),
        Fraction(len(coinbase), n),
        *bins(spent, "out"),
        *bins(received, "in"),
        Fraction(len(payback), n),
        Fraction(sum(len(r["tx"].inputs) for r in spent), len(spent)) if spent else Fraction(0),
        Fraction(sum(len(r["tx"].outputs) for r in spent), len(spent)) if spent else Fraction(0),
    ]
    balances_btc, balances_usd = [], []
    b_sat, b_usd = 0, Fraction(0)
    for r in rows:
        b_sat += r["in"] - r["out"]
        b_usd += Fraction(usd(r["in"], r["rate"])) - Fraction(usd(r["out"], r["rate"]))
        balances_btc.append(Fraction(b_sat, SAT))
        balances_usd.append(b_usd)
    extra = [
        float(lifetime),
        float(Fraction(sum(r["out"] for r in spent), SAT)),
        float(Fraction(sum(r["in"] for r in rows), SAT)),
        float(sum((Fraction(usd(r["out"], r["rate"])) for r in spent), Fraction(0))),
        float(sum((Fraction(usd(r["in"], r["rate"])) for r in rows), Fraction(0))),
        float(n), float(len(spent)), float(len(received)),
        float(len(coinbase)), float(len(payback)),
        float(sum(balances_btc) / n), _pstdev(balances_btc),
        float(sum(balances_usd) / n), _pstdev(balances_usd),
    ]
    out = [float(v) for v in basic] + extra
    heights = [r["tx"].block_height for r in rows]
    for group in (rows, spent, received, coinbase, payback):
        out += moments([r["tx"].block_height for r in group], min_shift=True)
    out += moments([b - a for a, b in zip(heights, heights[1:])])
    assert len(out) == 64
    return out


# -- clustering ------------------------------------------------------------------


def entity_partition(txs, extra=()) -> list[list[str]]:
    """Connected components of the co-spend relation by repeated merging
    until nothing changes; sorted members, groups ordered by first member."""
    groups: list[set[str]] = []
    for t in txs:
        ins = {i.address for i in t.inputs if i.address != "COINBASE"}
        if ins:
            groups.append(set(ins))
    groups += [{a} for a in extra]
    changed = True
    while changed:
        changed = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if groups[i] & groups[j]:
                    groups[i] |= groups.pop(j)
                    changed = True
                    break
            if changed:
                break
    return sorted(sorted(g) for g in groups)
