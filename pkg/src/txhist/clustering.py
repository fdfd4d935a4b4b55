"""Common-spend entity clustering and per-subject transaction histories.

Addresses spent together in one transaction are assumed to share an owner.
The closure of that relation over all transactions partitions addresses
into entities.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import Category, Transaction, TransactionHistory
from .summarize import assign_role


class UnionFind:
    """Disjoint sets over hashable items; path halving, union by size."""

    def __init__(self) -> None:
        self._parent: dict = {}
        self._size: dict = {}

    def add(self, x) -> None:
        if x not in self._parent:
            self._parent[x] = x
            self._size[x] = 1

    def find(self, x):
        parent = self._parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self._size[ra] < self._size[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._size[ra] += self._size[rb]
        return ra

    def __contains__(self, x) -> bool:
        return x in self._parent

    def __iter__(self):
        return iter(self._parent)

    def groups(self) -> list[list]:
        out: dict = {}
        for x in self._parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


@dataclass(frozen=True)
class EntityMap:
    entity_of: Mapping[str, int]
    members: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        for eid, addrs in enumerate(self.members):
            for a in addrs:
                if self.entity_of.get(a) != eid:
                    raise ValueError(f"address {a} inconsistent with entity {eid}")
        if sum(len(m) for m in self.members) != len(self.entity_of):
            raise ValueError("entity map and member lists disagree")

    def __len__(self) -> int:
        return len(self.members)

    def members_of(self, entity_id: int) -> tuple[str, ...]:
        if not 0 <= entity_id < len(self.members):
            raise KeyError(f"unknown entity id {entity_id}")
        return self.members[entity_id]

    def size_histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(len(m) for m in self.members).items()))


def build_entities(
    transactions: Iterable[Transaction], extra_addresses: Iterable[str] = ()
) -> EntityMap:
    """Cluster every address that appears in some non-coinbase input.

    ``extra_addresses`` (typically labeled addresses) become singleton
    entities when no input links them to anything. Entity ids follow the
    order of each entity's smallest member address.
    """
    uf = UnionFind()
    for tx in transactions:
        if tx.is_coinbase:
            continue
        addrs = iter(i.address for i in tx.inputs)
        first = next(addrs)
        uf.add(first)
        for a in addrs:
            uf.add(a)
            uf.union(first, a)
    for a in extra_addresses:
        uf.add(a)
    groups = sorted(sorted(g) for g in uf.groups())
    entity_of = {a: eid for eid, g in enumerate(groups) for a in g}
    return EntityMap(entity_of, tuple(tuple(g) for g in groups))


def address_index(transactions: Iterable[Transaction]) -> dict[str, list[Transaction]]:
    """Per-address list of transactions mentioning it, canonically sorted.

    Repeated records with one txid are collapsed; conflicting ones raise.
    """
    by_txid: dict[str, Transaction] = {}
    for tx in transactions:
        prev = by_txid.get(tx.txid)
        if prev is None:
            by_txid[tx.txid] = tx
        elif prev != tx:
            raise ValueError(f"conflicting records for txid {tx.txid}")
    index: dict[str, list[Transaction]] = {}
    for tx in sorted(by_txid.values(), key=lambda t: t.sort_key):
        seen = set()
        for end in tx.inputs + tx.outputs:
            a = end.address
            if a not in seen:
                seen.add(a)
                index.setdefault(a, []).append(tx)
    return index


def history_for(
    subject: str,
    addresses: Iterable[str],
    index: Mapping[str, list[Transaction]],
    category: Category | None = None,
    max_tx: int | None = None,
) -> TransactionHistory:
    addrs = frozenset(addresses)
    by_txid: dict[str, Transaction] = {}
    for a in addrs:
        for tx in index.get(a, ()):
            by_txid[tx.txid] = tx
    txs = sorted(by_txid.values(), key=lambda t: t.sort_key)
    if max_tx is not None:
        txs = txs[:max_tx]
    entries = tuple((tx, assign_role(tx, addrs)) for tx in txs)
    return TransactionHistory(subject, addrs, entries, category)


def address_history(address: str, index, category: Category | None = None,
                    max_tx: int | None = None) -> TransactionHistory:
    return history_for(address, (address,), index, category, max_tx)


def entity_history(entity_id: int, entities: EntityMap, index,
                   category: Category | None = None, max_tx: int | None = None) -> TransactionHistory:
    members = entities.members_of(entity_id)
    return history_for(str(entity_id), members, index, category, max_tx)


class LabelConflict(ValueError):
    pass


def entity_labels(
    entities: EntityMap, labels: Mapping[str, Category], policy: str = "error"
) -> dict[int, Category]:
    """Category per entity from its labeled members.

    ``policy="error"`` rejects entities whose members carry different
    categories; ``"majority"`` takes the most frequent one, ties to the lower
    category ordinal.
    """
    if policy not in ("error", "majority"):
        raise ValueError(f"unknown label-conflict policy {policy!r}")
    votes: dict[int, Counter] = {}
    for addr, cat in labels.items():
        eid = entities.entity_of.get(addr)
        if eid is not None:
            votes.setdefault(eid, Counter())[cat] += 1
    out = {}
    for eid in sorted(votes):
        counts = votes[eid]
        if len(counts) > 1 and policy == "error":
            names = ", ".join(sorted(c.name for c in counts))
            raise LabelConflict(f"entity {eid} has conflicting labels: {names}")
        out[eid] = min(counts, key=lambda c: (-counts[c], int(c)))
    return out
