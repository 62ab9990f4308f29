"""Canonical forms and constrained enumeration of set partitions.

Coalitions are tuples of sorted player ids; partitions are tuples of
coalitions ordered by their smallest member. Enumeration follows restricted
growth strings, so for a fixed block count the order is deterministic and
independent of input order.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from itertools import combinations


def canonical_coalition(members: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(members))


def canonical_partition(blocks: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted((canonical_coalition(b) for b in blocks), key=lambda b: b[0]))


def singleton_partition(n_players: int) -> tuple[tuple[int, ...], ...]:
    return tuple((i,) for i in range(n_players))


def partition_players(partition) -> tuple[int, ...]:
    return tuple(sorted(p for block in partition for p in block))


def partitions_into_blocks(items: Iterable[int], n_blocks: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All partitions of items into exactly n_blocks, in restricted-growth order.

    The first item always lands in the first block, so yielded partitions are
    canonical as-is.
    """
    items = sorted(items)
    m = len(items)
    if n_blocks < 1 or n_blocks > m:
        return
    blocks: list[list[int]] = []

    def grow(i: int) -> Iterator[tuple[tuple[int, ...], ...]]:
        if i == m:
            if len(blocks) == n_blocks:
                yield tuple(tuple(b) for b in blocks)
            return
        # Prune branches that cannot reach n_blocks with the items left.
        must_open = n_blocks - len(blocks)
        remaining = m - i
        for j in range(len(blocks)):
            if remaining > must_open:
                blocks[j].append(items[i])
                yield from grow(i + 1)
                blocks[j].pop()
        if len(blocks) < n_blocks:
            blocks.append([items[i]])
            yield from grow(i + 1)
            blocks.pop()

    yield from grow(0)


def all_partitions(items: Iterable[int], min_blocks: int = 1,
                   max_blocks: int | None = None,
                   block_ok=None) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Partitions of items ordered by increasing block count.

    block_ok, when given, filters on block size: partitions containing any
    block with block_ok(len(block)) false are skipped.
    """
    items = sorted(items)
    top = len(items) if max_blocks is None else min(max_blocks, len(items))
    for b in range(max(1, min_blocks), top + 1):
        for part in partitions_into_blocks(items, b):
            if block_ok is not None and not all(block_ok(len(blk)) for blk in part):
                continue
            yield part


def size_constrained_partitions(items: Iterable[int], allowed,
                                min_blocks: int = 1,
                                ) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Partitions whose every block size satisfies allowed(size).

    Unlike filtering all_partitions, work is proportional to the output: the
    recursion assigns the smallest remaining item a block of an allowed size,
    so no disallowed branch is ever expanded. Yield order is increasing block
    count, then lexicographic on the canonical form.
    """
    items = tuple(sorted(items))
    sizes = [s for s in range(1, len(items) + 1) if allowed(s)]

    def expand(rest: tuple[int, ...]):
        if not rest:
            yield ()
            return
        head, tail = rest[0], rest[1:]
        for s in sizes:
            if s > len(rest):
                break
            for partners in combinations(tail, s - 1):
                block = (head, *partners)
                taken = set(partners)
                remaining = tuple(x for x in tail if x not in taken)
                for rest_part in expand(remaining):
                    yield (block, *rest_part)

    found = [p for p in expand(items) if len(p) >= min_blocks]
    found.sort(key=lambda p: (len(p), p))
    yield from found


def bell_number(n: int) -> int:
    """Number of partitions of an n-set (triangle recurrence)."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]
