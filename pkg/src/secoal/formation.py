"""Distributed coalition formation: merge/split passes, traces, stability checks.

One formation run alternates a merge pass and a split pass until a full
alternation changes nothing. Passes visit coalitions in canonical order
(blocks sorted by smallest member) and use accept-first semantics: the first
Pareto-preferred candidate executes immediately. Merge candidates are subsets
of the discovered neighbors whose union stays pairwise inside the discovery
radius; they are scanned by increasing cardinality, then increasing merged
size, then lexicographically, and a freshly merged coalition keeps merging
until nothing more is preferred. Split candidates are the set partitions of a
coalition into blocks of legal size, fewest blocks first.

The verifiers check the two stability notions from the defection-function
framework: is_dhp_stable (no coalition subset wants to merge, no coalition
wants to split) and check_dc_partition (the stronger condition pair whose
satisfiable instances are the unique merge-split outcome).
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import RoundCapExceeded, TooLargeToVerify, ValidationError
from .game import (NEG_INF, PayoffCache, collection_payoffs, is_legal_size,
                   batch_coalition_payoffs, pareto_prefers)
from .geometry import NetworkState
from .partitions import (canonical_coalition, canonical_partition,
                         singleton_partition, size_constrained_partitions)

REASON_PARETO = "pareto"
REASON_INFEASIBLE = "infeasible"

# Exhaustive-verification guards: splitting enumerates set partitions of each
# block, merging enumerates subsets of blocks.
_VERIFY_MAX_BLOCK = 10
_VERIFY_MAX_BLOCKS = 16
_VERIFY_MAX_PLAYERS = 10


@dataclass(frozen=True)
class FormationConfig:
    """Knobs of the formation engine.

    max_merge_set bounds how many coalitions can merge in one step; the
    default (None) resolves to max(4, K + 1) so that a legal coalition can
    still assemble from singletons whatever the eavesdropper count.
    """

    protocol: str = "df"
    max_merge_set: int | None = None
    max_coalition_size: int = 12
    max_rounds: int = 1000

    def __post_init__(self):
        if self.protocol not in ("df", "af"):
            raise ValidationError(f"unknown protocol {self.protocol!r}")
        if self.max_merge_set is not None and self.max_merge_set < 2:
            raise ValidationError("max_merge_set must be >= 2")
        if self.max_coalition_size < 2:
            raise ValidationError("max_coalition_size must be >= 2")
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be >= 1")

    def merge_cap(self, n_eavesdroppers: int) -> int:
        if self.max_merge_set is not None:
            return self.max_merge_set
        return max(4, n_eavesdroppers + 1)


@dataclass(frozen=True)
class TraceEvent:
    """One executed merge or split, with payoffs before and after.

    payoffs_* align with the sorted player tuple. reason is "pareto" for
    ordinary rule applications and "infeasible" for dissolutions of coalitions
    stretched beyond the discovery radius by mobility.
    """

    round_index: int
    kind: str
    before: tuple[tuple[int, ...], ...]
    after: tuple[tuple[int, ...], ...]
    players: tuple[int, ...]
    payoffs_before: tuple[float, ...]
    payoffs_after: tuple[float, ...]
    t_s: float = 0.0
    reason: str = REASON_PARETO

    def to_json(self) -> dict:
        return {
            "round": self.round_index,
            "kind": self.kind,
            "before": [list(b) for b in self.before],
            "after": [list(b) for b in self.after],
            "players": list(self.players),
            "payoffs_before": list(self.payoffs_before),
            "payoffs_after": list(self.payoffs_after),
            "t_s": self.t_s,
            "reason": self.reason,
        }


@dataclass
class FormationTrace:
    """Ordered event log of a formation run (or several chained runs)."""

    events: list[TraceEvent] = field(default_factory=list)

    @property
    def n_merges(self) -> int:
        return sum(1 for e in self.events if e.kind == "merge")

    @property
    def n_splits(self) -> int:
        return sum(1 for e in self.events if e.kind == "split")

    def append(self, event: TraceEvent) -> None:
        self.events.append(event)

    def replay(self, initial) -> tuple[tuple[int, ...], ...]:
        """Re-apply every event to the initial partition; returns the result."""
        current = set(canonical_partition(initial))
        for ev in self.events:
            for block in ev.before:
                current.remove(block)
            current.update(ev.after)
        return canonical_partition(current)


def validate_partition(partition, n_users: int) -> tuple[tuple[int, ...], ...]:
    blocks = [tuple(b) for b in partition]
    if any(not b for b in blocks):
        raise ValidationError("empty coalition in partition")
    part = canonical_partition(blocks)
    seen: list[int] = []
    for block in part:
        seen.extend(block)
    if sorted(seen) != list(range(n_users)):
        raise ValidationError("blocks must partition the full user set")
    return part


def discover_neighbors(partition, state: NetworkState) -> dict:
    """Map each coalition to the coalitions it could legally merge with.

    B is a candidate for A iff every pair of users in A union B lies within
    the discovery radius (the pairwise characterization of the intersection-
    of-circles region).
    """
    blocks = canonical_partition(partition)
    within = state.tables().within
    out = {b: set() for b in blocks}
    for a, b in itertools.combinations(blocks, 2):
        if _union_within(a + b, within):
            out[a].add(b)
            out[b].add(a)
    return out


def _union_within(members, within: np.ndarray) -> bool:
    idx = np.fromiter(members, dtype=int)
    return bool(within[np.ix_(idx, idx)].all())


def _cliques_of_size(adj: list[int], size: int):
    """Index tuples of mutually adjacent vertices, lexicographic order."""
    p = len(adj)
    full = (1 << p) - 1

    def grow(chosen: list[int], allowed: int, start: int):
        if len(chosen) == size:
            yield tuple(chosen)
            return
        # Not enough vertices left to finish the clique.
        for v in range(start, p - (size - len(chosen)) + 1):
            if (allowed >> v) & 1:
                chosen.append(v)
                yield from grow(chosen, allowed & adj[v], v + 1)
                chosen.pop()

    yield from grow([], full, 0)


class _MergeScan:
    """Per-pass state for candidate generation and batched evaluation."""

    def __init__(self, cfg: FormationConfig, state: NetworkState, cache: PayoffCache):
        self.state = state
        self.cache = cache
        self.within = state.tables().within
        self.k = state.n_eavesdroppers
        self.merge_cap = cfg.merge_cap(self.k)
        self.size_cap = cfg.max_coalition_size
        self._pair_memo: dict[tuple, bool] = {}
        # Unions already found not-preferred this pass. Payoffs depend only on
        # the union's members and every player's reference payoff only rises
        # within a pass, so a rejection can never flip back.
        self._rejected: set[tuple[int, ...]] = set()

    def pair_ok(self, a, b) -> bool:
        key = (a, b) if a < b else (b, a)
        found = self._pair_memo.get(key)
        if found is None:
            found = _union_within(a + b, self.within)
            self._pair_memo[key] = found
        return found

    def find_merge(self, coalition, alive, cur_phi: np.ndarray):
        """First preferred merge for `coalition`, or None.

        Returns (union, parts, payoff vector aligned with sorted union).
        """
        partners = sorted((b for b in alive if b != coalition and self.pair_ok(coalition, b)),
                          key=lambda b: b[0])
        if not partners:
            return None
        p = len(partners)
        adj = [0] * p
        for i, j in itertools.combinations(range(p), 2):
            if self.pair_ok(partners[i], partners[j]):
                adj[i] |= 1 << j
                adj[j] |= 1 << i
        complete = all(bin(a).count("1") == p - 1 for a in adj)
        psizes = [len(b) for b in partners]
        sizes_desc = sorted(psizes, reverse=True)
        sizes_asc = sizes_desc[::-1]
        base = len(coalition)
        for cardinality in range(1, min(self.merge_cap - 1, p) + 1):
            # No clique of this cardinality can produce a coalition of legal,
            # under-cap size: check the achievable union-size envelope first.
            largest = base + sum(sizes_desc[:cardinality])
            smallest = base + sum(sizes_asc[:cardinality])
            if smallest > self.size_cap or not any(
                    is_legal_size(s, self.k) for s in range(smallest, largest + 1)):
                continue
            if complete:
                combos = itertools.combinations(range(p), cardinality)
            else:
                combos = _cliques_of_size(adj, cardinality)
            candidates = []
            for combo in combos:
                size = base + sum(psizes[v] for v in combo)
                if size > self.size_cap or not is_legal_size(size, self.k):
                    continue
                parts = [coalition] + [partners[v] for v in combo]
                union = canonical_coalition(itertools.chain.from_iterable(parts))
                if union in self._rejected:
                    continue
                candidates.append((size, union, parts))
            if not candidates:
                continue
            candidates.sort(key=lambda c: c[0])  # stable: keeps lex order per size
            hit = self._first_preferred(candidates, cur_phi)
            if hit is not None:
                return hit
        return None

    def _first_preferred(self, candidates, cur_phi: np.ndarray):
        # Evaluate whole same-size groups at once, then honor candidate order.
        # Payoff vectors are memoized in the cache, so a union scanned from
        # several coalitions' turns is only ever computed once.
        by_size: dict[int, list[int]] = {}
        for pos, (size, _, _) in enumerate(candidates):
            by_size.setdefault(size, []).append(pos)
        payoff_rows: dict[int, np.ndarray] = {}
        preferred = np.zeros(len(candidates), dtype=bool)
        memo = self.cache._memo
        for size, positions in by_size.items():
            keys = [candidates[p][1] for p in positions]
            fresh = [i for i, key in enumerate(keys) if key not in memo]
            if fresh:
                rows = np.array([keys[i] for i in fresh], dtype=int)
                phis = batch_coalition_payoffs(rows, self.state, self.cache.protocol)
                for local, i in enumerate(fresh):
                    memo[keys[i]] = phis[local]
            group = np.stack([memo[key] for key in keys])
            cur = cur_phi[np.array(keys, dtype=int)]
            ok = (group >= cur).all(axis=1) & (group > cur).any(axis=1)
            for local, p in enumerate(positions):
                payoff_rows[p] = group[local]
                preferred[p] = ok[local]
                if not ok[local]:
                    self._rejected.add(keys[local])
        for pos in range(len(candidates)):
            if preferred[pos]:
                _, union, parts = candidates[pos]
                return union, parts, payoff_rows[pos]
        return None


def merge_pass(partition, cfg: FormationConfig, state: NetworkState,
               cache: PayoffCache | None = None, *, round_index: int = 0,
               t_s: float = 0.0, trace: FormationTrace | None = None):
    """One full merge pass; every coalition takes a turn in canonical order."""
    if cache is None:
        cache = PayoffCache(state, cfg.protocol)
    if trace is None:
        trace = FormationTrace()
    blocks = validate_partition(partition, state.n_users)
    cur_phi = np.empty(state.n_users)
    for b in blocks:
        cur_phi[list(b)] = cache.payoffs(b)
    scan = _MergeScan(cfg, state, cache)
    alive = set(blocks)
    queue = deque(blocks)
    while queue:
        coalition = queue.popleft()
        if coalition not in alive:
            continue
        while True:
            hit = scan.find_merge(coalition, alive, cur_phi)
            if hit is None:
                break
            union, parts, phi_vec = hit
            alive.difference_update(parts)
            alive.add(union)
            cache.store(union, phi_vec)
            players = union
            trace.append(TraceEvent(
                round_index=round_index, kind="merge",
                before=canonical_partition(parts), after=(union,),
                players=players,
                payoffs_before=tuple(float(x) for x in cur_phi[list(players)]),
                payoffs_after=tuple(float(x) for x in phi_vec),
                t_s=t_s))
            cur_phi[list(union)] = phi_vec
            coalition = union
    return canonical_partition(alive), trace


def split_pass(partition, cfg: FormationConfig, state: NetworkState,
               cache: PayoffCache | None = None, *, round_index: int = 0,
               t_s: float = 0.0, trace: FormationTrace | None = None):
    """One full split pass; freshly split blocks are immediately re-examined."""
    if cache is None:
        cache = PayoffCache(state, cfg.protocol)
    if trace is None:
        trace = FormationTrace()
    blocks = validate_partition(partition, state.n_users)
    k = state.n_eavesdroppers
    queue = deque(blocks)
    done = []
    while queue:
        coalition = queue.popleft()
        if len(coalition) == 1:
            done.append(coalition)
            continue
        cur_vec = cache.payoffs(coalition)
        cur = dict(zip(coalition, cur_vec))
        # Only legal-size candidates: a preferred split containing an illegal
        # block stays preferred after dissolving that block into singletons
        # (its members go from -inf to their finite singleton rates), so the
        # restriction never hides a split opportunity -- and the engine never
        # forms an illegal-size coalition.
        found = None
        for cand in size_constrained_partitions(
                coalition, lambda s: is_legal_size(s, k), min_blocks=2):
            phi = collection_payoffs(cand, cache)
            if pareto_prefers(phi, cur):
                found = (cand, phi)
                break
        if found is None:
            done.append(coalition)
            continue
        cand, phi = found
        trace.append(TraceEvent(
            round_index=round_index, kind="split",
            before=(coalition,), after=canonical_partition(cand),
            players=coalition,
            payoffs_before=tuple(float(x) for x in cur_vec),
            payoffs_after=tuple(float(phi[p]) for p in coalition),
            t_s=t_s))
        queue.extendleft(reversed(canonical_partition(cand)))
    return canonical_partition(done), trace


def dissolve_infeasible(partition, state: NetworkState, cache: PayoffCache,
                        *, round_index: int = 0, t_s: float = 0.0,
                        trace: FormationTrace | None = None):
    """Break up coalitions whose members drifted beyond the discovery radius.

    Mobility can stretch a formed coalition past the range where information
    exchange is possible; its members are stranded at -inf and no Pareto
    agreement governs them. Such coalitions dissolve into singletons (logged
    with reason "infeasible") before the next formation run.
    """
    if trace is None:
        trace = FormationTrace()
    within = state.tables().within
    out = []
    for block in validate_partition(partition, state.n_users):
        if len(block) == 1 or _union_within(block, within):
            out.append(block)
            continue
        singles = tuple((p,) for p in block)
        after_phi = [float(cache.payoffs((p,))[0]) for p in block]
        trace.append(TraceEvent(
            round_index=round_index, kind="split",
            before=(block,), after=singles, players=block,
            payoffs_before=tuple(float(x) for x in cache.payoffs(block)),
            payoffs_after=tuple(after_phi),
            t_s=t_s, reason=REASON_INFEASIBLE))
        out.extend(singles)
    return canonical_partition(out), trace


@dataclass
class FormationResult:
    partition: tuple[tuple[int, ...], ...]
    trace: FormationTrace
    payoffs: dict[int, float]
    rounds: int
    cache: PayoffCache


def run_formation(initial, cfg: FormationConfig, state: NetworkState, *,
                  cache: PayoffCache | None = None, t_s: float = 0.0,
                  trace: FormationTrace | None = None) -> FormationResult:
    """Alternate merge and split passes until one alternation changes nothing."""
    if cache is None:
        cache = PayoffCache(state, cfg.protocol)
    if trace is None:
        trace = FormationTrace()
    partition = validate_partition(initial, state.n_users)
    rounds = 0
    for round_index in range(cfg.max_rounds):
        after_merge, _ = merge_pass(partition, cfg, state, cache,
                                    round_index=round_index, t_s=t_s, trace=trace)
        after_split, _ = split_pass(after_merge, cfg, state, cache,
                                    round_index=round_index, t_s=t_s, trace=trace)
        rounds = round_index + 1
        unchanged = after_merge == partition and after_split == after_merge
        partition = after_split
        if unchanged:
            break
    else:
        raise RoundCapExceeded(f"no convergence after {cfg.max_rounds} rounds")
    return FormationResult(partition=partition, trace=trace,
                           payoffs=collection_payoffs(partition, cache),
                           rounds=rounds, cache=cache)


def default_initial_partition(state: NetworkState) -> tuple[tuple[int, ...], ...]:
    return singleton_partition(state.n_users)


@dataclass
class StabilityReport:
    stable: bool
    witness: tuple | None = None

    def __bool__(self) -> bool:
        return self.stable


def is_dhp_stable(partition, cfg: FormationConfig, state: NetworkState,
                  cache: PayoffCache | None = None) -> StabilityReport:
    """Exhaustively verify that no coalition subset merges and no coalition
    splits with Pareto preference.

    Verification ignores cfg's enumeration caps (they bound the engine's
    search, not the stability notion); cfg supplies the protocol. Unions that
    violate the discovery radius are skipped when all current payoffs are
    finite, since they would strand a member at -inf.
    """
    blocks = validate_partition(partition, state.n_users)
    if any(len(b) > _VERIFY_MAX_BLOCK for b in blocks):
        raise TooLargeToVerify(f"a block exceeds {_VERIFY_MAX_BLOCK} members")
    if len(blocks) > _VERIFY_MAX_BLOCKS:
        raise TooLargeToVerify(f"more than {_VERIFY_MAX_BLOCKS} blocks")
    if cache is None:
        cache = PayoffCache(state, cfg.protocol)
    k = state.n_eavesdroppers
    within = state.tables().within
    current = collection_payoffs(blocks, cache)
    all_finite = all(v > NEG_INF for v in current.values())

    for block in blocks:
        if len(block) == 1:
            continue
        cur = cache.payoff_map(block)
        # Legal-size candidates suffice: dissolving any illegal block of a
        # preferred split into singletons preserves preference (see split_pass).
        for cand in size_constrained_partitions(
                block, lambda s: is_legal_size(s, k), min_blocks=2):
            if pareto_prefers(collection_payoffs(cand, cache), cur):
                return StabilityReport(False, ("split", block, cand))

    for count in range(2, len(blocks) + 1):
        for combo in itertools.combinations(blocks, count):
            union = canonical_coalition(itertools.chain.from_iterable(combo))
            # An illegal-size union scores -inf for everyone and can never be
            # strictly preferred by anybody.
            if not is_legal_size(len(union), k):
                continue
            if all_finite and not _union_within(union, within):
                continue
            phi = cache.payoff_map(union)
            cur = {p: current[p] for p in union}
            if pareto_prefers(phi, cur):
                return StabilityReport(False, ("merge", combo, union))
    return StabilityReport(True, None)


def _split_pairs(block):
    """Unordered pairs of disjoint non-empty sub-coalitions of the block."""
    members = list(block)
    for assignment in itertools.product((0, 1, 2), repeat=len(members)):
        s1 = tuple(m for m, a in zip(members, assignment) if a == 1)
        s2 = tuple(m for m, a in zip(members, assignment) if a == 2)
        if not s1 or not s2:
            continue
        # Canonical orientation: lowest assigned member sits in s1.
        if min(s1) > min(s2):
            continue
        yield s1, s2


def check_dc_partition(partition, state: NetworkState, protocol: str = "df",
                       cache: PayoffCache | None = None) -> bool:
    """Check the two conditions characterizing the strongly stable partition.

    Condition 1: inside every block, any two disjoint sub-coalitions prefer
    their union. Condition 2: every coalition straddling blocks is beaten by
    its projection onto the partition.
    """
    if state.n_users > _VERIFY_MAX_PLAYERS:
        raise TooLargeToVerify(f"more than {_VERIFY_MAX_PLAYERS} players")
    blocks = validate_partition(partition, state.n_users)
    if cache is None:
        cache = PayoffCache(state, protocol)

    for block in blocks:
        for s1, s2 in _split_pairs(block):
            union = canonical_coalition(s1 + s2)
            parts_phi = collection_payoffs((s1, s2), cache)
            if not pareto_prefers(cache.payoff_map(union), parts_phi):
                return False

    block_of = {}
    for bi, block in enumerate(blocks):
        for p in block:
            block_of[p] = bi
    players = list(range(state.n_users))
    for mask in range(1, 1 << state.n_users):
        group = [p for p in players if (mask >> p) & 1]
        if len(group) < 2 or len({block_of[p] for p in group}) < 2:
            continue
        by_block: dict[int, list[int]] = {}
        for p in group:
            by_block.setdefault(block_of[p], []).append(p)
        projection = canonical_partition(by_block.values())
        if not pareto_prefers(collection_payoffs(projection, cache),
                              cache.payoff_map(group)):
            return False
    return True


def find_dc_partition(state: NetworkState, protocol: str = "df",
                      cache: PayoffCache | None = None):
    """Exhaustive search for a partition meeting the strong-stability
    conditions; None when no partition qualifies.

    Only partitions with legal block sizes are scanned: a block of illegal
    size always contains a sub-pair whose union is protocol-infeasible, which
    violates condition 1 outright.
    """
    if state.n_users > _VERIFY_MAX_PLAYERS:
        raise TooLargeToVerify(f"more than {_VERIFY_MAX_PLAYERS} players")
    if cache is None:
        cache = PayoffCache(state, protocol)
    k = state.n_eavesdroppers
    for part in size_constrained_partitions(range(state.n_users),
                                            lambda s: is_legal_size(s, k)):
        if check_dc_partition(part, state, protocol, cache):
            return part
    return None
