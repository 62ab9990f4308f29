"""Coalitional payoffs and the Pareto preference order between collections.

The game has non-transferable utility: each coalition S admits a single payoff
vector, one entry per member. For member i,

    payoff_i(S) = (rate_i(S) - leak_i(S))^+    if residual power > 0,
                  -inf                          otherwise,

where rate_i is the slot secrecy rate under the active protocol and leak_i is
the capacity granted to the best-placed eavesdropper while i broadcasts its
data to the farthest coalition partner during the exchange phase. Singletons
transmit noncooperatively at full power with no leak.

The formation engine evaluates thousands of candidate coalitions per run, so
the core evaluator is batched: batch_coalition_payoffs computes payoff vectors
for a whole stack of equal-size coalitions with stacked linear algebra. The
public coalition_value / coalition_payoff wrappers enforce the size rule
(|S| = 1 or |S| > K); the cache used internally by the engine and the
stability verifiers instead scores protocol-infeasible sizes as -inf, which
lets Pareto comparisons reject them without special cases.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidCoalitionSize, MismatchedPlayers
from .geometry import NetworkState
from .secrecy import NULL_RTOL, noncoop_rate, null_basis

PROTOCOL_DF = "df"
PROTOCOL_AF = "af"
PROTOCOLS = (PROTOCOL_DF, PROTOCOL_AF)

NEG_INF = float("-inf")

# Fixed number of refinement passes on the batched AF normal equations; the
# matrices are near-identity (see af_subspace_solve), so two passes leave the
# residual far below the 1e-9 target while keeping the pass count independent
# of batch composition.
_AF_BATCH_REFINE = 2


def is_legal_size(size: int, n_eavesdroppers: int) -> bool:
    """Coalition sizes the protocols support: singletons or strictly more than K."""
    return size == 1 or size > n_eavesdroppers


def batch_coalition_payoffs(unions: np.ndarray, state: NetworkState,
                            protocol: str) -> np.ndarray:
    """Payoff vectors for M equal-size coalitions, shape (M, m).

    unions holds member ids, one coalition per row, each row sorted ascending.
    Rows of protocol-infeasible size (1 < m <= K) come back all -inf.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    idxs = np.atleast_2d(np.asarray(unions, dtype=int))
    n_rows, m = idxs.shape
    if n_rows == 0:
        return np.zeros((0, m))
    t = state.tables()
    radio = state.radio
    sigma2 = radio.noise_variance_w

    if m == 1:
        flat = idxs[:, 0]
        cd = np.log2(1.0 + radio.total_slot_power_w * np.abs(t.h_own[flat]) ** 2 / sigma2)
        if state.n_eavesdroppers:
            ce = np.log2(1.0 + radio.total_slot_power_w * t.gmax2[flat] / sigma2)
        else:
            ce = 0.0
        return np.maximum(0.0, cd - ce)[:, None]

    if not is_legal_size(m, state.n_eavesdroppers):
        return np.full((n_rows, m), NEG_INF)

    pbar = t.cost_uu[idxs[:, :, None], idxs[:, None, :]].max(axis=2)
    pres = radio.total_slot_power_w - pbar
    alive = pres > 0.0
    if state.n_eavesdroppers:
        leak = 0.5 * np.log2(1.0 + pbar * t.gmax2[idxs] / sigma2)
    else:
        leak = np.zeros((n_rows, m))

    if protocol == PROTOCOL_DF:
        rate = _df_rates(idxs, pres, alive, state)
    else:
        rate = _af_rates(idxs, pbar, pres, alive, state)

    phi = np.full((n_rows, m), NEG_INF)
    phi[alive] = np.maximum(0.0, rate[alive] - leak[alive])
    return phi


def _df_projected_gain2(idxs: np.ndarray, state: NetworkState) -> np.ndarray:
    """||P h||^2 per row: energy of the destination channel inside the nulling
    subspace, via the Gram system of the eavesdropper columns (no SVD)."""
    t = state.tables()
    h = t.h_own[idxs]
    total = (np.abs(h) ** 2).sum(axis=1)
    k = state.n_eavesdroppers
    if k == 0:
        return total
    g = t.g[idxs, :]
    gram = np.einsum("rjk,rjl->rkl", g.conj(), g)
    rhs = np.einsum("rjk,rj->rk", g.conj(), h)
    try:
        sol = np.linalg.solve(gram, rhs[:, :, None])[:, :, 0]
        hproj2 = total - np.einsum("rk,rk->r", rhs.conj(), sol).real
    except np.linalg.LinAlgError:
        hproj2 = np.empty(len(idxs))
        for r in range(len(idxs)):
            z = null_basis(g[r])
            hproj2[r] = float(np.linalg.norm(z.conj().T @ h[r]) ** 2)
    return np.maximum(hproj2, 0.0)


def _df_rates(idxs, pres, alive, state: NetworkState) -> np.ndarray:
    sigma2 = state.radio.noise_variance_w
    hproj2 = _df_projected_gain2(idxs, state)
    rate = np.zeros_like(pres)
    rate[alive] = 0.5 * np.log2(
        1.0 + pres[alive] * np.broadcast_to(hproj2[:, None], pres.shape)[alive] / sigma2)
    return rate


def _null_bases(idxs: np.ndarray, state: NetworkState) -> np.ndarray:
    """Stacked orthonormal nulling bases, shape (M, m, m - K).

    For the minimum legal size (m = K + 1) the subspace is one-dimensional and
    is obtained from the residual of the destination channel against the
    eavesdropper columns; larger sizes use a stacked SVD. Rows with
    rank-deficient eavesdropper matrices (degenerate geometry) fall back to
    the scalar routine and only work when its basis has the stacked width.
    """
    t = state.tables()
    n_rows, m = idxs.shape
    k = state.n_eavesdroppers
    if k == 0:
        return np.broadcast_to(np.eye(m, dtype=complex), (n_rows, m, m)).copy()
    g = t.g[idxs, :]
    p = m - k
    if p == 1:
        h = t.h_own[idxs]
        gram = np.einsum("rjk,rjl->rkl", g.conj(), g)
        rhs = np.einsum("rjk,rj->rk", g.conj(), h)
        resid = h - np.einsum(
            "rjk,rk->rj", g, np.linalg.solve(gram, rhs[:, :, None])[:, :, 0])
        norms = np.linalg.norm(resid, axis=1)
        bad = norms <= 1e-10 * np.linalg.norm(h, axis=1)
        for r in np.flatnonzero(bad):
            z = null_basis(g[r])
            resid[r] = z[:, 0]
            norms[r] = 1.0
        return (resid / norms[:, None])[:, :, None]
    u, s, _ = np.linalg.svd(g)
    z = u[:, :, k:].copy()
    bad = s[:, -1] <= NULL_RTOL * s[:, 0]
    for r in np.flatnonzero(bad):
        zr = null_basis(g[r])
        z[r] = zr[:, :p] if zr.shape[1] >= p else np.pad(zr, ((0, 0), (0, p - zr.shape[1])))
    return z


def _af_rates(idxs, pbar, pres, alive, state: NetworkState) -> np.ndarray:
    sigma2 = state.radio.noise_variance_w
    t = state.tables()
    n_rows, m = idxs.shape
    z = _null_bases(idxs, state)
    zc = z.conj()
    h = t.h_own[idxs]
    habs2 = np.abs(h) ** 2
    p = z.shape[2]
    eye = np.eye(p)
    rate = np.zeros((n_rows, m))
    for j in range(m):
        a = np.sqrt(pbar[:, j])[:, None] * t.q[idxs[:, j][:, None], idxs] * h
        a[:, j] = np.sqrt(pbar[:, j]) * h[:, j]
        u_diag = habs2.copy()
        u_diag[:, j] = 0.0
        pres_safe = np.where(alive[:, j], pres[:, j], 1.0)
        if p == 1:
            # One-dimensional nulling subspace: the quadratic form reduces to
            # a scalar ratio, no linear system to solve.
            a_t = np.einsum("rj,rj->r", zc[:, :, 0], a)
            u_t = np.einsum("rj,rj->r", np.abs(z[:, :, 0]) ** 2, u_diag)
            snr = np.abs(a_t) ** 2 / (sigma2 * (u_t + 1.0 / pres_safe))
        else:
            a_t = np.einsum("rjp,rj->rp", zc, a)
            u_t = np.einsum("rjp,rj,rjq->rpq", zc, u_diag, z)
            d = sigma2 * (u_t + eye[None, :, :] / pres_safe[:, None, None])
            x = np.linalg.solve(d, a_t[:, :, None])[:, :, 0]
            for _ in range(_AF_BATCH_REFINE):
                resid = a_t - np.einsum("rpq,rq->rp", d, x)
                x = x + np.linalg.solve(d, resid[:, :, None])[:, :, 0]
            snr = np.einsum("rp,rp->r", a_t.conj(), x).real
        rate[:, j] = 0.5 * np.log2(1.0 + np.maximum(snr, 0.0))
    return rate


def coalition_payoffs(coalition, state: NetworkState, protocol: str) -> np.ndarray:
    """Payoff vector for one coalition (sorted member order); strict on size."""
    members = tuple(sorted(coalition))
    if not is_legal_size(len(members), state.n_eavesdroppers):
        raise InvalidCoalitionSize(
            f"size {len(members)} unusable with {state.n_eavesdroppers} eavesdroppers")
    return batch_coalition_payoffs(np.array([members]), state, protocol)[0]


def coalition_value(coalition, protocol: str, state: NetworkState) -> dict[int, float]:
    """Per-member payoff map for one coalition; strict on size."""
    members = tuple(sorted(coalition))
    return dict(zip(members, coalition_payoffs(members, state, protocol)))


def coalition_payoff(i: int, coalition, protocol: str, state: NetworkState) -> float:
    """Payoff of user i inside the coalition; strict on size."""
    members = tuple(sorted(coalition))
    if i not in members:
        raise MismatchedPlayers(f"user {i} not in coalition {members}")
    if len(members) == 1:
        return noncoop_rate(i, state)
    return float(coalition_payoffs(members, state, protocol)[members.index(i)])


class PayoffCache:
    """Memoized payoff vectors for one deployment snapshot and protocol.

    Lenient variant used by the formation engine and the stability verifiers:
    protocol-infeasible sizes score -inf instead of raising, so arbitrary
    deviations can be compared under the Pareto order.
    """

    def __init__(self, state: NetworkState, protocol: str):
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}")
        self.state = state
        self.protocol = protocol
        self._memo: dict[tuple[int, ...], np.ndarray] = {}

    def payoffs(self, coalition) -> np.ndarray:
        members = tuple(sorted(coalition))
        found = self._memo.get(members)
        if found is None:
            found = batch_coalition_payoffs(
                np.array([members]), self.state, self.protocol)[0]
            self._memo[members] = found
        return found

    def payoff_map(self, coalition) -> dict[int, float]:
        members = tuple(sorted(coalition))
        return dict(zip(members, self.payoffs(members)))

    def store(self, coalition, vector: np.ndarray) -> None:
        """Adopt an externally computed payoff vector (batched merge path)."""
        self._memo[tuple(sorted(coalition))] = np.asarray(vector, dtype=float)


def collection_payoffs(collection, cache: PayoffCache) -> dict[int, float]:
    """Per-player payoffs across a collection of disjoint coalitions."""
    out: dict[int, float] = {}
    for coalition in collection:
        for player, phi in cache.payoff_map(coalition).items():
            if player in out:
                raise MismatchedPlayers(f"player {player} appears in two coalitions")
            out[player] = phi
    return out


def pareto_prefers(new: dict[int, float], old: dict[int, float]) -> bool:
    """Pareto order: every player at least as well off, at least one strictly.

    Both maps must cover the same players. -inf compares below any finite
    payoff and ties with itself, so a change that strands a player without
    power is never preferred.
    """
    if new.keys() != old.keys():
        raise MismatchedPlayers(
            f"collections cover different players: {sorted(new)} vs {sorted(old)}")
    strict = False
    for player, phi in new.items():
        ref = old[player]
        if phi < ref:
            return False
        if phi > ref:
            strict = True
    return strict


def prefers_collections(new_collection, old_collection, cache: PayoffCache) -> bool:
    """Pareto comparison of two collections partitioning the same players."""
    return pareto_prefers(collection_payoffs(new_collection, cache),
                          collection_payoffs(old_collection, cache))
