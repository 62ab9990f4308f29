"""Secrecy rates: noncooperative baseline and nulling beamformers (DF / AF).

Cooperative transmission nulls the signal at every eavesdropper, so the
secrecy rate of a slot equals the destination rate of the chosen beamformer.
Both solvers work in the nulling subspace: with Z an orthonormal basis of
{w : G^H w = 0}, any feasible weight vector is w = Z v and ||w|| = ||v||.

DF:  maximize |h^H w|^2 / sigma^2 subject to ||w||^2 <= P.  The optimum is the
     normalized projection of h onto the subspace, snr = P ||Z^H h||^2 / sigma^2.

AF:  maximize w^H a a^H w / (sigma^2 (w^H U w + 1)) subject to ||w||^2 = P.
     On the power sphere the constant 1 folds into the quadratic form via
     1 = v^H v / P, turning the problem into a rank-one generalized Rayleigh
     quotient with snr = a~^H D^{-1} a~ where D = sigma^2 (Z^H U Z + I/P).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleNulling, NoPower
from .geometry import NetworkState, residual_power

# Singular values below NULL_RTOL times the largest count as zero when
# extracting the nulling subspace.
NULL_RTOL = 1e-10

# The AF normal equations are refined until the residual is below this
# fraction of ||a~||.
AF_REFINE_RTOL = 1e-9
AF_REFINE_MAX_ITERS = 25


def capacity(snr: float) -> float:
    """Gaussian channel capacity log2(1 + snr) in bits/s/Hz."""
    return math.log2(1.0 + snr)


def noncoop_rate(i: int, state: NetworkState) -> float:
    """Secrecy rate of user i transmitting alone with the full slot budget.

    (C_destination - max_k C_eavesdropper_k)^+ with no half-slot penalty since
    no information exchange takes place.
    """
    t = state.tables()
    p = state.radio.total_slot_power_w
    sigma2 = state.radio.noise_variance_w
    cd = capacity(p * abs(t.h_own[i]) ** 2 / sigma2)
    ce = capacity(p * float(t.gmax2[i]) / sigma2) if state.n_eavesdroppers else 0.0
    return max(0.0, cd - ce)


def null_basis(g: np.ndarray, rtol: float = NULL_RTOL) -> np.ndarray:
    """Orthonormal basis Z (m x p) of {w in C^m : g^H w = 0}.

    g is the m x K matrix of member-to-eavesdropper gains. Raises
    InfeasibleNulling when the nulling subspace is empty (m <= rank of g).
    """
    g = np.atleast_2d(np.asarray(g, dtype=complex))
    m, k = g.shape
    if k == 0:
        return np.eye(m, dtype=complex)
    u, s, _ = np.linalg.svd(g, full_matrices=True)
    rank = int(np.sum(s > rtol * s[0])) if s.size else 0
    if rank >= m:
        raise InfeasibleNulling(
            f"cannot null {rank} independent eavesdropper channels with {m} weights")
    return u[:, rank:]


@dataclass
class BeamformerResult:
    """Weights over the coalition (sorted member order), linear SNR, and rate."""

    weights: np.ndarray
    snr: float
    rate: float
    protocol: str = "df"


def df_subspace_snr(h_t: np.ndarray, power: float, sigma2: float) -> float:
    """DF SNR given the destination channel already projected into the subspace."""
    return power * float(np.vdot(h_t, h_t).real) / sigma2


def af_subspace_solve(a_t: np.ndarray, u_t: np.ndarray, power: float,
                      sigma2: float) -> tuple[float, np.ndarray]:
    """AF SNR and optimal subspace direction v (unnormalized).

    a_t = Z^H a, u_t = Z^H U Z. Solves D x = a_t for D = sigma2 (u_t + I/power)
    with iterative refinement; snr = Re(a_t^H x).
    """
    p = len(a_t)
    d = sigma2 * (u_t + np.eye(p) / power)
    a_norm = float(np.linalg.norm(a_t))
    if a_norm == 0.0:
        return 0.0, np.zeros(p, dtype=complex)
    x = np.linalg.solve(d, a_t)
    for _ in range(AF_REFINE_MAX_ITERS):
        resid = a_t - d @ x
        if float(np.linalg.norm(resid)) <= AF_REFINE_RTOL * a_norm:
            break
        x = x + np.linalg.solve(d, resid)
    snr = float(np.vdot(a_t, x).real)
    return snr, x


def _member_arrays(coalition, state: NetworkState):
    members = sorted(coalition)
    t = state.tables()
    h = t.h_own[members]
    g = t.g[members, :] if state.n_eavesdroppers else \
        np.zeros((len(members), 0), dtype=complex)
    return members, h, g


def exchange_broadcast_power(i: int, coalition, state: NetworkState) -> float:
    """Power user i spends reaching its farthest coalition partner."""
    t = state.tables()
    return max(float(t.cost_uu[i, j]) for j in coalition if j != i)


def exchange_secrecy_cost(i: int, coalition, state: NetworkState) -> float:
    """Capacity leaked to the best-placed eavesdropper while user i broadcasts
    its data to the farthest coalition partner: max_k (1/2) log2(1 + pbar
    |g_ik|^2 / sigma2)."""
    t = state.tables()
    if not state.n_eavesdroppers:
        return 0.0
    pbar = exchange_broadcast_power(i, coalition, state)
    return 0.5 * capacity(pbar * float(t.gmax2[i]) / state.radio.noise_variance_w)


def df_beamformer(i: int, coalition, state: NetworkState,
                  power: float | None = None) -> BeamformerResult:
    """Optimal DF nulling beamformer for user i's slot within the coalition."""
    members, h, g = _member_arrays(coalition, state)
    if power is None:
        power = residual_power(i, members, state)
    if power <= 0.0:
        raise NoPower(f"no residual power for user {i} in coalition {members}")
    z = null_basis(g)
    h_t = z.conj().T @ h
    hn = float(np.linalg.norm(h_t))
    if hn == 0.0:
        return BeamformerResult(np.zeros(len(members), dtype=complex), 0.0, 0.0, "df")
    w = z @ (math.sqrt(power) / hn * h_t)
    snr = df_subspace_snr(h_t, power, state.radio.noise_variance_w)
    return BeamformerResult(w, snr, 0.5 * capacity(snr), "df")


def af_signal_vector(i: int, members, state: NetworkState, pbar: float) -> np.ndarray:
    """Effective AF channel a: relayed gains sqrt(pbar) q_{i,j} h_{j,m_j}, direct at i."""
    t = state.tables()
    a = math.sqrt(pbar) * t.q[i, members] * t.h_own[members]
    a[members.index(i)] = math.sqrt(pbar) * t.h_own[i]
    return a


def af_noise_diag(i: int, members, state: NetworkState) -> np.ndarray:
    """Diagonal of the amplified-noise matrix U for user i's slot."""
    t = state.tables()
    u = np.abs(t.h_own[members]) ** 2
    u[members.index(i)] = 0.0
    return u


def af_beamformer(i: int, coalition, state: NetworkState,
                  power: float | None = None) -> BeamformerResult:
    """Optimal AF nulling beamformer for user i's slot within the coalition."""
    members, _, g = _member_arrays(coalition, state)
    pbar = exchange_broadcast_power(i, members, state)
    if power is None:
        power = max(0.0, state.radio.total_slot_power_w - pbar)
    if power <= 0.0:
        raise NoPower(f"no residual power for user {i} in coalition {members}")
    z = null_basis(g)
    a = af_signal_vector(i, members, state, pbar)
    u = af_noise_diag(i, members, state)
    a_t = z.conj().T @ a
    u_t = z.conj().T @ (u[:, None] * z)
    snr, v = af_subspace_solve(a_t, u_t, power, state.radio.noise_variance_w)
    vn = float(np.linalg.norm(v))
    if vn == 0.0:
        return BeamformerResult(np.zeros(len(members), dtype=complex), 0.0, 0.0, "af")
    w = z @ (math.sqrt(power) / vn * v)
    return BeamformerResult(w, snr, 0.5 * capacity(snr), "af")


def slot_secrecy_rate(i: int, coalition, state: NetworkState, protocol: str) -> float:
    """Secrecy rate of user i's slot: noncooperative if alone, else DF or AF."""
    members = list(coalition)
    if len(members) == 1:
        return noncoop_rate(i, state)
    if protocol == "df":
        return df_beamformer(i, members, state).rate
    if protocol == "af":
        return af_beamformer(i, members, state).rate
    raise ValueError(f"unknown protocol {protocol!r}")
