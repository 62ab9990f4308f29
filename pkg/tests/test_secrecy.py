"""Beamformer solvers: hand oracles, sampling dominance, feasibility invariants.

The DF oracle is an analytically solvable 2-member instance; the AF oracle is
an independent nested-grid maximization over the nulling subspace. Dominance
tests draw random feasible weight vectors and verify none beats the solver.
"""

import math

import numpy as np
import pytest

from secoal.errors import InfeasibleNulling, NoPower
from secoal.geometry import RadioParams, discovery_radius, make_state
from secoal.secrecy import (af_beamformer, af_noise_diag, af_signal_vector,
                            af_subspace_solve, capacity, df_beamformer,
                            df_subspace_snr, exchange_broadcast_power,
                            exchange_secrecy_cost, noncoop_rate, null_basis,
                            slot_secrecy_rate)

RADIO = RadioParams()
SIGMA2 = RADIO.noise_variance_w
P_FULL = RADIO.total_slot_power_w


def clustered_state(rng, n_users, n_eaves=1, spread=350.0, n_dests=2):
    """Users packed well inside one discovery radius, far-flung other nodes."""
    center = rng.uniform(800, 1700, size=2)
    users = center + rng.uniform(-spread, spread, size=(n_users, 2))
    dests = rng.uniform(0, 2500, size=(n_dests, 2))
    eaves = rng.uniform(0, 2500, size=(n_eaves, 2))
    return make_state(users, dests, eaves, RADIO)


def test_capacity_values():
    assert capacity(0.0) == 0.0
    assert capacity(1.0) == 1.0
    assert abs(capacity(3.0) - 2.0) < 1e-15


def test_noncoop_rate_matches_hand_formula():
    rng = np.random.default_rng(0)
    for _ in range(20):
        state = clustered_state(rng, 4, n_eaves=2)
        t = state.tables()
        for i in range(4):
            cd = math.log2(1.0 + P_FULL * abs(t.h_own[i]) ** 2 / SIGMA2)
            ce = max(math.log2(1.0 + P_FULL * abs(t.g[i, k]) ** 2 / SIGMA2)
                     for k in range(2))
            assert abs(noncoop_rate(i, state) - max(0.0, cd - ce)) < 1e-12


def test_null_basis_properties_and_known_case():
    # One eavesdropper channel along e1: the nulling space is span{e2}.
    g = np.array([[1.0 + 0j], [0.0 + 0j]])
    z = null_basis(g)
    assert z.shape == (2, 1)
    assert abs(abs(z[1, 0]) - 1.0) < 1e-12 and abs(z[0, 0]) < 1e-12

    rng = np.random.default_rng(5)
    for _ in range(30):
        m = int(rng.integers(2, 7))
        k = int(rng.integers(0, m))
        g = rng.normal(size=(m, k)) + 1j * rng.normal(size=(m, k))
        z = null_basis(g)
        assert z.shape == (m, m - k)
        assert np.allclose(z.conj().T @ z, np.eye(m - k), atol=1e-12)
        if k:
            assert np.abs(g.conj().T @ z).max() < 1e-10


def test_null_basis_infeasible():
    g = np.eye(2, dtype=complex)  # two independent channels, two weights
    with pytest.raises(InfeasibleNulling):
        null_basis(g)


def test_df_hand_oracle():
    # Frozen instance: g = e1, h = (1, 1), P = 4, sigma2 = 1. The projection
    # of h onto the nulling space keeps only the e2 component, so
    # snr = 4 * 1 / 1 and rate = log2(5) / 2.
    g = np.array([[1.0 + 0j], [0.0 + 0j]])
    h = np.array([1.0 + 0j, 1.0 + 0j])
    z = null_basis(g)
    h_t = z.conj().T @ h
    snr = df_subspace_snr(h_t, power=4.0, sigma2=1.0)
    assert abs(snr - 4.0) < 1e-12
    assert abs(0.5 * capacity(snr) - 0.5 * math.log2(5.0)) < 1e-12


def test_df_beamformer_invariants_and_closed_form():
    rng = np.random.default_rng(1)
    for _ in range(40):
        m = int(rng.integers(2, 7))
        k = int(rng.integers(1, min(3, m - 1) + 1))
        state = clustered_state(rng, m, n_eaves=k)
        members = tuple(range(m))
        res = df_beamformer(0, members, state)
        t = state.tables()
        g = t.g[list(members)]
        h = t.h_own[list(members)]
        p = state.radio.total_slot_power_w - exchange_broadcast_power(0, members, state)
        w = res.weights
        wn = float(np.linalg.norm(w))
        # Nulling and power feasibility at the specified tolerances.
        for kk in range(k):
            gk = g[:, kk]
            assert abs(np.vdot(gk, w)) <= 1e-9 * wn * np.linalg.norm(gk)
        assert wn ** 2 <= p * (1 + 1e-9)
        # Closed form via an independent projection (least-squares residual).
        resid = h - g @ np.linalg.lstsq(g, h, rcond=None)[0]
        want_snr = p * float(np.vdot(resid, resid).real) / SIGMA2
        assert abs(res.snr - want_snr) <= 1e-12 * max(1.0, want_snr)
        assert abs(res.rate - 0.5 * capacity(res.snr)) < 1e-12
        # Achieved objective equals the reported snr.
        assert abs(abs(np.vdot(h, w)) ** 2 / SIGMA2 - res.snr) <= 1e-9 * max(1.0, res.snr)


def test_df_beamformer_dominates_random_samples():
    rng = np.random.default_rng(2)
    for _ in range(25):
        m = int(rng.integers(2, 7))
        k = int(rng.integers(1, min(3, m - 1) + 1))
        state = clustered_state(rng, m, n_eaves=k)
        members = tuple(range(m))
        res = df_beamformer(0, members, state)
        t = state.tables()
        g = t.g[list(members)]
        h = t.h_own[list(members)]
        p = state.radio.total_slot_power_w - exchange_broadcast_power(0, members, state)
        z = null_basis(g)
        v = rng.normal(size=(500, z.shape[1])) + 1j * rng.normal(size=(500, z.shape[1]))
        v *= (math.sqrt(p) * rng.uniform(0, 1, size=500) ** 0.5
              / np.linalg.norm(v, axis=1))[:, None]
        w = v @ z.T  # rows are feasible weight vectors
        snrs = np.abs(w @ h.conj()) ** 2 / SIGMA2
        assert snrs.max() <= res.snr * (1 + 1e-9)


def af_objective(w, a, u, sigma2):
    num = abs(np.vdot(a, w)) ** 2
    den = sigma2 * (float(np.real(np.vdot(w, u * w))) + 1.0)
    return num / den


def test_af_beamformer_invariants_and_dominance():
    rng = np.random.default_rng(3)
    for _ in range(25):
        m = int(rng.integers(3, 7))
        k = int(rng.integers(1, min(3, m - 2) + 1))
        state = clustered_state(rng, m, n_eaves=k)
        members = tuple(range(m))
        res = af_beamformer(0, members, state)
        t = state.tables()
        g = t.g[list(members)]
        pbar = exchange_broadcast_power(0, members, state)
        p = state.radio.total_slot_power_w - pbar
        a = af_signal_vector(0, list(members), state, pbar)
        u = af_noise_diag(0, list(members), state)
        w = res.weights
        wn = float(np.linalg.norm(w))
        for kk in range(k):
            gk = g[:, kk]
            assert abs(np.vdot(gk, w)) <= 1e-9 * wn * np.linalg.norm(gk)
        # AF transmits on the power sphere.
        assert abs(wn ** 2 - p) <= 1e-9 * p
        # Reported snr equals the achieved objective.
        assert abs(af_objective(w, a, u, SIGMA2) - res.snr) <= 1e-9 * max(1e-30, res.snr)
        # No random feasible sample beats it.
        z = null_basis(g)
        v = rng.normal(size=(500, z.shape[1])) + 1j * rng.normal(size=(500, z.shape[1]))
        v *= (math.sqrt(p) / np.linalg.norm(v, axis=1))[:, None]
        ws = v @ z.T
        best = max(af_objective(ws[s], a, u, SIGMA2) for s in range(500))
        assert best <= res.snr * (1 + 1e-9)


def test_af_grid_oracle_symmetric_instance():
    # Independent oracle: |S| = 3, K = 1 with real channels. The nulling
    # subspace is 2-D; parameterize v = sqrt(P) (cos t, e^{i ph} sin t) and
    # maximize on a nested grid (three zoom stages ~ 1e-7 resolution).
    a_t = np.array([0.9 + 0j, 0.4 + 0j])
    u_t = np.diag([2.0, 0.5]).astype(complex)
    power, sigma2 = 2.0, 0.7
    snr, v = af_subspace_solve(a_t, u_t, power, sigma2)

    def grid_max(t_lo, t_hi, p_lo, p_hi, n=220):
        ts = np.linspace(t_lo, t_hi, n)
        ps = np.linspace(p_lo, p_hi, n)
        tt, pp = np.meshgrid(ts, ps, indexing="ij")
        v0 = math.sqrt(power) * np.cos(tt)
        v1 = math.sqrt(power) * np.sin(tt) * np.exp(1j * pp)
        num = np.abs(v0 * a_t[0].conjugate() + v1 * a_t[1].conjugate()) ** 2
        den = sigma2 * (np.abs(v0) ** 2 * u_t[0, 0].real
                        + np.abs(v1) ** 2 * u_t[1, 1].real + 1.0)
        val = num / den
        ij = np.unravel_index(np.argmax(val), val.shape)
        return float(val[ij]), float(ts[ij[0]]), float(ps[ij[1]])

    best, t0, p0 = grid_max(0.0, math.pi, -math.pi, math.pi)
    for span in (0.05, 0.002):
        best, t0, p0 = grid_max(t0 - span, t0 + span, p0 - span, p0 + span)
    assert abs(snr - best) <= 1e-6 * best
    # The folded quadratic form matches: v solves D v = a_t up to scale.
    d = sigma2 * (u_t + np.eye(2) / power)
    assert np.linalg.norm(d @ v - a_t) <= 1e-9 * np.linalg.norm(a_t)


def test_af_subspace_solve_residual_contract():
    rng = np.random.default_rng(8)
    for _ in range(30):
        p = int(rng.integers(1, 6))
        a_t = rng.normal(size=p) + 1j * rng.normal(size=p)
        base = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
        u_t = base.conj().T @ base  # Hermitian PSD
        power = float(rng.uniform(0.1, 10.0))
        sigma2 = float(rng.uniform(0.1, 2.0))
        snr, v = af_subspace_solve(a_t, u_t, power, sigma2)
        d = sigma2 * (u_t + np.eye(p) / power)
        assert np.linalg.norm(d @ v - a_t) <= 1e-9 * np.linalg.norm(a_t)
        assert snr >= 0.0


def test_exchange_cost_matches_hand_formula():
    rng = np.random.default_rng(4)
    for _ in range(20):
        state = clustered_state(rng, 5, n_eaves=2)
        t = state.tables()
        members = (0, 1, 2, 3, 4)
        for i in members:
            far = max(t.d_uu[i, j] for j in members if j != i)
            pbar = RADIO.exchange_snr_linear * SIGMA2 * far ** 3
            assert abs(exchange_broadcast_power(i, members, state) - pbar) <= 1e-9 * pbar
            leak = max(0.5 * math.log2(1.0 + pbar * abs(t.g[i, k]) ** 2 / SIGMA2)
                       for k in range(2))
            got = exchange_secrecy_cost(i, members, state)
            assert abs(got - leak) <= 1e-9 * max(1.0, leak)


def test_beamformers_raise_without_power():
    r = discovery_radius(RADIO)
    users = np.array([[0.0, 0.0], [1.2 * r, 0.0]])
    state = make_state(users, np.array([[500.0, 500.0]]),
                       np.array([[2000.0, 100.0]]), RADIO)
    with pytest.raises(NoPower):
        df_beamformer(0, (0, 1), state)
    with pytest.raises(NoPower):
        af_beamformer(0, (0, 1), state)


def test_slot_rate_singleton_is_noncoop():
    rng = np.random.default_rng(6)
    state = clustered_state(rng, 3, n_eaves=2)
    for i in range(3):
        assert slot_secrecy_rate(i, (i,), state, "df") == noncoop_rate(i, state)
        assert slot_secrecy_rate(i, (i,), state, "af") == noncoop_rate(i, state)
