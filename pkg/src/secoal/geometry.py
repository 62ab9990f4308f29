"""Node geometry, line-of-sight channels, and information-exchange power accounting.

All internal computation is in watts and meters; dB/dBm conversion happens at
the configuration boundary (see cli.parse_config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoDestinations, ValidationError, ZeroDistance

TWO_PI = 2.0 * math.pi

PHASE_GEOMETRIC = "geometric"
PHASE_SEEDED = "seeded"

# Relative slack on the discovery-radius comparison. The closed-form radius and
# the exchange cost both carry ~1 ulp of rounding, so the exact boundary case
# (cost == P at d == radius) must not be decided by the last bit.
DISCOVERY_SLACK = 1e-9


@dataclass(frozen=True)
class RadioParams:
    """Global radio parameters shared by every link.

    total_slot_power_w   per-slot power budget (applies to whole coalition)
    noise_variance_w     receiver noise power
    pathloss_exponent    exponent mu of the d^(-mu/2) line-of-sight model
    exchange_snr_linear  target SNR for the information-exchange broadcast
    carrier_wavelength_m wavelength for the geometric phase model
    phase_model          "geometric" (phase = 2 pi d / lambda) or "seeded"
                         (uniform phase hashed from endpoints and phase_seed)
    """

    total_slot_power_w: float = 0.01
    noise_variance_w: float = 1e-12
    pathloss_exponent: float = 3.0
    exchange_snr_linear: float = 10.0
    carrier_wavelength_m: float = 0.125
    phase_model: str = PHASE_GEOMETRIC
    phase_seed: int = 0

    def __post_init__(self):
        if self.total_slot_power_w <= 0:
            raise ValidationError("total_slot_power_w must be > 0")
        if self.noise_variance_w <= 0:
            raise ValidationError("noise_variance_w must be > 0")
        if self.pathloss_exponent < 2:
            raise ValidationError("pathloss_exponent must be >= 2")
        if self.exchange_snr_linear <= 0:
            raise ValidationError("exchange_snr_linear must be > 0")
        if self.carrier_wavelength_m <= 0:
            raise ValidationError("carrier_wavelength_m must be > 0")
        if self.phase_model not in (PHASE_GEOMETRIC, PHASE_SEEDED):
            raise ValidationError(f"unknown phase model {self.phase_model!r}")


def _phase_of(d: np.ndarray, a: np.ndarray, b: np.ndarray, radio: RadioParams) -> np.ndarray:
    """Phase offsets for links of length d between endpoint arrays a and b."""
    if radio.phase_model == PHASE_GEOMETRIC:
        return TWO_PI * np.mod(d / radio.carrier_wavelength_m, 1.0)
    # Seeded-uniform: hash both endpoints and the seed so the phase is a pure,
    # reproducible function of the geometry.
    flat_a = np.atleast_2d(a).reshape(-1, 2)
    flat_b = np.atleast_2d(b).reshape(-1, 2)
    out = np.empty(max(len(flat_a), len(flat_b)))
    for idx in range(len(out)):
        pa = flat_a[idx % len(flat_a)]
        pb = flat_b[idx % len(flat_b)]
        bits = np.array([pa[0], pa[1], pb[0], pb[1]], dtype=np.float64).view(np.uint64)
        ss = np.random.SeedSequence([radio.phase_seed, *(int(x) for x in bits)])
        out[idx] = TWO_PI * np.random.default_rng(ss).random()
    return out.reshape(np.shape(d))


def channel_gain(a, b, radio: RadioParams) -> complex:
    """Complex baseband gain d^(-mu/2) e^{j phi} between positions a and b (meters)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a - b
    d = float(np.sqrt((diff ** 2).sum()))
    if d == 0.0:
        raise ZeroDistance(f"coincident nodes at {tuple(a)}")
    mag = d ** (-radio.pathloss_exponent / 2.0)
    phi = float(_phase_of(np.asarray(d), a, b, radio))
    return complex(mag * np.exp(1j * phi))


def discovery_radius(radio: RadioParams) -> float:
    """Distance at which the exchange power cost equals the slot budget."""
    return (
        radio.total_slot_power_w / (radio.exchange_snr_linear * radio.noise_variance_w)
    ) ** (1.0 / radio.pathloss_exponent)


@dataclass
class ChannelTables:
    """Vectorized per-deployment channel quantities (meters / watts / linear gains).

    d_uu      (N, N) user-user distances
    cost_uu   (N, N) exchange power cost nu0*sigma2*d^mu, +inf on the diagonal... 0 on diagonal
    q         (N, N) user-user complex gains (0 on the diagonal)
    h_own     (N,)   complex gain from each user to its assigned destination
    g         (N, K) complex gains from users to eavesdroppers
    gmax2     (N,)   max_k |g[i, k]|^2
    within    (N, N) boolean, pairwise distance inside the discovery radius
    """

    d_uu: np.ndarray
    cost_uu: np.ndarray
    q: np.ndarray
    h_own: np.ndarray
    g: np.ndarray
    gmax2: np.ndarray
    within: np.ndarray


def _pairwise_gains(pos_a: np.ndarray, pos_b: np.ndarray, radio: RadioParams,
                    same_set: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Distances and complex gains between two position sets; 0 gain at d = 0."""
    diff = pos_a[:, None, :] - pos_b[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=2))
    with np.errstate(divide="ignore"):
        mag = np.where(d > 0, d, 1.0) ** (-radio.pathloss_exponent / 2.0)
    if radio.phase_model == PHASE_GEOMETRIC:
        phi = TWO_PI * np.mod(d / radio.carrier_wavelength_m, 1.0)
    else:
        phi = np.empty_like(d)
        for i in range(d.shape[0]):
            for j in range(d.shape[1]):
                phi[i, j] = _phase_of(np.asarray(d[i, j]), pos_a[i], pos_b[j], radio)
    gains = mag * np.exp(1j * phi)
    gains[d == 0] = 0.0
    return d, gains


@dataclass
class NetworkState:
    """Deployment snapshot: positions (meters), radio parameters, slot assignment."""

    user_positions: np.ndarray
    destination_positions: np.ndarray
    eavesdropper_positions: np.ndarray
    radio: RadioParams
    assignment: np.ndarray
    _tables: ChannelTables | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.user_positions = np.atleast_2d(np.asarray(self.user_positions, dtype=float))
        self.destination_positions = np.atleast_2d(
            np.asarray(self.destination_positions, dtype=float))
        self.eavesdropper_positions = np.atleast_2d(
            np.asarray(self.eavesdropper_positions, dtype=float))
        self.assignment = np.asarray(self.assignment, dtype=int)
        if len(self.assignment) != self.n_users:
            raise ValidationError("assignment must map every user to a destination")
        if self.n_users and (self.assignment.min() < 0
                             or self.assignment.max() >= self.n_destinations):
            raise ValidationError("assignment contains an invalid destination index")

    @property
    def n_users(self) -> int:
        return len(self.user_positions)

    @property
    def n_destinations(self) -> int:
        return len(self.destination_positions)

    @property
    def n_eavesdroppers(self) -> int:
        return len(self.eavesdropper_positions)

    def tables(self) -> ChannelTables:
        """Build (once) the vectorized channel tables for this snapshot."""
        if self._tables is None:
            radio = self.radio
            d_uu, q = _pairwise_gains(self.user_positions, self.user_positions, radio)
            cost_uu = radio.exchange_snr_linear * radio.noise_variance_w \
                * d_uu ** radio.pathloss_exponent
            np.fill_diagonal(cost_uu, 0.0)
            _, h_ud = _pairwise_gains(self.user_positions, self.destination_positions, radio)
            h_own = h_ud[np.arange(self.n_users), self.assignment]
            _, g = _pairwise_gains(self.user_positions, self.eavesdropper_positions, radio)
            gmax2 = (np.abs(g) ** 2).max(axis=1) if self.n_eavesdroppers else \
                np.zeros(self.n_users)
            r = discovery_radius(radio)
            within = d_uu <= r * (1.0 + DISCOVERY_SLACK)
            self._tables = ChannelTables(d_uu=d_uu, cost_uu=cost_uu, q=q, h_own=h_own,
                                         g=g, gmax2=gmax2, within=within)
        return self._tables


def assign_closest_destination(state: NetworkState) -> np.ndarray:
    """Assignment mapping each user to its nearest destination (ties: lowest index)."""
    if state.n_destinations == 0:
        raise NoDestinations("network has no destinations")
    diff = state.user_positions[:, None, :] - state.destination_positions[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=2))
    return d.argmin(axis=1)


def make_state(user_positions, destination_positions, eavesdropper_positions,
               radio: RadioParams) -> NetworkState:
    """NetworkState with the closest-destination assignment already applied."""
    state = NetworkState(
        user_positions=user_positions,
        destination_positions=destination_positions,
        eavesdropper_positions=eavesdropper_positions,
        radio=radio,
        assignment=np.zeros(len(np.atleast_2d(np.asarray(user_positions))), dtype=int),
    )
    state.assignment = assign_closest_destination(state)
    return state


def exchange_power_cost(i: int, i_hat: int, state: NetworkState) -> float:
    """Power nu0*sigma2/|q|^2 user i spends broadcasting to coalition member i_hat."""
    if i == i_hat:
        raise ZeroDistance("exchange cost requires two distinct users")
    t = state.tables()
    if t.d_uu[i, i_hat] == 0.0:
        raise ZeroDistance(f"users {i} and {i_hat} coincide")
    return float(t.cost_uu[i, i_hat])


def residual_power(i: int, coalition, state: NetworkState) -> float:
    """Power left for the data phase of user i's slot, (P - Pbar_{i,ihat})^+.

    For a singleton no information exchange happens and the whole slot budget
    remains. Otherwise i broadcasts to the farthest coalition member.
    """
    members = [j for j in coalition]
    if i not in members:
        raise ValidationError(f"user {i} not in coalition {members}")
    if len(members) == 1:
        return state.radio.total_slot_power_w
    t = state.tables()
    pbar = max(float(t.cost_uu[i, j]) for j in members if j != i)
    return max(0.0, state.radio.total_slot_power_w - pbar)
