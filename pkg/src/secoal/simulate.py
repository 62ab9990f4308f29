"""Scenario generation, mobility, periodic re-formation, and parameter sweeps.

Deployments are uniform over a square area; every statistical result is
averaged over independent deployments whose seeds derive deterministically
from (base seed, swept parameter, value, replicate index), so any figure can
be regenerated bit-for-bit from the config alone. Protocols share deployments
within a replicate, which makes protocol comparisons paired rather than
independent.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .formation import (FormationConfig, FormationResult, FormationTrace,
                        default_initial_partition, dissolve_infeasible,
                        run_formation)
from .game import NEG_INF, batch_coalition_payoffs
from .geometry import NetworkState, RadioParams, make_state

PROTOCOL_CHOICES = ("df", "af", "noncoop")
SWEEP_PARAMS = ("n", "k", "nu0_db", "speed")

MIN_NODE_SEPARATION_M = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Deployment-level parameters (counts, area, radio, protocol, seeding)."""

    n_users: int = 45
    n_destinations: int = 2
    n_eavesdroppers: int = 2
    area_side_m: float = 2500.0
    radio: RadioParams = field(default_factory=RadioParams)
    protocol: str = "df"
    seed: int = 0
    num_deployments: int = 100

    def __post_init__(self):
        if self.n_users < 1 or self.n_destinations < 1 or self.n_eavesdroppers < 1:
            raise ValidationError("N, M and K must all be >= 1")
        if self.area_side_m <= 0:
            raise ValidationError("area_side_m must be > 0")
        if self.protocol not in PROTOCOL_CHOICES:
            raise ValidationError(f"unknown protocol {self.protocol!r}")
        if self.num_deployments < 1:
            raise ValidationError("num_deployments must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must fit in 64 bits")


@dataclass(frozen=True)
class MobilityConfig:
    """Motion model for mobile runs.

    moving selects which node class moves ("users", "eavesdroppers" or
    "all"); moving_indices optionally restricts motion to specific nodes of
    that class (e.g. a single user retracing the moving-user scenario).
    """

    model: str = "static"
    speed_kmh: float = 0.0
    decision_interval_s: float = 30.0
    direction: tuple[float, float] = (1.0, 0.0)
    reformation_period_s: float = 30.0
    duration_s: float = 300.0
    moving: str = "users"
    moving_indices: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.model not in ("static", "random_walk", "linear"):
            raise ValidationError(f"unknown mobility model {self.model!r}")
        if self.speed_kmh < 0:
            raise ValidationError("speed_kmh must be >= 0")
        if self.decision_interval_s <= 0 or self.reformation_period_s <= 0:
            raise ValidationError("mobility periods must be > 0")
        if self.duration_s <= 0:
            raise ValidationError("duration_s must be > 0")
        if self.moving not in ("users", "eavesdroppers", "all"):
            raise ValidationError(f"unknown moving class {self.moving!r}")
        if math.hypot(*self.direction) == 0 and self.model == "linear":
            raise ValidationError("linear mobility needs a nonzero direction")


@dataclass
class MetricsRecord:
    """Aggregate outcome of one evaluated deployment (or mobile run step)."""

    avg_secrecy_rate: float
    avg_coalition_size: float
    avg_max_coalition_size: float
    merges_per_min: float
    splits_per_min: float
    num_coalitions: int
    payoffs: tuple[float, ...]
    partition: tuple[tuple[int, ...], ...]


def derive_seed_sequence(base_seed: int, param: str, value: float,
                         replicate: int) -> np.random.SeedSequence:
    """Deterministic per-replicate seed stream for sweeps.

    The parameter name is hashed and the value contributes its float64 bit
    pattern, so nearby values (e.g. 10 vs 10.5 dB) get unrelated streams.
    """
    tag = zlib.crc32(param.encode("utf-8"))
    vbits = int(np.float64(value).view(np.uint64))
    return np.random.SeedSequence([int(base_seed), tag, vbits, int(replicate)])


def deploy_random(cfg: ScenarioConfig,
                  ss: np.random.SeedSequence | None = None) -> NetworkState:
    """Uniform random deployment; co-located pairs (< 1 m) are resampled."""
    if ss is None:
        ss = np.random.SeedSequence(cfg.seed)
    rng = np.random.default_rng(ss)
    total = cfg.n_users + cfg.n_destinations + cfg.n_eavesdroppers
    pos = rng.uniform(0.0, cfg.area_side_m, size=(total, 2))
    for _ in range(100):
        diff = pos[:, None, :] - pos[None, :, :]
        d = np.sqrt((diff ** 2).sum(axis=2))
        np.fill_diagonal(d, np.inf)
        bad = np.unique(np.nonzero(d < MIN_NODE_SEPARATION_M)[0])
        if bad.size == 0:
            break
        pos[bad] = rng.uniform(0.0, cfg.area_side_m, size=(bad.size, 2))
    else:
        raise ValidationError("could not separate nodes by 1 m; area too small")
    users = pos[:cfg.n_users]
    dests = pos[cfg.n_users:cfg.n_users + cfg.n_destinations]
    eaves = pos[cfg.n_users + cfg.n_destinations:]
    return make_state(users, dests, eaves, cfg.radio)


def noncoop_payoffs(state: NetworkState) -> np.ndarray:
    singles = np.arange(state.n_users)[:, None]
    return batch_coalition_payoffs(singles, state, "df")[:, 0]


def _metrics_from_partition(partition, payoffs: np.ndarray,
                            merges_per_min: float = 0.0,
                            splits_per_min: float = 0.0) -> MetricsRecord:
    sizes = [len(b) for b in partition]
    return MetricsRecord(
        avg_secrecy_rate=float(np.mean(payoffs)),
        avg_coalition_size=float(np.mean(sizes)),
        avg_max_coalition_size=float(max(sizes)),
        merges_per_min=merges_per_min,
        splits_per_min=splits_per_min,
        num_coalitions=len(partition),
        payoffs=tuple(float(x) for x in payoffs),
        partition=partition,
    )


def evaluate_deployment(state: NetworkState, cfg: ScenarioConfig,
                        form_cfg: FormationConfig | None = None,
                        ) -> tuple[MetricsRecord, FormationResult | None]:
    """Form coalitions from singletons (or not, for noncoop) and aggregate."""
    if cfg.protocol == "noncoop":
        payoffs = noncoop_payoffs(state)
        partition = default_initial_partition(state)
        return _metrics_from_partition(partition, payoffs), None
    if form_cfg is None:
        form_cfg = FormationConfig(protocol=cfg.protocol)
    elif form_cfg.protocol != cfg.protocol:
        form_cfg = replace(form_cfg, protocol=cfg.protocol)
    result = run_formation(default_initial_partition(state), form_cfg, state)
    payoffs = np.array([result.payoffs[i] for i in range(state.n_users)])
    assert np.all(payoffs > NEG_INF), "terminal partition holds a stranded user"
    return _metrics_from_partition(result.partition, payoffs), result


@dataclass
class SweepRow:
    """One CSV row: a (swept value, protocol) cell averaged over replicates."""

    param: str
    value: float
    protocol: str
    seed_count: int
    avg_secrecy_rate: float
    stderr: float
    avg_coalition_size: float
    avg_max_coalition_size: float
    merges_per_min: float
    splits_per_min: float


def apply_param(cfg: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    if param == "n":
        return replace(cfg, n_users=int(value))
    if param == "k":
        return replace(cfg, n_eavesdroppers=int(value))
    if param == "nu0_db":
        radio = replace(cfg.radio, exchange_snr_linear=10.0 ** (value / 10.0))
        return replace(cfg, radio=radio)
    if param == "speed":
        return cfg
    raise ValidationError(f"unknown sweep parameter {param!r}")


def _replicate_metrics(cfg: ScenarioConfig, param: str, value: float,
                       replicate: int, protocols: tuple[str, ...],
                       form_cfg: FormationConfig | None,
                       mobility: MobilityConfig | None,
                       duration_s: float) -> list[tuple]:
    """Metrics for every protocol on one shared replicate deployment."""
    scenario = apply_param(cfg, param, value)
    ss = derive_seed_sequence(cfg.seed, param, value, replicate)
    out = []
    if param == "speed":
        mob = mobility if mobility is not None else MobilityConfig(model="random_walk")
        if mob.model == "static":
            mob = replace(mob, model="random_walk")
        mob = replace(mob, speed_kmh=float(value))
        for proto in protocols:
            run = run_mobile(replace(scenario, protocol=proto), mob, duration_s,
                             form_cfg=form_cfg, ss=ss)
            rates = [s.metrics.avg_secrecy_rate for s in run.steps]
            sizes = [s.metrics.avg_coalition_size for s in run.steps]
            maxes = [s.metrics.avg_max_coalition_size for s in run.steps]
            out.append((proto, float(np.mean(rates)), float(np.mean(sizes)),
                        float(np.mean(maxes)), run.merges_per_min, run.splits_per_min))
        return out
    state = deploy_random(scenario, ss)
    for proto in protocols:
        rec, _ = evaluate_deployment(state, replace(scenario, protocol=proto), form_cfg)
        out.append((proto, rec.avg_secrecy_rate, rec.avg_coalition_size,
                    rec.avg_max_coalition_size, rec.merges_per_min, rec.splits_per_min))
    return out


def _mean_stderr(xs) -> tuple[float, float]:
    xs = np.asarray(xs, dtype=float)
    mean = float(xs.mean())
    if len(xs) < 2:
        return mean, 0.0
    return mean, float(xs.std(ddof=1) / math.sqrt(len(xs)))


def sweep(param: str, values, base: ScenarioConfig,
          protocols=("df", "noncoop"), form_cfg: FormationConfig | None = None,
          mobility: MobilityConfig | None = None, duration_s: float = 300.0,
          jobs: int = 1) -> list[SweepRow]:
    """Average evaluate_deployment (or mobile runs, for speed) over replicates.

    Returns one row per (value, protocol) in sweep order. Replicates share
    deployments across protocols; rows aggregate num_deployments replicates.
    """
    if param not in SWEEP_PARAMS:
        raise ValidationError(f"unknown sweep parameter {param!r}")
    protocols = tuple(protocols)
    for proto in protocols:
        if proto not in PROTOCOL_CHOICES:
            raise ValidationError(f"unknown protocol {proto!r}")
    tasks = [(base, param, float(v), r, protocols, form_cfg, mobility, duration_s)
             for v in values for r in range(base.num_deployments)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate_task, tasks, chunksize=1))
    else:
        results = [_replicate_task(t) for t in tasks]
    rows: list[SweepRow] = []
    per_value = base.num_deployments
    for vi, v in enumerate(values):
        chunk = results[vi * per_value:(vi + 1) * per_value]
        for pi, proto in enumerate(protocols):
            rates = [rep[pi][1] for rep in chunk]
            mean, err = _mean_stderr(rates)
            rows.append(SweepRow(
                param=param, value=float(v), protocol=proto, seed_count=per_value,
                avg_secrecy_rate=mean, stderr=err,
                avg_coalition_size=float(np.mean([rep[pi][2] for rep in chunk])),
                avg_max_coalition_size=float(np.mean([rep[pi][3] for rep in chunk])),
                merges_per_min=float(np.mean([rep[pi][4] for rep in chunk])),
                splits_per_min=float(np.mean([rep[pi][5] for rep in chunk])),
            ))
    return rows


def _replicate_task(args) -> list[tuple]:
    cfg, param, value, replicate, protocols, form_cfg, mobility, duration_s = args
    return _replicate_metrics(cfg, param, value, replicate, protocols,
                              form_cfg, mobility, duration_s)


class _Walker:
    """Advances a position set under a mobility model with wall reflection."""

    def __init__(self, positions: np.ndarray, mob: MobilityConfig, side: float,
                 rng: np.random.Generator, mask: np.ndarray):
        self.pos = positions.astype(float).copy()
        self.mob = mob
        self.side = side
        self.rng = rng
        self.mask = mask
        self.speed_mps = mob.speed_kmh / 3.6
        n = len(positions)
        if mob.model == "linear":
            d = np.asarray(mob.direction, dtype=float)
            self.vel = np.tile(d / np.hypot(*d), (n, 1))
        else:
            self.vel = self._fresh_directions(n)
        self.until_turn = mob.decision_interval_s

    def _fresh_directions(self, n: int) -> np.ndarray:
        ang = self.rng.uniform(0.0, 2.0 * math.pi, size=n)
        return np.column_stack([np.cos(ang), np.sin(ang)])

    def _move(self, dt: float) -> None:
        step = self.pos + self.vel * (self.speed_mps * dt)
        for axis in (0, 1):
            for _ in range(8):
                over = step[:, axis] > self.side
                under = step[:, axis] < 0.0
                if not (over.any() or under.any()):
                    break
                step[over, axis] = 2.0 * self.side - step[over, axis]
                step[under, axis] = -step[under, axis]
                flip = over | under
                self.vel[flip, axis] = -self.vel[flip, axis]
        self.pos[self.mask] = step[self.mask]

    def advance(self, dt: float) -> None:
        if self.mob.model == "static" or self.speed_mps == 0.0:
            return
        if self.mob.model == "linear":
            self._move(dt)
            return
        remaining = dt
        while remaining > 1e-12:
            seg = min(remaining, self.until_turn)
            self._move(seg)
            remaining -= seg
            self.until_turn -= seg
            if self.until_turn <= 1e-12:
                self.vel = self._fresh_directions(len(self.pos))
                self.until_turn = self.mob.decision_interval_s


@dataclass
class MobileStep:
    t_s: float
    partition: tuple[tuple[int, ...], ...]
    metrics: MetricsRecord
    merges_cum: int
    splits_cum: int


@dataclass
class MobileRun:
    steps: list[MobileStep]
    trace: FormationTrace
    merges_per_min: float
    splits_per_min: float


def run_mobile(cfg: ScenarioConfig, mob: MobilityConfig, duration_s: float,
               form_cfg: FormationConfig | None = None,
               ss: np.random.SeedSequence | None = None,
               initial_state: NetworkState | None = None) -> MobileRun:
    """Advance the network and re-run formation every reformation period.

    The first formation happens at t = 0 from singletons; each later
    re-formation starts from the carried partition, after dissolving
    coalitions whose members drifted out of exchange range. Event-per-minute
    rates count mobility-era events only (t > 0), so a static network scores
    zero regardless of how much structure forms at startup.
    """
    if ss is None:
        ss = np.random.SeedSequence(cfg.seed)
    deploy_ss, walk_ss = ss.spawn(2)
    if initial_state is None:
        state = deploy_random(cfg, deploy_ss)
    else:
        state = initial_state
    rng = np.random.default_rng(walk_ss)
    move_users = mob.moving in ("users", "all")
    move_eaves = mob.moving in ("eavesdroppers", "all")

    def class_mask(n: int, active: bool) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        if active:
            if mob.moving_indices is None:
                mask[:] = True
            else:
                mask[[i for i in mob.moving_indices if i < n]] = True
        return mask

    user_walk = _Walker(state.user_positions, mob, cfg.area_side_m, rng,
                        class_mask(cfg.n_users, move_users))
    eave_walk = _Walker(state.eavesdropper_positions, mob, cfg.area_side_m, rng,
                        class_mask(cfg.n_eavesdroppers, move_eaves))

    if form_cfg is None and cfg.protocol != "noncoop":
        form_cfg = FormationConfig(protocol=cfg.protocol)
    trace = FormationTrace()
    steps: list[MobileStep] = []
    partition = default_initial_partition(state)
    t = 0.0
    startup_events = 0
    while True:
        state = make_state(user_walk.pos, state.destination_positions,
                           eave_walk.pos, cfg.radio)
        if cfg.protocol == "noncoop":
            payoffs = noncoop_payoffs(state)
            partition = default_initial_partition(state)
            rec = _metrics_from_partition(partition, payoffs)
        else:
            from .game import PayoffCache
            cache = PayoffCache(state, cfg.protocol)
            partition, _ = dissolve_infeasible(partition, state, cache,
                                               t_s=t, trace=trace)
            result = run_formation(partition, form_cfg, state, cache=cache,
                                   t_s=t, trace=trace)
            partition = result.partition
            payoffs = np.array([result.payoffs[i] for i in range(state.n_users)])
            assert np.all(payoffs > NEG_INF), "mobile terminal partition stranded"
            rec = _metrics_from_partition(partition, payoffs)
        if t == 0.0:
            startup_events = len(trace.events)
        mobile_events = trace.events[startup_events:]
        merges_cum = sum(1 for e in mobile_events if e.kind == "merge")
        splits_cum = sum(1 for e in mobile_events if e.kind == "split")
        steps.append(MobileStep(t_s=t, partition=partition, metrics=rec,
                                merges_cum=merges_cum, splits_cum=splits_cum))
        if t + mob.reformation_period_s > duration_s + 1e-9:
            break
        user_walk.advance(mob.reformation_period_s)
        eave_walk.advance(mob.reformation_period_s)
        t += mob.reformation_period_s
    minutes = max(duration_s, mob.reformation_period_s) / 60.0
    last = steps[-1]
    return MobileRun(steps=steps, trace=trace,
                     merges_per_min=last.merges_cum / minutes,
                     splits_per_min=last.splits_cum / minutes)
