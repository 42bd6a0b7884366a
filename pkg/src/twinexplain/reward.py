"""Reward metrics over simulated outcomes and one-shot reward-profile regression.

A reward profile is a weight vector over six features: lane transitions,
time headway, faster speed, slower speed, force safety and a bias. Given one
observed decision, the profile is fitted so that hypothetical outcomes close
to the observed one receive high reward.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import qr, solve_triangular

log = logging.getLogger(__name__)

NO_LEADER = math.inf
FEATURE_NAMES = ("lane", "headway", "faster", "slower", "force", "bias")


class EmptyHypotheticalSet(ValueError):
    pass


@dataclass(frozen=True)
class Outcome:
    """Result of following an action for the planning horizon."""

    lt: int        # signed lane transitions, left positive
    fs: float      # final forward speed, m/s
    dh: float      # final distance headway, m (inf if no leader)
    ef: float      # max environmental force magnitude, N
    ad: bool       # goals accomplished

    def __post_init__(self):
        if self.fs < 0:
            raise ValueError("final speed must be non-negative")
        if self.ef < 0:
            raise ValueError("force magnitude must be non-negative")
        if not (self.dh >= 0):
            raise ValueError("headway must be non-negative or inf")

    @property
    def has_leader(self) -> bool:
        return math.isfinite(self.dh)

    def to_dict(self) -> dict:
        return {"lt": self.lt, "fs": self.fs, "dh": None if not self.has_leader else self.dh,
                "ef": self.ef, "ad": self.ad}


@dataclass(frozen=True)
class RewardConfig:
    beta_dh: float = 2.0      # s, two-second rule
    beta_fs: float = 31.3     # m/s, nominal speed limit
    beta_ef: float = 1000.0   # N

    def __post_init__(self):
        if min(self.beta_dh, self.beta_fs, self.beta_ef) <= 0:
            raise ValueError("reward constants must be positive")


@dataclass(frozen=True)
class OutcomeDistanceConfig:
    alpha_o: float = 0.1
    alpha_lt: float = 100.0
    alpha_fs: float = 1.0
    alpha_dh: float = 0.1
    alpha_ef: float = 0.01
    alpha_ad: float = 100.0
    headway_cap: float = 2.0  # s, stands in for the time headway of a leaderless outcome

    def __post_init__(self):
        if min(self.alpha_o, self.alpha_lt, self.alpha_fs, self.alpha_dh, self.alpha_ef,
               self.alpha_ad, self.headway_cap) <= 0:
            raise ValueError("distance weights must be positive")


@dataclass(frozen=True)
class RewardProfile:
    weights: tuple[float, ...]
    rank: int | None = field(default=None, compare=False)
    residual: float | None = field(default=None, compare=False)

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != 6:
            raise ValueError("a reward profile has exactly six weights")
        if not all(math.isfinite(x) for x in w):
            raise ValueError("profile weights must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def rank_deficient(self) -> bool:
        return self.rank is not None and self.rank < 6

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights)

    def scaled(self, c: float) -> "RewardProfile":
        return RewardProfile(tuple(c * w for w in self.weights))

    def to_dict(self) -> dict:
        d = {name: w for name, w in zip(FEATURE_NAMES, self.weights)}
        if self.rank is not None:
            d["rank"] = self.rank
            d["residual"] = self.residual
        return d


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def reward_features(o: Outcome, cfg: RewardConfig = RewardConfig()) -> np.ndarray:
    r0 = sigmoid(-o.lt)
    if not o.has_leader:
        r1 = 1.0
    elif o.fs == 0:
        log.debug("degenerate speed: fs = 0 with a leader, headway taken as satisfied")
        r1 = 1.0
    else:
        r1 = min(o.dh / (cfg.beta_dh * o.fs), 1.0)
    r2 = math.exp(0.05 * (o.fs - cfg.beta_fs))
    r3 = math.exp(-0.05 * o.fs)
    r4 = 1.0 if o.ef <= cfg.beta_ef else 0.0
    return np.array([r0, r1, r2, r3, r4, 1.0])


def reward(o: Outcome, p: RewardProfile, cfg: RewardConfig = RewardConfig()) -> float:
    return float(reward_features(o, cfg) @ p.as_array())


STOPPED_SPEED = 0.1  # m/s; below this dh/fs stops meaning anything


def _time_headway(o: Outcome, cap: float) -> float:
    if not o.has_leader or o.fs <= STOPPED_SPEED:
        return cap
    return o.dh / o.fs


def outcome_distance(o: Outcome, o2: Outcome,
                     cfg: OutcomeDistanceConfig = OutcomeDistanceConfig()) -> float:
    total = cfg.alpha_lt * (o.lt - o2.lt) ** 2
    if o.fs + o2.fs > 0:
        total += cfg.alpha_fs * (2 * (o.fs - o2.fs) / (o.fs + o2.fs)) ** 2
    else:
        log.debug("degenerate speed pair: both final speeds zero")
    if o.has_leader or o2.has_leader:
        total += cfg.alpha_dh * (_time_headway(o, cfg.headway_cap)
                                 - _time_headway(o2, cfg.headway_cap)) ** 2
    total += cfg.alpha_ef * (o.ef - o2.ef) ** 2
    total += cfg.alpha_ad * (int(o.ad) - int(o2.ad)) ** 2
    return cfg.alpha_o * math.sqrt(total)


@dataclass(frozen=True)
class LstsqSolution:
    x: np.ndarray
    rank: int
    residual: float


def pivoted_qr_lstsq(A: np.ndarray, b: np.ndarray, rcond: float | None = None) -> LstsqSolution:
    """Least squares through Householder QR with column pivoting.

    Columns whose pivot falls below ``rcond * |R[0, 0]|`` are treated as
    dependent and their coefficients set to zero (the basic solution).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if rcond is None:
        rcond = np.finfo(float).eps * min(m, n)
    Q, R, piv = qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = 0
    if diag.size and diag[0] > 0:
        rank = int(np.sum(diag > rcond * diag[0]))
    x = np.zeros(n)
    if rank:
        qtb = Q[:, :rank].T @ b
        x[piv[:rank]] = solve_triangular(R[:rank, :rank], qtb)
    residual = float(np.linalg.norm(A @ x - b))
    return LstsqSolution(x, rank, residual)


def regression_system(observed: Outcome, hypothetical: Sequence[Outcome],
                      cfg_r: RewardConfig = RewardConfig(),
                      cfg_d: OutcomeDistanceConfig = OutcomeDistanceConfig()
                      ) -> tuple[np.ndarray, np.ndarray]:
    A = np.array([reward_features(o, cfg_r) for o in hypothetical]).reshape(-1, 6)
    b = np.array([math.exp(-outcome_distance(observed, o, cfg_d)) for o in hypothetical])
    return A, b


def learn_profile(observed: Outcome, hypothetical: Sequence[Outcome],
                  cfg_r: RewardConfig = RewardConfig(),
                  cfg_d: OutcomeDistanceConfig = OutcomeDistanceConfig()) -> RewardProfile:
    if not hypothetical:
        raise EmptyHypotheticalSet("need at least one hypothetical outcome")
    A, b = regression_system(observed, hypothetical, cfg_r, cfg_d)
    sol = pivoted_qr_lstsq(A, b)
    return RewardProfile(tuple(sol.x), rank=sol.rank, residual=sol.residual)
