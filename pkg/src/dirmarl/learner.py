"""Distributed zeroth-order policy-gradient training loop.

One learning episode:

1. every agent perturbs its block with a shared joint Gaussian probe
   and the perturbed joint policy runs for one episode,
2. each agent posts its observed value once along each of its outgoing
   reward-routing edges (one-time communication per episode), and
   assembles its local value as the sum of its own value and the
   received ones,
3. a gradient oracle turns the values into per-block estimates and
   every agent ascends its own block.

The message bus performs the exchange, enforces that no value ever
travels outside the routing graph, and counts exactly one message per
edge per episode.  Centralized variants still run the same exchange
(so their communication footprint is identical and audited), but feed
the oracles the directly-computed global value instead of the local
ones; they exist as the comparison baseline.

The two-point flavor re-evaluates the unperturbed policy under the
episode's exact noise trace and ships both values in the same single
message per edge, so the communication contract is flavor-independent.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import GraphArtifacts, LearningGraph
from .oracles import (
    GradientEstimate,
    OracleConfig,
    ResidualState,
    one_point,
    residual,
    sample_perturbation,
    two_point,
)
from .policy import BlockLayout, RbfPolicy
from .warehouse import WarehouseEnv, simulate_rollout

ALGORITHMS = (
    "distributed_one_point",
    "centralized_one_point",
    "distributed_two_point",
    "centralized_two_point",
    "distributed_residual",
    "centralized_residual",
)


def parse_algorithm(name: str, delta: float) -> OracleConfig:
    """Map an algorithm name like ``distributed_two_point`` onto an
    oracle configuration."""
    if name not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    scope, flavor = name.split("_", 1)
    return OracleConfig(delta=delta, flavor=flavor, scope=scope)


class CommunicationViolation(RuntimeError):
    """A value was sent outside the reward-routing graph, or an edge
    was not used exactly once in an episode."""


class TrainingDiverged(RuntimeError):
    """Parameters or gradient turned non-finite; training aborts."""


class MessageBus:
    """Audited transport for the per-episode reward exchange.

    In the default mode the allowed links are exactly the routing
    edges (j, i), each carrying one message per episode from j to i.
    In coordinator mode each cluster's minimum-index member relays for
    the whole cluster: members up, cluster sums across (one link per
    reachable-cluster pair), assembled local values back down.  Both
    modes produce the same local values; the coordinator overlay just
    trades per-edge traffic for relay hops, so its audit checks the
    coordinator topology instead.
    """

    def __init__(self, learning: LearningGraph, *, artifacts: GraphArtifacts | None = None,
                 coordinator_mode: bool = False, keep_log: bool = False):
        self.num_agents = learning.num_agents
        self.coordinator_mode = coordinator_mode
        self.keep_log = keep_log
        self.full_log: list[tuple[int, int, int]] = []
        self.total_messages = 0
        self.episodes_completed = 0
        self._epoch: int | None = None
        self._counts: dict[tuple[int, int], int] = {}
        self._mailbox: dict[int, dict[int, np.ndarray]] = {}

        if not coordinator_mode:
            self.allowed = frozenset(learning.edges)
            self._plan = tuple(sorted(learning.edges))
            self._assembly = {
                i: tuple(sorted(set(learning.in_neighbors[i]) | {i}))
                for i in range(1, self.num_agents + 1)
            }
        else:
            if artifacts is None:
                raise ValueError("coordinator mode needs the full graph artifacts")
            clusters = artifacts.clusters.clusters
            self._members = clusters
            self._coord = tuple(c[0] for c in clusters)  # minimum member relays
            self._coord_of = {a: self._coord[k] for k, c in enumerate(clusters) for a in c}
            self._cluster_of = artifacts.clusters.cluster_of
            self._reached = tuple(artifacts.reach.cluster_reach(k) for k in range(len(clusters)))
            up, across, down = set(), set(), set()
            for k, c in enumerate(clusters):
                for a in c:
                    if a != self._coord[k]:
                        up.add((a, self._coord[k]))
                        down.add((self._coord[k], a))
                for b in self._reached[k]:
                    if b != k:
                        across.add((self._coord[b], self._coord[k]))
            self._up_edges = tuple(sorted(up))
            self._across_edges = tuple(sorted(across))
            self._down_edges = tuple(sorted(down))
            self.allowed = frozenset(up | across | down)
            self._plan = self._up_edges + self._across_edges + self._down_edges

    @property
    def expected_messages(self) -> int:
        """Messages per episode: the routing-edge count in default
        mode, the overlay link count in coordinator mode."""
        return len(self._plan)

    def begin_episode(self, epoch: int) -> None:
        if self._epoch is not None:
            raise CommunicationViolation(f"episode {self._epoch} still open")
        self._epoch = epoch
        self._counts = {}
        self._mailbox = {i: {} for i in range(1, self.num_agents + 1)}

    def send(self, sender: int, receiver: int, payload: np.ndarray) -> None:
        if self._epoch is None:
            raise CommunicationViolation("no episode in progress")
        edge = (sender, receiver)
        if edge not in self.allowed:
            raise CommunicationViolation(
                f"message {sender} -> {receiver} is outside the reward-routing graph")
        self._counts[edge] = self._counts.get(edge, 0) + 1
        self._mailbox[receiver][sender] = np.array(payload, dtype=float, copy=True)
        if self.keep_log:
            self.full_log.append((self._epoch, sender, receiver))

    def finish_episode(self) -> int:
        if self._epoch is None:
            raise CommunicationViolation("no episode in progress")
        for edge in self._plan:
            got = self._counts.get(edge, 0)
            if got != 1:
                raise CommunicationViolation(
                    f"edge {edge[0]} -> {edge[1]} carried {got} messages in episode "
                    f"{self._epoch}, expected exactly 1")
        count = sum(self._counts.values())
        self.total_messages += count
        self.episodes_completed += 1
        self._epoch = None
        return count

    def exchange(self, values: np.ndarray) -> np.ndarray:
        """Run the full per-episode exchange on a (k, N) payload matrix
        (column j is agent j's outgoing payload) and return the (k, N)
        assembled local values."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[1] != self.num_agents:
            raise ValueError(f"payload has {values.shape[1]} columns, expected {self.num_agents}")
        if not self.coordinator_mode:
            for j, i in self._plan:
                self.send(j, i, values[:, j - 1])
            hat = np.empty_like(values)
            for i in range(1, self.num_agents + 1):
                acc = None
                for j in self._assembly[i]:
                    col = values[:, i - 1] if j == i else self._mailbox[i][j]
                    acc = col.copy() if acc is None else acc + col
                hat[:, i - 1] = acc
            return hat
        return self._exchange_via_coordinators(values)

    def _exchange_via_coordinators(self, values: np.ndarray) -> np.ndarray:
        for a, c in self._up_edges:
            self.send(a, c, values[:, a - 1])
        sums = []
        for k, members in enumerate(self._members):
            coord = self._coord[k]
            acc = None
            for a in members:
                col = values[:, a - 1] if a == coord else self._mailbox[coord][a]
                acc = col.copy() if acc is None else acc + col
            sums.append(acc)
        for b_coord, a_coord in self._across_edges:
            b = self._cluster_of[b_coord]
            self.send(b_coord, a_coord, sums[b])
        hat = np.empty_like(values)
        for k, members in enumerate(self._members):
            coord = self._coord[k]
            acc = None
            for b in self._reached[k]:
                col = sums[k] if b == k else self._mailbox[coord][self._coord[b]]
                acc = col.copy() if acc is None else acc + col
            for a in members:
                if a != coord:
                    self.send(coord, a, acc)
                hat[:, a - 1] = acc
        return hat


def exchange_rewards(bus: MessageBus, values: np.ndarray) -> np.ndarray:
    """Assembled local values for a (N,) per-agent value vector."""
    return bus.exchange(np.asarray(values, dtype=float)[None, :])[0]


@dataclass(frozen=True)
class LearnerConfig:
    step_size: float
    num_epochs: int
    oracle: OracleConfig
    horizon: int
    discount: float = 1.0

    def __post_init__(self):
        if self.step_size < 0.0:
            raise ValueError(f"step_size must be >= 0, got {self.step_size}")
        if self.num_epochs < 1:
            raise ValueError(f"num_epochs must be >= 1, got {self.num_epochs}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")


@dataclass(frozen=True)
class EpisodeRecord:
    epoch: int
    observed_values: np.ndarray   # W_i of the perturbed episode, (N,)
    local_values: np.ndarray      # assembled hat-W_i, (N,)
    global_value: float           # sum of observed values
    gradient_norms: np.ndarray    # per-agent ||g_i||, (N,)
    message_count: int
    wall_clock: float


class WarehouseEvaluator:
    """Adapter giving the training loop one-episode value feedback from
    warehouse rollouts.  Two evaluations with the same noise trace see
    the same realized randomness."""

    def __init__(self, env: WarehouseEnv, policy: RbfPolicy, horizon: int,
                 discount: float = 1.0):
        if policy.graph is not env.graph and policy.graph.edges != env.graph.edges:
            raise ValueError("policy and environment are built on different graphs")
        self.env = env
        self.policy = policy
        self.horizon = horizon
        self.discount = discount
        self.layout = policy.layout
        self.num_agents = env.num_agents

    def draw_noise(self, rng: np.random.Generator):
        return self.env.draw_noise_trace(self.horizon, rng)

    def evaluate(self, theta: np.ndarray, noise) -> np.ndarray:
        ro = simulate_rollout(self.env, self.policy.bind(theta), self.horizon,
                              self.discount, noise_trace=noise)
        return ro.returns


def run_episode(theta: np.ndarray, evaluator, cfg: LearnerConfig, bus: MessageBus,
                epoch: int, rng: np.random.Generator | None = None, *,
                perturbation: np.ndarray | None = None, noise=None,
                residual_state: ResidualState | None = None,
                ) -> tuple[np.ndarray, EpisodeRecord, ResidualState]:
    """One full learning episode; returns the updated joint parameter,
    the episode record, and the advanced residual carry state."""
    layout: BlockLayout = evaluator.layout
    ocfg = cfg.oracle
    n = evaluator.num_agents
    started = time.perf_counter()

    if rng is None and (perturbation is None or noise is None):
        raise ValueError("run_episode needs an rng when perturbation or noise is not supplied")
    u = perturbation if perturbation is not None else sample_perturbation(layout, rng)
    if noise is None:
        noise = evaluator.draw_noise(rng)
    if residual_state is None:
        residual_state = ResidualState.initial(n)

    try:
        w_pert = np.asarray(evaluator.evaluate(theta + ocfg.delta * u, noise), dtype=float)
        if ocfg.flavor == "two_point":
            w_base = np.asarray(evaluator.evaluate(theta, noise), dtype=float)
            payload = np.stack([w_pert, w_base])
        else:
            w_base = None
            payload = w_pert[None, :]
    except ValueError as exc:
        # a runaway step can leave parameters finite yet large enough to
        # overflow the allocation scores; that is divergence, not a bug
        if np.abs(theta).max(initial=0.0) <= 1e100:
            raise
        raise TrainingDiverged(
            f"evaluation failed at epoch {epoch} with parameter magnitude "
            f"{np.abs(theta).max():.3g} ({ocfg.scope} {ocfg.flavor}): {exc}") from exc

    bus.begin_episode(epoch)
    hat = bus.exchange(payload)
    count = bus.finish_episode()
    hat_pert = hat[0]

    if ocfg.scope == "centralized":
        vals_pert = np.full(n, w_pert.sum())
        vals_base = np.full(n, w_base.sum()) if w_base is not None else None
    else:
        vals_pert = hat_pert
        vals_base = hat[1] if w_base is not None else None

    if ocfg.flavor == "one_point":
        est = one_point(vals_pert, u, ocfg.delta, layout)
    elif ocfg.flavor == "two_point":
        est = two_point(vals_pert, vals_base, u, ocfg.delta, layout)
    else:
        est, residual_state = residual(vals_pert, residual_state, u, ocfg.delta, layout)

    with np.errstate(over="ignore", invalid="ignore"):  # guard below turns overflow into an abort
        theta_next = theta + cfg.step_size * est.flat
    if not np.all(np.isfinite(theta_next)):
        bad = [i for i in range(1, n + 1)
               if not np.all(np.isfinite(layout.block(theta_next, i)))]
        raise TrainingDiverged(
            f"non-finite parameters for agents {bad} after epoch {epoch} "
            f"({ocfg.scope} {ocfg.flavor}, step_size {cfg.step_size})")

    record = EpisodeRecord(
        epoch=epoch,
        observed_values=w_pert,
        local_values=hat_pert,
        global_value=float(w_pert.sum()),
        gradient_norms=est.block_norms(),
        message_count=count,
        wall_clock=time.perf_counter() - started,
    )
    return theta_next, record, residual_state


@dataclass
class TrainResult:
    records: list[EpisodeRecord]
    theta_final: np.ndarray
    bus: MessageBus


def train(theta0: np.ndarray, evaluator, cfg: LearnerConfig, bus: MessageBus,
          rng: np.random.Generator | None = None, *,
          perturbations: Sequence[np.ndarray] | None = None,
          noise_traces: Sequence | None = None,
          on_episode=None) -> TrainResult:
    """Run ``cfg.num_epochs`` episodes.  Shared streams for
    cross-algorithm comparisons are passed as ``perturbations`` (one
    joint probe per epoch) and ``noise_traces``; anything not supplied
    is drawn from ``rng``.  ``on_episode(epoch, theta, record)`` runs
    after every update (checkpointing, progress)."""
    if perturbations is not None and len(perturbations) < cfg.num_epochs:
        raise ValueError(f"need {cfg.num_epochs} shared perturbations, got {len(perturbations)}")
    if noise_traces is not None and len(noise_traces) < cfg.num_epochs:
        raise ValueError(f"need {cfg.num_epochs} shared noise traces, got {len(noise_traces)}")
    theta = np.array(theta0, dtype=float)
    if theta.shape != (evaluator.layout.total_dim,):
        raise ValueError(f"theta0 has shape {theta.shape}, "
                         f"expected ({evaluator.layout.total_dim},)")
    state = ResidualState.initial(evaluator.num_agents)
    records: list[EpisodeRecord] = []
    for k in range(cfg.num_epochs):
        theta, rec, state = run_episode(
            theta, evaluator, cfg, bus, k, rng,
            perturbation=None if perturbations is None else perturbations[k],
            noise=None if noise_traces is None else noise_traces[k],
            residual_state=state)
        records.append(rec)
        if on_episode is not None:
            on_episode(k, theta, rec)
    return TrainResult(records, theta, bus)


# -- step-size / smoothing schedule ----------------------------------


@dataclass(frozen=True)
class ScheduleResult:
    delta: float
    eta: float
    epochs_required: int | None


def schedule_bound_constant(j_star: float, j_smoothed_init: float, lipschitz: float,
                            value_max: float, sigma_max: float) -> float:
    """Constant B entering the epoch-count requirement:
    J* - J^delta(theta^0) + L^4 (J_0^2 + sigma_0^2) / 2."""
    return j_star - j_smoothed_init + lipschitz ** 4 * (value_max ** 2 + sigma_max ** 2) / 2.0


def accuracy_schedule(eps: float, lipschitz: float, total_dim: int, epochs: int,
                      bound_b: float | None = None) -> ScheduleResult:
    """Smoothing radius and step size guaranteeing an eps-accurate
    stationary point of the smoothed objective:

        delta = eps / (L sqrt(d)),   eta = eps^1.5 / (d^1.5 sqrt(K)),

    plus, when the bound constant B is supplied, the number of epochs
    K >= d^3 B^2 / eps^5 required for the guarantee."""
    if eps <= 0.0 or lipschitz <= 0.0:
        raise ValueError(f"eps and lipschitz must be > 0, got {eps}, {lipschitz}")
    if total_dim < 1 or epochs < 1:
        raise ValueError(f"total_dim and epochs must be >= 1, got {total_dim}, {epochs}")
    delta = eps / (lipschitz * math.sqrt(total_dim))
    eta = eps ** 1.5 / (total_dim ** 1.5 * math.sqrt(epochs))
    required = None
    if bound_b is not None:
        required = math.ceil(total_dim ** 3 * bound_b ** 2 / eps ** 5)
    return ScheduleResult(delta, eta, required)
