"""Warehouse resource-allocation environment on a coordination graph.

Each agent i holds a stock m_i(t) and, each step, ships fractions of
it along its outgoing edges while receiving its in-neighbors'
shipments and serving a stochastic demand:

    m_i(t+1) = m_i(t) - sum_{j in out(i)} a_ij(t) m_i(t)
               + sum_{j in in(i)} a_ji(t) m_j(t) - d_i(t)

    d_i(t) = A_i (1 - sin(w_it * t)) + w_it,   w_it ~ N(0, sigma_w^2)

Reward is 0 while the pre-transition stock is non-negative and
-m_i(t)^2 once it backlogs.  Agent i observes the stocks of its closed
in-neighborhood plus its own realized same-step demand, so the
observation has |in(i)| + 2 entries.

Randomness is reified as a NoiseTrace (initial jitter plus every
demand shock); a rollout driven by a trace instead of an rng replays
bit-identically, which is what the learner's paired evaluations and
the decoupling checks rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graphs import CoordinationGraph


class RolloutError(RuntimeError):
    """Episode aborted: non-finite state or a broken action contract."""


@dataclass(frozen=True)
class WarehouseConfig:
    graph: CoordinationGraph
    initial_stock_mean: float = 1.0
    initial_stock_jitter: float = 0.01
    demand_amplitude: float | Sequence[float] = 0.2
    demand_noise_std: float = 0.1
    fixed_initial_state: bool = False
    clip_demand_noise: bool = False
    shared_demand_noise: bool = False


@dataclass(frozen=True)
class EnvironmentSpec:
    """Dimensional metadata of an environment plus episode shape."""

    num_agents: int
    obs_dims: tuple[int, ...]
    action_dims: tuple[int, ...]
    horizon: int
    discount: float

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")


@dataclass
class WarehouseState:
    stocks: np.ndarray  # (N,)
    time: int


@dataclass(frozen=True)
class NoiseTrace:
    """Realized randomness of one episode: initial stock jitter (N,)
    and demand shocks (T, N).  Replayable."""

    initial_jitter: np.ndarray
    demand_noise: np.ndarray


class WarehouseEnv:
    """WarehouseConfig plus everything precomputed for fast stepping."""

    def __init__(self, config: WarehouseConfig):
        g = config.graph
        n = g.num_agents
        amp = np.asarray(config.demand_amplitude, dtype=float)
        if amp.ndim == 0:
            amp = np.full(n, float(amp))
        if amp.shape != (n,):
            raise ValueError(f"demand_amplitude must be scalar or length {n}, got shape {amp.shape}")
        floor = config.initial_stock_mean - config.initial_stock_jitter
        if np.any(amp <= 0.0) or np.any(amp >= floor):
            bad = int(np.argmax((amp <= 0.0) | (amp >= floor))) + 1
            raise ValueError(
                f"demand amplitude {amp[bad - 1]} for agent {bad} must lie in (0, {floor}) "
                "so demand never exceeds the worst-case initial stock")
        if config.demand_noise_std < 0.0:
            raise ValueError(f"demand_noise_std must be >= 0, got {config.demand_noise_std}")
        if config.initial_stock_jitter < 0.0:
            raise ValueError(f"initial_stock_jitter must be >= 0, got {config.initial_stock_jitter}")

        self.config = config
        self.graph = g
        self.num_agents = n
        self.amplitude = amp

        self.out_slots = tuple(g.out_neighbors(i) for i in g.agents)
        self.obs_sets = tuple(g.observation_set(i) for i in g.agents)
        self.obs_dims = tuple(len(s) + 1 for s in self.obs_sets)
        self.num_slots = tuple(len(s) + 1 for s in self.out_slots)
        self.obs_max = max(self.obs_dims)
        self.slots_max = max(self.num_slots)

        # Flat gather indices filling the padded observation matrix.
        rows, cols, srcs = [], [], []
        for i in range(n):
            for k, j in enumerate(self.obs_sets[i]):
                rows.append(i)
                cols.append(k)
                srcs.append(j - 1)
        self._obs_rows = np.array(rows, dtype=np.intp)
        self._obs_cols = np.array(cols, dtype=np.intp)
        self._obs_srcs = np.array(srcs, dtype=np.intp)
        self._demand_col = np.array([len(s) for s in self.obs_sets], dtype=np.intp)

        # Edge arrays ordered by (source, target): fixed summation order.
        e_src, e_dst, e_slot = [], [], []
        for i in range(n):
            for k, j in enumerate(self.out_slots[i]):
                e_src.append(i)
                e_dst.append(j - 1)
                e_slot.append(k + 1)  # slot 0 is the retained fraction
        self._e_src = np.array(e_src, dtype=np.intp)
        self._e_dst = np.array(e_dst, dtype=np.intp)
        self._e_slot = np.array(e_slot, dtype=np.intp)
        self._out_mask = np.zeros((n, self.slots_max), dtype=bool)
        for i in range(n):
            self._out_mask[i, 1:self.num_slots[i]] = True

    # -- randomness -------------------------------------------------

    def draw_noise_trace(self, horizon: int, rng: np.random.Generator) -> NoiseTrace:
        cfg = self.config
        n = self.num_agents
        if cfg.fixed_initial_state or cfg.initial_stock_jitter == 0.0:
            jitter = np.zeros(n)
        else:
            jitter = rng.uniform(-cfg.initial_stock_jitter, cfg.initial_stock_jitter, size=n)
        if cfg.demand_noise_std == 0.0:
            w = np.zeros((horizon, n))
        elif cfg.shared_demand_noise:
            w = np.repeat(rng.normal(0.0, cfg.demand_noise_std, size=(horizon, 1)), n, axis=1)
        else:
            w = rng.normal(0.0, cfg.demand_noise_std, size=(horizon, n))
        if cfg.clip_demand_noise and cfg.demand_noise_std > 0.0:
            lim = 3.0 * cfg.demand_noise_std
            w = np.clip(w, -lim, lim)
        return NoiseTrace(jitter, w)

    def check_trace(self, trace: NoiseTrace, horizon: int) -> None:
        if trace.initial_jitter.shape != (self.num_agents,):
            raise ValueError(f"noise trace jitter has shape {trace.initial_jitter.shape}, "
                             f"expected ({self.num_agents},)")
        if trace.demand_noise.shape != (horizon, self.num_agents):
            raise ValueError(f"noise trace demand shocks have shape {trace.demand_noise.shape}, "
                             f"expected ({horizon}, {self.num_agents})")

    # -- dynamics ---------------------------------------------------

    def initial_stocks(self, trace: NoiseTrace) -> np.ndarray:
        return self.config.initial_stock_mean + trace.initial_jitter

    def demand_row(self, t: int, w_row: np.ndarray) -> np.ndarray:
        return self.amplitude * (1.0 - np.sin(w_row * t)) + w_row

    def observation_matrix(self, stocks: np.ndarray, demands: np.ndarray) -> np.ndarray:
        obs = np.zeros((self.num_agents, self.obs_max))
        obs[self._obs_rows, self._obs_cols] = stocks[self._obs_srcs]
        obs[np.arange(self.num_agents), self._demand_col] = demands
        return obs

    def observation(self, i: int, stocks: np.ndarray, demand_i: float) -> np.ndarray:
        idx = np.array(self.obs_sets[i - 1], dtype=np.intp) - 1
        return np.concatenate([stocks[idx], [demand_i]])

    def validate_allocations(self, alloc: np.ndarray, where: str = "") -> None:
        out = np.where(self._out_mask, alloc, 0.0)
        viol = (out < -1e-12) | (out > 1.0 + 1e-12)
        if viol.any():
            bad = int(np.argmax(viol.any(axis=1))) + 1
            raise RolloutError(f"agent {bad} allocation fraction outside [0, 1]{where}")
        sums = out.sum(axis=1)
        if np.any(sums > 1.0 + 1e-12):
            bad = int(np.argmax(sums > 1.0 + 1e-12)) + 1
            raise RolloutError(f"agent {bad} ships more than its whole stock "
                               f"(fraction sum {sums[bad - 1]}){where}")

    def apply_transition(self, stocks: np.ndarray, alloc: np.ndarray,
                         demands: np.ndarray) -> np.ndarray:
        # Overflow is allowed to surface as inf; the callers' finiteness
        # guard turns it into a diagnostic abort.
        with np.errstate(over="ignore", invalid="ignore"):
            shipped = alloc[self._e_src, self._e_slot] * stocks[self._e_src]
            outflow = np.bincount(self._e_src, weights=shipped, minlength=self.num_agents)
            inflow = np.bincount(self._e_dst, weights=shipped, minlength=self.num_agents)
            return stocks - outflow + inflow - demands


def step_rewards(stocks: np.ndarray) -> np.ndarray:
    """Backlog penalty on the pre-transition stock: zero when
    non-negative, -m^2 otherwise."""
    with np.errstate(over="ignore"):
        return np.where(stocks >= 0.0, 0.0, -stocks * stocks)


def demand(cfg, i: int, t: int, w: float) -> float:
    """Demand of agent i at step t under shock w."""
    env = cfg if isinstance(cfg, WarehouseEnv) else WarehouseEnv(cfg)
    return float(env.amplitude[i - 1] * (1.0 - np.sin(w * t)) + w)


def env_reset(env: WarehouseEnv, rng: np.random.Generator | None = None,
              trace: NoiseTrace | None = None) -> tuple[WarehouseState, NoiseTrace]:
    """Fresh initial state; draws the jitter (and returns it inside a
    zero-length trace) unless a replay trace is supplied."""
    if trace is None:
        if rng is None:
            raise ValueError("env_reset needs an rng or a replay trace")
        jitter = env.draw_noise_trace(0, rng).initial_jitter
        trace = NoiseTrace(jitter, np.zeros((0, env.num_agents)))
    return WarehouseState(env.initial_stocks(trace), 0), trace


def env_step(state: WarehouseState, env: WarehouseEnv, actions,
             rng: np.random.Generator | None = None,
             demand_noise: np.ndarray | None = None) -> tuple[WarehouseState, np.ndarray]:
    """One transition.  ``actions`` is a per-agent sequence of
    out-neighbor fractions (ascending neighbor order).  The demand
    shock row comes from ``demand_noise`` when replaying, else is drawn
    from ``rng``.  Returns the next state and the per-agent rewards of
    the current step."""
    alloc = _assemble_allocations(env, actions)
    env.validate_allocations(alloc, where=f" at step {state.time}")
    if demand_noise is None:
        if rng is None:
            raise ValueError("env_step needs an rng or an explicit demand_noise row")
        demand_noise = env.draw_noise_trace(1, rng).demand_noise[0]
    demands = env.demand_row(state.time, demand_noise)
    rewards = step_rewards(state.stocks)
    nxt = env.apply_transition(state.stocks, alloc, demands)
    if not np.all(np.isfinite(nxt)):
        bad = np.flatnonzero(~np.isfinite(nxt)) + 1
        raise RolloutError(f"non-finite stock for agents {bad.tolist()} after step {state.time}")
    return WarehouseState(nxt, state.time + 1), rewards


def _assemble_allocations(env: WarehouseEnv, actions) -> np.ndarray:
    if isinstance(actions, np.ndarray) and actions.shape == (env.num_agents, env.slots_max):
        return actions
    alloc = np.zeros((env.num_agents, env.slots_max))
    for i in range(env.num_agents):
        fr = np.asarray(actions[i], dtype=float)
        k = env.num_slots[i] - 1
        if fr.shape != (k,):
            raise RolloutError(f"agent {i + 1} must allocate over {k} out-neighbors, "
                               f"got shape {fr.shape}")
        alloc[i, 1:k + 1] = fr
        alloc[i, 0] = 1.0 - fr.sum()
    return alloc


@dataclass(frozen=True)
class Rollout:
    """Everything one episode produced.  ``stocks`` has T+1 rows (the
    last is the terminal state), every other per-step array has T."""

    stocks: np.ndarray        # (T+1, N)
    rewards: np.ndarray       # (T, N)
    returns: np.ndarray       # (N,) discounted reward sums
    observations: np.ndarray  # (T, N, obs_max), zero padded
    obs_dims: tuple[int, ...]
    actions: np.ndarray       # (T, N, slots_max); slot 0 retained fraction
    demands: np.ndarray       # (T, N)
    noise_trace: NoiseTrace
    discount: float

    def observation(self, i: int, t: int) -> np.ndarray:
        return self.observations[t, i - 1, :self.obs_dims[i - 1]]


def simulate_rollout(env: WarehouseEnv, policy, horizon: int, discount: float = 1.0,
                     rng: np.random.Generator | None = None,
                     noise_trace: NoiseTrace | None = None) -> Rollout:
    """Run one episode.  ``policy`` is either an object exposing
    ``act_matrix(padded_obs) -> padded allocations`` or a plain
    callable ``(agent, obs) -> out-neighbor fractions``.  Passing
    ``noise_trace`` replays that exact randomness; otherwise a fresh
    trace is drawn from ``rng`` and recorded."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if not 0.0 < discount <= 1.0:
        raise ValueError(f"discount must lie in (0, 1], got {discount}")
    if noise_trace is None:
        if rng is None:
            raise ValueError("simulate_rollout needs an rng or a noise trace")
        noise_trace = env.draw_noise_trace(horizon, rng)
    env.check_trace(noise_trace, horizon)

    n = env.num_agents
    stocks = np.empty((horizon + 1, n))
    rewards = np.empty((horizon, n))
    observations = np.empty((horizon, n, env.obs_max))
    actions = np.empty((horizon, n, env.slots_max))
    demands = np.empty((horizon, n))

    fast = hasattr(policy, "act_matrix")
    m = env.initial_stocks(noise_trace)
    stocks[0] = m
    for t in range(horizon):
        d = env.demand_row(t, noise_trace.demand_noise[t])
        obs = env.observation_matrix(m, d)
        if fast:
            alloc = policy.act_matrix(obs)
        else:
            alloc = _assemble_allocations(
                env, [policy(i, obs[i - 1, :env.obs_dims[i - 1]]) for i in env.graph.agents])
        env.validate_allocations(alloc, where=f" at step {t}")
        rewards[t] = step_rewards(m)
        m = env.apply_transition(m, alloc, d)
        if not np.all(np.isfinite(m)):
            bad = np.flatnonzero(~np.isfinite(m)) + 1
            raise RolloutError(f"non-finite stock for agents {bad.tolist()} after step {t}")
        observations[t] = obs
        actions[t] = alloc
        demands[t] = d
        stocks[t + 1] = m

    weights = discount ** np.arange(horizon)
    returns = weights @ rewards
    return Rollout(stocks, rewards, returns, observations, env.obs_dims,
                   actions, demands, noise_trace, discount)


def environment_spec(env: WarehouseEnv, horizon: int, discount: float) -> EnvironmentSpec:
    return EnvironmentSpec(env.num_agents, env.obs_dims,
                           tuple(k - 1 for k in env.num_slots), horizon, discount)


def write_rollout_jsonl(rollout: Rollout, env: WarehouseEnv, path) -> None:
    """Debug dump, one JSON object per step plus a leading meta line."""
    horizon = rollout.rewards.shape[0]
    with open(path, "w") as fh:
        fh.write(json.dumps({"type": "meta", "num_agents": env.num_agents,
                             "horizon": horizon, "discount": rollout.discount}) + "\n")
        for t in range(horizon):
            rec = {
                "t": t,
                "stocks": rollout.stocks[t].tolist(),
                "demands": rollout.demands[t].tolist(),
                "rewards": rollout.rewards[t].tolist(),
                "actions": [rollout.actions[t, i, 1:env.num_slots[i]].tolist()
                            for i in range(env.num_agents)],
            }
            fh.write(json.dumps(rec) + "\n")


def read_rollout_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
