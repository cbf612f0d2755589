"""RBF-softmax allocation policies with per-agent parameter blocks.

Agent i observes o_i (its in-neighborhood stocks plus its realized
demand) and allocates fractions of its stock across its outgoing edges
and itself.  Scores are linear in radial features:

    z_ij = sum_l ||o_i - c_il||^2 * theta_ij(l)

over n_c centers c_il placed on the diagonal of the observation box,
and the allocation is a_ij = exp(-z_ij) / sum_j' exp(-z_ij').  The
softmax runs over slots [self] + sorted out-neighbors, so the self
slot is the retained fraction and each agent's block has dimension
n_c * (|out-neighbors| + 1).

The joint parameter is a flat vector cut into per-agent blocks by a
BlockLayout; all learning updates and perturbations act on the flat
view, and block views always alias it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .graphs import CoordinationGraph

KERNELS = ("squared", "gaussian")


@dataclass(frozen=True)
class BlockLayout:
    """Cut points of the flat parameter vector: block i (1-based agent)
    occupies flat[offsets[i-1]:offsets[i]]."""

    dims: tuple[int, ...]

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(np.intp)

    @property
    def num_agents(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return int(self.offsets[-1])

    def block_slice(self, i: int) -> slice:
        return slice(int(self.offsets[i - 1]), int(self.offsets[i]))

    def block(self, flat: np.ndarray, i: int) -> np.ndarray:
        return flat[self.block_slice(i)]

    def block_norms(self, flat: np.ndarray) -> np.ndarray:
        """Euclidean norm of every block of ``flat``, shape (N,)."""
        sq = flat * flat
        return np.sqrt(np.add.reduceat(sq, self.offsets[:-1]))

    def expand(self, per_agent: np.ndarray) -> np.ndarray:
        """Repeat a per-agent scalar across its block coordinates."""
        return np.repeat(np.asarray(per_agent, dtype=float), self.dims)


@dataclass(frozen=True)
class PolicyParams:
    """Immutable joint parameter: flat vector plus its block layout."""

    layout: BlockLayout
    flat: np.ndarray

    def __post_init__(self):
        flat = np.asarray(self.flat, dtype=float)
        if flat.shape != (self.layout.total_dim,):
            raise ValueError(
                f"flat parameter has shape {flat.shape}, layout expects ({self.layout.total_dim},)")
        flat = flat.copy()
        flat.flags.writeable = False
        object.__setattr__(self, "flat", flat)

    def block(self, i: int) -> np.ndarray:
        return self.layout.block(self.flat, i)

    def with_flat(self, flat: np.ndarray) -> "PolicyParams":
        return PolicyParams(self.layout, flat)


def perturb(params: PolicyParams, delta: float, u: np.ndarray) -> PolicyParams:
    """Gaussian-smoothing probe point theta + delta * u (any real delta;
    the oracles, not this op, require delta != 0)."""
    u = np.asarray(u, dtype=float)
    if u.shape != params.flat.shape:
        raise ValueError(f"perturbation has shape {u.shape}, params have {params.flat.shape}")
    return params.with_flat(params.flat + delta * u)


def make_centers(obs_ranges, num_centers: int) -> np.ndarray:
    """num_centers points on the diagonal of the observation box, at
    fractions k/(num_centers+1) for k = 1..num_centers.

    obs_ranges is a sequence of (lo, hi) per observation dimension;
    degenerate ranges are rejected.
    """
    if num_centers < 1:
        raise ValueError(f"num_centers must be >= 1, got {num_centers}")
    lo = np.array([r[0] for r in obs_ranges], dtype=float)
    hi = np.array([r[1] for r in obs_ranges], dtype=float)
    if not np.all(hi > lo):
        bad = int(np.argmax(~(hi > lo)))
        raise ValueError(f"observation range {(lo[bad], hi[bad])} for dimension {bad} is degenerate")
    fracs = np.arange(1, num_centers + 1, dtype=float) / (num_centers + 1)
    return lo[None, :] + fracs[:, None] * (hi - lo)[None, :]


class RbfPolicy:
    """Policy family bound to one coordination graph.

    Holds per-agent centers, the slot structure (self + sorted
    out-neighbors), and the block layout.  ``bind`` attaches a concrete
    parameter vector and yields a callable policy with both a per-agent
    path and a padded whole-population path used by the vectorized
    environment rollout.
    """

    def __init__(self, graph: CoordinationGraph, num_centers: int = 4,
                 stock_range=(-1.0, 2.0), demand_range=(0.0, 0.5),
                 kernel: str = "squared"):
        if kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")
        self.graph = graph
        self.num_centers = int(num_centers)
        self.kernel = kernel
        self.stock_range = (float(stock_range[0]), float(stock_range[1]))
        self.demand_range = (float(demand_range[0]), float(demand_range[1]))

        n = graph.num_agents
        self.out_slots = tuple(graph.out_neighbors(i) for i in graph.agents)
        self.obs_sets = tuple(graph.observation_set(i) for i in graph.agents)
        self.obs_dims = tuple(len(s) + 1 for s in self.obs_sets)
        self.num_slots = tuple(len(s) + 1 for s in self.out_slots)
        self.layout = BlockLayout(tuple(self.num_centers * k for k in self.num_slots))

        self.centers = tuple(
            make_centers([self.stock_range] * len(self.obs_sets[i - 1]) + [self.demand_range],
                         self.num_centers)
            for i in graph.agents)

        # Padded tensors for the whole-population fast path.
        self.obs_max = max(self.obs_dims)
        self.slots_max = max(self.num_slots)
        self.centers_pad = np.zeros((n, self.num_centers, self.obs_max))
        for i in range(n):
            self.centers_pad[i, :, :self.obs_dims[i]] = self.centers[i]
        self.slot_mask = np.zeros((n, self.slots_max), dtype=bool)
        for i in range(n):
            self.slot_mask[i, :self.num_slots[i]] = True
        # Scatter indices taking the flat parameter into the padded
        # (N, slots_max, num_centers) tensor, slot-major within a block.
        idx = []
        for i in range(n):
            base = i * self.slots_max * self.num_centers
            for s in range(self.num_slots[i]):
                for l in range(self.num_centers):
                    idx.append(base + s * self.num_centers + l)
        self._pad_idx = np.array(idx, dtype=np.intp)

    def zero_params(self) -> PolicyParams:
        return PolicyParams(self.layout, np.zeros(self.layout.total_dim))

    def params_from(self, flat: np.ndarray) -> PolicyParams:
        return PolicyParams(self.layout, flat)

    def theta_padded(self, flat: np.ndarray) -> np.ndarray:
        n = self.graph.num_agents
        pad = np.zeros(n * self.slots_max * self.num_centers)
        pad[self._pad_idx] = flat
        return pad.reshape(n, self.slots_max, self.num_centers)

    def features(self, i: int, obs: np.ndarray) -> np.ndarray:
        d = np.asarray(obs, dtype=float) - self.centers[i - 1]
        sqd = np.einsum("ld,ld->l", d, d)
        return sqd if self.kernel == "squared" else np.exp(-sqd)

    def bind(self, params) -> "BoundRbfPolicy":
        flat = params.flat if isinstance(params, PolicyParams) else np.asarray(params, dtype=float)
        if flat.shape != (self.layout.total_dim,):
            raise ValueError(
                f"parameter vector has shape {flat.shape}, policy expects ({self.layout.total_dim},)")
        return BoundRbfPolicy(self, flat)


def rbf_scores(theta_block: np.ndarray, obs: np.ndarray, policy: RbfPolicy, i: int) -> np.ndarray:
    """Per-slot scores z_ij for agent i: slot-major block times radial
    features of the observation."""
    n_c = policy.num_centers
    block = np.asarray(theta_block, dtype=float)
    if block.size != policy.layout.dims[i - 1]:
        raise ValueError(
            f"agent {i} block has {block.size} coordinates, expected {policy.layout.dims[i - 1]}")
    feats = policy.features(i, obs)
    return block.reshape(-1, n_c) @ feats


def softmax_allocation(scores: np.ndarray) -> np.ndarray:
    """exp(-z) normalized over slots; shifted by min(z) for stability
    so the result is invariant to a common offset."""
    z = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError(f"non-finite allocation scores: {z}")
    w = np.exp(-(z - z.min()))
    return w / w.sum()


class BoundRbfPolicy:
    """RbfPolicy with a concrete parameter vector attached."""

    def __init__(self, policy: RbfPolicy, flat: np.ndarray):
        self.policy = policy
        self.flat = flat
        self._theta_pad = policy.theta_padded(flat)

    def __call__(self, i: int, obs: np.ndarray) -> np.ndarray:
        """Out-neighbor allocation fractions for agent i, ordered by
        ascending neighbor index; the retained fraction is implicit."""
        p = self.policy
        z = rbf_scores(p.layout.block(self.flat, i), obs, p, i)
        return softmax_allocation(z)[1:]

    def act_matrix(self, obs_pad: np.ndarray) -> np.ndarray:
        """Allocations for all agents at once.

        obs_pad is (N, obs_max) zero-padded; returns (N, slots_max)
        with slot 0 the retained fraction and invalid slots zero.
        """
        p = self.policy
        diff = obs_pad[:, None, :] - p.centers_pad
        sqd = np.einsum("ild,ild->il", diff, diff)
        feats = sqd if p.kernel == "squared" else np.exp(-sqd)
        z = np.einsum("isl,il->is", self._theta_pad, feats)
        if not np.all(np.isfinite(z[p.slot_mask])):
            raise ValueError("non-finite allocation scores")
        zmin = np.where(p.slot_mask, z, np.inf).min(axis=1, keepdims=True)
        # masked lanes hold padding, not scores; pin them to zmin so the
        # exp never overflows before the mask zeroes them out
        zc = np.where(p.slot_mask, z, zmin)
        w = np.where(p.slot_mask, np.exp(-(zc - zmin)), 0.0)
        return w / w.sum(axis=1, keepdims=True)
