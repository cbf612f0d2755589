"""Independent numerical oracles for the library's correctness claims.

Everything here deliberately bypasses the learner's own gradient path:
synthetic decomposable objectives whose variable dependence mirrors a
coordination graph and whose gradients, Gaussian-smoothed values and
smoothed gradients are closed form; Monte-Carlo smoothed-gradient
estimators; central finite differences; empirical second moments of
the zeroth-order estimators.  The test suite checks the learning stack
against these, never against itself.

Statistical checks report estimated standard errors and compare at a
z-multiple instead of hard-coded tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import CoordinationGraph, build_artifacts, build_graph
from .oracles import (
    one_point_second_moment_bound,
    two_point_second_moment_bound,
)
from .policy import BlockLayout

FAMILIES = ("quadratic", "cosine", "abs")

_erf = np.vectorize(math.erf, otypes=[float])


@dataclass(frozen=True)
class SyntheticObjective:
    """Sum of per-agent terms aligned to a coordination graph.

    The term of agent j reads exactly the parameter blocks of the
    agents that can influence j: its graph ancestors plus j itself.
    Consequently the block-i gradient of the global sum equals the
    block-i gradient of agent i's local sum over its reachable set,
    which is the structural fact the learner relies on.

    Families:
      quadratic  strictly concave; smoothing only shifts the value by
                 a constant, so the smoothed gradient is the gradient
      cosine     bounded and Lipschitz; smoothing damps the amplitude
                 by exp(-delta^2 ||w||^2 / 2)
      abs        non-smooth kinks; the smoothed coordinate response is
                 an error function

    ``weights`` holds the per-coordinate curvatures (quadratic),
    frequency vector (cosine) or slopes (abs); ``offsets`` is the value
    offset, reused as the phase for cosine.
    """

    family: str
    layout: BlockLayout
    deps: tuple[tuple[int, ...], ...]       # per term: influencing agents, ascending
    assembly: tuple[tuple[int, ...], ...]   # per agent: terms its local sum collects
    gather: tuple[np.ndarray, ...]          # per term: flat coordinate indices
    weights: tuple[np.ndarray, ...]
    targets: tuple[np.ndarray, ...]
    offsets: np.ndarray
    amplitudes: np.ndarray | None
    noise_std: np.ndarray

    @property
    def num_agents(self) -> int:
        return len(self.deps)

    @property
    def total_dim(self) -> int:
        return self.layout.total_dim

    # -- values -------------------------------------------------------

    def term_values(self, thetas: np.ndarray) -> np.ndarray:
        """Noise-free per-term values for a (M, d) batch, shape (M, N)."""
        t = np.atleast_2d(np.asarray(thetas, dtype=float))
        out = np.empty((t.shape[0], self.num_agents))
        for j in range(self.num_agents):
            x = t[:, self.gather[j]]
            if self.family == "quadratic":
                out[:, j] = self.offsets[j] - ((x - self.targets[j]) ** 2 @ self.weights[j])
            elif self.family == "cosine":
                out[:, j] = self.amplitudes[j] * np.cos(x @ self.weights[j] + self.offsets[j])
            else:
                out[:, j] = self.offsets[j] - (np.abs(x - self.targets[j]) @ self.weights[j])
        return out

    def values(self, theta: np.ndarray) -> np.ndarray:
        return self.term_values(theta)[0]

    def totals(self, thetas: np.ndarray) -> np.ndarray:
        return self.term_values(thetas).sum(axis=1)

    def total(self, theta: np.ndarray) -> float:
        return float(self.values(theta).sum())

    def local_totals(self, i: int, thetas: np.ndarray) -> np.ndarray:
        cols = np.asarray(self.assembly[i - 1], dtype=np.intp) - 1
        return self.term_values(thetas)[:, cols].sum(axis=1)

    def local_total(self, i: int, theta: np.ndarray) -> float:
        return float(self.local_totals(i, np.atleast_2d(theta))[0])

    # -- gradients ----------------------------------------------------

    def term_gradient(self, j: int, theta: np.ndarray) -> np.ndarray:
        """Gradient of term j alone, embedded in the flat space.  For
        the abs family this is the sign subgradient (zero at kinks)."""
        theta = np.asarray(theta, dtype=float)
        g = np.zeros(self.total_dim)
        x = theta[self.gather[j - 1]]
        w = self.weights[j - 1]
        if self.family == "quadratic":
            g[self.gather[j - 1]] = -2.0 * w * (x - self.targets[j - 1])
        elif self.family == "cosine":
            s = math.sin(float(x @ w) + self.offsets[j - 1])
            g[self.gather[j - 1]] = -self.amplitudes[j - 1] * s * w
        else:
            g[self.gather[j - 1]] = -w * np.sign(x - self.targets[j - 1])
        return g

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        g = np.zeros(self.total_dim)
        for j in range(1, self.num_agents + 1):
            g += self.term_gradient(j, theta)
        return g

    def local_gradient(self, i: int, theta: np.ndarray) -> np.ndarray:
        g = np.zeros(self.total_dim)
        for j in self.assembly[i - 1]:
            g += self.term_gradient(j, theta)
        return g

    # -- Gaussian smoothing, closed form ------------------------------

    def _smoothed_terms(self, theta: np.ndarray, delta: float) -> np.ndarray:
        if delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {delta}")
        theta = np.asarray(theta, dtype=float)
        out = np.empty(self.num_agents)
        for j in range(self.num_agents):
            x = theta[self.gather[j]]
            w = self.weights[j]
            if self.family == "quadratic":
                out[j] = self.offsets[j] - float((x - self.targets[j]) ** 2 @ w) \
                    - delta ** 2 * float(w.sum())
            elif self.family == "cosine":
                damp = math.exp(-0.5 * delta ** 2 * float(w @ w))
                out[j] = self.amplitudes[j] * damp * math.cos(float(x @ w) + self.offsets[j])
            else:
                y = x - self.targets[j]
                out[j] = self.offsets[j] - float(_smoothed_abs(y, delta) @ w)
        return out

    def smoothed_total(self, theta: np.ndarray, delta: float) -> float:
        return float(self._smoothed_terms(theta, delta).sum())

    def smoothed_local_total(self, i: int, theta: np.ndarray, delta: float) -> float:
        terms = self._smoothed_terms(theta, delta)
        return float(sum(terms[j - 1] for j in self.assembly[i - 1]))

    def _smoothed_term_gradient(self, j: int, theta: np.ndarray, delta: float) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        g = np.zeros(self.total_dim)
        x = theta[self.gather[j - 1]]
        w = self.weights[j - 1]
        if self.family == "quadratic":
            g[self.gather[j - 1]] = -2.0 * w * (x - self.targets[j - 1])
        elif self.family == "cosine":
            damp = math.exp(-0.5 * delta ** 2 * float(w @ w))
            s = math.sin(float(x @ w) + self.offsets[j - 1])
            g[self.gather[j - 1]] = -self.amplitudes[j - 1] * damp * s * w
        else:
            y = x - self.targets[j - 1]
            if delta == 0.0:
                g[self.gather[j - 1]] = -w * np.sign(y)
            else:
                g[self.gather[j - 1]] = -w * _erf(y / (delta * math.sqrt(2.0)))
        return g

    def smoothed_gradient(self, theta: np.ndarray, delta: float) -> np.ndarray:
        """Analytic gradient of E[J(theta + delta u)], u standard normal."""
        if delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {delta}")
        g = np.zeros(self.total_dim)
        for j in range(1, self.num_agents + 1):
            g += self._smoothed_term_gradient(j, theta, delta)
        return g

    def smoothed_local_gradient(self, i: int, theta: np.ndarray, delta: float) -> np.ndarray:
        if delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {delta}")
        g = np.zeros(self.total_dim)
        for j in self.assembly[i - 1]:
            g += self._smoothed_term_gradient(j, theta, delta)
        return g

    # -- known constants ----------------------------------------------

    def term_value_bound(self, j: int) -> float:
        """sup |J_j| over the whole space; infinite outside the cosine
        family."""
        if self.family == "cosine":
            return float(self.amplitudes[j - 1])
        return math.inf

    def term_lipschitz(self, j: int) -> float:
        if self.family == "cosine":
            return float(self.amplitudes[j - 1]) * float(np.linalg.norm(self.weights[j - 1]))
        if self.family == "abs":
            return float(np.linalg.norm(self.weights[j - 1]))
        return math.inf

    def local_value_bound(self, i: int) -> float:
        return sum(self.term_value_bound(j) for j in self.assembly[i - 1])

    def local_lipschitz(self, i: int) -> float:
        return sum(self.term_lipschitz(j) for j in self.assembly[i - 1])

    def local_noise_std(self, i: int) -> float:
        cols = np.asarray(self.assembly[i - 1], dtype=np.intp) - 1
        return float(np.sqrt((self.noise_std[cols] ** 2).sum()))

    def global_value_bound(self) -> float:
        return sum(self.term_value_bound(j) for j in range(1, self.num_agents + 1))

    def global_lipschitz(self) -> float:
        return sum(self.term_lipschitz(j) for j in range(1, self.num_agents + 1))

    def global_noise_std(self) -> float:
        return float(np.sqrt((self.noise_std ** 2).sum()))

    def quadratic_argmax(self) -> np.ndarray:
        """Unique maximizer of the quadratic family's global sum."""
        if self.family != "quadratic":
            raise ValueError(f"argmax is closed form only for quadratic, not {self.family!r}")
        num = np.zeros(self.total_dim)
        den = np.zeros(self.total_dim)
        for j in range(self.num_agents):
            num[self.gather[j]] += self.weights[j] * self.targets[j]
            den[self.gather[j]] += self.weights[j]
        return num / den  # den > 0: every block is covered by its own agent's term


def _smoothed_abs(y: np.ndarray, delta: float) -> np.ndarray:
    """E|y + delta u| per coordinate for standard-normal u."""
    if delta == 0.0:
        return np.abs(y)
    z = y / delta
    return y * _erf(z / math.sqrt(2.0)) + delta * math.sqrt(2.0 / math.pi) * np.exp(-0.5 * z * z)


def make_synthetic(graph: CoordinationGraph, rng: np.random.Generator, *,
                   family: str = "quadratic",
                   block_dims: tuple[int, ...] | None = None,
                   noise_std=0.0) -> SyntheticObjective:
    """Random instance aligned to ``graph``.

    Term j depends on the blocks of sorted(ancestors(j) + {j}); the
    dependency invariant (term j never reads block i unless i reaches
    j) therefore holds by construction and is re-checkable with
    ``dependency_violations``.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    arts = build_artifacts(graph)
    n = graph.num_agents
    if block_dims is None:
        block_dims = tuple(int(v) for v in rng.integers(1, 4, size=n))
    if len(block_dims) != n:
        raise ValueError(f"got {len(block_dims)} block dims for {n} agents")
    layout = BlockLayout(tuple(int(d) for d in block_dims))

    deps, assembly, gather = [], [], []
    for i in range(1, n + 1):
        d_i = tuple(sorted(arts.reach.ancestors_closed(i)))
        deps.append(d_i)
        assembly.append(arts.reach.reach_closed_sorted(i))
        gather.append(np.concatenate(
            [np.arange(layout.offsets[k - 1], layout.offsets[k]) for k in d_i]))

    weights, targets = [], []
    offsets = np.empty(n)
    amplitudes = np.empty(n) if family == "cosine" else None
    for j in range(n):
        m = gather[j].size
        if family == "quadratic":
            weights.append(rng.uniform(0.5, 1.5, size=m))
            targets.append(rng.uniform(-1.0, 1.0, size=m))
            offsets[j] = rng.uniform(0.0, 1.0)
        elif family == "cosine":
            w = rng.standard_normal(m)
            w *= rng.uniform(0.5, 1.5) / np.linalg.norm(w)
            weights.append(w)
            targets.append(np.zeros(m))
            offsets[j] = rng.uniform(0.0, 2.0 * math.pi)
            amplitudes[j] = rng.uniform(0.5, 1.5)
        else:
            weights.append(rng.uniform(0.5, 1.5, size=m))
            targets.append(rng.uniform(-1.0, 1.0, size=m))
            offsets[j] = rng.uniform(0.0, 1.0)

    sigma = np.asarray(noise_std, dtype=float)
    if sigma.ndim == 0:
        sigma = np.full(n, float(sigma))
    if sigma.shape != (n,) or np.any(sigma < 0.0):
        raise ValueError(f"noise_std must be a scalar or {n} nonnegative values")

    return SyntheticObjective(
        family=family, layout=layout, deps=tuple(deps), assembly=tuple(assembly),
        gather=tuple(gather), weights=tuple(weights), targets=tuple(targets),
        offsets=offsets, amplitudes=amplitudes, noise_std=sigma)


def dependency_violations(obj: SyntheticObjective, rng: np.random.Generator,
                          trials: int = 3) -> list[tuple[int, int]]:
    """Structural inspection: perturb block k and report every term i
    whose value moved although k cannot influence i."""
    bad = []
    for _ in range(trials):
        theta = rng.uniform(-2.0, 2.0, size=obj.total_dim)
        base = obj.values(theta)
        for k in range(1, obj.num_agents + 1):
            shifted = theta.copy()
            shifted[obj.layout.block_slice(k)] += rng.uniform(0.5, 1.5)
            moved = obj.values(shifted) != base
            for i in range(1, obj.num_agents + 1):
                if moved[i - 1] and k not in obj.deps[i - 1]:
                    bad.append((i, k))
    return sorted(set(bad))


class SyntheticEvaluator:
    """One-episode value feedback from a synthetic objective, with the
    same interface the warehouse evaluator exposes to the training
    loop.  Noise is per-agent additive Gaussian; replaying the same
    noise vector reproduces the evaluation exactly."""

    def __init__(self, objective: SyntheticObjective):
        self.objective = objective
        self.layout = objective.layout
        self.num_agents = objective.num_agents

    def draw_noise(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.num_agents) * self.objective.noise_std

    def evaluate(self, theta: np.ndarray, noise: np.ndarray) -> np.ndarray:
        return self.objective.values(theta) + noise


# -- Monte-Carlo and finite-difference estimators ---------------------


@dataclass(frozen=True)
class MomentEstimate:
    """Sample moments of a vector estimator.  ``mean`` carries the
    per-coordinate sample mean with its standard errors; the second
    moment is E||g||^2 overall and per block when a layout was given.
    Standard errors come from the sample variance, never assumptions."""

    sample_count: int
    mean: np.ndarray
    standard_errors: np.ndarray
    second_moment: float
    second_moment_stderr: float
    block_second_moments: np.ndarray | None = None
    block_second_moment_stderrs: np.ndarray | None = None


class _MomentAccumulator:
    def __init__(self, dim: int, num_blocks: int | None):
        self.count = 0
        self.sum = np.zeros(dim)
        self.sumsq = np.zeros(dim)
        self.n2_sum = 0.0
        self.n4_sum = 0.0
        self.blocks = None if num_blocks is None else np.zeros(num_blocks)
        self.blocks_sq = None if num_blocks is None else np.zeros(num_blocks)

    def add(self, g: np.ndarray, block_sq: np.ndarray | None) -> None:
        # g is (m, dim); block_sq is (m, num_blocks) of squared block norms
        self.count += g.shape[0]
        self.sum += g.sum(axis=0)
        self.sumsq += (g * g).sum(axis=0)
        n2 = (g * g).sum(axis=1)
        self.n2_sum += float(n2.sum())
        self.n4_sum += float((n2 * n2).sum())
        if self.blocks is not None:
            self.blocks += block_sq.sum(axis=0)
            self.blocks_sq += (block_sq * block_sq).sum(axis=0)

    def finish(self) -> MomentEstimate:
        m = self.count
        mean = self.sum / m
        var = np.maximum(self.sumsq / m - mean ** 2, 0.0) * (m / (m - 1))
        sm = self.n2_sum / m
        sm_var = max(self.n4_sum / m - sm ** 2, 0.0) * (m / (m - 1))
        bm = bse = None
        if self.blocks is not None:
            bm = self.blocks / m
            bvar = np.maximum(self.blocks_sq / m - bm ** 2, 0.0) * (m / (m - 1))
            bse = np.sqrt(bvar / m)
        return MomentEstimate(m, mean, np.sqrt(var / m), sm, math.sqrt(sm_var / m), bm, bse)


def mc_smoothed_gradient(f, theta: np.ndarray, delta: float, num_samples: int,
                         rng: np.random.Generator, *, batch_size: int = 16384,
                         ) -> MomentEstimate:
    """Monte-Carlo realization of the Gaussian-smoothing gradient:
    mean of (f(theta + delta u) / delta) u over standard-normal u.

    ``f`` must map an (m, d) batch of points to (m,) values.  At least
    10^3 samples; non-finite values abort.
    """
    if num_samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {num_samples}")
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    theta = np.asarray(theta, dtype=float)
    acc = _MomentAccumulator(theta.size, None)
    done = 0
    while done < num_samples:
        m = min(batch_size, num_samples - done)
        u = rng.standard_normal((m, theta.size))
        vals = np.asarray(f(theta[None, :] + delta * u), dtype=float)
        if vals.shape != (m,):
            raise ValueError(f"objective returned shape {vals.shape} for a ({m}, d) batch")
        if not np.all(np.isfinite(vals)):
            raise ValueError("objective produced non-finite values")
        acc.add((vals / delta)[:, None] * u, None)
        done += m
    return acc.finish()


def finite_difference_gradient(f, theta: np.ndarray, h: float) -> np.ndarray:
    """Central differences per coordinate; ``f`` maps (m, d) to (m,)
    and must be deterministic."""
    if h <= 0.0:
        raise ValueError(f"step h must be > 0, got {h}")
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    pts = np.repeat(theta[None, :], 2 * d, axis=0)
    idx = np.arange(d)
    pts[idx, idx] += h
    pts[d + idx, idx] -= h
    vals = np.asarray(f(pts), dtype=float)
    if vals.shape != (2 * d,):
        raise ValueError(f"objective returned shape {vals.shape} for a ({2 * d}, d) batch")
    if not np.all(np.isfinite(vals)):
        raise ValueError("objective produced non-finite values")
    return (vals[:d] - vals[d:]) / (2.0 * h)


@dataclass(frozen=True)
class SmoothingGapReport:
    """|J^delta - J| estimates against the delta sqrt(d) L ceiling."""

    bound: float
    gaps: np.ndarray
    stderrs: np.ndarray

    @property
    def worst_gap(self) -> float:
        return float(self.gaps.max())

    @property
    def passed(self) -> bool:
        return bool(np.all(self.gaps <= self.bound + 3.0 * self.stderrs))


def check_smoothing_gap(f, lipschitz: float, delta: float, thetas,
                        num_samples: int, rng: np.random.Generator, *,
                        batch_size: int = 16384) -> SmoothingGapReport:
    """Monte-Carlo J^delta at each theta versus the exact value, with
    the Lipschitz smoothing ceiling delta sqrt(d) L."""
    if lipschitz <= 0.0:
        raise ValueError(f"lipschitz must be > 0, got {lipschitz}")
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if num_samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {num_samples}")
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    d = thetas.shape[1]
    gaps = np.empty(thetas.shape[0])
    stderrs = np.empty(thetas.shape[0])
    for t, theta in enumerate(thetas):
        exact = float(np.asarray(f(theta[None, :]), dtype=float)[0])
        total = 0.0
        totalsq = 0.0
        done = 0
        while done < num_samples:
            m = min(batch_size, num_samples - done)
            vals = np.asarray(f(theta[None, :] + delta * rng.standard_normal((m, d))),
                              dtype=float)
            if not np.all(np.isfinite(vals)):
                raise ValueError("objective produced non-finite values")
            total += float(vals.sum())
            totalsq += float((vals * vals).sum())
            done += m
        mean = total / num_samples
        var = max(totalsq / num_samples - mean ** 2, 0.0) * num_samples / (num_samples - 1)
        gaps[t] = abs(mean - exact)
        stderrs[t] = math.sqrt(var / num_samples)
    return SmoothingGapReport(delta * math.sqrt(d) * lipschitz, gaps, stderrs)


def empirical_second_moment(sample_gradient, layout: BlockLayout, num_samples: int,
                            rng: np.random.Generator) -> MomentEstimate:
    """Sample moments of an arbitrary gradient sampler.  The sampler is
    called once per draw with the rng and returns a flat (d,) estimate;
    at least 10^4 draws."""
    if num_samples < 10_000:
        raise ValueError(f"need at least 10000 samples, got {num_samples}")
    acc = _MomentAccumulator(layout.total_dim, layout.num_agents)
    for _ in range(num_samples):
        g = np.asarray(sample_gradient(rng), dtype=float)
        if not np.all(np.isfinite(g)):
            raise ValueError("sampler produced a non-finite gradient")
        acc.add(g[None, :], (layout.block_norms(g) ** 2)[None, :])
    return acc.finish()


def oracle_moments(obj: SyntheticObjective, theta: np.ndarray, delta: float,
                   num_samples: int, rng: np.random.Generator, *,
                   flavor: str = "one_point", scope: str = "distributed",
                   batch_size: int = 8192) -> MomentEstimate:
    """Vectorized sample moments of the zeroth-order estimators on a
    synthetic instance, noise included.  Semantically one draw is one
    learning episode: perturb, evaluate per-term values plus per-agent
    noise, assemble each block's feedback value per the scope, scale
    the block of u.  Residual draws an independent previous episode at
    the same theta, which is its stationary-point distribution."""
    if flavor not in ("one_point", "two_point", "residual"):
        raise ValueError(f"unknown flavor {flavor!r}")
    if scope not in ("distributed", "centralized"):
        raise ValueError(f"unknown scope {scope!r}")
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    theta = np.asarray(theta, dtype=float)
    n, d = obj.num_agents, obj.total_dim
    layout = obj.layout
    acc = _MomentAccumulator(d, n)
    done = 0
    while done < num_samples:
        m = min(batch_size, num_samples - done)
        u = rng.standard_normal((m, d))
        noise = rng.standard_normal((m, n)) * obj.noise_std
        tv = obj.term_values(theta[None, :] + delta * u) + noise
        if flavor == "two_point":
            tv_ref = obj.term_values(theta[None, :]) + noise  # common randomness
        elif flavor == "residual":
            u_prev = rng.standard_normal((m, d))
            noise_prev = rng.standard_normal((m, n)) * obj.noise_std
            tv_ref = obj.term_values(theta[None, :] + delta * u_prev) + noise_prev
        else:
            tv_ref = None

        g = np.empty((m, d))
        block_sq = np.empty((m, n))
        for i in range(1, n + 1):
            if scope == "centralized":
                v = tv.sum(axis=1)
                v_ref = tv_ref.sum(axis=1) if tv_ref is not None else 0.0
            else:
                cols = np.asarray(obj.assembly[i - 1], dtype=np.intp) - 1
                v = tv[:, cols].sum(axis=1)
                v_ref = tv_ref[:, cols].sum(axis=1) if tv_ref is not None else 0.0
            sl = layout.block_slice(i)
            g[:, sl] = ((v - v_ref) / delta)[:, None] * u[:, sl]
            block_sq[:, i - 1] = (g[:, sl] ** 2).sum(axis=1)
        acc.add(g, block_sq)
        done += m
    return acc.finish()


# -- runnable claim-check suite ---------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _demo_graphs() -> list[CoordinationGraph]:
    chain = build_graph(3, [(1, 2), (2, 3)])
    clustered = build_graph(6, [(1, 2), (2, 1), (2, 3), (3, 4), (4, 3), (4, 5), (5, 6)])
    zigzag = build_graph(6, [(1, 2), (3, 2), (3, 4), (5, 4), (5, 6)])
    return [chain, clustered, zigzag]


def _check_block_gradients(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for graph in _demo_graphs():
        for family in FAMILIES:
            obj = make_synthetic(graph, rng, family=family)
            for _ in range(20):
                theta = rng.uniform(-2.0, 2.0, size=obj.total_dim)
                g = obj.gradient(theta)
                for i in range(1, obj.num_agents + 1):
                    sl = obj.layout.block_slice(i)
                    gi = obj.local_gradient(i, theta)[sl]
                    if not np.array_equal(g[sl], gi):
                        return CheckResult(
                            "block_gradient_identity", False,
                            f"block {i} of {family} instance differs")
            if family == "abs":
                continue
            theta = rng.uniform(-2.0, 2.0, size=obj.total_dim)
            fd = finite_difference_gradient(obj.totals, theta, 1e-5)
            g = obj.gradient(theta)
            err = float(np.max(np.abs(fd - g) / np.maximum(np.abs(g), 1e-3)))
            worst = max(worst, err)
            if err > 1e-6:
                return CheckResult("block_gradient_identity", False,
                                   f"finite differences disagree by {err:.2e} ({family})")
    return CheckResult("block_gradient_identity", True,
                       f"exact block match on all instances, worst fd error {worst:.2e}")


def _check_smoothed_block_agreement(rng: np.random.Generator, num_samples: int) -> CheckResult:
    worst = 0.0
    for graph in _demo_graphs()[:2]:
        obj = make_synthetic(graph, rng, family="quadratic")
        for _ in range(2):
            theta = rng.uniform(-1.0, 1.0, size=obj.total_dim)
            delta = float(rng.uniform(0.2, 0.6))
            est_g = mc_smoothed_gradient(obj.totals, theta, delta, num_samples, rng)
            i = int(rng.integers(1, obj.num_agents + 1))
            est_l = mc_smoothed_gradient(
                lambda t: obj.local_totals(i, t), theta, delta, num_samples, rng)
            sl = obj.layout.block_slice(i)
            diff = est_g.mean[sl] - est_l.mean[sl]
            se = np.sqrt(est_g.standard_errors[sl] ** 2 + est_l.standard_errors[sl] ** 2)
            stat = float((diff ** 2 / se ** 2).sum())
            d_i = diff.size
            limit = d_i + 3.0 * math.sqrt(2.0 * d_i)
            worst = max(worst, stat / limit)
            if stat > limit:
                return CheckResult(
                    "smoothed_block_agreement", False,
                    f"block {i}: joint statistic {stat:.2f} above {limit:.2f}")
    return CheckResult("smoothed_block_agreement", True,
                       f"joint statistic at worst {worst:.2f} of the 3-sigma limit")


def _check_oracle_means(rng: np.random.Generator, num_samples: int) -> CheckResult:
    graph = _demo_graphs()[0]
    obj = make_synthetic(graph, rng, family="quadratic", noise_std=0.1)
    theta = rng.uniform(-1.0, 1.0, size=obj.total_dim)
    delta = 0.4
    target = obj.smoothed_gradient(theta, delta)  # equals the plain gradient here
    worst = 0.0
    d = obj.total_dim
    limit = d + 3.0 * math.sqrt(2.0 * d)  # joint 3-sigma across coordinates
    for flavor in ("one_point", "two_point", "residual"):
        est = oracle_moments(obj, theta, delta, num_samples, rng, flavor=flavor)
        z = (est.mean - target) / est.standard_errors
        stat = float((z * z).sum())
        worst = max(worst, stat / limit)
        if stat > limit:
            return CheckResult("oracle_unbiasedness", False,
                               f"{flavor} joint statistic {stat:.2f} above {limit:.2f}")
    return CheckResult("oracle_unbiasedness", True,
                       f"all oracle means within the joint 3-sigma region "
                       f"(worst ratio {worst:.2f})")


def _check_second_moment_bounds(rng: np.random.Generator, num_samples: int) -> CheckResult:
    graph = _demo_graphs()[2]
    obj = make_synthetic(graph, rng, family="cosine", noise_std=0.05)
    theta = rng.uniform(-1.0, 1.0, size=obj.total_dim)
    delta = 0.3
    d = obj.total_dim
    margin = 0.0
    one = oracle_moments(obj, theta, delta, num_samples, rng, flavor="one_point")
    two = oracle_moments(obj, theta, delta, num_samples, rng, flavor="two_point")
    for i in range(1, obj.num_agents + 1):
        d_i = obj.layout.dims[i - 1]
        cap1 = one_point_second_moment_bound(
            obj.local_value_bound(i), obj.local_noise_std(i), d_i, delta)
        cap2 = two_point_second_moment_bound(
            obj.local_lipschitz(i), obj.local_noise_std(i), d_i, d)
        got1 = float(one.block_second_moments[i - 1])
        got2 = float(two.block_second_moments[i - 1])
        se1 = float(one.block_second_moment_stderrs[i - 1])
        se2 = float(two.block_second_moment_stderrs[i - 1])
        if got1 > cap1 + 3.0 * se1 or got2 > cap2 + 3.0 * se2:
            return CheckResult("second_moment_bounds", False,
                               f"block {i} exceeds its ceiling")
        margin = max(margin, got1 / cap1, got2 / cap2)
    return CheckResult("second_moment_bounds", True,
                       f"all blocks below their ceilings (worst ratio {margin:.3f})")


def _check_smoothing_gap(rng: np.random.Generator, num_samples: int) -> CheckResult:
    d = 6
    thetas = rng.uniform(-1.0, 1.0, size=(3, d))
    report = check_smoothing_gap(lambda t: np.abs(t).sum(axis=1), math.sqrt(d), 0.1,
                                 thetas, num_samples, rng)
    if not report.passed:
        return CheckResult("smoothing_gap", False,
                           f"worst gap {report.worst_gap:.4f} above bound {report.bound:.4f}")
    return CheckResult("smoothing_gap", True,
                       f"worst gap {report.worst_gap:.4f} within bound {report.bound:.4f}")


def _check_scope_variance(rng: np.random.Generator, num_samples: int) -> CheckResult:
    # At a single theta the global cosine sum can cancel below a local
    # one, so the ordering is asserted on the average over policies and
    # with per-agent noise prominent enough that collecting fewer noise
    # terms (the structural advantage of local feedback) dominates the
    # value cross terms.
    graph = _demo_graphs()[2]  # sparse reachability, nobody reaches everyone
    obj = make_synthetic(graph, rng, family="cosine", noise_std=1.0)
    draws = 8
    n = obj.num_agents
    dist_sum, cent_sum = np.zeros(n), np.zeros(n)
    dist_var, cent_var = np.zeros(n), np.zeros(n)
    for _ in range(draws):
        theta = rng.uniform(-2.0, 2.0, size=obj.total_dim)
        seed = rng.integers(2 ** 63)
        dist = oracle_moments(obj, theta, 0.3, num_samples,
                              np.random.default_rng(seed), flavor="one_point")
        cent = oracle_moments(obj, theta, 0.3, num_samples,
                              np.random.default_rng(seed), flavor="one_point",
                              scope="centralized")  # same draws, paired comparison
        dist_sum += dist.block_second_moments
        cent_sum += cent.block_second_moments
        dist_var += dist.block_second_moment_stderrs ** 2
        cent_var += cent.block_second_moment_stderrs ** 2
    gap = (cent_sum - dist_sum) / draws
    se = np.sqrt(dist_var + cent_var) / draws
    if not np.all(gap > 3.0 * se):
        worst = int(np.argmin(gap - 3.0 * se)) + 1
        return CheckResult("scope_variance_ordering", False,
                           f"block {worst} not significantly below centralized")
    ratio = float((dist_sum / cent_sum).max())
    return CheckResult("scope_variance_ordering", True,
                       f"every block below centralized (worst ratio {ratio:.3f})")


def run_validation(seed: int = 0, *, quick: bool = False) -> list[CheckResult]:
    """Run the whole claim-check battery and return one result per
    check.  ``quick`` shrinks the Monte-Carlo sample counts."""
    rng = np.random.default_rng(seed)
    mc = 20_000 if quick else 100_000
    results = [
        _check_block_gradients(rng),
        _check_smoothed_block_agreement(rng, mc),
        _check_oracle_means(rng, mc),
        _check_second_moment_bounds(rng, mc),
        _check_smoothing_gap(rng, mc),
        _check_scope_variance(rng, mc),
    ]
    violations = []
    for graph in _demo_graphs():
        for family in FAMILIES:
            violations += dependency_violations(make_synthetic(graph, rng, family=family), rng)
    results.append(CheckResult(
        "dependency_structure", not violations,
        "no term reads a block outside its influence set" if not violations
        else f"violations: {violations}"))
    return results
