"""Markov decision process over an augmented trade network.

States are the year's cities plus one absorbing sale sink per point-of-sale
city. An action is "move along edge (s, u)" or "sell here"; with probability
``1 - epsilon`` the intended move happens, otherwise the outcome is uniform
over staying put and the other city neighbors. Slips never enter a sink: a
sale is always deliberate. Rewards are the negated conflict-scaled edge
costs, plus the drawn sale reward on entering a sink; staying costs nothing.

``gamma = 1`` is supported by treating the model as a stochastic
shortest-path problem: sinks are absorbing and every movement cost is
strictly positive, so non-terminating policies are strictly suboptimal and
policy evaluation reduces to a linear solve on the transient states.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, ModelError, SolverError
from .network import AugmentedNetwork, EdgeCostTable

ROW_SUM_TOL = 1e-12
UNRESOLVED = "UNRESOLVED"


@dataclass(frozen=True)
class MdpModel:
    """Flattened (state, action) MDP tables.

    Actions of state ``s`` occupy rows ``sa_offsets[s]:sa_offsets[s+1]`` of
    the flat arrays; ``trans`` holds one dense transition row per action and
    ``exp_reward`` its expected immediate reward. ``base_reward``,
    ``sale_weight`` and ``sale_index`` let :func:`with_rewards` rebind the
    per-sink sale rewards without rebuilding transitions.
    """

    state_names: tuple[str, ...]
    absorbing: np.ndarray
    sa_state: np.ndarray
    sa_target: np.ndarray
    sa_offsets: np.ndarray
    trans: np.ndarray
    exp_reward: np.ndarray
    gamma: float
    base_reward: np.ndarray
    sale_weight: np.ndarray
    sale_index: np.ndarray
    sale_rewards: tuple[float, ...]

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return self.trans.shape[0]

    def actions_of(self, state: int) -> range:
        return range(int(self.sa_offsets[state]),
                     int(self.sa_offsets[state + 1]))

    def validate(self):
        sums = self.trans.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            worst = float(np.abs(sums - 1.0).max())
            raise ModelError(f"transition rows must sum to 1 (off by {worst:.2e})")
        if not np.all(np.isfinite(self.exp_reward)):
            raise ModelError("rewards must be finite")
        for s in range(self.n_states):
            rows = self.actions_of(s)
            if len(rows) == 0:
                raise ModelError(f"state {self.state_names[s]!r} has no actions")
            if self.absorbing[s]:
                if (len(rows) != 1
                        or self.sa_target[rows.start] != s
                        or self.trans[rows.start, s] != 1.0
                        or self.exp_reward[rows.start] != 0.0):
                    raise ModelError(
                        f"absorbing state {self.state_names[s]!r} must have "
                        f"exactly a zero-reward self-loop")
        return self


@dataclass(frozen=True)
class Policy:
    """Chosen action row per state (self-loop rows at absorbing states)."""

    sa_row: np.ndarray

    def action_target(self, model: MdpModel, state: int) -> int:
        return int(model.sa_target[self.sa_row[state]])


@dataclass(frozen=True)
class ValueFunction:
    values: np.ndarray

    def __getitem__(self, state: int) -> float:
        return float(self.values[state])


def make_model(state_names: Sequence[str], absorbing: Sequence[bool],
               actions: Sequence[Sequence[tuple[np.ndarray, float, int]]],
               gamma: float) -> MdpModel:
    """Assemble a model from per-state ``(trans_row, exp_reward, target)``
    action triples. Absorbing states get their self-loop automatically."""
    if not (0.0 < gamma <= 1.0):
        raise ModelError(f"gamma must be in (0, 1], got {gamma}")
    n = len(state_names)
    absorbing = np.asarray(absorbing, dtype=bool)
    rows, rewards, owners, targets, offsets = [], [], [], [], [0]
    for s in range(n):
        acts = actions[s]
        if absorbing[s]:
            if acts:
                raise ModelError(
                    f"absorbing state {state_names[s]!r} has outgoing actions")
            row = np.zeros(n)
            row[s] = 1.0
            acts = [(row, 0.0, s)]
        for trans_row, r, target in acts:
            rows.append(np.asarray(trans_row, dtype=float))
            rewards.append(float(r))
            owners.append(s)
            targets.append(int(target))
        offsets.append(len(rows))
    model = MdpModel(
        state_names=tuple(state_names),
        absorbing=absorbing,
        sa_state=np.asarray(owners, dtype=int),
        sa_target=np.asarray(targets, dtype=int),
        sa_offsets=np.asarray(offsets, dtype=int),
        trans=np.vstack(rows),
        exp_reward=np.asarray(rewards, dtype=float),
        gamma=float(gamma),
        base_reward=np.asarray(rewards, dtype=float),
        sale_weight=np.zeros(len(rows)),
        sale_index=np.full(len(rows), -1, dtype=int),
        sale_rewards=(),
    )
    return model.validate()


def build_mdp(aug: AugmentedNetwork, costs: EdgeCostTable,
              sale_rewards: Mapping[str, float] | Sequence[float],
              epsilon: float = 0.1, gamma: float = 1.0) -> MdpModel:
    """Build the routing MDP for one year's augmented network."""
    if not (0.0 <= epsilon < 1.0):
        raise ModelError(f"epsilon must be in [0, 1), got {epsilon}")
    if not (0.0 < gamma <= 1.0):
        raise ModelError(f"gamma must be in (0, 1], got {gamma}")
    reward_vec = _resolve_rewards(aug, sale_rewards)

    net = aug.base
    n_cities = net.n_nodes
    n = aug.n_states
    names = aug.state_names()
    sale_of = {city: k for k, city in enumerate(aug.sale_cities)}

    rows, base_r, owners, targets = [], [], [], []
    weights, sink_idx = [], []
    offsets = [0]
    for s in range(n_cities):
        neighbors = np.flatnonzero(net.adjacency[s])
        if gamma == 1.0:
            bad = [u for u in neighbors if costs.cost[s, u] <= 0.0]
            if bad:
                raise ModelError(
                    f"gamma=1 requires strictly positive edge costs; edge "
                    f"{names[s]!r}->{names[bad[0]]!r} has cost "
                    f"{costs.cost[s, bad[0]]}")
        intended = [int(u) for u in neighbors]
        if net.nodes[s].name in sale_of:
            intended.append(n_cities + sale_of[net.nodes[s].name])
        if not intended:
            raise ModelError(f"state {names[s]!r} has no actions")
        for target in intended:
            row = np.zeros(n)
            row[target] += 1.0 - epsilon
            if epsilon > 0.0:
                slip = [s] + [int(v) for v in neighbors if int(v) != target]
                share = epsilon / len(slip)
                for v in slip:
                    row[v] += share
            # movement part of the expected reward; stay contributes 0 and
            # entering a sink costs nothing beyond forgoing other moves
            r = 0.0
            for v in neighbors:
                if row[v] > 0.0:
                    r -= row[v] * costs.cost[s, v]
            if target >= n_cities:
                weights.append(1.0 - epsilon)
                sink_idx.append(target - n_cities)
            else:
                weights.append(0.0)
                sink_idx.append(-1)
            rows.append(row)
            base_r.append(r)
            owners.append(s)
            targets.append(target)
        offsets.append(len(rows))
    for k in range(len(aug.sale_cities)):
        s = n_cities + k
        row = np.zeros(n)
        row[s] = 1.0
        rows.append(row)
        base_r.append(0.0)
        owners.append(s)
        targets.append(s)
        weights.append(0.0)
        sink_idx.append(-1)
        offsets.append(len(rows))

    absorbing = np.zeros(n, dtype=bool)
    absorbing[n_cities:] = True
    base_r = np.asarray(base_r)
    weights = np.asarray(weights)
    sink_idx = np.asarray(sink_idx, dtype=int)
    exp_reward = base_r + np.where(
        sink_idx >= 0, weights * reward_vec[np.maximum(sink_idx, 0)], 0.0)
    model = MdpModel(
        state_names=tuple(names),
        absorbing=absorbing,
        sa_state=np.asarray(owners, dtype=int),
        sa_target=np.asarray(targets, dtype=int),
        sa_offsets=np.asarray(offsets, dtype=int),
        trans=np.vstack(rows),
        exp_reward=exp_reward,
        gamma=float(gamma),
        base_reward=base_r,
        sale_weight=weights,
        sale_index=sink_idx,
        sale_rewards=tuple(float(v) for v in reward_vec),
    )
    return model.validate()


def _resolve_rewards(aug: AugmentedNetwork, sale_rewards) -> np.ndarray:
    if isinstance(sale_rewards, Mapping):
        missing = [c for c in aug.sale_cities if c not in sale_rewards]
        if missing:
            raise ModelError(
                f"sale_rewards missing sinks: {', '.join(missing)}")
        vec = np.array([float(sale_rewards[c]) for c in aug.sale_cities])
    else:
        vec = np.asarray(sale_rewards, dtype=float)
        if vec.shape != (len(aug.sale_cities),):
            raise ModelError(
                f"expected {len(aug.sale_cities)} sale rewards, got "
                f"{vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ModelError("sale rewards must be finite")
    return vec


def with_rewards(model: MdpModel, sale_rewards: Sequence[float]) -> MdpModel:
    """Same transitions, new per-sink sale rewards."""
    vec = np.asarray(sale_rewards, dtype=float)
    if vec.shape != (len(model.sale_rewards),):
        raise ModelError("sale reward vector has the wrong length")
    exp_reward = model.base_reward + np.where(
        model.sale_index >= 0,
        model.sale_weight * vec[np.maximum(model.sale_index, 0)], 0.0)
    return replace(model, exp_reward=exp_reward,
                   sale_rewards=tuple(float(v) for v in vec))


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def _initial_policy(model: MdpModel) -> np.ndarray:
    # hop-count-to-sink tree over intended moves: proper by construction,
    # independent of the reward draw so repeated solves are reproducible
    n = model.n_states
    dist = np.full(n, np.iinfo(np.int64).max)
    dist[model.absorbing] = 0
    queue = deque(np.flatnonzero(model.absorbing).tolist())
    incoming: dict[int, list[int]] = {}
    for row in range(model.n_actions):
        incoming.setdefault(int(model.sa_target[row]), []).append(row)
    while queue:
        v = queue.popleft()
        for row in incoming.get(v, ()):
            s = int(model.sa_state[row])
            if not model.absorbing[s] and dist[s] > dist[v] + 1:
                dist[s] = dist[v] + 1
                queue.append(s)
    choice = np.zeros(n, dtype=int)
    for s in range(n):
        rows = model.actions_of(s)
        choice[s] = rows.start
        if model.absorbing[s]:
            continue
        for row in rows:
            if dist[model.sa_target[row]] == dist[s] - 1:
                choice[s] = row
                break
    return choice


def _evaluate(model: MdpModel, sa_row: np.ndarray) -> np.ndarray:
    transient = ~model.absorbing
    rows = sa_row[transient]
    p_tt = model.trans[rows][:, transient]
    a = np.eye(p_tt.shape[0]) - model.gamma * p_tt
    try:
        v_t = np.linalg.solve(a, model.exp_reward[rows])
    except np.linalg.LinAlgError:
        raise SolverError(
            "singular policy evaluation system; at gamma=1 this means the "
            "policy never reaches an absorbing state") from None
    v = np.zeros(model.n_states)
    v[transient] = v_t
    return v


def _greedy(model: MdpModel, v: np.ndarray) -> np.ndarray:
    q = model.exp_reward + model.gamma * (model.trans @ v)
    starts = model.sa_offsets[:-1]
    best = np.maximum.reduceat(q, starts)
    # lowest action row among the maximizers of each state
    candidates = np.where(q == best[model.sa_state],
                          np.arange(model.n_actions), model.n_actions)
    return np.minimum.reduceat(candidates, starts)


def policy_iteration(model: MdpModel, max_iter: int = 500,
                     init_sa_row: np.ndarray | None = None,
                     ) -> tuple[Policy, ValueFunction]:
    """Howard policy iteration: exact evaluation + greedy improvement.

    Ties in the improvement step go to the lowest action row, so the
    returned policy is deterministic. Starts from a hop-count shortest-path
    policy, which is proper, so gamma=1 evaluations stay solvable;
    ``init_sa_row`` lets callers reuse that structural start across many
    reward rebindings of the same model.
    """
    sa_row = _initial_policy(model) if init_sa_row is None \
        else init_sa_row.copy()
    for _ in range(max_iter):
        v = _evaluate(model, sa_row)
        improved = _greedy(model, v)
        if np.array_equal(improved, sa_row):
            return Policy(sa_row=sa_row), ValueFunction(values=v)
        sa_row = improved
    raise SolverError(f"policy iteration did not converge in {max_iter} sweeps")


def value_iteration(model: MdpModel, tol: float = 1e-9,
                    max_iter: int = 1_000_000) -> ValueFunction:
    """Bellman-backup fixed point to sup-norm tolerance ``tol``."""
    n = model.n_states
    v = np.zeros(n)
    starts = model.sa_offsets[:-1]
    transient = ~model.absorbing
    pos = model.trans[model.trans > 0.0]
    min_prob = float(pos.min()) if pos.size else 1.0
    bound = (max(1.0, float(np.abs(model.exp_reward).max()))
             * n / min_prob)
    for _ in range(max_iter):
        q = model.exp_reward + model.gamma * (model.trans @ v)
        new = np.maximum.reduceat(q, starts)
        new[~transient] = 0.0
        delta = float(np.abs(new - v).max())
        v = new
        if delta < tol:
            return ValueFunction(values=v)
        if float(np.abs(v).max()) > bound:
            raise SolverError(
                f"value iteration diverged beyond bound {bound:.3e}")
    raise SolverError(f"value iteration did not converge in {max_iter} sweeps")


def rollout(model: MdpModel, policy: Policy, start_state: int, seed,
            max_steps: int = 500) -> tuple[list[int], int | None]:
    """Follow the policy with slip transitions until a sink or ``max_steps``.

    Returns the visited state list and the terminal sink index, or ``None``
    when unresolved. ``seed`` may be an int, SeedSequence, or Generator;
    results are deterministic per seed.
    """
    if model.absorbing[start_state]:
        raise DomainError("rollout must start at a non-absorbing state")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    path = [int(start_state)]
    s = int(start_state)
    for _ in range(max_steps):
        row = int(policy.sa_row[s])
        cum = np.cumsum(model.trans[row])
        cum /= cum[-1]
        s = int(np.searchsorted(cum, rng.random(), side="right"))
        path.append(s)
        if model.absorbing[s]:
            return path, s
    return path, None


def policy_to_json_dict(aug: AugmentedNetwork, model: MdpModel,
                        policy: Policy, values: ValueFunction) -> dict:
    """Export shape behind the decision-arrow layer."""
    names = model.state_names
    entries = []
    for s in range(model.n_states):
        if model.absorbing[s]:
            continue
        entries.append({
            "state": names[s],
            "action_target": names[policy.action_target(model, s)],
        })
    return {
        "year": aug.base.year,
        "states": list(names),
        "policy": entries,
        "values": [float(v) for v in values.values],
    }
