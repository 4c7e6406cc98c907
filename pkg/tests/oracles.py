"""Independent reference computations shared by the test modules."""

import itertools

import numpy as np

from originsim.mdp import MdpModel, make_model


def enumerate_policies(model: MdpModel) -> np.ndarray:
    """State-wise best value over every stationary deterministic policy.

    Each policy is evaluated by its own dense linear solve; policies whose
    evaluation is singular (improper at gamma = 1) are skipped.
    """
    per_state = [list(model.actions_of(s)) for s in range(model.n_states)]
    transient = ~model.absorbing
    best = np.full(model.n_states, -np.inf)
    for combo in itertools.product(*per_state):
        rows = np.asarray(combo)
        p_tt = model.trans[rows[transient]][:, transient]
        a = np.eye(p_tt.shape[0]) - model.gamma * p_tt
        try:
            v_t = np.linalg.solve(a, model.exp_reward[rows[transient]])
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(v_t)) or np.abs(v_t).max() > 1e9:
            continue
        v = np.zeros(model.n_states)
        v[transient] = v_t
        best = np.maximum(best, v)
    return best


def random_instance(rng: np.random.Generator, gamma: float) -> MdpModel:
    """<=6 states, <=3 actions, >=1 absorbing state; every action keeps
    direct probability of absorption so gamma = 1 instances stay proper."""
    n = int(rng.integers(3, 7))
    n_abs = int(rng.integers(1, 3))
    absorbing = np.zeros(n, dtype=bool)
    absorbing[rng.choice(n, size=n_abs, replace=False)] = True
    actions = []
    for s in range(n):
        if absorbing[s]:
            actions.append([])
            continue
        acts = []
        for _ in range(int(rng.integers(1, 4))):
            row = rng.dirichlet(np.ones(n) * 0.7)
            sink = int(rng.choice(np.flatnonzero(absorbing)))
            row = 0.75 * row
            row[sink] += 0.25
            acts.append((row, float(rng.normal(-1.0, 1.0)), sink))
        actions.append(acts)
    return make_model([f"s{i}" for i in range(n)], absorbing, actions, gamma)
