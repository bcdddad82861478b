"""Randomized battery that checks the oracle's identities on small MDPs."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint, mdp as mdp_mod
from . import oracle
from .mdp import TabularMDP, make_rng
from .oracle import OptionModel
from .policies import IntraOptionPolicy, TerminationFunction

GRADIENT_TOL = 1e-5
CHAIN_TOL = 1e-12
RESIDUAL_TOL = 1e-10
FIXED_POINT_TOL = 1e-9
WEIGHTING_TOL = 1e-10


@dataclass
class Instance:
    mdp: TabularMDP
    model: OptionModel
    pi_omega: np.ndarray
    start: tuple  # (state, option), used as (s0, w0) and as (s1, w0)


@dataclass
class InstanceResult:
    index: int
    shape: tuple
    metrics: dict
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def random_instance(rng: np.random.Generator, max_states=5, max_actions=3, max_options=3) -> Instance:
    """Draw an MDP with random Boltzmann/sigmoid options and a frozen epsilon-greedy pi_omega.

    At least two options are drawn: with one option the termination gradient is
    identically zero and a relative error against it is meaningless.
    """
    n_states = int(rng.integers(2, max_states + 1))
    n_actions = int(rng.integers(2, max_actions + 1))
    n_options = int(rng.integers(min(2, max_options), max_options + 1))
    P = rng.random((n_states, n_actions, n_states)) ** 2
    P /= P.sum(axis=2, keepdims=True)
    terminal = np.zeros(n_states, dtype=bool)
    if n_states > 2 and rng.random() < 0.5:
        terminal[-1] = True
    R = rng.normal(size=(n_states, n_actions))
    start = np.zeros(n_states)
    start[~terminal] = 1.0 / (~terminal).sum()
    mdp = TabularMDP.build(P, R, float(rng.uniform(0.5, 0.95)), start, terminal)
    if rng.random() < 0.5:
        features = np.eye(n_states)
    else:
        features = rng.normal(size=(n_states, int(rng.integers(2, 4))))
    n_features = features.shape[1]
    model = OptionModel(
        IntraOptionPolicy(rng.normal(size=(n_options, n_actions, n_features)), float(rng.uniform(0.5, 2.0))),
        TerminationFunction(rng.normal(size=(n_options, n_features))),
        features,
    )
    pi_omega = oracle.epsilon_greedy_table(rng.normal(size=(n_states, n_options)), float(rng.uniform(0.05, 0.5)))
    s0 = int(rng.choice(np.flatnonzero(~terminal)))
    return Instance(mdp, model, pi_omega, (s0, int(rng.integers(n_options))))


def check_instance(inst: Instance, corrupt: bool = False) -> dict:
    """Compute every metric of the battery for one instance."""
    mdp, model, pi_omega, start = inst.mdp, inst.model, inst.pi_omega, inst.start
    live = ~mdp.terminal
    chain = oracle.build_chain(mdp, model, pi_omega)
    n_options = model.n_options
    gamma = mdp.discount
    same_rows = chain.same.sum(axis=1).reshape(-1, n_options)[live]
    shifted_rows = chain.shifted.sum(axis=1).reshape(-1, n_options)[live]

    values = oracle.exact_values(mdp, model, pi_omega, start)
    res = oracle.residuals(mdp, model, pi_omega, values)

    g1 = oracle.intra_option_gradient(mdp, model, pi_omega, start)
    n1 = oracle.central_difference(oracle.rho_objective(mdp, model, pi_omega, start), model.policy.weights.copy())
    g2 = oracle.termination_gradient(mdp, model, pi_omega, start)
    n2 = oracle.central_difference(
        oracle.arrival_objective(mdp, model, pi_omega, start), model.termination.weights.copy()
    )
    if corrupt:
        g1 = g1 * 1.01

    fixed = oracle.intra_q_fixed_point(mdp, model)
    greedy = oracle.epsilon_greedy_table((model.action_probs() * fixed).sum(axis=2), 0.0)
    greedy_values = oracle.exact_values(mdp, model, greedy)

    mu = oracle.discounted_weighting(chain, start, "same")
    mu_series = oracle.truncated_weighting(chain, start, "same", 200)
    series_bound = gamma**201 / (1 - gamma)

    return {
        "intra_gradient_rel_error": oracle.relative_error(g1, n1),
        "termination_gradient_rel_error": oracle.relative_error(g2, n2),
        "chain_same_mass": float(np.abs(same_rows - gamma).max(initial=0.0)),
        "chain_shifted_mass": float(np.abs(shifted_rows - gamma).max(initial=0.0)),
        "residual": max(res.values()),
        "fixed_point_gap": float(np.abs(fixed - greedy_values.q_u).max()),
        "weighting_series_gap": max(0.0, float(np.abs(mu - mu_series).max()) - series_bound),
        "weighting_conditioning_gap": conditioning_gap(mdp, model, pi_omega, start),
    }


def conditioning_gap(mdp, model: OptionModel, pi_omega, start) -> float:
    """Compare the shifted weighting with its construction from the same-conditioned one.

    Arriving in s1 with w0, the option executed at s1 is drawn from the
    continue/reselect mixture; every later arrival pair is one state step
    (under the executing option) away from an executing pair.
    """
    s1, w0 = start
    chain = oracle.build_chain(mdp, model, pi_omega)
    n_options = model.n_options
    beta = model.term_probs()[s1, w0]
    mix = beta * pi_omega[s1].copy()
    mix[w0] += 1.0 - beta
    executing = np.zeros((mdp.n_states, n_options))
    executing[s1] = mix
    mu_same = oracle.discounted_weighting(chain, executing, "same")
    pi = model.action_probs()
    step = mdp.discount * np.einsum("swa,sat->swt", pi, mdp.transition) * (~mdp.terminal)[:, None, None]
    predicted = np.einsum("sw,swt->tw", mu_same, step)
    predicted[s1, w0] += 1.0
    actual = oracle.discounted_weighting(chain, start, "shifted")
    return float(np.abs(predicted - actual).max())


LIMITS = {
    "intra_gradient_rel_error": GRADIENT_TOL,
    "termination_gradient_rel_error": GRADIENT_TOL,
    "chain_same_mass": CHAIN_TOL,
    "chain_shifted_mass": CHAIN_TOL,
    "residual": RESIDUAL_TOL,
    "fixed_point_gap": FIXED_POINT_TOL,
    "weighting_series_gap": WEIGHTING_TOL,
    "weighting_conditioning_gap": WEIGHTING_TOL,
}


def run_battery(n_instances=20, seed=0, max_states=5, max_actions=3, max_options=3, corrupt=False) -> list[InstanceResult]:
    rng = make_rng(seed)
    results = []
    for i in range(n_instances):
        inst = random_instance(rng, max_states, max_actions, max_options)
        metrics = check_instance(inst, corrupt=corrupt)
        failures = [k for k, limit in LIMITS.items() if not metrics[k] <= limit]
        shape = (inst.mdp.n_states, inst.mdp.n_actions, inst.model.n_options)
        results.append(InstanceResult(i, shape, metrics, failures))
        results[-1].instance = inst
    return results


def format_report(results: list[InstanceResult]) -> str:
    lines = []
    for r in results:
        status = "pass" if r.passed else "FAIL " + ",".join(r.failures)
        lines.append(
            f"instance {r.index:3d} S={r.shape[0]} A={r.shape[1]} O={r.shape[2]} "
            f"intra={r.metrics['intra_gradient_rel_error']:.3e} term={r.metrics['termination_gradient_rel_error']:.3e} "
            f"mass={max(r.metrics['chain_same_mass'], r.metrics['chain_shifted_mass']):.1e} "
            f"resid={r.metrics['residual']:.1e} fixed={r.metrics['fixed_point_gap']:.1e} {status}"
        )
    lines.append("worst case:")
    for key, limit in LIMITS.items():
        worst = max((r.metrics[key] for r in results), default=0.0)
        lines.append(f"  {key:28s} {worst:.3e} (limit {limit:.0e})")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} instances passed")
    return "\n".join(lines) + "\n"


def write_replay(result: InstanceResult, directory) -> list[str]:
    """Serialize a failing instance: the MDP in text format plus its option parameters."""
    os.makedirs(directory, exist_ok=True)
    inst = result.instance
    base = os.path.join(directory, f"instance_{result.index}")
    with open(base + ".mdp", "w") as fh:
        fh.write(mdp_mod.dumps(inst.mdp))
    arrays = {
        "theta": inst.model.policy.weights,
        "vartheta": inst.model.termination.weights,
        "features": inst.model.features,
        "pi_omega": inst.pi_omega,
        "temperature": np.array([inst.model.policy.temperature]),
        "start": np.array(inst.start, dtype=float),
    }
    checkpoint.save_arrays(base + ".params", "oracle", inst.model.n_options, "matrix", arrays)
    return [base + ".mdp", base + ".params"]
