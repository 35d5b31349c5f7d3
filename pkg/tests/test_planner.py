import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pot.errors import SimulationFailed
from pot.planner import (
    SearchError,
    SearchNode,
    SearchTree,
    SolverConfig,
    Transition,
    check_tree,
    search,
    simulate,
    ucb_select,
)
from toy_models import BanditModel, TigerModel, tiger_expectimax

start = lambda rng: "start"  # noqa: E731


def cfg(**kw):
    base = dict(max_simulations=1000, time_budget=60.0, max_depth=1)
    base.update(kw)
    return SolverConfig(**base)


def node_with(edges, n=None):
    node = SearchNode()
    for a, (q, visits) in edges.items():
        e = node.edge(a)
        e.visit_count = visits
        e.value_sum = q * visits
    node.visit_count = n if n is not None else sum(v for _, v in edges.values())
    node.expanded = True
    return node


# ucb_select


def test_ucb_untried_action_first():
    node = node_with({0: (0.9, 10), 1: (0.1, 5)})
    assert ucb_select(node, 1.0, [0, 1, 2]) == 2


def test_ucb_pure_exploitation():
    node = node_with({0: (0.5, 50), 1: (0.4, 50)}, n=100)
    assert ucb_select(node, 0.0) == 0


def test_ucb_exploration_bonus_hand_evaluated():
    node = node_with({0: (0.5, 90), 1: (0.4, 10)}, n=100)
    s0 = 0.5 + math.sqrt(math.log(100) / 90)
    s1 = 0.4 + math.sqrt(math.log(100) / 10)
    assert s0 == pytest.approx(0.726, abs=1e-3)
    assert s1 == pytest.approx(1.079, abs=1e-3)
    assert ucb_select(node, 1.0) == 1


def test_ucb_ties_go_to_lowest():
    node = node_with({0: (0.5, 10), 1: (0.5, 10)})
    assert ucb_select(node, 1.0, [0, 1]) == 0
    assert ucb_select(SearchNode(), 1.0, [3, 4]) == 3


# simulate


class OneAction:
    def legal_actions(self, state):
        return [] if state == "end" else ["go"]

    def is_terminal(self, state):
        return state == "end"

    def step(self, state, action, rng):
        return Transition("end", "o", 1.0, True)

    def rollout(self, state, depth, rng):
        return 0.25


def test_simulate_terminal_creates_nothing():
    node = SearchNode()
    assert simulate(OneAction(), "end", node, 5, cfg(), random.Random(0)) == 0.0
    assert node.edges == {} and node.visit_count == 0


def test_simulate_first_visit_is_one_rollout():
    node = SearchNode()
    value = simulate(OneAction(), "start", node, 5, cfg(), random.Random(0))
    assert value == 0.25
    assert node.expanded and node.edges == {} and node.visit_count == 0


def test_simulate_failure_leaves_counts_untouched():
    class Flaky(OneAction):
        def step(self, state, action, rng):
            raise SimulationFailed("oracle down")

    node = SearchNode()
    node.expanded = True
    with pytest.raises(SimulationFailed):
        simulate(Flaky(), "start", node, 5, cfg(), random.Random(0))
    assert node.visit_count == 0
    assert all(e.visit_count == 0 for e in node.edges.values())


# search


def test_single_action_model():
    action, diag = search(OneAction(), start, cfg(max_simulations=10))
    assert action == "go"
    assert diag.root_q == {"go": 1.0}


def test_two_armed_bandit_counts_and_values():
    tree = SearchTree()
    action, diag = search(BanditModel([0.2, 0.8]), start, cfg(max_simulations=10_000, ucb_constant=1.0), tree)
    assert action == 1
    assert diag.root_q[0] == pytest.approx(0.2, abs=0.05)
    assert diag.root_q[1] == pytest.approx(0.8, abs=0.05)
    assert tree.root.visit_count == 10_000
    assert sum(e.visit_count for e in tree.root.edges.values()) == 10_000
    assert check_tree(tree.root, 0.0, 1.0) == []


def test_bernoulli_bandit_picks_better_arm():
    wins = 0
    for seed in range(20):
        action, diag = search(
            BanditModel([0.2, 0.8], noisy=True), start, cfg(max_simulations=2000, rng_seed=seed)
        )
        wins += action == 1
    assert wins == 20


def test_search_errors():
    with pytest.raises(ValueError):
        search(OneAction(), start, cfg(max_simulations=0))
    with pytest.raises(ValueError):
        search(OneAction(), start, cfg(time_budget=0))
    with pytest.raises(SearchError):
        search(OneAction(), lambda rng: "end", cfg())


def test_all_simulations_failing_is_an_error():
    class Broken(OneAction):
        def step(self, state, action, rng):
            raise SimulationFailed("nope")

    with pytest.raises(SearchError):
        search(Broken(), start, cfg(max_simulations=5))


def test_time_budget_stops_search():
    _, diag = search(BanditModel([0.5]), start, cfg(max_simulations=10**9, time_budget=0.05))
    assert diag.wall_time < 1.0
    assert 0 < diag.simulations < 10**9


@pytest.mark.parametrize("p_left", [0.0, 0.15, 0.3, 0.5, 0.7, 0.85, 1.0])
def test_tiger_matches_expectimax(p_left):
    q = tiger_expectimax(p_left, 3)
    best = max(q, key=q.get)
    belief = lambda rng: "L" if rng.random() < p_left else "R"  # noqa: E731
    config = SolverConfig(ucb_constant=110.0, max_depth=3, max_simulations=20_000, time_budget=120, rng_seed=1)
    tree = SearchTree()
    action, _ = search(TigerModel(), belief, config, tree)
    assert action == best
    assert check_tree(tree.root, 3 * -100.0, 3 * 10.0) == []


def test_expectimax_oracle_sanity():
    # Horizon 1 at a uniform belief: opening is -45, listening costs 1.
    assert tiger_expectimax(0.5, 1) == {1: -45.0, 2: -45.0, 0: -1.0}


# tree


def test_advance_into_existing_and_absent_child():
    tree = SearchTree()
    child = tree.root.edge("a").children.setdefault("o", SearchNode())
    child.visit_count = 37
    tree.advance("a", "o")
    assert tree.root is child and tree.root.visit_count == 37
    tree.advance("x", "y")
    assert tree.root.visit_count == 0 and tree.root.edges == {}


def test_advance_replays_recorded_path():
    model = TigerModel()
    belief = lambda rng: "L"  # noqa: E731
    tree = SearchTree()
    search(model, belief, SolverConfig(ucb_constant=110, max_depth=3, max_simulations=500), tree)
    target = tree.node_at([(0, "L"), (0, "L")])
    assert target is not None
    tree.advance(0, "L").advance(0, "L")
    assert tree.root is target


def test_determinism():
    def run():
        tree = SearchTree()
        a, d = search(TigerModel(), lambda r: "L" if r.random() < 0.5 else "R",
                      SolverConfig(ucb_constant=110, max_depth=3, max_simulations=3000, rng_seed=7), tree)
        return a, d.simulations, d.root_q, d.root_n

    assert run() == run()


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 400), st.integers(1, 400), st.integers(0, 1000))
def test_anytime_prefix(b1, b2, seed):
    """A larger budget replays the smaller run's simulations before continuing."""
    small, large = sorted((b1, b2))

    class Recording(TigerModel):
        def __init__(self):
            self.log = []

        def step(self, state, action, rng):
            tr = super().step(state, action, rng)
            self.log.append((state, action, tr.observation))
            return tr

    runs = []
    for budget in (small, large):
        m = Recording()
        search(m, lambda r: "L" if r.random() < 0.5 else "R",
               SolverConfig(ucb_constant=110, max_depth=3, max_simulations=budget, rng_seed=seed))
        runs.append(m.log)
    assert runs[1][: len(runs[0])] == runs[0]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 600))
def test_count_conservation_and_q_bounds(seed, sims):
    tree = SearchTree()
    search(TigerModel(), lambda r: "L" if r.random() < 0.3 else "R",
           SolverConfig(ucb_constant=110, max_depth=3, max_simulations=sims, rng_seed=seed), tree)
    assert check_tree(tree.root, 3 * -100.0, 3 * 10.0) == []
