from __future__ import annotations

import itertools

from helpers import brute_solvable, primitive_count, random_tiny_problem
from htep.search import SearchConfig, htep
from htep.validate import validate

CONFIGS = [SearchConfig(heuristic=h, flaw_strategy=f) for h, f in itertools.product(("tdgm", "f_tc", "fape"), ("lcfr", "fape"))]


def tiny_corpus(seeds=range(60), max_primitives=3):
    """Generated problems small enough for the exhaustive refiner."""
    out = []
    for seed in seeds:
        pr = random_tiny_problem(seed)
        assert len(pr.abstract_tasks) <= 3 and len(pr.durative_actions) <= 6
        assert all(len(ms) <= 2 for ms in pr.methods_for.values())
        if primitive_count(pr) <= max_primitives:
            out.append(pr)
    return out


def agreement(problems, configs=CONFIGS):
    """``(agreements, disagreements, solvable)``; disagreements list (name, config, oracle, planner)."""
    agree, disagree, solvable = 0, [], 0
    for pr in problems:
        expected = brute_solvable(pr)
        solvable += expected
        for config in configs:
            result = htep(pr, config)
            assert result.stats.outcome in ("solved", "unsolvable"), (pr.name, result.stats.outcome)
            if result.solved:
                assert validate(pr, result.plan, result.schedule).accepted, pr.name
            if result.solved == expected:
                agree += 1
            else:
                disagree.append((pr.name, config.name, expected, result.solved))
    return agree, disagree, solvable


def test_planner_verdicts_match_exhaustive_refiner():
    problems = tiny_corpus()
    assert len(problems) >= 20
    agree, disagree, solvable = agreement(problems)
    assert disagree == []
    # both verdicts are represented in the corpus
    assert 0 < solvable < len(problems)
