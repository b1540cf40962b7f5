from __future__ import annotations

import random
from pathlib import Path

import numpy as np
import pytest

from stepgrade.dag import RubricDag, RubricNode

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
SAMPLE_DATASET = DATA_DIR / "sample_dataset.json"


@pytest.fixture(scope="session")
def sample_dataset_path() -> str:
    return str(SAMPLE_DATASET)


@pytest.fixture(scope="session")
def sample_dataset():
    from stepgrade.dataset import load_dataset

    return load_dataset(str(SAMPLE_DATASET))


def make_random_dag(rng: random.Random, n_max: int = 50) -> RubricDag:
    """Random valid DAG: forward edges, last node final, every node on a
    path to some final node."""
    n = rng.randint(1, n_max)
    deps: list[list[int]] = [[] for _ in range(n + 1)]
    for i in range(2, n + 1):
        for j in range(1, i):
            if rng.random() < min(1.0, 2.0 / (i - 1)):
                deps[i].append(j)
    finals = {n}
    for i in range(1, n):
        if rng.random() < 0.1:
            finals.add(i)
    # completeness fix-up: nodes that reach no final get wired into the last node
    reach_final = _reaches_final(n, deps, finals)
    for i in range(1, n + 1):
        if not reach_final[i]:
            deps[n].append(i)
    nodes = tuple(
        RubricNode(
            index=i,
            formula=f"$$x_{{{i}}} = {i}$$",
            dependency=tuple(sorted(set(deps[i]))),
            is_final_answer=i in finals,
        )
        for i in range(1, n + 1)
    )
    return RubricDag(nodes)


def _reaches_final(n: int, deps: list[list[int]], finals: set[int]) -> list[bool]:
    reach = [False] * (n + 1)
    for f in finals:
        reach[f] = True
    # ancestors of finals reach a final; process in reverse topological order
    for i in range(n, 0, -1):
        if reach[i]:
            for d in deps[i]:
                reach[d] = True
    return reach


def closure_oracle(dag: RubricDag, matched: set[int]) -> frozenset[int]:
    """Brute-force reverse reachability by boolean matrix transitive closure."""
    n = len(dag.nodes)
    adj = np.zeros((n + 1, n + 1), dtype=bool)  # adj[u, v]: edge u -> v
    for node in dag.nodes:
        for d in node.dependency:
            adj[d, node.index] = True
    closure = adj.copy()
    for _ in range(n):
        new = closure | (closure @ closure)
        if np.array_equal(new, closure):
            break
        closure = new
    out = set(matched)
    for v in matched:
        out.update(int(u) for u in np.nonzero(closure[:, v])[0] if u >= 1)
    return frozenset(out)


def tau_b_oracle(xs, ys) -> float:
    """Definition-level O(n^2) pair counting with tie groups."""
    import math
    from collections import Counter

    n = len(xs)
    nc = nd = 0
    for i in range(n):
        for j in range(i + 1, n):
            prod = (xs[i] - xs[j]) * (ys[i] - ys[j])
            if prod > 0:
                nc += 1
            elif prod < 0:
                nd += 1
    n0 = n * (n - 1) // 2
    n1 = sum(t * (t - 1) // 2 for t in Counter(xs).values())
    n2 = sum(u * (u - 1) // 2 for u in Counter(ys).values())
    denom_sq = (n0 - n1) * (n0 - n2)
    if denom_sq <= 0:
        raise ValueError("degenerate")
    return (nc - nd) / math.sqrt(denom_sq)
