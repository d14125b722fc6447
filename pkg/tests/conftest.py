"""Shared fixtures: the standard example taxonomies and random generators."""

from __future__ import annotations

import json

import numpy as np
import pytest

from pfmodel import (
    ClassifierProfileSet,
    Edge,
    NormalizedConfusionMatrix,
    Pipeline,
    validate_taxonomy,
)

GAMMA_A = NormalizedConfusionMatrix(tn=0.9, fp=0.1, fn=0.2, tp=0.8)
GAMMA_B = NormalizedConfusionMatrix(tn=0.8, fp=0.2, fn=0.1, tp=0.9)


@pytest.fixture
def chain_abd():
    """The three-level chain A > B > D with probabilistic edges."""
    return validate_taxonomy(
        ["A", "B", "D"],
        [Edge("B", "A", 0.8), Edge("D", "B", 0.5)],
    )


@pytest.fixture
def dag_example():
    """Four categories: B and C under A, C and D under B (C has two parents)."""
    return validate_taxonomy(
        ["A", "B", "C", "D"],
        [Edge("B", "A", 0.6), Edge("C", "A", 0.3), Edge("C", "B", 0.5), Edge("D", "B", 0.4)],
    )


@pytest.fixture
def l2_pipeline():
    """Depth-2 pipeline with f = (0.8, 0.5) and equal classifiers."""
    p = Pipeline(("A", "B", "C"), (1.0, 0.8, 0.5))
    profiles = ClassifierProfileSet(base={"B": GAMMA_A, "C": GAMMA_A}, root="A")
    return p, profiles


def random_gamma(rng: np.random.Generator) -> NormalizedConfusionMatrix:
    fp = float(rng.random())
    tp = float(rng.random())
    return NormalizedConfusionMatrix(tn=1.0 - fp, fp=fp, fn=1.0 - tp, tp=tp)


def random_pipeline(
    rng: np.random.Generator, depth: int
) -> tuple[Pipeline, ClassifierProfileSet]:
    nodes = tuple(f"n{i}" for i in range(depth + 1))
    fs = (1.0,) + tuple(float(rng.random()) for _ in range(depth))
    base = {nodes[k]: random_gamma(rng) for k in range(1, depth + 1)}
    return Pipeline(nodes, fs), ClassifierProfileSet(base=base, root=nodes[0])


def random_tree(rng: np.random.Generator, n_nodes: int):
    """A random rooted tree taxonomy with uniform edge probabilities."""
    names = [f"c{i}" for i in range(n_nodes)]
    edges = []
    for i in range(1, n_nodes):
        parent = names[int(rng.integers(0, i))]
        edges.append(Edge(names[i], parent, float(rng.random())))
    return validate_taxonomy(names, edges)


# --- the standard file-format example pair ------------------------------------

DAG_TAXONOMY_JSON = json.dumps(
    {
        "root": "A",
        "categories": ["A", "B", "C", "D"],
        "edges": [
            {"child": "B", "parent": "A", "f": 0.6},
            {"child": "C", "parent": "A", "f": 0.3},
            {"child": "C", "parent": "B", "f": 0.5},
            {"child": "D", "parent": "B", "f": 0.4},
        ],
    }
)

DAG_PROFILES_JSON = json.dumps(
    {
        "classifiers": {
            "B": {"tn": 0.9, "fp": 0.1, "fn": 0.2, "tp": 0.8},
            "C": {"tn": 0.85, "fp": 0.15, "fn": 0.1, "tp": 0.9},
            "D": {"tn": 0.95, "fp": 0.05, "fn": 0.25, "tp": 0.75},
        }
    }
)

L2_TAXONOMY_JSON = json.dumps(
    {
        "root": "A",
        "categories": ["A", "B", "C"],
        "edges": [
            {"child": "B", "parent": "A", "f": 0.8},
            {"child": "C", "parent": "B", "f": 0.5},
        ],
    }
)

L2_PROFILES_JSON = json.dumps(
    {
        "classifiers": {
            "B": {"tn": 0.9, "fp": 0.1, "fn": 0.2, "tp": 0.8},
            "C": {"tn": 0.9, "fp": 0.1, "fn": 0.2, "tp": 0.8},
        }
    }
)


@pytest.fixture
def dag_files(tmp_path):
    t = tmp_path / "taxonomy.json"
    p = tmp_path / "profiles.json"
    t.write_text(DAG_TAXONOMY_JSON)
    p.write_text(DAG_PROFILES_JSON)
    return str(t), str(p)


@pytest.fixture
def l2_files(tmp_path):
    t = tmp_path / "taxonomy.json"
    p = tmp_path / "profiles.json"
    t.write_text(L2_TAXONOMY_JSON)
    p.write_text(L2_PROFILES_JSON)
    return str(t), str(p)
