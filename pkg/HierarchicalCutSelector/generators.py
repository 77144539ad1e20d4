"""
Synthetic MILP families: set covering, maximum independent set and multiple
knapsack, all emitted in minimisation, all-``<=`` form with binary variables.
"""

import logging
import math
from pathlib import Path
from typing import Iterable, List, Sequence, Set, Tuple

import numpy as np

from HierarchicalCutSelector.exceptions import MissingArtifact
from HierarchicalCutSelector.models.dtos import Family, GenSpec, SplitManifestDTO
from HierarchicalCutSelector.solver.lp import MilpInstance, Row, load_instance, save_instance

logger = logging.getLogger(__name__)

TRAIN_FRACTION = 0.8
MAX_COST = 100
WEIGHT_RANGE = (10, 20)

Edge = Tuple[int, int]


def _binary(name: str, c: Sequence[float], rows: Iterable[Row]) -> MilpInstance:
    n = len(c)
    return MilpInstance(
        name=name,
        c=tuple(float(v) for v in c),
        rows=tuple(rows),
        integer_set=tuple(range(n)),
        lower=(0.0,) * n,
        upper=(1.0,) * n,
    )


# ---------------------------------------------------------------------------
# Set covering
# ---------------------------------------------------------------------------

def set_covering(n_rows: int, n_cols: int, density: float, rng: np.random.Generator, name: str = 'setcover') -> MilpInstance:
    """
    Balas-Ho style set covering: every row is covered by at least one column
    and every column covers at least two rows when the matrix allows it.

    The number of nonzeros is raised to ``max(2 * n_cols, n_rows)`` when
    *density* alone would give fewer. Costs are uniform integers in [1, 100].
    """
    nnz = min(n_rows * n_cols, max(int(n_rows * n_cols * density), 2 * n_cols, n_rows))

    cols = rng.choice(n_cols, size=nnz)
    forced = min(2 * n_cols, nnz)
    cols[:forced] = np.repeat(np.arange(n_cols), 2)[:forced]
    counts = np.minimum(np.bincount(cols, minlength=n_cols), n_rows)
    nnz = int(counts.sum())
    if nnz < n_rows:
        raise ValueError(f"Cannot cover {n_rows} rows with {nnz} nonzeros")

    rows_of = np.empty(nnz, dtype=int)
    rows_of[:n_rows] = rng.permutation(n_rows)
    i = 0
    for count in counts:
        if i >= n_rows:
            rows_of[i:i + count] = rng.choice(n_rows, size=count, replace=False)
        elif i + count > n_rows:
            remaining = np.setdiff1d(np.arange(n_rows), rows_of[i:n_rows], assume_unique=True)
            rows_of[n_rows:i + count] = rng.choice(remaining, size=i + count - n_rows, replace=False)
        i += count

    costs = rng.integers(MAX_COST, size=n_cols) + 1

    members: List[Set[int]] = [set() for _ in range(n_rows)]
    start = 0
    for j, count in enumerate(counts):
        for r in rows_of[start:start + count]:
            members[int(r)].add(j)
        start += count
    rows = [Row(tuple(sorted(cols)), (-1.0,) * len(cols), -1.0) for cols in members]
    return _binary(name, costs, rows)


# ---------------------------------------------------------------------------
# Maximum independent set
# ---------------------------------------------------------------------------

def barabasi_albert(n_nodes: int, affinity: int, rng: np.random.Generator) -> List[Edge]:
    """Preferential-attachment graph; each new node links to *affinity* earlier nodes."""
    if not 1 <= affinity < n_nodes:
        raise ValueError("affinity must satisfy 1 <= affinity < n_nodes")
    edges: Set[Edge] = set()
    degrees = np.zeros(n_nodes, dtype=int)
    for new_node in range(affinity, n_nodes):
        # the first node is connected to all previous ones
        if new_node == affinity:
            neighborhood = np.arange(new_node)
        else:
            neighbor_prob = degrees[:new_node] / (2 * len(edges))
            neighborhood = rng.choice(new_node, affinity, replace=False, p=neighbor_prob)
        for node in neighborhood:
            edges.add((int(node), new_node))
            degrees[node] += 1
            degrees[new_node] += 1
    return sorted(edges)


def independent_set_from_edges(n_nodes: int, edges: Iterable[Edge], name: str = 'indset') -> MilpInstance:
    """``min -sum x`` subject to ``x_u + x_v <= 1`` for every edge."""
    pairs = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
    rows = [Row((u, v), (1.0, 1.0), 1.0) for u, v in pairs]
    return _binary(name, [-1.0] * n_nodes, rows)


def independent_set(n_nodes: int, affinity: int, rng: np.random.Generator, name: str = 'indset') -> MilpInstance:
    return independent_set_from_edges(n_nodes, barabasi_albert(n_nodes, affinity, rng), name)


# ---------------------------------------------------------------------------
# Multiple knapsack
# ---------------------------------------------------------------------------

def weights_and_values(n_items: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Weakly correlated items: weights in [10, 20), values within 10 of the weight."""
    low, high = WEIGHT_RANGE
    spread = high - low
    weights = rng.integers(low, high, n_items)
    values = np.array([rng.integers(max(int(w) - spread, 1), int(w) + spread) for w in weights])
    return weights, values


def multiple_knapsack(n_items: int, n_knapsacks: int, rng: np.random.Generator, name: str = 'mknapsack') -> MilpInstance:
    """
    Items go into at most one knapsack; variable ``i * n_knapsacks + k``
    places item ``i`` in knapsack ``k``. Capacities are drawn from 40-60% of
    an even share, the last one taking what is left of half the total weight.
    """
    weights, values = weights_and_values(n_items, rng)
    total = int(weights.sum())
    capacities = np.zeros(n_knapsacks, dtype=int)
    if n_knapsacks > 1:
        low, high = int(0.4 * total // n_knapsacks), int(0.6 * total // n_knapsacks)
        capacities[:-1] = rng.integers(low, max(high, low + 1), n_knapsacks - 1)
    capacities[-1] = max(int(0.5 * total) - int(capacities[:-1].sum()), 0)

    var = lambda i, k: i * n_knapsacks + k
    rows = [
        Row(tuple(var(i, k) for i in range(n_items)), tuple(float(w) for w in weights), float(capacities[k]))
        for k in range(n_knapsacks)
    ]
    rows += [
        Row(tuple(var(i, k) for k in range(n_knapsacks)), (1.0,) * n_knapsacks, 1.0)
        for i in range(n_items)
    ]
    c = [-float(values[i]) for i in range(n_items) for _ in range(n_knapsacks)]
    return _binary(name, c, rows)


# ---------------------------------------------------------------------------
# Corpora and splits
# ---------------------------------------------------------------------------

def generate(spec: GenSpec) -> List[MilpInstance]:
    """Generate ``spec.count`` instances from one generator seeded with ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    instances = []
    for idx in range(spec.count):
        name = f'{spec.family.value}_{spec.seed}_{idx:04d}'
        if spec.family == Family.SET_COVERING:
            instances.append(set_covering(spec.n_rows, spec.n_cols, spec.density, rng, name))
        elif spec.family == Family.MAX_INDEPENDENT_SET:
            instances.append(independent_set(spec.n_nodes, spec.affinity, rng, name))
        else:
            instances.append(multiple_knapsack(spec.n_items, spec.n_knapsacks, rng, name))
    logger.info("Generated %d %s instances", len(instances), spec.family.value)
    return instances


def split_names(names: Sequence[str], seed: int) -> Tuple[List[str], List[str]]:
    """Shuffle *names* and cut them 80/20 into train and test."""
    order = np.random.default_rng(seed).permutation(len(names))
    n_train = math.floor(TRAIN_FRACTION * len(names) + 1e-9)
    shuffled = [names[int(i)] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


def hold_out(pool: Sequence[MilpInstance], size: int) -> Tuple[List[MilpInstance], List[MilpInstance]]:
    """
    Split the last *size* instances off *pool* as a validation slice.

    At least one instance always stays in the fitting part, so a pool of one
    yields an empty slice.
    """
    size = max(0, min(size, len(pool) - 1))
    if size == 0:
        return list(pool), []
    return list(pool[:-size]), list(pool[-size:])


def write_split(instances: Sequence[MilpInstance], out_dir: Path, spec: GenSpec, preset: str) -> SplitManifestDTO:
    """Write every instance as JSON plus a ``split.json`` manifest."""
    out_dir = Path(out_dir)
    instance_dir = out_dir / 'instances'
    instance_dir.mkdir(parents=True, exist_ok=True)
    for instance in instances:
        save_instance(instance, instance_dir / f'{instance.name}.json')
    train, test = split_names([inst.name for inst in instances], spec.seed)
    manifest = SplitManifestDTO(family=spec.family, preset=preset, seed=spec.seed, spec=spec, train=train, test=test)
    (out_dir / 'split.json').write_text(manifest.model_dump_json(indent=2))
    logger.info("Wrote %d train / %d test instances to %s", len(train), len(test), out_dir)
    return manifest


def load_split(path: Path) -> Tuple[SplitManifestDTO, List[MilpInstance], List[MilpInstance]]:
    """Read a ``split.json`` manifest and the instances it lists."""
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(f"Split manifest not found: {path}")
    manifest = SplitManifestDTO.model_validate_json(path.read_text())
    instance_dir = path.parent / 'instances'
    load = lambda names: [load_instance(instance_dir / f'{name}.json') for name in names]
    return manifest, load(manifest.train), load(manifest.test)
