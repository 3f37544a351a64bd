"""Shared test fixtures and oracle helpers."""
from __future__ import annotations

import numpy as np
import pytest

from hlsl.data import AtomDatabase, PredicateSymbol, build_adjacency


@pytest.fixture
def citation_db() -> AtomDatabase:
    """The running example: Cites(Paper1, Paper2), Mentions(Paper2, Gene),
    Mentions(Paper1, Gene); Mentions is the target predicate."""
    db = AtomDatabase([PredicateSymbol("Cites"), PredicateSymbol("Mentions", is_target=True)])
    db.add_atom("Cites", "Paper1", "Paper2")
    db.add_atom("Mentions", "Paper2", "Gene")
    db.add_atom("Mentions", "Paper1", "Gene")
    return build_adjacency(db)


def random_chain_db(seed: int, n_a: int = 10, n_b: int = 7, n_c: int = 8) -> AtomDatabase:
    """Small three-layer database with soft evidence and labeled targets."""
    rng = np.random.default_rng(seed)
    schema = [
        PredicateSymbol("P"),
        PredicateSymbol("Q"),
        PredicateSymbol("S"),
        PredicateSymbol("T", is_target=True),
    ]
    db = AtomDatabase(schema)
    A = [f"a{i}" for i in range(n_a)]
    B = [f"b{i}" for i in range(n_b)]
    C = [f"c{i}" for i in range(n_c)]
    for a in A:
        for b in rng.choice(B, 2, replace=False):
            db.add_atom("P", a, str(b), float(rng.uniform(0.55, 1.0)))
    for b in B:
        for c in rng.choice(C, 2, replace=False):
            db.add_atom("Q", b, str(c), float(rng.uniform(0.55, 1.0)))
    for a in A:
        db.add_atom("S", a, str(rng.choice(C)))
    pairs = sorted({(a, str(c)) for a in A for c in rng.choice(C, 3, replace=False)})
    for a, c in pairs:
        db.add_atom("T", a, c, float(rng.uniform(0.0, 1.0)))
    return build_adjacency(db)


def random_map_instance(seed: int, n_free: int | None = None):
    """A small MAP problem with an exhaustive-grid oracle.

    Free variables are coupled at most pairwise and only along a chain
    (var k with var k+1), which lets the grid minimum over all
    1001**n_free points factor into 2-D table sweeps without changing its
    value. All constants land on the 1e-3 lattice so the continuous optimum
    coincides with a grid point.
    """
    from hlsl.clauses import negative_prior
    from hlsl.grounding import GroundClause, Grounding
    from hlsl.learning import WeightedModel

    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4)) if n_free is None else n_free
    schema = [PredicateSymbol("E"), PredicateSymbol("T", is_target=True)]
    db = AtomDatabase(schema)
    evid = [db.add_atom("E", f"s{i}", f"t{i}", round(float(rng.uniform(0, 1)), 3)) for i in range(4)]
    free = [db.add_atom("T", f"x{i}", f"y{i}", 0.0) for i in range(m)]
    build_adjacency(db)

    n_clauses = 3
    grounds = []
    n_grounds = int(rng.integers(2, 8))
    for _ in range(n_grounds):
        if m == 1 or rng.random() < 0.5:
            touched = [int(rng.integers(0, m))]
        else:
            k = int(rng.integers(0, m - 1))
            touched = [k, k + 1]
        terms = []
        for v in touched:
            terms.append((free[v].index, int(rng.choice([-1, 1]))))
        for e in rng.choice(4, int(rng.integers(0, 3)), replace=False):
            terms.append((evid[int(e)].index, int(rng.choice([-1, 1]))))
        grounds.append(GroundClause(int(rng.integers(0, n_clauses)), tuple(terms)))
    grounds.sort(key=lambda g: g.clause_index)
    carriers = [negative_prior("T") for _ in range(n_clauses)]
    weights = np.round(rng.uniform(0.2, 2.0, n_clauses), 3)
    model = WeightedModel(carriers, weights)
    grounding = Grounding(carriers, grounds, db)
    return db, model, grounding, [a.index for a in free]


def chain_grid_min(model, grounding, db, free, step=1e-3):
    """Exact minimum of the weighted penalty over the full 1e-3 grid.

    Requires chain-shaped couplings: each ground clause touches one free
    variable or two adjacent ones. The full-grid minimum is folded left to
    right through pairwise tables, so every grid point is accounted for.
    """
    values = db.value_vector()
    weights = np.asarray(model.weights)
    axis = np.round(np.arange(0.0, 1.0 + step / 2, step), 9)
    pos = {atom: k for k, atom in enumerate(free)}
    singles = [np.zeros(len(axis)) for _ in free]
    pairs = {k: np.zeros((len(axis), len(axis))) for k in range(len(free) - 1)}
    const_total = 0.0
    for gid in range(len(grounding)):
        sl = slice(grounding.term_start[gid], grounding.term_start[gid] + grounding.term_count[gid])
        atoms = grounding.term_atom[sl]
        coefs = grounding.term_coef[sl]
        w = float(weights[grounding.g_clause[gid]])
        c = float(grounding.g_const0[gid])
        touched = []
        for a, b in zip(atoms, coefs):
            if int(a) in pos:
                touched.append((pos[int(a)], float(b)))
            else:
                c += float(b) * values[int(a)]
        if not touched:
            const_total += w * max(c, 0.0)
        elif len(touched) == 1:
            k, b = touched[0]
            singles[k] += w * np.maximum(c + b * axis, 0.0)
        elif len(touched) == 2:
            (k1, b1), (k2, b2) = sorted(touched)
            assert k2 == k1 + 1, "oracle requires chain couplings"
            pairs[k1] += w * np.maximum(c + b1 * axis[:, None] + b2 * axis[None, :], 0.0)
        else:
            raise AssertionError("oracle supports at most pairwise couplings")
    best = singles[0]
    for k in range(len(free) - 1):
        best = np.min(best[:, None] + pairs[k], axis=0) + singles[k + 1]
    return const_total + float(best.min())


def greedy_reference(candidates, db, config):
    """Independent greedy-search simulation using only the public scoring
    and weight-learning API; the engine must reproduce it exactly."""
    from dataclasses import replace

    from hlsl.grounding import ground_clauses
    from hlsl.learning import WeightedModel, learn_weights
    from hlsl.scoring import log_pll

    observed = db.value_vector()
    chosen, weights, remaining = [], [], list(range(len(candidates)))
    current = 0.0
    inner = replace(config, max_iters=config.gls_inner_iters)
    for _ in range(config.gls_outer_iters):
        best = None
        for cand in remaining:
            ids = chosen + [cand]
            clauses = [candidates[i] for i in ids]
            grounding = ground_clauses(clauses, db)
            start = WeightedModel(clauses, np.asarray(weights + [config.init_weight]))
            fitted = learn_weights(start, grounding, observed, "pll", inner)
            score = log_pll(fitted, grounding, observed, p=config.p).total
            if best is None or score > best[0]:
                best = (score, cand, fitted.weights)
        if best is None or best[0] - current < config.tolerance * max(1.0, abs(current)):
            break
        current = best[0]
        chosen.append(best[1])
        weights = [float(v) for v in best[2]]
        remaining.remove(best[1])
    return chosen, np.asarray(weights), current


def brute_force_simple_paths(db, start, goal, max_depth, include_inverses=True, traverse_target_edges=True):
    """Independent path enumerator: recursive walk over the raw atom list."""
    edges = []
    for atom in db.atoms:
        if atom.value < 0.5:
            continue
        if not traverse_target_edges and atom.predicate.is_target:
            continue
        edges.append((atom.predicate.name, False, atom.arg1, atom.arg2))
        if include_inverses:
            edges.append((atom.predicate.name, True, atom.arg2, atom.arg1))
    found = set()

    def walk(node, path, visited):
        if len(path) >= max_depth:
            return
        for pred, inv, src, dst in edges:
            if src != node or dst in visited:
                continue
            step = (pred, inv, src, dst)
            if dst == goal:
                found.add(path + (step,))
            else:
                walk(dst, path + (step,), visited | {dst})

    walk(start, (), frozenset({start}))
    return found


def drop_target_self_step(paths, atom):
    """Remove the one-step path that is the target atom itself."""
    return {p for p in paths if p != ((atom.predicate.name, False, atom.arg1, atom.arg2),)}
