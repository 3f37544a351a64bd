"""Grounding: lazy instantiation, hinge penalties, incidence index."""
import itertools

import numpy as np
import pytest

from conftest import random_chain_db

from hlsl.clauses import GenerationConfig, generate_candidates, negative_prior, parse_clause
from hlsl.data import AtomDatabase, PredicateSymbol, build_adjacency, round_value
from hlsl.errors import MissingAssignment
from hlsl.grounding import (
    GroundClause,
    build_incidence,
    ground_clause,
    ground_clauses,
    hinge_penalty,
)


def herbrand_groundings(clause, db, threshold=0.5):
    """Oracle: try every constant tuple for the clause's chain variables."""
    n_vars = len(clause.body) + 1
    out = []
    for combo in itertools.product(range(len(db.constants)), repeat=n_vars):
        atoms = []
        ok = True
        for lit in clause.body:
            idx = db.find_atom(lit.predicate, combo[lit.var1 - 1], combo[lit.var2 - 1])
            if idx is None or round_value(db.atoms[idx].value, threshold) != 1:
                ok = False
                break
            atoms.append(idx)
        if not ok:
            continue
        head = db.find_atom(clause.head.predicate, combo[0], combo[-1])
        if head is None or head not in set(db.targets):
            continue
        out.append(tuple(atoms) + (head,))
    return sorted(out)


def test_ground_example_clause(citation_db):
    clause = parse_clause("Cites(V1,V2) & Mentions(V2,V3) -> Mentions(V1,V3)", citation_db)
    grounds = ground_clause(clause, citation_db)
    assert len(grounds) == 1
    gc = grounds[0]
    minus = {a for a, s in gc.terms if s == -1}
    plus = {a for a, s in gc.terms if s == 1}
    assert minus == {0, 1} and plus == {2}


def test_ground_negative_prior(citation_db):
    grounds = ground_clause(negative_prior("Mentions"), citation_db)
    assert [gc.terms for gc in grounds] == [((1, -1),), ((2, -1),)]


def test_ground_absent_predicate_body(citation_db):
    db = AtomDatabase(
        [PredicateSymbol("Cites"), PredicateSymbol("Absent"), PredicateSymbol("Mentions", is_target=True)]
    )
    db.add_atom("Cites", "a", "b")
    db.add_atom("Mentions", "a", "b")
    build_adjacency(db)
    clause = parse_clause("Absent(V1,V2) -> Mentions(V1,V2)", db)
    assert ground_clause(clause, db) == []


@pytest.mark.parametrize("seed", [0, 3, 9])
def test_lazy_grounding_matches_herbrand(seed):
    db = random_chain_db(seed, n_a=6, n_b=5, n_c=5)
    cands = generate_candidates(db, GenerationConfig(max_depth=2, min_coverage=1, top_k=30))
    for clause in cands:
        if clause.is_prior:
            continue
        got = sorted(tuple(a for a, _ in gc.terms) for gc in ground_clause(clause, db))
        assert got == herbrand_groundings(clause, db)


def test_hinge_penalty_examples():
    # body atoms x1, x2 in the negated set at 1, head y at 0.3
    gc = GroundClause(0, ((0, -1), (1, -1), (2, 1)))
    assign = {0: 1.0, 1: 1.0, 2: 0.3}
    assert hinge_penalty(gc, assign, 1) == pytest.approx(0.7)
    assert hinge_penalty(gc, assign, 2) == pytest.approx(0.49)
    # falsified body satisfies the implication for any head value
    for y in np.linspace(0, 1, 7):
        assert hinge_penalty(gc, {0: 0.0, 1: 1.0, 2: float(y)}) == 0.0
    with pytest.raises(MissingAssignment):
        hinge_penalty(gc, {0: 1.0, 1: 1.0})


def test_hinge_penalty_midpoint_convex():
    rng = np.random.default_rng(11)
    gc = GroundClause(0, ((0, -1), (1, -1), (2, 1)))
    for p in (1, 2):
        for _ in range(200):
            x = rng.uniform(0, 1, 3)
            y = rng.uniform(0, 1, 3)
            mid = {i: (x[i] + y[i]) / 2 for i in range(3)}
            fx = hinge_penalty(gc, dict(enumerate(x)), p)
            fy = hinge_penalty(gc, dict(enumerate(y)), p)
            assert hinge_penalty(gc, mid, p) <= (fx + fy) / 2 + 1e-12


def test_hinge_penalty_bounds():
    rng = np.random.default_rng(12)
    gc = GroundClause(0, ((0, 1), (1, -1), (2, 1)))
    for _ in range(100):
        assign = dict(enumerate(rng.uniform(0, 1, 3)))
        inner = 1 - assign[0] - (1 - assign[1]) - assign[2]
        for p in (1, 2):
            value = hinge_penalty(gc, assign, p)
            assert value >= 0.0
            assert value <= max(1.0, inner) ** p + 1e-12


def test_incidence_example(citation_db):
    clause = parse_clause("Cites(V1,V2) & Mentions(V2,V3) -> Mentions(V1,V3)", citation_db)
    grounding = ground_clauses([clause, negative_prior("Mentions")], citation_db)
    incidence = grounding.incidence
    # rule grounding touches both Mentions atoms; each prior grounding one
    assert len(incidence[2]) == 2  # head of the rule + its prior
    assert len(incidence[1]) == 2  # body of the rule + its prior


def test_incidence_empty_and_prior_only(citation_db):
    assert build_incidence([], citation_db) == {1: [], 2: []}
    grounds = ground_clause(negative_prior("Mentions"), citation_db)
    incidence = build_incidence(grounds, citation_db)
    assert [len(v) for v in incidence.values()] == [1, 1]


def test_incidence_is_exact(citation_db):
    db = random_chain_db(2)
    cands = generate_candidates(db, GenerationConfig(max_depth=2, min_coverage=1))
    grounding = ground_clauses(cands, db)
    incidence = grounding.incidence
    targets = set(db.targets)
    for gid, gc in enumerate(grounding.grounds):
        for atom, _sign in gc.terms:
            assert (atom in targets) == (gid in incidence.get(atom, []))


def test_lazy_grounding_only_frees_targets():
    # under rounded body evidence every returned potential's non-evidence
    # terms are target atoms
    db = random_chain_db(8)
    cands = generate_candidates(db, GenerationConfig(max_depth=2, min_coverage=1))
    grounding = ground_clauses(cands, db)
    targets = set(db.targets)
    for gc in grounding.grounds:
        for atom, _ in gc.terms[:-1]:
            assert atom in targets or round_value(db.atoms[atom].value) == 1


def test_restrict_matches_fresh_grounding():
    db = random_chain_db(1)
    cands = generate_candidates(db, GenerationConfig(max_depth=2, min_coverage=1))
    pool = ground_clauses(cands, db)
    ids = [2, 0, len(cands) - 1]
    sub = pool.restrict(ids)
    fresh = ground_clauses([cands[i] for i in ids], db)
    assert np.array_equal(sub.g_clause, fresh.g_clause)
    assert np.array_equal(sub.term_atom, fresh.term_atom)
    assert np.array_equal(sub.term_coef, fresh.term_coef)
    assert np.allclose(sub.g_const0, fresh.g_const0)
    assert [g.terms for g in sub.grounds] == [g.terms for g in fresh.grounds]


def test_grounding_threads_deterministic():
    db = random_chain_db(1)
    cands = generate_candidates(db, GenerationConfig(max_depth=2, min_coverage=1))
    a = ground_clauses(cands, db, threads=1)
    b = ground_clauses(cands, db, threads=4)
    assert [g.terms for g in a.grounds] == [g.terms for g in b.grounds]


def test_free_atoms_bypass_body_gate():
    # a free target atom with stored value 0 still supports body matches
    db = AtomDatabase([PredicateSymbol("P"), PredicateSymbol("T", is_target=True)])
    db.add_atom("P", "a", "b")
    db.add_atom("T", "b", "c", 0.0)
    db.add_atom("T", "a", "c", 0.0)
    build_adjacency(db)
    clause = parse_clause("P(V1,V2) & T(V2,V3) -> T(V1,V3)", db)
    assert ground_clause(clause, db) == []
    free = {1, 2}
    grounds = ground_clause(clause, db, free_atoms=free)
    assert len(grounds) == 1


def test_strict_mode_drops_observed_target_bodies(citation_db):
    clause = parse_clause("Cites(V1,V2) & Mentions(V2,V3) -> Mentions(V1,V3)", citation_db)
    assert len(ground_clause(clause, citation_db)) == 1
    assert ground_clause(clause, citation_db, strict=True) == []
