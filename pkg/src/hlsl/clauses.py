"""Path-constrained clause generation.

Candidate first-order Horn clauses are mined from the data: for every target
atom t(a, b) we enumerate the simple paths of bounded length that connect a
to b along rounded-1 atoms, variablize each path into a chain clause whose
head is the target literal, and emit the clause together with its
head-negated twin. Candidates are deduplicated, filtered by how many target
atoms they cover, and capped at a fixed pool size; a body-less negative
prior clause per target predicate is appended last.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .data import AtomDatabase, GroundAtom, PredicateSymbol
from .errors import MalformedLine, NoCandidates, UnknownPredicate
from .parallel import parallel_map

# One step of a ground relational path: predicate name, whether the edge was
# walked against its direction, source constant, destination constant.
PathStep = tuple[str, bool, int, int]
RelationalPath = tuple[PathStep, ...]


@dataclass(frozen=True)
class Literal:
    """A variablized atom. Variable ids are 1-based chain positions.

    An inverted literal was produced by walking an edge backwards; it is
    materialized with the original predicate and swapped argument order, so
    `inverted` is provenance metadata only.
    """

    predicate: str
    var1: int
    var2: int
    negated: bool = False
    inverted: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class PathClause:
    """A chain-shaped Horn clause: body literals imply a (possibly negated)
    target head over the chain's endpoints. Negative priors have an empty
    body. `coverage` counts the distinct target training atoms the clause
    connects and does not participate in clause identity.
    """

    body: tuple[Literal, ...]
    head: Literal
    coverage: int = field(default=0, compare=False)

    @property
    def head_negated(self) -> bool:
        return self.head.negated

    @property
    def is_prior(self) -> bool:
        return not self.body

    @property
    def id(self) -> str:
        return format_clause(self)

    def __str__(self) -> str:  # pragma: no cover - convenience
        return format_clause(self)


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for candidate generation; defaults follow the shipped protocol."""

    max_depth: int = 4
    min_coverage: int = 10
    top_k: int = 50
    threshold: float = 0.5
    include_inverses: bool = True
    add_negative_priors: bool = True
    # Paths may walk through target-predicate edges by default; disable to
    # keep training labels out of clause bodies entirely.
    traverse_target_edges: bool = True

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_coverage < 1:
            raise ValueError("min_coverage must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


# -- path enumeration ------------------------------------------------------


def bfs_paths(
    db: AtomDatabase,
    target_atom: GroundAtom,
    max_depth: int,
    include_inverses: bool = True,
    traverse_target_edges: bool = True,
) -> set[RelationalPath]:
    """Enumerate ground paths from target_atom.arg1 to target_atom.arg2.

    Paths follow adjacency edges (atoms that round to 1), never revisit a
    constant, and have 1..max_depth steps. Backward edges are taken when
    `include_inverses`. The single-step path consisting of the target atom
    itself is excluded.
    """
    if not target_atom.predicate.is_target:
        raise ValueError("bfs_paths roots at a target atom")
    start, goal = target_atom.arg1, target_atom.arg2
    found: set[RelationalPath] = set()
    if start == goal:
        return found  # simple paths cannot return to the root

    def expand(node: int) -> list[PathStep]:
        steps: list[PathStep] = []
        for pred, nbr, _ in db.outgoing.get(node, ()):  # forward edges
            steps.append((pred, False, node, nbr))
        if include_inverses:
            for pred, nbr, _ in db.incoming.get(node, ()):  # backward edges
                steps.append((pred, True, node, nbr))
        if not traverse_target_edges:
            steps = [s for s in steps if not db.predicates[s[0]].is_target]
        return steps

    # Depth-first enumeration of simple paths; visits the same path set as a
    # breadth-first tree expansion but with O(depth) state. Only the forward
    # single step is the target atom itself; a backward single step walks the
    # distinct atom t(goal, start).
    stack: list[tuple[int, tuple[PathStep, ...], frozenset[int]]] = [
        (start, (), frozenset((start,)))
    ]
    self_step = (target_atom.predicate.name, False, start, goal)
    while stack:
        node, path, visited = stack.pop()
        for step in expand(node):
            nbr = step[3]
            if nbr in visited:
                continue
            new_path = path + (step,)
            if nbr == goal:
                if new_path != (self_step,):
                    found.add(new_path)
                continue  # extending past the goal would revisit it
            if len(new_path) < max_depth:
                stack.append((nbr, new_path, visited | {nbr}))
    return found


def variablize(path: RelationalPath, target: GroundAtom, negate_head: bool = False) -> PathClause:
    """Turn a ground path into a first-order chain clause.

    Constants are replaced position-wise by variables 1..s+1; an inverted
    step emits the original predicate with its variables swapped. The head
    is the target predicate over the chain endpoints.
    """
    if not path:
        raise ValueError("cannot variablize an empty path")
    body = []
    for pos, (pred, inverted, _src, _dst) in enumerate(path, start=1):
        if inverted:
            body.append(Literal(pred, pos + 1, pos, inverted=True))
        else:
            body.append(Literal(pred, pos, pos + 1))
    head = Literal(target.predicate.name, 1, len(path) + 1, negated=negate_head)
    return PathClause(tuple(body), head)


def negative_prior(pred: PredicateSymbol | str) -> PathClause:
    """Body-less clause penalizing high values of a target predicate."""
    name = pred if isinstance(pred, str) else pred.name
    return PathClause((), Literal(name, 1, 2, negated=True))


def generate_candidates(
    db: AtomDatabase, config: GenerationConfig, threads: int = 1
) -> list[PathClause]:
    """Mine, deduplicate, filter and rank candidate clauses.

    Paths are enumerated from every target training atom, each unique clause
    and its head-negated twin share the coverage of their body, clauses with
    coverage below `min_coverage` are dropped, survivors are ordered by
    coverage (descending, ties by clause text with the positive twin first)
    and truncated to `top_k`, and negative priors are appended.
    """
    target_atoms = [db.atoms[i] for i in db.targets]

    def paths_for(atom: GroundAtom) -> set[RelationalPath]:
        return bfs_paths(
            db,
            atom,
            config.max_depth,
            include_inverses=config.include_inverses,
            traverse_target_edges=config.traverse_target_edges,
        )

    all_paths = parallel_map(paths_for, target_atoms, threads)

    # Deduplicate by (body, head predicate); coverage counts the distinct
    # target atoms connected by any path with that body.
    unique: dict[tuple[tuple[Literal, ...], str], PathClause] = {}
    covered: dict[tuple[tuple[Literal, ...], str], set[int]] = {}
    for atom, paths in zip(target_atoms, all_paths):
        for path in paths:
            clause = variablize(path, atom)
            key = (clause.body, atom.predicate.name)
            unique.setdefault(key, clause)
            covered.setdefault(key, set()).add(atom.index)

    candidates: list[PathClause] = []
    for key, clause in unique.items():
        cov = len(covered[key])
        if cov < config.min_coverage:
            continue
        positive = PathClause(clause.body, clause.head, coverage=cov)
        twin = PathClause(clause.body, Literal(
            clause.head.predicate, clause.head.var1, clause.head.var2, negated=True
        ), coverage=cov)
        candidates.extend((positive, twin))

    # Coverage descending; ties by the positive-form clause text, with the
    # positive twin ahead of its negation so files read rule-then-negation.
    def sort_key(c: PathClause):
        positive_form = PathClause(c.body, Literal(c.head.predicate, c.head.var1, c.head.var2))
        return (-c.coverage, format_clause(positive_form), c.head_negated)

    candidates.sort(key=sort_key)
    candidates = candidates[: config.top_k]

    if config.add_negative_priors:
        for pred in db.target_predicates():
            n_atoms = sum(1 for i in db.targets if db.atoms[i].predicate.name == pred.name)
            prior = PathClause((), Literal(pred.name, 1, 2, negated=True), coverage=n_atoms)
            candidates.append(prior)
    elif not candidates:
        raise NoCandidates("no clause covers enough target atoms and priors are disabled")
    return candidates


# -- clause text grammar ---------------------------------------------------
#
#   BODY1(V1,V2) & BODY2(V2,V3) -> [!]HEAD(V1,V3)
#   -> !HEAD(A,B)                                  (negative prior)

_LITERAL_RE = re.compile(r"^\s*(!?)\s*([A-Za-z_]\w*)\s*\(\s*(\w+)\s*,\s*(\w+)\s*\)\s*$")


def _var_name(clause: PathClause, v: int) -> str:
    if clause.is_prior:
        return "A" if v == 1 else "B"
    return f"V{v}"


def format_clause(clause: PathClause) -> str:
    """Render a clause in the interchange grammar; this string is also the
    clause's canonical identity."""
    parts = []
    for lit in clause.body:
        parts.append(f"{lit.predicate}(V{lit.var1},V{lit.var2})")
    body_text = " & ".join(parts)
    head = clause.head
    bang = "!" if head.negated else ""
    head_text = f"{bang}{head.predicate}({_var_name(clause, head.var1)},{_var_name(clause, head.var2)})"
    return f"{body_text} -> {head_text}" if body_text else f"-> {head_text}"


def parse_clause(text: str, schema: dict[str, PredicateSymbol] | AtomDatabase) -> PathClause:
    """Parse the clause grammar back into a PathClause.

    Arbitrary variable names are accepted; the chain orientation of each body
    literal is inferred by walking variables from the head's first argument,
    and a literal written against the chain direction is marked inverted.
    """
    predicates = schema.predicates if isinstance(schema, AtomDatabase) else schema
    if "->" not in text:
        raise MalformedLine(0, f"missing '->' in clause {text!r}")
    body_text, head_text = text.split("->", 1)
    m = _LITERAL_RE.match(head_text)
    if not m:
        raise MalformedLine(0, f"bad head literal in {text!r}")
    bang, head_pred, hv1, hv2 = m.groups()
    if head_pred not in predicates:
        raise UnknownPredicate(head_pred)
    if not predicates[head_pred].is_target:
        raise MalformedLine(0, f"head predicate {head_pred!r} is not a target")

    raw_body = []
    if body_text.strip():
        for part in body_text.split("&"):
            lm = _LITERAL_RE.match(part)
            if not lm:
                raise MalformedLine(0, f"bad body literal {part.strip()!r}")
            lbang, pred, v1, v2 = lm.groups()
            if lbang:
                raise MalformedLine(0, "body literals cannot be negated")
            if pred not in predicates:
                raise UnknownPredicate(pred)
            raw_body.append((pred, v1, v2))

    if not raw_body:
        return PathClause((), Literal(head_pred, 1, 2, negated=bool(bang)))

    # Walk the chain from the head's first variable, assigning positions.
    var_pos: dict[str, int] = {hv1: 1}
    body: list[Literal] = []
    current = hv1
    for pos, (pred, v1, v2) in enumerate(raw_body, start=1):
        if v1 == current:
            nxt, inverted = v2, False
        elif v2 == current:
            nxt, inverted = v1, True
        else:
            raise MalformedLine(0, f"literal {pred}({v1},{v2}) breaks the variable chain")
        if nxt in var_pos:
            raise MalformedLine(0, f"variable {nxt!r} reused outside the chain")
        var_pos[nxt] = pos + 1
        if inverted:
            body.append(Literal(pred, pos + 1, pos, inverted=True))
        else:
            body.append(Literal(pred, pos, pos + 1))
        current = nxt
    if current != hv2:
        raise MalformedLine(0, f"head variables ({hv1},{hv2}) do not span the chain")
    head = Literal(head_pred, 1, len(raw_body) + 1, negated=bool(bang))
    return PathClause(tuple(body), head)


def write_clause_file(clauses: Sequence[PathClause], stream: IO[str]) -> None:
    """Emit one `clause<TAB>coverage` line per candidate."""
    for c in clauses:
        stream.write(f"{format_clause(c)}\t{c.coverage}\n")


def read_clause_file(
    stream: IO[str] | Iterable[str], schema: dict[str, PredicateSymbol] | AtomDatabase
) -> list[PathClause]:
    """Read clauses written by `write_clause_file`; the coverage column is
    optional and restored when present."""
    clauses = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        try:
            clause = parse_clause(fields[0], schema)
        except MalformedLine as exc:
            raise MalformedLine(line_no, str(exc)) from None
        if len(fields) > 1 and fields[1].strip():
            clause = PathClause(clause.body, clause.head, coverage=int(fields[1]))
        clauses.append(clause)
    return clauses
