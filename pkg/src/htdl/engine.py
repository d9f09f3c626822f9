"""Forest-shaped derivation engine.

The engine saturates a ground assertion set under a clause set using five
rules: clash detection, root introduction for annotated equalities, merging,
clause application, and existential expansion.  Rule selection is
deterministic (fixed priority, creation-order tie-breaking), branching is
explored depth-first, and chronological backtracking can be upgraded to
dependency-directed backjumping behind a flag.
"""

import itertools
import json
import os
import random
import time
from dataclasses import dataclass, field

from .model import (
    Top, Bottom, Atomic, Not, AtLeast, Role, TOP, concept_key, KBError,
    ConceptAssertion, RoleAssertion, SameIndividuals, DifferentIndividuals,
)
from .clauses import (
    HTClause, ConceptAtom, RoleAtom, EqAtom, Annotation, Var,
    NOMINAL_GUARD_PREFIX,
)
from . import blocking as blocking_mod
from .blocking import UNBLOCKED, DIRECT, INDIRECT


class ResourceLimit(Exception):
    """Raised when the individual cap or the time budget is exhausted."""


class InvalidABox(KBError):
    """The structural invariants of the assertion forest were violated."""


# ---------------------------------------------------------------------------
# Individuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Individual:
    """A named individual, optionally extended by root-introduction steps
    (role, filler, index) and then by integer child steps.

    An individual with child steps is *blockable*; all others are *root*
    individuals, and a root without introduction steps is *named*.
    """
    base: str
    root_steps: tuple = ()
    path: tuple = ()

    @property
    def is_blockable(self):
        return bool(self.path)

    @property
    def is_root(self):
        return not self.path

    @property
    def is_named(self):
        return not self.path and not self.root_steps

    @property
    def parent(self):
        """The predecessor of a blockable individual, else None."""
        if not self.path:
            return None
        return Individual(self.base, self.root_steps, self.path[:-1])

    def child(self, i: int) -> "Individual":
        return Individual(self.base, self.root_steps, self.path + (i,))

    def extend_root(self, role: Role, filler, i: int) -> "Individual":
        if self.path:
            raise KBError("only root individuals can be extended")
        return Individual(self.base, self.root_steps + ((role, filler, i),))

    def is_descendant_of(self, other: "Individual") -> bool:
        """Strictly below ``other`` in the child-step forest."""
        return (self.base == other.base and
                self.root_steps == other.root_steps and
                len(self.path) > len(other.path) and
                self.path[:len(other.path)] == other.path)

    def __str__(self):
        parts = [self.base]
        for (role, filler, i) in self.root_steps:
            parts.append(f"<{role},{filler},{i}>")
        for i in self.path:
            parts.append(str(i))
        return ".".join(parts)


def named(name: str) -> Individual:
    return Individual(name)


# ---------------------------------------------------------------------------
# Facts
# ---------------------------------------------------------------------------
#
# Facts are plain tuples:
#   ("c", concept, ind)          concept assertion (literal / at-least / guard)
#   ("r", role_name, s, t)       atomic role assertion
#   ("eq", s, t, ann_or_None)    equality, symmetric, stored in stamp order
#   ("ne", s, t)                 inequality, symmetric, stored in stamp order


def render_fact(fact) -> str:
    kind = fact[0]
    if kind == "c":
        return f"{fact[1]}({fact[2]})"
    if kind == "r":
        return f"{fact[1]}({fact[2]},{fact[3]})"
    if kind == "eq":
        base = f"{fact[1]} == {fact[2]}"
        return base + (f" {fact[3]}" if fact[3] is not None else "")
    return f"{fact[1]} != {fact[2]}"


def fact_individuals(fact):
    kind = fact[0]
    if kind == "c":
        return (fact[2],)
    if kind == "r":
        return (fact[2], fact[3])
    if kind == "eq":
        if fact[3] is not None:
            return (fact[1], fact[2], fact[3].at)
        return (fact[1], fact[2])
    return (fact[1], fact[2])


class ABox:
    """Mutable assertion set with the indexes the rules need."""

    def __init__(self):
        self.facts = set()
        self.deps = {}
        self.concepts_of = {}
        self.inds_with = {}
        self.r_out = {}
        self.r_in = {}
        self.mentions = {}
        self.eq_facts = set()
        self.atleast_facts = set()
        self.atomic_lbl = {}   # ind -> frozenset of atomic concepts
        self.atleast_lbl = {}  # ind -> frozenset of at-least concepts
        self.edge_lbl = {}     # (s, t) -> frozenset of role names
        self.log = []          # append-only history of added facts
        self.hyp_pos = {}      # clause index -> log prefix already matched
        self.stamps = {}
        self.stamp_counter = 0
        self.child_counter = {}
        self.renamings = {}
        self.clash_deps = None
        self.clash_candidates = set()
        self.applied = set()
        self.control_deps = frozenset()
        self.version = 0
        self.mention_version = 0
        self._sorted_cache = None
        self._blocking_cache = None
        self._last_indirect = frozenset()

    # -- bookkeeping -------------------------------------------------------

    def copy(self) -> "ABox":
        other = ABox.__new__(ABox)
        other.facts = set(self.facts)
        other.deps = dict(self.deps)
        other.concepts_of = {k: set(v) for k, v in self.concepts_of.items()}
        other.inds_with = {k: set(v) for k, v in self.inds_with.items()}
        other.r_out = {k: set(v) for k, v in self.r_out.items()}
        other.r_in = {k: set(v) for k, v in self.r_in.items()}
        other.mentions = {k: set(v) for k, v in self.mentions.items()}
        other.eq_facts = set(self.eq_facts)
        other.atleast_facts = set(self.atleast_facts)
        other.atomic_lbl = dict(self.atomic_lbl)
        other.atleast_lbl = dict(self.atleast_lbl)
        other.edge_lbl = dict(self.edge_lbl)
        other.log = list(self.log)
        other.hyp_pos = dict(self.hyp_pos)
        other.stamps = dict(self.stamps)
        other.stamp_counter = self.stamp_counter
        other.child_counter = dict(self.child_counter)
        other.renamings = dict(self.renamings)
        other.clash_deps = self.clash_deps
        other.clash_candidates = set(self.clash_candidates)
        other.applied = set(self.applied)
        other.control_deps = self.control_deps
        other.version = self.version
        other.mention_version = self.mention_version
        other._sorted_cache = self._sorted_cache
        other._blocking_cache = self._blocking_cache
        other._last_indirect = self._last_indirect
        return other

    def stamp(self, ind: Individual) -> int:
        return self.stamps[ind]

    def ensure_stamp(self, ind: Individual):
        if ind not in self.stamps:
            self.stamp_counter += 1
            self.stamps[ind] = self.stamp_counter

    def alive(self):
        return self.mentions.keys()

    def order_pair(self, a, b):
        self.ensure_stamp(a)
        self.ensure_stamp(b)
        if self.stamps[a] <= self.stamps[b]:
            return a, b
        return b, a

    def make_eq(self, a, b, ann):
        a, b = self.order_pair(a, b)
        return ("eq", a, b, ann)

    def make_ne(self, a, b):
        a, b = self.order_pair(a, b)
        return ("ne", a, b)

    def roles_between(self, s, t):
        return self.edge_lbl.get((s, t), frozenset())

    # -- queries -----------------------------------------------------------

    def holds(self, fact) -> bool:
        if fact[0] == "c" and isinstance(fact[1], Top):
            return True
        if fact[0] == "eq" and fact[1] == fact[2] and fact[3] is None:
            return True
        return fact in self.facts

    def has_concept(self, concept, ind) -> bool:
        if isinstance(concept, Top):
            return True
        return concept in self.concepts_of.get(ind, ())

    # -- mutation ----------------------------------------------------------

    def add(self, fact, dep=frozenset()):
        if fact in self.facts:
            return False
        kind = fact[0]
        self.facts.add(fact)
        self.deps[fact] = dep | self.control_deps
        for ind in fact_individuals(fact):
            self.ensure_stamp(ind)
            m = self.mentions.get(ind)
            if m is None:
                m = self.mentions[ind] = set()
                self.mention_version += 1
            m.add(fact)
        if kind == "c":
            _, c, ind = fact
            self.concepts_of.setdefault(ind, set()).add(c)
            self.inds_with.setdefault(c, set()).add(ind)
            if isinstance(c, Atomic):
                self.atomic_lbl[ind] = \
                    self.atomic_lbl.get(ind, frozenset()) | {c}
            elif isinstance(c, AtLeast):
                self.atleast_lbl[ind] = \
                    self.atleast_lbl.get(ind, frozenset()) | {c}
                self.atleast_facts.add(fact)
            if isinstance(c, Bottom):
                self.clash_candidates.add(ind)
            elif isinstance(c, Not):
                if self.has_concept(c.concept, ind):
                    self.clash_candidates.add(ind)
            elif isinstance(c, Atomic):
                if Not(c) in self.concepts_of.get(ind, ()):
                    self.clash_candidates.add(ind)
        elif kind == "r":
            _, r, s, t = fact
            self.r_out.setdefault((r, s), set()).add(t)
            self.r_in.setdefault((r, t), set()).add(s)
            self.edge_lbl[(s, t)] = \
                self.edge_lbl.get((s, t), frozenset()) | {r}
        elif kind == "eq":
            self.eq_facts.add(fact)
        elif kind == "ne":
            if fact[1] == fact[2]:
                self.clash_candidates.add(fact[1])
        self.log.append(fact)
        self.version += 1
        return True

    def remove(self, fact):
        if fact not in self.facts:
            return
        self.facts.discard(fact)
        self.deps.pop(fact, None)
        for ind in fact_individuals(fact):
            s = self.mentions.get(ind)
            if s is not None:
                s.discard(fact)
                if not s:
                    del self.mentions[ind]
                    self.mention_version += 1
        if fact[0] == "c":
            _, c, ind = fact
            self.concepts_of.get(ind, set()).discard(c)
            self.inds_with.get(c, set()).discard(ind)
            if isinstance(c, Atomic):
                self.atomic_lbl[ind] = self.atomic_lbl[ind] - {c}
            elif isinstance(c, AtLeast):
                self.atleast_lbl[ind] = self.atleast_lbl[ind] - {c}
                self.atleast_facts.discard(fact)
        elif fact[0] == "r":
            _, r, s, t = fact
            self.r_out.get((r, s), set()).discard(t)
            self.r_in.get((r, t), set()).discard(s)
            left = self.edge_lbl[(s, t)] - {r}
            if left:
                self.edge_lbl[(s, t)] = left
            else:
                del self.edge_lbl[(s, t)]
        elif fact[0] == "eq":
            self.eq_facts.discard(fact)
        self.version += 1

    def _drop_dead_memo(self):
        self.applied = {entry for entry in self.applied
                        if all(i in self.mentions for i in entry[1])}
        self.clash_candidates = {i for i in self.clash_candidates
                                 if i in self.mentions}

    def prune(self, s: Individual):
        """Remove every assertion that mentions a strict descendant of s."""
        dead = [ind for ind in self.mentions
                if ind.is_descendant_of(s)]
        for ind in dead:
            for fact in list(self.mentions.get(ind, ())):
                self.remove(fact)
        if dead:
            self._drop_dead_memo()

    def merge(self, s: Individual, t: Individual, dep=frozenset()):
        """Prune below ``s`` then rewrite every occurrence of ``s`` to ``t``."""
        self.ensure_stamp(t)
        self.prune(s)
        moved = list(self.mentions.get(s, ()))
        for fact in moved:
            old_dep = self.deps.get(fact, frozenset())
            self.remove(fact)
            self.add(_rewrite_fact(self, fact, s, t), old_dep | dep)
        if s.is_root and t.is_root:
            self.renamings[s] = t
        self._drop_dead_memo()

    def canonical(self, ind: Individual) -> Individual:
        seen = set()
        while ind in self.renamings:
            if ind in seen:
                raise InvalidABox("cyclic renaming")
            seen.add(ind)
            ind = self.renamings[ind]
        return ind

    def sorted_individuals(self):
        """Live individuals in creation order (cached)."""
        cache = self._sorted_cache
        if cache is not None and cache[0] == self.mention_version:
            return cache[1]
        inds = sorted(self.mentions, key=self.stamps.__getitem__)
        self._sorted_cache = (self.mention_version, inds)
        return inds

    def requeue(self, ind):
        """Re-enter all assertions about ``ind`` into the addition log, so
        clause matching revisits them (used when an individual stops being
        indirectly blocked)."""
        self.log.extend(self.mentions.get(ind, ()))

    def set_clash(self, dep):
        if self.clash_deps is None:
            self.clash_deps = dep | self.control_deps


def _rewrite_fact(abox, fact, s, t):
    def sub(i):
        return t if i == s else i
    kind = fact[0]
    if kind == "c":
        return ("c", fact[1], sub(fact[2]))
    if kind == "r":
        return ("r", fact[1], sub(fact[2]), sub(fact[3]))
    if kind == "eq":
        ann = fact[3]
        if ann is not None and ann.at == s:
            ann = Annotation(t, ann.n, ann.role, ann.filler)
        return abox.make_eq(sub(fact[1]), sub(fact[2]), ann)
    return abox.make_ne(sub(fact[1]), sub(fact[2]))


# ---------------------------------------------------------------------------
# Configuration and results
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    blocking: str = "anywhere-pairwise"
    unsafe_blocking: bool = False
    individual_cap: int = 200000
    timeout: float = 300.0
    backjumping: bool = False
    disjunct_order: str = "declared"   # or "reversed"
    validate: bool = False
    seed: int = None
    blocker_cache: object = None       # set of pairwise label quadruples
    blocking_audit_rate: int = 0       # audit every Nth rule application

    @staticmethod
    def from_env(**kwargs) -> "RunConfig":
        cfg = RunConfig(**kwargs)
        if cfg.seed is None:
            env = os.environ.get("HTDL_SEED")
            if env:
                cfg.seed = int(env)
        return cfg


SAT = "SAT"
UNSAT = "UNSAT"
INDETERMINATE = "INDETERMINATE"


@dataclass
class DeriveResult:
    verdict: str
    abox: object = None        # final clash-free ABox when SAT
    stats: dict = field(default_factory=dict)
    trace: list = None


# ---------------------------------------------------------------------------
# Validator
# ---------------------------------------------------------------------------

def validate_abox(abox: ABox):
    """Structural invariants of the assertion forest; returns violations."""
    problems = []
    if not abox.facts:
        problems.append("assertion set is empty")

    def local(s, t):
        return s == t or t.parent == s or s.parent == t or \
            s.is_root or t.is_root

    for fact in abox.facts:
        kind = fact[0]
        if kind == "r":
            _, r, s, t = fact
            if not local(s, t):
                problems.append(f"non-local role assertion {render_fact(fact)}")
        elif kind == "eq":
            _, s, t, ann = fact
            ok = (s == t or s.is_root or t.is_root or
                  s.parent == t or t.parent == s or
                  (s.parent is not None and s.parent == t.parent) or
                  (s.parent is not None and s.parent.parent == t) or
                  (t.parent is not None and t.parent.parent == s))
            if not ok:
                problems.append(f"non-local equality {render_fact(fact)}")
            if ann is not None:
                u = ann.at
                for end in (s, t):
                    present = (
                        ("r", ann.role.name, u, end) in abox.facts
                        if not ann.role.inverse else
                        ("r", ann.role.name, end, u) in abox.facts)
                    if not present:
                        problems.append(
                            f"annotated equality {render_fact(fact)} lacks "
                            f"its witness edge to {end}")
        elif kind == "c":
            _, c, ind = fact
            if isinstance(c, Atomic) and \
                    c.name.startswith(NOMINAL_GUARD_PREFIX):
                if not ind.is_root:
                    problems.append(
                        f"nominal guard on non-root individual {ind}")
            elif isinstance(c, AtLeast):
                from .model import is_literal
                if not is_literal(c.filler):
                    problems.append(f"non-literal at-least {render_fact(fact)}")
            else:
                from .model import is_literal
                if not is_literal(c):
                    problems.append(
                        f"non-literal concept assertion {render_fact(fact)}")

    for ind in abox.mentions:
        if ind.is_blockable:
            p = ind.parent
            connected = any(
                f[0] == "r" and ((f[2] == p and f[3] == ind) or
                                 (f[2] == ind and f[3] == p))
                for f in abox.mentions.get(ind, ()))
            if not connected:
                problems.append(f"blockable individual {ind} is not "
                                "connected to its parent")

    for src in abox.renamings:
        if src in abox.mentions:
            problems.append(f"renamed individual {src} still occurs")
        try:
            abox.canonical(src)
        except InvalidABox:
            problems.append(f"cyclic renaming through {src}")
    return problems


# ---------------------------------------------------------------------------
# Derivation
# ---------------------------------------------------------------------------

def build_initial_abox(assertions) -> ABox:
    abox = ABox()
    for ax in assertions:
        if isinstance(ax, ConceptAssertion):
            abox.add(("c", ax.concept, named(ax.individual)))
        elif isinstance(ax, RoleAssertion):
            if ax.role.inverse:
                abox.add(("r", ax.role.name,
                          named(ax.object), named(ax.subject)))
            else:
                abox.add(("r", ax.role.name,
                          named(ax.subject), named(ax.object)))
        elif isinstance(ax, SameIndividuals):
            abox.add(abox.make_eq(named(ax.a), named(ax.b), None))
        elif isinstance(ax, DifferentIndividuals):
            abox.add(abox.make_ne(named(ax.a), named(ax.b)))
        else:
            raise KBError(f"cannot load assertion {ax!r}")
    return abox


def _clause_var_order(clause):
    """The clause's variables in deterministic matching order (x first)."""
    variables = []
    for atom in clause.antecedent + clause.consequent:
        for v in (atom.term,) if isinstance(atom, ConceptAtom) else (
                (atom.s, atom.t) if isinstance(atom, RoleAtom) else
                (atom.s, atom.t) + ((atom.annotation.at,)
                                    if atom.annotation else ())):
            if isinstance(v, Var) and v not in variables:
                variables.append(v)
    variables.sort(key=lambda v: (0 if v.kind == "x" else 1, v.kind, v.index))
    return variables


def _seed_bindings(clause, fact):
    """Variable bindings that unify an antecedent atom with ``fact``."""
    kind = fact[0]
    for atom in clause.antecedent:
        if kind == "c" and isinstance(atom, ConceptAtom):
            if atom.concept == fact[1] and isinstance(atom.term, Var):
                yield {atom.term: fact[2]}
        elif kind == "r" and isinstance(atom, RoleAtom):
            if atom.role == fact[1]:
                binding = {}
                consistent = True
                for var, val in ((atom.s, fact[2]), (atom.t, fact[3])):
                    if not isinstance(var, Var):
                        consistent = False
                        break
                    if binding.get(var, val) != val:
                        consistent = False
                        break
                    binding[var] = val
                if consistent:
                    yield binding


class _Choice:
    __slots__ = ("node_id", "snapshot", "alts", "next", "acc", "trace_id")

    def __init__(self, node_id, snapshot, alts, trace_id):
        self.node_id = node_id
        self.snapshot = snapshot
        self.alts = alts
        self.next = 0
        self.acc = set()
        self.trace_id = trace_id


class Derivation:
    def __init__(self, clauses, assertions, config: RunConfig, trace=False):
        self.config = config
        clauses = list(clauses)
        if config.seed is not None:
            random.Random(config.seed).shuffle(clauses)
        self.clauses = clauses
        self._clause_vars = [_clause_var_order(c) for c in clauses]
        self.initial = build_initial_abox(assertions)
        self.stats = {
            "applications": {},
            "total_applications": 0,
            "branch_points": 0,
            "leaves": 0,
            "peak_individuals": len(self.initial.mentions),
            "created_roots": set(),
            "cache_hits": 0,
            "validator_checks": 0,
        }
        self.trace = [] if trace else None
        self._next_node = 0
        self._next_trace = 0

    # -- helpers -----------------------------------------------------------

    def blocking_status(self, abox: ABox):
        cache = abox._blocking_cache
        if cache is not None and cache[0] == abox.version:
            return cache[1]
        status = blocking_mod.compute_blocking(
            abox, self.config.blocking,
            cache_keys=self.config.blocker_cache, stats=self.stats)
        rate = self.config.blocking_audit_rate
        if rate and self.stats["total_applications"] % rate == 0:
            ref = blocking_mod.naive_blocking(
                abox, self.config.blocking,
                cache_keys=self.config.blocker_cache)
            if status != ref:
                raise AssertionError(
                    "indexed blocking disagrees with the reference scan")
        indirect = frozenset(i for i, v in status.items() if v[0] == INDIRECT)
        for ind in abox._last_indirect - indirect:
            if ind in abox.mentions:
                abox.requeue(ind)
        abox._last_indirect = indirect
        abox._blocking_cache = (abox.version, status)
        return status

    def _indirectly_blocked(self, abox, ind):
        return self.blocking_status(abox).get(ind, (UNBLOCKED,))[0] == INDIRECT

    def _blocked(self, abox, ind):
        return self.blocking_status(abox).get(ind, (UNBLOCKED,))[0] != UNBLOCKED

    def _count(self, rule):
        apps = self.stats["applications"]
        apps[rule] = apps.get(rule, 0) + 1
        self.stats["total_applications"] += 1

    def _record(self, abox, rule, choice, added, removed, parent_trace):
        if self.trace is None:
            return parent_trace
        self._next_trace += 1
        node = {
            "id": self._next_trace,
            "parent": parent_trace,
            "rule": rule,
            "choice": choice,
            "added": sorted(render_fact(f) for f in added),
            "removed": sorted(render_fact(f) for f in removed),
        }
        self.trace.append(node)
        return self._next_trace

    # -- rule selection ----------------------------------------------------

    def select(self, abox: ABox):
        rule = self._select_clash(abox)
        if rule is None:
            rule = self._select_ni(abox)
        if rule is None:
            rule = self._select_eq(abox)
        if rule is None:
            rule = self._select_hyp(abox)
        if rule is None:
            rule = self._select_geq(abox)
        return rule

    def _select_clash(self, abox):
        best = None
        for ind in abox.clash_candidates:
            if ind not in abox.mentions:
                continue
            witness = None
            if ("ne", ind, ind) in abox.facts:
                witness = [("ne", ind, ind)]
            elif ("c", Bottom(), ind) in abox.facts:
                witness = [("c", Bottom(), ind)]
            else:
                for c in sorted(abox.concepts_of.get(ind, ()),
                                key=concept_key):
                    if isinstance(c, Not) and \
                            abox.has_concept(c.concept, ind) and \
                            ("c", c.concept, ind) in abox.facts:
                        witness = [("c", c, ind), ("c", c.concept, ind)]
                        break
            if witness is None:
                continue
            if self._indirectly_blocked(abox, ind):
                continue
            if best is None or abox.stamp(ind) < abox.stamp(best[0]):
                best = (ind, witness)
        if best is None:
            return None
        return ("clash", best[1])

    def _eq_order(self, abox):
        eqs = list(abox.eq_facts)
        eqs.sort(key=lambda f: (abox.stamp(f[1]), abox.stamp(f[2]),
                                str(f[3] or "")))
        return eqs

    def _ni_orientation(self, abox, fact):
        """(source, target-root-template) orientation if the root-introduction
        rule applies to this annotated equality."""
        _, a, b, ann = fact
        if ann is None:
            return None
        u = ann.at
        if not u.is_root:
            return None
        if self._indirectly_blocked(abox, a) or \
                self._indirectly_blocked(abox, b):
            return None
        for (s, t) in ((a, b), (b, a)):
            if s.is_blockable and s.parent != u and t.is_blockable:
                return s
        return None

    def _select_ni(self, abox):
        for fact in self._eq_order(abox):
            s = self._ni_orientation(abox, fact)
            if s is not None:
                return ("ni", fact, s)
        return None

    def _select_eq(self, abox):
        for fact in self._eq_order(abox):
            _, a, b, ann = fact
            if a == b:
                continue
            if self._indirectly_blocked(abox, a) or \
                    self._indirectly_blocked(abox, b):
                continue
            return ("eq", fact)
        return None

    def _merge_direction(self, abox, a, b):
        for (s, t) in ((a, b), (b, a)):
            if t.is_named:
                return s, t
        for (s, t) in ((a, b), (b, a)):
            if t.is_root and not s.is_named:
                return s, t
        if a.is_descendant_of(b):
            return a, b
        if b.is_descendant_of(a):
            return b, a
        return (b, a) if abox.stamp(a) <= abox.stamp(b) else (a, b)

    # Clause matching ------------------------------------------------------

    def _match_clause(self, abox, ci, clause, seed=None):
        status = self.blocking_status(abox)

        def usable(ind):
            return status.get(ind, (UNBLOCKED,))[0] != INDIRECT

        variables = self._clause_vars[ci]
        ante = clause.antecedent
        stamps = abox.stamps

        def candidates(v, sub):
            sets = []
            for atom in ante:
                if isinstance(atom, ConceptAtom) and atom.term == v:
                    sets.append(abox.inds_with.get(atom.concept, set()))
                elif isinstance(atom, RoleAtom):
                    if atom.s == v and atom.t in sub:
                        sets.append(abox.r_in.get((atom.role, sub[atom.t]),
                                                  set()))
                    elif atom.t == v and atom.s in sub:
                        sets.append(abox.r_out.get((atom.role, sub[atom.s]),
                                                   set()))
            if not sets:
                return [i for i in abox.sorted_individuals() if usable(i)]
            out = set(sets[0])
            for s in sets[1:]:
                out &= s
            return sorted((i for i in out if usable(i)),
                          key=stamps.__getitem__)

        def antecedent_holds(sub):
            for atom in ante:
                if isinstance(atom, ConceptAtom):
                    if atom.term in sub and not abox.holds(
                            ("c", atom.concept, sub[atom.term])):
                        return False
                elif isinstance(atom, RoleAtom):
                    if atom.s in sub and atom.t in sub and not abox.holds(
                            ("r", atom.role, sub[atom.s], sub[atom.t])):
                        return False
            return True

        def consequent_satisfied(sub):
            for atom in clause.consequent:
                if abox.holds(self._ground(abox, atom, sub)):
                    return True
            return False

        def search(order, idx, sub):
            if idx == len(order):
                key = (ci, tuple(sub[v] for v in variables))
                if key in abox.applied:
                    return None
                if consequent_satisfied(sub):
                    return None
                return dict(sub)
            v = order[idx]
            for ind in candidates(v, sub):
                sub[v] = ind
                if antecedent_holds(sub):
                    found = search(order, idx + 1, sub)
                    if found is not None:
                        return found
                del sub[v]
            return None

        def attempt(initial):
            if any(not usable(i) for i in initial.values()):
                return None
            sub = dict(initial)
            if not antecedent_holds(sub):
                return None
            order = [v for v in variables if v not in sub]
            return search(order, 0, sub)

        if seed is None:
            sub = attempt({})
        else:
            sub = None
            if ante:
                for binding in _seed_bindings(clause, seed):
                    sub = attempt(binding)
                    if sub is not None:
                        break
            elif not variables:
                sub = attempt({})
            else:
                # No antecedent: the clause fires on every individual, so
                # seed its single variable from the fact's individuals.
                for ind in fact_individuals(seed):
                    if usable(ind):
                        sub = attempt({variables[0]: ind})
                        if sub is not None:
                            break
        if sub is None:
            return None
        return (sub, tuple(sub[v] for v in variables))

    def _ground(self, abox, atom, sub):
        if isinstance(atom, ConceptAtom):
            return ("c", atom.concept, sub[atom.term])
        if isinstance(atom, RoleAtom):
            return ("r", atom.role, sub[atom.s], sub[atom.t])
        ann = atom.annotation
        if ann is not None:
            ann = Annotation(sub[ann.at], ann.n, ann.role, ann.filler)
        return abox.make_eq(sub[atom.s], sub[atom.t], ann)

    def _select_hyp(self, abox):
        # Semi-naive matching: each clause only re-examines assertions added
        # (or requeued) since its last scan, seeding the matcher with them.
        self.blocking_status(abox)  # requeues newly unblocked individuals
        log = abox.log
        for ci, clause in enumerate(self.clauses):
            pos = abox.hyp_pos.get(ci, 0)
            while pos < len(log):
                fact = log[pos]
                if fact in abox.facts:
                    match = self._match_clause(abox, ci, clause, seed=fact)
                    if match is not None:
                        abox.hyp_pos[ci] = pos
                        return ("hyp", ci, match[0], match[1])
                pos += 1
            abox.hyp_pos[ci] = pos
        return None

    def _select_geq(self, abox):
        status = self.blocking_status(abox)
        facts = sorted(abox.atleast_facts,
                       key=lambda f: (abox.stamp(f[2]), concept_key(f[1])))
        for fact in facts:
            _, c, s = fact
            if status.get(s, (UNBLOCKED,))[0] != UNBLOCKED:
                continue
            if not self._has_witnesses(abox, status, c, s):
                return ("geq", fact)
        return None

    def _has_witnesses(self, abox, status, c: AtLeast, s):
        role, filler, n = c.role, c.filler, c.n
        if role.inverse:
            neigh = abox.r_in.get((role.name, s), set())
        else:
            neigh = abox.r_out.get((role.name, s), set())
        cands = sorted(
            (u for u in neigh
             if abox.has_concept(filler, u) and
             (u.parent == s or status.get(u, (UNBLOCKED,))[0] == UNBLOCKED)),
            key=abox.stamp)
        if len(cands) < n:
            return False
        if n == 1:
            return True

        def distinct(u, v):
            return ("ne",) + tuple(abox.order_pair(u, v)) in abox.facts

        def extend(chosen, rest):
            if len(chosen) == n:
                return True
            for i, u in enumerate(rest):
                if all(distinct(u, v) for v in chosen):
                    if extend(chosen + [u], rest[i + 1:]):
                        return True
            return False

        return extend([], cands)

    # -- rule application --------------------------------------------------

    def _open_ids(self, stack):
        return frozenset(c.node_id for c in stack)

    def apply_deterministic(self, abox, rule, stack, parent_trace):
        kind = rule[0]
        self._count(kind)
        added, removed = [], []
        if kind == "clash":
            dep = frozenset()
            for f in rule[1]:
                dep |= abox.deps.get(f, frozenset())
            abox.set_clash(dep)
        elif kind == "eq":
            fact = rule[1]
            s, t = self._merge_direction(abox, fact[1], fact[2])
            abox.control_deps |= self._open_ids(stack)
            before = set(abox.facts) if self.trace is not None else None
            abox.merge(s, t, abox.deps.get(fact, frozenset()))
            if before is not None:
                added = list(abox.facts - before)
                removed = list(before - abox.facts)
        elif kind == "geq":
            fact = rule[1]
            c, s = fact[1], fact[2]
            abox.control_deps |= self._open_ids(stack)
            dep = abox.deps.get(fact, frozenset())
            children = []
            for _ in range(c.n):
                i = abox.child_counter.get(s, 0) + 1
                abox.child_counter[s] = i
                children.append(s.child(i))
            for t in children:
                abox.ensure_stamp(t)
                if c.role.inverse:
                    f = ("r", c.role.name, t, s)
                else:
                    f = ("r", c.role.name, s, t)
                abox.add(f, dep)
                added.append(f)
                cf = ("c", c.filler, t)
                abox.add(cf, dep)
                added.append(cf)
            for i in range(len(children)):
                for j in range(i + 1, len(children)):
                    f = abox.make_ne(children[i], children[j])
                    abox.add(f, dep)
                    added.append(f)
        elif kind == "hyp":
            _, ci, sub, key = rule
            dep = self._hyp_dep(abox, ci, sub)
            atom = self.clauses[ci].consequent[0]
            f = self._ground(abox, atom, sub)
            abox.add(f, dep)
            abox.applied.add((ci, key))
            added.append(f)
        else:
            raise KBError(f"unexpected deterministic rule {kind}")
        return self._record(abox, kind, 0, added, removed, parent_trace)

    def _hyp_dep(self, abox, ci, sub):
        dep = frozenset()
        for atom in self.clauses[ci].antecedent:
            f = self._ground(abox, atom, sub)
            dep |= abox.deps.get(f, frozenset())
        return dep

    def apply_alternative(self, abox, rule, choice_idx, node_id, stack):
        """Apply one branch of a nondeterministic rule to ``abox``."""
        kind = rule[0]
        added, removed = [], []
        if kind == "hyp":
            _, ci, sub, key = rule
            order = range(len(self.clauses[ci].consequent))
            if self.config.disjunct_order == "reversed":
                order = list(reversed(list(order)))
            else:
                order = list(order)
            atom = self.clauses[ci].consequent[order[choice_idx]]
            dep = self._hyp_dep(abox, ci, sub) | {node_id}
            f = self._ground(abox, atom, sub)
            abox.add(f, dep)
            abox.applied.add((ci, key))
            added.append(f)
        else:  # ni
            _, fact, s = rule
            ann = fact[3]
            dep = abox.deps.get(fact, frozenset())
            if node_id is not None:
                dep = dep | {node_id}
            template = ann.at.extend_root(ann.role, ann.filler,
                                          choice_idx + 1)
            target = abox.canonical(template)
            if target not in abox.stamps:
                abox.ensure_stamp(target)
                self.stats["created_roots"].add(str(target))
            abox.control_deps |= self._open_ids(stack)
            before = set(abox.facts) if self.trace is not None else None
            abox.merge(s, target, dep)
            if before is not None:
                added = list(abox.facts - before)
                removed = list(before - abox.facts)
        return added, removed

    # -- main loop ---------------------------------------------------------

    def run(self) -> DeriveResult:
        cfg = self.config
        deadline = time.monotonic() + cfg.timeout
        abox = self.initial.copy()
        stack = []
        parent_trace = self._record(abox, "init", 0,
                                    sorted(abox.facts, key=render_fact), [], 0)

        def check_limits(abox):
            if len(abox.mentions) > cfg.individual_cap:
                raise ResourceLimit("individual cap exceeded")
            if time.monotonic() > deadline:
                raise ResourceLimit("time budget exceeded")

        def note_peak(abox):
            n = len(abox.mentions)
            if n > self.stats["peak_individuals"]:
                self.stats["peak_individuals"] = n

        try:
            while True:
                check_limits(abox)
                note_peak(abox)
                if abox.clash_deps is not None:
                    self.stats["leaves"] += 1
                    nxt = self._backtrack(stack, abox.clash_deps)
                    if nxt is None:
                        return DeriveResult(UNSAT, None, self.stats,
                                            self.trace)
                    abox, parent_trace = nxt
                    continue
                rule = self.select(abox)
                if rule is None:
                    self.stats["leaves"] += 1
                    self._finish_stats(abox)
                    return DeriveResult(SAT, abox, self.stats, self.trace)
                if rule[0] in ("clash", "eq", "geq") or (
                        rule[0] == "hyp" and
                        len(self.clauses[rule[1]].consequent) <= 1):
                    if rule[0] == "hyp" and \
                            not self.clauses[rule[1]].consequent:
                        # Clause with empty consequent: immediate clash.
                        self._count("hyp")
                        abox.set_clash(self._hyp_dep(abox, rule[1], rule[2]))
                        parent_trace = self._record(abox, "hyp", 0, [], [],
                                                    parent_trace)
                    else:
                        parent_trace = self.apply_deterministic(
                            abox, rule, stack, parent_trace)
                    continue
                # Nondeterministic: hyp with several disjuncts, or root
                # introduction over several candidate indices.
                n = len(self.clauses[rule[1]].consequent) \
                    if rule[0] == "hyp" else rule[1][3].n
                self._count(rule[0])
                if n == 1:
                    # Root introduction with a single candidate index.
                    added, removed = self.apply_alternative(
                        abox, rule, 0, None, stack)
                    parent_trace = self._record(abox, rule[0], 0, added,
                                                removed, parent_trace)
                    continue
                self.stats["branch_points"] += 1
                self._next_node += 1
                choice = _Choice(self._next_node, abox, (rule, n),
                                 parent_trace)
                stack.append(choice)
                child = abox.copy()
                added, removed = self.apply_alternative(
                    child, rule, 0, choice.node_id, stack)
                choice.next = 1
                parent_trace = self._record(child, rule[0], 0, added,
                                            removed, choice.trace_id)
                abox = child
        except ResourceLimit:
            return DeriveResult(INDETERMINATE, None, self.stats, self.trace)

    def _backtrack(self, stack, dep):
        while stack:
            top = stack[-1]
            if self.config.backjumping and top.node_id not in dep:
                stack.pop()
                continue
            top.acc |= set(dep) - {top.node_id}
            rule, n = top.alts
            if top.next < n:
                child = top.snapshot.copy()
                added, removed = self.apply_alternative(
                    child, rule, top.next, top.node_id, stack)
                trace_id = self._record(child, rule[0], top.next, added,
                                        removed, top.trace_id)
                top.next += 1
                return child, trace_id
            dep = frozenset(top.acc)
            stack.pop()
        return None

    def _finish_stats(self, abox):
        status = self.blocking_status(abox)
        self.stats["directly_blocked"] = sum(
            1 for v in status.values() if v[0] == DIRECT)
        self.stats["indirectly_blocked"] = sum(
            1 for v in status.values() if v[0] == INDIRECT)

    # Validation hook used when config.validate is on; called by derive().


def derive(clauses, assertions, config: RunConfig = None,
           trace: bool = False) -> DeriveResult:
    """Saturate the assertions under the clauses; the main entry point."""
    config = config or RunConfig()
    d = Derivation(clauses, assertions, config, trace=trace)
    if config.validate:
        _install_validation(d)
    return d.run()


def _install_validation(derivation: Derivation):
    """Wrap rule application so the forest invariants are checked after
    every mutation."""
    original_det = derivation.apply_deterministic
    original_alt = derivation.apply_alternative

    def checked_det(abox, rule, stack, parent_trace):
        out = original_det(abox, rule, stack, parent_trace)
        problems = validate_abox(abox)
        derivation.stats["validator_checks"] += 1
        if problems:
            raise InvalidABox("; ".join(problems))
        return out

    def checked_alt(abox, rule, choice_idx, node_id, stack):
        out = original_alt(abox, rule, choice_idx, node_id, stack)
        problems = validate_abox(abox)
        derivation.stats["validator_checks"] += 1
        if problems:
            raise InvalidABox("; ".join(problems))
        return out

    derivation.apply_deterministic = checked_det
    derivation.apply_alternative = checked_alt


# ---------------------------------------------------------------------------
# Trace export
# ---------------------------------------------------------------------------

def trace_to_jsonl(trace) -> str:
    return "\n".join(json.dumps(node, sort_keys=True) for node in trace) + "\n"


def trace_to_dot(trace) -> str:
    lines = ["digraph derivation {", "  node [shape=box, fontsize=10];"]
    for node in trace:
        label_parts = [f"{node['rule']}[{node['choice']}]"]
        for f in node["added"][:6]:
            label_parts.append("+" + f)
        if len(node["added"]) > 6:
            label_parts.append("...")
        for f in node["removed"][:3]:
            label_parts.append("-" + f)
        label = "\\n".join(p.replace('"', "'") for p in label_parts)
        lines.append(f'  n{node["id"]} [label="{label}"];')
        if node["parent"]:
            lines.append(f'  n{node["parent"]} -> n{node["id"]};')
    lines.append("}")
    return "\n".join(lines) + "\n"
