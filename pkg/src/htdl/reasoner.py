"""High-level reasoning services: satisfiability, subsumption and
classification of a knowledge base.

Subsumption is reduced to unsatisfiability with a fresh probe individual.
For deterministic (Horn) clause sets classification needs one derivation
per atomic concept: the probe's final label lists exactly its subsumers.
Otherwise a pairwise scheme is used, pruned with subsumption and
non-subsumption facts read off earlier runs.  Across runs the labels of
non-blocked fresh individuals can be cached and act as virtual blockers,
which shortens later derivations; the cache is only used when the clause
set mentions no nominal guards.
"""

from dataclasses import dataclass, field

from .model import (
    KnowledgeBase, Atomic, Not, TOP, ConceptAssertion, KBError,
)
from .clauses import (
    validate_ht_clause, NOMINAL_GUARD_PREFIX, FRESH_NAME_PREFIX,
)
from .preprocess import preprocess, is_horn
from .engine import (
    derive, RunConfig, DeriveResult, SAT, UNSAT, INDETERMINATE, named,
)
from . import blocking as blocking_mod

PROBE = "Q%probe"


class GuardRejection(KBError):
    """The requested blocking strategy is not admissible for this input."""


def _is_reserved(name: str) -> bool:
    return name.startswith((NOMINAL_GUARD_PREFIX, FRESH_NAME_PREFIX))


@dataclass
class Taxonomy:
    concepts: tuple
    subsumers: dict                  # name -> frozenset of names (incl. self)
    unsatisfiable: frozenset = frozenset()
    indeterminate: frozenset = frozenset()

    def subsumed_by(self, a: str, b: str) -> bool:
        return b in self.subsumers.get(a, frozenset())

    def equivalence_classes(self):
        seen = set()
        classes = []
        for c in self.concepts:
            if c in seen:
                continue
            cls = frozenset(d for d in self.concepts
                            if self.subsumed_by(c, d) and
                            self.subsumed_by(d, c))
            seen |= cls
            classes.append(tuple(sorted(cls)))
        return classes

    def direct_supers(self, a: str):
        ups = [b for b in self.subsumers.get(a, ()) if b != a and
               not self.subsumed_by(b, a)]
        out = []
        for b in ups:
            if not any(c != b and self.subsumed_by(c, b) for c in ups):
                out.append(b)
        return sorted(out)

    def pretty(self) -> str:
        lines = []
        for cls in sorted(self.equivalence_classes()):
            head = " = ".join(cls)
            supers = self.direct_supers(cls[0])
            target = " ".join(supers) if supers else "top"
            lines.append(f"{head} < {target}")
        if self.unsatisfiable:
            lines.append("unsatisfiable: " +
                         " ".join(sorted(self.unsatisfiable)))
        if self.indeterminate:
            lines.append("indeterminate: " +
                         " ".join(sorted(self.indeterminate)))
        return "\n".join(lines) + "\n"


class Reasoner:
    def __init__(self, kb: KnowledgeBase, config: RunConfig = None,
                 use_cache: bool = True):
        self.kb = kb
        self.config = config or RunConfig()
        clausal = preprocess(kb)
        self.clauses = clausal.clauses
        self.assertions = clausal.assertions
        self.nominal_free = not clausal.nominals
        for c in self.clauses:
            problems = validate_ht_clause(c)
            if problems:
                raise KBError(
                    f"preprocessing produced an invalid clause {c}: "
                    + "; ".join(problems))
        violations = blocking_mod.strategy_guard_violations(
            self.config.blocking, self.clauses)
        if violations and not self.config.unsafe_blocking:
            raise GuardRejection(
                f"blocking strategy {self.config.blocking!r} rejected: "
                + "; ".join(violations))
        self.use_cache = use_cache
        self.cache = set() if use_cache else None
        self.sat_calls = 0
        self.last_stats = None

    # -- core checks -------------------------------------------------------

    def _run(self, extra=(), trace=False) -> DeriveResult:
        cfg = self.config
        cache = None
        if self.cache is not None and self.nominal_free and \
                cfg.blocking == "anywhere-pairwise":
            cache = self.cache
        run_cfg = RunConfig(
            blocking=cfg.blocking, unsafe_blocking=cfg.unsafe_blocking,
            individual_cap=cfg.individual_cap, timeout=cfg.timeout,
            backjumping=cfg.backjumping, disjunct_order=cfg.disjunct_order,
            validate=cfg.validate, seed=cfg.seed, blocker_cache=cache,
            blocking_audit_rate=cfg.blocking_audit_rate)
        self.sat_calls += 1
        result = derive(self.clauses, tuple(self.assertions) + tuple(extra),
                        run_cfg, trace=trace)
        self.last_stats = result.stats
        if result.verdict == SAT and cache is not None:
            self._harvest_cache(result.abox)
        return result

    def _harvest_cache(self, abox):
        status = blocking_mod.compute_blocking(abox, "anywhere-pairwise",
                                               cache_keys=None)
        for ind, (st, _) in status.items():
            if ind.is_blockable and st == blocking_mod.UNBLOCKED:
                self.cache.add(blocking_mod.pair_key(abox, ind))

    def is_satisfiable(self, trace=False):
        """True, False, or the INDETERMINATE sentinel string."""
        result = self._run(trace=trace)
        if result.verdict == INDETERMINATE:
            return INDETERMINATE
        return result.verdict == SAT

    def check(self, trace=False) -> DeriveResult:
        """Full derive result for the knowledge base itself."""
        return self._run(trace=trace)

    def subsumes(self, sub: str, sup: str):
        """Does every instance of ``sub`` belong to ``sup``?"""
        extra = (ConceptAssertion(Atomic(sub), PROBE),
                 ConceptAssertion(Not(Atomic(sup)), PROBE))
        result = self._run(extra)
        if result.verdict == INDETERMINATE:
            return INDETERMINATE
        return result.verdict == UNSAT

    # -- classification ----------------------------------------------------

    def classify(self) -> Taxonomy:
        concepts = tuple(sorted(
            c for c in self.kb.signature()[0] if not _is_reserved(c)))
        if is_horn(self.clauses):
            taxonomy = self._classify_deterministic(concepts)
            if taxonomy is not None:
                return taxonomy
        return self._classify_pairwise(concepts)

    def _probe_label(self, abox):
        probe = abox.canonical(named(PROBE))
        return frozenset(
            c.name for c in abox.concepts_of.get(probe, ())
            if isinstance(c, Atomic) and not _is_reserved(c.name))

    def _classify_deterministic(self, concepts):
        subsumers = {}
        unsat = set()
        indet = set()
        for a in concepts:
            result = self._run((ConceptAssertion(Atomic(a), PROBE),))
            if result.verdict == INDETERMINATE:
                indet.add(a)
                subsumers[a] = frozenset({a})
                continue
            if result.stats["branch_points"]:
                return None  # a root-introduction branch appeared; fall back
            if result.verdict == UNSAT:
                unsat.add(a)
                subsumers[a] = frozenset(concepts)
            else:
                subsumers[a] = self._probe_label(result.abox) | {a}
        return Taxonomy(concepts, subsumers, frozenset(unsat),
                        frozenset(indet))

    def _classify_pairwise(self, concepts):
        known = {}
        nonsub = set()
        unsat = set()
        indet = set()

        def harvest(abox):
            status = blocking_mod.compute_blocking(
                abox, self.config.blocking, cache_keys=None)
            for ind, (st, _) in status.items():
                if st == blocking_mod.INDIRECT:
                    continue
                label = {c.name for c in abox.concepts_of.get(ind, ())
                         if isinstance(c, Atomic) and not _is_reserved(c.name)}
                for c in label:
                    for d in concepts:
                        if d not in label:
                            nonsub.add((c, d))

        for a in concepts:
            result = self._run((ConceptAssertion(Atomic(a), PROBE),))
            if result.verdict == INDETERMINATE:
                indet.add(a)
                continue
            if result.verdict == UNSAT:
                unsat.add(a)
                continue
            probe = result.abox.canonical(named(PROBE))
            for fact in list(result.abox.mentions.get(probe, ())):
                if fact[0] == "c" and isinstance(fact[1], Atomic) and \
                        not _is_reserved(fact[1].name) and \
                        not result.abox.deps.get(fact):
                    known[(a, fact[1].name)] = True
            harvest(result.abox)

        subsumers = {}
        for a in concepts:
            if a in unsat:
                subsumers[a] = frozenset(concepts)
                continue
            if a in indet:
                subsumers[a] = frozenset({a})
                continue
            subs = {a}
            for b in concepts:
                if b == a:
                    continue
                if known.get((a, b)):
                    subs.add(b)
                    continue
                if (a, b) in nonsub:
                    continue
                verdict = self.subsumes(a, b)
                if verdict == INDETERMINATE:
                    indet.add(a)
                elif verdict:
                    subs.add(b)
            subsumers[a] = frozenset(subs)
        return Taxonomy(tuple(concepts), subsumers, frozenset(unsat),
                        frozenset(indet))
