"""Preprocessing pipeline: transitivity elimination, structural
normalization, and clausification.

The pipeline turns an arbitrary knowledge base into (a) a set of clauses
over at most one center variable and its direct neighbours and (b) a ground
assertion set, which together are what the derivation engine consumes.

Fresh concept names introduced during normalization start with ``Q%`` and are
derived from a stable hash of the concept they stand for, so repeated
occurrences of the same subconcept share one name and output is reproducible
across runs.  Nominal guard concepts start with ``O%``.
"""

import hashlib
from dataclasses import dataclass

from .model import (
    KnowledgeBase, Role,
    Top, Bottom, Atomic, Nominal, Not, And, Or, Exists, ForAll,
    SelfRestriction, AtLeast, AtMost, TOP, BOTTOM,
    GCI, SubRole, DisjointRoles, ReflexiveRole, IrreflexiveRole,
    SymmetricRole, AsymmetricRole, TransitiveRole,
    ConceptAssertion, RoleAssertion, SameIndividuals, DifferentIndividuals,
    nnf, neg_dot, is_literal, concept_key, SubRoleClosure, KBError,
)
from .clauses import (
    HTClause, ConceptAtom, RoleAtom, EqAtom, Annotation, Var, X, ar,
    NOMINAL_GUARD_PREFIX, FRESH_NAME_PREFIX,
)

SEED_INDIVIDUAL = "Q%seed"


class NotNormalizedError(KBError):
    pass


# ---------------------------------------------------------------------------
# Concept closure and transitivity elimination
# ---------------------------------------------------------------------------

def _subconcepts(c, out):
    if c in out:
        return
    out.add(c)
    if isinstance(c, Not):
        _subconcepts(c.concept, out)
    elif isinstance(c, (And, Or)):
        for a in c.args:
            _subconcepts(a, out)
    elif isinstance(c, (Exists, ForAll, AtLeast, AtMost)):
        _subconcepts(c.filler, out)


def concept_closure(kb: KnowledgeBase):
    """The set of concepts relevant for the transitivity encoding: nnf of all
    axioms, closed under subconcepts, negated at-most fillers, and universal
    restrictions pushed down the role hierarchy over transitive roles."""
    closure = SubRoleClosure(kb.rbox)
    tra = set()
    for ax in kb.rbox:
        if isinstance(ax, TransitiveRole):
            tra.add(ax.role)
            tra.add(ax.role.inv())

    def transitive_below(r):
        return [s for s in
                {p[0] for p in closure.pairs if p[1] == r} | {r}
                if s in tra]

    todo = []
    for ax in kb.tbox:
        todo.append(nnf(Or((Not(ax.lhs), ax.rhs))))
    for ax in kb.abox:
        if isinstance(ax, ConceptAssertion):
            todo.append(nnf(ax.concept))

    result = set()
    while todo:
        c = todo.pop()
        before = set(result)
        _subconcepts(c, result)
        new = result - before
        for d in new:
            if isinstance(d, AtMost):
                nd = neg_dot(d.filler)
                if nd not in result:
                    todo.append(nd)
            if isinstance(d, ForAll):
                for s in transitive_below(d.role):
                    e = ForAll(s, d.filler)
                    if e not in result:
                        todo.append(e)
    return result


def eliminate_transitivity(kb: KnowledgeBase) -> KnowledgeBase:
    """Replace transitivity axioms by universal-restriction propagation
    axioms over the concept closure."""
    closure = SubRoleClosure(kb.rbox)
    tra = set()
    for ax in kb.rbox:
        if isinstance(ax, TransitiveRole):
            tra.add(ax.role)
            tra.add(ax.role.inv())
    clos = concept_closure(kb)
    extra = []
    for c in sorted(clos, key=concept_key):
        if isinstance(c, ForAll):
            for s in sorted({p[0] for p in closure.pairs if p[1] == c.role}
                            | {c.role}, key=str):
                if s in tra:
                    extra.append(GCI(c, ForAll(s, ForAll(s, c.filler))))
    rbox = tuple(ax for ax in kb.rbox
                 if not isinstance(ax, TransitiveRole))
    return KnowledgeBase(rbox, kb.tbox + tuple(extra), kb.abox)


# ---------------------------------------------------------------------------
# Polarity and fresh names
# ---------------------------------------------------------------------------

def polarity(c) -> bool:
    """Whether the replacement name for ``c`` should occur positively."""
    if isinstance(c, (Top, Bottom)):
        return False
    if isinstance(c, Atomic):
        return True
    if isinstance(c, Nominal):
        return True
    if isinstance(c, SelfRestriction):
        return True
    if isinstance(c, Not):
        return False
    if isinstance(c, (And, Or)):
        return any(polarity(a) for a in c.args)
    if isinstance(c, ForAll):
        return polarity(c.filler)
    if isinstance(c, Exists):
        return True
    if isinstance(c, AtLeast):
        return True
    if isinstance(c, AtMost):
        return polarity(neg_dot(c.filler)) if c.n == 0 else True
    raise KBError(f"no polarity for {c!r}")


def fresh_name(c) -> str:
    digest = hashlib.sha256(concept_key(c).encode()).hexdigest()[:10]
    return FRESH_NAME_PREFIX + digest


def guard_name(individual: str) -> str:
    return NOMINAL_GUARD_PREFIX + individual


# ---------------------------------------------------------------------------
# Structural normalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalizedKB:
    rbox: tuple = ()
    gcis: tuple = ()   # each GCI is a tuple of normal-form disjuncts
    abox: tuple = ()


def _is_normal(c) -> bool:
    if is_literal(c) or isinstance(c, (Nominal, SelfRestriction)):
        return True
    if isinstance(c, Not) and isinstance(c.concept, SelfRestriction):
        return True
    if isinstance(c, (ForAll, AtLeast, AtMost)):
        return is_literal(c.filler)
    return False


def _exists_to_atleast(c):
    if isinstance(c, Exists):
        return AtLeast(1, c.role, _exists_to_atleast(c.filler))
    if isinstance(c, Not):
        return Not(_exists_to_atleast(c.concept))
    if isinstance(c, (And, Or)):
        return type(c)(tuple(_exists_to_atleast(a) for a in c.args))
    if isinstance(c, ForAll):
        return ForAll(c.role, _exists_to_atleast(c.filler))
    if isinstance(c, (AtLeast, AtMost)):
        return type(c)(c.n, c.role, _exists_to_atleast(c.filler))
    return c


class _Normalizer:
    def __init__(self):
        self.gcis = []
        self.abox = []
        self.names = {}

    def alpha(self, c):
        """Literal standing for concept ``c``; positive or negative per the
        polarity of ``c`` so that Horn-ness of the input is preserved."""
        if c not in self.names:
            name = Atomic(fresh_name(c))
            self.names[c] = name if polarity(c) else Not(name)
        return self.names[c]

    def gci(self, disjuncts):
        ds = []
        for d in disjuncts:
            if isinstance(d, Or):
                ds.extend(d.args)
            else:
                ds.append(d)
        out = []
        for d in ds:
            if isinstance(d, Top):
                return  # tautology
            if isinstance(d, Bottom):
                continue
            out.append(d)
        ds = out
        for i, d in enumerate(ds):
            if _is_normal(d):
                continue
            if isinstance(d, And):
                a = self.alpha(d)
                ds[i] = a
                for conj in d.args:
                    self.gci([neg_dot(a), conj])
                self.gci(ds)
                return
            if isinstance(d, (ForAll, AtLeast)) and not is_literal(d.filler):
                a = self.alpha(d.filler)
                ds[i] = type(d)(d.n, d.role, a) if isinstance(d, AtLeast) \
                    else ForAll(d.role, a)
                self.gci([neg_dot(a), d.filler])
                self.gci(ds)
                return
            if isinstance(d, AtMost) and not is_literal(d.filler):
                e = neg_dot(d.filler)
                a = self.alpha(e)
                ds[i] = AtMost(d.n, d.role, neg_dot(a))
                self.gci([neg_dot(a), e])
                self.gci(ds)
                return
            if isinstance(d, Not) and isinstance(d.concept, Nominal):
                rest = ds[:i] + ds[i + 1:]
                if not rest:
                    self.gcis.append(())  # unconditionally false
                else:
                    concept = rest[0] if len(rest) == 1 else Or(tuple(rest))
                    self.assertion(concept, d.concept.individual)
                return
            raise NotNormalizedError(f"cannot normalize disjunct {d}")
        self.gcis.append(tuple(ds))

    def assertion(self, concept, individual):
        if is_literal(concept):
            self.abox.append(ConceptAssertion(concept, individual))
            return
        a = self.alpha(concept)
        self.abox.append(ConceptAssertion(a, individual))
        self.gci([neg_dot(a), concept])


def normalize(kb: KnowledgeBase) -> NormalizedKB:
    """Structural normalization of a transitivity-free knowledge base."""
    norm = _Normalizer()
    norm.abox.append(ConceptAssertion(TOP, SEED_INDIVIDUAL))
    for ax in kb.tbox:
        norm.gci([_exists_to_atleast(nnf(Or((Not(ax.lhs), ax.rhs))))])
    for ax in kb.abox:
        if isinstance(ax, ConceptAssertion):
            norm.assertion(_exists_to_atleast(nnf(ax.concept)), ax.individual)
        elif isinstance(ax, RoleAssertion):
            if ax.role.inverse:
                norm.abox.append(RoleAssertion(ax.role.inv(),
                                               ax.object, ax.subject))
            else:
                norm.abox.append(ax)
        else:
            norm.abox.append(ax)
    return NormalizedKB(kb.rbox, tuple(norm.gcis), tuple(norm.abox))


# ---------------------------------------------------------------------------
# Clausification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClausalKB:
    clauses: tuple = ()
    assertions: tuple = ()  # ground axiom-level assertions
    nominals: tuple = ()    # individuals occurring in nominal disjuncts


def clausify(norm: NormalizedKB) -> ClausalKB:
    clauses = []
    nominals = []

    for disjuncts in norm.gcis:
        antecedent = []
        consequent = []
        y_count = 0
        z_count = 0
        skip = False

        def fresh_y():
            nonlocal y_count
            y_count += 1
            return Var("y", y_count)

        def fresh_z():
            nonlocal z_count
            z_count += 1
            return Var("z", z_count)

        for d in disjuncts:
            if isinstance(d, Atomic):
                consequent.append(ConceptAtom(d, X))
            elif isinstance(d, Not) and isinstance(d.concept, Atomic):
                antecedent.append(ConceptAtom(d.concept, X))
            elif isinstance(d, Bottom):
                pass
            elif isinstance(d, Top):
                skip = True
                break
            elif isinstance(d, Nominal):
                z = fresh_z()
                antecedent.append(
                    ConceptAtom(Atomic(guard_name(d.individual)), z))
                consequent.append(EqAtom(X, z))
                if d.individual not in nominals:
                    nominals.append(d.individual)
            elif isinstance(d, SelfRestriction):
                consequent.append(ar(d.role, X, X))
            elif isinstance(d, Not) and \
                    isinstance(d.concept, SelfRestriction):
                antecedent.append(ar(d.concept.role, X, X))
            elif isinstance(d, ForAll):
                f = d.filler
                if isinstance(f, Top):
                    skip = True
                    break
                y = fresh_y()
                antecedent.append(ar(d.role, X, y))
                if isinstance(f, Atomic):
                    consequent.append(ConceptAtom(f, y))
                elif isinstance(f, Not):
                    antecedent.append(ConceptAtom(f.concept, y))
                # Bottom filler: the role atom alone falsifies the disjunct.
            elif isinstance(d, AtLeast):
                if isinstance(d.filler, Bottom):
                    continue  # unsatisfiable disjunct contributes nothing
                consequent.append(ConceptAtom(d, X))
            elif isinstance(d, AtMost):
                f = d.filler
                if isinstance(f, Bottom):
                    skip = True
                    break
                ys = [fresh_y() for _ in range(d.n + 1)]
                annotation = Annotation(X, d.n, d.role, f)
                for y in ys:
                    antecedent.append(ar(d.role, X, y))
                    if isinstance(f, Atomic):
                        antecedent.append(ConceptAtom(f, y))
                    elif isinstance(f, Not):
                        consequent.append(ConceptAtom(f.concept, y))
                for i in range(len(ys)):
                    for j in range(i + 1, len(ys)):
                        consequent.append(
                            EqAtom(ys[i], ys[j], annotation))
            else:
                raise NotNormalizedError(f"unexpected disjunct {d}")
        if not skip:
            clauses.append(HTClause(tuple(antecedent), tuple(consequent)))

    y1 = Var("y", 1)
    for ax in norm.rbox:
        if isinstance(ax, SubRole):
            clauses.append(HTClause((ar(ax.sub, X, y1),),
                                    (ar(ax.sup, X, y1),)))
        elif isinstance(ax, DisjointRoles):
            clauses.append(HTClause((ar(ax.r1, X, y1), ar(ax.r2, X, y1)), ()))
        elif isinstance(ax, ReflexiveRole):
            clauses.append(HTClause((), (ar(ax.role, X, X),)))
        elif isinstance(ax, IrreflexiveRole):
            clauses.append(HTClause((ar(ax.role, X, X),), ()))
        elif isinstance(ax, SymmetricRole):
            clauses.append(HTClause((ar(ax.role, X, y1),),
                                    (ar(ax.role.inv(), X, y1),)))
        elif isinstance(ax, AsymmetricRole):
            clauses.append(HTClause(
                (ar(ax.role, X, y1), ar(ax.role.inv(), X, y1)), ()))
        elif isinstance(ax, TransitiveRole):
            raise NotNormalizedError(
                "transitivity must be eliminated before clausification")
        else:
            raise NotNormalizedError(f"unexpected role axiom {ax!r}")

    assertions = list(norm.abox)
    for ind in nominals:
        assertions.append(ConceptAssertion(Atomic(guard_name(ind)), ind))
    return ClausalKB(tuple(clauses), tuple(assertions), tuple(nominals))


def is_horn(clauses) -> bool:
    return all(len(c.consequent) <= 1 for c in clauses)


def preprocess(kb: KnowledgeBase) -> ClausalKB:
    """Full pipeline: transitivity elimination, normalization, clausification."""
    return clausify(normalize(eliminate_transitivity(kb)))
