"""Independent model finder used as a test oracle.

Satisfiability of a knowledge base over a fixed finite domain is encoded
propositionally (one variable per atomic-concept membership, role edge and
individual placement) and handed to a small DPLL solver.  Any model found is
decoded back into a :class:`FiniteInterpretation` and re-checked with the
direct semantic evaluator, so the two routes cross-validate each other.

There is also a brute-force enumerator of all interpretations over tiny
signatures, used by equivalence property tests.
"""

import itertools

from .model import (
    KnowledgeBase, FiniteInterpretation, Role,
    Top, Bottom, Atomic, Nominal, Not, And, Or, Exists, ForAll,
    SelfRestriction, AtLeast, AtMost,
    GCI, SubRole, DisjointRoles, ReflexiveRole, IrreflexiveRole,
    SymmetricRole, AsymmetricRole, TransitiveRole,
    ConceptAssertion, RoleAssertion, SameIndividuals, DifferentIndividuals,
    satisfies_kb, KBError,
)

_TRUE = 10 ** 9  # sentinel literals, never allocated as real variables
_FALSE = -_TRUE


def _neg(lit):
    if lit == _TRUE:
        return _FALSE
    if lit == _FALSE:
        return _TRUE
    return -lit


class _CNF:
    """Collects clauses over integer variables (signed integer literals)."""

    def __init__(self):
        self.n_vars = 0
        self.clauses = []

    def new_var(self):
        self.n_vars += 1
        return self.n_vars

    def add(self, clause):
        lits = []
        for l in clause:
            if l == _TRUE:
                return  # clause already satisfied
            if l == _FALSE:
                continue
            lits.append(l)
        self.clauses.append(tuple(lits))

    def lit_and(self, lits):
        """A literal equivalent to the conjunction of ``lits``."""
        lits = [l for l in lits if l != _TRUE]
        if any(l == _FALSE for l in lits):
            return _FALSE
        if not lits:
            return _TRUE
        if len(lits) == 1:
            return lits[0]
        v = self.new_var()
        for l in lits:
            self.add([-v, l])
        self.add([v] + [-l for l in lits])
        return v

    def lit_or(self, lits):
        """A literal equivalent to the disjunction of ``lits``."""
        lits = [l for l in lits if l != _FALSE]
        if any(l == _TRUE for l in lits):
            return _TRUE
        if not lits:
            return _FALSE
        if len(lits) == 1:
            return lits[0]
        v = self.new_var()
        for l in lits:
            self.add([v, -l])
        self.add([-v] + list(lits))
        return v

    def assert_lit(self, lit):
        if lit == _TRUE:
            return
        if lit == _FALSE:
            self.clauses.append(())
        else:
            self.clauses.append((lit,))


def _dpll(clauses, assignment):
    """Plain DPLL with unit propagation.  Returns a model dict or None."""
    clauses = list(clauses)
    # Unit propagation.
    changed = True
    while changed:
        changed = False
        next_clauses = []
        for cl in clauses:
            vals = []
            satisfied = False
            for l in cl:
                v = assignment.get(abs(l))
                if v is None:
                    vals.append(l)
                elif (l > 0) == v:
                    satisfied = True
                    break
            if satisfied:
                continue
            if not vals:
                return None
            if len(vals) == 1:
                l = vals[0]
                assignment[abs(l)] = l > 0
                changed = True
            else:
                next_clauses.append(tuple(vals))
        clauses = next_clauses
    if not clauses:
        return assignment
    # Branch on the first literal of the shortest clause.
    pivot = min(clauses, key=len)[0]
    for val in (pivot > 0, pivot < 0):
        trial = dict(assignment)
        trial[abs(pivot)] = val
        result = _dpll(clauses, trial)
        if result is not None:
            return result
    return None


# ---------------------------------------------------------------------------
# Encoding a KB over a fixed domain
# ---------------------------------------------------------------------------

class _Encoder:
    def __init__(self, kb: KnowledgeBase, size: int):
        self.kb = kb
        self.size = size
        self.cnf = _CNF()
        self.concepts, self.roles, self.individuals = kb.signature()
        self.cvar = {}  # (concept name, element) -> var
        self.rvar = {}  # (role name, d, e) -> var
        self.ivar = {}  # (individual, element) -> var
        for a in sorted(self.concepts):
            for d in range(size):
                self.cvar[(a, d)] = self.cnf.new_var()
        for r in sorted(self.roles):
            for d in range(size):
                for e in range(size):
                    self.rvar[(r, d, e)] = self.cnf.new_var()
        for i in sorted(self.individuals):
            vs = [self.cnf.new_var() for _ in range(size)]
            for d in range(size):
                self.ivar[(i, d)] = vs[d]
            self.cnf.add(vs)  # at least one placement
            for d in range(size):
                for e in range(d + 1, size):
                    self.cnf.add([-vs[d], -vs[e]])

    def role_lit(self, role: Role, d, e):
        if role.inverse:
            d, e = e, d
        return self.rvar[(role.name, d, e)]

    def concept_lit(self, c, d):
        """A literal true iff element ``d`` belongs to concept ``c``."""
        cnf = self.cnf
        if isinstance(c, Top):
            return _TRUE
        if isinstance(c, Bottom):
            return _FALSE
        if isinstance(c, Atomic):
            return self.cvar[(c.name, d)]
        if isinstance(c, Nominal):
            return self.ivar[(c.individual, d)]
        if isinstance(c, Not):
            return _neg(self.concept_lit(c.concept, d))
        if isinstance(c, And):
            return cnf.lit_and([self.concept_lit(a, d) for a in c.args])
        if isinstance(c, Or):
            return cnf.lit_or([self.concept_lit(a, d) for a in c.args])
        if isinstance(c, SelfRestriction):
            return self.role_lit(c.role, d, d)
        if isinstance(c, Exists):
            return cnf.lit_or([
                cnf.lit_and([self.role_lit(c.role, d, e),
                             self.concept_lit(c.filler, e)])
                for e in range(self.size)])
        if isinstance(c, ForAll):
            return cnf.lit_and([
                cnf.lit_or([_neg(self.role_lit(c.role, d, e)),
                            self.concept_lit(c.filler, e)])
                for e in range(self.size)])
        if isinstance(c, AtLeast):
            if c.n > self.size:
                return _FALSE
            options = []
            for subset in itertools.combinations(range(self.size), c.n):
                options.append(cnf.lit_and(
                    [cnf.lit_and([self.role_lit(c.role, d, e),
                                  self.concept_lit(c.filler, e)])
                     for e in subset]))
            return cnf.lit_or(options)
        if isinstance(c, AtMost):
            return _neg(self.concept_lit(AtLeast(c.n + 1, c.role, c.filler), d))
        raise KBError(f"cannot encode concept {c!r}")

    def encode(self):
        cnf = self.cnf
        size = self.size
        for ax in self.kb.axioms():
            if isinstance(ax, GCI):
                for d in range(size):
                    cnf.add([_neg(self.concept_lit(ax.lhs, d)),
                             self.concept_lit(ax.rhs, d)])
            elif isinstance(ax, SubRole):
                for d in range(size):
                    for e in range(size):
                        cnf.add([-self.role_lit(ax.sub, d, e),
                                 self.role_lit(ax.sup, d, e)])
            elif isinstance(ax, DisjointRoles):
                for d in range(size):
                    for e in range(size):
                        cnf.add([-self.role_lit(ax.r1, d, e),
                                 -self.role_lit(ax.r2, d, e)])
            elif isinstance(ax, ReflexiveRole):
                for d in range(size):
                    cnf.add([self.role_lit(ax.role, d, d)])
            elif isinstance(ax, IrreflexiveRole):
                for d in range(size):
                    cnf.add([-self.role_lit(ax.role, d, d)])
            elif isinstance(ax, SymmetricRole):
                for d in range(size):
                    for e in range(size):
                        cnf.add([-self.role_lit(ax.role, d, e),
                                 self.role_lit(ax.role, e, d)])
            elif isinstance(ax, AsymmetricRole):
                for d in range(size):
                    for e in range(size):
                        cnf.add([-self.role_lit(ax.role, d, e),
                                 -self.role_lit(ax.role, e, d)])
            elif isinstance(ax, TransitiveRole):
                for d in range(size):
                    for e in range(size):
                        for f in range(size):
                            cnf.add([-self.role_lit(ax.role, d, e),
                                     -self.role_lit(ax.role, e, f),
                                     self.role_lit(ax.role, d, f)])
            elif isinstance(ax, ConceptAssertion):
                for d in range(size):
                    lit = self.concept_lit(ax.concept, d)
                    cnf.add([-self.ivar[(ax.individual, d)], lit])
            elif isinstance(ax, RoleAssertion):
                for d in range(size):
                    for e in range(size):
                        cnf.add([-self.ivar[(ax.subject, d)],
                                 -self.ivar[(ax.object, e)],
                                 self.role_lit(ax.role, d, e)])
            elif isinstance(ax, SameIndividuals):
                for d in range(size):
                    cnf.add([-self.ivar[(ax.a, d)], self.ivar[(ax.b, d)]])
            elif isinstance(ax, DifferentIndividuals):
                for d in range(size):
                    cnf.add([-self.ivar[(ax.a, d)], -self.ivar[(ax.b, d)]])
            else:
                raise KBError(f"cannot encode axiom {ax!r}")
        return cnf

    def decode(self, assignment) -> FiniteInterpretation:
        dom = frozenset(range(self.size))
        concept_ext = {a: frozenset(d for d in range(self.size)
                                    if assignment.get(self.cvar[(a, d)]))
                       for a in self.concepts}
        role_ext = {r: {(d, e) for d in range(self.size)
                        for e in range(self.size)
                        if assignment.get(self.rvar[(r, d, e)])}
                    for r in self.roles}
        individual_map = {}
        for i in self.individuals:
            for d in range(self.size):
                if assignment.get(self.ivar[(i, d)]):
                    individual_map[i] = d
                    break
            else:
                individual_map[i] = 0  # unconstrained placement
        return FiniteInterpretation(dom, concept_ext, role_ext, individual_map)


def find_model(kb: KnowledgeBase, max_domain: int = 3):
    """Search for a model with at most ``max_domain`` elements.

    Returns a :class:`FiniteInterpretation` or None.  Any model returned has
    been verified against the direct semantic evaluator.
    """
    for size in range(1, max_domain + 1):
        enc = _Encoder(kb, size)
        cnf = enc.encode()
        if any(len(cl) == 0 for cl in cnf.clauses):
            continue
        assignment = _dpll(cnf.clauses, {})
        if assignment is not None:
            interp = enc.decode(assignment)
            if not satisfies_kb(interp, kb):
                raise AssertionError(
                    "oracle disagreement: decoded model fails direct check")
            return interp
    return None


# ---------------------------------------------------------------------------
# Exhaustive enumeration over tiny signatures
# ---------------------------------------------------------------------------

def all_interpretations(concepts, roles, individuals=(), max_size=2):
    """Yield every interpretation of the given symbols over domains of
    size 1..max_size.  Exponential; keep the signature tiny."""
    concepts = sorted(concepts)
    roles = sorted(roles)
    individuals = sorted(individuals)
    for size in range(1, max_size + 1):
        dom = list(range(size))
        concept_choices = [list(_powerset(dom)) for _ in concepts]
        pair_space = [(d, e) for d in dom for e in dom]
        role_choices = [list(_powerset(pair_space)) for _ in roles]
        ind_choices = [dom for _ in individuals]
        for cs in itertools.product(*concept_choices):
            for rs in itertools.product(*role_choices):
                for inds in itertools.product(*ind_choices):
                    yield FiniteInterpretation(
                        frozenset(dom),
                        dict(zip(concepts, (frozenset(c) for c in cs))),
                        dict(zip(roles, (set(r) for r in rs))),
                        dict(zip(individuals, inds)))


def _powerset(items):
    items = list(items)
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)
