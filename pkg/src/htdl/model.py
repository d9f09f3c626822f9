"""Core data model: roles, concepts, axioms, knowledge bases and finite
interpretations.

Concepts and roles are immutable values; structural equality doubles as
syntactic identity everywhere else in the package (normalization caches,
clause building, labels used for blocking).
"""

from dataclasses import dataclass
from typing import Union


class KBError(Exception):
    """Base class for everything this package raises on bad input."""


class UnknownSymbolError(KBError):
    """An interpretation was asked about a symbol it does not interpret."""


# ---------------------------------------------------------------------------
# Roles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Role:
    """An atomic role or the inverse of one.  Inverses never nest."""
    name: str
    inverse: bool = False

    def inv(self) -> "Role":
        return Role(self.name, not self.inverse)

    def __str__(self) -> str:
        return f"inv({self.name})" if self.inverse else self.name


# ---------------------------------------------------------------------------
# Concepts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Top:
    def __str__(self):
        return "top"


@dataclass(frozen=True)
class Bottom:
    def __str__(self):
        return "bottom"


@dataclass(frozen=True)
class Atomic:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Nominal:
    individual: str

    def __str__(self):
        return "{%s}" % self.individual


@dataclass(frozen=True)
class Not:
    concept: "Concept"

    def __str__(self):
        return f"not({self.concept})"


@dataclass(frozen=True)
class And:
    args: tuple

    def __str__(self):
        return "and(%s)" % ", ".join(str(a) for a in self.args)


@dataclass(frozen=True)
class Or:
    args: tuple

    def __str__(self):
        return "or(%s)" % ", ".join(str(a) for a in self.args)


@dataclass(frozen=True)
class Exists:
    role: Role
    filler: "Concept"

    def __str__(self):
        return f"some({self.role}, {self.filler})"


@dataclass(frozen=True)
class ForAll:
    role: Role
    filler: "Concept"

    def __str__(self):
        return f"all({self.role}, {self.filler})"


@dataclass(frozen=True)
class SelfRestriction:
    role: Role

    def __str__(self):
        return f"self({self.role})"


@dataclass(frozen=True)
class AtLeast:
    n: int
    role: Role
    filler: "Concept"

    def __str__(self):
        return f">={self.n} {self.role}.{self.filler}"


@dataclass(frozen=True)
class AtMost:
    n: int
    role: Role
    filler: "Concept"

    def __str__(self):
        return f"<={self.n} {self.role}.{self.filler}"


Concept = Union[Top, Bottom, Atomic, Nominal, Not, And, Or,
                Exists, ForAll, SelfRestriction, AtLeast, AtMost]

TOP = Top()
BOTTOM = Bottom()


def is_literal(c) -> bool:
    """True for top, bottom, atomic names and negated atomic names."""
    return isinstance(c, (Top, Bottom, Atomic)) or \
        (isinstance(c, Not) and isinstance(c.concept, Atomic))


def concept_key(c) -> str:
    """Canonical string for a concept, stable across runs."""
    return str(c)


# ---------------------------------------------------------------------------
# Negation normal form
# ---------------------------------------------------------------------------

def _flatten_and(args):
    out = []
    for a in args:
        if isinstance(a, And):
            out.extend(a.args)
        elif isinstance(a, Top):
            continue
        elif isinstance(a, Bottom):
            return BOTTOM
        else:
            out.append(a)
    seen, uniq = set(), []
    for a in out:
        if a not in seen:
            seen.add(a)
            uniq.append(a)
    if not uniq:
        return TOP
    if len(uniq) == 1:
        return uniq[0]
    return And(tuple(uniq))


def _flatten_or(args):
    out = []
    for a in args:
        if isinstance(a, Or):
            out.extend(a.args)
        elif isinstance(a, Bottom):
            continue
        elif isinstance(a, Top):
            return TOP
        else:
            out.append(a)
    seen, uniq = set(), []
    for a in out:
        if a not in seen:
            seen.add(a)
            uniq.append(a)
    if not uniq:
        return BOTTOM
    if len(uniq) == 1:
        return uniq[0]
    return Or(tuple(uniq))


def nnf(c):
    """Push negation down to atomic concepts, nominals and self restrictions.

    Conjunctions and disjunctions are flattened and trivial occurrences of
    top/bottom are simplified away, so the result of ``nnf`` never contains
    a redundant top/bottom member inside an and/or.
    """
    if isinstance(c, (Top, Bottom, Atomic, Nominal, SelfRestriction)):
        return c
    if isinstance(c, And):
        return _flatten_and(tuple(nnf(a) for a in c.args))
    if isinstance(c, Or):
        return _flatten_or(tuple(nnf(a) for a in c.args))
    if isinstance(c, Exists):
        return Exists(c.role, nnf(c.filler))
    if isinstance(c, ForAll):
        return ForAll(c.role, nnf(c.filler))
    if isinstance(c, AtLeast):
        return AtLeast(c.n, c.role, nnf(c.filler))
    if isinstance(c, AtMost):
        return AtMost(c.n, c.role, nnf(c.filler))
    if isinstance(c, Not):
        inner = c.concept
        if isinstance(inner, Top):
            return BOTTOM
        if isinstance(inner, Bottom):
            return TOP
        if isinstance(inner, (Atomic, Nominal, SelfRestriction)):
            return c
        if isinstance(inner, Not):
            return nnf(inner.concept)
        if isinstance(inner, And):
            return _flatten_or(tuple(nnf(Not(a)) for a in inner.args))
        if isinstance(inner, Or):
            return _flatten_and(tuple(nnf(Not(a)) for a in inner.args))
        if isinstance(inner, Exists):
            return ForAll(inner.role, nnf(Not(inner.filler)))
        if isinstance(inner, ForAll):
            return Exists(inner.role, nnf(Not(inner.filler)))
        if isinstance(inner, AtLeast):
            if inner.n <= 1:
                # "fewer than one" successor means none at all
                return AtMost(0, inner.role, nnf(inner.filler)) if inner.n == 1 \
                    else BOTTOM
            return AtMost(inner.n - 1, inner.role, nnf(inner.filler))
        if isinstance(inner, AtMost):
            return AtLeast(inner.n + 1, inner.role, nnf(inner.filler))
    raise KBError(f"cannot normalize concept {c!r}")


def neg_dot(c):
    """The standard shortcut for nnf of a negation."""
    return nnf(Not(c))


# ---------------------------------------------------------------------------
# Axioms and assertions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GCI:
    lhs: "Concept"
    rhs: "Concept"


@dataclass(frozen=True)
class SubRole:
    sub: Role
    sup: Role


@dataclass(frozen=True)
class DisjointRoles:
    r1: Role
    r2: Role


@dataclass(frozen=True)
class ReflexiveRole:
    role: Role


@dataclass(frozen=True)
class IrreflexiveRole:
    role: Role


@dataclass(frozen=True)
class SymmetricRole:
    role: Role


@dataclass(frozen=True)
class AsymmetricRole:
    role: Role


@dataclass(frozen=True)
class TransitiveRole:
    role: Role


@dataclass(frozen=True)
class ConceptAssertion:
    concept: "Concept"
    individual: str


@dataclass(frozen=True)
class RoleAssertion:
    role: Role
    subject: str
    object: str


@dataclass(frozen=True)
class SameIndividuals:
    a: str
    b: str


@dataclass(frozen=True)
class DifferentIndividuals:
    a: str
    b: str


RBOX_TYPES = (SubRole, DisjointRoles, ReflexiveRole, IrreflexiveRole,
              SymmetricRole, AsymmetricRole, TransitiveRole)
ABOX_TYPES = (ConceptAssertion, RoleAssertion, SameIndividuals,
              DifferentIndividuals)


@dataclass(frozen=True)
class KnowledgeBase:
    rbox: tuple = ()
    tbox: tuple = ()
    abox: tuple = ()

    def axioms(self):
        return self.rbox + self.tbox + self.abox

    def signature(self):
        """(atomic concept names, role names, individual names)."""
        concepts, roles, individuals = set(), set(), set()

        def walk(c):
            if isinstance(c, Atomic):
                concepts.add(c.name)
            elif isinstance(c, Nominal):
                individuals.add(c.individual)
            elif isinstance(c, Not):
                walk(c.concept)
            elif isinstance(c, (And, Or)):
                for a in c.args:
                    walk(a)
            elif isinstance(c, (Exists, ForAll, AtLeast, AtMost)):
                roles.add(c.role.name)
                walk(c.filler)
            elif isinstance(c, SelfRestriction):
                roles.add(c.role.name)

        for ax in self.rbox:
            if isinstance(ax, SubRole):
                roles.add(ax.sub.name)
                roles.add(ax.sup.name)
            elif isinstance(ax, DisjointRoles):
                roles.add(ax.r1.name)
                roles.add(ax.r2.name)
            else:
                roles.add(ax.role.name)
        for ax in self.tbox:
            walk(ax.lhs)
            walk(ax.rhs)
        for ax in self.abox:
            if isinstance(ax, ConceptAssertion):
                walk(ax.concept)
                individuals.add(ax.individual)
            elif isinstance(ax, RoleAssertion):
                roles.add(ax.role.name)
                individuals.add(ax.subject)
                individuals.add(ax.object)
            else:
                individuals.add(ax.a)
                individuals.add(ax.b)
        return concepts, roles, individuals


# ---------------------------------------------------------------------------
# Role hierarchy utilities
# ---------------------------------------------------------------------------

class SubRoleClosure:
    """Reflexive-transitive closure of the declared role hierarchy.

    The closure is seeded with both the declared inclusions and their
    inverse-symmetric counterparts, so ``holds(inv(r), inv(s))`` follows from
    ``holds(r, s)``.
    """

    def __init__(self, rbox):
        pairs = set()
        universe = set()
        for ax in rbox:
            if isinstance(ax, SubRole):
                pairs.add((ax.sub, ax.sup))
                pairs.add((ax.sub.inv(), ax.sup.inv()))
                universe.update((ax.sub, ax.sup, ax.sub.inv(), ax.sup.inv()))
        changed = True
        while changed:
            changed = False
            for (a, b) in list(pairs):
                for (c, d) in list(pairs):
                    if b == c and (a, d) not in pairs:
                        pairs.add((a, d))
                        changed = True
        self.pairs = frozenset(pairs)
        self.universe = frozenset(universe)

    def holds(self, sub: Role, sup: Role) -> bool:
        return sub == sup or (sub, sup) in self.pairs

    def subroles_of(self, sup: Role):
        out = {sup}
        for (a, b) in self.pairs:
            if b == sup:
                out.add(a)
        return out

    def superroles_of(self, sub: Role):
        out = {sub}
        for (a, b) in self.pairs:
            if a == sub:
                out.add(b)
        return out


def transitive_roles(rbox):
    """Roles that behave transitively, taking the hierarchy into account.

    A role R is in the result if some role R' is declared transitive (or its
    inverse is) with R' equivalent to R under the subrole closure.
    """
    closure = SubRoleClosure(rbox)
    declared = set()
    for ax in rbox:
        if isinstance(ax, TransitiveRole):
            declared.add(ax.role)
            declared.add(ax.role.inv())
    out = set()
    candidates = set(closure.universe) | declared
    for r in candidates:
        for rp in candidates:
            if closure.holds(rp, r) and closure.holds(r, rp) and \
                    (rp in declared or rp.inv() in declared):
                out.add(r)
                break
    return out


def is_simple_role(role: Role, rbox) -> bool:
    """A role is simple when no transitive role is below it."""
    closure = SubRoleClosure(rbox)
    for t in transitive_roles(rbox):
        if closure.holds(t, role):
            return False
    return True


# ---------------------------------------------------------------------------
# Finite interpretations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteInterpretation:
    """An explicit finite model: domain, extensions, individual mapping."""
    domain: frozenset
    concept_ext: dict = None
    role_ext: dict = None
    individual_map: dict = None

    def concept(self, name):
        if name not in self.concept_ext:
            raise UnknownSymbolError(f"concept {name!r} is not interpreted")
        return self.concept_ext[name]

    def role_pairs(self, role: Role):
        if role.name not in self.role_ext:
            raise UnknownSymbolError(f"role {role.name!r} is not interpreted")
        pairs = self.role_ext[role.name]
        if role.inverse:
            return {(b, a) for (a, b) in pairs}
        return set(pairs)

    def individual(self, name):
        if name not in self.individual_map:
            raise UnknownSymbolError(f"individual {name!r} is not interpreted")
        return self.individual_map[name]


def eval_concept(interp: FiniteInterpretation, c) -> frozenset:
    """Extension of an arbitrary concept in a finite interpretation."""
    dom = interp.domain
    if isinstance(c, Top):
        return frozenset(dom)
    if isinstance(c, Bottom):
        return frozenset()
    if isinstance(c, Atomic):
        return frozenset(interp.concept(c.name))
    if isinstance(c, Nominal):
        return frozenset({interp.individual(c.individual)})
    if isinstance(c, Not):
        return frozenset(dom) - eval_concept(interp, c.concept)
    if isinstance(c, And):
        out = frozenset(dom)
        for a in c.args:
            out &= eval_concept(interp, a)
        return out
    if isinstance(c, Or):
        out = frozenset()
        for a in c.args:
            out |= eval_concept(interp, a)
        return out
    if isinstance(c, SelfRestriction):
        pairs = interp.role_pairs(c.role)
        return frozenset(d for d in dom if (d, d) in pairs)
    if isinstance(c, (Exists, ForAll, AtLeast, AtMost)):
        pairs = interp.role_pairs(c.role)
        filler = eval_concept(interp, c.filler)
        counts = {d: 0 for d in dom}
        for (a, b) in pairs:
            if b in filler:
                counts[a] += 1
        if isinstance(c, Exists):
            return frozenset(d for d in dom if counts[d] >= 1)
        if isinstance(c, ForAll):
            bad = {a for (a, b) in pairs if b not in filler}
            return frozenset(dom) - frozenset(bad)
        if isinstance(c, AtLeast):
            return frozenset(d for d in dom if counts[d] >= c.n)
        return frozenset(d for d in dom if counts[d] <= c.n)
    raise KBError(f"cannot evaluate concept {c!r}")


def _is_transitive(pairs) -> bool:
    return all((a, d) in pairs
               for (a, b) in pairs for (c, d) in pairs if b == c)


def satisfies_axiom(interp: FiniteInterpretation, ax) -> bool:
    if isinstance(ax, GCI):
        return eval_concept(interp, ax.lhs) <= eval_concept(interp, ax.rhs)
    if isinstance(ax, SubRole):
        return interp.role_pairs(ax.sub) <= interp.role_pairs(ax.sup)
    if isinstance(ax, DisjointRoles):
        return not (interp.role_pairs(ax.r1) & interp.role_pairs(ax.r2))
    if isinstance(ax, ReflexiveRole):
        pairs = interp.role_pairs(ax.role)
        return all((d, d) in pairs for d in interp.domain)
    if isinstance(ax, IrreflexiveRole):
        pairs = interp.role_pairs(ax.role)
        return all((d, d) not in pairs for d in interp.domain)
    if isinstance(ax, SymmetricRole):
        pairs = interp.role_pairs(ax.role)
        return all((b, a) in pairs for (a, b) in pairs)
    if isinstance(ax, AsymmetricRole):
        pairs = interp.role_pairs(ax.role)
        return all((b, a) not in pairs for (a, b) in pairs)
    if isinstance(ax, TransitiveRole):
        return _is_transitive(interp.role_pairs(ax.role))
    if isinstance(ax, ConceptAssertion):
        return interp.individual(ax.individual) in \
            eval_concept(interp, ax.concept)
    if isinstance(ax, RoleAssertion):
        return (interp.individual(ax.subject), interp.individual(ax.object)) \
            in interp.role_pairs(ax.role)
    if isinstance(ax, SameIndividuals):
        return interp.individual(ax.a) == interp.individual(ax.b)
    if isinstance(ax, DifferentIndividuals):
        return interp.individual(ax.a) != interp.individual(ax.b)
    raise KBError(f"cannot evaluate axiom {ax!r}")


def satisfies_kb(interp: FiniteInterpretation, kb: KnowledgeBase) -> bool:
    return all(satisfies_axiom(interp, ax) for ax in kb.axioms())
