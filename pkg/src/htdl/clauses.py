"""Clausal representation used by the derivation engine.

A clause has an antecedent (conjunction of atoms) and a consequent
(disjunction of atoms).  Variables come in three kinds: a single center
variable ``x``, branch variables ``y1, y2, ...`` that stand for direct
neighbours of ``x``, and variables ``z1, z2, ...`` reserved for individuals
carrying a nominal-guard concept.  Equalities in the consequent may carry an
annotation recording the at-most restriction they originate from; the
annotation is what later allows new root individuals to be introduced when
such an equality connects an individual to a non-neighbour.
"""

from dataclasses import dataclass

from .model import (
    Role, Top, Bottom, Atomic, Not, AtLeast, is_literal, concept_key,
)

NOMINAL_GUARD_PREFIX = "O%"
FRESH_NAME_PREFIX = "Q%"


@dataclass(frozen=True)
class Var:
    kind: str   # "x", "y" or "z"
    index: int  # 0 for the center variable

    def __str__(self):
        return "x" if self.kind == "x" else f"{self.kind}{self.index}"


X = Var("x", 0)


@dataclass(frozen=True)
class ConceptAtom:
    concept: object  # literal concept, guard, or AtLeast (consequent only)
    term: object

    def __str__(self):
        return f"{self.concept}({self.term})"


@dataclass(frozen=True)
class RoleAtom:
    role: str  # atomic role name; direction is explicit in the term order
    s: object
    t: object

    def __str__(self):
        return f"{self.role}({self.s},{self.t})"


@dataclass(frozen=True)
class Annotation:
    """Origin of an annotated equality: the at-most concept <= n role.filler
    instantiated at ``at``."""
    at: object
    n: int
    role: Role
    filler: object

    def __str__(self):
        return "@{<=%d %s.%s}^%s" % (self.n, self.role, self.filler, self.at)


@dataclass(frozen=True)
class EqAtom:
    s: object
    t: object
    annotation: object = None  # Annotation or None

    def __str__(self):
        base = f"{self.s} == {self.t}"
        return base + (f" {self.annotation}" if self.annotation else "")


@dataclass(frozen=True)
class HTClause:
    antecedent: tuple
    consequent: tuple

    def __str__(self):
        lhs = " ^ ".join(str(a) for a in self.antecedent) or "true"
        rhs = " v ".join(str(a) for a in self.consequent) or "false"
        return f"{lhs} -> {rhs}"


def ar(role: Role, s, t) -> RoleAtom:
    """Atom asserting that ``t`` is a ``role``-neighbour of ``s``; inverse
    roles are normalized away by swapping the arguments."""
    if role.inverse:
        return RoleAtom(role.name, t, s)
    return RoleAtom(role.name, s, t)


def atom_vars(atom):
    if isinstance(atom, ConceptAtom):
        return [atom.term]
    if isinstance(atom, RoleAtom):
        return [atom.s, atom.t]
    out = [atom.s, atom.t]
    if atom.annotation is not None:
        out.append(atom.annotation.at)
    return out


def clause_vars(clause: HTClause):
    seen = []
    for atom in clause.antecedent + clause.consequent:
        for v in atom_vars(atom):
            if isinstance(v, Var) and v not in seen:
                seen.append(v)
    return seen


def is_guard_concept(c) -> bool:
    return isinstance(c, Atomic) and c.name.startswith(NOMINAL_GUARD_PREFIX)


def _literal_non_guard(c) -> bool:
    if isinstance(c, (Top, Bottom)):
        return True
    if isinstance(c, Atomic):
        return not is_guard_concept(c)
    if isinstance(c, Not) and isinstance(c.concept, Atomic):
        return not is_guard_concept(c.concept)
    return False


# ---------------------------------------------------------------------------
# Validity
# ---------------------------------------------------------------------------

def validate_ht_clause(clause: HTClause):
    """Return a list of violation messages (empty when the clause is valid).

    Checks the shape restrictions the engine relies on: atom forms in both
    sides, guardedness of branch and nominal variables, and the subclause
    shape around every annotated equality (n+1 private branch variables that
    are role neighbours of the annotation's center and occur nowhere else).
    """
    problems = []

    def is_x(t):
        return isinstance(t, Var) and t.kind == "x"

    def is_y(t):
        return isinstance(t, Var) and t.kind == "y"

    def is_z(t):
        return isinstance(t, Var) and t.kind == "z"

    for atom in clause.antecedent + clause.consequent:
        for v in atom_vars(atom):
            if not isinstance(v, Var):
                problems.append(f"non-variable term {v} in {atom}")

    y_guarded = set()
    z_guarded = set()
    for atom in clause.antecedent:
        if isinstance(atom, RoleAtom):
            if is_x(atom.s) and is_y(atom.t):
                y_guarded.add(atom.t)
            elif is_y(atom.s) and is_x(atom.t):
                y_guarded.add(atom.s)
            elif is_x(atom.s) and is_x(atom.t):
                pass
            else:
                problems.append(f"antecedent role atom {atom} does not "
                                "connect the center variable to a neighbour")
        elif isinstance(atom, ConceptAtom):
            if is_z(atom.term):
                if is_guard_concept(atom.concept):
                    z_guarded.add(atom.term)
                elif not isinstance(atom.concept, Atomic):
                    problems.append(f"antecedent concept atom {atom} on a "
                                    "nominal variable must be atomic")
            elif is_x(atom.term) or is_y(atom.term):
                if not isinstance(atom.concept, Atomic):
                    problems.append(
                        f"antecedent concept atom {atom} must be atomic")
            else:
                problems.append(f"bad term in antecedent atom {atom}")
        else:
            problems.append(f"equality {atom} not allowed in antecedent")

    for atom in clause.antecedent:
        if isinstance(atom, ConceptAtom) and is_z(atom.term) and \
                atom.term not in z_guarded:
            problems.append(f"nominal variable {atom.term} lacks a guard atom")

    annotations = {}
    for atom in clause.consequent:
        if isinstance(atom, ConceptAtom):
            c = atom.concept
            ok_term = is_x(atom.term) or is_y(atom.term)
            if isinstance(c, AtLeast):
                if not (is_x(atom.term) and _literal_non_guard(c.filler)):
                    problems.append(f"bad at-least atom {atom}")
            elif not (_literal_non_guard(c) and ok_term):
                problems.append(f"bad consequent concept atom {atom}")
        elif isinstance(atom, RoleAtom):
            s, t = atom.s, atom.t
            ok = (is_x(s) and (is_x(t) or is_y(t) or is_z(t))) or \
                 ((is_y(s) or is_z(s)) and is_x(t))
            if not ok:
                problems.append(f"bad consequent role atom {atom}")
        elif isinstance(atom, EqAtom):
            if atom.annotation is not None:
                if not (is_y(atom.s) and is_y(atom.t) and
                        is_x(atom.annotation.at)):
                    problems.append(f"bad annotated equality {atom}")
                else:
                    annotations.setdefault(atom.annotation, []).append(atom)
            else:
                if not ((is_x(atom.s) and is_z(atom.t)) or
                        (is_z(atom.s) and is_x(atom.t))):
                    problems.append(f"unannotated equality {atom} must link "
                                    "the center to a nominal variable")
        else:
            problems.append(f"unknown consequent atom {atom}")

    for atom in clause.consequent:
        for v in atom_vars(atom):
            if is_y(v) and v not in y_guarded:
                problems.append(f"branch variable {v} in consequent is not "
                                "guarded by an antecedent role atom")

    # Shape of annotated-equality subclauses.
    for ann, eqs in annotations.items():
        group = set()
        for e in eqs:
            group.add(e.s)
            group.add(e.t)
        expected = ann.n + 1
        if len(group) != expected:
            problems.append(
                f"annotation {ann} covers {len(group)} variables, "
                f"expected {expected}")
            continue
        pairs = {frozenset((e.s, e.t)) for e in eqs}
        want = {frozenset((a, b)) for a in group for b in group if a != b}
        if pairs != want:
            problems.append(f"annotation {ann} equalities are not all pairs")
        filler = ann.filler
        for v in sorted(group, key=str):
            has_role = any(isinstance(a, RoleAtom) and
                           a == ar(ann.role, Var("x", 0), v)
                           for a in clause.antecedent)
            if not has_role:
                problems.append(f"annotation {ann}: variable {v} is not a "
                                f"{ann.role}-neighbour of the center")
            if isinstance(filler, Atomic):
                if ConceptAtom(filler, v) not in clause.antecedent:
                    problems.append(f"annotation {ann}: missing antecedent "
                                    f"atom {filler}({v})")
            elif isinstance(filler, Not):
                if ConceptAtom(filler.concept, v) not in clause.consequent:
                    problems.append(f"annotation {ann}: missing consequent "
                                    f"atom {filler.concept}({v})")
            # filler Top needs no concept atoms
        # Privacy: the grouped variables occur nowhere else.
        allowed = set()
        for v in group:
            allowed.add(ar(ann.role, Var("x", 0), v))
            if isinstance(filler, Atomic):
                allowed.add(ConceptAtom(filler, v))
            elif isinstance(filler, Not):
                allowed.add(ConceptAtom(filler.concept, v))
        for atom in clause.antecedent + clause.consequent:
            if isinstance(atom, EqAtom) and atom.annotation == ann:
                continue
            if atom in allowed:
                continue
            for v in atom_vars(atom):
                if v in group:
                    problems.append(f"annotation {ann}: variable {v} leaks "
                                    f"into atom {atom}")
    return problems


# ---------------------------------------------------------------------------
# Simplicity (single-blocking eligibility)
# ---------------------------------------------------------------------------

def is_simple_ht_clause(clause: HTClause) -> bool:
    """True when the clause never inspects or constrains a predecessor of the
    center variable: no incoming role atoms in the antecedent, and consequent
    role atoms only point from the center outward."""

    def is_x(t):
        return isinstance(t, Var) and t.kind == "x"

    def is_y(t):
        return isinstance(t, Var) and t.kind == "y"

    for atom in clause.antecedent:
        if isinstance(atom, RoleAtom):
            if is_y(atom.s) and is_x(atom.t):
                return False
    for atom in clause.consequent:
        if isinstance(atom, RoleAtom):
            if not is_x(atom.s):
                return False
        elif isinstance(atom, ConceptAtom) and \
                isinstance(atom.concept, AtLeast):
            if atom.concept.role.inverse:
                return False
        elif isinstance(atom, EqAtom) and atom.annotation is not None:
            if atom.annotation.role.inverse:
                return False
    return True


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render_clause(clause: HTClause) -> str:
    return str(clause)


def serialize_clauses(clauses, assertions=()) -> str:
    """Deterministic text form: clauses first, then ground assertions, each
    sorted lexicographically."""
    lines = sorted(str(c) for c in clauses)
    lines.extend(sorted(str(a) for a in assertions))
    return "\n".join(lines) + ("\n" if lines else "")
