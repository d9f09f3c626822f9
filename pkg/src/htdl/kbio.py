"""Reading and writing knowledge bases in an s-expression syntax.

Grammar (whitespace-insensitive, ``;`` starts a line comment)::

    kb        := (axiom | assertion)*
    axiom     := (gci C C) | (subrole R R) | (transitive R)
               | (disjoint-roles R R) | (reflexive R) | (irreflexive R)
               | (symmetric R) | (asymmetric R)
    assertion := (instance ind C) | (related ind R ind)
               | (same ind ind) | (different ind ind)
    C         := top | bottom | name | (not C) | (and C C+) | (or C C+)
               | (some R C) | (all R C) | (self R)
               | (atleast nat R C) | (atmost nat R C) | (oneof ind)
    R         := name | (inv name)

Parse errors carry a 1-based line/column location.  Symbols starting with
the reserved prefixes ``O%`` and ``Q%`` are rejected, as are number
restrictions over non-simple roles and cardinalities above the cap.
"""

from dataclasses import dataclass

from .model import (
    KnowledgeBase, Role,
    Top, Bottom, Atomic, Nominal, Not, And, Or, Exists, ForAll,
    SelfRestriction, AtLeast, AtMost, TOP, BOTTOM,
    GCI, SubRole, DisjointRoles, ReflexiveRole, IrreflexiveRole,
    SymmetricRole, AsymmetricRole, TransitiveRole,
    ConceptAssertion, RoleAssertion, SameIndividuals, DifferentIndividuals,
    is_simple_role, KBError,
)
from .clauses import NOMINAL_GUARD_PREFIX, FRESH_NAME_PREFIX

DEFAULT_NUMBER_CAP = 65536


@dataclass(frozen=True)
class SourceLocation:
    line: int
    column: int

    def __str__(self):
        return f"line {self.line}, column {self.column}"


class ParseError(KBError):
    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class SimplicityError(KBError):
    """A construct that requires a simple role uses a non-simple one."""


_DELIMS = set(" \t\r\n();")


class _Tokenizer:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, c):
        if c == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        self.pos += 1

    def location(self):
        return SourceLocation(self.line, self.col)

    def tokens(self):
        """Yield (kind, value, location) with kind in {'(', ')', 'sym'}."""
        text = self.text
        while self.pos < len(text):
            c = text[self.pos]
            if c in " \t\r\n":
                self._advance(c)
            elif c == ";":
                while self.pos < len(text) and text[self.pos] != "\n":
                    self._advance(text[self.pos])
            elif c in "()":
                loc = self.location()
                self._advance(c)
                yield (c, c, loc)
            else:
                loc = self.location()
                start = self.pos
                while self.pos < len(text) and text[self.pos] not in _DELIMS:
                    self._advance(text[self.pos])
                yield ("sym", text[start:self.pos], loc)


class _Parser:
    def __init__(self, text, number_cap=DEFAULT_NUMBER_CAP):
        self.stream = _Tokenizer(text).tokens()
        self.number_cap = number_cap
        self.peeked = None
        self.last_loc = SourceLocation(1, 1)

    def next_token(self):
        if self.peeked is not None:
            tok, self.peeked = self.peeked, None
        else:
            tok = next(self.stream, None)
        if tok is not None:
            self.last_loc = tok[2]
        return tok

    def peek(self):
        if self.peeked is None:
            self.peeked = next(self.stream, None)
        return self.peeked

    def expect(self, kind, what):
        tok = self.next_token()
        if tok is None:
            raise ParseError(f"unexpected end of input, expected {what}",
                             self.last_loc)
        if tok[0] != kind:
            raise ParseError(f"expected {what}, found {tok[1]!r}", tok[2])
        return tok

    def symbol(self, what="a name"):
        tok = self.expect("sym", what)
        name = tok[1]
        if name.startswith((NOMINAL_GUARD_PREFIX, FRESH_NAME_PREFIX)):
            raise ParseError(
                f"symbol {name!r} uses a reserved prefix", tok[2])
        return name, tok[2]

    def natural(self, what="a number"):
        tok = self.expect("sym", what)
        try:
            n = int(tok[1])
        except ValueError:
            raise ParseError(f"expected {what}, found {tok[1]!r}", tok[2])
        if n < 0:
            raise ParseError(f"number {n} may not be negative", tok[2])
        if n > self.number_cap:
            raise ParseError(
                f"number {n} exceeds the cap of {self.number_cap}", tok[2])
        return n, tok[2]

    def role(self):
        tok = self.next_token()
        if tok is None:
            raise ParseError("unexpected end of input, expected a role",
                             self.last_loc)
        if tok[0] == "sym":
            name = tok[1]
            if name.startswith((NOMINAL_GUARD_PREFIX, FRESH_NAME_PREFIX)):
                raise ParseError(
                    f"symbol {name!r} uses a reserved prefix", tok[2])
            return Role(name)
        if tok[0] == "(":
            head = self.expect("sym", "a role operator")
            if head[1] != "inv":
                raise ParseError(
                    f"expected 'inv', found {head[1]!r}", head[2])
            name, _ = self.symbol("a role name")
            self.expect(")", "')'")
            return Role(name, inverse=True)
        raise ParseError(f"expected a role, found {tok[1]!r}", tok[2])

    def concept(self):
        tok = self.next_token()
        if tok is None:
            raise ParseError("unexpected end of input, expected a concept",
                             self.last_loc)
        if tok[0] == "sym":
            name = tok[1]
            if name == "top":
                return TOP
            if name == "bottom":
                return BOTTOM
            if name.startswith((NOMINAL_GUARD_PREFIX, FRESH_NAME_PREFIX)):
                raise ParseError(
                    f"symbol {name!r} uses a reserved prefix", tok[2])
            return Atomic(name)
        if tok[0] == ")":
            raise ParseError("unexpected ')' where a concept was expected",
                             tok[2])
        head = self.expect("sym", "a concept operator")
        op, loc = head[1], head[2]
        if op == "not":
            c = self.concept()
            self.expect(")", "')'")
            return Not(c)
        if op in ("and", "or"):
            args = [self.concept(), self.concept()]
            while self.peek() is not None and self.peek()[0] != ")":
                args.append(self.concept())
            self.expect(")", "')'")
            return (And if op == "and" else Or)(tuple(args))
        if op in ("some", "all"):
            r = self.role()
            c = self.concept()
            self.expect(")", "')'")
            return (Exists if op == "some" else ForAll)(r, c)
        if op == "self":
            r = self.role()
            self.expect(")", "')'")
            return SelfRestriction(r)
        if op in ("atleast", "atmost"):
            n, nloc = self.natural()
            if op == "atleast" and n < 1:
                raise ParseError("atleast requires a count of at least 1",
                                 nloc)
            r = self.role()
            c = self.concept()
            self.expect(")", "')'")
            return (AtLeast if op == "atleast" else AtMost)(n, r, c)
        if op == "oneof":
            ind, _ = self.symbol("an individual")
            self.expect(")", "')'")
            return Nominal(ind)
        raise ParseError(f"unknown concept operator {op!r}", loc)

    def toplevel(self):
        rbox, tbox, abox = [], [], []
        while True:
            tok = self.next_token()
            if tok is None:
                break
            if tok[0] != "(":
                raise ParseError(
                    f"expected '(' at top level, found {tok[1]!r}", tok[2])
            head = self.expect("sym", "an axiom keyword")
            op, loc = head[1], head[2]
            if op == "gci":
                lhs = self.concept()
                rhs = self.concept()
                tbox.append(GCI(lhs, rhs))
            elif op == "subrole":
                rbox.append(SubRole(self.role(), self.role()))
            elif op == "transitive":
                rbox.append(TransitiveRole(self.role()))
            elif op == "disjoint-roles":
                rbox.append(DisjointRoles(self.role(), self.role()))
            elif op == "reflexive":
                rbox.append(ReflexiveRole(self.role()))
            elif op == "irreflexive":
                rbox.append(IrreflexiveRole(self.role()))
            elif op == "symmetric":
                rbox.append(SymmetricRole(self.role()))
            elif op == "asymmetric":
                rbox.append(AsymmetricRole(self.role()))
            elif op == "instance":
                ind, _ = self.symbol("an individual")
                abox.append(ConceptAssertion(self.concept(), ind))
            elif op == "related":
                s, _ = self.symbol("an individual")
                r = self.role()
                o, _ = self.symbol("an individual")
                abox.append(RoleAssertion(r, s, o))
            elif op == "same":
                a, _ = self.symbol("an individual")
                b, _ = self.symbol("an individual")
                abox.append(SameIndividuals(a, b))
            elif op == "different":
                a, _ = self.symbol("an individual")
                b, _ = self.symbol("an individual")
                abox.append(DifferentIndividuals(a, b))
            else:
                raise ParseError(f"unknown axiom keyword {op!r}", loc)
            self.expect(")", "')'")
        return KnowledgeBase(tuple(rbox), tuple(tbox), tuple(abox))


def _check_simplicity(kb: KnowledgeBase):
    def walk(c, ax):
        if isinstance(c, Not):
            walk(c.concept, ax)
        elif isinstance(c, (And, Or)):
            for a in c.args:
                walk(a, ax)
        elif isinstance(c, (Exists, ForAll)):
            walk(c.filler, ax)
        elif isinstance(c, (AtLeast, AtMost)):
            if not is_simple_role(c.role, kb.rbox):
                raise SimplicityError(
                    f"number restriction over non-simple role {c.role} "
                    f"in {ax!r}")
            walk(c.filler, ax)
        elif isinstance(c, SelfRestriction):
            if not is_simple_role(c.role, kb.rbox):
                raise SimplicityError(
                    f"self restriction over non-simple role {c.role} "
                    f"in {ax!r}")

    for ax in kb.tbox:
        walk(ax.lhs, ax)
        walk(ax.rhs, ax)
    for ax in kb.abox:
        if isinstance(ax, ConceptAssertion):
            walk(ax.concept, ax)
    for ax in kb.rbox:
        if isinstance(ax, DisjointRoles):
            for r in (ax.r1, ax.r2):
                if not is_simple_role(r, kb.rbox):
                    raise SimplicityError(
                        f"role disjointness over non-simple role {r}")
        elif isinstance(ax, (IrreflexiveRole, AsymmetricRole)):
            if not is_simple_role(ax.role, kb.rbox):
                raise SimplicityError(
                    f"{type(ax).__name__} over non-simple role {ax.role}")


def parse_kb(text: str, number_cap: int = DEFAULT_NUMBER_CAP,
             check_simplicity: bool = True) -> KnowledgeBase:
    kb = _Parser(text, number_cap).toplevel()
    if check_simplicity:
        _check_simplicity(kb)
    return kb


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _role_text(r: Role) -> str:
    return f"(inv {r.name})" if r.inverse else r.name


def _concept_text(c) -> str:
    if isinstance(c, Top):
        return "top"
    if isinstance(c, Bottom):
        return "bottom"
    if isinstance(c, Atomic):
        return c.name
    if isinstance(c, Nominal):
        return f"(oneof {c.individual})"
    if isinstance(c, Not):
        return f"(not {_concept_text(c.concept)})"
    if isinstance(c, And):
        return "(and %s)" % " ".join(_concept_text(a) for a in c.args)
    if isinstance(c, Or):
        return "(or %s)" % " ".join(_concept_text(a) for a in c.args)
    if isinstance(c, Exists):
        return f"(some {_role_text(c.role)} {_concept_text(c.filler)})"
    if isinstance(c, ForAll):
        return f"(all {_role_text(c.role)} {_concept_text(c.filler)})"
    if isinstance(c, SelfRestriction):
        return f"(self {_role_text(c.role)})"
    if isinstance(c, AtLeast):
        return f"(atleast {c.n} {_role_text(c.role)} " \
               f"{_concept_text(c.filler)})"
    if isinstance(c, AtMost):
        return f"(atmost {c.n} {_role_text(c.role)} " \
               f"{_concept_text(c.filler)})"
    raise KBError(f"cannot serialize concept {c!r}")


def _axiom_text(ax) -> str:
    if isinstance(ax, GCI):
        return f"(gci {_concept_text(ax.lhs)} {_concept_text(ax.rhs)})"
    if isinstance(ax, SubRole):
        return f"(subrole {_role_text(ax.sub)} {_role_text(ax.sup)})"
    if isinstance(ax, TransitiveRole):
        return f"(transitive {_role_text(ax.role)})"
    if isinstance(ax, DisjointRoles):
        return f"(disjoint-roles {_role_text(ax.r1)} {_role_text(ax.r2)})"
    if isinstance(ax, ReflexiveRole):
        return f"(reflexive {_role_text(ax.role)})"
    if isinstance(ax, IrreflexiveRole):
        return f"(irreflexive {_role_text(ax.role)})"
    if isinstance(ax, SymmetricRole):
        return f"(symmetric {_role_text(ax.role)})"
    if isinstance(ax, AsymmetricRole):
        return f"(asymmetric {_role_text(ax.role)})"
    if isinstance(ax, ConceptAssertion):
        return f"(instance {ax.individual} {_concept_text(ax.concept)})"
    if isinstance(ax, RoleAssertion):
        return f"(related {ax.subject} {_role_text(ax.role)} {ax.object})"
    if isinstance(ax, SameIndividuals):
        return f"(same {ax.a} {ax.b})"
    if isinstance(ax, DifferentIndividuals):
        return f"(different {ax.a} {ax.b})"
    raise KBError(f"cannot serialize axiom {ax!r}")


def serialize_kb(kb: KnowledgeBase) -> str:
    lines = [_axiom_text(ax) for ax in kb.axioms()]
    return "\n".join(lines) + ("\n" if lines else "")
