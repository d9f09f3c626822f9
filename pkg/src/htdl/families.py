"""Parameterized benchmark knowledge bases.

``k1``..``k12`` are the families exposed by the command line generator;
the remaining constructors build small fixed knowledge bases exercising
characteristic behaviours of the calculus (merging cascades, root
introduction, blocking-strategy counterexamples, infinite-model inputs).
"""

from .model import (
    KnowledgeBase, Role,
    Atomic, Not, And, Or, Exists, ForAll, Nominal, AtLeast, AtMost, TOP,
    GCI, ConceptAssertion, RoleAssertion,
)


def k1(n: int) -> KnowledgeBase:
    """An unsatisfiable propagation chain: membership in A travels backward
    along 2n role edges into an individual asserted not to be in A."""
    if n < 1:
        raise ValueError("n must be at least 1")
    A, R = Atomic("A"), Role("R")
    tbox = (GCI(Exists(R, A), A),)
    abox = [ConceptAssertion(Not(A), "a0")]
    for i in range(1, n + 1):
        abox.append(RoleAssertion(R, f"a{i - 1}", f"b{i}"))
        abox.append(RoleAssertion(R, f"b{i}", f"a{i}"))
    abox.append(ConceptAssertion(A, f"a{n}"))
    return KnowledgeBase((), tbox, tuple(abox))


def k2(n: int, m: int) -> KnowledgeBase:
    """A satisfiable binary-branching cycle: each A_i spawns two S-successors
    in the next class, every member also choosing between m pairs of
    alternatives.  Stresses how far the expansion runs before blocking."""
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    S = Role("S")
    tbox = []
    for i in range(1, n):
        tbox.append(GCI(Atomic(f"A{i}"), AtLeast(2, S, Atomic(f"A{i + 1}"))))
    tbox.append(GCI(Atomic(f"A{n}"), Atomic("A1")))
    menu = And(tuple(Or((Atomic(f"B{j}"), Atomic(f"C{j}")))
                     for j in range(1, m + 1)))
    for i in range(1, n + 1):
        tbox.append(GCI(Atomic(f"A{i}"), menu))
    return KnowledgeBase((), tuple(tbox),
                         (ConceptAssertion(Atomic("A1"), "a"),))


def yo_yo() -> KnowledgeBase:
    """A functional role plus forward expansion; naive expansion and merging
    would chase each other forever, but merging prunes the stale subtree."""
    A, R = Atomic("A"), Role("R")
    tbox = (
        GCI(TOP, AtMost(1, R, TOP)),
        GCI(A, ForAll(R, Exists(R, TOP))),
    )
    abox = (
        ConceptAssertion(A, "a"),
        ConceptAssertion(Exists(R, TOP), "a"),
        RoleAssertion(R, "a", "b"),
        RoleAssertion(R, "a", "a"),
    )
    return KnowledgeBase((), tbox, abox)


def nominal_funnel() -> KnowledgeBase:
    """Every A-member starts an R-chain of A's, each of which also points
    into the named individual ``a`` through S; S has at most 2 incoming
    edges per target, so fresh individuals funnel into few roots."""
    A, R, S = Atomic("A"), Role("R"), Role("S")
    tbox = (
        GCI(A, Exists(R, A)),
        GCI(A, Exists(S, Nominal("a"))),
        GCI(TOP, AtMost(2, Role("S", inverse=True), TOP)),
    )
    return KnowledgeBase((), tbox, (ConceptAssertion(A, "b"),))


def caterpillar() -> KnowledgeBase:
    """A three-stage cycle through the named individual ``a`` with an
    inverse-functional role; each round shortens the chain by merging."""
    B, C, D = Atomic("B"), Atomic("C"), Atomic("D")
    R, S = Role("R"), Role("S")
    tbox = (
        GCI(B, Exists(R, C)),
        GCI(C, Exists(S, D)),
        GCI(D, Nominal("a")),
        GCI(TOP, AtMost(1, Role("S", inverse=True), TOP)),
    )
    abox = (
        RoleAssertion(S, "a", "a"),
        ConceptAssertion(Exists(R, B), "a"),
    )
    return KnowledgeBase((), tbox, abox)


def funnel_clash() -> KnowledgeBase:
    """Unsatisfiable: B-members chain through R and funnel into ``a`` via S
    (at most 3 incoming S edges), R is inverse functional, and ``a`` must
    not have any incoming R edge."""
    from .model import Bottom
    A, B = Atomic("A"), Atomic("B")
    R, S = Role("R"), Role("S")
    tbox = (
        GCI(And((A, Exists(Role("R", inverse=True), TOP))), Bottom()),
        GCI(B, Exists(R, B)),
        GCI(B, Exists(S, Nominal("a"))),
        GCI(TOP, AtMost(1, Role("R", inverse=True), TOP)),
        GCI(TOP, AtMost(3, Role("S", inverse=True), TOP)),
    )
    abox = (
        ConceptAssertion(A, "a"),
        ConceptAssertion(Exists(R, B), "a"),
    )
    return KnowledgeBase((), tbox, abox)


def deep_chain() -> KnowledgeBase:
    """Satisfiable chain of B's; separately, three consecutive R steps into
    a B-member force A at the start, contradicting the starting assertion
    only once the chain is long enough.  Tests that normalization breaks
    long antecedent paths into single steps."""
    A, B, R = Atomic("A"), Atomic("B"), Role("R")
    tbox = (
        GCI(Not(A), Not(Exists(R, Exists(R, Exists(R, B))))),
        GCI(B, Exists(R, B)),
    )
    abox = (
        ConceptAssertion(Not(A), "a"),
        ConceptAssertion(B, "a"),
    )
    return KnowledgeBase((), tbox, abox)


def infinite_model() -> KnowledgeBase:
    """Satisfiable only in infinite (or cyclic) interpretations: every
    A-member has an R-successor in A and R is inverse functional, while the
    named individual is outside A but has an R-successor in A."""
    A, R = Atomic("A"), Role("R")
    tbox = (
        GCI(A, Exists(R, A)),
        GCI(TOP, AtMost(1, Role("R", inverse=True), TOP)),
    )
    abox = (ConceptAssertion(And((Not(A), Exists(R, A))), "a"),)
    return KnowledgeBase((), tbox, abox)


def single_block_unsound() -> KnowledgeBase:
    """Satisfiability is NO, but single blocking with full labels answers
    YES: the contradiction needs the predecessor of a blocked individual."""
    from .model import Bottom
    C, D = Atomic("C"), Atomic("D")
    R, S, T = Role("R"), Role("S"), Role("T")
    tbox = (
        GCI(C, Exists(R, D)),
        GCI(D, Exists(Role("S", inverse=True), C)),
        GCI(And((Exists(R, TOP), Exists(S, TOP))), Bottom()),
    )
    abox = (ConceptAssertion(Exists(T, C), "a"),)
    return KnowledgeBase((), tbox, abox)


def subset_block_unsound() -> KnowledgeBase:
    """Satisfiability is NO, but subset blocking answers YES: the blocker's
    larger label includes a concept derived from a successor the blocked
    individual never gets."""
    from .model import Bottom
    C, D, E = Atomic("C"), Atomic("D"), Atomic("E")
    R, S, T = Role("R"), Role("S"), Role("T")
    tbox = (
        GCI(C, Exists(R, C)),
        GCI(C, Exists(S, D)),
        GCI(Exists(S, D), E),
        GCI(Exists(R, E), Bottom()),
    )
    abox = (ConceptAssertion(Exists(T, C), "a"),)
    return KnowledgeBase((), tbox, abox)


def _counter_gcis(k: int, roles) -> list:
    """Binary-counter successor axioms: along every edge of each role the
    bit vector B0..B{k-1} increments modulo 2**k (carry-chain encoding)."""
    bits = [Atomic(f"B{i}") for i in range(k)]
    gcis = []
    for X in roles:
        for i in range(k):
            carry = bits[:i]
            # Carry reaches bit i: the bit flips.
            if carry:
                gcis.append(GCI(And(tuple(carry + [bits[i]])),
                                ForAll(X, Not(bits[i]))))
                gcis.append(GCI(And(tuple(carry + [Not(bits[i])])),
                                ForAll(X, bits[i])))
            else:
                gcis.append(GCI(bits[i], ForAll(X, Not(bits[i]))))
                gcis.append(GCI(Not(bits[i]), ForAll(X, bits[i])))
            # No carry at bit i: the bit is preserved.
            for j in range(i):
                gcis.append(GCI(And((Not(bits[j]), bits[i])),
                                ForAll(X, bits[i])))
                gcis.append(GCI(And((Not(bits[j]), Not(bits[i]))),
                                ForAll(X, Not(bits[i]))))
    return gcis


def k11(k: int) -> KnowledgeBase:
    """A binary tree of C's whose levels count modulo 2**k; full counters
    are in A, and A propagates back up through both branches."""
    if k < 1:
        raise ValueError("k must be at least 1")
    C, A = Atomic("C"), Atomic("A")
    L, R = Role("L"), Role("R")
    bits = [Atomic(f"B{i}") for i in range(k)]
    tbox = [GCI(C, And((Exists(L, C), Exists(R, C))))]
    tbox.extend(_counter_gcis(k, (L, R)))
    tbox.append(GCI(And(tuple(bits)), A))
    tbox.append(GCI(And((Exists(L, A), Exists(R, A))), A))
    return KnowledgeBase((), tuple(tbox),
                         (ConceptAssertion(C, "a"),))


def k12(k: int) -> KnowledgeBase:
    """k11 plus a nominal: full counters coincide with the named individual
    ``b``, which then tolerates at most two incoming edges per branch role,
    forcing fresh roots to be introduced."""
    base = k11(k)
    bits = [Atomic(f"B{i}") for i in range(k)]
    extra = (
        GCI(And(tuple(bits)), Nominal("b")),
        GCI(Atomic("A"), And((
            AtMost(2, Role("L", inverse=True), TOP),
            AtMost(2, Role("R", inverse=True), TOP)))),
    )
    return KnowledgeBase(base.rbox, base.tbox + extra, base.abox)


GENERATORS = {
    "k1": (k1, ("n",)),
    "k2": (k2, ("n", "m")),
    "k11": (k11, ("k",)),
    "k12": (k12, ("k",)),
}
