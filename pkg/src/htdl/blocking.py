"""Blocking strategies.

Blocking decides which fresh individuals no longer need their existential
restrictions expanded because an earlier individual with the same (or a
subsuming) neighbourhood already witnesses them.  The default strategy
compares an individual/parent label quadruple and allows the blocker to sit
anywhere in the forest; the candidate index is a hash map keyed on that
quadruple, scanned in creation order so the oldest eligible blocker wins.
A quadratic reference implementation is kept alongside for auditing.
"""

STRATEGIES = (
    "anywhere-pairwise",
    "ancestor-pairwise",
    "atomic-single",
    "full-single",
    "subset",
)

UNBLOCKED = "u"
DIRECT = "d"
INDIRECT = "i"


def atomic_label(abox, s):
    return abox.atomic_lbl.get(s, frozenset())


def full_label(abox, s):
    extra = abox.atleast_lbl.get(s, frozenset())
    base = abox.atomic_lbl.get(s, frozenset())
    return base | extra if extra else base


def edge_label(abox, s, t):
    return abox.edge_lbl.get((s, t), frozenset())


def pair_key(abox, s):
    """Label quadruple for pairwise blocking of a blockable individual."""
    p = s.parent
    return (atomic_label(abox, s), atomic_label(abox, p),
            edge_label(abox, s, p), edge_label(abox, p, s))


def compute_blocking(abox, strategy, cache_keys=None, stats=None):
    """Map every live individual to its blocking status.

    Returns ``{individual: (status, blocker)}`` where status is one of
    UNBLOCKED, DIRECT, INDIRECT.  For DIRECT the blocker is the responsible
    individual, or None when a cached label quadruple acted as a virtual
    blocker.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown blocking strategy {strategy!r}")
    inds = sorted(abox.alive(), key=abox.stamp)
    status = {}
    index = {}        # key -> earliest unblocked blockable individual
    subset_pool = []  # (full label, individual), in creation order

    for s in inds:
        if not s.is_blockable:
            status[s] = (UNBLOCKED, None)
            continue
        p = s.parent
        pst = status.get(p)
        if pst is not None and pst[0] != UNBLOCKED:
            status[s] = (INDIRECT, None)
            continue

        blocker = None
        virtual = False
        if strategy == "anywhere-pairwise":
            key = pair_key(abox, s)
            if cache_keys is not None and key in cache_keys:
                virtual = True
                if stats is not None:
                    stats["cache_hits"] = stats.get("cache_hits", 0) + 1
            else:
                blocker = index.get(key)
        elif strategy == "ancestor-pairwise":
            key = pair_key(abox, s)
            chain = []
            t = s.parent
            while t is not None and t.is_blockable:
                chain.append(t)
                t = t.parent
            for t in reversed(chain):  # oldest ancestor first
                if status[t][0] == UNBLOCKED and pair_key(abox, t) == key:
                    blocker = t
                    break
        elif strategy == "atomic-single":
            key = atomic_label(abox, s)
            blocker = index.get(key)
        elif strategy == "full-single":
            key = full_label(abox, s)
            blocker = index.get(key)
        else:  # subset
            label = full_label(abox, s)
            for (lab, t) in subset_pool:
                if label <= lab:
                    blocker = t
                    break

        if virtual:
            status[s] = (DIRECT, None)
        elif blocker is not None:
            status[s] = (DIRECT, blocker)
        else:
            status[s] = (UNBLOCKED, None)
            if strategy == "subset":
                subset_pool.append((full_label(abox, s), s))
            elif strategy != "ancestor-pairwise":
                index.setdefault(key, s)
    return status


def naive_blocking(abox, strategy, cache_keys=None):
    """Reference implementation: direct quadratic scan, no index."""
    inds = sorted(abox.alive(), key=abox.stamp)
    status = {}
    for s in inds:
        if not s.is_blockable:
            status[s] = (UNBLOCKED, None)
            continue
        if status[s.parent][0] != UNBLOCKED:
            status[s] = (INDIRECT, None)
            continue
        if strategy == "anywhere-pairwise" and cache_keys is not None and \
                pair_key(abox, s) in cache_keys:
            status[s] = (DIRECT, None)
            continue
        found = None
        for t in inds:
            if abox.stamp(t) >= abox.stamp(s):
                break
            if not t.is_blockable or status[t][0] != UNBLOCKED:
                continue
            if strategy in ("anywhere-pairwise", "ancestor-pairwise"):
                if pair_key(abox, t) != pair_key(abox, s):
                    continue
                if strategy == "ancestor-pairwise" and \
                        not s.is_descendant_of(t):
                    continue
            elif strategy == "atomic-single":
                if atomic_label(abox, t) != atomic_label(abox, s):
                    continue
            elif strategy == "full-single":
                if full_label(abox, t) != full_label(abox, s):
                    continue
            else:
                if not (full_label(abox, s) <= full_label(abox, t)):
                    continue
            found = t
            break
        status[s] = (DIRECT, found) if found is not None else (UNBLOCKED, None)
    return status


# ---------------------------------------------------------------------------
# Guards: when is a weaker strategy known to be sound?
# ---------------------------------------------------------------------------

def strategy_guard_violations(strategy, clauses):
    """Reasons the given clause set may not be safely run under ``strategy``.

    Empty result means the strategy is admissible.  The pairwise strategies
    are always admissible.  The guards for the single and subset variants
    are conservative syntactic checks.
    """
    from .clauses import (
        HTClause, ConceptAtom, RoleAtom, EqAtom, Var, is_simple_ht_clause,
    )
    from .model import AtLeast

    problems = []
    if strategy in ("anywhere-pairwise", "ancestor-pairwise"):
        return problems

    if strategy == "atomic-single":
        for c in clauses:
            if not is_simple_ht_clause(c):
                problems.append(f"clause not simple: {c}")
        return problems

    def is_x(t):
        return isinstance(t, Var) and t.kind == "x"

    # Shared conditions for the full-label single strategy.
    for c in clauses:
        role_atoms = [a for a in c.antecedent if isinstance(a, RoleAtom)]
        if len(role_atoms) > 1:
            problems.append(f"more than one antecedent role atom: {c}")
        for a in c.antecedent + c.consequent:
            if isinstance(a, RoleAtom) and is_x(a.s) and is_x(a.t):
                problems.append(f"reflexive role atom on the center: {c}")
        for a in c.consequent:
            if isinstance(a, ConceptAtom) and isinstance(a.concept, AtLeast) \
                    and a.concept.n > 1:
                problems.append(f"at-least restriction above 1: {c}")

    if strategy == "subset":
        # Reject clauses that derive information about the center from a
        # successor pattern; with subset blocking the blocker may lack the
        # successor that triggered the derivation.
        for c in clauses:
            has_role = any(isinstance(a, RoleAtom) and not
                           (is_x(a.s) and is_x(a.t))
                           for a in c.antecedent)
            if not has_role:
                continue
            derives_center = (not c.consequent) or any(
                (isinstance(a, ConceptAtom) and is_x(a.term)) or
                (isinstance(a, RoleAtom) and is_x(a.s) and is_x(a.t)) or
                (isinstance(a, EqAtom) and (is_x(a.s) or is_x(a.t)))
                for a in c.consequent)
            if derives_center:
                problems.append(
                    f"derives information about the center from a "
                    f"successor pattern: {c}")
    return problems
