"""htdl: a hypertableau reasoner for an expressive description logic.

The package decides satisfiability, subsumption and classification of
knowledge bases in a description logic with inverse roles, nominals,
qualified number restrictions, role hierarchies and transitive roles.
Knowledge bases are read from an s-expression text format; reasoning
first compiles the input to a set of Horn-like clauses and then runs a
forest-shaped model construction with pairwise anywhere blocking.
"""

from .model import (
    Role, Concept, Top, Bottom, Atomic, Nominal, Not, And, Or, Exists,
    ForAll, SelfRestriction, AtLeast, AtMost, TOP, BOTTOM,
    nnf, neg_dot,
    GCI, SubRole, DisjointRoles, ReflexiveRole, IrreflexiveRole,
    SymmetricRole, AsymmetricRole, TransitiveRole,
    ConceptAssertion, RoleAssertion, SameIndividuals, DifferentIndividuals,
    KnowledgeBase, KBError, UnknownSymbolError,
    SubRoleClosure, transitive_roles, is_simple_role,
    FiniteInterpretation, satisfies_kb,
)
from .kbio import parse_kb, serialize_kb, ParseError, SimplicityError
from .clauses import (
    HTClause, ConceptAtom, RoleAtom, EqAtom, Annotation, Var,
    validate_ht_clause, is_simple_ht_clause, serialize_clauses,
)
from .preprocess import (
    eliminate_transitivity, normalize, clausify, preprocess, is_horn,
    concept_closure, NormalizedKB, ClausalKB,
)
from .blocking import STRATEGIES, compute_blocking, naive_blocking
from .engine import (
    RunConfig, DeriveResult, derive, SAT, UNSAT, INDETERMINATE,
    ResourceLimit, validate_abox, trace_to_dot, trace_to_jsonl,
)
from .reasoner import Reasoner, Taxonomy, GuardRejection
from .oracle import find_model, all_interpretations
from .cli import main

__all__ = [n for n in dir() if not n.startswith("_")]
__version__ = "0.1.0"
