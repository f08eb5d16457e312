"""Finite meet-trees with a relational layer: amalgamation, generic limits,
independence relations, and an automorphism laboratory."""

from treeforge.core import (
    BudgetError,
    Embedding,
    Flavor,
    MeetTree,
    MixedStructure,
    QfTypeCode,
    StructureError,
    closure,
    cone_of,
    cones_at,
    enumerate_structures,
    gamma_set,
    is_embedding,
    make_embedding,
    make_structure,
    qf_type,
    semibranch_projection,
    semibranch_space,
    structure_from_json,
    structure_to_dot,
    structure_to_json,
    validate_structure,
)

__all__ = [
    "BudgetError",
    "Embedding",
    "Flavor",
    "MeetTree",
    "MixedStructure",
    "QfTypeCode",
    "StructureError",
    "closure",
    "cone_of",
    "cones_at",
    "enumerate_structures",
    "gamma_set",
    "is_embedding",
    "make_embedding",
    "make_structure",
    "qf_type",
    "semibranch_projection",
    "semibranch_space",
    "structure_from_json",
    "structure_to_dot",
    "structure_to_json",
    "validate_structure",
]

__version__ = "0.1.0"
