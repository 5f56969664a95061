"""Exact p-adic cell decompositions, center trees and clustered cells."""

from .padic import INF, NEG_INF, PAdic, PrimeConfig, angular_component, coset_member, valuation
from .balls import Ball, ball_contains, ball_meet, ball_member, canonical_point, subballs
from .cells import (
    Cell,
    CellCondition,
    Decomposition,
    HeightProgression,
    center_ball,
    cell_member,
    leaf_ball,
    leaf_heights,
    restrict,
    rho_max,
)
from .leafform import (
    WHOLE_SPACE,
    LeafForm,
    UnionEngine,
    find_point_outside,
    max_ball_in_union,
    normalize_to_leafform,
    set_disjoint_cells,
    set_equal,
)
from .admissible import compute_W, decompose_admissible, is_admissible, is_preadmissible
from .clusters import (
    CenterSet,
    CenterTree,
    ClassicalCellFam,
    ClusteredCellFam,
    ConditionFamily,
    DecompositionFam,
    MultiCellFam,
    ParamSet,
    d_signature,
    validate_cell_array,
    validate_clustered,
)
from .regular import (
    CondensedArray,
    check_regularity,
    classify,
    clustered_decompose,
    normalize_ac,
    regularize,
    repartition_acprec,
    repartition_interval,
    repartition_order,
    split_off_cluster,
)
from .dsl import Document, parse, print_document

__version__ = "0.1.0"
