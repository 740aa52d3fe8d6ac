"""Rauzy-Veech induction, its symplectic cocycle and congruence covers.

The top-level namespace re-exports the most used entry points; the
submodules hold the rest.
"""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .rauzy import (Alphabet, MoveType, PermutationPair, RauzyArrow, RauzyClass,
                    RauzyPath, apply_move, is_complete, is_irreducible, is_neat,
                    make_pair, parse_pair, parse_path, rauzy_class)
from .cocycle import (CocycleMatrix, IntersectionMatrix, SpElement, induced_sp,
                      omega, sp_order, symplectic_basis, theta_of_path,
                      theta_star_of_path)
from .selection import (PathSelection, build_gamma0, enumerate_adapted,
                        is_strongly_positive, make_selection, make_upsilon)
from .finite_group import MatrixGroup, enumerate_group
from .rvgroup import (cayley_gap, mod_q_closure, rv_generators,
                      spanning_tree_loops)
from .dynamics import (SectionPoint, SuspensionDatum, area, induction_step,
                       return_map, sample_orbit, teich_flow)
from .transfer import (TransferConfig, make_transfer_config, normalized_apply,
                       rpf_leading, twisted_radius)
from .quasirandom import (GroupMeasure, adjoint_orbit_size, convolve, dixon_dims,
                          min_dim_bound, subspace_opnorm)
