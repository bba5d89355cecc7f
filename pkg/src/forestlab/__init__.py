"""Spanning forest sampling and analysis on lattice boxes.

Wilson-algorithm samplers for uniform spanning trees and wired spanning
forests, ray/bush decompositions with cut statistics, effective resistance
machinery with two-sided bounds, resampling-identity verification, and the
seeded experiment runners behind the CLI.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("forestlab")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .errors import (BudgetError, ConfigError, ContractError, DomainError,
                     ForestLabError, SolverError, StatisticalError)
from .rng import RngStream
from .lattice import LatticeBoxSpec, lattice_ball, origin_id, vertex_coords, vertex_id
from .graphs import (ComponentMap, CounterexamplePair, Graph,
                     InducedComponentGraph, build_lattice_box, components,
                     counterexample_graph, induced_component_graph,
                     read_edgelist, subgraph, write_edgelist)
from .walks import (FixedSteps, HeatKernelValue, HitSet, HitWired, KacReport,
                    LatticePath, MarkedLoop, Path, TwoSidedLerw, ZValues,
                    cut_times, heat_kernel, heat_kernel_table, kac_check,
                    l_n_count, lattice_srw, lerw_visit_profile, loop_erase,
                    reference_loop_erase, run_srw, sample_cut_times,
                    two_sided_lerw, z_truncated, z_values)
from .wilson import (SpanningForest, TwoSidedWsfSample, enumerate_spanning_trees,
                     read_forest, spanning_tree_count, two_sided_wsf, wilson_ust,
                     write_forest, wsf_wired_box, wsf_wired_box_restricted)
from .resistance import (CutSetFamily, PotentialField, UnitFlow,
                         effective_resistance, energy, flow_divergence,
                         harmonic_violation, local_modification_gap,
                         nash_williams_lower_bound, solve_potential,
                         thomson_upper_bound, unit_current_flow,
                         validate_cut_family, validate_unit_flow,
                         wired_effective_resistance)
from .spnet import (SPNetwork, materialize, random_sp_network, sp_edge,
                    sp_parallel, sp_series)
from .forest_analysis import (JoinStatistics, RayDecomposition,
                              RecurrenceDiagnostic, cut_set_edges,
                              cut_sets_and_J, inter_component_joins,
                              join_counts, ray_decompose, recurrence_diagnostic,
                              resistance_growth_profile)
from .resample import (ConditionalLawTable, ExactConditionalReport,
                       ResampleTestReport, exact_conditional_test,
                       statistical_resample_test, usf_on_components)
from .stats import (BootstrapTvResult, ChiSquareResult, bootstrap_tv_null,
                    chi_square_gof, mean_ci, tv_distance, two_sample_chi_square)
from .experiments import EXPERIMENTS, ExperimentConfig, run

__all__ = [name for name in dir() if not name.startswith("_")]
