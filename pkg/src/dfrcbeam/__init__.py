"""Hybrid beamforming for mmWave dual-function radar-communication.

Library layout:
  channel       steering vectors, sin-space grids, clustered channels
  architecture  full / partial / dynamic analog feasible sets and projections
  metrics       radar and communication figures of merit
  scalarize     weighted-sum, epsilon-constraint and min-max formulations
  solvers       fully digital, two-stage factorization, consensus-ADMM
  virtualarray  K*M_r virtual data model, MUSIC and DOA studies
  experiments   reproducible sweep harness and CSV artifacts
  cli           command line entry points
"""

from .architecture import (AnalogPrecoder, ArchitectureSpec, feasibility_check,
                           project_analog, random_feasible)
from .channel import (ChannelSet, ClusterModel, SinGrid, SystemDims,
                      gen_channel, make_grid, steering_vector)
from .metrics import (HybridCombiner, HybridPrecoder, MetricReport, RadarScene,
                      beampattern, crlb_doa, detection_probability,
                      evaluate_metrics, multiuser_mmse, psl_isl, radar_mi,
                      radar_sinr, spectral_efficiency, ssme)
from .scalarize import (EpsilonConstraint, MinMax, Normalizer, ObjectiveSpec,
                        WeightedSum, epsilon_wrap, minmax_wrap, normalize_metrics,
                        weighted_sum)
from .solvers import (DesignProblem, DesignResult, SolverConfig,
                      compute_normalizers, design_combiners,
                      design_consensus_admm, design_fully_digital,
                      factorize_two_stage, solve)
from .virtualarray import (DoaStudyConfig, VirtualArrayModel, build_virtual_data,
                           doa_study, music_spectrum)

__version__ = "0.1.0"
