"""Collaborative two-sample testing over the nodes of a graph."""
from .errors import CTSTError, InputError, NumericalError
from .estimators import (
    Hyperparams,
    SufficientStats,
    ThetaMatrix,
    compute_sufficient_stats,
    grulsif_fit,
    pe_divergence_stat,
    pe_statistics,
    pool_fit,
    rulsif_fit_node,
)
from .evaluation import BenchReport, CurvePoint, afroc_auc, afroc_curve, roc_auc, roc_curve, run_benchmark
from .graph import Graph, build_graph, smoothness
from .kernels import FeatureMap, apply_feature_map, build_feature_map, gaussian_kernel, median_heuristic, select_anchors
from .mmd import mmd_statistic
from .permutation import (
    TestConfig,
    TestResult,
    baseline_max_test,
    ctst_test,
    empirical_quantile,
    permute_columns,
    pool_test,
    run_method,
)
from .samples import NodeSampleSet
from .scenarios import LabeledInstance, ScenarioSpec, ego_2hop, generate, grid_graph, sbm_graph
from .selection import CvResult, HyperGrid, cv_select, default_grid_grulsif, loocv_select_rulsif
from .seismic import MultiplexGraph, build_multiplex, knn_spatial_graph, preprocess_channel, segment_windows

__version__ = "0.1.0"
