"""Memory-footprint prediction and memory/CPU-aware task co-location.

A mixture of parametric memory-curve experts (power-law, exponential,
logarithmic) with a nearest-neighbour selector over PCA-reduced runtime
features, feeding a co-location scheduler that is evaluated inside a
deterministic discrete-event cluster simulator.
"""

from .errors import MemcoloError
from .features import FeatureSchema, FeatureVector, fit_pca, fit_scaler, project, scale
from .memfunc import (
    EXPONENTIAL,
    NAPIERIAN_LOG,
    POWER_LAW,
    MemoryFunction,
    calibrate,
    fit_least_squares,
    select_best_fit,
)
from .metrics import antt, aggregate, report_from_trace, stp
from .predictor import PredictorConfig, Prediction, build_worked_example_fixture, predict
from .registry import Registry, TrainingRecord, load, nearest, save, select_expert, train
from .scheduler import ISOLATION, MOE, ORACLE, POLICIES, SIMPLE, NodeState, admit, dispatch
from .simulator import ClusterSpec, SimConfig, SimulatedProfiler, run
from .workload import Task, WorkloadSpec, generate_workload

__version__ = "0.1.0"
