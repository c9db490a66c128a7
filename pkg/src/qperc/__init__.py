"""Cheat-sensitive quantum data-system simulation and privacy-preserving
perceptron training, with classical randomization baselines.

The learning algorithms follow the scikit-learn estimator protocol:

    >>> from qperc import PrivateQuantumPerceptron
    >>> model = PrivateQuantumPerceptron(noise="R1:delta=0.5", random_state=0)
    >>> model.fit(X, y).predict(X)

Lower-level pieces (the branch-state simulator, the three-round protocol, the
noise generators, the experiment harness) are available from the submodules.
"""

from .baselines import (
    BaselineMethod,
    DensityGrid,
    NoisyDensityEstimator,
    RandomizedBaselinePerceptron,
    distort,
    reconstruct_1d,
    reconstruct_2d,
    train_baseline,
)
from .data import TrainingSet, generate_set1, generate_set2, generate_set3
from .noise import FixedPointCodec, NoiseGenerator, parse_generator, round_to_grid
from .perceptron import (
    Classifier,
    LeakLedger,
    PerceptronClassifier,
    PrivateQuantumPerceptron,
    TrainRecord,
    classify,
    train_classical,
    train_quantum,
)
from .privacy import (
    detection_probability,
    expected_leak_count,
    privacy_amount_uniform,
)
from .protocol import BobStrategy, ProtocolOutcome, ProtocolParams, run_data_system
from .qstate import BranchState, RegisterLayout, prepare_test_state

__all__ = [
    "BaselineMethod", "BobStrategy", "BranchState", "Classifier",
    "DensityGrid", "FixedPointCodec", "LeakLedger", "NoiseGenerator",
    "NoisyDensityEstimator", "PerceptronClassifier", "PrivateQuantumPerceptron",
    "ProtocolOutcome", "ProtocolParams", "RandomizedBaselinePerceptron",
    "RegisterLayout", "TrainRecord", "TrainingSet", "classify",
    "detection_probability", "distort", "expected_leak_count",
    "generate_set1", "generate_set2", "generate_set3", "parse_generator",
    "prepare_test_state", "privacy_amount_uniform", "reconstruct_1d",
    "reconstruct_2d", "round_to_grid", "run_data_system", "train_baseline",
    "train_classical", "train_quantum",
]

__version__ = "0.1.0"
