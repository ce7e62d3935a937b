"""Dropout-regularised multilayer perceptron for the Pima Indians Diabetes data.

Everything is implemented on top of numpy: dense/dropout layers with
ELU and Softplus activations, backpropagation, MSE loss, Adadelta and SGD,
a seeded SplitMix64 generator, dataset loading and splitting, metrics,
plain-text model files and a command line front end (``pidnet``).
"""

__version__ = "0.1.0"

from .data import ColumnStats, Dataset, SplitSpec, column_stats, load_pid, split
from .errors import (
    ParameterError,
    ParseError,
    PidnetError,
    SchemaError,
    ShapeError,
    StateError,
    TrainingError,
)
from .linalg import Rng
from .network import (
    Activation,
    Dense,
    Dropout,
    ModelParams,
    NetworkSpec,
    backward,
    default_spec,
    forward,
)
from .optim import AdadeltaConfig, SgdConfig, adadelta_step, mse_grad, mse_loss, sgd_step
from .trainer import (
    FixedUniform,
    GlorotUniform,
    Metrics,
    TrainConfig,
    evaluate,
    init_params,
    predict,
    run_comparison,
    train,
)
