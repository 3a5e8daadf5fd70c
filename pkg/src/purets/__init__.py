"""Pure linear-layer forecasters (PureTS, PureTS_S) for long-horizon time series."""

from .data import (
    CsvSchema,
    SeriesDataset,
    SineSpec,
    SplitPolicy,
    WindowBatch,
    generate_sine,
    load_csv,
    make_windows,
    split_and_normalize,
)
from .errors import DataError, DegenerateError, NumericError, ParseError, ShapeError, UnsupportedModelError
from .metrics import MetricReport, corr, evaluate, fluctuation_index, mae, mse, peak_amplitude_ratio, rse
from .model import (
    AffineLayer,
    GradientSet,
    LinearStack,
    backward,
    build_model,
    collapse_to_affine,
    collapsed_model,
    forward,
    init_parameters,
    load_checkpoint,
    save_checkpoint,
)
from .profile import ProfileReport, benchmark_inference, count_macs, count_parameters
from .tensor import RandomSource, batched_affine, matmul, permute_time_feature
from .train import ConvergenceTrace, TrainConfig, adam_step, evaluate_model, mse_loss, predict, train

__version__ = "0.1.0"
