"""Neural state machine workbench.

Compiles Turing machine transition tables into sparse binary weight tensors,
executes the resulting network one machine step per network step, verifies
step-for-step agreement against the reference interpreter, and trains a small
differentiable variant on bracket-language recognition with forward-mode
gradients.
"""

from .errors import (
    AlphabetError,
    DataFormatError,
    DimMismatch,
    DomainError,
    HashMismatch,
    HeadUnderflow,
    IllegalState,
    InfeasibleWindow,
    MemoryCapExceeded,
    NstmError,
    TapeOverflow,
)
from .machine import (
    Configuration,
    TmSpec,
    TmTrace,
    flip_machine,
    load_spec,
    make_spec,
    random_tm,
    save_spec,
    tm_run,
    tm_step,
    validate_spec,
)
from .tensor import (
    ActivationKind,
    MultiIndexTensor,
    apply_activation,
    contract,
    min_scale_for,
    saturated_linear,
    scaled_sigmoid,
    threshold_gate,
)
from .encoder import NstmProgram, compile_tm, decode_state, encode_config
from .simulator import NstmTrace, full_contraction_step, nstm_run, type1_product
from .feedforward import FeedforwardNet, build_ff, check_associativity, type2_product
from .bisim import BisimReport, bisimulate, fuzz_bisim
from .dyck import DyckConfig, Sample, build_splits, gen_negative, gen_positive, is_dyck
from .trainer import (
    RtrlState,
    TrainConfig,
    TrainableNstm,
    evaluate,
    forward_step,
    rtrl_step,
    train,
)
from .estimator import NstmClassifier

__version__ = "0.1.0"

__all__ = [
    "ActivationKind",
    "AlphabetError",
    "BisimReport",
    "Configuration",
    "DataFormatError",
    "DimMismatch",
    "DomainError",
    "DyckConfig",
    "FeedforwardNet",
    "HashMismatch",
    "HeadUnderflow",
    "IllegalState",
    "InfeasibleWindow",
    "MemoryCapExceeded",
    "MultiIndexTensor",
    "NstmClassifier",
    "NstmError",
    "NstmProgram",
    "NstmTrace",
    "RtrlState",
    "Sample",
    "TapeOverflow",
    "TmSpec",
    "TmTrace",
    "TrainConfig",
    "TrainableNstm",
    "apply_activation",
    "bisimulate",
    "build_ff",
    "build_splits",
    "check_associativity",
    "compile_tm",
    "contract",
    "decode_state",
    "encode_config",
    "evaluate",
    "flip_machine",
    "forward_step",
    "full_contraction_step",
    "fuzz_bisim",
    "gen_negative",
    "gen_positive",
    "is_dyck",
    "load_spec",
    "make_spec",
    "min_scale_for",
    "nstm_run",
    "random_tm",
    "rtrl_step",
    "saturated_linear",
    "save_spec",
    "scaled_sigmoid",
    "threshold_gate",
    "tm_run",
    "tm_step",
    "train",
    "type1_product",
    "type2_product",
    "validate_spec",
]
