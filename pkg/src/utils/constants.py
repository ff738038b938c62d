"""Model, sampling and file-format constants"""

from typing import Dict, Tuple

# Precision tags
PRECISION_SINGLE = "single"
PRECISION_DOUBLE = "double"
PRECISIONS = (PRECISION_SINGLE, PRECISION_DOUBLE)

# Numerics
LAYER_NORM_EPS = 1e-5
INIT_STD = 0.02                  # W_pe, templates, class tokens
GRADCHECK_EPS = 1e-5
GRADCHECK_TOLERANCE = 1e-5

# Attention
DEFAULT_HEADS = 4
SCALE_INPUT_DIM = "input_dim"
SCALE_HEAD_DIM = "head_dim"
SCALE_MODES = (SCALE_INPUT_DIM, SCALE_HEAD_DIM)

# Update function: which half of the stacked [e; m] tokens becomes u_t
UPDATE_MESSAGE_HALF = "message_half"
UPDATE_VERTEX_HALF = "vertex_half"
UPDATE_TAKES = (UPDATE_MESSAGE_HALF, UPDATE_VERTEX_HALF)

# Edge strategies
STRATEGY_IMPLICIT = "implicit"
STRATEGY_TEMPLATE_BANK = "tb"
STRATEGY_CLASS_TOKEN = "ctp"
STRATEGIES = (STRATEGY_IMPLICIT, STRATEGY_TEMPLATE_BANK, STRATEGY_CLASS_TOKEN)

BANK_SIZES = (1, 32, 64, 128, 256, 512, 1024, 2048)
DEFAULT_BANK_SIZE = 512

CTP_GLOBAL = "global"
CTP_VERB_NOUN = "vn"
CTP_VERB_NOUN_ACTION = "vna"
CTP_VARIANTS = (CTP_GLOBAL, CTP_VERB_NOUN, CTP_VERB_NOUN_ACTION)

# Token rows prepended to the readout, in order
CTP_TOKEN_NAMES: Dict[str, Tuple[str, ...]] = {
    CTP_GLOBAL: ("global",),
    CTP_VERB_NOUN: ("verb", "noun"),
    CTP_VERB_NOUN_ACTION: ("verb", "noun", "action"),
}

# Classifier heads
ACTION_SEPARATE = "separate"
ACTION_COMPOSED = "composed"
ACTION_MODES = (ACTION_SEPARATE, ACTION_COMPOSED)

ACTION_SOURCE_POOL = "mean_pool"
ACTION_SOURCE_TOKEN = "token"
ACTION_SOURCES = (ACTION_SOURCE_POOL, ACTION_SOURCE_TOKEN)

# Anticipation protocol
NUM_FRAMES = 14
STRIDE_S = 0.25
INTERVALS_S = (2.00, 1.75, 1.50, 1.25, 1.00, 0.75, 0.50, 0.25)
DEFAULT_FPS = 4.0
SKIP_FRAMES = 2
REPORT_INTERVAL_S = 1.00

# Optimizer
OPTIMIZER_SGD = "sgd"
OPTIMIZER_ADAM = "adam"
OPTIMIZERS = (OPTIMIZER_SGD, OPTIMIZER_ADAM)
LEARNING_RATE = 1e-4
MIN_LEARNING_RATE = 1e-7
WEIGHT_DECAY = 1e-3
ANNEAL_FRACTION = 0.25
MOMENTUM = 0.9
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# Metrics
TOP_K = 5

# File formats
FEATURE_MAGIC = b"URMF"
FEATURE_VERSION = 1
CHECKPOINT_MAGIC = b"URM1"
CHECKPOINT_VERSION = 1

# dtype codes in checkpoints
DTYPE_CODES: Dict[str, int] = {
    "<f4": 0,
    "<f8": 1,
    "|u1": 2,
    "<i8": 3,
}

# Exit codes
EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
