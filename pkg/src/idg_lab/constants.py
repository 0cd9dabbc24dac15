"""Constants for idg-lab."""

# Probability tolerances
SUPPORT_TOL = 1e-12  # mass at or below this is "zero"
MASS_TOL = 1e-9  # constructors reject sums further than this from 1
ACTION_TOL = 1e-9  # L-infinity equality of distribution-valued actions and rows
TIE_TOL = 1e-12  # ZeroOne expected-loss ties
RISK_TOL = 1e-9  # equality of extended-real risks in theorem checks
DPI_TOL = 1e-10

# Losses
DEFAULT_CLAMP_EPSILON = 1e-3

# Random worlds
MAX_REJECTIONS = 10_000
DEFAULT_ENUMERATION_BUDGET = 1_000_000

# Augmentation regimes
DEFAULT_APPROX_DA_MIX = 0.1
DEFAULT_NOISE_KEEP = 0.5
DEFAULT_JITTER_SCALE = 0.1

# Training (hyperparameter style of the reference protocol)
DEFAULT_TEMPERATURE = 0.05
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_EPOCHS = 200
DEFAULT_BATCH_SIZE = 128
DEFAULT_HIDDEN_WIDTH = 64
DEFAULT_Z_DIM = 8
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
LIKELIHOOD_FLOOR = 1e-9  # lower bound on entropy-model bin mass

# Probes
DEFAULT_PROBE_L2 = 1e-3
L2_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)
DEFAULT_WRONG_LABEL_WEIGHT = 1e-5
PROBE_MAX_ITERS = 500
PROBE_GRAD_TOL = 1e-6
PROBE_INITIAL_STEP = 1.0
PROBE_MIN_STEP = 1e-12

# Synthetic data
DEFAULT_PER_CLUSTER = 50
DEFAULT_VAL_FRACTION = 0.2
DEFAULT_CLUSTER_STD = 0.5
DISJOINT_DOMAIN_SEPARATION = 6.0
LABEL_SEPARATION = 3.0

# Runs
DEFAULT_SEED = 0
DEFAULT_OUTPUT_DIR = "runs"
MANIFEST_NAME = "manifest.json"
CSV_FLOAT_FORMAT = "%.10g"

# Logging
DEFAULT_LOG_LEVEL = "WARNING"

# Exit codes
EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_RESOURCE = 2
EXIT_USAGE = 64
EXIT_MISSING_INPUT = 66
