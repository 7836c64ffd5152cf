"""Shared configuration constants."""
import math
import os

# Lab API server
LAB_HOST = "127.0.0.1"                     # Bind address for the Flask lab API
LAB_PORT = 5000                            # Port for the Flask lab API

# Optimal transport
OT_BUDGET_MB = int(os.environ.get("GENPRIOR_OT_BUDGET_MB", "1024"))  # Dense cost matrix budget
OT_EMD_MAX_ITERS = 10_000_000              # Network simplex iteration cap
BRUTE_FORCE_MAX_POINTS = 8                 # n! enumeration refused above this

# Sinkhorn defaults
SINKHORN_EPSILON = 0.05                    # Default epsilon for one-off divergence calls
SINKHORN_MAX_ITERS = 20_000
SINKHORN_TOLERANCE = 1e-9
SINKHORN_SCALING_STEPS = 8                 # Number of warm-start epsilon levels

# Benchmark samplers (frozen formulas, see measures.py)
SWISSROLL_NOISE = 0.2
SWISSROLL_T_MAX = 4.5 * math.pi
SWISSROLL_R_MAX = SWISSROLL_T_MAX / 5.0 + 6.0 * SWISSROLL_NOISE  # 6 sigma envelope
PINWHEEL_BLADES = 5
PINWHEEL_RADIAL_STD = 0.3
PINWHEEL_TANGENTIAL_STD = 0.1
PINWHEEL_RATE = 0.25
CHECKERBOARD_HALF_WIDTH = 2.0              # Board covers [-2, 2]^2 with 4x4 unit squares
TWO_MOONS_NOISE = 0.1

# 2D benchmark likelihood: y = F u + xi, xi ~ N(0, sigma^2 I)
LIKELIHOOD_2D_F = ((1.0, 0.0), (0.0, 0.0))
LIKELIHOOD_2D_SIGMA = 0.5
LIKELIHOOD_2D_Y = (0.0, 0.0)

# Sweep defaults
DEFAULT_N_REF = 2 ** 15                    # Reference cloud standing in for the true prior
DEFAULT_POSTERIOR_SIZE = 2 ** 11           # Equal-size resampled posterior clouds
DEFAULT_PRIOR_EVAL_SIZE = 2 ** 11          # Pushforward cloud used to measure prior W2
DEFAULT_TRAIN_REFERENCE_SIZE = 2 ** 12     # Latent cloud eta^M used during training
DEFAULT_REPEATS = 5
DEFAULT_SWEEP_SEED = 20240601

# Training defaults (sequential residual stages)
DEFAULT_EPOCHS = 10_000
DEFAULT_BATCH_SIZE = 512
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_STAGE_COUNT = 5
DEFAULT_HIDDEN_WIDTHS = (128, 128)         # Three linear layers per stage
DEFAULT_EPSILON_SCHEDULE = (1.0, 0.05)
DEFAULT_GENERATOR_UPDATE_PERIOD = 20
LEAKY_SLOPE = 0.2

# Darcy problem
DARCY_GRID_SIZE = 16                       # Matches the 16x16 generator output
DARCY_OBSERVATION_COUNT = 300
DARCY_OBSERVATION_SEED = 2718
DARCY_OBSERVATION_BOX = (0.05, 0.95)
DARCY_DIRECT_SOLVER_MAX_M = 64
DARCY_RESIDUAL_TOLERANCE = 1e-10
DARCY_LATENT_DIM = 16
DARCY_DATASET_SIZE = 4096
DARCY_TRUTH_SEED = 31

# pCN defaults
PCN_BETA0 = 0.5
PCN_BURN_FRACTION = 0.2
PCN_ADAPT_WINDOW = 100
PCN_TARGET_BAND = (0.2, 0.4)
PCN_BETA_LIMITS = (1e-4, 1.0 - 1e-4)
PCN_THIN = 10
DARCY_SNAPSHOT_COUNT = 10

# Reference slopes of log-log fits (prior W2, posterior W1) reported for the
# WGAN-gp estimator; kept for comparison columns only.
REFERENCE_SLOPES = {
    "swissroll": {"sample_size": (-0.307, -0.357), "width": (-0.113, -0.164), "epochs": (-0.289, -0.327)},
    "checkerboard": {"sample_size": (-0.321, -0.359), "width": (-0.119, -0.218), "epochs": (-0.219, -0.316)},
    "pinwheel": {"sample_size": (-0.281, -0.325), "width": (-0.174, -0.282), "epochs": (-0.312, -0.485)},
}

# Darcy prior generator training (blob-field dataset, 256-dim output)
DARCY_TRAIN_EPOCHS = 400
DARCY_TRAIN_BATCH_SIZE = 128
DARCY_TRAIN_LEARNING_RATE = 1e-3
DARCY_TRAIN_STAGES = 2
DARCY_TRAIN_HIDDEN_WIDTHS = (128,)
DARCY_EPSILON_SCHEDULE = (20.0, 2.0)       # Field-space squared distances are O(10)
DARCY_ACF_MAX_LAG = 100

# Oracle-inequality experiment: affine image of a standard Gaussian
ORACLE_MATRIX = ((1.5, 0.5), (0.0, 0.7))
ORACLE_OFFSET = (1.0, -0.5)
