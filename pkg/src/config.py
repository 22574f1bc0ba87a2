"""
Configuration settings for the graph Fujita toolkit
"""


class Config:
    # Artifacts
    OUTPUT_DIR = 'out'

    # Logging
    LOG_LEVEL = 'INFO'
    LOG_FILE_NAME = 'toolkit.log'

    # Graph analysis
    VOLUME_FIT_MAX_RADIUS = 10
    VOLUME_FIT_RADIUS_SHIFT = 0.5

    # Spectral backend
    EIGEN_MAX_VERTICES = 4096
    KERNEL_CACHE_SIZE = 64
    KERNEL_RELATIVE_FLOOR = 1e-3
    SERIES_TOL = 1e-10

    # Kernel axiom checks
    FD_STEP = 1e-5
    TORUS_WRAP_DIVISOR = 6

    # Curvature falsification
    LOG_BOX = 3.0
    VIOLATION_REL_TOL = 1e-9
    FALSIFIER_BATCH = 1024
    FALSIFIER_CANDIDATES = 5
    FALSIFIER_REFINE_ROUNDS = 40
    FALSIFIER_DISTRIBUTION = 'uniform'

    # Semilinear integration
    REL_TOL = 1e-8
    ABS_TOL = 1e-12
    BLOW_UP_THRESHOLD = 1e8
    MIN_STEP = 1e-12
    MAX_STEPS = 2_000_000
    DECAY_FACTOR = 1.0

    # Picard iteration
    PICARD_TOL = 1e-12
    PICARD_MAX_ITER = 200
    PHI_KERNEL_BUDGET_BYTES = 512 * 2 ** 20
    DIVERGENCE_STREAK = 5

    # Exit codes per error category
    EXIT_CODES = {
        'ok': 0,
        'internal': 1,
        'config-parse': 2,
        'unknown-key': 3,
        'invalid-parameter': 4,
        'graph-validation': 5,
        'numerical': 6,
        'malformed-input': 7,
    }
