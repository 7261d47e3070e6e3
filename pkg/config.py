"""
Configuration file for the Besov-space MHD experiment harness.
"""
import logging
import os

from dotenv import load_dotenv
from rich.logging import RichHandler

# Load environment variables from .env file
load_dotenv()

# Runtime configuration - can be overridden with environment variables
THREADS = int(os.getenv('BMHD_THREADS', str(os.cpu_count() or 1)))
OUTPUT_DIR = os.getenv('BMHD_OUTPUT_DIR', 'output')
LOG_LEVEL = os.getenv('BMHD_LOG_LEVEL', 'INFO')
CONFIGS_DIR = os.getenv('BMHD_CONFIGS_DIR', os.path.join(os.path.dirname(os.path.abspath(__file__)), 'configs'))
TEMPLATES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'templates')

# Numerical tolerances
TOLERANCES = {
    'ROUNDOFF': 1e-12,           # projections, partition of unity, Bony reconstruction
    'DIVERGENCE': 1e-10,         # relative divergence accepted by MHDState
    'MEAN_FREE': 1e-12,          # relative zero-mode content accepted as mean-free
    'ENERGY_DRIFT': 1e-5,        # relative energy balance drift of a solve run
    'CANCELLATION': 1e-12,       # relative magnetic cancellation residual
    'ORDER': 0.3,                # tolerance on the measured temporal order
}

# Solver defaults
SOLVER_DEFAULTS = {
    'dt': 1e-3,
    'T': 1.0,
    'n_times': 64,
    'q': 4.0,
    'tol': 1e-8,
    'max_iter': 50,
    'sample_every': 10,
    'cfl_safety': 0.5,
    'divergence_streak': 3,
}

# Calibration defaults
CALIBRATION_DEFAULTS = {
    'safety': 1.25,              # C_cal = safety * max ratio on the calibration bank
    'max_drift': 0.2,            # tolerated relative drift between banks
    'bank_size': 50,
}

# Subcommands and the jobs they run, in the order the CLI lists them
SUBCOMMANDS = [
    ("lp-check", "Littlewood-Paley partition, orthogonality and Bernstein checks"),
    ("bony-check", "Bony decomposition identities and product estimates"),
    ("norms", "Besov, inhomogeneous Besov and Chemin-Lerner norm properties"),
    ("lorentz-check", "Lorentz Hoelder, Young and convolution inequalities"),
    ("solve", "IF-RK4 MHD run with energy and cancellation monitors"),
    ("picard", "Picard iteration for the mild formulation"),
    ("smalldata", "Global small-data run, decay estimates and smallness threshold"),
    ("local", "Large-data local existence on a short time interval"),
    ("calderon", "Calderon splitting and MHD-like system"),
    ("weakstrong", "Weak-strong uniqueness gap"),
    ("trilinear", "Trilinear identities and bounds"),
    ("growth", "Norm growth monitor over data scales"),
]


def setup_logging(level=None):
    """Configure rich logging once for the whole process."""
    logging.basicConfig(
        level=level or LOG_LEVEL,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True)],
        force=True,
    )
    return logging.getLogger("rich")
