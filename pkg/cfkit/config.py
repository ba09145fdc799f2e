"""
Configuration management for cfkit.
"""

import os
import logging
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

class Config:
    """Configuration class for cfkit."""

    # Outer solver defaults
    TOLERANCE = float(os.getenv("CFKIT_TOLERANCE", "1e-8"))
    MAX_ITERS = int(os.getenv("CFKIT_MAX_ITERS", "100000"))

    # Reference runs (cmd_reference)
    REFERENCE_TOLERANCE = float(os.getenv("CFKIT_REFERENCE_TOLERANCE", "1e-14"))
    REFERENCE_MAX_ITERS = int(os.getenv("CFKIT_REFERENCE_MAX_ITERS", "1000000"))
    STALL_WINDOW = int(os.getenv("CFKIT_STALL_WINDOW", "200"))  # Iterations without residual improvement
    STALL_ACCEPT = float(os.getenv("CFKIT_STALL_ACCEPT", "1e-8"))  # Largest residual a stalled reference may keep

    # Overlapping prox dual solver
    INNER_TOLERANCE = float(os.getenv("CFKIT_INNER_TOLERANCE", "1e-10"))
    MAX_INNER_ITERS = int(os.getenv("CFKIT_MAX_INNER_ITERS", "10000"))

    # Power iteration
    SPECTRAL_TOLERANCE = float(os.getenv("CFKIT_SPECTRAL_TOLERANCE", "1e-12"))
    SPECTRAL_MAX_ITERS = int(os.getenv("CFKIT_SPECTRAL_MAX_ITERS", "100000"))

    # Data generation and models
    NOISE_DELTA = float(os.getenv("CFKIT_NOISE_DELTA", "0.01"))
    SGLR_MU_FACTOR = float(os.getenv("CFKIT_SGLR_MU_FACTOR", "1e-3"))

    # Traces and certificates
    TRACE_TIMING = os.getenv("CFKIT_TRACE_TIMING", "0").strip().lower() in ("1", "true", "yes")
    LOG_EVERY = int(os.getenv("CFKIT_LOG_EVERY", "1000"))
    CHECK_FLOOR = float(os.getenv("CFKIT_CHECK_FLOOR", "1e-9"))

    # Logging configuration
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
    LOG_FORMAT = os.getenv("LOG_FORMAT", "%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    @classmethod
    def setup_logging(cls):
        """Configure logging for the application."""
        logging.basicConfig(
            level=getattr(logging, cls.LOG_LEVEL),
            format=cls.LOG_FORMAT,
            handlers=[
                logging.StreamHandler()  # stderr
            ]
        )

        logging.getLogger("cfkit").setLevel(getattr(logging, cls.LOG_LEVEL))
        logging.getLogger("cfkit.engine").setLevel(getattr(logging, cls.LOG_LEVEL))
        logging.getLogger("cfkit.prox").setLevel(getattr(logging, cls.LOG_LEVEL))

    @classmethod
    def validate(cls):
        """Validate that configured values are usable."""
        for name in ("TOLERANCE", "REFERENCE_TOLERANCE", "INNER_TOLERANCE", "SPECTRAL_TOLERANCE",
                     "STALL_ACCEPT", "CHECK_FLOOR"):
            if not getattr(cls, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(cls, name)}")
        for name in ("MAX_ITERS", "REFERENCE_MAX_ITERS", "MAX_INNER_ITERS", "SPECTRAL_MAX_ITERS",
                     "LOG_EVERY"):
            if getattr(cls, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(cls, name)}")
        if cls.STALL_WINDOW < 0:
            raise ValueError(f"STALL_WINDOW must be nonnegative, got {cls.STALL_WINDOW}")
        if cls.NOISE_DELTA < 0:
            raise ValueError(f"NOISE_DELTA must be nonnegative, got {cls.NOISE_DELTA}")
        if not 0 < cls.SGLR_MU_FACTOR <= 1:
            raise ValueError(f"SGLR_MU_FACTOR must lie in (0, 1], got {cls.SGLR_MU_FACTOR}")
        if cls.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ValueError(f"Unknown LOG_LEVEL '{cls.LOG_LEVEL}'")
        return True
