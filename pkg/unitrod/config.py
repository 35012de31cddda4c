"""
Configuration for unitrod
Environment-backed defaults, tolerance and solver settings, RNG streams
"""

import os
import logging
from typing import Literal, Optional

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator

load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

DEFAULT_EPS_LEN = float(os.getenv("UNITROD_EPS_LEN", "1e-9"))
DEFAULT_EPS_SEP = float(os.getenv("UNITROD_EPS_SEP", "1e-6"))
DEFAULT_EPS_COLLINEAR = float(os.getenv("UNITROD_EPS_COLLINEAR", "1e-6"))
TRIPLE_THRESHOLD = int(os.getenv("UNITROD_TRIPLE_THRESHOLD", "2000"))
TRIPLE_SAMPLES = int(os.getenv("UNITROD_TRIPLE_SAMPLES", "1000000"))
PAIR_THRESHOLD = int(os.getenv("UNITROD_PAIR_THRESHOLD", "1000"))
PAIR_SAMPLES = int(os.getenv("UNITROD_PAIR_SAMPLES", "100000"))
MAX_RETRIES = int(os.getenv("UNITROD_MAX_RETRIES", "64"))
ANGULAR_CAP = int(os.getenv("UNITROD_ANGULAR_CAP", "10000000"))
LOG_LEVEL = os.getenv("UNITROD_LOG_LEVEL", "INFO")


def setup_logging(level: Optional[str] = None):
    """Configure root logging the same way for every entry point"""
    logging.basicConfig(level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
                        format=LOG_FORMAT)


class ToleranceConfig(BaseModel):
    """Numerical tolerances that discretize the exact embedding conditions"""
    model_config = ConfigDict(frozen=True)

    eps_len: float = Field(default=DEFAULT_EPS_LEN, gt=0)
    eps_sep: float = Field(default=DEFAULT_EPS_SEP, gt=0)
    eps_collinear: float = Field(default=DEFAULT_EPS_COLLINEAR, gt=0)
    triple_threshold: int = Field(default=TRIPLE_THRESHOLD, ge=3)
    triple_samples: int = Field(default=TRIPLE_SAMPLES, ge=1)
    pair_threshold: int = Field(default=PAIR_THRESHOLD, ge=2)
    pair_samples: int = Field(default=PAIR_SAMPLES, ge=1)
    max_retries: int = Field(default=MAX_RETRIES, ge=1)

    @model_validator(mode="after")
    def _check_order(self) -> "ToleranceConfig":
        if self.eps_len >= self.eps_sep:
            raise ValueError(f"eps_len ({self.eps_len}) must be smaller than eps_sep ({self.eps_sep})")
        return self

    @classmethod
    def from_env(cls) -> "ToleranceConfig":
        return cls()


class SolveConfig(BaseModel):
    """Settings for the multi-restart embedding search"""
    model_config = ConfigDict(frozen=True)

    restarts: int = Field(default=50, ge=1)
    max_iters: int = Field(default=2000, ge=1)
    init_box: Optional[float] = Field(default=None, gt=0)
    success_residual: float = Field(default=1e-9, gt=0)
    fail_energy_floor: float = Field(default=1e-6, gt=0)
    seed: int = 0
    threads: int = Field(default=1, ge=1)
    init: Literal["random", "perturbed"] = "random"
    perturbation: float = Field(default=0.05, gt=0)
    polish_iters: int = Field(default=50, ge=0)
    keep_embeddings: bool = False
    progress: bool = False

    @model_validator(mode="after")
    def _check_thresholds(self) -> "SolveConfig":
        if self.success_residual >= self.fail_energy_floor:
            raise ValueError("success_residual must be smaller than fail_energy_floor")
        return self


class RngStream:
    """
    Reproducible random stream identified by (seed, stream id).

    Sub-streams are derived through numpy's SeedSequence spawn keys, so
    parallel tasks get independent generators from one master seed.
    """

    def __init__(self, seed: int, stream: int = 0, _key: tuple = ()):
        self.seed = int(seed)
        self.stream = int(stream)
        self._key = _key + (self.stream,)
        self.generator = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=self._key))

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, k, self._key)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, key={self._key})"


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator or an int seed"""
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
