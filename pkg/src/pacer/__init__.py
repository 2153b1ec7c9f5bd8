"""Confidence-screened sampling with one consensus-conditioned revision round.

Phase I samples attempts, early-stops unstable ones and keeps a stable pool;
Phase II shows every pooled trace a compact consensus packet, lets it revise
once, and takes a confidence-weighted vote over the revised answers.
"""
from .config import PacerConfig
from .kernels import IMPLEMENTATION as KERNEL_IMPLEMENTATION
from .pipeline import run
from .report import RunReport, TokenLedger

__all__ = ["PacerConfig", "RunReport", "TokenLedger", "KERNEL_IMPLEMENTATION", "run"]
__version__ = "0.1.0"
