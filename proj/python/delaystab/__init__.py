"""Delayed-input feedback stabilization of parabolic systems."""

from ._core import DelaystabError, expm, run, simulate, split_lti

__all__ = ["DelaystabError", "expm", "run", "simulate", "split_lti"]
