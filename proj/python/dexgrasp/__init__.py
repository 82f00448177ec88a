"""Dexterous grasp synthesis toolkit: cGAN grasp generator, stability
evaluator, BPS point-cloud encoding, MAGD/Coverage metrics, and the
task-oriented affordance pipeline."""

from dexgrasp._core import *  # noqa: F401,F403
from dexgrasp._core import __version__  # noqa: F401
