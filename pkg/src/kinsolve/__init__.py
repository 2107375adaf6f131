"""Analytical twist-and-swing inverse kinematics for articulated skeletons."""

__version__ = "0.1.0"
