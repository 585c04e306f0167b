"""Numerical verifier and simulator for odd perturbations of 1+1 dimensional kinks."""
# Standard Library
import logging

__version__ = "0.1.0"

LOG_NAME = "kink_stability"
# quiet unless the command line asks for a log file
logging.getLogger(LOG_NAME).setLevel(logging.CRITICAL)
