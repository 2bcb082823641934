"""Weighted sparse recovery from phaseless measurements.

Modules
-------
wcore      weighted sparsity primitives and best k-term approximation
cvxsolve   weighted basis pursuit solvers and an exact LP reference
phaseless  sign-enumeration and alternating solvers for magnitude data
certify    WRIP / SWRIP certificates, constants and a WNSP falsifier
labbench   experiment harness
cli        command-line frontend
"""
__version__ = "0.1.0"
