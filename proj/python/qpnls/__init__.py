"""Quasi-periodic solutions of the nonlinear Schroedinger equation on the torus."""

from ._core import (
    CapacityError,
    Config,
    ConfigError,
    ConvergenceError,
    DimensionError,
    EnvelopeError,
    GenericityError,
    QpnlsError,
    SingularOperatorError,
    basis,
    commands,
    match,
    measure,
    oracle,
    residual,
    run,
    solve,
    validate,
)

EXIT_CODES = {"ok": 0, "other": 1, "excision": 2, "convergence": 3, "envelope": 4}


def load(path):
    return Config.load(str(path))


__all__ = [
    "CapacityError", "Config", "ConfigError", "ConvergenceError", "DimensionError", "EnvelopeError",
    "GenericityError", "QpnlsError", "SingularOperatorError", "EXIT_CODES",
    "basis", "commands", "load", "match", "measure", "oracle", "residual", "run", "solve", "validate",
]
