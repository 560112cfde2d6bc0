"""Typed errors, mapped to CLI exit codes in :mod:`seqtrans.cli`."""


class SeqTransError(Exception):
    """Base class for all package errors."""


class ConfigError(SeqTransError):
    """Invalid configuration, incompatible shapes, or bad usage (exit code 1)."""


class DataError(SeqTransError):
    """Malformed or inconsistent input data (exit code 2)."""


class NumericalError(SeqTransError):
    """Non-finite values or a failed numerical procedure (exit code 3)."""


class TrainingDiverged(NumericalError):
    """Training loss became non-finite; the trial is aborted."""


class UndefinedMetricError(DataError):
    """Metric is undefined for the given scores/labels (e.g. single-class input)."""
