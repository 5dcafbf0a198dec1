"""Exception types shared across the package."""


class ZojadeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ZojadeError):
    """Invalid configuration, topology spec, or instance parameters."""


class EvaluationError(ZojadeError):
    """An objective evaluation produced a non-finite value."""


class InstanceConstructionError(ZojadeError):
    """A ground-truth solver failed while building a problem instance."""


class RunAborted(ZojadeError):
    """A simulation run hit a non-finite update and was stopped."""
