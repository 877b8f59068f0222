"""Typed failures shared across the pipeline.

The command line front end maps these onto exit codes:

    2   AssumptionError   (data outside the admissible solitonless class)
    3   NumericalError    (step control, conditioning, or region gates)
    4   SchemaError       (unreadable or inconsistent on-disk artifacts)
"""


class PipelineError(Exception):
    """Base class for all failures raised by this package."""


class AssumptionError(PipelineError):
    """A genericity condition on the scattering data failed."""


class NumericalError(PipelineError):
    """A numerical procedure could not reach its accuracy target."""


class SingularPointError(NumericalError):
    """The spectral frame degenerates at the origin of the spectral plane."""


class RegionError(NumericalError):
    """Evaluation was requested outside the validity wedge of a column."""


class StepControlError(NumericalError):
    """The adaptive integrator hit a step-size underflow or step cap."""


class ConditioningError(NumericalError):
    """A linear system was too ill-conditioned to trust."""


class SchemaError(PipelineError):
    """An on-disk artifact failed structural validation."""
