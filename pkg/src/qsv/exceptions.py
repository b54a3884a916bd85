"""Exception hierarchy for qsv."""


class QsvError(Exception):
    """Base class for every error raised by qsv."""


class DimensionMismatchError(QsvError, ValueError):
    """Operands have different Hilbert-space dimensions."""


class NotPureStateError(QsvError, ValueError):
    """A pure target state was required."""


class LinearDependenceError(QsvError, ValueError):
    """An operator lies in the span of those already selected."""


class UnphysicalStateError(QsvError, ValueError):
    """A reconstructed operator is not a density matrix."""


class StepError(QsvError):
    """An error that can be attributed to one step of a protocol."""

    suffix = ""

    def __init__(self, message: str, step: int | None = None):
        self.reason = message
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message + self.suffix)

    def at_step(self, step: int) -> "StepError":
        """Same error, attributed to a step."""
        return type(self)(self.reason, step=step)


class InfeasibleConstraintsError(StepError):
    """The compatible set is empty: the measured data must be re-acquired."""

    suffix = "; stop the verification and re-measure"


class SolverFailureError(StepError):
    """The interior-point iteration did not reach a trustworthy optimum."""


class EstimateInconsistencyError(StepError, RuntimeError):
    """A state estimate produced an infeasible look-ahead set."""


class ConfigError(QsvError, ValueError):
    """Experiment configuration is invalid."""
