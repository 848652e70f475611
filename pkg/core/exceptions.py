"""
Custom exceptions for the qftnmr toolkit

This module defines the exceptions raised by the simulation, compilation and
analysis services. They provide:
- Clear error categorization per service (state algebra, circuits, period
  finding, pulse compilation, spin simulation, readout)
- Context-aware messages: every exception keeps the keyword context it was
  raised with and appends it to the message
"""
from typing import Any, Dict, List, Optional, Tuple


class QFTNMRException(Exception):
    """Base exception for all qftnmr operations"""

    def __init__(self, message: str, **context: Any):
        self.message = message
        self.context: Dict[str, Any] = context
        super().__init__(self.message)

    def __str__(self) -> str:
        details = ", ".join(
            f"{key}={value}" for key, value in self.context.items() if value is not None
        )
        if details:
            return f"{self.message} ({details})"
        return self.message


# State algebra exceptions
class QStateException(QFTNMRException):
    """Base exception for state vector / density matrix operations"""
    pass


class CapacityException(QStateException):
    """Raised when a dense operand would exceed the qubit capacity"""
    pass


class NonUnitaryException(QStateException):
    """Raised when an operator expected to be unitary is not"""

    def __init__(self, message: str, residual: float, **context: Any):
        self.residual = residual
        super().__init__(message, residual=f"{residual:.3e}", **context)


class DeviationStateException(QStateException):
    """Raised when a deviation density matrix is used where probabilities are needed"""
    pass


class InvalidSubsystemException(QStateException):
    """Raised when a spin subset is empty or out of range"""
    pass


class DimensionMismatchException(QStateException):
    """Raised when operands have incompatible dimensions"""
    pass


# Circuit exceptions
class CircuitException(QFTNMRException):
    """Base exception for gate-level circuit operations"""
    pass


class InvalidGateException(CircuitException):
    """Raised when a gate references invalid qubits or parameters"""
    pass


class MeasurementInCircuitException(CircuitException):
    """Raised when a measurement gate reaches a unitary-only code path"""
    pass


class CircuitSyntaxException(CircuitException):
    """Raised when circuit text cannot be parsed"""

    def __init__(self, message: str, line: int, **context: Any):
        self.line = line
        super().__init__(message, line=line, **context)


# Period finding exceptions
class PeriodFindingException(QFTNMRException):
    """Base exception for the period finding pipeline"""
    pass


class OracleOverflowException(PeriodFindingException):
    """Raised when function values do not fit the output register"""
    pass


class InvalidOffsetException(PeriodFindingException):
    """Raised when a periodic state offset or period is out of range"""
    pass


class FunctionTableException(PeriodFindingException):
    """Raised when a function table is malformed"""
    pass


# Pulse compiler exceptions
class PulseCompilerException(QFTNMRException):
    """Base exception for gate-to-pulse lowering"""
    pass


class UnsupportedGateException(PulseCompilerException):
    """Raised when a gate has no pulse realisation"""
    pass


class IncoherentProgramException(PulseCompilerException):
    """Raised when a program with gradients or delays is asked for a unitary"""
    pass


class PulseSyntaxException(PulseCompilerException):
    """Raised when pulse text cannot be parsed"""

    def __init__(self, message: str, position: int, **context: Any):
        self.position = position
        super().__init__(message, position=position, **context)


# Spin simulator exceptions
class SimulationException(QFTNMRException):
    """Base exception for density-matrix spin simulation"""
    pass


class InvalidSpinException(SimulationException):
    """Raised when a pulse addresses a spin outside the active system"""
    pass


class SpinCountException(SimulationException):
    """Raised when a preparation program is run on the wrong number of spins"""
    pass


class MoleculeSpecException(SimulationException):
    """Raised when a molecule specification is invalid"""
    pass


# Readout exceptions
class ReadoutException(QFTNMRException):
    """Base exception for spectra, tomography and fidelity analysis"""
    pass


class AmbiguousAssignmentException(ReadoutException):
    """Raised when two line assignments fall within the frequency resolution"""

    def __init__(
        self,
        message: str,
        collisions: List[Tuple[str, str, float]],
        **context: Any,
    ):
        self.collisions = collisions
        super().__init__(message, collisions=collisions, **context)


class SingularInversionException(ReadoutException):
    """Raised when the tomography system is rank deficient"""

    def __init__(self, message: str, rank: Optional[int] = None, **context: Any):
        self.rank = rank
        super().__init__(message, rank=rank, **context)


class UndefinedCorrelationException(ReadoutException):
    """Raised when the attenuated correlation reference has zero norm"""
    pass


class NotPeriodicSupportException(ReadoutException):
    """Raised when a state support is not an arithmetic progression"""
    pass


# Configuration exceptions
class ConfigurationException(QFTNMRException):
    """Base exception for configuration errors"""
    pass


class InvalidConfigurationException(ConfigurationException):
    """Raised when a run configuration is invalid"""
    pass
