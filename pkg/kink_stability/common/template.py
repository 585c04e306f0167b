# Standard Library
from abc import ABC
from abc import abstractmethod
from enum import Enum
from typing import Any
from typing import ClassVar


class KinkStabilityError(Exception):
    """Base error for computations that cannot produce a result."""

    default_message: ClassVar[str] = "Kink stability computation failed"

    def __init__(self, *args: object) -> None:
        """Default message and pass through args."""
        super().__init__(self.default_message, *args)


class ConfigError(KinkStabilityError):
    """Error for a run configuration that is malformed or out of range."""

    default_message = "Invalid run configuration"


class Outcome(str, Enum):
    """Verdict of a single check, serialised by value."""

    PASS = "pass"
    FAIL = "fail"
    INDETERMINATE = "indeterminate"

    @classmethod
    def of(cls, passed: bool) -> "Outcome":
        """Return PASS or FAIL."""
        return cls.PASS if passed else cls.FAIL


class Stage(ABC):
    """Basic template for a pipeline stage.

    A stage reads what it needs from the shared context, computes its result and
    condenses it into a JSON-ready summary.
    """

    name: ClassVar[str] = "stage"

    @abstractmethod
    def parse(self, context: Any) -> Any:
        """Collect the stage inputs from the context."""

    @abstractmethod
    def compute(self, inputs: Any) -> Any:
        """Run the numerics."""

    @abstractmethod
    def summarize(self, result: Any) -> dict[str, Any]:
        """Return the JSON summary of a result."""

    def solve(self, context: Any, /) -> tuple[Any, dict[str, Any]]:
        """Run the stage for the given context."""
        inputs = self.parse(context)
        result = self.compute(inputs)
        return result, self.summarize(result)

    def proceed(self, result: Any) -> bool:
        """Return False when later stages have nothing valid to work from."""
        return True
