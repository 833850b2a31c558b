"""Exception hierarchy.

``exit_code`` is the process exit status the command line applications
report when the exception escapes a command.
"""


class WHSplitError(Exception):
    exit_code = 1


class ConfigurationError(WHSplitError, ValueError):
    exit_code = 2


class ConjugacyError(WHSplitError, ValueError):
    """A complex root has no conjugate partner"""

    exit_code = 2


class DegenerateError(WHSplitError, ValueError):
    exit_code = 2


class DesignError(WHSplitError, ValueError):
    exit_code = 2


class CapacityError(WHSplitError):
    """Allocation enumeration would exceed the configured capacity"""

    exit_code = 3


class InstabilityError(WHSplitError):
    exit_code = 4


class SingularResponseError(WHSplitError):
    exit_code = 4


class FitDegenerateError(WHSplitError):
    exit_code = 4
