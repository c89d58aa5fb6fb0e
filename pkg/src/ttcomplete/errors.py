"""Exception types.

Every error carries a short machine-readable ``code`` which the command line
front end prints on failure.
"""


class TTCError(Exception):
    code = "error"


class InvalidArgument(TTCError, ValueError):
    code = "invalid-argument"


class UnsupportedShape(TTCError, ValueError):
    code = "unsupported-shape"


class MalformedInput(TTCError, ValueError):
    code = "malformed-input"


class DegenerateWeights(TTCError, ArithmeticError):
    code = "degenerate-weights"
