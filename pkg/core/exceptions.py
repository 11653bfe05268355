"""
Domain errors shared by every app.

Each error carries a short ``category`` that management commands print as
the first token of their one-line failure message.
"""


class KDError(Exception):
    """base class for toolkit errors"""
    category = 'error'

    def __str__(self):
        return super().__str__() or self.category


class InvalidInputError(KDError, ValueError):
    """input data violates a documented precondition"""
    category = 'invalid-input'


class ConfigurationError(KDError, ValueError):
    """invalid model, run or suite configuration"""
    category = 'configuration'


class ManifestParseError(InvalidInputError):
    """malformed manifest or prediction CSV row"""
    category = 'parse'

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class ClipIOError(KDError, OSError):
    """audio or feature file missing or unreadable"""
    category = 'io'

    def __init__(self, message, clip_ids=()):
        self.clip_ids = tuple(clip_ids)
        super().__init__(message)


class UndefinedRecallError(KDError, ValueError):
    """recall is undefined because no positive labels exist"""
    category = 'undefined-recall'


class DivergenceError(KDError, ArithmeticError):
    """training produced a non-finite loss"""
    category = 'divergence'

    def __init__(self, message, record=None):
        self.record = dict(record or {})
        super().__init__(message)


class DirectionalCheckError(KDError):
    """the distilled student failed the directional comparison"""
    category = 'directional-check'

    def __init__(self, message, check=None):
        self.check = check
        super().__init__(message)
