"""Exception hierarchy.

Every error a caller can provoke through bad input derives from
:class:`FcmWdtwError`; the CLI maps those to exit code 2.
"""


class FcmWdtwError(ValueError):
    """Base class for user/input errors."""


class ShapeError(FcmWdtwError):
    pass


class InputTooShortError(FcmWdtwError):
    pass


class InvalidWindowError(FcmWdtwError):
    pass


class InvalidParamError(FcmWdtwError):
    pass


class InvalidMError(InvalidParamError):
    pass


class InvalidQError(InvalidParamError):
    pass


class InvalidCError(InvalidParamError):
    pass


class InsufficientDataError(FcmWdtwError):
    pass


class UndefinedMetricError(FcmWdtwError):
    pass


class DataFormatError(FcmWdtwError):
    pass
