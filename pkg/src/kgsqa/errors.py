"""Exception hierarchy shared by every stage."""


class KgsqaError(Exception):
    """Base class. ``stage`` names the pipeline stage that failed, if known."""

    stage = None

    def __init__(self, message, stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class ValidationError(KgsqaError, ValueError):
    """Bad input: malformed files, violated preconditions, bad config."""


class ParseError(ValidationError):
    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        super().__init__(where + message)
        self.line = line
        self.path = path


class ReferentialError(ValidationError):
    pass


class FormatError(ValidationError):
    pass


class EmptyInputError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class ContaminationError(ValidationError):
    """A target-domain example leaked into source-domain training data."""


class NoAnswerError(KgsqaError):
    """The pipeline could not produce a fact for a question."""


class NumericalError(KgsqaError, ArithmeticError):
    pass
