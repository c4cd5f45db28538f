"""Exception hierarchy shared across the package."""


class DepsemError(Exception):
    pass


class DimensionError(DepsemError, ValueError):
    pass


class RankError(DepsemError, ValueError):
    pass


class NumericError(DepsemError, ArithmeticError):
    pass


class FormatError(DepsemError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(DepsemError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class InputError(DepsemError, ValueError):
    pass


class VocabularyError(DepsemError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DataError(DepsemError, ValueError):
    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"sentence {index}: {message}"
        super().__init__(message)


class LogicParseError(DepsemError, ValueError):
    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"token {index}: {message}"
        super().__init__(message)


class SpecError(DepsemError, ValueError):
    pass


class TrainingError(DepsemError, RuntimeError):
    pass
