class GasketVariationalError(Exception):
    pass


class InputError(GasketVariationalError, ValueError):
    pass


class BoundedResourceError(InputError):
    pass


class ConfigError(InputError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field {field!r}")
        if location:
            message = f"{', '.join(location)}: {message}"
        super().__init__(message)


class InvalidIntegrandError(InputError):
    pass


class InfeasibleProblemError(GasketVariationalError):
    pass


class NonCoerciveError(GasketVariationalError):
    pass
