class RobustAlohaError(Exception):
    pass


class InvalidShapeError(RobustAlohaError, ValueError):
    pass


class EmptyInputError(RobustAlohaError, ValueError):
    pass


class InvalidConfigError(RobustAlohaError, ValueError):
    pass


class NumericError(RobustAlohaError, ArithmeticError):
    """Non-finite input or a diverging iteration."""

    def __init__(self, message, sweep=None, origin=None):
        super().__init__(message)
        self.sweep = sweep
        self.origin = origin


class ParseError(RobustAlohaError, ValueError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class ChannelMismatchError(RobustAlohaError, ValueError):
    pass
