"""Exception hierarchy shared across the pipeline."""


class MorsegridError(Exception):
    pass


class ParseError(MorsegridError):
    def __init__(self, offset: int, reason: str):
        super().__init__(f"parse error at byte {offset}: {reason}")
        self.offset = offset
        self.reason = reason


class TruncatedError(MorsegridError):
    pass


class UnsupportedDepth(MorsegridError):
    pass


class UnsupportedFormat(MorsegridError):
    pass


class IncompleteSurjection(MorsegridError):
    def __init__(self, key):
        super().__init__(f"surjection table has no entry for key {key}")
        self.key = key


class CropError(MorsegridError):
    pass


class BoundsError(MorsegridError):
    pass


class AcyclicityViolation(MorsegridError):
    """A closed V-path was found; the gradient builder is broken."""


class OracleTooLarge(MorsegridError):
    pass


class InsufficientData(MorsegridError):
    pass


class DegreeTooHigh(MorsegridError):
    pass


class ShapeError(MorsegridError):
    pass
