"""Exception types shared across the package."""


class TicbenchError(Exception):
    """Base class for all errors raised by this package."""


# geometry
class EmptyLandmarkSet(TicbenchError):
    pass


class InsufficientPoints(TicbenchError):
    pass


class DegenerateConfiguration(TicbenchError):
    pass


class IncompleteEyeSet(TicbenchError):
    pass


# masks
class EmptyGrid(TicbenchError):
    pass


class DegeneratePolygon(TicbenchError):
    pass


# shared numeric contracts
class ShapeMismatch(TicbenchError):
    pass


class InvalidLoss(TicbenchError):
    pass


# caching
class NotEnoughHistory(TicbenchError):
    pass


class EmptyCache(TicbenchError):
    pass


# configuration / planning
class InvalidConfig(TicbenchError):
    pass
