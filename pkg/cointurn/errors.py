"""
Error types raised by the cointurn services

Every error derives from CoinTurnError and from the builtin exception that
fits it, so callers may catch either one.
"""


class CoinTurnError(Exception):
    """Base class for all cointurn failures"""


class InvalidParameters(CoinTurnError, ValueError):
    """Schedule, sampler or config parameters are out of their domain"""


class TooLarge(CoinTurnError, ValueError):
    """An exact computation was asked for beyond its size cap"""


class DivergentSeries(CoinTurnError, ArithmeticError):
    """The martingale coefficient series a_n does not converge"""


class NonDivergentVariance(CoinTurnError, ArithmeticError):
    """v_m stays below the requested level within the index cap"""


class HorizonExceeded(CoinTurnError, ValueError):
    """A rescaling grid reaches past the end of the sampled walk"""


class AnchorOutOfRange(CoinTurnError, ValueError):
    """The coloring anchor of the path map lies outside (eps, T]"""
