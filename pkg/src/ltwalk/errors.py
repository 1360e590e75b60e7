"""Exception types shared across the package."""


class LtwalkError(Exception):
    """Base class for all package errors."""


# --- step distribution construction ---

class NegativeProbability(LtwalkError):
    pass


class EmptySupport(LtwalkError):
    pass


class DimensionMismatch(LtwalkError):
    pass


class MassNotOne(LtwalkError):
    pass


class UnknownPreset(LtwalkError):
    pass


class ParameterOutOfRange(LtwalkError):
    pass


# --- local-time functionals ---

class UnregisteredObservable(LtwalkError):
    pass


class NegativeAlpha(LtwalkError):
    pass


# --- exact analysis ---

class MemoryCapExceeded(LtwalkError):
    pass


class DimensionUnsupported(LtwalkError):
    pass


class NumericalNegativity(LtwalkError):
    pass


class GammaOutOfRange(LtwalkError):
    pass


class HorizonExceeded(LtwalkError):
    pass


class NotMonotone(LtwalkError):
    pass


class SeriesDivergent(LtwalkError):
    pass


class IteratedLogUndefined(LtwalkError):
    pass


# --- experiments ---

class DeltaOutOfRange(LtwalkError):
    pass


class RecurrentWalkRefused(LtwalkError):
    pass


# --- cli / config ---

class ConfigParse(LtwalkError):
    pass
