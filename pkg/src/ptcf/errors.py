"""Exception types shared by all modules."""


class DomainError(ValueError):
    pass


class StructuralError(ValueError):
    pass


class ResourceCapError(RuntimeError):
    pass


class RegularityError(ValueError):
    pass


class DivergenceError(ArithmeticError):
    pass


class InconsistencyError(RuntimeError):
    pass


class QuadratureError(ArithmeticError):
    pass
