"""Exception hierarchy.  Every error carries a stable ``code`` string."""


class MoreauEscapeError(Exception):
    code = "ERROR"


class OutOfDomain(MoreauEscapeError, ValueError):
    code = "OUT_OF_DOMAIN"


class NoConvergence(MoreauEscapeError, RuntimeError):
    code = "NO_CONVERGENCE"


class MuTooLarge(MoreauEscapeError, ValueError):
    code = "MU_TOO_LARGE"


class DecompositionMismatch(MoreauEscapeError, ValueError):
    code = "DECOMPOSITION_MISMATCH"


class NotStronglyConvex(MoreauEscapeError, ValueError):
    code = "NOT_STRONGLY_CONVEX"


class InvalidAccuracy(MoreauEscapeError, ValueError):
    code = "INVALID_ACCURACY"


class NotContractive(MoreauEscapeError, ValueError):
    code = "NOT_CONTRACTIVE"


class NotSmooth(MoreauEscapeError, ArithmeticError):
    code = "NOT_SMOOTH"


class InadmissibleAB(MoreauEscapeError, ValueError):
    code = "INADMISSIBLE_AB"


class EpsOutOfRange(MoreauEscapeError, ValueError):
    code = "EPS_OUT_OF_RANGE"


class OracleFailure(MoreauEscapeError, RuntimeError):
    code = "ORACLE_FAILURE"

    def __init__(self, iteration: int, cause: BaseException):
        super().__init__(f"gradient oracle failed at iteration {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause


class ConfigError(MoreauEscapeError, ValueError):
    code = "CONFIG_ERROR"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
