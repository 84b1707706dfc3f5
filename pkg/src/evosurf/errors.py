"""Exception hierarchy shared by all evosurf modules."""


class EvosurfError(Exception):
    """Base class; ``category`` is printed by the CLI on failure."""

    category = "error"


class UnsupportedDegree(EvosurfError, ValueError):
    category = "quadrature"


class DegenerateJacobian(EvosurfError):
    category = "geometry"


class FoldedElement(DegenerateJacobian):
    category = "geometry"


class InvalidMesh(EvosurfError, ValueError):
    category = "mesh"


class ConnectivityMismatch(EvosurfError, ValueError):
    category = "mesh"


class ParseError(EvosurfError, ValueError):
    category = "io"

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class DimensionMismatch(EvosurfError, ValueError):
    category = "fem"


class SingularMatrix(EvosurfError):
    category = "solver"


class NonFiniteSolution(EvosurfError):
    category = "solver"


class ZeroMeanCurvature(EvosurfError):
    category = "evolution"


class NoConvergence(EvosurfError):
    category = "evolution"

    def __init__(self, max_iter, residual):
        self.max_iter = max_iter
        self.residual = residual
        super().__init__(
            f"fixed-point iteration did not converge in {max_iter} iterations "
            f"(residual {residual:.3e})"
        )


class DegenerateLevels(EvosurfError, ValueError):
    category = "convergence"


class ConfigError(EvosurfError, ValueError):
    category = "config"
