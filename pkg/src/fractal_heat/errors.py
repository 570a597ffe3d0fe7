"""Exception hierarchy shared by the library and the CLI."""


class FractalHeatError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedFamilyError(FractalHeatError, ValueError):
    """Raised when an operation needs d in {3, 4} and got something else."""

    def __init__(self, d):
        super().__init__(
            f"unsupported family d={d}: supported families are d=3 (gasket) "
            "and d=4 (tetrahedron)"
        )
        self.d = d


class DomainError(FractalHeatError, ValueError):
    """Argument outside the mathematical domain of a function."""


class StateError(FractalHeatError, RuntimeError):
    """Object is missing information required by the requested operation."""


class CFLViolation(FractalHeatError, ValueError):
    def __init__(self, h, h_max):
        super().__init__(
            f"explicit step h={h:.6g} exceeds the CFL bound h_max={h_max:.6g}; "
            "use --cfl-policy warn|ignore to run anyway"
        )
        self.h = h
        self.h_max = h_max


class SolverError(FractalHeatError, ArithmeticError):
    """Conjugate gradient failed to reach the requested tolerance."""

    def __init__(self, iterations, residual, tol):
        super().__init__(
            f"CG did not converge in {iterations} iterations "
            f"(relative residual {residual:.3e} > {tol:.1e})"
        )
        self.iterations = iterations
        self.residual = residual


class DivergenceError(FractalHeatError, ArithmeticError):
    """A non-finite value appeared in the state vector."""

    def __init__(self, step):
        super().__init__(f"non-finite value in state at step {step}")
        self.step = step
