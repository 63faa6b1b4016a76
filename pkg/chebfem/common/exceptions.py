from typing import Optional, Sequence, Tuple


class ChebFEMException(Exception):
    pass


class ContractViolation(ChebFEMException):
    def __init__(self, operation: str, reason: str):
        super().__init__(operation, reason)
        self.operation = operation
        self.reason = reason

    def __str__(self):
        return f"ContractViolation: {self.operation}: {self.reason}"


class ExpressionSyntaxError(ChebFEMException):
    def __init__(self, text: str, offset: int, reason: str):
        super().__init__(text, offset, reason)
        self.text = text
        self.offset = offset
        self.reason = reason

    def __str__(self):
        return f"ExpressionSyntaxError: {self.reason} at offset {self.offset} in '{self.text}'"


class ExpressionEvalError(ChebFEMException):
    def __init__(self, reason: str, point: Optional[Tuple[float, float]] = None):
        super().__init__(reason, point)
        self.reason = reason
        self.point = point

    def __str__(self):
        if self.point is None:
            return f"ExpressionEvalError: {self.reason}"
        return f"ExpressionEvalError: {self.reason} at (x={self.point[0]!r}, y={self.point[1]!r})"


class MeshFormatError(ChebFEMException):
    def __init__(self, reason: str, element: Optional[int] = None):
        super().__init__(reason, element)
        self.reason = reason
        self.element = element

    def __str__(self):
        if self.element is None:
            return f"MeshFormatError: {self.reason}"
        return f"MeshFormatError: element {self.element}: {self.reason}"


class GeometryError(ChebFEMException):
    def __init__(self, reason: str, element: Optional[int] = None, point: Optional[Tuple[float, float]] = None):
        super().__init__(reason, element, point)
        self.reason = reason
        self.element = element
        self.point = point

    def __str__(self):
        where = ''
        if self.element is not None:
            where += f" element {self.element}"
        if self.point is not None:
            where += f" at (u={self.point[0]!r}, v={self.point[1]!r})"
        return f"GeometryError:{where} {self.reason}"


class NonConformingMeshError(ChebFEMException):
    def __init__(self, reason: str, elements: Sequence[int] = ()):
        super().__init__(reason, elements)
        self.reason = reason
        self.elements = list(elements)

    def __str__(self):
        elements = ','.join(str(e) for e in self.elements)
        return f"NonConformingMeshError: {self.reason} (elements {elements})"


class IntegrationError(ChebFEMException):
    def __init__(self, point: Tuple[float, float]):
        super().__init__(point)
        self.point = point

    def __str__(self):
        return f"IntegrationError: non-finite integrand at (u={self.point[0]!r}, v={self.point[1]!r})"


class AssemblyError(ChebFEMException):
    pass


class MassNotPositiveDefinite(ChebFEMException):
    def __init__(self, size: int, detail: str = ''):
        super().__init__(size, detail)
        self.size = size
        self.detail = detail

    def __str__(self):
        return f"MassNotPositiveDefinite: Cholesky of the {self.size}x{self.size} mass matrix failed {self.detail}".strip()


class NumericalConsistencyError(ChebFEMException):
    pass


class ConvergenceError(ChebFEMException):
    def __init__(self, sweeps: int, off_norm: float):
        super().__init__(sweeps, off_norm)
        self.sweeps = sweeps
        self.off_norm = off_norm

    def __str__(self):
        return f"ConvergenceError: Jacobi not converged after {self.sweeps} sweeps (off-diagonal norm {self.off_norm:.3e})"


class UsageError(ChebFEMException):
    pass


class VerificationFailure(ChebFEMException):
    def __init__(self, failed: Sequence[str]):
        super().__init__(failed)
        self.failed = list(failed)

    def __str__(self):
        return f"VerificationFailure: {','.join(self.failed)}"


class MatrixFormatError(ChebFEMException):
    def __init__(self, line: str, reason: str):
        super().__init__(line, reason)
        self.line = line
        self.reason = reason

    def __str__(self):
        return f"MatrixFormatError: {self.reason}: '{self.line}'"
