# SPDX-License-Identifier: MIT


class ConformalMapError(Exception):
    """Base error. ``module`` and ``check`` name the stage and the failed test."""

    def __init__(self, module, check, message):
        self.module = module
        self.check = check
        self.message = message
        super().__init__(f"[{module}:{check}] {message}")


class MeshFormatError(ConformalMapError):
    def __init__(self, check, message):
        super().__init__("mesh-core", check, message)


class MeshValidationError(ConformalMapError):
    def __init__(self, report):
        self.report = report
        failed = ", ".join(report.failed_checks)
        super().__init__("mesh-core", report.failed_checks[0], f"mesh validation failed ({failed}): {report.summary()}")


class GeometryError(ConformalMapError):
    pass


class PartitionError(ConformalMapError):
    pass


class SolverError(ConformalMapError):
    pass


class ConvergenceError(ConformalMapError):
    pass
