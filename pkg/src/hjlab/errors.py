"""Exception hierarchy shared by every module of the package."""


class HJError(Exception):
    """Base class for all package errors.

    ``code`` is a short machine-readable tag used by the command line
    harness when it maps an exception to a structured error message.
    """

    code = "hj_error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"error": self.code, "message": str(self), "details": self.details}


class NonConvergence(HJError):
    code = "non_convergence"


class SingularHessian(HJError):
    code = "singular_hessian"


class ValidationFailure(HJError):
    code = "validation_failure"

    def __init__(self, message, report=None, **details):
        super().__init__(message, **details)
        self.report = report


class FootOutsideBox(HJError):
    code = "foot_outside_box"


class BlowUp(HJError):
    code = "blow_up"


class DegenerateConvexity(HJError):
    code = "degenerate_convexity"


class WindowEmpty(HJError):
    code = "window_empty"


class GenerationExhausted(HJError):
    code = "generation_exhausted"


class TooManyMembers(HJError):
    code = "too_many_members"


class DegenerateFit(HJError):
    code = "degenerate_fit"


class SeamMismatch(HJError):
    code = "seam_mismatch"


class NonNestedRegions(HJError):
    code = "non_nested_regions"


class ConfigError(HJError):
    code = "config_error"

    def __init__(self, message, line=None, field=None, **details):
        super().__init__(message, line=line, field=field, **details)
        self.line = line
        self.field = field
