"""Exception types shared across modules."""


class ValidationError(ValueError):
    """Input violates a documented precondition or file schema."""


class ResourceLimitError(RuntimeError):
    """A configured point-count or work ceiling would be exceeded."""


class EmptySphereError(ValueError):
    """The discrete sphere S_N is empty in the requested dimension."""

    def __init__(self, d, N, context=None):
        self.d = d
        self.N = N
        self.context = context
        msg = f"sphere of squared radius {N} in dimension {d} has no lattice points"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class ModulusExhaustedError(RuntimeError):
    """The increment loop could not refine components any further."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate
