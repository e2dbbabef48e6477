"""Exception types shared across the solver components."""


class ConfigError(ValueError):
    """Invalid configuration value or unresolvable reference."""


class UnknownLabelError(KeyError):
    """Concept label not present in the prior."""


class UnsupportedOperatorError(TypeError):
    """Operation requires a linear operator."""


class DivergedError(RuntimeError):
    """Latent trajectory left the finite / bounded region."""

    def __init__(self, step: int, norm: float):
        super().__init__(f"latent diverged at step t={step} (|z| = {norm:.3e})")
        self.step = step
        self.norm = norm
