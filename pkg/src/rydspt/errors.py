"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or parameter set (CLI exit code 2)."""


class DegenerateGeometryError(ConfigError):
    """Coincident atoms survived the resampling budget; V_kl would diverge."""


class SingularChannelError(ConfigError):
    """1 + C_b,p^k vanished for some atom; channel coefficients undefined."""


class NumericalError(RuntimeError):
    """Integration or linear-algebra failure (CLI exit code 3)."""


class ImpossibleJumpError(NumericalError):
    """A jump was selected whose operator annihilates the state.

    Signals inconsistent rate bookkeeping between the no-jump generator and
    the channel set.
    """
