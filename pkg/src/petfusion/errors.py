"""Error taxonomy shared across the package.

The CLI maps ConfigError/usage problems to exit code 2 and everything else
to exit code 1.
"""


class PetFusionError(Exception):
    pass


class ShapeError(PetFusionError):
    """Nonconforming array shapes. Message always carries both shapes."""


class ContractError(PetFusionError):
    """An operation precondition was violated by the caller."""


class ConfigError(PetFusionError):
    """Invalid or inconsistent configuration."""


class GenerationError(PetFusionError):
    """Procedural generation could not satisfy its constraints."""


class FormatError(PetFusionError):
    """A persisted file does not match its declared format."""


class TrainingDiverged(PetFusionError):
    """Loss became non-finite; diagnostics were dumped before raising."""
