"""Trainer exception hierarchy."""


class TrainerError(Exception):
    """Base class for all trainer failures."""


class SchemaError(TrainerError):
    """A manifest or config file violates its schema."""


class TargetBelowSource(TrainerError):
    """An augmentation target is smaller than the source count."""


class BackboneUnavailable(TrainerError):
    """Pretrained backbone weights could not be obtained."""


class UnsupportedLayer(TrainerError):
    """The model contains a layer outside the interchange operator set."""


class MissingSeedTerm(TrainerError):
    """A prototype seed term is absent from the embedding vocabulary."""


class TrainingDiverged(TrainerError):
    """Training produced a non-finite loss."""
