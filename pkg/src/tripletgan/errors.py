"""Exception hierarchy shared by every module."""


class TripletGANError(Exception):
    pass


class DimensionError(TripletGANError, ValueError):
    pass


class DomainError(TripletGANError, ValueError):
    pass


class ContractError(TripletGANError, ValueError):
    """A documented precondition was violated by the caller."""


class MiningConfigError(ContractError):
    pass


class CheckpointError(TripletGANError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class FingerprintError(CheckpointError):
    pass


class MalformedCheckpointError(CheckpointError):
    pass


class IdxFormatError(TripletGANError, ValueError):
    pass


class BadMagicError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


class DivergenceError(TripletGANError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, term, epoch, value):
        self.term = term
        self.epoch = epoch
        self.value = value
        super().__init__(f"non-finite {term} ({value!r}) at epoch {epoch}")
