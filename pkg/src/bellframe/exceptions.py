class InsufficientStatisticsError(RuntimeError):
    """A setting pair collected too few coincidences to estimate a correlation."""

    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = tuple(pairs)
