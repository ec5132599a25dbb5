class SignalTooShortError(ValueError):
    """The waveform does not cover a single analysis window."""


class NoAdmissiblePairError(ValueError):
    """utterance too short for constraints: no onset-offset pair is admissible."""


class LayoutMismatchError(ValueError):
    """A model's stored layout fingerprint does not match the active layout."""


class ModelFormatError(ValueError):
    """A model file failed magic, version or consistency checks."""
