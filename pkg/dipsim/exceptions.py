"""
Error types shared by the simulation apps.
"""
from django.core.exceptions import ValidationError


class InputError(ValidationError):
    """
    Invalid argument to a simulation operation.

    Codes in use: dimension, range, empty, group, sampler, overlap, format.
    """

    def __init__(self, message, code='range', params=None):
        super().__init__(message, code=code, params=params)

    def __str__(self):
        return '; '.join(self.messages)


class DimensionMismatch(InputError):
    def __init__(self, expected, got):
        super().__init__(f'dimension mismatch: expected {expected}, got {got}', code='dimension')
        self.expected = expected
        self.got = got


class UnsupportedAnalyticForm(NotImplementedError):
    """Raised by base measures that have no closed-form box probability."""
