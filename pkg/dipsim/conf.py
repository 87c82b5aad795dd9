"""
Access to DIP_* settings that also works when Django is not configured.
"""
from django.conf import settings


def setting(name, default):
    """
    Return ``settings.<name>`` or ``default``.

    The numerical apps are importable as a plain library; without a
    configured settings module every lookup yields its default.
    """
    if not settings.configured:
        return default
    return getattr(settings, name, default)
