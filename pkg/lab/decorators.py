import logging
from functools import wraps

from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from dipsim.exceptions import InputError

logger = logging.getLogger(__name__)

CHECK_FAILED = 1
USAGE_ERROR = 2
IO_ERROR = 3


def exit_codes(handle):
    """
    Decorator translating errors raised by a command's ``handle`` into
    CommandErrors with stable return codes.

    InputErrors about file contents (code 'format') and OSErrors map to
    IO_ERROR; every other validation error maps to USAGE_ERROR. Check
    failures raise their own CommandError(returncode=CHECK_FAILED).
    """
    @wraps(handle)
    def wrapper(self, *args, **options):
        try:
            return handle(self, *args, **options)
        except CommandError:
            raise
        except InputError as e:
            if e.code == 'format':
                logger.error(f'Malformed input: {e}')
                raise CommandError(str(e), returncode=IO_ERROR) from e
            raise CommandError(str(e), returncode=USAGE_ERROR) from e
        except ValidationError as e:
            raise CommandError('; '.join(e.messages), returncode=USAGE_ERROR) from e
        except OSError as e:
            logger.error(f'I/O failure: {e}')
            raise CommandError(str(e), returncode=IO_ERROR) from e

    return wrapper
