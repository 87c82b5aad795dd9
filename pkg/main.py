"""
Entry point: ``python main.py gen --dist gauss2d --m 100 --seed 1 --out data.csv``.

The first argument names a command (gen, fit, sample, converge, check) and is
forwarded to the matching ``dip_<name>`` management command.
"""
import os
import sys

COMMANDS = ('gen', 'fit', 'sample', 'converge', 'check')


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'dipsim.settings')
    from django.core.management import execute_from_command_line

    if argv and argv[0] in COMMANDS:
        argv[0] = f'dip_{argv[0]}'
    execute_from_command_line(['dipsim', *argv])


if __name__ == '__main__':
    main()
