"""
File helpers for the command-line runs: data CSV, JSON and JSON-lines.

Malformed file contents raise InputError with code 'format' (exit code 3);
unreadable or unwritable paths surface as OSError.
"""
import csv
import json
import logging
import math

import numpy as np

from convergence.reports import NumpyJSONEncoder, dump_json, format_float
from dipsim.exceptions import InputError
from measures.measures import Box

logger = logging.getLogger(__name__)

HEADERS = {1: ('x',), 2: ('x', 'y'), 3: ('x', 'y', 'z')}


def write_data_csv(path, points):
    """Points as CSV with header x / x,y / x,y,z and 17-digit floats."""
    points = np.asarray(points, dtype=float)
    with open(path, 'w', newline='') as fp:
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(HEADERS[points.shape[1]])
        for row in points:
            writer.writerow([format_float(v) for v in row])
    logger.info(f'Wrote {len(points)} points to {path}')


def read_data_csv(path, dim):
    """
    Data points from a CSV written by ``write_data_csv``.

    An empty file or a bare header gives an empty ``(0, dim)`` array.
    """
    rows = []
    with open(path, newline='') as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is not None and tuple(h.strip() for h in header) != HEADERS[dim]:
            raise InputError(f'{path}: line 1: expected header {",".join(HEADERS[dim])}, got {",".join(header)}', code='format')
        for row in reader:
            if not row:
                continue
            if len(row) != dim:
                raise InputError(f'{path}: line {reader.line_num}: expected {dim} values, got {len(row)}', code='format')
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise InputError(f'{path}: line {reader.line_num}: not a number in {",".join(row)}', code='format')
            if not all(math.isfinite(v) for v in values):
                raise InputError(f'{path}: line {reader.line_num}: non-finite value', code='format')
            rows.append(values)
    return np.array(rows, dtype=float).reshape(-1, dim)


def read_json(path):
    with open(path) as fp:
        try:
            return json.load(fp)
        except json.JSONDecodeError as e:
            raise InputError(f'{path}: {e}', code='format')


def write_json(path, payload):
    with open(path, 'w') as fp:
        dump_json(payload, fp)
    logger.info(f'Wrote {path}')


def write_jsonl(path, payloads):
    """One compact JSON document per line; returns the number of lines written."""
    count = 0
    with open(path, 'w') as fp:
        for payload in payloads:
            fp.write(json.dumps(payload, cls=NumpyJSONEncoder, separators=(',', ':')))
            fp.write('\n')
            count += 1
    logger.info(f'Wrote {count} lines to {path}')
    return count


def read_jsonl(path):
    out = []
    with open(path) as fp:
        for number, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise InputError(f'{path}: line {number}: {e}', code='format')
    return out


def _bound(value, infinite):
    return infinite if value is None else float(value)


def read_boxes(path):
    """
    Boxes from a JSON list of ``{"low": [...], "high": [...]}``.

    ``null`` bounds stand for -inf (low) and +inf (high).
    """
    payload = read_json(path)
    try:
        return [
            Box(
                [_bound(v, -math.inf) for v in item['low']],
                [_bound(v, math.inf) for v in item['high']],
            )
            for item in payload
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f'{path}: malformed box list: {e}', code='format')
    except InputError as e:
        raise InputError(f'{path}: {e}', code='format')


def write_report(path, report, fmt):
    with open(path, 'w', newline='') as fp:
        if fmt == 'json':
            report.write_json(fp)
        else:
            report.write_csv(fp)
    logger.info(f'Wrote {fmt} report to {path}')
