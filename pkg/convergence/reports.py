"""
Tabular results of convergence sweeps and moment checks.

Both report types flatten to rows of (level, box_id, statistic, value,
mc_sigma) for CSV output and nest naturally as JSON.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from django.core.serializers.json import DjangoJSONEncoder

from dipsim.exceptions import InputError

CSV_COLUMNS = ('level', 'box_id', 'statistic', 'value', 'mc_sigma')

# statistics that are distances between probabilities and so lie in [0, 1]
DISTANCES = {'base_gap', 'ks', 'sup_gap'}


def format_float(value):
    """17 significant digits: enough to read back the identical double."""
    if value is None:
        return ''
    return format(float(value), '.17g')


class ReportRow(NamedTuple):
    level: int
    box_id: int
    statistic: str
    value: float
    mc_sigma: float

    def as_csv(self):
        return [self.level, self.box_id, self.statistic, format_float(self.value), format_float(self.mc_sigma)]


class NumpyJSONEncoder(DjangoJSONEncoder):
    """DjangoJSONEncoder that also understands numpy scalars and arrays."""

    def default(self, o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        return super().default(o)


def json_ready(value):
    """Non-finite floats become null so the output stays strict JSON."""
    if isinstance(value, dict):
        return {key: json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(item) for item in value]
    if isinstance(value, np.ndarray):
        return json_ready(value.tolist())
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dump_json(payload, fp):
    json.dump(json_ready(payload), fp, cls=NumpyJSONEncoder, indent=2, allow_nan=False)
    fp.write('\n')


@dataclass
class ConvergenceReport:
    """
    Per-level statistics of a k- or m-sweep.

    ``sweep`` is 'k' or 'm'. Levels must be strictly increasing; distance
    statistics must lie in [0, 1].
    """

    sweep: str
    levels: list
    rows: list = field(default_factory=list)
    reps: int = 0
    seed: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sweep not in ('k', 'm'):
            raise InputError(f"sweep variable must be 'k' or 'm', got {self.sweep!r}", code='format')
        levels = [int(v) for v in self.levels]
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise InputError(f'levels must be strictly increasing, got {levels}', code='range')
        self.levels = levels

    def add(self, level, box_id, statistic, value, mc_sigma=0.0):
        value = float(value)
        if statistic in DISTANCES and not -1e-12 <= value <= 1.0 + 1e-12:
            raise ValueError(f'{statistic} must lie in [0, 1], got {value!r}')
        self.rows.append(ReportRow(int(level), int(box_id), statistic, value, float(mc_sigma)))

    def column(self, statistic, box_id=None):
        """Values of ``statistic`` (for one box, or the max over boxes) in level order."""
        out = []
        for level in self.levels:
            values = [
                r.value for r in self.rows
                if r.level == level and r.statistic == statistic and (box_id is None or r.box_id == box_id)
            ]
            out.append(max(values) if values else math.nan)
        return np.array(out)

    def write_csv(self, fp):
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(CSV_COLUMNS + ('sweep', 'reps', 'seed'))
        for row in self.rows:
            writer.writerow(row.as_csv() + [self.sweep, self.reps, '' if self.seed is None else self.seed])

    def as_dict(self):
        return {
            'sweep': self.sweep,
            'levels': self.levels,
            'reps': self.reps,
            'seed': self.seed,
            'meta': self.meta,
            'rows': [row._asdict() for row in self.rows],
        }

    def write_json(self, fp):
        dump_json(self.as_dict(), fp)


@dataclass(frozen=True)
class Moments:
    """First and second moments of (P(B_1), ..., P(B_n))."""

    mean: np.ndarray
    variance: np.ndarray
    product: np.ndarray

    def as_dict(self):
        return asdict(self)


@dataclass
class MomentCheck:
    """
    Empirical moments of sampled box probabilities against the Dirichlet
    closed forms, with z-scores ``(empirical - analytic) / mc_sigma``.
    """

    boxes: list
    analytic: Moments
    empirical: Moments
    z_mean: np.ndarray
    z_variance: np.ndarray
    z_product: np.ndarray
    mc_sigma_mean: np.ndarray
    mc_sigma_variance: np.ndarray
    mc_sigma_product: np.ndarray
    reps: int
    threshold: float
    seed: int = None

    @property
    def max_abs_z(self):
        scores = np.concatenate([self.z_mean, self.z_variance, self.z_product[np.triu_indices(len(self.boxes), 1)]])
        return float(np.max(np.abs(scores))) if scores.size else 0.0

    @property
    def passed(self):
        return self.max_abs_z <= self.threshold

    def failures(self):
        """Human-readable lines for every statistic with |z| above the threshold."""
        lines = []
        for row in self.rows():
            if row.statistic.startswith('z_') and abs(row.value) > self.threshold:
                lines.append(f'box {row.box_id}: {row.statistic} = {row.value:.3f} (|z| > {self.threshold})')
        return lines

    def rows(self):
        n = len(self.boxes)
        out = []
        for i in range(n):
            out += [
                ReportRow(self.reps, i, 'mean', self.empirical.mean[i], self.mc_sigma_mean[i]),
                ReportRow(self.reps, i, 'mean_analytic', self.analytic.mean[i], 0.0),
                ReportRow(self.reps, i, 'z_mean', self.z_mean[i], 0.0),
                ReportRow(self.reps, i, 'variance', self.empirical.variance[i], self.mc_sigma_variance[i]),
                ReportRow(self.reps, i, 'variance_analytic', self.analytic.variance[i], 0.0),
                ReportRow(self.reps, i, 'z_variance', self.z_variance[i], 0.0),
            ]
        for i in range(n):
            for j in range(i + 1, n):
                pair = i * n + j
                out += [
                    ReportRow(self.reps, pair, 'product', self.empirical.product[i, j], self.mc_sigma_product[i, j]),
                    ReportRow(self.reps, pair, 'product_analytic', self.analytic.product[i, j], 0.0),
                    ReportRow(self.reps, pair, 'z_product', self.z_product[i, j], 0.0),
                ]
        return out

    def write_csv(self, fp):
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(CSV_COLUMNS + ('seed',))
        for row in self.rows():
            writer.writerow(row.as_csv() + ['' if self.seed is None else self.seed])

    def as_dict(self):
        return {
            'boxes': [box.as_dict() for box in self.boxes],
            'reps': self.reps,
            'seed': self.seed,
            'threshold': self.threshold,
            'passed': self.passed,
            'max_abs_z': self.max_abs_z,
            'analytic': self.analytic.as_dict(),
            'empirical': self.empirical.as_dict(),
            'z_mean': self.z_mean,
            'z_variance': self.z_variance,
            'z_product': self.z_product,
        }

    def write_json(self, fp):
        dump_json(self.as_dict(), fp)


@dataclass
class InvarianceCheck:
    """
    Per-path invariance gaps of sampled paths against a tolerance.

    In CSV rows ``box_id`` holds the path index.
    """

    group: dict
    gaps: np.ndarray
    tolerance: float
    boxes: int
    seed: int = None

    @property
    def reps(self):
        return len(self.gaps)

    @property
    def max_gap(self):
        return float(np.max(self.gaps)) if len(self.gaps) else 0.0

    @property
    def passed(self):
        return self.max_gap <= self.tolerance

    def failures(self):
        return [
            f'path {i}: invariance gap {gap:.3e} > {self.tolerance:g}'
            for i, gap in enumerate(self.gaps) if gap > self.tolerance
        ]

    def rows(self):
        return [ReportRow(self.reps, i, 'invariance_gap', gap, 0.0) for i, gap in enumerate(self.gaps)]

    def write_csv(self, fp):
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(CSV_COLUMNS + ('seed',))
        for row in self.rows():
            writer.writerow(row.as_csv() + ['' if self.seed is None else self.seed])

    def as_dict(self):
        return {
            'group': self.group,
            'reps': self.reps,
            'boxes': self.boxes,
            'seed': self.seed,
            'tolerance': self.tolerance,
            'passed': self.passed,
            'max_gap': self.max_gap,
            'gaps': self.gaps,
        }

    def write_json(self, fp):
        dump_json(self.as_dict(), fp)
