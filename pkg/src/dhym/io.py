"""Flat key-value configs and CSV artifacts."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mollify import PotentialSample
from .torus_solver import PeriodicField


class ConfigError(ValueError):
    pass


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value
    return out


def parse_numbers(text, dtype=float):
    """Comma or whitespace separated numbers; complex entries like ``0.1+0.2j`` allowed."""
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        return np.array([dtype(p) for p in parts])
    except ValueError as exc:
        raise ConfigError(f"cannot parse numbers from {text!r}") from exc


def parse_matrix(text, n):
    vals = parse_numbers(text, complex)
    if vals.size != n * n:
        raise ConfigError(f"expected {n * n} entries for an {n}x{n} matrix, got {vals.size}")
    return vals.reshape(n, n)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def read_csv(path):
    """Header and rows as a dict of columns (floats where possible)."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    cols = {}
    for i, name in enumerate(header):
        col = [r[i] for r in rows]
        try:
            cols[name] = np.array([float(x) for x in col])
        except ValueError:
            cols[name] = col
    return cols


def write_two_column(path, x, y, comment=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"# {comment}\n" if comment else ""
    body = "".join(f"{a!r} {b!r}\n" for a, b in zip(map(float, x), map(float, y)))
    path.write_text(header + body)


# ---------------------------------------------------------------------------
# solver artifacts

PATH_HEADER = ("t", "d_t", "residual", "cone_margin", "newton_iters")


def write_path_log(path, records):
    write_csv(path, PATH_HEADER, ([r.t, r.d_t, r.residual, r.cone_margin, r.newton_iters] for r in records))


def write_field(path, field, name="value"):
    """One row per grid point: active coordinates then the value."""
    grids = field.grid()
    cols = [g.ravel() for g in grids] + [field.values.ravel()]
    write_csv(path, list(field.active_coords) + [name], zip(*cols))


def read_field(path):
    cols = read_csv(path)
    names = list(cols)
    coords, value = names[:-1], cols[names[-1]]
    shape = tuple(len(np.unique(cols[c])) for c in coords)
    if int(np.prod(shape)) != value.size:
        raise ConfigError(f"{path}: field is not a full tensor grid")
    # rows are written in C order of the grid
    return PeriodicField(value.reshape(shape), tuple(coords))


# ---------------------------------------------------------------------------
# potentials

POTENTIAL_HEADER = ("n", "spacing", "center", "shape")


def write_potential(path, sample):
    center = ";".join(repr(complex(c)) for c in np.atleast_1d(sample.center))
    shape = "x".join(str(s) for s in sample.values.shape)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POTENTIAL_HEADER)
        w.writerow([sample.n, repr(float(sample.spacing)), center, shape])
        for v in sample.values.ravel():
            w.writerow([repr(float(v))])


def read_potential(path):
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != POTENTIAL_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(POTENTIAL_HEADER)}")
        n, spacing, center, shape = next(reader)
        values = np.array([float(r[0]) for r in reader])
    shape = tuple(int(s) for s in shape.split("x"))
    if len(shape) != 2 * int(n) or values.size != int(np.prod(shape)):
        raise ConfigError(f"{path}: value count does not match shape")
    centers = np.array([complex(c) for c in center.split(";")])
    return PotentialSample(values.reshape(shape), float(spacing), centers)


# ---------------------------------------------------------------------------
# suite reports

REPORT_HEADER = ("name", "trials", "violations", "worst_margin", "seed")


def write_reports(path, reports):
    write_csv(path, REPORT_HEADER, ([r.name, r.trials, r.violations, r.worst_margin, r.seed] for r in reports))
