"""Loading and validating the solver's report.csv files."""

import csv

import numpy as np


class CsvError(Exception):
    pass


def load_report(path):
    """Parse a report.csv into a dict of column name -> float array.

    Empty fields (absent EOC entries) become NaN.  Raises CsvError on
    missing files, empty tables or ragged rows.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise CsvError("cannot read %s: %s" % (path, exc)) from exc
    if len(rows) < 2:
        raise CsvError("%s has no data rows" % (path,))
    header = rows[0]
    data = {name: [] for name in header}
    for row in rows[1:]:
        if len(row) != len(header):
            raise CsvError("ragged row in %s: %r" % (path, row))
        for name, field in zip(header, row):
            if field == "":
                data[name].append(np.nan)
            else:
                try:
                    data[name].append(float(field))
                except ValueError as exc:
                    raise CsvError("bad value %r in column %s of %s"
                                   % (field, name, path)) from exc
    return {name: np.array(vals) for name, vals in data.items()}


def require_columns(table, columns, path="<csv>"):
    missing = [c for c in columns if c not in table]
    if missing:
        raise CsvError("%s is missing columns %s" % (path, missing))
