"""Column-oriented time series with a stable CSV encoding.

Floats are written with 17 significant digits so that a write/read cycle
reproduces every value bit for bit.
"""

import csv
import io

import numpy as np


def moment_column(p):
    """Column name for the moment of order ``p``, e.g. ``m_1.5``."""
    return f"m_{float(p):g}"


class TimeSeries:
    """Ordered named columns sharing one time axis ``t``.

    Rows are appended one at a time during a run; columns are exposed as
    numpy arrays.
    """

    def __init__(self, columns, meta=None):
        columns = list(columns)
        if not columns or columns[0] != "t":
            raise ValueError("the first column must be 't'")
        self.columns = columns
        self._rows = []
        self.meta = dict(meta or {})

    @classmethod
    def from_arrays(cls, data, meta=None):
        series = cls(list(data), meta)
        arrays = [np.asarray(v, dtype=float) for v in data.values()]
        for row in zip(*arrays):
            series._rows.append(tuple(float(x) for x in row))
        return series

    def append(self, **values):
        missing = set(self.columns) - set(values)
        if missing:
            raise KeyError(f"missing columns: {sorted(missing)}")
        self._rows.append(tuple(float(values[c]) for c in self.columns))

    def __len__(self):
        return len(self._rows)

    def __contains__(self, name):
        return name in self.columns

    def __getitem__(self, name):
        j = self.columns.index(name)
        return np.array([row[j] for row in self._rows], dtype=float)

    @property
    def t(self):
        return self["t"]

    def window(self, t_lo, t_hi):
        """Boolean mask of rows with ``t_lo <= t <= t_hi``."""
        t = self.t
        return (t >= t_lo) & (t <= t_hi)

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self._rows:
            writer.writerow([format(x, ".17g") for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            series = cls(header)
            for row in reader:
                if row:
                    series._rows.append(tuple(float(x) for x in row))
        return series
