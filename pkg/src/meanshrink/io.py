"""Expression-matrix ingestion, preprocessing and report files.

CSV conventions: UTF-8, configurable delimiter, optional header row and
label column, ``#`` comment lines ignored on read. Floats are written with
``repr`` so they read back bit for bit.
"""

import csv
import io as _io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

ORIENTATIONS = ("samples-by-genes", "genes-by-samples")


@dataclass(frozen=True)
class Dataset:
    """Samples in rows, genes in columns, with labels and a transform log."""

    values: np.ndarray = field(repr=False)
    row_labels: tuple
    col_labels: tuple
    source: str = ""
    transforms: tuple = ()

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"dataset needs a non-empty 2-D matrix, got shape {v.shape}")
        if len(self.row_labels) != v.shape[0] or len(self.col_labels) != v.shape[1]:
            raise ValueError("label counts do not match the matrix dimensions")
        if not np.all(np.isfinite(v)):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]

    def _derive(self, values, rows=None, cols=None, step=""):
        return replace(
            self,
            values=values,
            row_labels=self.row_labels if rows is None else tuple(rows),
            col_labels=self.col_labels if cols is None else tuple(cols),
            transforms=self.transforms + (step,),
        )


def from_array(values, row_labels=None, col_labels=None, source="array"):
    values = np.array(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("expected a 2-D array")
    n, p = values.shape
    rows = tuple(row_labels) if row_labels is not None else tuple(f"s{i + 1}" for i in range(n))
    cols = tuple(col_labels) if col_labels is not None else tuple(f"g{j + 1}" for j in range(p))
    return Dataset(values, rows, cols, source)


def _data_lines(path):
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                yield lineno, line


def read_matrix_csv(path, delimiter=",", header=True, label_column=True,
                    orientation="samples-by-genes"):
    """Read a numeric matrix into a samples-by-genes :class:`Dataset`.

    Cell coordinates in error messages are 1-based positions in the numeric
    body, ``(row, column)`` in the file's own orientation.
    """
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    lines = list(_data_lines(path))
    if not lines:
        raise ValueError(f"{path}: file is empty")
    rows = list(csv.reader((line for _, line in lines), delimiter=delimiter))
    linenos = [ln for ln, _ in lines]
    col_labels = None
    if header:
        head = [c.strip() for c in rows[0]]
        col_labels = head[1:] if label_column else head
        rows, linenos = rows[1:], linenos[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    row_labels, body = [], []
    for i, (row, lineno) in enumerate(zip(rows, linenos), start=1):
        if len(row) != width:
            raise ValueError(f"{path}: ragged row at line {lineno}: {len(row)} fields, expected {width}")
        if label_column:
            row_labels.append(row[0].strip())
            row = row[1:]
        vals = []
        for j, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise ValueError(f"{path}: non-numeric cell {cell.strip()!r} at ({i},{j}) (line {lineno})")
            vals.append(v)
        body.append(vals)
    values = np.array(body, dtype=float)
    if values.shape[1] == 0:
        raise ValueError(f"{path}: no numeric columns")
    if col_labels is not None and len(col_labels) != values.shape[1]:
        raise ValueError(f"{path}: header has {len(col_labels)} labels for {values.shape[1]} columns")
    n_rows, n_cols = values.shape
    rows_l = tuple(row_labels) if label_column else tuple(f"r{i + 1}" for i in range(n_rows))
    cols_l = tuple(col_labels) if col_labels is not None else tuple(f"c{j + 1}" for j in range(n_cols))
    if orientation == "genes-by-samples":
        values, rows_l, cols_l = values.T.copy(), cols_l, rows_l
    return Dataset(values, rows_l, cols_l, str(path), (f"read {orientation}",))


def write_matrix_csv(ds, path, delimiter=","):
    """Write a dataset with a header row and a label column."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["sample", *ds.col_labels])
        for label, row in zip(ds.row_labels, ds.values):
            w.writerow([label, *(repr(float(v)) for v in row)])


def select_genes(ds, k):
    """Keep the first ``k`` gene columns in file order."""
    k = int(k)
    if not 1 <= k <= ds.p:
        raise ValueError(f"gene count must lie in [1, {ds.p}], got {k}")
    return ds._derive(ds.values[:, :k].copy(), cols=ds.col_labels[:k], step=f"first {k} genes")


def standardize_arrays(ds):
    """Divide each sample by its standard deviation across genes (divisor p - 1)."""
    if ds.p < 2:
        raise ValueError("standardization needs at least 2 genes")
    sd = ds.values.std(axis=1, ddof=1)
    zero = np.flatnonzero(~(sd > 0))
    if zero.size:
        raise ValueError(f"sample {ds.row_labels[zero[0]]!r} has zero variance across genes")
    return ds._derive(ds.values / sd[:, None], step="standardize arrays")


def split_indices(n, n_train, rng):
    """Sorted train and test row indices for a uniform random split."""
    if not 1 <= n_train < n:
        raise ValueError(f"training size must lie in [1, {n - 1}], got {n_train}")
    perm = rng.permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_train_test(ds, n_train, rng):
    tr, te = split_indices(ds.n, int(n_train), rng)
    rows = np.asarray(ds.row_labels, dtype=object)
    return (
        ds._derive(ds.values[tr], rows=rows[tr], step=f"train split ({n_train})"),
        ds._derive(ds.values[te], rows=rows[te], step=f"test split ({ds.n - n_train})"),
    )


# ---------------------------------------------------------------------------
# reports


def _f(x):
    return repr(float(x))


def _meta_lines(meta):
    return [f"# {k}: {v}" for k, v in meta.items()]


RISK_COLUMNS = ("cell", "sigma", "mu", "errors", "n", "p", "estimator",
                "risk", "se", "replications", "prial", "failures")
SWEEP_COLUMNS = ("family", "rho", "estimator", "risk", "se", "replications", "failures")
EPR_COLUMNS = ("n_train", "estimator", "epr", "se", "replications", "failures")


def _risk_tables(report):
    from .risk import RiskReport, SweepReport, EprReport

    if isinstance(report, RiskReport):
        return "risk", [report]
    if isinstance(report, (list, tuple)) and all(isinstance(r, RiskReport) for r in report):
        return "risk", list(report)
    if isinstance(report, SweepReport):
        return "sweep", report
    if isinstance(report, EprReport):
        return "epr", report
    raise TypeError(f"cannot write a report of type {type(report).__name__}")


def _csv_rows(kind, rep):
    if kind == "risk":
        for cell, r in enumerate(rep):
            d = r.design
            for row in r.rows:
                yield [cell, d["sigma"], d["mu"], d["errors"], d["n"], d["p"], row.name,
                       _f(row.risk), _f(row.se), row.replications, _f(row.prial), row.failures]
    elif kind == "sweep":
        for rho, r in zip(rep.grid, rep.reports):
            for row in r.rows:
                yield [rep.family, _f(rho), row.name, _f(row.risk), _f(row.se),
                       row.replications, row.failures]
    else:
        for row in rep.rows:
            yield [row.n_train, row.name, _f(row.epr), _f(row.se), row.replications, row.failures]


def _report_meta(kind, rep, extra):
    from . import __version__

    meta = {"meanshrink": __version__, "report": kind}
    if kind == "risk":
        if rep:
            meta["seed"] = rep[0].seed
            meta["replications"] = rep[0].replications
            meta["prial_baseline"] = rep[0].baseline
        for i, r in enumerate(rep):
            meta[f"design[{i}]"] = "; ".join(f"{k}={v}" for k, v in r.design.items())
            for row in r.rows:
                if row.error:
                    meta[f"error[{i}].{row.name}"] = row.error
    else:
        meta["seed"] = rep.seed
        meta["replications"] = rep.replications
        rows = rep.reports[0].rows if kind == "sweep" and rep.reports else getattr(rep, "rows", [])
        if kind == "sweep" and rep.reports:
            d = dict(rep.reports[0].design)
            d.pop("sigma")
            meta["family"] = rep.family
            meta["design"] = "; ".join(f"{k}={v}" for k, v in d.items())
        else:
            meta.update({k: v for k, v in getattr(rep, "meta", {}).items()})
        for row in rows:
            if row.error:
                meta[f"error.{row.name}"] = row.error
    meta.update(extra or {})
    return meta


def render_report(report, format="csv", meta=None):
    """Render a risk table, sweep or EPR report as text.

    ``format="csv"`` gives one row per (cell, estimator), (rho, estimator) or
    (n_train, estimator); ``format="text"`` lays the numbers out as a table with
    design columns first and one column per estimator. Both start with
    ``#`` metadata lines (seed, replications, design).
    """
    kind, rep = _risk_tables(report)
    lines = _meta_lines(_report_meta(kind, rep, meta))
    if format == "csv":
        cols = {"risk": RISK_COLUMNS, "sweep": SWEEP_COLUMNS, "epr": EPR_COLUMNS}[kind]
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        w.writerows(_csv_rows(kind, rep))
        return "".join(line + "\n" for line in lines) + buf.getvalue()
    if format == "text":
        return "\n".join(lines + _text_table(kind, rep)) + "\n"
    raise ValueError(f"unknown report format {format!r}; expected 'csv' or 'text'")


def write_report(report, path, format="csv", meta=None):
    """Write :func:`render_report` output to ``path``."""
    text = render_report(report, format, meta)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _fmt(x):
    return "-" if not math.isfinite(x) else f"{x:.4f}"


def _align(table):
    widths = [max(len(str(r[c])) for r in table) for c in range(len(table[0]))]
    return ["  ".join(str(v).ljust(w) for v, w in zip(r, widths)).rstrip() for r in table]


def _text_table(kind, rep):
    if kind == "risk":
        if not rep:
            return []
        labels = [row.label for row in rep[0].rows]
        table = [["sigma", "mu", "errors", "n", *labels]]
        for r in rep:
            d = r.design
            table.append([d["sigma"], d["mu"], d["errors"], d["n"], *(_fmt(row.risk) for row in r.rows)])
        return _align(table)
    if kind == "sweep":
        if not rep.reports:
            return []
        table = [["rho", *(row.label for row in rep.reports[0].rows)]]
        for rho, r in zip(rep.grid, rep.reports):
            table.append([f"{rho:g}", *(_fmt(row.risk) for row in r.rows)])
        return _align(table)
    sizes = sorted({row.n_train for row in rep.rows})
    labels = list(dict.fromkeys(row.label for row in rep.rows))
    if not sizes:
        return []
    table = [["n_train", *labels]]
    for s in sizes:
        table.append([s, *(_fmt(row.epr) for row in rep.rows if row.n_train == s)])
    return _align(table)


def read_report_csv(path):
    """Read a CSV report back as ``(meta, rows)``; numeric fields become floats."""
    meta, text = {}, []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                meta[key.strip()] = value.strip()
            elif line.strip():
                text.append(line)
    reader = csv.DictReader(text)
    rows = []
    for rec in reader:
        out = {}
        for k, v in rec.items():
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
        rows.append(out)
    return meta, rows


def render_estimate(labels, estimate, meta=None):
    """Render an estimate vector as ``#`` metadata plus ``gene,estimate`` rows."""
    buf = _io.StringIO()
    for line in _meta_lines(meta or {}):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gene", "estimate"])
    for label, v in zip(labels, estimate):
        w.writerow([label, _f(v)])
    return buf.getvalue()


def write_estimate(path, labels, estimate, meta=None):
    """Write :func:`render_estimate` output to ``path``."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_estimate(labels, estimate, meta))
