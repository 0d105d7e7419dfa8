"""JSON and CSV formats shared by the library and the command line."""

import csv
import json
import warnings

import numpy as np

from .core import MphModel, validate
from .errors import ValidationError
from .extensions import FracMphModel, MiphModel, TimeChange

# column names treated as censoring indicators and dropped on read
CENSOR_COLUMNS = {"censored", "censor", "cens", "indicator", "delta", "status"}


def model_to_dict(model):
    # floats go through ``repr`` in json, which round-trips every finite double
    return {"p": model.p, "d": model.d, "pi": [float(v) for v in model.pi],
            "T": [[[float(v) for v in row] for row in Ti] for Ti in model.T]}


def model_from_dict(obj):
    """Parse and validate the ``{"p", "d", "pi", "T"}`` model schema."""
    if not isinstance(obj, dict):
        raise ValidationError("model must be a JSON object", "$")
    for key in ("p", "d", "pi", "T"):
        if key not in obj:
            raise ValidationError("missing field", key)
    p, d = obj["p"], obj["d"]
    if not isinstance(p, int) or p < 1:
        raise ValidationError("must be a positive integer", "p")
    if not isinstance(d, int) or d < 1:
        raise ValidationError("must be a positive integer", "d")
    try:
        pi = np.array(obj["pi"], dtype=float)
        T = np.array(obj["T"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"non-numeric entries ({exc})", "pi/T") from None
    if pi.shape != (p,):
        raise ValidationError(f"expected {p} entries, got shape {pi.shape}", "pi")
    if T.shape != (d, p, p):
        raise ValidationError(f"expected shape ({d}, {p}, {p}), got {T.shape}", "T")
    model = MphModel(pi, list(T), check=False)
    validate(model)
    return model


def extension_to_dict(model):
    if isinstance(model, MiphModel):
        return {"base": model_to_dict(model.base),
                "time_changes": [{"kind": tc.kind, "beta": tc.beta}
                                 for tc in model.time_changes]}
    if isinstance(model, FracMphModel):
        return {"base": model_to_dict(model.base), "alpha": model.alpha}
    return model_to_dict(model)


def any_model_from_dict(obj):
    """Plain, time-changed or fractional model, depending on the keys present."""
    if isinstance(obj, dict) and "base" in obj:
        base = model_from_dict(obj["base"])
        if "time_changes" in obj:
            try:
                tcs = [TimeChange(tc.get("kind", "identity"), float(tc.get("beta", 1.0)))
                       for tc in obj["time_changes"]]
            except (AttributeError, TypeError, ValueError) as exc:
                raise ValidationError(str(exc), "time_changes") from None
            if len(tcs) != base.d:
                raise ValidationError(f"expected {base.d} entries", "time_changes")
            return MiphModel(base, tcs)
        if "alpha" in obj:
            alpha = obj["alpha"]
            if not isinstance(alpha, (int, float)) or not 0 < alpha <= 1:
                raise ValidationError("must lie in (0, 1]", "alpha")
            return FracMphModel(base, alpha)
        raise ValidationError("extension needs 'time_changes' or 'alpha'", "$")
    return model_from_dict(obj)


def _dumps(obj, indent=""):
    # one line per top-level field, nested objects expanded one level
    lines = []
    for key, val in obj.items():
        text = _dumps(val, indent + "  ") if isinstance(val, dict) else json.dumps(val)
        lines.append(f'{indent}  {json.dumps(key)}: {text}')
    return "{\n" + ",\n".join(lines) + "\n" + indent + "}"


def dumps_model(model):
    return _dumps(extension_to_dict(model))


def loads_model(text):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg})", f"line {exc.lineno}") from None
    return any_model_from_dict(obj)


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(dumps_model(model) + "\n")


def load_model(path):
    with open(path) as fh:
        return loads_model(fh.read())


def read_csv(path, drop_censoring=True):
    """Read a headed, comma-separated numeric table.

    Returns ``(header, values)``. Any column whose name looks like a
    censoring indicator is dropped with a warning; such rows are kept and
    treated as fully observed. Unparseable cells raise
    :class:`ValidationError` naming the row (1-based, header is row 1) and
    the column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ValidationError("file is empty", str(path))
    header = [h.strip() for h in rows[0]]
    try:
        [float(h) for h in header]
    except ValueError:
        pass
    else:
        raise ValidationError("a header row is required", f"{path}:1")
    keep = list(range(len(header)))
    if drop_censoring:
        dropped = [header[j] for j in keep if header[j].lower() in CENSOR_COLUMNS]
        if dropped:
            warnings.warn(f"ignoring censoring column(s) {dropped}; "
                          "all rows are treated as observed", stacklevel=2)
            keep = [j for j in keep if header[j].lower() not in CENSOR_COLUMNS]
    values = np.empty((len(rows) - 1, len(keep)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValidationError(f"expected {len(header)} fields, got {len(row)}",
                                  f"{path}: row {r}")
        for c, j in enumerate(keep):
            try:
                values[r - 2, c] = float(row[j])
            except ValueError:
                raise ValidationError(f"cannot parse {row[j]!r} as a number",
                                      f"{path}: row {r}, column {j + 1} ({header[j]})") from None
    return [header[j] for j in keep], values


def write_csv(path, values, header=None):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if header is None:
        header = [f"x{i + 1}" for i in range(values.shape[1])]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in values:
            fh.write(",".join("%.17g" % v for v in row) + "\n")
