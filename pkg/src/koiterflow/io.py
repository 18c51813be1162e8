"""Files written by runs: grid dumps, checkpoints, the ledger CSV, the JSON
summary and optional SVG line plots.

Grid dump layout: a UTF-8 text header of ``key: value`` lines ending with a
line ``---``, then the payload.  ``format: binary`` payloads are row-major
IEEE-754 float64 in little-endian byte order; ``format: ascii`` payloads
hold one row per line with 17 significant digits, which round-trips exactly.
"""

import json
import os
from pathlib import Path

import numpy as np

from .coupling import EXTRA_COLUMNS, LEDGER_COLUMNS, RunState
from .errors import KoiterFlowError

SEPARATOR = b"---\n"


class DumpFormatError(KoiterFlowError):
    """A grid dump or checkpoint that cannot be read back."""


def write_grid(path, array, spacing=(), time=None, fmt="binary", name=None):
    arr = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
    header = {
        "name": name or Path(path).stem,
        "dims": " ".join(str(n) for n in arr.shape) if arr.ndim else "",
        "spacing": " ".join(repr(float(s)) for s in spacing),
        "time": "" if time is None else repr(float(time)),
        "format": fmt,
        "dtype": "float64",
        "byteorder": "little",
    }
    text = "".join(f"{k}: {v}\n" for k, v in header.items()).encode()
    with open(path, "wb") as fh:
        fh.write(text + SEPARATOR)
        if fmt == "binary":
            fh.write(arr.tobytes(order="C"))
        elif fmt == "ascii":
            rows = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(1, -1)
            for row in rows:
                fh.write((" ".join(f"{v:.17g}" for v in row) + "\n").encode())
        else:
            raise ValueError(f"unknown dump format {fmt!r}")


def read_grid(path):
    """Returns (array, header dict)."""
    data = Path(path).read_bytes()
    cut = data.find(b"\n" + SEPARATOR)
    if cut < 0:
        raise DumpFormatError(f"{path}: missing header separator")
    header = {}
    for line in data[:cut].decode().splitlines():
        key, _, value = line.partition(":")
        header[key.strip()] = value.strip()
    payload = data[cut + 1 + len(SEPARATOR):]
    dims = tuple(int(n) for n in header.get("dims", "").split())
    if header.get("format") == "binary":
        arr = np.frombuffer(payload, dtype="<f8").copy()
    elif header.get("format") == "ascii":
        arr = np.array(payload.decode().split(), dtype=float)
    else:
        raise DumpFormatError(f"{path}: unknown format {header.get('format')!r}")
    if arr.size != int(np.prod(dims)):
        raise DumpFormatError(f"{path}: payload has {arr.size} values, header says {dims}")
    return arr.reshape(dims), header


# ---------------------------------------------------------------------------
# ledger and summary
# ---------------------------------------------------------------------------

def write_ledger(path, ledger):
    """CSV with the fixed column order; floats written with repr precision."""
    ledger = np.asarray(ledger)[:, : len(LEDGER_COLUMNS)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(LEDGER_COLUMNS) + "\n")
        for row in ledger:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_ledger(path):
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().strip().split(",")
        if tuple(head) != LEDGER_COLUMNS:
            raise DumpFormatError(f"{path}: unexpected columns {head}")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return np.array(rows).reshape(-1, len(LEDGER_COLUMNS))


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_STATE_ARRAYS = ("times", "eta", "alpha", "zeta", "ledger", "A_fluid_last")


def save_checkpoint(directory, state, *, eps_reg, grid, config_hash, fmt="binary"):
    """Directory with header.json and one grid dump per state array."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in _STATE_ARRAYS:
        arr = np.asarray(getattr(state, name), dtype=float)
        write_grid(d / f"{name}.grid", arr, time=state.times[-1], fmt=fmt, name=name)
    header = {
        "time": float(state.times[-1]),
        "step": int(state.step),
        "eps_reg": float(eps_reg),
        "grid": list(grid),
        "config_hash": config_hash,
        "min_eig": float(state.min_eig),
        "stop_reason": state.stop_reason,
        "T_star": state.T_star,
        "fp_log": state.fp_log,
        "columns": list(LEDGER_COLUMNS + EXTRA_COLUMNS),
        "payloads": [f"{n}.grid" for n in _STATE_ARRAYS],
    }
    tmp = d / "header.json.tmp"
    write_json(tmp, header)
    os.replace(tmp, d / "header.json")
    return d


def load_checkpoint(directory, config_hash=None):
    """Rebuild a RunState; refuses a checkpoint written for a different config."""
    d = Path(directory)
    try:
        header = json.loads((d / "header.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise DumpFormatError(f"{d}: unreadable checkpoint header ({exc})") from None
    if config_hash is not None and header["config_hash"] != config_hash:
        raise DumpFormatError(f"{d}: checkpoint belongs to config {header['config_hash']}, not {config_hash}")
    arrays = {name: read_grid(d / f"{name}.grid")[0] for name in _STATE_ARRAYS}
    st = RunState(
        times=[float(t) for t in arrays["times"]],
        eta=list(arrays["eta"]),
        alpha=list(arrays["alpha"]),
        zeta=list(arrays["zeta"]),
        ledger=list(arrays["ledger"]),
        A_fluid_last=arrays["A_fluid_last"],
        fp_log=header["fp_log"],
        min_eig=header["min_eig"],
        stop_reason=header["stop_reason"],
        T_star=header["T_star"],
        step=header["step"],
    )
    return st, header


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def svg_line_plot(path, x, series, title="", width=640, height=360):
    """Minimal SVG line chart; ``series`` maps label -> y values."""
    x = np.asarray(x, dtype=float)
    pad = 48
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    lo = min(float(np.min(y)) for y in ys) if ys else 0.0
    hi = max(float(np.max(y)) for y in ys) if ys else 1.0
    if hi == lo:
        hi, lo = hi + 1.0, lo - 1.0
    x0, x1 = (float(x[0]), float(x[-1])) if x.size > 1 and x[-1] > x[0] else (0.0, 1.0)

    def px(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="#888"/>',
           f'<text x="{width / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="4" y="{pad}" font-size="10">{hi:.3g}</text>',
           f'<text x="4" y="{height - pad}" font-size="10">{lo:.3g}</text>',
           f'<text x="{pad}" y="{height - pad / 3}" font-size="10">{x0:.3g}</text>',
           f'<text x="{width - pad}" y="{height - pad / 3}" font-size="10" text-anchor="end">{x1:.3g}</text>']
    for i, (label, y) in enumerate(zip(series, ys)):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        c = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - pad - 4}" y="{pad + 14 * (i + 1)}" font-size="11" fill="{c}" text-anchor="end">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
