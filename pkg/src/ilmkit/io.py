"""Plain-text file formats and a small SVG writer.

All formats are comma-separated with a header row (networks in dense mode
excepted), LF line endings, ``.`` as the decimal point and 1-based ids.
Reals are written with 17 significant digits so they survive a round trip.
Parsers either return a fully validated object or raise :class:`ParseError`
pointing at the offending line.
"""
import csv
import io as _io
import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import DataError, ParseError
from .inference import Chain
from .metrics import CurveTable, PredictiveBands, Snapshot
from .model import SIR, EpidemicEvents, Population

__all__ = [
    "parse_population_csv", "write_population_csv",
    "parse_network_file", "write_network_file",
    "parse_events_csv", "write_events_csv",
    "parse_chain_csv", "write_chain_csv",
    "write_curves_csv", "render_svg",
]


def fmt(x):
    """Shortest text that reads back as the same float (integers without a decimal point)."""
    x = float(x)
    if math.isinf(x):
        return "-Inf" if x < 0 else "Inf"
    if math.isnan(x):
        return "NaN"
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return format(x, ".17g")


def _rows(text):
    """Non-blank CSV rows with their 1-based line numbers."""
    reader = csv.reader(_io.StringIO(text))
    out = []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        out.append((reader.line_num, [c.strip() for c in row]))
    return out


def _real(cell, line, column):
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"{cell!r} is not a number", line, column) from None
    if not math.isfinite(v):
        raise ParseError(f"{cell!r} is not a finite number", line, column)
    return v


def _int(cell, line, column):
    try:
        return int(cell)
    except ValueError:
        v = _real(cell, line, column)
        if not v.is_integer():
            raise ParseError(f"{cell!r} is not an integer", line, column) from None
        return int(v)


def _write(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _ids(rows):
    """Map each row to 0-based position, checking ids form exactly 1..N."""
    seen = {}
    for line, row in rows:
        k = _int(row[0], line, "id")
        if k in seen:
            raise ParseError(f"duplicate id {k}", line, "id")
        seen[k] = line
    n = len(rows)
    for k, line in seen.items():
        if not 1 <= k <= n:
            raise ParseError(f"id {k} is outside 1..{n}; ids must be contiguous", line, "id")
    return [_int(row[0], line, "id") - 1 for line, row in rows]


def parse_population_csv(text):
    """``id[,x,y][,covariate...]`` with one row per individual."""
    rows = _rows(text)
    if not rows:
        raise ParseError("empty population file")
    (_, header), body = rows[0], rows[1:]
    if not header or header[0] != "id":
        raise ParseError("the first column must be 'id'", rows[0][0])
    if len(set(header)) != len(header):
        raise ParseError("duplicate column names", rows[0][0])
    has_x, has_y = "x" in header, "y" in header
    if has_x != has_y:
        raise ParseError("x and y must be given together", rows[0][0])
    if has_x and header[1:3] != ["x", "y"]:
        raise ParseError("x and y must directly follow id", rows[0][0])
    if not body:
        raise ParseError("population file has no rows")
    for line, row in body:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line)
    order = _ids(body)
    n = len(body)
    values = np.empty((n, len(header) - 1))
    for (line, row), pos in zip(body, order):
        values[pos] = [_real(c, line, name) for c, name in zip(row[1:], header[1:])]
    first_cov = 3 if has_x else 1
    coords = values[:, :2] if has_x else None
    covs = {name: values[:, k - 1] for k, name in enumerate(header) if k >= first_cov}
    return Population(n, coords, covs)


def write_population_csv(pop):
    header = ["id"] + (["x", "y"] if pop.has_coords else []) + list(pop.covariates)
    rows = []
    for k in range(pop.size):
        row = [str(k + 1)]
        if pop.has_coords:
            row += [fmt(pop.coords[k, 0]), fmt(pop.coords[k, 1])]
        row += [fmt(col[k]) for col in pop.covariates.values()]
        rows.append(row)
    return _write(header, rows)


def parse_network_file(text, mode="edgelist", directed=True, size=None):
    """One contact matrix from an edge list (``i,j[,weight]``) or a dense N x N grid.

    In edge-list mode ``i,j,w`` sets ``C[i, j] = w``: the weight with which
    an infectious ``j`` exerts pressure on ``i``. An undirected network must
    list both directions with equal weights; nothing is symmetrised here.
    ``size`` defaults to the largest id mentioned.
    """
    rows = _rows(text)
    if mode == "dense":
        n = len(rows)
        if n == 0:
            raise ParseError("empty network file")
        if size is not None and n != size:
            raise ParseError(f"expected {size} rows, found {n}")
        m = np.empty((n, n))
        for r, (line, row) in enumerate(rows):
            if len(row) != n:
                raise ParseError(f"expected {n} values, found {len(row)}", line)
            m[r] = [_real(c, line, str(k + 1)) for k, c in enumerate(row)]
            if m[r, r] != 0:
                raise ParseError(f"diagonal entry for {r + 1} is {m[r, r]:g}; self-contact is not allowed", line)
            if np.any(m[r] < 0):
                raise ParseError("negative contact weight", line)
    elif mode == "edgelist":
        if rows and rows[0][1][:2] == ["src", "dst"]:
            rows = rows[1:]
        edges = []
        for line, row in rows:
            if len(row) not in (2, 3):
                raise ParseError(f"expected 'i,j[,weight]', found {len(row)} fields", line)
            i, j = _int(row[0], line, "src"), _int(row[1], line, "dst")
            w = _real(row[2], line, "weight") if len(row) == 3 else 1.0
            if i == j:
                raise ParseError(f"self-loop on {i}; diagonal contacts are not used", line)
            if w < 0:
                raise ParseError("negative contact weight", line, "weight")
            edges.append((line, i, j, w))
        n = size if size is not None else max((max(i, j) for _, i, j, _ in edges), default=0)
        if n < 1:
            raise ParseError("cannot infer the population size from an empty edge list")
        m = np.zeros((n, n))
        seen = set()
        for line, i, j, w in edges:
            for k, col in ((i, "src"), (j, "dst")):
                if not 1 <= k <= n:
                    raise ParseError(f"id {k} is outside 1..{n}", line, col)
            if (i, j) in seen:
                raise ParseError(f"duplicate edge {i},{j}", line)
            seen.add((i, j))
            m[i - 1, j - 1] = w
    else:
        raise DataError(f"unknown network mode {mode!r}; use 'edgelist' or 'dense'")
    if not directed and not np.array_equal(m, m.T):
        a, b = np.argwhere(m != m.T)[0]
        raise ParseError(
            f"network is declared undirected but C[{a + 1},{b + 1}] != C[{b + 1},{a + 1}]"
        )
    return m


def write_network_file(matrix, mode="edgelist"):
    m = np.asarray(matrix, dtype=float)
    if mode == "dense":
        return _write(None, [[fmt(v) for v in row] for row in m])
    rows = [[str(i + 1), str(j + 1), fmt(m[i, j])] for i, j in zip(*np.nonzero(m))]
    return _write(["src", "dst", "weight"], rows)


def parse_events_csv(text, framework=None, tmin=1, tmax=None):
    """``id,inftime[,remtime]``; 0 means the event did not happen.

    Without an explicit ``framework`` a remtime column means SIR.
    """
    rows = _rows(text)
    if not rows:
        raise ParseError("empty events file")
    (hline, header), body = rows[0], rows[1:]
    if framework is None:
        framework = SIR if "remtime" in header else "SI"
    framework = framework.upper()
    want = ["id", "inftime", "remtime"] if framework == SIR else ["id", "inftime"]
    if framework == SIR and header[:2] == ["id", "inftime"] and len(header) == 2:
        raise ParseError("SIR events need a remtime column", hline)
    if header[:len(want)] != want or len(header) not in (2, 3):
        raise ParseError(f"header must be {','.join(want)}", hline)
    if not body:
        raise ParseError("events file has no rows")
    for line, row in body:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line)
    order = _ids(body)
    n = len(body)
    inf = np.zeros(n, dtype=np.int64)
    rem = np.zeros(n, dtype=np.int64)
    for (line, row), pos in zip(body, order):
        inf[pos] = _int(row[1], line, "inftime")
        if inf[pos] < 0:
            raise ParseError("inftime must be >= 0", line, "inftime")
        if len(header) == 3:
            rem[pos] = _int(row[2], line, "remtime")
            if rem[pos] < 0:
                raise ParseError("remtime must be >= 0", line, "remtime")
            if framework == SIR and inf[pos] > 0 and rem[pos] != 0 and rem[pos] <= inf[pos]:
                raise ParseError(
                    f"remtime {rem[pos]} must be later than inftime {inf[pos]}", line, "remtime"
                )
    try:
        return EpidemicEvents(framework, inf, rem if framework == SIR else None, tmin, tmax)
    except DataError as exc:
        raise ParseError(str(exc)) from None


def write_events_csv(events):
    sir = events.framework == SIR
    header = ["id", "inftime"] + (["remtime"] if sir else [])
    rows = []
    for k in range(events.size):
        row = [str(k + 1), str(int(events.inftime[k]))]
        if sir:
            row.append(str(int(events.remtime[k])))
        rows.append(row)
    return _write(header, rows)


def write_chain_csv(chain):
    header = ["iter", *chain.labels, "loglik", "accepted"]
    rows = []
    for k in range(chain.niter):
        rows.append([str(k + 1), *(fmt(v) for v in chain.samples[k]),
                     fmt(chain.loglik[k]), "1" if chain.accepted[k] else "0"])
    return _write(header, rows)


def parse_chain_csv(text):
    """Read a chain back. Columns that never change are taken to be fixed parameters."""
    rows = _rows(text)
    if not rows:
        raise ParseError("empty chain file")
    (hline, header), body = rows[0], rows[1:]
    if len(header) < 4 or header[0] != "iter" or header[-2:] != ["loglik", "accepted"]:
        raise ParseError("header must be iter,<parameters...>,loglik,accepted", hline)
    if not body:
        raise ParseError("chain file has no rows")
    labels = header[1:-2]
    samples = np.empty((len(body), len(labels)))
    loglik = np.empty(len(body))
    accepted = np.zeros(len(body), dtype=bool)
    for k, (line, row) in enumerate(body):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line)
        if _int(row[0], line, "iter") != k + 1:
            raise ParseError(f"iterations must run 1, 2, ...; expected {k + 1}", line, "iter")
        samples[k] = [_real(c, line, name) for c, name in zip(row[1:-2], labels)]
        try:
            loglik[k] = float(row[-2])
        except ValueError:
            raise ParseError(f"{row[-2]!r} is not a number", line, "loglik") from None
        if row[-1] not in ("0", "1"):
            raise ParseError("accepted must be 0 or 1", line, "accepted")
        accepted[k] = row[-1] == "1"
    free = np.any(samples != samples[0], axis=0)
    return Chain(labels, samples, loglik, accepted, free)


def write_curves_csv(table):
    header = ["t", *table.names]
    rows = [[str(int(t)), *(fmt(table[name][k]) for name in table.names)]
            for k, t in enumerate(table.t)]
    return _write(header, rows)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
_STATE_STYLE = {0: ('fill="none" stroke="#333333"', "S"),
                1: ('fill="#d62728" stroke="#d62728"', "I"),
                2: ('fill="#1f77b4" stroke="#1f77b4"', "R")}


class _Frame:
    """Maps data coordinates to a fixed-size plotting area."""

    def __init__(self, xs, ys, width=640, height=420, margin=56):
        self.w, self.h, self.m = width, height, margin
        self.x0, self.x1 = _span(xs)
        self.y0, self.y1 = _span(ys)

    def x(self, v):
        return self.m + (v - self.x0) / (self.x1 - self.x0) * (self.w - 2 * self.m)

    def y(self, v):
        return self.h - self.m - (v - self.y0) / (self.y1 - self.y0) * (self.h - 2 * self.m)

    def axes(self, xlabel, ylabel, title):
        m, w, h = self.m, self.w, self.h
        out = [
            f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
            f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
        ]
        for v in np.linspace(self.x0, self.x1, 5):
            px = self.x(v)
            out.append(f'<line x1="{px:.2f}" y1="{h - m}" x2="{px:.2f}" y2="{h - m + 5}" stroke="black"/>')
            out.append(f'<text x="{px:.2f}" y="{h - m + 18}" font-size="11" text-anchor="middle">{v:.4g}</text>')
        for v in np.linspace(self.y0, self.y1, 5):
            py = self.y(v)
            out.append(f'<line x1="{m - 5}" y1="{py:.2f}" x2="{m}" y2="{py:.2f}" stroke="black"/>')
            out.append(f'<text x="{m - 8}" y="{py + 4:.2f}" font-size="11" text-anchor="end">{v:.4g}</text>')
        out.append(f'<text x="{w / 2}" y="{h - 12}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
        out.append(f'<text x="16" y="{h / 2}" font-size="13" text-anchor="middle" '
                   f'transform="rotate(-90 16 {h / 2})">{escape(ylabel)}</text>')
        if title:
            out.append(f'<text x="{w / 2}" y="24" font-size="15" text-anchor="middle">{escape(title)}</text>')
        return out


def _span(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    return lo, hi


def _document(w, h, body):
    return (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'
            f'<rect width="{w}" height="{h}" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n")


def _curves_svg(table, title, ylabel):
    ys = np.concatenate([np.asarray(table[c], dtype=float) for c in table.names] + [[0.0]])
    frame = _Frame(table.t, ys)
    body = frame.axes("time", ylabel, title)
    for k, name in enumerate(table.names):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{frame.x(t):.2f},{frame.y(v):.2f}" for t, v in zip(table.t, table[name]))
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}">'
                    f'<title>{escape(name)}</title></polyline>')
        ly = frame.m + 16 * k
        body.append(f'<text x="{frame.w - frame.m + 4}" y="{ly}" font-size="12" fill="{color}">{escape(name)}</text>')
    return _document(frame.w, frame.h, body)


def _snapshot_svg(snap, title):
    xy = snap.coords
    frame = _Frame(xy[:, 0], xy[:, 1], width=480, height=480)
    body = frame.axes("x", "y", title or f"t = {snap.t}")
    for (x, y), s in zip(xy, snap.state):
        style, label = _STATE_STYLE[int(s)]
        body.append(f'<circle cx="{frame.x(x):.2f}" cy="{frame.y(y):.2f}" r="4" {style} '
                    f'data-state="{label}"/>')
    return _document(frame.w, frame.h, body)


def render_svg(obj, title=None, ylabel="individuals"):
    """A standalone SVG of a curve table, a predictive band set, or one spatial snapshot.

    Curves are drawn as one ``<polyline>`` per series; snapshots as one
    ``<circle>`` per individual, open for S, red for I and blue for R.
    """
    if isinstance(obj, CurveTable):
        return _curves_svg(obj, title, ylabel)
    if isinstance(obj, PredictiveBands):
        return _curves_svg(obj.table(), title or f"posterior prediction from t = {obj.t_star}",
                           "new infections")
    if isinstance(obj, Snapshot):
        return _snapshot_svg(obj, title)
    raise TypeError(f"cannot render {type(obj).__name__} as SVG")
