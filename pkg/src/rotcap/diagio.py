"""Snapshots, time series, run manifests and trend diagnostics.

Snapshot format: a plain-text header terminated by ``end-header``, followed
by raw little-endian float64 payloads, one block per field in header order.
Headers carry the format version, grid sizes, named metadata (floats stored
via repr, which round-trips in binary), and one ``field`` line per array
with its shape. Writing refuses non-finite data; reading verifies version,
endianness tag and payload size, so truncated or foreign files fail loudly.

Time series are RFC-4180 CSV files with a fixed header, appended row by row;
rows must be finite and strictly increasing in time.

A run manifest is a JSON document echoing the configuration, the code
version, the seed, wall-clock timing and a SHA-256 digest per output file.
Fixed configuration implies bit-identical outputs, hence identical digests
(wall times of course differ between runs and are not part of any digest).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import SeriesError, SnapshotError

SNAPSHOT_MAGIC = "rotcap-snapshot"
SNAPSHOT_VERSION = 1


# -- snapshots -------------------------------------------------------------------


def write_snapshot(path, fields, meta=None):
    """Write named float64 arrays with metadata; bit-exact round trip."""
    meta = dict(meta or {})
    lines = [f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}", "endian=little"]
    for key, val in sorted(meta.items()):
        key = str(key)
        if any(ch in key for ch in " =\n"):
            raise SnapshotError(f"bad metadata key {key!r}")
        if isinstance(val, float):
            if not math.isfinite(val):
                raise SnapshotError(f"non-finite metadata value for {key!r}")
            val = repr(val)
        lines.append(f"meta {key}={val}")
    arrays = []
    for name, arr in fields.items():
        arr = np.asarray(arr, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise SnapshotError(f"field {name!r} contains non-finite values")
        if any(ch in str(name) for ch in " =\n"):
            raise SnapshotError(f"bad field name {name!r}")
        shape = ",".join(str(s) for s in arr.shape)
        lines.append(f"field {name} shape={shape}")
        arrays.append(np.ascontiguousarray(arr, dtype="<f8"))
    lines.append("end-header")
    header = ("\n".join(lines) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in arrays:
            fh.write(arr.tobytes())


def read_snapshot(path):
    """Read a snapshot back: returns (fields dict, meta dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    marker = b"end-header\n"
    cut = raw.find(marker)
    if cut < 0:
        raise SnapshotError(f"{path}: missing header terminator")
    try:
        header = raw[:cut].decode("ascii").splitlines()
    except UnicodeDecodeError as exc:
        raise SnapshotError(f"{path}: undecodable header") from exc
    payload = raw[cut + len(marker):]

    if not header or not header[0].startswith(SNAPSHOT_MAGIC):
        raise SnapshotError(f"{path}: not a snapshot file")
    try:
        version = int(header[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise SnapshotError(f"{path}: malformed version line") from exc
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported version {version}")
    if len(header) < 2 or header[1] != "endian=little":
        raise SnapshotError(f"{path}: unsupported or missing endianness tag")

    meta = {}
    specs = []
    for line in header[2:]:
        if line.startswith("meta "):
            key, _, val = line[5:].partition("=")
            try:
                meta[key] = float(val)
            except ValueError:
                meta[key] = val
        elif line.startswith("field "):
            parts = line.split()
            if len(parts) != 3 or not parts[2].startswith("shape="):
                raise SnapshotError(f"{path}: malformed field line {line!r}")
            shape = tuple(int(s) for s in parts[2][6:].split(",") if s)
            specs.append((parts[1], shape))
        else:
            raise SnapshotError(f"{path}: unrecognized header line {line!r}")

    need = sum(int(np.prod(shape, dtype=np.int64)) for _n, shape in specs) * 8
    if len(payload) != need:
        raise SnapshotError(
            f"{path}: payload has {len(payload)} bytes, header promises {need}"
        )
    out = {}
    offset = 0
    for name, shape in specs:
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        out[name] = arr.reshape(shape).copy()
        offset += count * 8
    return out, meta


# -- time series -------------------------------------------------------------------


def append_series(path, columns, row):
    """Append one row to a CSV series, creating it with a header if needed.

    The first column must be time, strictly increasing across appends; all
    values must be finite.
    """
    vals = [row[c] for c in columns]
    for c, v in zip(columns, vals):
        if not math.isfinite(float(v)):
            raise SeriesError(f"non-finite value for column {c!r}")
    exists = os.path.exists(path) and os.path.getsize(path) > 0
    if exists:
        with open(path, "r", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != list(columns):
                raise SeriesError(f"{path}: column mismatch {header} vs {list(columns)}")
            last_t = None
            for r in reader:
                if r:
                    last_t = float(r[0])
        if last_t is not None and float(vals[0]) <= last_t:
            raise SeriesError(
                f"{path}: time {vals[0]} does not increase past {last_t}"
            )
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if not exists:
            writer.writerow(columns)
        writer.writerow([f"{float(v):.17g}" for v in vals])


def read_series(path):
    """Read a CSV series into {column: np.array}."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    data = np.array([[float(v) for v in r] for r in rows]) if rows else np.zeros((0, len(header)))
    return {c: data[:, i] for i, c in enumerate(header)}


# -- manifests ----------------------------------------------------------------------


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    code_version: str
    seed: int
    started: str = ""
    finished: str = ""
    wall_seconds: float = 0.0
    outputs: dict = field(default_factory=dict)  # relative path -> {sha256, bytes}
    notes: dict = field(default_factory=dict)

    def add_output(self, root, relpath):
        full = os.path.join(root, relpath)
        self.outputs[relpath] = {
            "sha256": sha256_file(full),
            "bytes": os.path.getsize(full),
        }

    def write(self, path):
        doc = {
            "config": self.config,
            "code_version": self.code_version,
            "seed": self.seed,
            "started": self.started,
            "finished": self.finished,
            "wall_seconds": self.wall_seconds,
            "outputs": self.outputs,
            "notes": self.notes,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_manifest(path):
    with open(path) as fh:
        return json.load(fh)


# -- trend diagnostics -----------------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float  # rms deviation in log-log coordinates
    npoints: int


def slope_fit(pairs):
    """Least-squares slope in log-log coordinates.

    ``pairs`` is a sequence of (x, y); needs at least 3 strictly positive
    points. Scale-equivariant: rescaling x or y moves only the intercept.
    """
    pts = [(float(x), float(y)) for x, y in pairs]
    if len(pts) < 3:
        raise ValueError(f"slope_fit needs >= 3 points, got {len(pts)}")
    if any(x <= 0.0 or y <= 0.0 for x, y in pts):
        raise ValueError("slope_fit needs strictly positive coordinates")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return SlopeFit(float(slope), float(intercept), resid, len(pts))


def moving_mean(values, window):
    """Centered moving mean over ``window`` samples (window >= 1, odd made)."""
    window = int(window)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window % 2 == 0:
        window += 1
    if window == 1:
        return np.asarray(values, dtype=np.float64).copy()
    v = np.asarray(values, dtype=np.float64)
    half = window // 2
    out = np.full(v.shape, np.nan)
    kernel = np.ones(window) / window
    smoothed = np.convolve(v, kernel, mode="valid") if v.ndim == 1 else None
    if v.ndim == 1:
        out[half : half + smoothed.size] = smoothed
        return out
    # general: average along axis 0
    n = v.shape[0]
    for i in range(half, n - half):
        out[i] = v[i - half : i + half + 1].mean(axis=0)
    return out


@dataclass
class FilteredCompareReport:
    times: np.ndarray
    raw_distance: np.ndarray
    smoothed_distance: np.ndarray
    raw_time_average: float
    smoothed_time_average: float
    filter_level: int
    window: int


def filtered_compare(times_a, fields_a, times_b, fields_b, filter_level=3,
                     window=None, profile=None):
    """Low-pass filtered L2 distance between two 2d-field trajectories.

    Trajectory a is filtered through the dyadic low-pass at ``filter_level``;
    trajectory b (typically a limit solution) is interpolated linearly onto
    a's sample times. Returns the raw distance curve, the curve computed from
    the time moving mean of a's filtered fields (averaging out fast
    oscillations), and the time averages of both.
    """
    from .lp import DEFAULT_PROFILE, low_pass

    profile = profile or DEFAULT_PROFILE
    ta = np.asarray(times_a, dtype=np.float64)
    tb = np.asarray(times_b, dtype=np.float64)
    if ta.size < 2 or tb.size < 2:
        raise ValueError("need at least two samples per trajectory")
    if ta[0] < tb[0] - 1e-12 or ta[-1] > tb[-1] + 1e-12:
        raise ValueError("trajectory b does not cover trajectory a's time range")
    if window is None:
        window = max(1, ta.size // 8)

    ga = fields_a[0].grid
    filt = [low_pass(f, filter_level, profile) for f in fields_a]
    fa = np.stack([f.values for f in filt])

    vb = np.stack([f.values for f in fields_b])
    binterp = np.empty((ta.size,) + vb.shape[1:])
    for i, t in enumerate(ta):
        j = int(np.clip(np.searchsorted(tb, t) - 1, 0, tb.size - 2))
        w = (t - tb[j]) / (tb[j + 1] - tb[j])
        binterp[i] = (1.0 - w) * vb[j] + w * vb[j + 1]

    def dist(stack):
        d = stack - binterp
        return np.sqrt(np.mean(d**2, axis=tuple(range(1, d.ndim))) * ga.measure)

    raw = dist(fa)
    sm = moving_mean(fa, window)
    smoothed = dist(sm)  # nan at the window edges
    valid = np.isfinite(smoothed)
    if not valid.any():
        raise ValueError("window leaves no valid smoothed samples")

    return FilteredCompareReport(
        times=ta,
        raw_distance=raw,
        smoothed_distance=smoothed,
        raw_time_average=float(np.mean(raw)),
        smoothed_time_average=float(np.mean(smoothed[valid])),
        filter_level=int(filter_level),
        window=int(window),
    )
