"""File formats: grid CSV, density-matrix JSON, PGM/PPM and SVG.

Everything here is byte-deterministic for identical inputs: floats are
serialized with ``repr`` (shortest round-trip form), keys are sorted,
no timestamps are embedded.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import GridFormatError
from .estimation import BASIS_LABELS

CSV_CORNER = "lambda_s_nm\\lambda_i_nm"


def _fmt(x: float) -> str:
    return repr(float(x))


def canonical_json(obj) -> str:
    return json.dumps(_sanitize(obj), indent=2, sort_keys=True,
                      allow_nan=False) + "\n"


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, obj) -> None:
    Path(path).write_text(canonical_json(obj), encoding="utf-8")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# grid CSV: row 1 = lambda_i axis, column 1 = lambda_s axis


def write_grid_csv(path: Path, lam_s_nm, lam_i_nm, intensity) -> None:
    lam_s = np.asarray(lam_s_nm, dtype=float)
    lam_i = np.asarray(lam_i_nm, dtype=float)
    rows = [CSV_CORNER + "," + ",".join(_fmt(v) for v in lam_i)]
    for r, ls in enumerate(lam_s):
        rows.append(_fmt(ls) + "," + ",".join(_fmt(v) for v in intensity[r]))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8",
                          newline="\n")


def load_grid_csv(path: Path):
    """Parse and validate a grid CSV; returns (lam_s, lam_i, intensity)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if len(lines) < 2:
        raise GridFormatError(f"{path}: needs a header row and data rows")
    header = lines[0].split(",")
    try:
        lam_i = np.array([float(v) for v in header[1:]])
    except ValueError:
        raise GridFormatError(f"{path}: row 0: non-numeric axis value")
    ncol = len(header)
    lam_s = []
    values = []
    for r, line in enumerate(lines[1:], start=1):
        parts = line.split(",")
        if len(parts) != ncol:
            raise GridFormatError(
                f"{path}: row {r}: expected {ncol} columns, got {len(parts)}")
        try:
            row = [float(v) for v in parts]
        except ValueError:
            raise GridFormatError(f"{path}: row {r}: non-numeric value")
        lam_s.append(row[0])
        for c, v in enumerate(row[1:], start=1):
            if v < 0:
                raise GridFormatError(
                    f"{path}: negative intensity at (row {r}, col {c})")
        values.append(row[1:])
    lam_s = np.array(lam_s)
    _check_axis(lam_i, f"{path}: lambda_i axis")
    _check_axis(lam_s, f"{path}: lambda_s axis")
    return lam_s, lam_i, np.array(values)


def _check_axis(axis: np.ndarray, what: str) -> None:
    if len(axis) < 2:
        raise GridFormatError(f"{what}: needs at least 2 values")
    steps = np.diff(axis)
    if np.any(steps <= 0):
        raise GridFormatError(f"{what}: not strictly increasing")
    rel = (steps.max() - steps.min()) / steps.mean()
    if rel > 1e-6:
        raise GridFormatError(
            f"{what}: non-uniform spacing ({rel:.2e} relative)")


# ---------------------------------------------------------------------------
# density matrices


def density_to_json(rho: np.ndarray, metrics: dict | None = None,
                    extra: dict | None = None) -> dict:
    doc = {
        "basis": list(BASIS_LABELS),
        "matrix": [[[float(rho[r, c].real), float(rho[r, c].imag)]
                    for c in range(4)] for r in range(4)],
    }
    if metrics is not None:
        doc["metrics"] = metrics
    if extra:
        doc.update(extra)
    return doc


def density_from_json(doc: dict) -> np.ndarray:
    if doc.get("basis") != list(BASIS_LABELS):
        raise GridFormatError(
            f"density matrix must use basis {list(BASIS_LABELS)}")
    mat = doc["matrix"]
    rho = np.zeros((4, 4), dtype=complex)
    for r in range(4):
        for c in range(4):
            re, im = mat[r][c]
            rho[r, c] = complex(re, im)
    return rho


def load_density(path: Path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        return density_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# images

_COLOR_STOPS = np.array([
    (68, 1, 84), (71, 44, 122), (59, 81, 139), (44, 113, 142),
    (33, 144, 141), (39, 173, 129), (92, 200, 99), (170, 220, 50),
    (253, 231, 37),
], dtype=float)


def _colormap(norm: np.ndarray) -> np.ndarray:
    pos = np.clip(norm, 0.0, 1.0) * (len(_COLOR_STOPS) - 1)
    low = np.floor(pos).astype(int)
    high = np.minimum(low + 1, len(_COLOR_STOPS) - 1)
    t = (pos - low)[..., None]
    rgb = _COLOR_STOPS[low] * (1 - t) + _COLOR_STOPS[high] * t
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def write_pgm(path: Path, values: np.ndarray) -> None:
    """8-bit binary P5 graymap, rows top to bottom."""
    v = np.asarray(values, dtype=float)
    top = v.max()
    norm = v / top if top > 0 else np.zeros_like(v)
    pix = np.clip(np.rint(norm * 255), 0, 255).astype(np.uint8)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def write_ppm(path: Path, values: np.ndarray) -> None:
    """24-bit binary P6 pixmap with the built-in colormap."""
    v = np.asarray(values, dtype=float)
    top = v.max()
    norm = v / top if top > 0 else np.zeros_like(v)
    rgb = _colormap(norm)
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


CONTOUR_LEVELS = {"1/e2": 2.0, "1/e3": np.sqrt(6.0)}


def render_svg_heatmap(path: Path, lam_s_nm, lam_i_nm, intensity,
                       lobes=(), contour_level: str = "1/e2",
                       title: str = "", max_cells: int = 180) -> None:
    """Publication-style SVG: colormapped heatmap, axis ticks, optional
    Gaussian-lobe contour ellipses.

    The intensity raster is box-downsampled to at most ``max_cells``
    per axis; the 1/e^2 contour of a lobe is the ellipse at 2 sigma
    (1/e^3 at sqrt(6) sigma).
    """
    lam_s = np.asarray(lam_s_nm, dtype=float)
    lam_i = np.asarray(lam_i_nm, dtype=float)
    v = np.asarray(intensity, dtype=float)

    def shrink(arr, n_target, axis):
        n = arr.shape[axis]
        if n <= n_target:
            return arr
        factor = int(np.ceil(n / n_target))
        pad = (-n) % factor
        if pad:
            idx = [slice(None)] * arr.ndim
            arr = np.concatenate(
                [arr, np.repeat(arr.take([-1], axis=axis), pad, axis=axis)],
                axis=axis)
        shape = list(arr.shape)
        shape[axis] = arr.shape[axis] // factor
        shape.insert(axis + 1, factor)
        return arr.reshape(shape).mean(axis=axis + 1)

    raster = shrink(shrink(v, max_cells, 0), max_cells, 1)
    top = raster.max()
    norm = raster / top if top > 0 else np.zeros_like(raster)
    rgb = _colormap(norm)

    # plot geometry: x = lambda_i (scan axis), y = lambda_s
    width, height, margin = 640.0, 520.0, 60.0
    pw, ph = width - 2 * margin, height - 2 * margin
    i0, i1 = lam_i[0], lam_i[-1]
    s0, s1 = lam_s[0], lam_s[-1]

    def px(li):
        return margin + (li - i0) / (i1 - i0) * pw

    def py(ls):
        return margin + (s1 - ls) / (s1 - s0) * ph

    rows, cols = norm.shape  # rows: lambda_s, cols: lambda_i
    cell_w = pw / cols
    cell_h = ph / rows
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]
    for r in range(rows):
        y = margin + ph - (r + 1) * cell_h  # row 0 = smallest lambda_s
        run_start = 0
        while run_start < cols:
            color = rgb[r, run_start]
            run_end = run_start + 1
            while run_end < cols and np.array_equal(rgb[r, run_end], color):
                run_end += 1
            x = margin + run_start * cell_w
            w_run = (run_end - run_start) * cell_w
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{w_run + 0.5:.2f}" '
                f'height="{cell_h + 0.5:.2f}" '
                f'fill="rgb({color[0]},{color[1]},{color[2]})"/>')
            run_start = run_end

    scale = CONTOUR_LEVELS.get(contour_level, 2.0)
    for lobe in lobes:
        cx = px(lobe.center_i_nm)
        cy = py(lobe.center_s_nm)
        # ellipse axes in plot pixels; orientation measured in data space
        rx_major = scale * lobe.sigma_major_nm
        rx_minor = scale * lobe.sigma_minor_nm
        sx = pw / (i1 - i0)
        sy = ph / (s1 - s0)
        # major axis direction in (lambda_s, lambda_i) = (cos t, sin t)
        ang = np.degrees(np.arctan2(-np.cos(lobe.orientation_rad) * sy,
                                    np.sin(lobe.orientation_rad) * sx))
        rpx = rx_major * np.hypot(np.sin(lobe.orientation_rad) * sx,
                                  np.cos(lobe.orientation_rad) * sy)
        rpy = rx_minor * np.hypot(np.cos(lobe.orientation_rad) * sx,
                                  np.sin(lobe.orientation_rad) * sy)
        label = f" ({lobe.process_label})" if lobe.process_label else ""
        parts.append(
            f'<g transform="translate({cx:.2f},{cy:.2f}) rotate({ang:.2f})">'
            f'<ellipse rx="{rpx:.2f}" ry="{rpy:.2f}" fill="none" '
            f'stroke="white" stroke-width="1.5"/></g>')
        if lobe.process_label:
            parts.append(
                f'<text x="{cx:.2f}" y="{cy - rpy - 4:.2f}" fill="white" '
                f'font-size="12" text-anchor="middle">'
                f'{lobe.process_label}</text>')

    parts.append(
        f'<rect x="{margin:.0f}" y="{margin:.0f}" width="{pw:.0f}" '
        f'height="{ph:.0f}" fill="none" stroke="black"/>')
    for tick in np.linspace(i0, i1, 6):
        x = px(tick)
        parts.append(f'<line x1="{x:.2f}" y1="{margin + ph:.0f}" '
                     f'x2="{x:.2f}" y2="{margin + ph + 5:.0f}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{margin + ph + 18:.0f}" '
                     f'font-size="11" text-anchor="middle">{tick:.1f}</text>')
    for tick in np.linspace(s0, s1, 6):
        y = py(tick)
        parts.append(f'<line x1="{margin - 5:.0f}" y1="{y:.2f}" '
                     f'x2="{margin:.0f}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{margin - 8:.0f}" y="{y + 4:.2f}" '
                     f'font-size="11" text-anchor="end">{tick:.1f}</text>')
    parts.append(
        f'<text x="{margin + pw / 2:.0f}" y="{height - 12:.0f}" '
        f'font-size="13" text-anchor="middle">idler wavelength (nm)</text>')
    parts.append(
        f'<text x="16" y="{margin + ph / 2:.0f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 16 '
        f'{margin + ph / 2:.0f})">signal wavelength (nm)</text>')
    if title:
        parts.append(f'<text x="{margin + pw / 2:.0f}" y="30" '
                     f'font-size="14" text-anchor="middle">{title}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8",
                          newline="\n")
