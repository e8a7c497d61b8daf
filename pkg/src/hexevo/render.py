"""Output emission: CSV files, gait diagrams, density heatmaps, manifests.

Every file embeds the run id on its first line (comment or attribute) and is
a pure function of the data, so repeated runs with the same configuration
produce byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .evolution import STATS_CSV_HEADER, GenerationStats
from .signature import SignatureGrid, SignatureSample

CONTOUR_MASS_FRACTION = 0.00025  # cells holding at least this share of the mutants


def fmt(value: float) -> str:
    """Shortest decimal that round-trips the exact double."""
    return repr(float(value))


def stats_csv(run_id: str, stats: list[GenerationStats]) -> str:
    lines = [f"# run_id={run_id}", STATS_CSV_HEADER]
    lines += [s.csv_row() for s in stats]
    return "\n".join(lines) + "\n"


def parse_stats_csv(text: str) -> list[list[str]]:
    rows = []
    for line in text.splitlines():
        if not line or line.startswith("#") or line.startswith("generation"):
            continue
        rows.append(line.split(","))
    return rows


def trajectory_csv(run_id: str, trajectory: np.ndarray, control_dt: float) -> str:
    lines = [f"# run_id={run_id}", "t,x,y,heading"]
    for k, (x, y, heading) in enumerate(trajectory):
        lines.append(f"{fmt(k * control_dt)},{fmt(x)},{fmt(y)},{fmt(heading)}")
    return "\n".join(lines) + "\n"


def samples_csv(run_id: str, samples: list[SignatureSample]) -> str:
    lines = [f"# run_id={run_id}", "sample_id,f1_raw,f2_raw,f2_clamped,P_parent,P_mutant"]
    for s in samples:
        lines.append(
            ",".join(
                [
                    str(s.sample_id),
                    fmt(s.fitness_change),
                    fmt(s.divergence_raw),
                    fmt(s.divergence),
                    fmt(s.parent_displacement),
                    fmt(s.mutant_displacement),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def grid_csv(run_id: str, grid: SignatureGrid) -> str:
    """Density matrix: one row per fitness-change level (ascending), columns
    over divergence (ascending); axis centers on the two comment lines."""
    lines = [
        f"# run_id={run_id}",
        "# x_centers=" + ";".join(fmt(v) for v in grid.x_centers),
        "# y_centers=" + ";".join(fmt(v) for v in grid.y_centers),
        f"# bandwidth_x={fmt(grid.bandwidth_x)} bandwidth_y={fmt(grid.bandwidth_y)}",
    ]
    for row in grid.density:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def recovery_csv(run_id: str, curve: list[tuple[int, float, float]]) -> str:
    lines = [f"# run_id={run_id}", "generation,best_P,proportion_restored"]
    for generation, best_p, ratio in curve:
        lines.append(f"{generation},{fmt(best_p)},{fmt(ratio)}")
    return "\n".join(lines) + "\n"


def gait_pbm(run_id: str, gait: np.ndarray) -> str:
    """Plain-text bitmap, one row per leg, one column per control step."""
    g = np.asarray(gait, dtype=np.uint8)
    rows = g.T  # legs as rows reads like a footfall chart
    lines = ["P1", f"# run_id={run_id}", f"{rows.shape[1]} {rows.shape[0]}"]
    for row in rows:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_gait_pbm(text: str) -> np.ndarray:
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    if not lines or lines[0] != "P1":
        raise ValueError("not a P1 bitmap")
    width, height = (int(v) for v in lines[1].split())
    data = [[int(v) for v in line.split()] for line in lines[2:2 + height]]
    rows = np.array(data, dtype=np.uint8)
    if rows.shape != (height, width):
        raise ValueError("bitmap dimensions do not match header")
    return rows.T  # back to (T, legs)


def gait_svg(run_id: str, gait: np.ndarray, cell_w: int = 2, cell_h: int = 14) -> str:
    g = np.asarray(gait, dtype=np.uint8)
    steps, legs = g.shape
    width = steps * cell_w + 70
    height = legs * (cell_h + 4) + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<!-- run_id={run_id} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for leg in range(legs):
        y = 5 + leg * (cell_h + 4)
        parts.append(
            f'<text x="2" y="{y + cell_h - 3}" font-family="monospace" font-size="10">leg {leg}</text>'
        )
        contact = np.flatnonzero(g[:, leg])
        if contact.size == 0:
            continue
        # merge consecutive steps into single rectangles
        breaks = np.flatnonzero(np.diff(contact) > 1)
        starts = np.concatenate([[contact[0]], contact[breaks + 1]])
        ends = np.concatenate([contact[breaks], [contact[-1]]])
        for s, e in zip(starts, ends):
            x = 50 + s * cell_w
            w = (e - s + 1) * cell_w
            parts.append(f'<rect x="{x}" y="{y}" width="{w}" height="{cell_h}" fill="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _ramp(intensity: float) -> str:
    """White to deep blue."""
    t = min(1.0, max(0.0, intensity))
    r = round(255 + t * (8 - 255))
    g = round(255 + t * (48 - 255))
    b = round(255 + t * (107 - 255))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(run_id: str, grid: SignatureGrid, cell: int = 5) -> str:
    """Density heatmap with a contour around cells holding at least
    CONTOUR_MASS_FRACTION of the mutant mass."""
    density = grid.density
    ny, nx = density.shape
    width = nx * cell + 60
    height = ny * cell + 40
    peak = float(density.max()) or 1.0
    threshold = CONTOUR_MASS_FRACTION / grid.cell_area
    inside = density >= threshold
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<!-- run_id={run_id} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    x0, y0 = 40, 10
    for iy in range(ny):
        # row 0 holds the lowest fitness-change value; draw it at the bottom
        py = y0 + (ny - 1 - iy) * cell
        for ix in range(nx):
            val = density[iy, ix] / peak
            if val < 1.0 / 512.0:
                continue
            parts.append(
                f'<rect x="{x0 + ix * cell}" y="{py}" width="{cell}" height="{cell}" '
                f'fill="{_ramp(val)}"/>'
            )
    # contour: edges between inside and outside cells
    for iy in range(ny):
        py = y0 + (ny - 1 - iy) * cell
        for ix in range(nx):
            if not inside[iy, ix]:
                continue
            px = x0 + ix * cell
            if ix == 0 or not inside[iy, ix - 1]:
                parts.append(_line(px, py, px, py + cell))
            if ix == nx - 1 or not inside[iy, ix + 1]:
                parts.append(_line(px + cell, py, px + cell, py + cell))
            if iy == ny - 1 or not inside[iy + 1, ix]:
                parts.append(_line(px, py, px + cell, py))
            if iy == 0 or not inside[iy - 1, ix]:
                parts.append(_line(px, py + cell, px + cell, py + cell))
    parts.append(
        f'<text x="{x0}" y="{height - 6}" font-family="monospace" font-size="11">'
        f"divergence {fmt(grid.window[0][0])}..{fmt(grid.window[0][1])}, "
        f"fitness change {fmt(grid.window[1][0])}..{fmt(grid.window[1][1])}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _line(x1, y1, x2, y2) -> str:
    return (
        f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
        'stroke="#c22" stroke-width="1.5"/>'
    )


def parse_grid_csv(text: str) -> SignatureGrid:
    x_centers = y_centers = None
    bw_x = bw_y = 1e-3
    rows = []
    for line in text.splitlines():
        if line.startswith("# x_centers="):
            x_centers = np.array([float(v) for v in line.split("=", 1)[1].split(";")])
        elif line.startswith("# y_centers="):
            y_centers = np.array([float(v) for v in line.split("=", 1)[1].split(";")])
        elif line.startswith("# bandwidth_x="):
            fields = line[2:].split()
            bw_x = float(fields[0].split("=")[1])
            bw_y = float(fields[1].split("=")[1])
        elif line.startswith("#") or not line:
            continue
        else:
            rows.append([float(v) for v in line.split(",")])
    if x_centers is None or y_centers is None:
        raise ValueError("grid csv missing axis headers")
    density = np.array(rows)
    dx = x_centers[1] - x_centers[0]
    dy = y_centers[1] - y_centers[0]
    window = (
        (float(x_centers[0] - dx / 2), float(x_centers[-1] + dx / 2)),
        (float(y_centers[0] - dy / 2), float(y_centers[-1] + dy / 2)),
    )
    return SignatureGrid(
        density=density,
        x_centers=x_centers,
        y_centers=y_centers,
        bandwidth_x=bw_x,
        bandwidth_y=bw_y,
        window=window,
    )


# --- manifest ------------------------------------------------------------------

MANIFEST_NAME = "manifest.json"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def update_manifest(run_dir: Path, run_id: str, filenames: list[str]) -> None:
    """Record sha256 and the producing run id for each file.

    A resumed run can legitimately leave earlier artifacts (signatures,
    recovery curves) produced under a previous configuration in place; the
    per-file run id keeps their provenance checkable.
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / MANIFEST_NAME
    data = {"run_id": run_id, "files": {}}
    if manifest_path.exists():
        data = json.loads(manifest_path.read_text())
        data["run_id"] = run_id
    for name in filenames:
        data["files"][name] = {"sha256": _sha256(run_dir / name), "run_id": run_id}
    data["files"] = dict(sorted(data["files"].items()))
    manifest_path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def verify_manifest(run_dir: Path) -> list[str]:
    """Recompute hashes against the manifest; returns human-readable problems."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / MANIFEST_NAME
    if not manifest_path.exists():
        return [f"missing {MANIFEST_NAME}"]
    data = json.loads(manifest_path.read_text())
    problems = []
    for name, entry in data.get("files", {}).items():
        path = run_dir / name
        if not path.exists():
            problems.append(f"{name}: missing")
            continue
        if _sha256(path) != entry.get("sha256"):
            problems.append(f"{name}: hash mismatch")
            continue
        file_run_id = entry.get("run_id", "")
        head = path.read_bytes()[:4096].decode("utf-8", errors="replace")
        if file_run_id and f"run_id={file_run_id}" not in head and not name.endswith(".json"):
            problems.append(f"{name}: run id not embedded")
    return problems
