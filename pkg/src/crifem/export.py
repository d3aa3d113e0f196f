"""Matrix Market and field (legacy VTK + CSV) writers."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.io

from .assembly import Assembly, ElementBases, element_dofs

# VTK quadratic triangle: vertices, then midpoints of (0,1), (1,2), (2,0)
_VTK_QUADRATIC_TRIANGLE = 22
_SAMPLE_BARY = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1],
                         [0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]])


def export_matrices(asm: Assembly, out_dir) -> tuple[Path, Path]:
    """Write A (stiffness + stabilization) and M as symmetric coordinate Matrix Market files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pa, pm = out / "A.mtx", out / "M.mtx"
    scipy.io.mmwrite(str(pa), asm.A.tocoo(), symmetry="symmetric", precision=17)
    scipy.io.mmwrite(str(pm), asm.M.tocoo(), symmetry="symmetric", precision=17)
    return pa, pm


def field_samples(bases: ElementBases, u_full: np.ndarray):
    """Per-element samples at vertices and edge midpoints.

    Returns points (nt, 6, 2) and values (nt, 6, 2); cut elements are
    evaluated on the side of the chord each sample lies on.
    """
    mesh = bases.mesh
    tri_pts = mesh.triangle_points()
    pts = np.einsum("sk,nkd->nsd", _SAMPLE_BARY, tri_pts)
    nt = len(tri_pts)
    vals = bases.values(np.arange(nt), pts)  # (nt, 6 samples, 6 basis, 2)
    d = np.asarray(u_full, dtype=float)[element_dofs(mesh)]
    return pts, np.einsum("ni,nsic->nsc", d, vals)


def _f(x):
    return repr(float(x))


def export_field(bases: ElementBases, u_full, path) -> tuple[Path, Path]:
    """Write ``<path>.vtk`` and ``<path>.csv`` with displacement samples."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.with_suffix("") if path.suffix in (".vtk", ".csv") else path
    pvtk, pcsv = stem.with_suffix(".vtk"), stem.with_suffix(".csv")
    pts, vals = field_samples(bases, u_full)
    nt = len(pts)
    P = pts.reshape(-1, 2)
    U = vals.reshape(-1, 2)
    mag = np.hypot(U[:, 0], U[:, 1])
    try:
        with open(pvtk, "w") as fh:
            fh.write("# vtk DataFile Version 3.0\ndisplacement field\nASCII\nDATASET UNSTRUCTURED_GRID\n")
            fh.write(f"POINTS {len(P)} double\n")
            fh.writelines(f"{_f(x)} {_f(y)} 0\n" for x, y in P)
            fh.write(f"CELLS {nt} {7 * nt}\n")
            fh.writelines("6 " + " ".join(str(6 * t + k) for k in range(6)) + "\n" for t in range(nt))
            fh.write(f"CELL_TYPES {nt}\n")
            fh.write(f"{_VTK_QUADRATIC_TRIANGLE}\n" * nt)
            fh.write(f"CELL_DATA {nt}\nSCALARS region int 1\nLOOKUP_TABLE default\n")
            fh.writelines(f"{int(v)}\n" for v in bases.interface.labels)
            fh.write(f"POINT_DATA {len(P)}\nVECTORS displacement double\n")
            fh.writelines(f"{_f(a)} {_f(b)} 0\n" for a, b in U)
            for name, col in (("magnitude", mag), ("ux", U[:, 0]), ("uy", U[:, 1])):
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                fh.writelines(f"{_f(v)}\n" for v in col)
        with open(pcsv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["triangle", "sample", "x", "y", "ux", "uy", "magnitude"])
            for t in range(nt):
                for k in range(6):
                    i = 6 * t + k
                    w.writerow([t, k, _f(P[i, 0]), _f(P[i, 1]), _f(U[i, 0]), _f(U[i, 1]), _f(mag[i])])
    except OSError as exc:
        raise OSError(f"cannot write field files at {stem}: {exc}") from exc
    return pvtk, pcsv


def read_field_csv(path):
    """Inverse of the CSV twin: (points (nt, 6, 2), values (nt, 6, 2))."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    nt = int(data[:, 0].max()) + 1 if len(data) else 0
    return data[:, 2:4].reshape(nt, 6, 2), data[:, 4:6].reshape(nt, 6, 2)


def read_vtk_displacement(path):
    """Points and displacement vectors from a file written by :func:`export_field`."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    i = next(k for k, l in enumerate(lines) if l.startswith("POINTS"))
    n = int(lines[i].split()[1])
    P = np.array([[float(v) for v in l.split()[:2]] for l in lines[i + 1:i + 1 + n]])
    j = next(k for k, l in enumerate(lines) if l.startswith("VECTORS displacement"))
    U = np.array([[float(v) for v in l.split()[:2]] for l in lines[j + 1:j + 1 + n]])
    return P, U
