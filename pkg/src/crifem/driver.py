"""Benchmark cases, convergence studies and the manufactured-solution check."""

from __future__ import annotations

import configparser
import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assembly import (Assembly, AssemblyConfig, assemble, build_bases, element_quadrature,
                       evaluate, load_vector)
from .geometry import LevelSet, analyze_interface, build_uniform_mesh
from .material import LameField, coefficients_at
from .solver import EigenPairSet, smallest_eigenpairs, source_solve, spd_factorize

log = logging.getLogger(__name__)


class CaseError(RuntimeError):
    pass


@dataclass(frozen=True)
class CaseConfig:
    interface: LevelSet
    materials: LameField
    name: str = "custom"
    tau0: float = 1.0
    tau_scaling: str = "mu"
    levels: tuple = (16, 32, 64, 128)
    N_ref: int = 256
    m: int = 6
    tol: float = 1e-9
    shift: float = 0.0
    seed: int = 0
    max_iter: int = 300
    output_dir: str = "out"
    strict_resolution: bool = False

    def __post_init__(self):
        lv = tuple(int(n) for n in self.levels)
        object.__setattr__(self, "levels", lv)
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError(f"levels must be strictly ascending: {lv}")
        if lv and self.N_ref <= lv[-1]:
            raise ValueError(f"N_ref={self.N_ref} must exceed the finest level {lv[-1]}")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def assembly_config(self) -> AssemblyConfig:
        return AssemblyConfig(tau=self.tau0, tau_scaling=self.tau_scaling)


# Table notation h = 1/2^k on [-1, 1]^2 corresponds to N = 2^(k+1).
def level_for_h_exponent(k: int) -> int:
    return 2 ** (k + 1)


_COMPRESSIBLE = (0.5, 5.0)


def example_case(number: int, swapped: bool = False, **overrides) -> CaseConfig:
    """Preset benchmark cases 1..5; ``swapped`` exchanges mu- and mu+."""
    mu_m, mu_p = _COMPRESSIBLE[::-1] if swapped else _COMPRESSIBLE
    if number == 1:
        ls, mat = LevelSet.circle(0.6), LameField(mu_m, mu_p, 5 * mu_m, 5 * mu_p)
    elif number == 2:
        ls, mat = LevelSet.ellipse(0.6, 0.3), LameField(mu_m, mu_p, 5 * mu_m, 5 * mu_p)
    elif number == 3:
        ls, mat = LevelSet.line(0.5, -0.2), LameField(mu_m, mu_p, 5 * mu_m, 5 * mu_p)
    elif number == 4:
        circles = [(0.0, 0.0, 0.26)] + [(sx * 0.5, sy * 0.5, 0.19) for sx in (1, -1) for sy in (1, -1)]
        ls, mat = LevelSet.circles(circles), LameField(1.0, 30.0, 2.0, 36.0)
    elif number == 5:
        ls, mat = LevelSet.line(0.5, -0.2), LameField(mu_m, mu_p, 5000 * mu_m, 5000 * mu_p)
    else:
        raise ValueError(f"no example {number}")
    name = f"example{number}" + ("-swapped" if swapped and number != 4 else "")
    overrides.setdefault("name", name)
    return CaseConfig(interface=ls, materials=mat, **overrides)


# ------------------------------------------------------------------ config files


def _floats(text):
    return [float(t) for t in text.replace(",", " ").split()]


def load_config(path) -> CaseConfig:
    """Read an INI-style case file (sections domain, interface, materials,
    stabilization, solver, output)."""
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    kw = {}
    if cp.has_section("case"):
        kw["name"] = cp.get("case", "name", fallback="custom")
        if cp.has_option("case", "example"):
            base = example_case(cp.getint("case", "example"), cp.getboolean("case", "swapped", fallback=False))
            kw.setdefault("interface", base.interface)
            kw.setdefault("materials", base.materials)

    if cp.has_section("domain"):
        d = cp["domain"]
        if "levels" in d:
            kw["levels"] = tuple(int(v) for v in _floats(d["levels"]))
        elif "N" in d:
            kw["levels"] = (int(d["N"]),)
        if "N_ref" in d:
            kw["N_ref"] = int(d["N_ref"])

    if cp.has_section("interface"):
        s = cp["interface"]
        kind = s.get("kind", "none")
        center = tuple(_floats(s.get("center", "0 0")))
        if kind == "circle":
            ls = LevelSet.circle(float(s["radius"]), center)
        elif kind == "ellipse":
            ls = LevelSet.ellipse(float(s["a"]), float(s["b"]), center)
        elif kind == "line":
            ls = LevelSet.line(float(s["slope"]), float(s["intercept"]))
        elif kind == "circles":
            rows = [r for r in s["circles"].replace("\n", ";").split(";") if r.strip()]
            ls = LevelSet.circles([_floats(r) for r in rows])
        elif kind == "none":
            ls = LevelSet.none()
        else:
            raise ValueError(f"unknown interface kind {kind!r}")
        kw["interface"] = ls

    if cp.has_section("materials"):
        s = cp["materials"]
        rho = (float(s.get("rho_minus", 1.0)), float(s.get("rho_plus", 1.0)))
        if "E_minus" in s:
            kw["materials"] = LameField.from_young_poisson(
                float(s["E_minus"]), float(s["nu_minus"]), float(s["E_plus"]), float(s["nu_plus"]), *rho)
        else:
            kw["materials"] = LameField(float(s["mu_minus"]), float(s["mu_plus"]),
                                        float(s["lambda_minus"]), float(s["lambda_plus"]), *rho)

    if cp.has_section("stabilization"):
        s = cp["stabilization"]
        kw["tau0"] = float(s.get("tau0", 1.0))
        kw["tau_scaling"] = s.get("scaling", "mu")

    if cp.has_section("domain") and "strict_resolution" in cp["domain"]:
        kw["strict_resolution"] = cp.getboolean("domain", "strict_resolution")

    if cp.has_section("solver"):
        s = cp["solver"]
        for key, conv in (("m", int), ("tol", float), ("shift", float), ("seed", int), ("max_iter", int)):
            if key in s:
                kw[key] = conv(s[key])

    if cp.has_section("output"):
        kw["output_dir"] = cp.get("output", "dir", fallback="out")

    if "interface" not in kw or "materials" not in kw:
        raise ValueError(f"{path}: an [interface] and a [materials] section (or [case] example) are required")
    return CaseConfig(**kw)


# ------------------------------------------------------------------ single level


@dataclass
class EigenResult:
    N: int
    eigenpairs: EigenPairSet
    assembly: Assembly

    @property
    def h(self) -> float:
        return 2.0 / self.N

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigenpairs.eigenvalues

    def eigenvector(self, i: int) -> np.ndarray:
        """Eigenvector i on all dofs (zeros on the boundary)."""
        return self.assembly.dofmap.expand(self.eigenpairs.eigenvectors[:, i])


def discretize(cfg: CaseConfig, N: int) -> Assembly:
    mesh = build_uniform_mesh(N)
    interface = analyze_interface(mesh, cfg.interface, strict=cfg.strict_resolution)
    bases = build_bases(mesh, interface, cfg.materials)
    return assemble(mesh, interface, bases, cfg.materials, cfg.assembly_config)


def run_eigen_case(cfg: CaseConfig, N: int) -> EigenResult:
    try:
        asm = discretize(cfg, N)
        pairs = smallest_eigenpairs(asm.A, asm.M, cfg.m, shift=cfg.shift, tol=cfg.tol,
                                    max_restarts=cfg.max_iter, seed=cfg.seed)
    except Exception as exc:
        raise CaseError(f"{cfg.name}, level N={N}: {exc}") from exc
    log.info("%s N=%d: %s", cfg.name, N, np.array2string(pairs.eigenvalues, precision=5))
    return EigenResult(N, pairs, asm)


# ------------------------------------------------------------------ convergence


def estimate_order(e_coarse: float, e_fine: float, h_ratio: float = 2.0, floor: float = 0.0) -> float:
    """log(e_coarse / e_fine) / log(h_ratio); NaN if either error is at the noise floor."""
    if not (e_coarse > floor and e_fine > floor):
        return math.nan
    return math.log(e_coarse / e_fine) / math.log(h_ratio)


@dataclass
class ConvergenceReport:
    name: str
    levels: list
    eigenvalues: np.ndarray  # (n_levels, m)
    residuals: np.ndarray  # (n_levels, m)
    N_ref: int
    reference: np.ndarray  # (m,)
    reference_residuals: np.ndarray
    errors: np.ndarray = field(init=False)
    orders: np.ndarray = field(init=False)
    ambiguous: list = field(default_factory=list)
    tol: float = 1e-9

    def __post_init__(self):
        self.errors = np.abs(self.eigenvalues - self.reference[None, :])
        self.orders = np.full(self.errors.shape, np.nan)
        floor = 10.0 * self.tol * np.abs(self.reference)
        for k in range(1, len(self.levels)):
            ratio = self.levels[k] / self.levels[k - 1]
            for i in range(self.errors.shape[1]):
                self.orders[k, i] = estimate_order(self.errors[k - 1, i], self.errors[k, i], ratio, floor[i])

    @property
    def h(self) -> np.ndarray:
        return 2.0 / np.asarray(self.levels, dtype=float)

    def write_csv(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ev = out / "eigenvalues.csv"
        with open(ev, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "h", "index", "omega2", "residual"])
            rows = list(zip(self.levels, self.eigenvalues, self.residuals))
            rows.append((self.N_ref, self.reference, self.reference_residuals))
            for N, vals, res in rows:
                for i, (v, r) in enumerate(zip(vals, res), start=1):
                    w.writerow([N, _fmt(2.0 / N), i, _fmt(v), _fmt(r)])
        cv = out / "convergence.csv"
        with open(cv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "level", "h", "omega2", "error", "order"])
            for i in range(self.errors.shape[1]):
                for k, N in enumerate(self.levels):
                    w.writerow([i + 1, N, _fmt(2.0 / N), _fmt(self.eigenvalues[k, i]),
                                _fmt(self.errors[k, i]), _fmt(self.orders[k, i])])
        return ev, cv

    def table(self) -> str:
        head = f"{'ref N=' + str(self.N_ref):>14}" + "".join(f"{'N=' + str(N):>20}" for N in self.levels)
        lines = [self.name, head]
        for i in range(len(self.reference)):
            row = f"{self.reference[i]:14.4f}"
            for k in range(len(self.levels)):
                o = self.orders[k, i]
                row += f"{self.eigenvalues[k, i]:12.4f}" + (f" ({o:5.2f})" if np.isfinite(o) else " " * 8)
            lines.append(row)
        return "\n".join(lines)


def _fmt(x) -> str:
    return "nan" if not np.isfinite(x) else repr(float(x))


def _ambiguous(vals, tol):
    gaps = np.diff(np.sort(vals))
    return bool(np.any(gaps < 10.0 * tol * np.abs(vals[1:])))


def convergence_study(cfg: CaseConfig, runner=None) -> ConvergenceReport:
    """Run every level plus the reference level; eigenvalues are matched by sorted index."""
    runner = runner or (lambda c, N: run_eigen_case(c, N).eigenpairs)
    results = {N: runner(cfg, N) for N in (*cfg.levels, cfg.N_ref)}
    ref = results[cfg.N_ref]
    ambiguous = [N for N, r in results.items() if _ambiguous(r.eigenvalues, cfg.tol)]
    if ambiguous:
        log.warning("%s: near-coincident eigenvalues at N=%s compared as sorted multisets", cfg.name, ambiguous)
    return ConvergenceReport(
        cfg.name, list(cfg.levels),
        np.array([results[N].eigenvalues for N in cfg.levels]),
        np.array([results[N].residuals for N in cfg.levels]),
        cfg.N_ref, np.asarray(ref.eigenvalues), np.asarray(ref.residuals),
        ambiguous=ambiguous, tol=cfg.tol)


# ------------------------------------------------------------------ manufactured solution


@dataclass(frozen=True)
class Manufactured:
    """u = (sin(pi x) sin(pi y), sin(pi x) sin(pi y)) with uniform mu, lambda."""

    mu: float = 1.0
    lam: float = 1.0

    def u(self, x, y):
        s = np.sin(np.pi * x) * np.sin(np.pi * y)
        return np.stack([s, s], axis=-1)

    def grad(self, x, y):
        """(..., component, derivative)."""
        gx = np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
        gy = np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
        g = np.stack([gx, gy], axis=-1)
        return np.stack([g, g], axis=-2)

    def f(self, x, y):
        # -div sigma = -(mu lap u + (lam + mu) grad div u)
        S = np.sin(np.pi * x) * np.sin(np.pi * y)
        C = np.cos(np.pi * x) * np.cos(np.pi * y)
        fi = 2.0 * self.mu * np.pi ** 2 * S - (self.lam + self.mu) * np.pi ** 2 * (C - S)
        return np.stack([fi, fi], axis=-1)


@dataclass
class SourceResult:
    N: int
    l2_error: float
    energy_error: float
    u_free: np.ndarray


def discrete_gradient(bases, u_full, tri, pts):
    """Gradient (n, component, derivative) of the discrete field at points inside elements."""
    from .assembly import element_dofs

    side = bases.side(tri, pts)
    c = bases.coef[tri, side]  # (n, 6, 2, 3)
    d = u_full[element_dofs(bases.mesh)[tri]]
    return np.einsum("ni,nicm->ncm", d, c[..., 1:])


def source_errors(asm: Assembly, u_free: np.ndarray, exact: Manufactured, order: int = 3):
    bases = asm.bases
    u_full = asm.dofmap.expand(u_free)
    tri, pts, w = element_quadrature(bases, order)
    diff = exact.u(pts[:, 0], pts[:, 1]) - evaluate(bases, u_full, tri, pts)
    l2 = math.sqrt(float(np.dot(w, np.sum(diff ** 2, axis=1))))

    G = exact.grad(pts[:, 0], pts[:, 1]) - discrete_gradient(bases, u_full, tri, pts)
    eps = 0.5 * (G + np.swapaxes(G, 1, 2))
    div = G[:, 0, 0] + G[:, 1, 1]
    side = bases.side(tri, pts)
    mat = bases.material
    lam_s = np.array([coefficients_at(mat, "-")[0], coefficients_at(mat, "+")[0]])
    mu_s = np.array([coefficients_at(mat, "-")[1], coefficients_at(mat, "+")[1]])
    # uncut elements use the material of their region label
    region = np.where(bases.is_cut[tri], side, (bases.interface.labels[tri] > 0).astype(int))
    dens = 2.0 * mu_s[region] * np.sum(eps ** 2, axis=(1, 2)) + lam_s[region] * div ** 2
    jump = float(u_free @ (asm.stabilization @ u_free))
    energy = math.sqrt(float(np.dot(w, dens)) + jump)
    return l2, energy


def source_convergence(levels=(8, 16, 32, 64), exact: Manufactured = Manufactured(),
                       interface: LevelSet | None = None, tau0: float = 1.0):
    """Manufactured-solution errors per level and the observed rates."""
    interface = interface or LevelSet.none()
    cfg = CaseConfig(interface=interface, materials=LameField.uniform(exact.mu, exact.lam),
                     tau0=tau0, levels=(), N_ref=1)
    out = []
    for N in levels:
        asm = discretize(cfg, N)
        b = load_vector(asm, exact.f)
        u = source_solve(asm.A, b)
        l2, en = source_errors(asm, u, exact)
        out.append(SourceResult(N, l2, en, u))
    l2_rates = [estimate_order(a.l2_error, b.l2_error, b.N / a.N) for a, b in zip(out, out[1:])]
    en_rates = [estimate_order(a.energy_error, b.energy_error, b.N / a.N) for a, b in zip(out, out[1:])]
    return out, l2_rates, en_rates


def with_overrides(cfg: CaseConfig, **kw) -> CaseConfig:
    return replace(cfg, **kw)
