"""Experiment configuration, sweep orchestration, and report persistence.

A sweep walks a decreasing eps ladder and, per value, computes the direct 2D
eigenvalues (with one mesh-refinement Richardson step), the stretched 1D
model spectrum on the clipped interval, the expansion coefficients and
truncated predictions, and the subspace-reduction correction in oracle mode
(projected true eigenvector) and approximate mode (model eigenvector).
Residual decay orders are fitted on the eps^(2*alpha1)-scaled residuals,
the scale on which the expansion theory states its remainder exponent; the
CSV residual column itself stays unscaled.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError, ThinspecError
from .laplacian2d import assemble_mapped_form, build_mesh, solve_lowest_modes
from .oscillator import (
    matrix_elements,
    select_box_halfwidth,
    solve_schrodinger_1d,
)
from .perturbation import (
    closed_form_q1_q2,
    evaluate_prediction,
    problem_from_table,
    rs_expand,
)
from .reduction import (
    a21_scaling_probe,
    block_equation_residuals,
    build_blocks,
    build_projection,
    correction_coefficients,
    fixed_point_iterate,
)
from .series import DomainProfile, build_perturbation_terms

CSV_HEADER = ("epsilon,j,K,lambda_direct,lambda_pred,residual,"
              "lambda_model,lambda_tilde_oracle,lambda_tilde_approx,status")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeshControls:
    nx_min: int = 64
    nx_coeff: float = 16.0
    nt: int = 48
    refine: bool = True
    n_1d: int = 4001
    box_tol: float = 1e-12
    basis_size: int = 40


@dataclass(frozen=True)
class SolverTolerances:
    eig2d: float = 1e-8
    cg: float = 1e-10
    fixed_point: float = 1e-13
    correction_order: int = 6


@dataclass(frozen=True)
class ExperimentConfig:
    profile: DomainProfile
    epsilons: tuple
    modes: int = 2
    expansion_order: int = 4
    mesh: MeshControls = field(default_factory=MeshControls)
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    out_dir: str = "."
    out_format: str = "csv"
    seed: int = 0

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if not eps:
            raise ConfigError("epsilons must be a nonempty list")
        if any(not 0.0 < e < 1.0 for e in eps):
            raise ConfigError("every epsilon must lie in (0, 1)")
        if any(nxt >= prv for nxt, prv in zip(eps[1:], eps[:-1])):
            raise ConfigError("epsilons must be strictly decreasing")
        if self.modes < 1:
            raise ConfigError("modes J must be >= 1")
        if self.expansion_order < 1:
            raise ConfigError("expansion order N must be >= 1")

    def to_dict(self) -> dict:
        return {
            "profile": {
                "M": self.profile.M,
                "m": self.profile.m,
                "c_coeffs": list(self.profile.c_coeffs),
                "l1": self.profile.l1,
                "l2": self.profile.l2,
            },
            "epsilons": list(self.epsilons),
            "modes": self.modes,
            "expansion_order": self.expansion_order,
            "mesh": {
                "nx_min": self.mesh.nx_min,
                "nx_coeff": self.mesh.nx_coeff,
                "nt": self.mesh.nt,
                "refine": self.mesh.refine,
                "n_1d": self.mesh.n_1d,
                "box_tol": self.mesh.box_tol,
                "basis_size": self.mesh.basis_size,
            },
            "tolerances": {
                "eig2d": self.tolerances.eig2d,
                "cg": self.tolerances.cg,
                "fixed_point": self.tolerances.fixed_point,
                "correction_order": self.tolerances.correction_order,
            },
            "output": {"dir": self.out_dir, "format": self.out_format},
            "seed": self.seed,
        }


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a validated configuration; any defect raises ConfigError."""
    try:
        pd = dict(data["profile"])
        m = int(pd["m"])
        if m % 2 != 0:
            raise ConfigError("flatness order m must be even, got %d" % m)
        cc = [float(c) for c in pd.get("c_coeffs", [0.0])]
        if any(c != 0.0 for c in cc) and cc[0] == 0.0:
            raise ConfigError("c0 must be nonzero (or c identically zero)")
        try:
            profile = DomainProfile(
                M=float(pd.get("M", 1.0)),
                m=m,
                c_coeffs=tuple(cc),
                l1=float(pd.get("l1", 1.0)),
                l2=float(pd.get("l2", 1.0)),
            )
        except GeometryError as exc:
            raise ConfigError(str(exc))
        mesh_d = dict(data.get("mesh", {}))
        tol_d = dict(data.get("tolerances", {}))
        out_d = dict(data.get("output", {}))
        fmt = out_d.get("format", "csv")
        if fmt not in ("csv", "json", "both"):
            raise ConfigError("output format must be csv, json, or both")
        return ExperimentConfig(
            profile=profile,
            epsilons=tuple(float(e) for e in data["epsilons"]),
            modes=int(data.get("modes", 2)),
            expansion_order=int(data.get("expansion_order", 4)),
            mesh=MeshControls(
                nx_min=int(mesh_d.get("nx_min", 64)),
                nx_coeff=float(mesh_d.get("nx_coeff", 16.0)),
                nt=int(mesh_d.get("nt", 48)),
                refine=bool(mesh_d.get("refine", True)),
                n_1d=int(mesh_d.get("n_1d", 4001)),
                box_tol=float(mesh_d.get("box_tol", 1e-12)),
                basis_size=int(mesh_d.get("basis_size", 40)),
            ),
            tolerances=SolverTolerances(
                eig2d=float(tol_d.get("eig2d", 1e-8)),
                cg=float(tol_d.get("cg", 1e-10)),
                fixed_point=float(tol_d.get("fixed_point", 1e-13)),
                correction_order=int(tol_d.get("correction_order", 6)),
            ),
            out_dir=str(out_d.get("dir", ".")),
            out_format=fmt,
            seed=int(data.get("seed", 0)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("bad configuration: %s" % exc)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def default_config(**overrides) -> ExperimentConfig:
    """Harmonic-calibrated default: m=2, M=1, c0 = 1/(2 pi^2)."""
    data = {
        "profile": {"M": 1.0, "m": 2, "c_coeffs": [1.0 / (2.0 * np.pi**2)], "l1": 1.0, "l2": 1.0},
        "epsilons": [0.4, 0.2, 0.1, 0.05, 0.025],
        "modes": 2,
        "expansion_order": 4,
    }
    data.update(overrides)
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# 1D model solve on the clipped interval
# ---------------------------------------------------------------------------

def model_spectrum(profile: DomainProfile, eps: float, S: int, n_1d: int, box_tol: float,
                   N: int, seed: int = 0):
    """Oscillator spectrum, matrix elements, and box metadata at one eps.

    The box is the decay-selected dyadic halfwidth clipped to the stretched
    interval; when the clip is not active the box doubles (up to the clip)
    until the highest requested mode has decayed at the edges.
    """
    h0pot, terms = build_perturbation_terms(profile, N)
    clip = min(profile.l1, profile.l2) / eps**profile.alpha1
    if h0pot.is_zero:
        L = clip
    else:
        L = select_box_halfwidth(h0pot, box_tol, clip=clip)
    n = n_1d if n_1d % 2 == 1 else n_1d + 1
    while True:
        result = solve_schrodinger_1d(h0pot, (L, L), n, S, seed=seed)
        if L >= clip:
            break
        edge = max(2, n // 50)
        psi = result.eigenfunctions
        tail = max(np.max(np.abs(psi[:, :edge])), np.max(np.abs(psi[:, -edge:])))
        if tail < 1e-6 * np.max(np.abs(psi)):
            break
        L = min(2.0 * L, clip)
    table = matrix_elements(result, terms)
    return result, table, {"box_halfwidth": L, "clipped": bool(L >= clip), "grid_n": n}


def sweep_mesh_sizes(profile: DomainProfile, eps: float, mesh: MeshControls):
    nx = max(mesh.nx_min, int(math.ceil(mesh.nx_coeff / eps**profile.alpha1)))
    return nx, mesh.nt


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepReport:
    config: dict
    rows: list
    slopes: list
    diagnostics: dict

    def to_json_text(self) -> str:
        payload = {
            "config": self.config,
            "rows": self.rows,
            "slopes": self.slopes,
            "diagnostics": self.diagnostics,
        }
        return json.dumps(payload, indent=1, sort_keys=True)

    @classmethod
    def from_json_text(cls, text: str) -> "SweepReport":
        payload = json.loads(text)
        return cls(payload["config"], payload["rows"], payload["slopes"],
                   payload["diagnostics"])

    def csv_lines(self):
        yield CSV_HEADER
        for row in self.rows:
            yield ",".join([
                _fmt(row["epsilon"]),
                str(row["j"]),
                str(row["K"]),
                _fmt(row["lambda_direct"]),
                _fmt(row["lambda_pred"]),
                _fmt(row["residual"]),
                _fmt(row["lambda_model"]),
                _fmt(row["lambda_tilde_oracle"]),
                _fmt(row["lambda_tilde_approx"]),
                row["status"],
            ])

    @property
    def failed_cells(self):
        return sorted({row["epsilon"] for row in self.rows
                       if row["status"] != "ok"})


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return "%.17g" % float(x)


def _run_cell(config: ExperimentConfig, eps: float, cell_seed: int):
    profile = config.profile
    J = config.modes
    N = config.expansion_order
    tol = config.tolerances

    # 1D model side
    S = max(4 * J, config.mesh.basis_size)
    osc, table, box_meta = model_spectrum(
        profile, eps, S, config.mesh.n_1d, config.mesh.box_tol, N, seed=cell_seed)
    problem = problem_from_table(osc.eigenvalues, table)
    expansions = []
    closed_forms = []
    for j in range(J):
        exp = rs_expand(problem, j, N, exponent_step=profile.alpha1,
                        M=profile.M, alpha1=profile.alpha1)
        expansions.append(exp)
        if table.orders >= 2:
            closed_forms.append(closed_form_q1_q2(table, osc.eigenvalues, j))
        else:
            closed_forms.append((float(table.entries[0, j, j]) if table.orders else 0.0, None))

    # direct 2D side with one refinement step
    nx, nt = sweep_mesh_sizes(profile, eps, config.mesh)
    sigma = np.pi**2 / (profile.M**2 * eps**2) + 0.5 * max(osc.eigenvalues[0], 0.0) * eps ** (
        -2.0 * profile.alpha1)
    mesh_c = build_mesh(profile, nx, nt)
    K_c, B_c = assemble_mapped_form(profile, eps, mesh_c)
    direct_c = solve_lowest_modes(K_c, B_c, J, tol=tol.eig2d, sigma=sigma,
                                  epsilon=eps, mesh=mesh_c, seed=cell_seed)
    if config.mesh.refine:
        mesh_f = mesh_c.refined()
        K_f, B_f = assemble_mapped_form(profile, eps, mesh_f)
        direct_f = solve_lowest_modes(K_f, B_f, J, tol=tol.eig2d, sigma=sigma,
                                      epsilon=eps, mesh=mesh_f, seed=cell_seed)
        lam_direct = (4.0 * direct_f.eigenvalues - direct_c.eigenvalues) / 3.0
        mesh_err = np.abs(direct_f.eigenvalues - direct_c.eigenvalues) / 3.0
    else:
        lam_direct = direct_c.eigenvalues.copy()
        mesh_err = np.full(J, np.nan)

    # subspace reduction on the coarse mesh
    basis = build_projection(mesh_c, profile, eps, B_c)
    blocks = build_blocks(K_c, B_c, basis)
    lam_model, phis = blocks.a11_eigenpairs(J)
    corr = []
    for j in range(J):
        phi = phis[:, j]
        phi = phi / blocks.b_norm(phi)
        u = direct_c.eigenvectors[:, j]
        u1 = basis.project(u)
        inner = blocks.b_inner(u1, phi)
        if inner < 0:
            u = -u
            u1 = -u1
            inner = -inner
        a21_u1 = basis.complement(blocks.apply_operator(u1))
        a21_phi = basis.complement(blocks.apply_operator(phi))
        n_a21_u1 = blocks.b_norm(a21_u1)
        n_a21_phi = blocks.b_norm(a21_phi)
        coupling = n_a21_u1 * n_a21_phi / inner if inner > 0 else float("inf")
        series_o = correction_coefficients(blocks, lam_model[j], phi, u1,
                                           tol.correction_order, cg_tol=tol.cg)
        trace_o = fixed_point_iterate(series_o, tol=tol.fixed_point)
        series_a = correction_coefficients(blocks, lam_model[j], phi, phi,
                                           tol.correction_order, cg_tol=tol.cg)
        trace_a = fixed_point_iterate(series_a, tol=tol.fixed_point)
        res1, res2 = block_equation_residuals(blocks, direct_c, j)
        corr.append({
            "overlap_normalized": float(inner / max(blocks.b_norm(u1) * blocks.b_norm(phi), 1e-300)),
            "a21_u1_norm": n_a21_u1,
            "a21_phi_norm": n_a21_phi,
            "coupling": float(coupling),
            "tilde_oracle": trace_o.value,
            "tilde_approx": trace_a.value,
            "contraction_ratio_oracle": trace_o.contraction_ratio,
            "corr_a_oracle": [float(c) for c in series_o.corr_a],
            "block_residuals": [res1, res2],
            "lambda_direct_coarse": float(direct_c.eigenvalues[j]),
        })

    predictions = {}
    for j in range(J):
        per_k = []
        for Kk in range(N + 1):
            nu_k, lam_k = evaluate_prediction(expansions[j], eps, Kk)
            per_k.append((nu_k, lam_k))
        predictions[j] = per_k

    diag = {
        "box": box_meta,
        "basis_size": S,
        "mu": [float(v) for v in osc.eigenvalues[:max(J, 6)]],
        "q": {str(j): [float(v) for v in expansions[j].q] for j in range(J)},
        "closed_form_q1_q2": {str(j): [None if v is None else float(v) for v in closed_forms[j]]
                              for j in range(J)},
        "mesh_coarse": [nx, nt],
        "eig_residuals": [float(r) for r in direct_c.residuals],
        "mesh_error_estimate": [None if math.isnan(v) else float(v) for v in mesh_err],
        "lambda_direct_coarse": [float(v) for v in direct_c.eigenvalues],
        "lambda_model": [float(v) for v in lam_model],
        "correction": corr,
        "sigma": float(sigma),
    }
    return lam_direct, lam_model, predictions, corr, diag


def run_sweep(config: ExperimentConfig) -> SweepReport:
    """Full pipeline over the eps ladder; failing cells record their status.

    Every per-cell error derived from the package error hierarchy lands in
    the status column of that cell's rows and the sweep continues.
    """
    rows = []
    diagnostics = {}
    scaled_residuals = {}
    J = config.modes
    N = config.expansion_order
    alpha1 = config.profile.alpha1
    for idx, eps in enumerate(config.epsilons):
        cell_seed = config.seed + 1000 * idx
        try:
            lam_direct, lam_model, predictions, corr, diag = _run_cell(config, eps, cell_seed)
            diagnostics[_fmt(eps)] = diag
            status = "ok"
            for j in range(J):
                for Kk in range(N + 1):
                    lam_k = predictions[j][Kk][1]
                    resid = abs(lam_direct[j] - lam_k)
                    rows.append({
                        "epsilon": float(eps),
                        "j": j,
                        "K": Kk,
                        "lambda_direct": float(lam_direct[j]),
                        "lambda_pred": float(lam_k),
                        "residual": float(resid),
                        "lambda_model": float(lam_model[j]),
                        "lambda_tilde_oracle": float(corr[j]["tilde_oracle"]),
                        "lambda_tilde_approx": float(corr[j]["tilde_approx"]),
                        "status": status,
                    })
                    scaled_residuals.setdefault((j, Kk), []).append(
                        (eps, resid * eps ** (2.0 * alpha1),
                         diag["mesh_error_estimate"][j],
                         abs(lam_direct[j])))
        except ThinspecError as exc:
            status = "error:%s" % type(exc).__name__
            diagnostics[_fmt(eps)] = {"error": str(exc)}
            for j in range(J):
                for Kk in range(N + 1):
                    rows.append({
                        "epsilon": float(eps), "j": j, "K": Kk,
                        "lambda_direct": float("nan"), "lambda_pred": float("nan"),
                        "residual": float("nan"), "lambda_model": float("nan"),
                        "lambda_tilde_oracle": float("nan"),
                        "lambda_tilde_approx": float("nan"),
                        "status": status,
                    })
    slopes = _fit_slopes(scaled_residuals, config)
    return SweepReport(config.to_dict(), rows, slopes, diagnostics)


def _fit_slopes(scaled_residuals: dict, config: ExperimentConfig):
    """Log-log decay order of the scaled residuals over the small-eps half.

    Points whose scaled residual sits below the noise floor (100x the
    eigensolver tolerance plus the mesh-error estimate, on the same scale)
    are excluded so discretization noise cannot fake high orders.
    """
    out = []
    alpha1 = config.profile.alpha1
    for (j, Kk), pts in sorted(scaled_residuals.items()):
        pts_sorted = sorted(pts, key=lambda t: -t[0])  # descending eps
        half = pts_sorted[len(pts_sorted) // 2:] if len(pts_sorted) > 1 else pts_sorted
        usable = []
        for eps, scaled, _mesh_est, lam_scale in half:
            floor = 100.0 * config.tolerances.eig2d * lam_scale * eps ** (2.0 * alpha1)
            if scaled > floor:
                usable.append((eps, scaled))
        if len(usable) >= 2:
            lx = np.log([u[0] for u in usable])
            ly = np.log([u[1] for u in usable])
            coef = np.polyfit(lx, ly, 1)
            rms = float(np.sqrt(np.mean((ly - np.polyval(coef, lx)) ** 2)))
            slope = float(coef[0])
        else:
            slope, rms = float("nan"), float("nan")
        out.append({"j": j, "K": Kk, "slope": slope, "fit_rms": rms,
                    "points_used": len(usable),
                    "expected": (Kk + 1) * alpha1})
    return out


def emit_report(report: SweepReport, out_format: str, out_dir: str):
    """Write sweep.csv and/or sweep.json; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if out_format in ("csv", "both"):
        path = os.path.join(out_dir, "sweep.csv")
        with open(path, "w", encoding="utf-8") as fh:
            for line in report.csv_lines():
                fh.write(line + "\n")
        paths.append(path)
    if out_format in ("json", "both"):
        path = os.path.join(out_dir, "sweep.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json_text())
        paths.append(path)
    if not paths:
        raise ConfigError("unknown report format %r" % out_format)
    return paths


def read_report(path: str) -> SweepReport:
    with open(path, "r", encoding="utf-8") as fh:
        return SweepReport.from_json_text(fh.read())


# ---------------------------------------------------------------------------
# helpers used by verification and acceptance
# ---------------------------------------------------------------------------

def richardson_in_eps(eps_values, values, power: float = 1.0, levels=None):
    """Neville table for a sequence on a ratio-2 geometric eps ladder.

    Assumes an expansion in powers of eps**power; level k of the returned
    table has the first k terms eliminated.
    """
    eps_values = list(eps_values)
    vals = np.asarray(values, dtype=float)
    for a, b in zip(eps_values[:-1], eps_values[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ConfigError("eps ladder must decrease by exact factors of 2")
    table = [vals.copy()]
    cur = vals.copy()
    k = 1
    max_levels = len(vals) - 1 if levels is None else min(levels, len(vals) - 1)
    while k <= max_levels:
        r = 2.0 ** (k * power)
        cur = (r * cur[1:] - cur[:-1]) / (r - 1.0)
        table.append(cur.copy())
        k += 1
    return table


def scaling_probe_from_sweep(report: SweepReport, j: int = 0):
    """Coupling-scaling probe fed by the sweep diagnostics."""
    pairs = []
    for key, diag in report.diagnostics.items():
        if "correction" not in diag:
            continue
        eps = float(key)
        pairs.append((eps, float(diag["correction"][j]["coupling"])))
    return a21_scaling_probe(pairs)
