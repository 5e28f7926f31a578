"""Run configuration, verification report and file writers."""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .ellipse import ALPHA, BETA, EllipseGeometry, aspect_ratio_from_shape, boundary_polyline
from .membrane import KAPPA
from .numerics import RngStream
from .observables import MomentReport, expectation, sample_uv
from .variational import GroundStateModel, energy_quadrature, minimize_closed, pdf

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

REPORT_OBSERVABLES = ("area", "e3", "perimeter", "shape")
LABELS = {
    "area": "<A> kappa^(1/3)",
    "e3": "<E3>",
    "perimeter": "<L> kappa^(1/6)",
    "shape": "<S>",
}


@dataclass
class RunConfig:
    kappa: float = KAPPA
    seed: int = 20240917
    mc_samples: int = 1_000_000
    tol: float = 1e-10
    out: str = "out"
    strict: bool = False
    dmc: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = ALPHA
        d["beta"] = BETA
        return d

    @property
    def out_dir(self) -> Path:
        p = Path(self.out)
        p.mkdir(parents=True, exist_ok=True)
        return p


def jsonable(obj):
    """Recursively replace numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# verification report


def environment() -> dict:
    return {
        "package": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _row(name, printed, closed, quad, mc=None, mc_err=None, status="match", note="") -> dict:
    return {
        "name": name,
        "printed": printed,
        "closed_form": closed,
        "quadrature": quad,
        "mc": mc,
        "mc_stderr": mc_err,
        "status": status,
        "note": note,
    }


def ground_state_rows(model: GroundStateModel, tol: float = 1e-12) -> list[dict]:
    kappa = model.kappa
    e_quad, _ = energy_quadrature(model.params, kappa, tol)
    printed = kappa ** (-1 / 3) * 3 * 0.75 ** (1 / 3)
    derived = kappa ** (1 / 3) * 3 * 0.75 ** (1 / 3)
    rows = [
        _row("mu_m", None, model.mu, None, note="(3 kappa / 4)^(1/3)"),
        _row("nu_m", None, model.nu, None, note="(sqrt2 - 1) mu_m"),
    ]
    gap = abs(printed - e_quad) / e_quad
    rows.append(
        _row(
            "E_min",
            printed,
            model.energy,
            e_quad,
            status="flagged" if gap > 1e-6 else "match",
            note=(
                "printed kappa^(-1/3) 3 (3/4)^(1/3) disagrees with quadrature; "
                f"kappa^(+1/3) 3 (3/4)^(1/3) = {derived:.10g} agrees"
                if gap > 1e-6
                else ""
            ),
        )
    )
    return rows


def moment_row(rep: MomentReport) -> dict:
    s = rep.scaled
    bad = [k for k, ok in rep.flags.items() if not ok]
    mismatched = {
        k: abs(v - rep.quadrature) / abs(rep.quadrature)
        for k, v in rep.closed_form_variants.items()
        if abs(v - rep.quadrature) > 1e-4 * abs(rep.quadrature)
    }
    notes = []
    if mismatched:
        notes.append("closed-form readings off quadrature: " + ", ".join(f"{k} (rel gap {g:.3g})" for k, g in mismatched.items()))
    if "quadrature matches printed decimal" in bad:
        notes.append(f"printed decimal {rep.printed_value} vs quadrature {s(rep.quadrature):.6f}")
    if "monte carlo within 3 sigma" in bad:
        notes.append("monte carlo outside 3 sigma")
    status = "match" if not (mismatched or bad) else "flagged"
    return _row(
        LABELS.get(rep.name, rep.name),
        rep.printed_value,
        s(rep.closed_form),
        s(rep.quadrature),
        s(rep.mc_mean),
        s(rep.mc_stderr),
        status,
        "; ".join(notes),
    )


def build_report(cfg: RunConfig) -> dict:
    model = minimize_closed(cfg.kappa)
    batch = sample_uv(model, cfg.mc_samples, RngStream(cfg.seed, 1)) if cfg.mc_samples > 0 else None
    rows = ground_state_rows(model)
    moments = {}
    for name in REPORT_OBSERVABLES:
        rep = expectation(model, name, batch, cfg.tol)
        moments[name] = rep
        rows.append(moment_row(rep))
    exact = expectation(model, "perimeter_exact", batch, min(cfg.tol * 100, 1e-8))
    rows.append(
        _row(
            "<L_exact> kappa^(1/6)",
            None,
            None,
            exact.scaled(exact.quadrature),
            exact.scaled(exact.mc_mean),
            exact.scaled(exact.mc_stderr),
            note=f"relative to approximate perimeter: {exact.quadrature / moments['perimeter'].quadrature - 1:+.4f}",
        )
    )
    shape = moments["shape"].quadrature
    rows.append(
        _row(
            "aspect ratio of typical ellipse",
            4.973,
            None,
            aspect_ratio_from_shape(shape),
            note="exact-perimeter shape parameter inverted at <S>",
        )
    )
    report = {
        "kappa": cfg.kappa,
        "seed": cfg.seed,
        "mc_samples": cfg.mc_samples,
        "acceptance_rate": batch.acceptance_rate if batch is not None else None,
        "rows": rows,
        "environment": environment(),
    }
    return report


def format_table(report: dict) -> str:
    def fmt(x, w=12):
        if x is None:
            return " " * (w - 1) + "-"
        return f"{x:>{w}.6f}"

    head = f"{'quantity':34s} {'printed':>12s} {'closed':>12s} {'quadrature':>12s} {'monte carlo':>22s}  status"
    lines = [head, "-" * len(head)]
    for r in report["rows"]:
        mc = "-" if r["mc"] is None else f"{r['mc']:.6f} +- {r['mc_stderr']:.6f}"
        lines.append(
            f"{r['name']:34s} {fmt(r['printed'])} {fmt(r['closed_form'])} {fmt(r['quadrature'])} {mc:>22s}  {r['status']}"
        )
        if r["note"]:
            lines.append(f"    {r['note']}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# data files and figures


def write_samples_csv(path: Path, U: np.ndarray, V: np.ndarray) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["U", "V"])
        for u, v in zip(U, V):
            w.writerow([repr(float(u)), repr(float(v))])
    return path


def read_samples_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def heatmap_grid(model: GroundStateModel, n_u: int = 200, n_v: int = 200, u_max=None, v_max=None):
    """Density on a node grid starting at (0, 0); zero above V = U^2."""
    u_max = u_max if u_max is not None else 14.0 / (2 * model.mu)
    v_max = v_max if v_max is not None else u_max**2 / 4
    u = np.linspace(0.0, u_max, n_u)
    v = np.linspace(0.0, v_max, n_v)
    return u, v, pdf(model, u[:, None], v[None, :])


def grid_mass(u, v, dens) -> float:
    """Trapezoid integral of the gridded density; tends to 1 as the grid refines."""
    return float(_trapezoid(_trapezoid(dens, v, axis=1), u))


def write_heatmap_csv(path: Path, u, v, dens) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["U", "V", "density"])
        for i, ui in enumerate(u):
            for j, vj in enumerate(v):
                w.writerow([repr(float(ui)), repr(float(vj)), repr(float(dens[i, j]))])
    return path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "fuzzysphere"
    return plt


def write_heatmap_svg(path: Path, u, v, dens, model: GroundStateModel) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    norm = dens / dens.max()
    mesh = ax.pcolormesh(u, v, norm.T, shading="auto", cmap="viridis", vmin=0.0, vmax=1.0)
    uu = np.linspace(0, u[-1], 400)
    ax.plot(uu, np.minimum(uu**2, v[-1]), color="white", lw=1.2, label="V = U^2")
    ax.set_xlim(0, u[-1])
    ax.set_ylim(0, v[-1])
    ax.set_xlabel("U")
    ax.set_ylabel("V")
    ax.set_title(f"ground-state density, kappa = {model.kappa:.5g}")
    ax.legend(loc="upper left", frameon=False, labelcolor="white")
    fig.colorbar(mesh, ax=ax, label="P / P(0, 0)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_ellipse_svg(path: Path, geom: EllipseGeometry, ratio: float, n: int = 400) -> Path:
    plt = _pyplot()
    pts = boundary_polyline(geom, n)
    pts = np.vstack([pts, pts[:1]])
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.fill(pts[:, 0], pts[:, 1], color="#c9d9ef", ec="#1f3b73", lw=1.5)
    ax.set_aspect("equal")
    ax.axis("off")
    ax.set_title(f"aspect ratio {ratio:.3f}")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_dmc_trace(path: Path, result) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "population", "e_ref", "e_step"])
        for i, (n, er, es) in enumerate(zip(result.population, result.e_ref, result.e_step)):
            w.writerow([i, int(n), repr(float(er)), repr(float(es))])
    return path


def write_dmc_hist(path: Path, result) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["U_lo", "U_hi", "V_lo", "V_hi", "mass"])
        for i in range(len(result.u_edges) - 1):
            for j in range(len(result.v_edges) - 1):
                w.writerow([
                    repr(float(result.u_edges[i])), repr(float(result.u_edges[i + 1])),
                    repr(float(result.v_edges[j])), repr(float(result.v_edges[j + 1])),
                    repr(float(result.hist[i, j])),
                ])
    return path
