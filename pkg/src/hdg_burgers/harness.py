"""Convergence-study driver: mesh/time-step ladders, error tables, reports."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import EnergyMonitor
from .local_forms import Discretization
from .mesh import build_uniform_mesh
from .projections import relative_errors
from .timestepping import TimeGrid, run_backward_euler, run_dirk23

SCHEMES = ("be", "dirk23")
L_MODES = ("equal", "minus")


def face_degree(k, l_mode):
    if l_mode not in L_MODES:
        raise ValueError(f"l-mode must be one of {L_MODES}, got {l_mode!r}")
    return k if l_mode == "equal" else k - 1


@dataclass(frozen=True)
class DtRule:
    kind: str                    # 'paper-k1' | 'paper-k2' | 'fixed' | 'ladder'
    value: float | None = None
    ladder: tuple = ()

    def steps_for(self, M, final_time):
        if self.kind == "paper-k1":
            return M * M
        if self.kind == "paper-k2":
            return M ** 3
        if self.kind == "fixed":
            steps = round(final_time / self.value)
            if steps < 1 or abs(steps * self.value - final_time) > 1e-9 * final_time:
                raise ValueError(
                    f"fixed step {self.value} does not divide the horizon {final_time}"
                )
            return steps
        raise ValueError("ladder rules enumerate steps explicitly")


def parse_dt_rule(text):
    if text == "paper-k1":
        return DtRule("paper-k1")
    if text == "paper-k2":
        return DtRule("paper-k2")
    if text.startswith("fixed:"):
        return DtRule("fixed", value=float(text.split(":", 1)[1]))
    if text.startswith("ladder:"):
        vals = tuple(float(v) for v in text.split(":", 1)[1].split(","))
        if not vals or any(v <= 0 for v in vals):
            raise ValueError("ladder needs positive step sizes")
        return DtRule("ladder", ladder=vals)
    raise ValueError(f"unknown dt rule {text!r}")


@dataclass
class ReportRow:
    mesh_m: int
    dt: float
    err_u: float
    err_q: float
    order_u: float | None = None
    order_q: float | None = None


@dataclass
class ConvergenceReport:
    scheme: str
    k: int
    l_mode: str
    dim: int
    nu: float
    example: int | None = None
    rows: list = field(default_factory=list)

    def compute_orders(self):
        """Observed orders between consecutive rows (spatial ladders refine the
        mesh by factors of two; temporal ladders halve the step)."""
        for prev, cur in zip(self.rows, self.rows[1:]):
            if cur.mesh_m != prev.mesh_m:
                ratio = np.log(cur.mesh_m / prev.mesh_m)
            else:
                ratio = np.log(prev.dt / cur.dt)
            cur.order_u = float(np.log(prev.err_u / cur.err_u) / ratio)
            cur.order_q = float(np.log(prev.err_q / cur.err_q) / ratio)


def _mesh_label(M, dim):
    return "x".join([str(M)] * dim)


def run_convergence(case, scheme, k, l_mode, meshes, dt_rule, oseen_tol=1e-10,
                    oseen_max=50, energy_sink=None):
    """Run the scheme over a mesh (or time-step) ladder and tabulate errors.

    `meshes` must be strictly increasing with consecutive doublings for the
    spatial orders to be meaningful; a ladder dt rule fixes one mesh and
    walks the step sizes instead. `energy_sink` optionally receives
    (mesh_label, step, time, norm) rows from a per-step monitor.
    """
    if isinstance(dt_rule, str):
        dt_rule = parse_dt_rule(dt_rule)
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    meshes = list(meshes)
    if any(b <= a for a, b in zip(meshes, meshes[1:])):
        raise ValueError("mesh ladder must be strictly increasing")
    l = face_degree(k, l_mode)
    report = ConvergenceReport(
        scheme=scheme, k=k, l_mode=l_mode, dim=case.dim, nu=case.viscosity,
        example=getattr(case, "example", None),
    )

    if dt_rule.kind == "ladder":
        if len(meshes) != 1:
            raise ValueError("a time-step ladder runs on a single mesh")
        configs = [(meshes[0], dt) for dt in dt_rule.ladder]
    else:
        configs = [(M, None) for M in meshes]

    disc_cache = {}
    for M, dt in configs:
        if M not in disc_cache:
            mesh = build_uniform_mesh(case.dim, M)
            disc_cache[M] = Discretization(mesh, k, l)
        disc = disc_cache[M]
        if dt is None:
            steps = dt_rule.steps_for(M, case.final_time)
        else:
            steps = round(case.final_time / dt)
            if abs(steps * dt - case.final_time) > 1e-9:
                raise ValueError(f"ladder step {dt} does not divide the horizon")
        grid = TimeGrid(case.final_time, steps)
        monitor = EnergyMonitor() if energy_sink is not None else None
        try:
            if scheme == "be":
                state = run_backward_euler(disc, case, grid, monitor=monitor)
            else:
                state = run_dirk23(
                    disc, case, grid, oseen_tol=oseen_tol, oseen_max=oseen_max,
                    monitor=monitor,
                )
        except Exception as exc:
            raise RuntimeError(f"run failed on mesh M={M}: {exc}") from exc
        errs = relative_errors(disc, state, case.u, case.grad_u)
        report.rows.append(ReportRow(M, grid.dt, errs.err_u, errs.err_q))
        if monitor is not None:
            label = _mesh_label(M, case.dim)
            for n, norm in enumerate(monitor.trace.u_norms):
                energy_sink.append((label, n, n * grid.dt, norm))
    report.compute_orders()
    return report


def _fmt_err(v):
    return f"{v:.4e}"


def _fmt_order(v):
    return "--" if v is None else f"{v:.2f}"


def emit_report(report: ConvergenceReport, fmt="csv"):
    """Render a report; errors in table style (4 decimal mantissa, 2-decimal
    orders), plus full-precision error columns in the CSV."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["mesh", "dt", "err_u", "order_u", "err_q", "order_q",
             "err_u_full", "err_q_full"]
        )
        for r in report.rows:
            writer.writerow(
                [
                    _mesh_label(r.mesh_m, report.dim),
                    f"{r.dt:.10g}",
                    _fmt_err(r.err_u),
                    _fmt_order(r.order_u),
                    _fmt_err(r.err_q),
                    _fmt_order(r.order_q),
                    repr(r.err_u),
                    repr(r.err_q),
                ]
            )
        return buf.getvalue()
    if fmt == "md":
        header = ["mesh", "dt", "err_u", "order_u", "err_q", "order_q"]
        lines = []
        body = [
            [
                _mesh_label(r.mesh_m, report.dim),
                f"{r.dt:.10g}",
                _fmt_err(r.err_u),
                _fmt_order(r.order_u),
                _fmt_err(r.err_q),
                _fmt_order(r.order_q),
            ]
            for r in report.rows
        ]
        widths = [
            max(len(h), *(len(row[i]) for row in body)) if body else len(h)
            for i, h in enumerate(header)
        ]
        def fmt_line(cells):
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
        lines.append(fmt_line(header))
        lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
        lines.extend(fmt_line(row) for row in body)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
