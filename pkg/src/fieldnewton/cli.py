"""Scenario-driven command line front end.

    fieldnewton run <scenario> --out <dir> [--overwrite] [--seed N]
    fieldnewton scenarios

Exit codes: 0 all checks passed, 1 a check exceeded its tolerance,
2 the scenario failed to parse or validate (or output would be clobbered).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import dynamics as dyn
from . import geometry as geo
from . import solve
from . import variational as var
from .bundles import KVelocity, inverse_iso, metric_iso
from .errors import FieldNewtonError, ParseError, ValidationError
from .exprlang import parse

TASKS = ("christoffel", "geodesic", "newton", "ddw", "noether", "verify")

DEFAULT_TOLERANCES = {
    "christoffel_fd": 1e-6,
    "flat_newton": 1e-10,
    "geodesic_residual": 1e-5,
    "oracle": 1e-5,
    "energy_drift": 1e-8,
    "identity": 1e-9,
    "closed_form": 1e-9,
    "roundtrip": 1e-12,
    "trace": 1e-10,
    "classical": 1e-10,
    "hamilton_noether": 1e-9,
    "newton": 1e-8,
    "ddw": 1e-8,
    "symmetry": 1e-12,
    "noether_divergence": 1e-8,
    "hamilton_principle": 1e-6,
}


class ScenarioError(FieldNewtonError):
    """Scenario file could not be loaded; the message carries the location."""


# -- scenario -------------------------------------------------------------------


@dataclass
class SheetSpec:
    name: str
    kind: str  # expr | rank1 | flat_newton
    q: list[str] | None
    extents: list[tuple[float, float]]
    resolution: list[int]
    expect_newton: float | None = None


@dataclass
class Scenario:
    name: str
    task: str
    metric: geo.MetricField
    k: int
    q0: np.ndarray
    qdot0: np.ndarray
    force: dyn.ForceField | None = None
    potential: var.Potential | None = None
    vector: var.ProlongedVector | None = None
    bump: str | None = None
    sheets: list[SheetSpec] = field(default_factory=list)
    extents: list = field(default_factory=list)
    resolution: list = field(default_factory=list)
    samples: int = 20
    dt: float = 1e-3
    oracle_h: float = 1e-3
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    overridden: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.metric.n


def _where(section: str, err: Exception) -> ScenarioError:
    return ScenarioError(f"[{section}] {err}")


def _metric(doc: dict) -> geo.MetricField:
    m = doc.get("metric")
    if not isinstance(m, dict):
        raise ScenarioError("[metric] section is required")
    try:
        if "catalog" in m:
            params = {key: val for key, val in m.items() if key != "catalog"}
            return geo.from_catalog(m["catalog"], **params)
        names = doc.get("chart", {}).get("names")
        if names is None:
            raise ValidationError("custom metric needs [chart] names")
        if "entries" not in m:
            raise ValidationError("give either 'catalog' or 'entries'")
        return geo.MetricField(geo.Chart(tuple(names)), m["entries"], name=m.get("name", "custom"))
    except (FieldNewtonError, ValueError, TypeError, KeyError) as exc:
        raise _where("metric", exc) from exc


def _floats(x, shape, what):
    try:
        a = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{what}: not numeric") from exc
    if a.shape != shape:
        raise ScenarioError(f"{what}: expected shape {shape}, got {a.shape}")
    return a


def _sheets(doc, k, grid_ext, grid_res) -> list[SheetSpec]:
    out = []
    for i, s in enumerate(doc.get("sheets", [])):
        kind = s.get("kind", "expr")
        if kind not in ("expr", "rank1", "flat_newton"):
            raise ScenarioError(f"[[sheets]] #{i + 1}: unknown kind '{kind}'")
        q = s.get("q")
        if kind == "expr" and not q:
            raise ScenarioError(f"[[sheets]] #{i + 1}: kind 'expr' needs q = [...]")
        out.append(
            SheetSpec(
                name=s.get("name", f"sheet{i + 1}"),
                kind=kind,
                q=list(q) if q else None,
                extents=[tuple(map(float, e)) for e in s.get("extents", grid_ext)],
                resolution=[int(r) for r in s.get("resolution", grid_res)],
                expect_newton=s.get("expect_newton"),
            )
        )
    return out


def load_scenario(path) -> Scenario:
    """Read and validate a TOML scenario file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return scenario_from_dict(doc, default_name=path.stem)


def scenario_from_dict(doc: dict, default_name: str = "scenario") -> Scenario:
    task = doc.get("task")
    if task not in TASKS:
        raise ScenarioError(f"task must be one of {', '.join(TASKS)}; got {task!r}")
    g = _metric(doc)
    names = g.chart.names
    grid = doc.get("grid", {})
    init = doc.get("initial", {})
    qdot_raw = init.get("qdot")
    k = int(grid.get("k", len(qdot_raw[0]) if qdot_raw else 1))
    if k < 1:
        raise ScenarioError("[grid] k must be positive")
    q0 = _floats(init.get("q", [0.0] * g.n), (g.n,), "[initial] q")
    qdot0 = _floats(qdot_raw if qdot_raw is not None else np.zeros((g.n, k)), (g.n, k), "[initial] qdot")
    sc = Scenario(name=doc.get("name", default_name), task=task, metric=g, k=k, q0=q0, qdot0=qdot0)

    if "force" in doc:
        try:
            sc.force = dyn.ForceField(names, doc["force"]["entries"], k)
        except (FieldNewtonError, KeyError, ValueError, TypeError) as exc:
            raise _where("force", exc) from exc
    if "potential" in doc:
        try:
            sc.potential = var.Potential(names, doc["potential"].get("U", "0"))
        except (FieldNewtonError, ValueError) as exc:
            raise _where("potential", exc) from exc
    if "vector" in doc:
        try:
            sc.vector = var.ProlongedVector(names, doc["vector"]["entries"])
            sc.bump = doc["vector"].get("bump")
            if sc.bump is not None:
                parse(sc.bump, [f"t{a + 1}" for a in range(k)])
        except (FieldNewtonError, KeyError, ValueError) as exc:
            raise _where("vector", exc) from exc

    ext = grid.get("extents", [[-0.5, 0.5]] * k)
    res = grid.get("resolution", [9] * k)
    if len(ext) != k or len(res) != k:
        raise ScenarioError(f"[grid] extents and resolution need {k} entries")
    sc.extents = [tuple(map(float, e)) for e in ext]
    sc.resolution = [int(r) for r in res]
    sc.sheets = _sheets(doc, k, ext, res)
    for s in sc.sheets:
        if s.kind == "expr":
            if len(s.q) != g.n:
                raise ScenarioError(f"sheet '{s.name}': needs {g.n} component expressions")
            try:
                for e in s.q:
                    parse(e, [f"t{a + 1}" for a in range(k)])
            except ParseError as exc:
                raise ScenarioError(f"sheet '{s.name}': {exc}") from exc
    sc.dt = float(grid.get("dt", 1e-3))
    sc.oracle_h = float(grid.get("oracle_h", 1e-3))
    sc.samples = int(doc.get("samples", 20))
    sc.seed = int(doc.get("seed", 0))
    tol = doc.get("tolerances", {})
    unknown = set(tol) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ScenarioError(f"[tolerances] unknown keys {sorted(unknown)}")
    sc.tolerances.update({key: float(v) for key, v in tol.items()})
    sc.overridden = tuple(sorted(tol))
    return sc


# -- reports --------------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    note: str = ""


@dataclass
class Report:
    task: str
    scenario: str
    seed: int
    checks: list[Check] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)

    def bound(self, name, value, tol, note=""):
        """Pass when ``value <= tol``."""
        value = float(value)
        self.checks.append(Check(name, value, tol, bool(value <= tol), note))

    def near(self, name, value, target, tol, note=""):
        """Pass when ``|value - target| <= tol``."""
        value = float(value)
        self.checks.append(Check(name, value, tol, bool(abs(value - target) <= tol), note or f"target {target:g}"))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self, tolerances: dict, overridden) -> str:
        out = [f"task: {self.task}", f"scenario: {self.scenario}", f"seed: {self.seed}"]
        if overridden:
            out.append("tolerance overrides: " + ", ".join(f"{key}={tolerances[key]:g}" for key in overridden))
        out += self.lines
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            note = f"  ({c.note})" if c.note else ""
            out.append(f"{status}  {c.name}: {c.value:.3e}  tol {c.tol:.0e}{note}")
        for a in self.artifacts:
            out.append(f"wrote {a}")
        out.append(f"status: {'PASS' if self.passed else 'FAIL'}  ({sum(c.passed for c in self.checks)}/{len(self.checks)} checks)")
        return "\n".join(out) + "\n"


# -- tasks ------------------------------------------------------------------------


def _samples(sc: Scenario, rng) -> list[KVelocity]:
    pts = [KVelocity(sc.q0, sc.qdot0)]
    for _ in range(sc.samples - 1):
        pts.append(KVelocity(sc.q0 + 0.1 * rng.normal(size=sc.n), rng.normal(size=(sc.n, sc.k))))
    return pts


def _fmt(a) -> str:
    return np.array2string(np.asarray(a), precision=10, suppress_small=True, separator=", ", max_line_width=120)


def _build_sheet(sc: Scenario, entry: SheetSpec) -> solve.Sheet:
    if entry.kind == "rank1":
        return solve.rank1_sheet(sc.metric, sc.q0, KVelocity(sc.q0, sc.qdot0), entry.extents, entry.resolution, sc.dt)
    if entry.kind == "flat_newton":
        F = sc.force if sc.force is not None else np.zeros((sc.n, sc.k, sc.k))
        return solve.flat_newton_sheet(F, sc.q0, sc.qdot0, entry.extents, entry.resolution)
    from .exprlang import compile_expr

    tnames = [f"t{a + 1}" for a in range(sc.k)]
    fns = [compile_expr(parse(e, tnames)) for e in entry.q]
    return solve.Sheet.from_function(lambda t: [float(f(dict(zip(tnames, t)))) for f in fns], entry.extents, entry.resolution)


def _emit(sheet, out: Path, name: str, overwrite: bool, report: Report):
    solve.emit_sheet(sheet, out / f"{name}.csv", overwrite=overwrite)
    report.artifacts.append(f"{name}.csv")


def task_christoffel(sc, report, rng, out, overwrite):
    g, q = sc.metric, sc.q0
    G = geo.christoffel(g, q)
    report.lines.append(f"Christoffel symbols Gamma[l][i][j] at q = {_fmt(q)}:")
    for idx in np.ndindex(*G.shape):
        if idx[1] <= idx[2]:
            report.lines.append(f"  Gamma^{idx[0] + 1}_{idx[1] + 1}{idx[2] + 1} = {G[idx]:.15g}")
    h = 1e-5
    dg = np.empty((g.n,) * 3)
    for m in range(g.n):
        e = np.zeros(g.n)
        e[m] = h
        dg[:, :, m] = (g.matrix(q + e) - g.matrix(q - e)) / (2 * h)
    G_fd = geo._gamma_from(np.linalg.inv(g.matrix(q)), dg)
    report.bound("Christoffel symbols vs finite-difference metric derivatives", np.abs(G - G_fd).max(), sc.tolerances["christoffel_fd"])


def task_geodesic(sc, report, rng, out, overwrite):
    g = sc.metric
    X = KVelocity(sc.q0, sc.qdot0)
    A = dyn.geodesic_sopde(g, sc.k).coefficients(X)
    oracle = dyn.geodesic_oracle(g, X, sc.oracle_h, sc.dt)
    report.bound("geodesic k-field: -Gamma(qdot,qdot) vs exponential-map oracle", np.abs(A - oracle).max(), sc.tolerances["oracle"])
    drift = 0.0
    for a in range(sc.k):
        path = solve.geodesic_path(g, sc.q0, sc.qdot0[:, a], 1.0, sc.dt)
        E = path.energies(g)
        drift = max(drift, float(np.abs(E - E[0]).max()))
    report.bound("energy drift along integrated geodesics", drift, sc.tolerances["energy_drift"])
    try:
        solve.rank1_decomposition(X)
    except ValidationError:
        report.lines.append("initial k-velocity has rank > 1; no rank-1 sheet built")
    else:
        specs = sc.sheets or [SheetSpec("geodesic_sheet", "rank1", None, *_default_grid(sc))]
        for entry in specs:
            sheet = _build_sheet(sc, entry)
            r = solve.newton_residual(g, None, sheet)
            report.lines.append(f"sheet {entry.name}: h = {_fmt(sheet.spacing)}, {r.skipped} boundary nodes skipped")
            report.bound(f"geodesic equation residual on sheet {entry.name}", r.max, sc.tolerances["geodesic_residual"])
            _emit(sheet, out, entry.name, overwrite, report)
    D = dyn.geodesic_sopde(g, sc.k)
    report.lines.append(f"compatibility defect of the geodesic k-field at the initial point: {solve.compatibility_defect(D, X):.6e}")


def _default_grid(sc):
    return sc.extents, sc.resolution


def task_newton(sc, report, rng, out, overwrite):
    g = sc.metric
    F = sc.force or dyn.ForceField.zero(g.chart.names, sc.k)
    D = dyn.newton_sopde(g, F)
    worst_id = worst_rt = 0.0
    for X in _samples(sc, rng):
        worst_id = max(worst_id, dyn.newton_identity_check(g, D, F, X).max_abs())
        Fv = F.evaluate(X)
        A = D.coefficients(X)
        back = dyn.force_from_sopde(g, D, X)
        worst_rt = max(worst_rt, np.abs(back - Fv).max(), np.abs(dyn.sopde_from_force_values(g, back, X) - A).max())
    report.bound("Newton law: iota_D dtheta + calT - F = 0", worst_id, sc.tolerances["identity"])
    report.bound("force <-> SOPDE roundtrip", worst_rt, sc.tolerances["roundtrip"])
    X0 = KVelocity(sc.q0, sc.qdot0)
    report.lines.append(f"compatibility defect at the initial point: {solve.compatibility_defect(D, X0):.6e}")
    if g.is_constant() and F.is_constant():
        specs = [s for s in sc.sheets if s.kind == "flat_newton"] or [SheetSpec("newton_sheet", "flat_newton", None, *_default_grid(sc))]
        for entry in specs:
            sheet = _build_sheet(sc, entry)
            r = solve.newton_residual(g, F, sheet)
            report.bound(f"Newton residual of closed-form sheet {entry.name}", r.max, sc.tolerances["flat_newton"])
            _emit(sheet, out, entry.name, overwrite, report)
    for entry in (s for s in sc.sheets if s.kind != "flat_newton"):
        sheet = _build_sheet(sc, entry)
        r = solve.newton_residual(g, F, sheet)
        _sheet_check(report, f"Newton residual of sheet {entry.name}", r.max, entry, sc.tolerances["newton"])


def _sheet_check(report, name, value, entry, tol):
    if entry.expect_newton is None:
        report.bound(name, value, tol)
    else:
        report.near(name, value, float(entry.expect_newton), tol)


def task_ddw(sc, report, rng, out, overwrite):
    g = sc.metric
    if not sc.sheets:
        raise ScenarioError("task 'ddw' needs at least one [[sheets]] entry")
    for entry in sc.sheets:
        sheet = _build_sheet(sc, entry)
        rep = var.newton_vs_ddw_report(g, sc.force, sheet, sc.potential, seed=sc.seed)
        report.lines.append(
            f"sheet {entry.name}: Newton residual {rep.newton_max:.6e}, traced (DDW) residual {rep.ddw_max:.6e}, "
            f"skipped {rep.newton.skipped}/{rep.ddw.skipped} boundary nodes"
        )
        _sheet_check(report, f"Newton residual of sheet {entry.name}", rep.newton_max, entry, sc.tolerances["newton"])
        report.bound(f"Hamilton-De Donder-Weyl residual of sheet {entry.name}", rep.ddw_max, sc.tolerances["ddw"])
        if entry.expect_newton:
            report.lines.append(f"sheet {entry.name} solves the traced equations but not the Newton law")


def task_noether(sc, report, rng, out, overwrite):
    g = sc.metric
    if sc.vector is None:
        raise ScenarioError("task 'noether' needs a [vector] section")
    pts = _samples(sc, rng)
    report.bound("symmetry of the Lagrangian: max |delta_v L|", var.symmetry_defect(g, sc.potential, sc.vector, pts), sc.tolerances["symmetry"])
    for entry in sc.sheets:
        sheet = _build_sheet(sc, entry)
        r = var.noether_divergence(g, sc.vector, sheet)
        report.bound(f"Noether current divergence on sheet {entry.name}", np.abs(r.values).max(), sc.tolerances["noether_divergence"], f"{r.skipped} boundary nodes skipped")
        if sc.bump is not None:
            d = var.hamilton_principle_defect(g, sc.potential, sheet, sc.vector, sc.bump)
            report.bound(f"Hamilton principle defect on sheet {entry.name}", abs(d), sc.tolerances["hamilton_principle"])


def task_verify(sc, report, rng, out, overwrite):
    g, k = sc.metric, sc.k
    pts = _samples(sc, rng)
    Dg = dyn.geodesic_sopde(g, k)
    F = sc.force
    D = dyn.newton_sopde(g, F) if F is not None else Dg
    v = sc.vector or var.ProlongedVector(g.chart.names, ["1"] + ["0"] * (g.n - 1))
    worst = dict(identity=0.0, closed=0.0, trace=0.0, hn=0.0, rt=0.0, iso=0.0)
    for X in pts:
        T_def = dyn.calT(g, X)
        worst["identity"] = max(worst["identity"], (dyn.contraction_coordinates(g, Dg, X) + T_def).max_abs())
        closed = dyn.calT_closed_form(g, X)
        worst["closed"] = max(worst["closed"], (closed - T_def).max_abs())
        ta, tb = T_def.trace()
        dT_q, dT_qdot = dyn.kinetic_differential(g, X)
        worst["trace"] = max(worst["trace"], np.abs(ta - dT_q).max(), np.abs(tb - dT_qdot).max())
        lhs, rhs = var.hamilton_noether_check(g, F, D, v, X)
        worst["hn"] = max(worst["hn"], abs(lhs - rhs))
        if F is not None:
            back = dyn.force_from_sopde(g, D, X)
            worst["rt"] = max(worst["rt"], np.abs(back - F.evaluate(X)).max())
        worst["iso"] = max(worst["iso"], np.abs(inverse_iso(g, metric_iso(g, X)).qdot - X.qdot).max())
    report.lines.append(f"sample points: {len(pts)} (seeded)")
    report.bound("inertial form definition: iota_{D_G} dtheta + calT = 0", worst["identity"], sc.tolerances["identity"])
    report.bound("inertial form closed form vs definition", worst["closed"], sc.tolerances["closed_form"])
    report.bound("trace law: tr calT = dT", worst["trace"], sc.tolerances["trace"])
    report.bound("Hamilton-Noether identity", worst["hn"], sc.tolerances["hamilton_noether"])
    report.bound("Legendre map roundtrip", worst["iso"], sc.tolerances["roundtrip"])
    if F is not None:
        report.bound("force <-> SOPDE roundtrip", worst["rt"], sc.tolerances["roundtrip"])
    # one-slot reduction: classical Newton law with calT = dT
    F1 = None
    if F is not None and k == 1:
        F1 = F
    D1 = dyn.newton_sopde(g, F1) if F1 is not None else dyn.geodesic_sopde(g, 1)
    worst1 = 0.0
    for X in pts:
        X1 = KVelocity(X.q, X.qdot[:, :1])
        a, b = dyn.classical_newton_residual(g, D1, F1, X1)
        worst1 = max(worst1, np.abs(a).max(), np.abs(b).max())
    report.bound("one-slot reduction: classical Newton law with calT = dT", worst1, sc.tolerances["classical"])


DISPATCH = {
    "christoffel": task_christoffel,
    "geodesic": task_geodesic,
    "newton": task_newton,
    "ddw": task_ddw,
    "noether": task_noether,
    "verify": task_verify,
}


def run(scenario: Scenario, out: Path, overwrite: bool = False, seed: int | None = None) -> Report:
    if seed is not None:
        scenario.seed = int(seed)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.txt"
    if report_path.exists() and not overwrite:
        raise FileExistsError(f"refusing to overwrite existing file {report_path} (pass --overwrite)")
    report = Report(scenario.task, scenario.name, scenario.seed)
    rng = np.random.default_rng(scenario.seed)
    DISPATCH[scenario.task](scenario, report, rng, out, overwrite)
    report_path.write_text(report.render(scenario.tolerances, scenario.overridden))
    return report


# -- entry point ------------------------------------------------------------------


def bundled_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("fieldnewton.scenarios").iterdir() if p.name.endswith(".toml"))


def resolve_scenario(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    name = arg[:-5] if arg.endswith(".toml") else arg
    if name in bundled_scenarios():
        return Path(str(resources.files("fieldnewton.scenarios") / f"{name}.toml"))
    raise FileNotFoundError(f"no scenario file '{arg}' and no bundled scenario of that name")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fieldnewton", description="Check Newton's law for fields on scenario files.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file (or a bundled scenario name)")
    r.add_argument("scenario")
    r.add_argument("--out", required=True, help="output directory for report.txt and CSV sheets")
    r.add_argument("--overwrite", action="store_true", help="replace existing output files")
    r.add_argument("--seed", type=int, default=None, help="seed for randomized check points (default: scenario seed)")
    sub.add_parser("scenarios", help="list bundled scenarios")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenarios":
        for name in bundled_scenarios():
            print(name)
        return 0
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        sc = load_scenario(resolve_scenario(args.scenario))
        report = run(sc, Path(args.out), args.overwrite, args.seed)
    except (ScenarioError, ParseError, ValidationError, FileNotFoundError, FileExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FieldNewtonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(report.render(sc.tolerances, sc.overridden))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
