"""Command-line interface: convergence cases and mesh diagnostics.

``run`` drives one convergence case end to end (mesh family, assembly,
solve, error report per level) and writes a whitespace-separated table plus
a PNG convergence figure next to it.  ``analyze`` writes per-cell skewness
diagnostics for a single mesh.  Options come from an optional ``key=value``
config file overridden by command-line flags.

Cases
-----
A   layered anisotropic tensor diag(lambda, 1) below y = 0.5, identity
    above, on the locally refined family (levels = base sizes).
B   identity tensor on skewed hexagonal meshes whose flatness doubles
    from one level to the next.
C   tensor diag(10^6, 1) on hexagonal meshes, regular or skewed family.
custom  any generated or loaded mesh with a chosen tensor and solution.
"""

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass, field as dataclass_field


from . import analysis, plots, system
from .errors import ConfigError, HHOError
from .fields import CosineSolution, DiffusionField, PolynomialSolution, \
    source_from_solution
from .mesh import (
    estimate_skew_map,
    flatness,
    generate_cartesian,
    generate_hexagonal,
    generate_locally_refined,
    load_mesh,
)

TABLE_HEADER = ("meshsize", "NbEdgeDOFs", "EnergyError", "H1error",
                "L2error", "ConditionNumber", "Flatness")


@dataclass
class CaseConfig:
    """Everything one convergence run needs."""

    case: str = "B"
    k: int = 1
    levels: list = dataclass_field(default_factory=list)
    lam: float = 1.0
    stretch: float = 1.925
    family: str = "skewed"
    mesh: str = ""
    out: str = "."
    solver: str = "direct"
    solution: str = "cosine"
    plot: bool = True
    condition: bool = True

    def validate(self):
        if self.case not in ("A", "B", "C", "custom"):
            raise ConfigError(f"unknown case {self.case!r}")
        if not 0 <= self.k <= 3:
            raise ConfigError("degree k must be in 0..3")
        if self.lam <= 0.0:
            raise ConfigError("lambda must be positive")
        if self.family not in ("regular", "skewed"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.solver not in ("direct", "cg"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if not self.levels:
            self.levels = _default_levels(self.case)
        if any(n <= 0 for n in self.levels):
            raise ConfigError("levels must be positive integers")
        if len(self.levels) != len(set(self.levels)) or \
                sorted(self.levels) != list(self.levels):
            raise ConfigError("levels must be strictly increasing")
        return self


def _default_levels(case):
    return {
        "A": [8, 16, 32],
        "B": [4, 8, 16, 24],
        "C": [4, 8, 12],
        "custom": [4, 8, 16],
    }[case]


class ConvergenceTable:
    """Fixed-column error table with trailing rate comment lines."""

    def __init__(self, reports, rates, meta=""):
        self.header = TABLE_HEADER
        self.reports = reports
        self.rates = rates
        self.meta = meta

    def format(self):
        lines = []
        if self.meta:
            lines.append(f"# {self.meta}")
        lines.append(" ".join(self.header))
        for r in self.reports:
            if r is None:
                lines.append(" ".join(["nan"] * len(self.header)) + "  # failed level")
                continue
            h, dofs, ea, e1, el2, cn, fl = r.as_row()
            lines.append(
                f"{h:.5e} {int(dofs)} {ea:.5e} {e1:.5e} {el2:.5e} "
                f"{cn:.5e} {fl:.5e}"
            )
        for name, vals in self.rates.items():
            body = " ".join(f"{v:.5e}" for v in vals)
            lines.append(f"# rate {name} {body}")
        return "\n".join(lines) + "\n"

    def write(self, path):
        _atomic_write(path, self.format())


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_mesh(spec, level_value=None, stretch=1.0):
    """Build a mesh from a generator spec or load it from a file.

    Specs: ``cartesian[:n]``, ``hexagonal[:n[:stretch]]``, ``locref[:n[:levels]]``
    or a file path (``.typ2`` selects the fvca5-typ2 reader).
    """
    parts = spec.split(":")
    name = parts[0]
    if name == "cartesian":
        n = int(parts[1]) if len(parts) > 1 else level_value
        return generate_cartesian(n)
    if name in ("hexagonal", "hex"):
        n = int(parts[1]) if len(parts) > 1 else level_value
        s = float(parts[2]) if len(parts) > 2 else stretch
        return generate_hexagonal(n, s)
    if name in ("locref", "locally_refined"):
        n = int(parts[1]) if len(parts) > 1 else level_value
        lev = int(parts[2]) if len(parts) > 2 else 2
        return generate_locally_refined(n, lev)
    if os.path.exists(spec):
        fmt = "fvca5-typ2" if spec.endswith(".typ2") else "native"
        return load_mesh(spec, format=fmt)
    raise ConfigError(f"cannot interpret mesh spec {spec!r}")


def _level_mesh(config, index, n):
    if config.case == "A":
        return generate_locally_refined(n, 2)
    if config.case == "B":
        return generate_hexagonal(n, config.stretch * 2.0**index)
    if config.case == "C":
        if config.family == "skewed":
            return generate_hexagonal(n, config.stretch * 2.0**index)
        return generate_hexagonal(n, 1.0)
    if config.mesh:
        return build_mesh(config.mesh, level_value=n, stretch=config.stretch)
    return generate_cartesian(n)


def _field(config):
    if config.case == "A":
        return DiffusionField.layered(config.lam)
    if config.case == "B":
        return DiffusionField.identity()
    if config.case == "C":
        return DiffusionField.diagonal(1.0e6, 1.0)
    if config.lam != 1.0:
        return DiffusionField.diagonal(config.lam, 1.0)
    return DiffusionField.identity()


def _solution(config):
    if config.solution == "cosine":
        return CosineSolution()
    if config.solution.startswith("poly"):
        deg = config.k + 1
        if ":" in config.solution:
            deg = int(config.solution.split(":", 1)[1])
        return PolynomialSolution.of_degree(deg)
    raise ConfigError(f"unknown solution {config.solution!r}")


def run_case(config):
    """Run one convergence case and write its table (and figure).

    Returns the :class:`ConvergenceTable`.  A level that fails numerically
    is recorded as a NaN row and the run continues.
    """
    config.validate()
    solution = _solution(config)
    field = _field(config)
    reports = []
    failed = False
    for index, n in enumerate(config.levels):
        mesh = _level_mesh(config, index, n)
        try:
            f = source_from_solution(solution, field, mesh)
            sys_c = system.assemble(mesh, field, f, solution, config.k)
            x = system.solve(sys_c, solver=config.solver)
            uh = system.recover_cells(sys_c, x)
            cn = (system.condition_number_1norm(sys_c)
                  if config.condition else float("nan"))
            reports.append(analysis.compute_error_report(
                mesh, field, config.k, solution, uh, condition_number=cn))
        except HHOError as exc:
            print(f"level n={n} failed: {exc}", file=sys.stderr)
            reports.append(None)
            failed = True
    good = [r for r in reports if r is not None]
    rates = analysis.report_rates(good) if len(good) >= 2 else {}
    meta = (f"case={config.case} k={config.k} lambda={config.lam:g} "
            f"family={config.family} solution={config.solution}")
    table = ConvergenceTable(reports, rates, meta=meta)
    out = _table_path(config)
    table.write(out)
    if config.plot and len(good) >= 1:
        plots.render_convergence(good, os.path.splitext(out)[0] + ".png",
                                 title=meta)
    table.failed = failed
    table.path = out
    return table


def _table_path(config):
    name = f"case{config.case}_k{config.k}"
    if config.case == "A" or (config.case == "custom" and config.lam != 1.0):
        name += f"_lambda{config.lam:g}"
    if config.case == "C":
        name += f"_{config.family}"
    out = config.out
    if out.endswith(".dat"):
        return out
    return os.path.join(out, name + ".dat")


def analyze_mesh(spec, lam=1.0, out="diagnostics.dat", layered=False,
                 plot=True):
    """Write per-cell skewness diagnostics for one mesh.

    Columns: ``cell flT khat_max khat_min ratio factor``; the summary
    (mesh flatness, max factor) goes into trailing comment lines.
    """
    mesh = build_mesh(spec)
    field = (DiffusionField.layered(lam) if layered
             else DiffusionField.diagonal(lam, 1.0))
    maps = [estimate_skew_map(mesh, ci) for ci in range(mesh.n_cells)]
    diag = analysis.skewness_diagnostics(mesh, field, maps)
    lines = ["cell flT khat_max khat_min ratio factor"]
    for ci in range(mesh.n_cells):
        lines.append(
            f"{ci} {diag.flatness[ci]:.5e} {diag.khat_max[ci]:.5e} "
            f"{diag.khat_min[ci]:.5e} {diag.ratio[ci]:.5e} "
            f"{diag.factor[ci]:.5e}"
        )
    fl_h, _ = flatness(mesh)
    lines.append(f"# summary fl_h {fl_h:.5e}")
    lines.append(f"# summary max_factor {diag.max_factor:.5e}")
    lines.append(f"# summary meshsize {mesh.h:.5e}")
    _atomic_write(out, "\n".join(lines) + "\n")
    if plot:
        plots.render_flatness_map(mesh, diag.flatness,
                                  os.path.splitext(out)[0] + ".png")
    return diag


# -- argument handling ---------------------------------------------------------


def _read_config_file(path):
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, val = line.split("=", 1)
                values[key.strip()] = val.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _parse_levels(text):
    try:
        return [int(tok) for tok in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad levels list {text!r}") from exc


def _config_from_args(args):
    values = {}
    if args.config:
        values.update(_read_config_file(args.config))
    for key in ("case", "k", "levels", "lam", "stretch", "family", "mesh",
                "out", "solver", "solution"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    cfg = CaseConfig()
    try:
        if "case" in values:
            cfg.case = str(values["case"])
        if "k" in values:
            cfg.k = int(values["k"])
        if "levels" in values:
            cfg.levels = _parse_levels(values["levels"])
        if "lambda" in values:
            cfg.lam = float(values["lambda"])
        if "lam" in values:
            cfg.lam = float(values["lam"])
        if "stretch" in values:
            cfg.stretch = float(values["stretch"])
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if "family" in values:
        cfg.family = str(values["family"])
    if "mesh" in values:
        cfg.mesh = str(values["mesh"])
    if "out" in values:
        cfg.out = str(values["out"])
    if "solver" in values:
        cfg.solver = str(values["solver"])
    if "solution" in values:
        cfg.solution = str(values["solution"])
    if "plot" in values:
        cfg.plot = str(values["plot"]).lower() not in ("0", "false", "no")
    if "condition" in values:
        cfg.condition = str(values["condition"]).lower() not in ("0", "false", "no")
    if getattr(args, "no_plot", False):
        cfg.plot = False
    if getattr(args, "no_condition", False):
        cfg.condition = False
    return cfg.validate()


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hhoskew",
        description="Hybrid high-order diffusion solver on skewed polygonal meshes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a convergence case")
    run_p.add_argument("config", nargs="?", help="key=value config file")
    run_p.add_argument("--case", choices=["A", "B", "C", "custom"])
    run_p.add_argument("--k", type=int)
    run_p.add_argument("--levels", help="comma-separated family sizes")
    run_p.add_argument("--lambda", dest="lam", type=float)
    run_p.add_argument("--stretch", type=float)
    run_p.add_argument("--family", choices=["regular", "skewed"])
    run_p.add_argument("--mesh", help="generator spec or mesh file (custom case)")
    run_p.add_argument("--out", help="output directory or .dat path")
    run_p.add_argument("--solver", choices=["direct", "cg"])
    run_p.add_argument("--solution", help="cosine | poly[:degree]")
    run_p.add_argument("--no-plot", action="store_true")
    run_p.add_argument("--no-condition", action="store_true",
                       help="skip the condition-number estimate")

    an_p = sub.add_parser("analyze", help="per-cell skewness diagnostics")
    an_p.add_argument("mesh", help="generator spec or mesh file")
    an_p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    an_p.add_argument("--layered", action="store_true",
                      help="use the layered tensor instead of diag(lambda,1)")
    an_p.add_argument("--out", default="diagnostics.dat")
    an_p.add_argument("--no-plot", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _config_from_args(args)
            table = run_case(config)
            print(f"wrote {table.path}")
            return 2 if table.failed else 0
        if args.command == "analyze":
            analyze_mesh(args.mesh, lam=args.lam, out=args.out,
                         layered=args.layered, plot=not args.no_plot)
            print(f"wrote {args.out}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except HHOError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
