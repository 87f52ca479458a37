"""Command-line front end: config ingestion, subcommands and report emission.

Config files are flat ``key = value`` text.  Blank lines and lines starting
with ``#`` are ignored, keys may contain dots (``params.V0``), values may be
wrapped in double quotes, and a key may appear only once.  Every key is
checked against :data:`CONFIG_KEYS` before anything is computed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import oracles, quantize
from . import potential as _pot
from .errors import ConfigError, NoCatalogEntry, QActionError

SCHEMA = "qaction-report/1"
FORMATS = ("csv", "json", "table")
ENGINE_CHOICES = ("tmatrix", "riccati", "both")
ORACLES = ("auto", "analytic", "numerov", "none")


def _version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:  # pragma: no cover - not installed
        return "0.0.0"


# ------------------------------------------------------------------ config


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _choice(options):
    def convert(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return convert


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(",", " ").split())


# key -> (RunConfig field, converter)
CONFIG_KEYS = {
    "potential": ("potential", str),
    "l": ("l", _int),
    "mass": ("mass", float),
    "hbar": ("hbar", float),
    "engine": ("engine", _choice(ENGINE_CHOICES)),
    "tol_J": ("tol_J", float),
    "tol": ("tol", float),
    "layer_count": ("layer_count", _int),
    "decay_budget": ("decay_budget", float),
    "scan_points": ("scan_points", _int),
    "origin_eps": ("origin_eps", float),
    "eps_richardson": ("eps_richardson", _bool),
    "e_max": ("e_max", float),
    "n_min": ("n_min", _int),
    "n_max": ("n_max", _int),
    "oracle": ("oracle", _choice(ORACLES)),
    "format": ("format", _choice(FORMATS)),
    "out": ("out", str),
    "scan.energies": ("scan_energies", _floats),
    "scan.e_min": ("scan_e_min", float),
    "scan.e_max": ("scan_e_max", float),
    "scan.count": ("scan_count", _int),
    "wavefunction.n": ("wavefunction_n", _int),
    "wavefunction.points": ("wavefunction_points", _int),
    "bench.table": ("bench_table", str),
    "bench.tolerance": ("bench_tolerance", float),
}


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run description."""

    potential: str = ""
    params: tuple = ()
    l: int | None = None
    mass: float = 1.0
    hbar: float = 1.0
    engine: str = "riccati"
    tol_J: float = 1e-10
    tol: float = 1e-10
    layer_count: int = 16000
    decay_budget: float = 20.0
    scan_points: int = 10000
    origin_eps: float = 1e-8
    eps_richardson: bool = True
    e_max: float | None = None
    n_min: int = 0
    n_max: int = 0
    oracle: str = "auto"
    format: str | None = None
    out: str | None = None
    scan_energies: tuple = ()
    scan_e_min: float | None = None
    scan_e_max: float | None = None
    scan_count: int = 50
    wavefunction_n: int = 0
    wavefunction_points: int = 201
    bench_table: str | None = None
    bench_tolerance: float | None = None
    echo: tuple = field(default=(), compare=False)

    @classmethod
    def from_mapping(cls, entries: dict) -> "RunConfig":
        """Validate ``{key: text}`` pairs.  Raises ``ConfigError`` naming the key."""
        values, params = {}, {}
        for key, text in entries.items():
            if key.startswith("params."):
                name = key[len("params."):]
                if not name.isidentifier():
                    raise ConfigError(f"invalid parameter name in key {key!r}", key)
                try:
                    params[name] = float(text)
                except ValueError:
                    raise ConfigError(f"key {key!r}: expected a number, got {text!r}", key) from None
                continue
            if key not in CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}", key)
            name, convert = CONFIG_KEYS[key]
            try:
                values[name] = convert(text)
            except ValueError as exc:
                raise ConfigError(f"key {key!r}: {exc}", key) from None
        cfg = cls(params=tuple(sorted(params.items())), echo=tuple(sorted(entries.items())),
                  **values)
        cfg._check()
        return cfg

    def _check(self):
        if self.n_min < 0 or self.n_max < self.n_min:
            raise ConfigError(f"n range {self.n_min}..{self.n_max} is empty or negative", "n_max")
        for key in ("tol_J", "tol", "decay_budget", "origin_eps", "mass", "hbar"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"key {key!r} must be positive", key)
        if self.layer_count < 16:
            raise ConfigError("key 'layer_count' must be at least 16", "layer_count")
        if self.wavefunction_points < 2:
            raise ConfigError("key 'wavefunction.points' must be at least 2", "wavefunction.points")

    def build_potential(self) -> _pot.Potential:
        if not self.potential:
            raise ConfigError("key 'potential' is required", "potential")
        try:
            return _pot.from_spec(self.potential, dict(self.params), l=self.l,
                                  mass=self.mass, hbar=self.hbar)
        except QActionError as exc:
            raise ConfigError(f"key 'potential': {type(exc).__name__}: {exc}", "potential") from exc

    def engines(self) -> tuple:
        return ("tmatrix", "riccati") if self.engine == "both" else (self.engine,)

    def options(self, engine: str) -> quantize.SolveOptions:
        return quantize.SolveOptions(engine=engine, tol_J=self.tol_J, tol=self.tol,
                                     layers=self.layer_count, decay_budget=self.decay_budget,
                                     origin_eps=self.origin_eps, eps_richardson=self.eps_richardson,
                                     scan_points=self.scan_points, e_max=self.e_max)


def parse_config_text(text: str) -> dict:
    """Split config text into ``{key: value}`` without interpreting values."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if len(value) >= 2 and value[0] == value[-1] == '"':
            value = value[1:-1]
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key)
        entries[key] = value
    return entries


def load_config(path=None, overrides=()) -> RunConfig:
    """Read a config file (optional) and apply ``key=value`` overrides on top."""
    entries = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        entries = parse_config_text(text)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        entries[key] = value
    return RunConfig.from_mapping(entries)


# ------------------------------------------------------------------ report


@dataclass
class Report:
    """Columns, rows and metadata of one command.

    ``rows`` hold ints, floats, strings or ``None``.  ``metadata`` carries the
    config echo, tool version and timings; only the schema tag, columns and
    rows go into the CSV body.
    """

    kind: str
    columns: tuple
    rows: list
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        buf.write(f"# {SCHEMA} kind={self.kind}\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"schema": SCHEMA, "kind": self.kind, "columns": list(self.columns),
               "rows": [list(r) for r in self.rows], "metadata": self.metadata}
        return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
        return cls(doc["kind"], tuple(doc["columns"]), [tuple(r) for r in doc["rows"]],
                   doc["metadata"])

    def to_table(self) -> str:
        cells = [list(self.columns)] + [[_cell(v, digits=12) for v in r] for r in self.rows]
        widths = [max(len(c[i]) for c in cells) for i in range(len(self.columns))]
        lines = ["  ".join(c[i].rjust(widths[i]) for i in range(len(widths))) for c in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        return {"csv": self.to_csv, "json": self.to_json, "table": self.to_table}[fmt]()


def _cell(v, digits=17) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, f".{digits}g")
    return str(v)


def _num(v):
    """Float or None, never NaN (keeps JSON strict)."""
    return None if v is None or not math.isfinite(v) else float(v)


def _metadata(cfg: RunConfig, **extra) -> dict:
    meta = {"config": dict(cfg.echo), "version": _version()}
    meta.update(extra)
    return meta


# -------------------------------------------------------------- commands


def _oracle(cfg: RunConfig, p, n: int):
    """(E_oracle, source) for level n, or (None, reason)."""
    mode = cfg.oracle
    if mode == "none":
        return None, "none"
    if mode in ("auto", "analytic"):
        try:
            return float(oracles.analytic_eigenvalue(p, n)), "analytic"
        except (NoCatalogEntry, TypeError):
            if mode == "analytic":
                return None, "no closed form"
    try:
        return float(oracles.numerov_eigenvalue(p, n)), "numerov"
    except QActionError as exc:
        return None, f"numerov failed: {type(exc).__name__}"


SOLVE_COLUMNS = ("n", "label", "engine", "E_present", "E_oracle", "abs_delta", "delta",
                 "node_count", "J", "residual_J", "status")


def cmd_solve(cfg: RunConfig) -> tuple:
    """Levels n_min..n_max with every requested engine.  Returns ``(Report, exit_code)``."""
    p = cfg.build_potential()
    rows, timings, sources, failed = [], {}, {}, False
    for n in range(cfg.n_min, cfg.n_max + 1):
        E_ref, sources[n] = _oracle(cfg, p, n)
        for engine in cfg.engines():
            t0 = time.perf_counter()
            try:
                sol = quantize.solve_eigenvalue(p, n, cfg.options(engine))
            except QActionError as exc:
                failed = True
                rows.append((n, None, engine, None, _num(E_ref), None, None, None, None, None,
                             f"failed: {type(exc).__name__}: {exc}"))
                continue
            finally:
                timings[f"{n}/{engine}"] = time.perf_counter() - t0
            diff = abs(sol.E - E_ref) if E_ref is not None else None
            status = "shallow" if sol.diagnostics.get("shallow_state") else "ok"
            rows.append((n, sol.label, engine, sol.E, _num(E_ref), diff, sol.delta, sol.node_count,
                         sol.J, _num(sol.diagnostics.get("residual_J")), status))
    meta = _metadata(cfg, oracle={str(k): v for k, v in sources.items()}, timings=timings)
    return Report("solve", SOLVE_COLUMNS, rows, meta), (2 if failed else 0)


SCAN_COLUMNS = ("E", "engine", "J", "delta", "node_count", "kappa_integral", "status")


def _scan_grid(cfg: RunConfig) -> list:
    if cfg.scan_energies:
        return sorted(cfg.scan_energies)
    if cfg.scan_e_min is None or cfg.scan_e_max is None:
        raise ConfigError("scan needs 'scan.energies' or both 'scan.e_min' and 'scan.e_max'",
                          "scan.energies")
    if not cfg.scan_e_max > cfg.scan_e_min or cfg.scan_count < 2:
        raise ConfigError("scan grid needs scan.e_min < scan.e_max and scan.count >= 2",
                          "scan.e_max")
    step = (cfg.scan_e_max - cfg.scan_e_min) / (cfg.scan_count - 1)
    return [cfg.scan_e_min + i * step for i in range(cfg.scan_count)]


def cmd_scan(cfg: RunConfig, energies=None) -> tuple:
    """J(E) on a grid.  Failing points are flagged per row (exit 2)."""
    p = cfg.build_potential()
    grid = sorted(float(e) for e in energies) if energies is not None else _scan_grid(cfg)
    rows, monotone, failed = [], {}, False
    for engine in cfg.engines():
        opts = cfg.options(engine)
        last = None
        ok = True
        for E in grid:
            try:
                pt = quantize.action_point(p, E, opts)
            except QActionError as exc:
                failed = True
                rows.append((E, engine, None, None, None, None, f"failed: {type(exc).__name__}: {exc}"))
                continue
            if last is not None and not pt.J > last:
                ok = False
            last = pt.J
            rows.append((E, engine, pt.J, pt.delta, pt.node_count, pt.kappa_integral, "ok"))
        monotone[engine] = ok
    rows.sort(key=lambda r: (r[0], r[1]))
    return Report("scan", SCAN_COLUMNS, rows, _metadata(cfg, monotone=monotone)), (2 if failed else 0)


def cmd_wavefunction(cfg: RunConfig) -> tuple:
    """Normalized psi of level ``wavefunction.n`` on an even grid over the span."""
    p = cfg.build_potential()
    n = cfg.wavefunction_n
    sol = quantize.eigenfunction(p, n, cfg.options(cfg.engines()[0]), points=cfg.wavefunction_points)
    wf = sol.wavefunction
    rows = [(float(x), float(y)) for x, y in zip(wf.x, wf.psi)]
    meta = _metadata(cfg, n=n, E=sol.E, normalization=float(wf.normalization),
                     node_count=int(wf.node_count))
    return Report("wavefunction", ("x", "psi"), rows, meta), 0


COMPARE_COLUMNS = ("n", "E_present", "E_wkb", "E_langer", "E_oracle", "err_wkb", "err_langer")


def cmd_compare(cfg: RunConfig) -> tuple:
    """Exact quantization against plain and Langer-corrected WKB."""
    p = cfg.build_potential()
    engine = cfg.engines()[0]
    rows, failed = [], False
    for n in range(cfg.n_min, cfg.n_max + 1):
        try:
            E = quantize.solve_eigenvalue(p, n, cfg.options(engine)).E
        except QActionError:
            failed = True
            E = None
        wkb = _try(lambda: oracles.wkb_eigenvalue(p, n))
        langer = _try(lambda: oracles.wkb_eigenvalue(p, n, langer=True)) if p.radial else None
        ref, _ = _oracle(cfg, p, n)
        ref = ref if ref is not None else E
        err = lambda v: abs(v - ref) if v is not None and ref is not None else None  # noqa: E731
        rows.append((n, E, wkb, langer, _num(ref), err(wkb), err(langer)))
    return Report("compare", COMPARE_COLUMNS, rows, _metadata(cfg, engine=engine)), (2 if failed else 0)


def _try(fn):
    try:
        return float(fn())
    except QActionError:
        return None


BENCH_COLUMNS = ("n", "engine", "E_present", "E_table", "abs_delta", "delta", "node_count",
                 "E_exact", "tolerance", "pass")


def cmd_bench(table_id: str, overrides=(), engine=None, directory=None) -> tuple:
    """Recompute one reference table and check every row against it.

    Exit code 0 iff all rows pass, 2 if any row misses, 1 for an unknown table
    or missing fixture.
    """
    directory = Path(directory) if directory else oracles.fixture_dir()
    if not (directory / "tables.csv").exists():
        raise ConfigError(f"fixture missing: {directory / 'tables.csv'}")
    if table_id not in oracles.available_tables(directory):
        raise ConfigError(f"unknown table {table_id!r}; available: "
                          f"{', '.join(oracles.available_tables(directory))}")
    fixture = oracles.load_table(table_id, directory)
    if not fixture.config_path.exists():
        raise ConfigError(f"fixture missing: {fixture.config_path}")
    extra = list(overrides) + ([f"engine={engine}"] if engine else [])
    cfg = load_config(fixture.config_path, extra)
    tol = cfg.bench_tolerance if cfg.bench_tolerance is not None else 5e-8
    p = cfg.build_potential()
    rows, all_pass, timings = [], True, {}
    for ref in fixture.rows:
        for eng in cfg.engines():
            t0 = time.perf_counter()
            try:
                sol = quantize.solve_eigenvalue(p, ref.n, cfg.options(eng))
                E, delta, nodes = sol.E, sol.delta, sol.node_count
            except QActionError:
                E = delta = nodes = None
            timings[f"{ref.n}/{eng}"] = time.perf_counter() - t0
            diff = abs(E - ref.present) if E is not None else None
            ok = diff is not None and diff <= tol
            all_pass &= ok
            rows.append((ref.n, eng, E, ref.present, diff, delta, nodes, ref.exact, tol, ok))
    meta = _metadata(cfg, table=table_id, passed=sum(r[-1] for r in rows), total=len(rows),
                     anomalies={str(r.n): r.anomaly for r in fixture.rows if r.anomaly},
                     timings=timings)
    return Report("bench", BENCH_COLUMNS, rows, meta), (0 if all_pass else 2)


# -------------------------------------------------------------------- main


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        help="override one config key (repeatable)")
    common.add_argument("--engine", choices=ENGINE_CHOICES)
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--tol-j", type=float, metavar="TOL", help="quantization tolerance on J")
    common.add_argument("--layers", type=int, metavar="N", help="coarsest tmatrix layer count")

    ap = argparse.ArgumentParser(prog="qaction", description="Exact action quantization of bound states.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="eigenvalues for n_min..n_max")
    sc = sub.add_parser("scan", parents=[common], help="J(E) on an energy grid")
    sc.add_argument("energies", nargs="*", type=float, help="energies (default: scan.* keys)")
    sub.add_parser("wavefunction", parents=[common], help="normalized psi of one level")
    sub.add_parser("compare", parents=[common], help="exact vs WKB vs Langer-WKB")
    b = sub.add_parser("bench", parents=[common], help="reproduce a reference table")
    b.add_argument("table", help="table id, e.g. table1")
    return ap


def _overrides(args) -> list:
    items = list(args.set)
    if args.engine:
        items.append(f"engine={args.engine}")
    if args.tol_j is not None:
        items.append(f"tol_J={args.tol_j!r}")
    if args.layers is not None:
        items.append(f"layer_count={args.layers}")
    return items


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "bench":
            if args.config:
                raise ConfigError("bench reads its config from the fixture directory; drop --config")
            report, code = cmd_bench(args.table, _overrides(args))
            fmt = args.format or "table"
            out = args.out
        else:
            cfg = load_config(args.config, _overrides(args))
            command = {"solve": cmd_solve, "wavefunction": cmd_wavefunction,
                       "compare": cmd_compare}.get(args.command)
            if args.command == "scan":
                report, code = cmd_scan(cfg, args.energies or None)
            else:
                report, code = command(cfg)
            fmt = args.format or cfg.format or "csv"
            out = args.out or cfg.out
    except ConfigError as exc:
        print(f"qaction: error: {exc}", file=sys.stderr)
        return 1
    except QActionError as exc:
        print(f"qaction: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    text = report.render(fmt)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if report.kind == "bench":
        meta = report.metadata
        print(f"{meta['table']}: {meta['passed']}/{meta['total']} rows pass", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
