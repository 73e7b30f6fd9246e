"""Batch front end: ``eistwist run``, ``eistwist emit`` and ``eistwist cusps``.

Reports are JSON lists of check records.  Timing and cache statistics go to
a separate ``*.timing.json`` so that the report itself is bit-identical
across reruns.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import random
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import tomli

from . import dds
from .eisenstein import (
    EisensteinParams,
    classical_model,
    eval_classical,
    eval_completed,
    eval_twisted,
    fourier_quadrature,
    fourier_series,
    scattering,
    write_coefficient_csv,
)
from .errors import ConfigError, EistwistError
from .group import (
    class_counts,
    coset_reps,
    cusp_orbits_bruteforce,
    cusp_set,
    fricke,
    in_gamma_star,
    invert,
    is_squarefree,
    lower,
    multiply,
    random_gamma0,
    translation,
    ScaledMatrix,
)
from .newform import NewformData, PsiCache, l_value_at_1, modular_symbol

log = logging.getLogger("eistwist")

SUITES = ("group", "psi", "eisenstein", "fourier", "scattering", "lambda")
TABLES = ("fourier", "scattering", "lambda-grid")

DEFAULT_TOLERANCES = {
    "group": 0.0,
    "psi": 1e-9,
    "eisenstein": 1e-5,
    "fourier": 1e-4,
    "scattering": 1e-8,
    "lambda": 1e-5,
}
DEFAULT_S_GRID = (0.5, -0.5, 1.2 + 0.8j, 1.2 - 0.8j, -1.2 + 0.8j, -1.2 - 0.8j, 2.1, 1.3 + 0.7j, 0.9 + 2j)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def parse_complex(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"not a complex number: {text!r}") from exc


def parse_grid(text: str) -> tuple[complex, ...]:
    """"a,b,c" lists points; "re1,re2;im1,im2" is the product grid re + i im."""
    text = text.strip()
    if not text:
        return ()
    if ";" in text:
        re_part, im_part = text.split(";", 1)
        res = [float(x) for x in re_part.split(",") if x.strip()]
        ims = [float(x) for x in im_part.split(",") if x.strip()]
        return tuple(complex(r, i) for r in res for i in ims)
    return tuple(parse_complex(x) for x in text.split(",") if x.strip())


@dataclass(frozen=True)
class RunConfig:
    level: int = 37
    newform: str = "internal"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    c_max: float = 8192.0
    n_max: int = 2000
    quad_budget: int = 200_000
    s_grid: tuple = DEFAULT_S_GRID
    w_grid: tuple = (2.6 + 0j,)
    fourier_n: tuple = (1, 2)
    fourier_s: tuple = (2.5 + 0j, 3 + 0j)
    out_dir: Path = Path("eistwist-out")
    cache_dir: Path | None = None
    workers: int = 1
    seed: int = 20240601

    def __post_init__(self):
        if self.level < 1 or not is_squarefree(self.level):
            raise ConfigError(f"level must be a squarefree positive integer, got {self.level}")
        for k, v in self.tolerances.items():
            if k not in SUITES:
                raise ConfigError(f"unknown suite in tolerances: {k!r}")
            if not v >= 0 or (k != "group" and v == 0):
                raise ConfigError(f"tolerance for {k} must be positive")
        if not self.s_grid or not self.w_grid:
            raise ConfigError("grids must be non-empty")
        if any(not w.real > 2 for w in self.w_grid):
            raise ConfigError("every w in the grid needs Re w > 2")
        if self.c_max <= 0 or self.n_max <= 0 or self.quad_budget <= 0 or self.workers < 1:
            raise ConfigError("truncation limits and worker count must be positive")

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides) -> "RunConfig":
        raw: dict = {}
        if path is not None:
            try:
                raw = tomli.loads(Path(path).read_text())
            except (OSError, tomli.TOMLDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        kw: dict = {}
        try:
            if "level" in raw:
                kw["level"] = int(raw["level"])
            if "newform" in raw:
                kw["newform"] = str(raw["newform"])
            if "workers" in raw:
                kw["workers"] = int(raw["workers"])
            if "seed" in raw:
                kw["seed"] = int(raw["seed"])
            tol = dict(DEFAULT_TOLERANCES)
            tol.update({k: float(v) for k, v in raw.get("tolerances", {}).items()})
            kw["tolerances"] = tol
            trunc = raw.get("truncation", {})
            for key, conv in (("c_max", float), ("n_max", int), ("quad_budget", int)):
                if key in trunc:
                    kw[key] = conv(trunc[key])
            grid = raw.get("grid", {})
            if "s" in grid:
                kw["s_grid"] = tuple(parse_complex(x) for x in grid["s"])
            elif "re_s" in grid or "im_s" in grid:
                kw["s_grid"] = tuple(
                    complex(r, i) for r in grid.get("re_s", []) for i in grid.get("im_s", [0.0])
                )
            if "w" in grid:
                kw["w_grid"] = tuple(parse_complex(x) for x in grid["w"])
            fourier = raw.get("fourier", {})
            if "n" in fourier:
                kw["fourier_n"] = tuple(int(n) for n in fourier["n"])
            if "s" in fourier:
                kw["fourier_s"] = tuple(parse_complex(x) for x in fourier["s"])
            output = raw.get("output", {})
            if "dir" in output:
                kw["out_dir"] = Path(output["dir"])
            if "cache" in output:
                kw["cache_dir"] = Path(output["cache"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    def newform_data(self) -> NewformData:
        if self.newform == "internal":
            if self.level == 37:
                return NewformData.canonical(self.n_max)
            if self.level == 1:
                return NewformData.zero(1)
            raise ConfigError(f"no internal newform at level {self.level}; give a file")
        try:
            nf = NewformData.from_json(self.newform)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read newform file: {exc}") from exc
        if nf.level != self.level:
            raise ConfigError(f"newform file has level {nf.level}, config says {self.level}")
        return nf


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _json_value(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


@dataclass
class CheckRecord:
    identity: str
    inputs: dict
    lhs: object
    rhs: object
    residual: float
    tolerance: float
    passed: bool
    error: str | None = None

    def to_json(self) -> dict:
        d = {
            "identity": self.identity,
            "grid_point": {k: _json_value(v) for k, v in self.inputs.items()},
            "lhs": _json_value(self.lhs),
            "rhs": _json_value(self.rhs),
            "residual": _json_value(self.residual),
            "tolerance": self.tolerance,
            "pass": self.passed,
        }
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class SuiteReport:
    name: str
    records: list[CheckRecord]
    wall_time: float
    cache_stats: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_json(self) -> dict:
        return {"suite": self.name, "pass": self.passed, "checks": [r.to_json() for r in self.records]}

    def write(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{self.name}.json"
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        timing = {"suite": self.name, "wall_time": self.wall_time, "cache": self.cache_stats}
        (out_dir / f"{self.name}.timing.json").write_text(json.dumps(timing, indent=2) + "\n")
        return path


def check(identity: str, inputs: dict, lhs, rhs, tol: float, residual: float | None = None) -> CheckRecord:
    if residual is None:
        residual = abs(complex(lhs) - complex(rhs))
    return CheckRecord(identity, inputs, lhs, rhs, float(residual), tol, bool(residual <= tol))


Check = Callable[[], list[CheckRecord]]


def _guarded(name: str, inputs: dict, fn: Check) -> list[CheckRecord]:
    try:
        return fn()
    except EistwistError as exc:
        return [CheckRecord(name, inputs, None, None, math.inf, 0.0, False, f"{type(exc).__name__}: {exc}")]


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


class Context:
    def __init__(self, config: RunConfig):
        self.config = config
        self.nf = config.newform_data()
        self.cache = PsiCache(self.nf)
        self.cache_file = None
        self.cache_loaded = False
        if config.cache_dir is not None:
            config.cache_dir.mkdir(parents=True, exist_ok=True)
            self.cache_file = config.cache_dir / f"psi-{config.level}-{self.nf.fingerprint()[:16]}.bin"
            self.cache_loaded = self.cache.load(self.cache_file)
            if self.cache_file.exists() and not self.cache_loaded:
                log.warning("psi cache %s is stale or corrupt; recomputing", self.cache_file)

    def tol(self, suite: str) -> float:
        return self.config.tolerances[suite]

    def save(self) -> None:
        if self.cache_file is not None:
            self.cache.save(self.cache_file)


def _group_checks(ctx: Context) -> list[tuple[str, dict, Check]]:
    N = ctx.config.level

    def cusps():
        n = len(cusp_set(N))
        return [check("cusp count = orbit count", {"level": N}, n, cusp_orbits_bruteforce(N), 0.0)]

    def cosets():
        inf = cusp_set(N)[0]
        c_max = 6.0 * math.sqrt(N)
        reps = list(coset_reps(inf, c_max))
        in_group = sum(in_gamma_star(ScaledMatrix.from_element(r.element), N) for r in reps)
        keys = {(r.c_sq, r.d_over_c) for r in reps}
        expected = 1 + sum(class_counts(inf, inf, c_max).values())
        return [
            check("coset representatives lie in the group", {"level": N}, in_group, len(reps), 0.0),
            check("coset representatives are distinct", {"level": N}, len(keys), len(reps), 0.0),
            check("coset count matches class counts", {"level": N, "c_max": c_max}, len(reps), expected, 0.0),
        ]

    return [("cusps", {"level": N}, cusps), ("cosets", {"level": N}, cosets)]


def _psi_checks(ctx: Context) -> list[tuple[str, dict, Check]]:
    N, nf, cache, tol = ctx.config.level, ctx.nf, ctx.cache, ctx.tol("psi")
    rng = random.Random(ctx.config.seed)
    W = fricke(N)

    def draw():
        g = random_gamma0(N, rng)
        return multiply(g, W) if rng.random() < 0.5 else g

    pairs = [(draw(), draw()) for _ in range(20)]
    singles = [draw() for _ in range(10)]

    def homomorphism():
        out = []
        for g, h in pairs:
            lhs = modular_symbol(nf, multiply(g, h), cache)
            rhs = modular_symbol(nf, g, cache) + modular_symbol(nf, h, cache)
            out.append(check("psi(gh) = psi(g) + psi(h)", {"g": str(g), "h": str(h)}, lhs, rhs, tol))
        return out

    def parabolic():
        out = []
        for g in singles[:5]:
            for p in (translation(N, 3), lower(N, 2)):
                conj = multiply(multiply(g, p), invert(g))
                out.append(check("psi(parabolic) = 0", {"element": str(conj)}, modular_symbol(nf, conj, cache), 0j, tol))
        return out

    def antisymmetry():
        return [
            check("psi(g^-1) = -psi(g)", {"g": str(g)}, modular_symbol(nf, invert(g), cache),
                  -modular_symbol(nf, g, cache), tol)
            for g in singles
        ]

    def fricke_zero():
        return [check("psi(W) = 0", {"level": N}, modular_symbol(nf, W, cache), 0j, tol)]

    def l_value():
        return [check("L(f, 1) = 0", {"split": t}, l_value_at_1(nf, t), 0j, 1e-8) for t in (0.1, 0.3)]

    items = [("homomorphism", {}, homomorphism), ("parabolic", {}, parabolic),
             ("antisymmetry", {}, antisymmetry), ("fricke", {}, fricke_zero)]
    if not nf.degenerate:
        items.append(("l-value", {}, l_value))
    return items


def _eisenstein_checks(ctx: Context) -> list[tuple[str, dict, Check]]:
    N, nf, cache, tol = ctx.config.level, ctx.nf, ctx.cache, ctx.tol("eisenstein")
    inf = cusp_set(N)[0]
    W = fricke(N)
    rng = random.Random(ctx.config.seed + 1)
    out = []
    w = 2.5 + 0j
    for z in (0.3 + 0.9j, -0.21 + 0.6j):
        def fricke_inv(z=z):
            a = eval_completed(inf, z, w, nf, cache, tol=1e-9)
            b = eval_completed(inf, W.act(z), w, nf, cache, tol=1e-9)
            return [check("E~(Wz) = E~(z)", {"z": z, "w": w}, b.value, a.value, tol)]

        out.append((f"fricke {z}", {"z": z}, fricke_inv))

    if not nf.degenerate:
        # |cz + d| = 1 keeps both z and gz at height 1/c
        g = random_gamma0(N, rng, bound=1)
        z = complex(-g.mat[3] / g.mat[2], 1.0 / g.mat[2])
        for s in (2.5 + 0j, 3 + 0j):
            def tl(s=s, g=g, z=z):
                p = EisensteinParams(inf, s, ctx.config.c_max, True)
                lhs_v = eval_twisted(p, g.act(z), nf, cache, tol=1e-9)
                rhs_v = eval_twisted(p, z, nf, cache, tol=1e-9)
                cl = eval_classical(EisensteinParams(inf, s, ctx.config.c_max, False), z, tol=1e-9)
                psi = modular_symbol(nf, invert(g), cache)
                bound = 10 * (lhs_v.tail_bound + rhs_v.tail_bound + abs(psi) * cl.tail_bound)
                return [check("E(gz;f) - E(z;f) = psi(g^-1) E(z)", {"g": str(g), "z": z, "s": s},
                              lhs_v.value - rhs_v.value, psi * cl.value, max(bound, 1e-14))]

            out.append((f"tl s={s}", {"s": s}, tl))
    return out


def _fourier_checks(ctx: Context) -> list[tuple[str, dict, Check]]:
    nf, cache, tol = ctx.nf, ctx.cache, ctx.tol("fourier")
    inf = cusp_set(ctx.config.level)[0]
    out = []
    for s in ctx.config.fourier_s:
        for n in ctx.config.fourier_n:
            def two_methods(s=s, n=n):
                a = fourier_series(inf, inf, n, s, nf, tol=1e-10, cache=cache)
                b = fourier_quadrature(inf, inf, n, s, 0.5, nf, tol=1e-10, cache=cache)
                scale = max(abs(a.value), abs(b.value))
                if scale == 0:
                    return [check("phi(n,s;f): series = quadrature", {"n": n, "s": s}, a.value, b.value, tol, 0.0)]
                rel = abs(a.value - b.value) / scale
                return [check("phi(n,s;f): series = quadrature", {"n": n, "s": s}, a.value, b.value, tol, rel)]

            out.append((f"fourier n={n} s={s}", {"n": n, "s": s}, two_methods))
    return out


def _scattering_checks(ctx: Context) -> list[tuple[str, dict, Check]]:
    N, nf, cache, tol = ctx.config.level, ctx.nf, ctx.cache, ctx.tol("scattering")

    def certify():
        model = classical_model(N)
        out = []
        for s in model.GRID:
            a, b = model.closed_form(s), model.direct(s)
            out.append(check("phi closed form = direct sum", {"s": s}, a, b, tol, abs(a - b) / abs(a)))
        for s in (2 + 0j, 1.7 + 3j, 0.3 + 1j, 2.5 + 0j):
            out.append(check("phi(s) phi(1-s) = 1", {"s": s}, model.closed_form(s) * model.closed_form(1 - s), 1, tol))
        return out

    def identities():
        out = []
        for w in ctx.config.w_grid:
            quad = dds.constant_terms(w, nf, method="quadrature", cache=cache)
            closed = dds.constant_terms(w, nf, method="closed-form", cache=cache)
            out.append(check("b(w) = phi(w;f)/2", {"w": w}, quad.b_w, closed.b_w, 1e-6))
            out.append(check("a(w) = -phi(w;f) phi(1-w)/2", {"w": w}, quad.a_w, closed.a_w, 1e-6))
        return out

    return [("certify", {"level": N}, certify), ("identities", {}, identities)]


def _lambda_checks(ctx: Context) -> list[tuple[str, dict, Check]]:
    nf, cache, tol = ctx.nf, ctx.cache, ctx.tol("lambda")
    N = ctx.config.level
    out = []
    for w in ctx.config.w_grid:
        grid = [(s, w) for s in ctx.config.s_grid]

        def fe(grid=grid):
            recs = dds.check_fe_s(grid, nf, rtol=tol, cache=cache)
            return [
                CheckRecord(r.identity, {"s": complex(*r.grid_point["s"]), "w": complex(*r.grid_point["w"])},
                            r.lhs, r.rhs, r.residual, r.tolerance, r.passed)
                for r in recs
            ]

        def corrupted(grid=grid, w=w):
            if nf.degenerate:
                return []
            recs = dds.check_fe_s(grid[:3], nf, level_override=N + 1, rtol=tol, cache=cache)
            failed = sum(not r.passed for r in recs)
            return [check("corrupted level is detected", {"w": w, "level": N + 1}, failed, len(recs), 0.0)]

        def residues(w=w):
            out = []
            for s0 in dds.pole_points(w):
                r = dds.residue_at(None, s0, w, nf, cache=cache)
                out.append(check("residue = closed form", {"s0": s0, "w": w}, r["contour"], r["closed_form"], 1e-6))
            return out

        out += [(f"fe w={w}", {"w": w}, fe), (f"corrupted w={w}", {"w": w}, corrupted),
                (f"residues w={w}", {"w": w}, residues)]
    return out


_SUITE_BUILDERS = {
    "group": _group_checks,
    "psi": _psi_checks,
    "eisenstein": _eisenstein_checks,
    "fourier": _fourier_checks,
    "scattering": _scattering_checks,
    "lambda": _lambda_checks,
}


def run_suite(name: str, config: RunConfig, ctx: Context | None = None) -> SuiteReport:
    if name == "all":
        raise ConfigError("run_suite takes one suite; use run_all for 'all'")
    if name not in _SUITE_BUILDERS:
        raise ConfigError(f"unknown suite {name!r}")
    ctx = ctx or Context(config)
    start = time.perf_counter()
    hits0, misses0 = ctx.cache.hits, ctx.cache.misses
    try:
        items = _SUITE_BUILDERS[name](ctx)
    except EistwistError as exc:
        items = [(name, {}, lambda exc=exc: (_ for _ in ()).throw(exc))]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(_guarded, label, inputs, fn) for label, inputs, fn in items]
        records = [r for fut in futures for r in fut.result()]
    stats = {
        "hits": ctx.cache.hits - hits0,
        "misses": ctx.cache.misses - misses0,
        "entries": len(ctx.cache.values),
        "loaded_from_disk": ctx.cache_loaded,
    }
    report = SuiteReport(name, records, time.perf_counter() - start, stats)
    report.write(config.out_dir)
    ctx.save()
    return report


def run_all(config: RunConfig) -> list[SuiteReport]:
    ctx = Context(config)
    return [run_suite(name, config, ctx) for name in SUITES]


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def emit_tables(kind: str, config: RunConfig) -> list[Path]:
    if kind not in TABLES:
        raise ConfigError(f"unknown table kind {kind!r}")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    ctx = Context(config)
    nf, cache = ctx.nf, ctx.cache
    inf = cusp_set(config.level)[0]
    if kind == "fourier":
        if not config.fourier_n or not config.fourier_s:
            raise ConfigError("fourier table needs non-empty n and s lists")
        coeffs = []
        for s in config.fourier_s:
            for n in config.fourier_n:
                coeffs.append(fourier_series(inf, inf, n, s, nf, tol=1e-10, cache=cache))
                coeffs.append(fourier_quadrature(inf, inf, n, s, 0.5, nf, tol=1e-10, cache=cache))
        paths = [write_coefficient_csv(config.out_dir / "fourier.csv", coeffs)]
    elif kind == "scattering":
        if not config.s_grid:
            raise ConfigError("empty s grid")
        path = config.out_dir / "scattering.csv"
        model = classical_model(config.level)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "re_s", "im_s", "re_value", "im_value", "method", "error_estimate"])
            for s in model.GRID:
                for method, value in (("closed-form", model.closed_form(s)), ("direct-sum", model.direct(s))):
                    writer.writerow(["classical", s.real, s.imag, value.real, value.imag, method, ""])
            for w in config.w_grid:
                v = scattering(w, "twisted", nf, cache=cache).scalar
                writer.writerow(["twisted", w.real, w.imag, v.real, v.imag, "direct-sum", ""])
        paths = [path]
    else:
        grid = [(s, w) for w in config.w_grid for s in config.s_grid]
        if not grid:
            raise ConfigError("empty lambda grid")
        recs = dds.check_fe_s(grid, nf, rtol=config.tolerances["lambda"], cache=cache)
        path = config.out_dir / "lambda-grid.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["re_s", "im_s", "re_w", "im_w", "residual", "tolerance", "pass"])
            for r in recs:
                writer.writerow([*r.grid_point["s"], *r.grid_point["w"], r.residual, r.tolerance, r.passed])
        plot = config.out_dir / "lambda-grid.xyz.csv"
        with plot.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "value"])
            for r in recs:
                writer.writerow([r.grid_point["s"][0], r.grid_point["s"][1], r.residual])
        paths = [path, plot]
    ctx.save()
    return paths


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eistwist", description="Twisted Eisenstein series verification runs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="TOML configuration file")
        sp.add_argument("--level", type=int)
        sp.add_argument("--tolerance", type=float, help="override the tolerance of the selected suite")
        sp.add_argument("--grid", help='s grid: "a,b,c" or "re1,re2;im1,im2"')
        sp.add_argument("--out", type=Path)
        sp.add_argument("--cache", type=Path)
        sp.add_argument("--workers", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")

    run = sub.add_parser("run", help="run a verification suite")
    run.add_argument("suite", choices=SUITES + ("all",))
    common(run)
    emit = sub.add_parser("emit", help="write CSV tables")
    emit.add_argument("kind", choices=TABLES)
    common(emit)
    cusps = sub.add_parser("cusps", help="list the cusps of the extended group")
    cusps.add_argument("--level", type=int, required=True)
    return p


def _config_from_args(args) -> RunConfig:
    overrides = {"level": args.level, "out_dir": args.out, "cache_dir": args.cache, "workers": args.workers}
    if args.grid is not None:
        overrides["s_grid"] = parse_grid(args.grid)
    config = RunConfig.load(args.config, **overrides)
    if args.tolerance is not None:
        suites = SUITES if getattr(args, "suite", "all") == "all" else (args.suite,)
        if getattr(args, "kind", None) == "lambda-grid":
            suites = ("lambda",)
        tol = dict(config.tolerances)
        tol.update({name: args.tolerance for name in suites})
        config = replace(config, tolerances=tol)
    return config


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "cusps":
            if args.level < 1 or not is_squarefree(args.level):
                raise ConfigError("level must be squarefree")
            for c in cusp_set(args.level):
                print(f"{c.label}\t{c.base}\twidth={c.width}")
            return 0
        config = _config_from_args(args)
        if args.command == "emit":
            for path in emit_tables(args.kind, config):
                print(path)
            return 0
        reports = run_all(config) if args.suite == "all" else [run_suite(args.suite, config)]
        for r in reports:
            status = "PASS" if r.passed else "FAIL"
            failed = sum(not c.passed for c in r.records)
            print(f"{r.name:12s} {status}  {len(r.records)} checks, {failed} failed, {r.wall_time:.1f} s")
        return 0 if all(r.passed for r in reports) else 1
    except (ConfigError, EistwistError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
