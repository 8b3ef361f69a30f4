"""Experiment driver: build the objects a config describes, run the instances, write reports.

Every run writes ``<kind>.csv`` (one row per instance, sorted by instance
key) and ``summary.json``. The CSV body depends only on the config and the
root seed; the generation time appears only in the leading ``#`` comment.

Seeds follow a counter scheme: instance ``i`` of stream ``s`` gets the first
32-bit word of ``SeedSequence([root, crc32(s), i])``.
"""

import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .bounds import (
    BOUND_CSV_HEADER,
    UniversalConstants,
    log_thm7_constant,
    log_thm11_constant,
    polynomial_scaling_fit,
    slope_bound,
    verify_inequality,
)
from .concentration import (
    build_concentration,
    extremal_search,
    gamma_sweep,
    scale_free_sweep,
    thick_ball_union,
)
from .config import ExperimentConfig, load_config
from .errors import AliasingError, ConfigError
from .sets import (
    EquidistributedSeq,
    GridSet,
    build_ball_union,
    gamma_for_equidistributed,
    shell_cover_count,
    thickness_scan,
)
from .suites import LEMMA_CSV_HEADER, SUITES
from .torus import BandSpec, TorusGeometry

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILED = 2


def derive_seed(root, stream, index):
    ss = np.random.SeedSequence([int(root), zlib.crc32(stream.encode()), int(index)])
    return int(ss.generate_state(1)[0])


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# ------------------------------------------------------------ object builders

def build_band(cfg, L):
    b = cfg.band
    try:
        band = BandSpec(np.array(b["centers"], dtype=float), np.array(b["sides"], dtype=float))
    except ValueError as exc:
        raise ConfigError("band", str(exc)) from None
    if any(b["shift"]):
        band = band.translate(np.array(b["shift"], dtype=float) / L)
    return band


def build_geometry(cfg, band, L=None):
    g = cfg.geometry
    L = g["L"] if L is None else L
    freqs = band.lattice_frequencies(L)
    if freqs.shape[0] == 0:
        raise ConfigError("band", f"no lattice frequency k / L lies in the band for L={L}")
    kmax = int(np.abs(freqs).max())
    if "N" in g:
        geometry = TorusGeometry(g["d"], L, g["N"])
        try:
            geometry.check_frequencies(freqs)
        except AliasingError as exc:
            raise ConfigError("geometry.N", str(exc)) from None
        return geometry
    return TorusGeometry.fitting(g["d"], L, kmax, points_per_unit=g["points_per_unit"])


def build_set(cfg, geometry, gamma=None, seed=0):
    """The observation set and its thickness parameters ``(gamma, a)`` when known."""
    s = cfg.set
    t = s["type"]
    d = geometry.d
    try:
        if t == "full":
            return GridSet.full(geometry), 1.0, s.get("a")
        if t == "empty":
            return GridSet.empty(geometry), math.nan, s.get("a")
        if t == "thick":
            gamma = s["gamma"] if gamma is None else gamma
            S = thick_ball_union(gamma, s["a"], geometry, s["sequence"], s.get("seed", seed), s["coverage"])
            return S, gamma, [s["a"]] * d
        if t == "ball-union":
            if s["sequence"] == "periodic":
                seq = EquidistributedSeq.periodic(s["G"], s["delta"], geometry, s["offset"])
            else:
                seq = EquidistributedSeq.seeded_random(s["G"], s["delta"], geometry, s.get("seed", seed))
            S = build_ball_union(seq, geometry, coverage=s["coverage"])
            return S, gamma_for_equidistributed(s["G"], s["delta"], d), [2 * s["G"]] * d
        if t == "intervals":
            return GridSet.from_intervals(geometry, s["intervals"]), None, s.get("a")
        if t == "boxes":
            return GridSet.from_boxes(geometry, s["boxes"]), None, s.get("a")
        S = GridSet.loads(Path(s["path"]).read_text())
    except ValueError as exc:
        raise ConfigError("set", str(exc)) from None
    if S.geometry.d != geometry.d or abs(S.geometry.L - geometry.L) > 1e-12:
        raise ConfigError("set.path", "the stored set lives on a different torus")
    return S, None, s.get("a")


def _gamma_of(S, gamma, a, d):
    if gamma is not None:
        return gamma
    if a is None:
        raise ConfigError("set.a", "needed to measure the thickness of this set")
    try:
        return thickness_scan(S, a).gamma_est
    except ValueError as exc:
        raise ConfigError("set.a", str(exc)) from None


def _constants(cfg):
    try:
        return UniversalConstants(**cfg.constants)
    except ValueError as exc:
        raise ConfigError("constants", str(exc)) from None


# --------------------------------------------------------------- task bodies
# Each task is a top-level function of (config, item) so it can run in a worker process.

def _lemma_task(cfg, item):
    lemma, index = item
    seed = derive_seed(cfg.seed, lemma, index)
    return (lemma, index), SUITES[lemma](seed).csv_row(), None


def _bound_task(cfg, gamma_in):
    band = build_band(cfg, cfg.geometry["L"])
    g = build_geometry(cfg, band)
    S, gamma, a = build_set(cfg, g, gamma_in, derive_seed(cfg.seed, "set", 0))
    d = g.d
    gamma = _gamma_of(S, gamma, a, d)
    if a is None:
        raise ConfigError("set.a", "needed for the product a.b")
    p = cfg.run["p"]
    consts = _constants(cfg)
    ab = float(np.dot(np.broadcast_to(a, (d,)), band.sides))
    if not 0 < gamma <= 1:
        raise ConfigError("set", f"thickness {gamma} is outside (0, 1]")
    if p == 2:
        rho_obj = build_concentration(S, band)
    else:
        rho_obj = extremal_search(band, S, p, derive_seed(cfg.seed, "search", 0),
                                  cfg.run["max_iter"], cfg.run["restarts"])
    if cfg.kind == "thm7":
        log_k = log_thm7_constant(gamma, a, band.sides, p, d, consts, cfg.run["mode"])
    else:
        log_k = log_thm11_constant(gamma, a, band.sides, band.n, p, d, consts)
    rep = verify_inequality(rho_obj, S, p, log_K=log_k, theorem=cfg.kind, d=d, gamma=gamma,
                            a_dot_b=ab, n=band.n)
    return (gamma,), rep.csv_row(), rep.passed


def _concentration_task(cfg, seed):
    band = build_band(cfg, cfg.geometry["L"])
    g = build_geometry(cfg, band)
    S, _, _ = build_set(cfg, g, None, seed)
    try:
        res = build_concentration(S, band)
    except ValueError as exc:
        raise ConfigError("band", str(exc)) from None
    dens = S.density()
    trace_ok = abs(res.trace - res.m_dim * dens) <= 1e-9 * max(res.m_dim * dens, 1.0)
    eig_ok = bool(res.eigenvalues[0] >= -1e-9 and res.eigenvalues[-1] <= 1 + 1e-9)
    ok = bool(trace_ok and eig_ok and res.residual <= 1e-9)
    p = cfg.run["p"]
    if p == 2:
        rho = math.sqrt(res.lambda_min)
    else:
        rho = extremal_search(band, S, p, seed, cfg.run["max_iter"], cfg.run["restarts"]).ratio
    row = ",".join([str(seed), str(res.m_dim), _fmt(res.lambda_min), _fmt(res.lambda_max), _fmt(res.trace),
                    _fmt(res.residual), _fmt(p), _fmt(rho), _fmt(ok)])
    return (seed,), row, ok, res.to_text()


def _scale_task(cfg, L):
    band = build_band(cfg, L)
    s = cfg.set
    center = band.centers[0]
    if band.n != 1:
        raise ConfigError("band.centers", "scale sweeps take a single box")
    try:
        res = scale_free_sweep(s["gamma"], s["a"], band.sides, [L], cfg.run["p"], cfg.geometry["d"], center,
                               s["sequence"], s.get("seed", derive_seed(cfg.seed, "set", 0)),
                               cfg.geometry["points_per_unit"])
    except ValueError as exc:
        raise ConfigError("run.L_list", str(exc)) from None
    r = res.rows[0]
    return (L,), ",".join([_fmt(r.key), _fmt(r.value), str(r.m_dim), _fmt(r.density)]), r.value


def _gamma_task(cfg, gamma):
    band = build_band(cfg, cfg.geometry["L"])
    s = cfg.set
    if band.n != 1:
        raise ConfigError("band.centers", "thickness sweeps take a single box")
    try:
        res = gamma_sweep([gamma], s["a"], band.sides, cfg.geometry["L"], 2.0, cfg.geometry["d"],
                          band.centers[0], s["sequence"], s.get("seed", derive_seed(cfg.seed, "set", 0)),
                          cfg.geometry["points_per_unit"])
    except ValueError as exc:
        raise ConfigError("run.gammas", str(exc)) from None
    r = res.rows[0]
    lam = r.value
    tokens = [_fmt(r.key), _fmt(lam), str(r.m_dim), _fmt(r.density), _fmt(math.log(1 / r.key)),
              _fmt(math.log(1 / lam) if lam > 0 else math.inf)]
    return (gamma,), ",".join(tokens), lam


def _shell_task(cfg, item):
    d, E = item
    sc = shell_cover_count(E, d)
    row = ",".join([str(d), _fmt(E), str(sc.n_cubes), _fmt(sc.bound), _fmt(sc.within_bound)])
    return (d, E), row, sc.within_bound


# ------------------------------------------------------------------ running

def _map(fn, cfg, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, [cfg] * len(items), items))
    return [fn(cfg, it) for it in items]


CSV_HEADERS = {
    "lemma-suite": LEMMA_CSV_HEADER,
    "thm7": BOUND_CSV_HEADER,
    "thm11": BOUND_CSV_HEADER,
    "concentration": "seed,m_dim,lambda_min,lambda_max,trace,residual,p,rho,pass",
    "scale-sweep": "L,value,m_dim,density",
    "gamma-sweep": "gamma,lambda_min,m_dim,density,log_inv_gamma,log_inv_lambda",
    "shell-cover": "d,E,n_cubes,bound,pass",
}


def execute(cfg, jobs=1):
    """Run every instance of `cfg`; returns ``(csv rows, summary dict, all passed, extra files)``."""
    kind = cfg.kind
    extra = {}
    summary = {}
    if kind == "lemma-suite":
        items = [(lemma, i) for lemma in cfg.run["lemmas"] for i in range(cfg.run["instances"])]
        results = _map(_lemma_task, cfg, items, jobs)
        rows = sorted(results, key=lambda r: r[0])
        verdicts = [r[1].rsplit(",", 1)[1] for r in rows]
        summary["failures"] = verdicts.count("0")
        summary["vacuous"] = verdicts.count("NA")
        per = {}
        for (lemma, _), _, _ in rows:
            per[lemma] = per.get(lemma, 0) + 1
        summary["instances"] = per
        ok = summary["failures"] == 0
    elif kind in ("thm7", "thm11"):
        gammas = cfg.run.get("gammas")
        if gammas is not None and cfg.set["type"] != "thick":
            raise ConfigError("run.gammas", "thickness sweeps need set.type = \"thick\"")
        if kind == "thm7" and len(cfg.band["centers"]) != 1:
            raise ConfigError("band.centers", "the single-box bound takes exactly one box")
        results = _map(_bound_task, cfg, list(gammas) if gammas else [None], jobs)
        rows = sorted(results, key=lambda r: r[0])
        summary["failures"] = sum(1 for r in rows if not r[2])
        ok = summary["failures"] == 0
    elif kind == "concentration":
        seeds = cfg.run.get("seeds") or [derive_seed(cfg.seed, "set", 0)]
        results = _map(_concentration_task, cfg, seeds, jobs)
        rows = sorted(results, key=lambda r: r[0])
        for (seed,), _, _, text in rows:
            extra[f"concentration_{seed}.txt"] = text
        summary["failures"] = sum(1 for r in rows if not r[2])
        summary["lambda_min"] = [float(r[1].split(",")[2]) for r in rows]
        ok = summary["failures"] == 0
    elif kind == "scale-sweep":
        results = _map(_scale_task, cfg, cfg.run["L_list"], jobs)
        rows = sorted(results, key=lambda r: r[0])
        vals = [r[2] for r in rows]
        spread = max(vals) / min(vals) if min(vals) > 0 else math.inf
        summary.update(spread=spread, max_spread=cfg.run["max_spread"])
        ok = spread <= cfg.run["max_spread"]
        summary["failures"] = 0 if ok else 1
    elif kind == "gamma-sweep":
        results = _map(_gamma_task, cfg, cfg.run["gammas"], jobs)
        rows = sorted(results, key=lambda r: r[0])
        gammas = [k[0] for k, _, _ in rows]
        lams = [r[2] for r in rows]
        try:
            fit = polynomial_scaling_fit(gammas, lams)
        except ValueError as exc:
            raise ConfigError("run.gammas", str(exc)) from None
        ab = float(np.dot([cfg.set["a"]] * cfg.geometry["d"], cfg.band["sides"]))
        bound = slope_bound(ab, cfg.geometry["d"], 2.0, _constants(cfg))
        summary["fit"] = {"slope": fit.slope, "intercept": fit.intercept, "max_residual": fit.max_residual,
                          "skipped": fit.skipped, "a_dot_b": ab, "slope_bound": bound}
        ok = fit.skipped or fit.max_residual <= cfg.run["max_residual"]
        summary["failures"] = 0 if ok else 1
    elif kind == "shell-cover":
        items = [(d, E) for d in cfg.run["dims"] for E in cfg.run["E"]]
        results = _map(_shell_task, cfg, items, jobs)
        rows = sorted(results, key=lambda r: r[0])
        summary["failures"] = sum(1 for r in rows if not r[2])
        ok = summary["failures"] == 0
    else:  # pragma: no cover - validated earlier
        raise ConfigError("kind", f"unsupported kind {kind!r}")
    csv_rows = [r[1] for r in rows]
    return csv_rows, summary, bool(ok), extra


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def write_csv(path, kind, header, rows):
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    body = "".join(r + "\n" for r in rows)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# uncertainty-lab {kind} generated {stamp}\n{header}\n{body}")


def read_csv(path):
    """Header and rows (lists of string tokens) of a report CSV, skipping ``#`` comments."""
    lines = [ln for ln in Path(path).read_text().split("\n") if ln and not ln.startswith("#")]
    if not lines:
        return [], []
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def run(config, jobs=None, out=None):
    """Run a config (path or :class:`ExperimentConfig`); returns the exit code."""
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    jobs = cfg.run.get("jobs", 1) if jobs is None else int(jobs)
    out_dir = Path(out if out is not None else cfg.output["dir"])
    rows, summary, ok, extra = execute(cfg, jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_name = f"{cfg.kind}.csv"
    write_csv(out_dir / csv_name, cfg.kind, CSV_HEADERS[cfg.kind], rows)
    for name, text in extra.items():
        (out_dir / name).write_text(text)
    code = EXIT_OK if ok else EXIT_FAILED
    report = {"kind": cfg.kind, "config": cfg.source, "root_seed": cfg.seed, "csv": csv_name,
              "rows": len(rows), "passed": ok, "exit_code": code}
    report.update(summary)
    (out_dir / "summary.json").write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return code


# ---------------------------------------------------------------- plot data

def _histogram(values, bins=20):
    vals = np.array([v for v in values if math.isfinite(v)])
    if vals.size == 0:
        return []
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        hi = lo + 1.0
    counts, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    return [f"{_fmt(edges[i])} {_fmt(edges[i + 1])} {int(c)}" for i, c in enumerate(counts)]


def emit_plot_data(report_path, out_dir):
    """Write plain whitespace-separated columns for the figures of a report.

    gamma sweeps give ``log(1/gamma) log(1/lambda_min)`` (tokens copied from
    the CSV), scale sweeps ``L value``, lemma suites a slack histogram
    ``bin_lo bin_hi count``, bound checks ``gamma log10_K log_slack``.
    Returns the written paths.
    """
    report_path = Path(report_path)
    if not report_path.is_file():
        raise FileNotFoundError(f"report {str(report_path)!r} does not exist")
    report = json.loads(report_path.read_text())
    csv_path = report_path.parent / report["csv"]
    if not csv_path.is_file():
        raise FileNotFoundError(f"report CSV {str(csv_path)!r} does not exist")
    header, rows = read_csv(csv_path)
    col = {name: i for i, name in enumerate(header)}
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = report["kind"]
    if kind == "gamma-sweep":
        files = {"gamma_sweep.dat": [f"{r[col['log_inv_gamma']]} {r[col['log_inv_lambda']]}" for r in rows]}
    elif kind == "scale-sweep":
        files = {"scale_sweep.dat": [f"{r[col['L']]} {r[col['value']]}" for r in rows]}
    elif kind == "lemma-suite":
        slacks = [float(r[col["slack"]]) for r in rows] if rows else []
        files = {"lemma_slack.dat": _histogram(slacks)}
    elif kind in ("thm7", "thm11"):
        files = {"bounds.dat": [f"{r[col['gamma']]} {r[col['log10_K']]} {r[col['log_slack']]}" for r in rows]}
    elif kind == "concentration":
        files = {"concentration.dat": [f"{r[col['seed']]} {r[col['lambda_min']]} {r[col['lambda_max']]}"
                                       for r in rows]}
    else:
        files = {"shell_cover.dat": [f"{r[col['d']]} {r[col['E']]} {r[col['n_cubes']]} {r[col['bound']]}"
                                     for r in rows]}
    written = []
    for name, lines in files.items():
        path = out_dir / name
        with open(path, "w", newline="\n") as fh:
            fh.write("".join(ln + "\n" for ln in lines))
        written.append(path)
    return written
