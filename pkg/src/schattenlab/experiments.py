"""Named experiments that check each norm equivalence at desk scale.

Every instance is generated from a seed derived from (suite seed,
experiment name, cell, instance index) and that seed is stored in the
record, so any record can be recomputed on its own.
"""

import hashlib
import json
import math
import os
import platform
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy
from scipy import integrate
from scipy.special import ndtr

from . import __version__
from .decomposition import SolverConfig, triple_norm
from .matrix import check_exponent
from .rng import batches, check_randomizer, derive_seed, draw, stream
from .series import exact_norms, kahane_ratio, report_from_norms, \
    sample_norms, series_moment, tail_profile
from .spaces import parse_space
from .square import chi_norm, column_gram, gram_root_norm, row_gram

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "RatioRecord",
    "CSV_COLUMNS",
    "EXPERIMENTS",
    "random_instance",
    "verify_thm3",
    "verify_thm4",
    "summarize",
    "counterexample_row_column",
    "row_unit_family",
    "expected_max_abs_gaussian",
    "dichotomy_demo",
    "estimate_type_cotype",
    "coordinate_family",
    "kahane_experiment",
    "tails_experiment",
    "run_experiment",
    "load_suite",
    "run_suite",
]

CSV_COLUMNS = ("instance_id", "d1", "d2", "N", "exponent", "randomizer", "numerator",
               "denominator", "ratio", "seed")


class ConfigError(ValueError):
    """Invalid experiment configuration; `line` points into the config text."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else "line %d: %s" % (line, message))


@dataclass
class ExperimentConfig:
    name: str
    dims: list = field(default_factory=lambda: [[2, 2]])
    terms: list = field(default_factory=lambda: [2])
    exponents: list = field(default_factory=lambda: [2.0])
    trials: int = 20
    samples: int = 20000
    seed: int = 0
    output_path: str = ""
    format: str = "json"
    randomizer: str = "rademacher"
    r: float = 2.0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValueError("unknown experiment %r (choose from %s)"
                             % (self.name, ", ".join(sorted(EXPERIMENTS))))
        for key in ("dims", "terms", "exponents"):
            if not isinstance(getattr(self, key), (list, tuple)) or not getattr(self, key):
                raise ValueError("%s must be a nonempty list" % key)
        dims = []
        for d in self.dims:
            if isinstance(d, int):
                d = [d, d]
            if len(d) != 2 or int(d[0]) < 1 or int(d[1]) < 1:
                raise ValueError("dims entries must be [d1, d2] with positive sides, got %r" % (d,))
            dims.append([int(d[0]), int(d[1])])
        self.dims = dims
        self.terms = [int(n) for n in self.terms]
        if any(n < 1 for n in self.terms):
            raise ValueError("terms entries must be >= 1")
        self.exponents = [check_exponent(p) for p in self.exponents]
        if int(self.trials) < 1 or int(self.samples) < 1:
            raise ValueError("trials and samples must be >= 1")
        self.trials, self.samples, self.seed = int(self.trials), int(self.samples), int(self.seed)
        if self.format not in ("json", "csv"):
            raise ValueError("format must be json or csv")
        self.randomizer = check_randomizer(self.randomizer)
        if not float(self.r) > 0:
            raise ValueError("r must be positive")

    @classmethod
    def from_dict(cls, obj):
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ValueError("unknown config keys: %s" % ", ".join(sorted(extra)))
        if "name" not in obj:
            raise ValueError("experiment config needs a name")
        return cls(**obj)

    def to_dict(self):
        return asdict(self)


@dataclass
class RatioRecord:
    instance_id: str
    d1: int
    d2: int
    N: int
    exponent: float
    randomizer: str
    numerator: float
    denominator: float
    ratio: float
    seed: int
    exact: bool = False
    converged: bool = True
    numerator_std_error: float = 0.0

    def row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


def random_instance(seed, n, d1, d2):
    """``n`` matrices with i.i.d. complex standard normal entries (E|z|^2 = 1)."""
    g = stream(seed)
    return (g.standard_normal((n, d1, d2)) + 1j * g.standard_normal((n, d1, d2))) / math.sqrt(2)


def _map(fn, items, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _grid(cfg):
    for p in cfg.exponents:
        for d1, d2 in cfg.dims:
            for n in cfg.terms:
                for k in range(cfg.trials):
                    yield p, d1, d2, n, k


def _instance_seed(cfg, name, p, d1, d2, n, k):
    return derive_seed(cfg.seed, name, "%g" % p, d1, d2, n, k)


def _instance_id(name, p, d1, d2, n, k):
    return "%s/p=%g/d=%dx%d/N=%d/%d" % (name, p, d1, d2, n, k)


def _numerator(cfg, x, p, seed):
    rep = series_moment(x, cfg.randomizer, p, cfg.r, cfg.samples, seed)
    return rep


def verify_thm3(cfg, jobs=1):
    """Series norm in L_r(C_q) divided by the row/column square function.

    Rademacher series with at most 12 terms are averaged exactly.
    """
    if any(q < 2 for q in cfg.exponents):
        raise ValueError("verify_thm3 needs exponents >= 2")

    def one(item):
        q, d1, d2, n, k = item
        seed = _instance_seed(cfg, "thm3", q, d1, d2, n, k)
        x = random_instance(seed, n, d1, d2)
        num = _numerator(cfg, x, q, seed)
        den = chi_norm(x, q)
        return RatioRecord(_instance_id("thm3", q, d1, d2, n, k), d1, d2, n, q, cfg.randomizer,
                           num.estimate, den, num.estimate / den, seed, num.exact,
                           True, num.std_error)

    return _map(one, list(_grid(cfg)), jobs)


def verify_thm4(cfg, jobs=1, solver=None):
    """Series norm in L_r(C_p) divided by the decomposition norm (1 <= p <= 2)."""
    if any(p < 1 or p > 2 for p in cfg.exponents):
        raise ValueError("verify_thm4 needs exponents in [1, 2]")
    base = solver or SolverConfig(**cfg.options.get("solver", {}))

    def one(item):
        p, d1, d2, n, k = item
        seed = _instance_seed(cfg, "thm4", p, d1, d2, n, k)
        x = random_instance(seed, n, d1, d2)
        num = _numerator(cfg, x, p, seed)
        res = triple_norm(x, p, SolverConfig(**{**asdict(base), "seed": seed & 0x7FFFFFFF}))
        return RatioRecord(_instance_id("thm4", p, d1, d2, n, k), d1, d2, n, p, cfg.randomizer,
                           num.estimate, res.objective, num.estimate / res.objective, seed,
                           num.exact, res.converged, num.std_error)

    return _map(one, list(_grid(cfg)), jobs)


def summarize(records):
    """Min/max ratio per (exponent, d1, d2, N) cell."""
    cells = {}
    for rec in records:
        key = (rec.exponent, rec.d1, rec.d2, rec.N)
        lo, hi, cnt, ok = cells.get(key, (math.inf, -math.inf, 0, True))
        cells[key] = (min(lo, rec.ratio), max(hi, rec.ratio), cnt + 1, ok and rec.converged)
    return [{"exponent": k[0], "d1": k[1], "d2": k[2], "N": k[3], "min_ratio": v[0],
             "max_ratio": v[1], "count": v[2], "all_converged": v[3]}
            for k, v in sorted(cells.items())]


def row_unit_family(n):
    """Matrix units ``E_{1k}``, k = 1..n, as n x n matrices (first row only)."""
    x = np.zeros((n, n, n), dtype=np.complex128)
    for k in range(n):
        x[k, 0, k] = 1.0
    return x


def counterexample_row_column(q, n_list, seed=0, max_enumerate=16, sampled_patterns=256):
    """Row-unit family: the column square function alone misses the series norm.

    ``sum eps_k E_{1k}`` has the single singular value sqrt(N) for every
    sign pattern.  Patterns are enumerated for ``N <= max_enumerate`` and
    sampled otherwise; the report records the largest deviation from
    sqrt(N) across the checked patterns.
    """
    q = check_exponent(q)
    if q <= 2:
        raise ValueError("the row/column counterexample needs q > 2")
    rows = []
    for n in n_list:
        x = row_unit_family(n)
        if n <= max_enumerate:
            norms = exact_norms(x, q)
            checked, exhaustive = 2 ** n, True
        else:
            norms = sample_norms(x, "rademacher", q, sampled_patterns, derive_seed(seed, "cx", n))
            checked, exhaustive = sampled_patterns, False
        series = math.sqrt(float(np.mean(norms ** 2)))
        col = gram_root_norm(column_gram(x), q)
        row = gram_root_norm(row_gram(x), q)
        rows.append({
            "N": n, "q": q, "series_norm": series,
            "max_pattern_deviation": float(np.max(np.abs(norms - math.sqrt(n)))),
            "patterns_checked": checked, "exhaustive": exhaustive,
            "column_functional": col, "row_functional": row,
            "ratio": series / col, "predicted_ratio": n ** (0.5 - 1.0 / q),
        })
    return {"experiment": "counterexample", "q": q, "rows": rows}


def expected_max_abs_gaussian(n):
    """``E max_{i<=n} |g_i| = int_0^inf 1 - (2 Phi(t) - 1)^n dt`` by quadrature."""
    val, _ = integrate.quad(lambda t: 1.0 - (2.0 * ndtr(t) - 1.0) ** n, 0.0, np.inf,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(val)


def _sup_norms(kind, n, samples, seed, max_cells=1 << 21):
    # E || sum xi_i e_i ||_inf in l_inf^n; batches are drawn in sub-blocks
    # from their own stream to bound memory
    out = []
    for b, count in batches(samples):
        g = stream(seed, b)
        step = max(1, min(count, max_cells // n))
        for start in range(0, count, step):
            m = min(step, count - start)
            out.append(np.max(np.abs(draw(g, kind, (m, n))), axis=1))
    return np.concatenate(out)


def dichotomy_demo(n_list, samples=20000, seed=0):
    """Gaussian versus Rademacher sums of the unit vector basis of l_inf^n."""
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    rows = []
    for n in n_list:
        s = derive_seed(seed, "dichotomy", n)
        rad = report_from_norms(_sup_norms("rademacher", n, samples, s), 1, s)
        gau = report_from_norms(_sup_norms("gaussian", n, samples, s + 1), 1, s + 1)
        rows.append({
            "n": n, "rademacher": rad.estimate, "rademacher_max_deviation": abs(rad.estimate - 1.0),
            "gaussian": gau.estimate, "gaussian_std_error": gau.std_error,
            "gaussian_exact": expected_max_abs_gaussian(n),
            "ratio": gau.estimate / rad.estimate,
            "sqrt_2_log_n": math.sqrt(2 * math.log(n)) if n > 1 else 0.0,
            "seed": s,
        })
    increasing = all(b["gaussian"] > a["gaussian"] for a, b in zip(rows, rows[1:]))
    return {"experiment": "dichotomy", "rows": rows, "gaussian_increasing": increasing}


def coordinate_family(space):
    """Unit vector basis of a coordinate space (or matrix units for schatten)."""
    space = parse_space(space)
    return np.eye(space.dim, dtype=np.complex128)


def _vector_series_norm(space, family, samples, seed):
    family = np.asarray(family, dtype=np.complex128)
    n = family.shape[0]
    if n <= 12:
        from .series import sign_patterns

        sq = [space.norm(block @ family) ** 2 for block in sign_patterns(n)]
        return math.sqrt(float(np.mean(np.concatenate(sq))))
    vals = []
    for b, count in batches(samples):
        eps = draw(stream(seed, b), "rademacher", (count, n))
        vals.append(space.norm(eps @ family) ** 2)
    return math.sqrt(float(np.mean(np.concatenate(vals))))


@dataclass
class TypeCotypeReport:
    constant: float
    direction: str
    exponent: float
    space: str
    witness_index: int
    values: list

    def to_json(self):
        return asdict(self)


def estimate_type_cotype(space_spec, exponent, direction, families, samples=20000, seed=0):
    """Best empirical type or cotype constant over finite families.

    `families` is either a list of ``(N, dim)`` arrays or a count of random
    complex Gaussian families (N drawn from 1..8).  The series norm is the
    L2 Rademacher average, exact for N <= 12.  Type returns
    ``max seriesNorm / (sum ||x_n||^p)^{1/p}``, cotype
    ``max (sum ||x_n||^q)^{1/q} / seriesNorm``.
    """
    space = parse_space(space_spec)
    exponent = check_exponent(exponent)
    if direction == "type":
        if not 1 <= exponent <= 2:
            raise ValueError("type exponent must lie in [1, 2]")
    elif direction == "cotype":
        if not 2 <= exponent < math.inf:
            raise ValueError("cotype exponent must lie in [2, inf)")
    else:
        raise ValueError("direction must be 'type' or 'cotype'")
    if isinstance(families, int):
        g = stream(seed, "families")
        fams = []
        for _ in range(families):
            n = int(g.integers(1, 9))
            fams.append(g.standard_normal((n, space.dim)) + 1j * g.standard_normal((n, space.dim)))
    else:
        fams = [np.atleast_2d(np.asarray(f, dtype=np.complex128)) for f in families]
    values = []
    for i, fam in enumerate(fams):
        s = _vector_series_norm(space, fam, samples, derive_seed(seed, "family", i))
        norms = space.norm(fam)
        if math.isinf(exponent):
            agg = float(np.max(norms))
        else:
            agg = float(np.sum(norms ** exponent) ** (1.0 / exponent))
        if direction == "type":
            values.append(s / agg if agg > 0 else 0.0)
        else:
            values.append(agg / s if s > 0 else 0.0)
    k = int(np.argmax(values))
    return TypeCotypeReport(float(values[k]), direction, exponent, space.spec(), k, values)


def kahane_experiment(cfg, r1=2.0, r2=4.0):
    """L^{r2}/L^{r1} ratios: scalar all-ones families plus random matrix series."""
    rows = []
    for n in cfg.terms:
        rep = kahane_ratio(np.ones((n, 1, 1)), "rademacher", 2, r1, r2, cfg.samples,
                           cfg.seed, exhaustive=n <= 20)
        rows.append({"family": "scalar_ones", "N": n, "d1": 1, "d2": 1, "exponent": 2.0,
                     **rep.to_json()})
    for p, d1, d2, n, k in _grid(cfg):
        seed = _instance_seed(cfg, "kahane", p, d1, d2, n, k)
        x = random_instance(seed, n, d1, d2)
        rep = kahane_ratio(x, cfg.randomizer, p, r1, r2, cfg.samples, seed)
        rows.append({"family": "random", "N": n, "d1": d1, "d2": d2, "exponent": p,
                     **rep.to_json()})
    return {"experiment": "kahane", "r1": r1, "r2": r2, "rows": rows}


def tails_experiment(cfg, t_multipliers=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0)):
    """Survival profiles on a grid proportional to each series' L2 norm."""
    rows = []
    for p, d1, d2, n, k in _grid(cfg):
        seed = _instance_seed(cfg, "tails", p, d1, d2, n, k)
        x = random_instance(seed, n, d1, d2)
        scale = series_moment(x, cfg.randomizer, p, 2, cfg.samples, seed,
                              exhaustive=False).estimate
        prof = tail_profile(x, cfg.randomizer, p, cfg.samples, seed,
                            [m * scale for m in t_multipliers])
        rows.append({"N": n, "d1": d1, "d2": d2, "exponent": p, "l2_norm": scale,
                     **prof.to_json()})
    return {"experiment": "tails", "randomizer": cfg.randomizer, "rows": rows}


def _records_payload(name, cfg, records):
    return {"experiment": name, "config": cfg.to_dict(),
            "records": [asdict(r) for r in records], "summary": summarize(records)}


def run_experiment(cfg, jobs=1):
    """Run one configured experiment; returns ``(payload, records or None)``."""
    if cfg.name == "thm3":
        recs = verify_thm3(cfg, jobs=jobs)
        return _records_payload("thm3", cfg, recs), recs
    if cfg.name == "thm4":
        recs = verify_thm4(cfg, jobs=jobs)
        return _records_payload("thm4", cfg, recs), recs
    if cfg.name == "counterexample":
        reps = [counterexample_row_column(q, cfg.terms, cfg.seed) for q in cfg.exponents]
        return {"experiment": "counterexample", "reports": reps}, None
    if cfg.name == "dichotomy":
        return dichotomy_demo(cfg.terms, cfg.samples, cfg.seed), None
    if cfg.name == "kahane":
        return kahane_experiment(cfg, **cfg.options.get("kahane", {})), None
    if cfg.name == "tails":
        return tails_experiment(cfg), None
    if cfg.name == "type_cotype":
        opts = cfg.options
        rep = estimate_type_cotype(opts.get("space", "euclidean(4)"), cfg.exponents[0],
                                   opts.get("direction", "type"), cfg.trials, cfg.samples,
                                   cfg.seed)
        return {"experiment": "type_cotype", **rep.to_json()}, None
    if cfg.name == "hardy_umd":
        from .hardy import estimate_analytic_umd_constant

        opts = cfg.options
        rep = estimate_analytic_umd_constant(opts.get("space", "euclidean(2)"),
                                             int(opts.get("degree", 2)), cfg.trials,
                                             int(opts.get("budget", 4)), cfg.seed,
                                             M=int(opts.get("M", 4)),
                                             quadrature_samples=cfg.samples)
        return {"experiment": "hardy_umd", **rep.to_json()}, None
    raise ValueError("unknown experiment %r" % cfg.name)


EXPERIMENTS = ("thm3", "thm4", "counterexample", "dichotomy", "kahane", "tails",
               "type_cotype", "hardy_umd")


def dumps(obj):
    """Canonical JSON text used for every data file."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def format_csv(records):
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r.row()])
    return buf.getvalue()


def write_atomic(path, text):
    """Write via a temporary file in the same directory plus ``os.replace``."""
    path = os.path.abspath(path)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _line_of(text, needle, occurrence=0):
    pos = -1
    for _ in range(occurrence + 1):
        pos = text.find(needle, pos + 1)
        if pos < 0:
            return None
    return text.count("\n", 0, pos) + 1


def load_suite(path):
    """Parse a suite file into ``(configs, raw_text)``.

    Accepts a single experiment object or ``{"seed": s, "experiments": [...]}``
    where a top-level seed is the default for every experiment.
    """
    with open(path) as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno) from None
    if isinstance(obj, dict) and "experiments" in obj:
        entries = obj["experiments"]
        default_seed = obj.get("seed", 0)
        unknown = set(obj) - {"experiments", "seed"}
        if unknown:
            raise ConfigError("unknown suite keys: %s" % ", ".join(sorted(unknown)),
                              _line_of(text, '"%s"' % sorted(unknown)[0]))
    else:
        entries, default_seed = [obj], 0
    if not isinstance(entries, list) or not entries:
        raise ConfigError("experiments must be a nonempty list", _line_of(text, '"experiments"'))
    configs = []
    for i, entry in enumerate(entries):
        line = _line_of(text, '"name"', i)
        if not isinstance(entry, dict):
            raise ConfigError("experiment %d is not an object" % i, line)
        entry = dict(entry)
        entry.setdefault("seed", default_seed)
        entry.setdefault("output_path", "%s.%s" % (entry.get("name", "exp%d" % i),
                                                   entry.get("format", "json")))
        try:
            configs.append(ExperimentConfig.from_dict(entry))
        except (TypeError, ValueError) as exc:
            bad = None
            for key in entry:
                if key in str(exc):
                    bad = _line_of(text, '"%s"' % key, sum(
                        1 for e in entries[:i] if isinstance(e, dict) and key in e))
                    break
            raise ConfigError("experiment %d: %s" % (i, exc), bad or line) from None
    return configs, text


def run_suite(config_file, output_dir=None, jobs=1):
    """Run every experiment in `config_file`; returns a process exit code.

    Data files are written atomically.  ``manifest.json`` next to them
    records the config hash, seeds, library versions, timings and the
    status of each experiment.  Timings live only in the manifest, so data
    files are byte-identical across reruns.
    """
    try:
        configs, text = load_suite(config_file)
    except ConfigError as exc:
        print("%s:%s" % (config_file, exc))
        return 2
    except OSError as exc:
        print("%s: %s" % (config_file, exc))
        return 2
    base = output_dir or os.path.dirname(os.path.abspath(config_file))
    manifest = {
        "config_file": os.path.abspath(config_file),
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "versions": {"schattenlab": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "experiments": [],
    }
    failed = False
    for cfg in configs:
        out = cfg.output_path if os.path.isabs(cfg.output_path) \
            else os.path.join(base, cfg.output_path)
        entry = {"name": cfg.name, "seed": cfg.seed, "output": out}
        t0 = time.time()
        try:
            payload, records = run_experiment(cfg, jobs=jobs)
            if cfg.format == "csv":
                if records is None:
                    raise ValueError("csv output is only available for ratio experiments")
                write_atomic(out, format_csv(records))
            else:
                write_atomic(out, dumps(payload))
            entry["status"] = "ok"
        except Exception as exc:  # recorded per experiment, suite continues
            entry["status"] = "failed"
            entry["error"] = "%s: %s" % (type(exc).__name__, exc)
            failed = True
        entry["wall_seconds"] = round(time.time() - t0, 3)
        manifest["experiments"].append(entry)
    manifest["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    write_atomic(os.path.join(base, "manifest.json"), dumps(manifest))
    return 1 if failed else 0
