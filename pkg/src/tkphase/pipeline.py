"""Run configuration, on-disk formats and the end-to-end commands.

Output layout below the output root::

    samples/<family>/g<idx>.jsonl, manifest.json
    features/<family>/n<n>_r<r>/g<idx>.csv
    graph/<family>/n<n>_r<r>/edges.csv, summary.json, graph.dot
    models/<family>/n<n>_r<r>/g<a>_g<b>.json
    interpret/<family>/<pool>_n<n>_r<r>.csv
    accuracy/<family>/n<n>_r<r>.csv
    circuit/<family>/g<g>_L<L>/bulk.json, environment.json, report.json
"""

from __future__ import annotations

import configparser
import contextlib
import dataclasses
import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import circuits, mps, phasegraph, sampler, shadows, svm

ENV_OUTPUT = "TKPHASE_OUTPUT"
DEFAULT_OUTPUT = "tkphase-out"
SAMPLE_VERSION = 1
FEATURE_VERSION = 1
FEATURE_MAGIC = "# tkphase-features"
POOLS = ("negative", "positive", "label+", "label-")

# spawn keys separating the derived streams of one master seed
_RANDOM_STREAM = 0x52414E44
_TEST_STREAM = 0x54455354
_TRAIN_STREAM = 0x54524E


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (exit code 2)."""


class FormatError(OSError):
    """Unreadable or inconsistent input file (exit code 4)."""


# ---------------------------------------------------------------------------
# configuration


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _optional(conv):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none", "auto") else conv(text)

    return parse


@dataclass(frozen=True)
class RunConfig:
    family: str = mps.SPIN_HALF
    g_count: int = 21
    g_min: float = -1.0
    g_max: float = 1.0
    L: int | None = None  # default 5 (spin-half) or 3 (spin-one)
    samples: int = 100_000
    seed: int = 0
    p_depolarize: float = 0.0
    p_discard_pair: float = 0.0
    stratified: bool = False
    n: int | None = None  # default L
    ranks: tuple[int, ...] | None = None  # default 1..3 (spin-one) or 1..5 (spin-half)
    n_features: int = 30
    C: float = svm.DEFAULT_C
    tol: float = svm.DEFAULT_TOL
    gamma: float = phasegraph.DEFAULT_GAMMA
    weighting: str = "one-sided"
    jackknife: bool = True
    jackknife_blocks: int = 0  # 0: leave one feature vector out
    averaging: str = "overlapping"
    pool: str = "negative"
    budgets: tuple[int, ...] = (30, 100, 300, 1000, 3000, 10_000)
    test_vectors: int = 500
    test_samples: int = 100
    encoding: str | None = None
    gates: str | None = None
    input: str | None = None
    output: str | None = None
    workers: int = 1

    _PARSERS = {
        "family": str,
        "g_count": int,
        "g_min": float,
        "g_max": float,
        "L": _optional(int),
        "samples": int,
        "seed": int,
        "p_depolarize": float,
        "p_discard_pair": float,
        "stratified": _parse_bool,
        "n": _optional(int),
        "ranks": _optional(_parse_ints),
        "n_features": int,
        "C": float,
        "tol": float,
        "gamma": float,
        "weighting": str,
        "jackknife": _parse_bool,
        "jackknife_blocks": int,
        "averaging": str,
        "pool": str,
        "budgets": _parse_ints,
        "test_vectors": int,
        "test_samples": int,
        "encoding": _optional(str),
        "gates": _optional(str),
        "input": _optional(str),
        "output": _optional(str),
        "workers": int,
    }

    def __post_init__(self):
        if self.family not in mps.FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {mps.FAMILIES}")
        if self.g_count < 2:
            raise ConfigError("g_count must be at least 2")
        if not -1 <= self.g_min < self.g_max <= 1:
            raise ConfigError("need -1 <= g_min < g_max <= 1")
        if self.length < 1 or self.cluster_size > self.length or self.cluster_size < 1:
            raise ConfigError(f"need 1 <= n <= L, got n={self.cluster_size}, L={self.length}")
        if any(not 1 <= r <= self.cluster_size for r in self.rank_list):
            raise ConfigError(f"ranks {self.rank_list} must lie in 1..n={self.cluster_size}")
        for name in ("p_depolarize", "p_discard_pair"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.samples < 1 or self.n_features < 2 or self.workers < 1:
            raise ConfigError("samples >= 1, n_features >= 2 and workers >= 1 are required")
        if self.C <= 0 or self.tol <= 0 or self.gamma <= 0:
            raise ConfigError("C, tol and gamma must be positive")
        if self.weighting not in phasegraph.WEIGHTINGS:
            raise ConfigError(f"weighting must be one of {phasegraph.WEIGHTINGS}")
        if self.jackknife_blocks < 0 or self.jackknife_blocks == 1:
            raise ConfigError("jackknife_blocks must be 0 or at least 2")
        if self.averaging not in shadows.AVERAGING_MODES:
            raise ConfigError(f"averaging must be one of {shadows.AVERAGING_MODES}")
        if self.pool not in POOLS:
            raise ConfigError(f"pool must be one of {POOLS}")
        if not self.budgets or min(self.budgets) < 2:
            raise ConfigError("budgets must be a non-empty list of sample counts >= 2")
        if self.encoding is not None and self.encoding not in circuits.ENCODINGS:
            raise ConfigError(f"encoding must be one of {circuits.ENCODINGS}")

    # derived values -------------------------------------------------------

    @property
    def d(self) -> int:
        return mps.local_dim(self.family)

    @property
    def length(self) -> int:
        if self.L is not None:
            return self.L
        return 5 if self.family == mps.SPIN_HALF else 3

    @property
    def cluster_size(self) -> int:
        return self.length if self.n is None else self.n

    @property
    def rank_list(self) -> tuple[int, ...]:
        if self.ranks is not None:
            return tuple(self.ranks)
        top = 5 if self.family == mps.SPIN_HALF else 3
        return tuple(range(1, min(top, self.cluster_size) + 1))

    @property
    def grid(self) -> np.ndarray:
        return np.round(np.linspace(self.g_min, self.g_max, self.g_count), 12)

    @property
    def output_root(self) -> Path:
        return Path(self.output or os.environ.get(ENV_OUTPUT) or DEFAULT_OUTPUT)

    @property
    def input_root(self) -> Path:
        return Path(self.input) if self.input else self.output_root

    @property
    def noise(self) -> sampler.NoiseSpec:
        return sampler.NoiseSpec(self.p_depolarize, self.p_discard_pair)

    def grid_seed(self, index: int) -> int:
        return derived_seed(self.seed, index)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    @classmethod
    def from_mapping(cls, values: dict[str, str | Any]) -> "RunConfig":
        """Build from string values (config file) or already-typed values (flags)."""
        kwargs = {}
        for key, raw in values.items():
            if key not in cls._PARSERS:
                raise ConfigError(f"unknown configuration key {key!r}")
            try:
                kwargs[key] = cls._PARSERS[key](raw) if isinstance(raw, str) else raw
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        return cls(**kwargs)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def derived_seed(master: int, *key: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=key).generate_state(1, np.uint32)[0])


def read_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` and ``;`` start comments; no sections."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (C, L)
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if cp.sections() != ["run"]:
        raise ConfigError("config files take plain key = value lines, not [sections]")
    return dict(cp["run"])


def load_config(path: str | os.PathLike | None = None, **overrides) -> RunConfig:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(read_config_text(text))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_mapping(values)


# ---------------------------------------------------------------------------
# atomic files


@contextlib.contextmanager
def atomic_writer(path: str | os.PathLike, mode: str = "w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_text(path: str | os.PathLike, text: str) -> Path:
    with atomic_writer(path) as fh:
        fh.write(text)
    return Path(path)


# ---------------------------------------------------------------------------
# sample JSONL


def _int_list(row: np.ndarray) -> str:
    return ",".join(map(str, row.tolist()))


def samples_to_jsonl(samples: sampler.SampleSet) -> Iterable[str]:
    head = '{"v":%d,"fam":%s,"g":%s,"d":%d,"L":%d,' % (
        SAMPLE_VERSION,
        json.dumps(samples.family),
        json.dumps(samples.g),
        samples.d,
        samples.L,
    )
    tail = ',"src":%s}\n' % json.dumps(samples.source)
    for b, o in zip(samples.basis, samples.outcome):
        yield f'{head}"basis":[{_int_list(b)}],"out":[{_int_list(o)}]{tail}'


def pairs_to_jsonl(records: Sequence[sampler.PairRecord], family: str | None, g: float | None) -> Iterable[str]:
    """Qubit-pair variant: ``pairs`` holds one two-character outcome per spin-1 site."""
    for rec in records:
        doc = {
            "v": SAMPLE_VERSION,
            "fam": family,
            "g": g,
            "d": 3,
            "L": len(rec.pairs),
            "basis": list(rec.basis),
            "pairs": list(rec.pairs),
            "src": "experiment",
        }
        yield json.dumps(doc, separators=(",", ":")) + "\n"


def write_samples(path: str | os.PathLike, samples: sampler.SampleSet) -> Path:
    with atomic_writer(path) as fh:
        fh.writelines(samples_to_jsonl(samples))
    return Path(path)


def write_pair_records(path, records, family=mps.SPIN_ONE, g=None) -> Path:
    with atomic_writer(path) as fh:
        fh.writelines(pairs_to_jsonl(records, family, g))
    return Path(path)


def read_samples(path: str | os.PathLike) -> sampler.SampleSet:
    """Read a JSONL sample file; qubit-pair lines are decoded and ``|11>`` records dropped.

    The discard fraction of pair records is stored in ``meta["discard_fraction"]``.
    """
    path = Path(path)
    basis, out, pairs = [], [], []
    first = None
    try:
        fh = path.open()
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc.msg}") from None
            if doc.get("v") != SAMPLE_VERSION:
                raise FormatError(f"{path}:{lineno}: unsupported sample version {doc.get('v')!r}")
            key = (doc.get("fam"), doc.get("g"), doc.get("d"), doc.get("L"), doc.get("src"))
            if first is None:
                first = key
            elif key != first:
                raise FormatError(f"{path}:{lineno}: header fields differ from the first line")
            if "pairs" in doc:
                pairs.append(sampler.PairRecord(tuple(doc["basis"]), tuple(doc["pairs"])))
            else:
                if len(doc["basis"]) != doc["L"] or len(doc["out"]) != doc["L"]:
                    raise FormatError(f"{path}:{lineno}: row length differs from L={doc['L']}")
                basis.append(doc["basis"])
                out.append(doc["out"])
    if first is None:
        raise FormatError(f"{path}: no samples")
    fam, g, d, L, src = first
    if pairs and basis:
        raise FormatError(f"{path}: mixes qubit-pair and plain lines")
    try:
        if pairs:
            ss, frac = sampler.decode_qubit_pairs(pairs, family=fam, g=g, source=src)
            if ss is None:
                raise FormatError(f"{path}: every qubit-pair record was discarded")
            ss.meta["discard_fraction"] = frac
            return ss
        return sampler.SampleSet(
            int(d), np.array(basis, dtype=np.int8), np.array(out, dtype=np.int8), fam, g, None, src
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# feature CSV


@dataclass(frozen=True)
class FeatureFile:
    family: str | None
    g: float | None
    d: int
    L: int
    n: int
    r: int
    averaging: str
    samples_per_vector: int
    names: tuple[str, ...]
    values: np.ndarray  # (N_f, dim)


def write_features(path, ff: FeatureFile) -> Path:
    meta = {
        "fam": ff.family,
        "g": ff.g,
        "d": ff.d,
        "L": ff.L,
        "n": ff.n,
        "r": ff.r,
        "averaging": ff.averaging,
        "samples_per_vector": ff.samples_per_vector,
    }
    with atomic_writer(path) as fh:
        fh.write(f"{FEATURE_MAGIC} v{FEATURE_VERSION} {json.dumps(meta, separators=(',', ':'))}\n")
        fh.write(",".join(ff.names) + "\n")
        for row in ff.values:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return Path(path)


def read_features(path) -> FeatureFile:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc.strerror}") from None
    if len(lines) < 2 or not lines[0].startswith(FEATURE_MAGIC):
        raise FormatError(f"{path}: not a feature file")
    tag, _, meta_text = lines[0][len(FEATURE_MAGIC) :].strip().partition(" ")
    if tag != f"v{FEATURE_VERSION}":
        raise FormatError(f"{path}: unsupported feature version {tag!r}")
    try:
        meta = json.loads(meta_text)
        names = tuple(lines[1].split(","))
        basis = mps.operator_basis(meta["d"])
        for name in names:
            shadows.parse_component_name(name, basis)
        rows = [[float(x) for x in ln.split(",")] for ln in lines[2:] if ln.strip()]
        values = np.array(rows, dtype=float).reshape(len(rows), len(names))
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    if names != tuple(shadows.component_names(meta["n"], meta["r"], basis)):
        raise FormatError(f"{path}: component header does not match n={meta['n']}, r={meta['r']}")
    return FeatureFile(
        meta["fam"],
        meta["g"],
        meta["d"],
        meta["L"],
        meta["n"],
        meta["r"],
        meta["averaging"],
        meta["samples_per_vector"],
        names,
        values,
    )


# ---------------------------------------------------------------------------
# paths


def sample_dir(cfg: RunConfig, root: Path | None = None) -> Path:
    return (root or cfg.output_root) / "samples" / cfg.family


def sample_path(cfg: RunConfig, index: int, root: Path | None = None) -> Path:
    return sample_dir(cfg, root) / f"g{index:02d}.jsonl"


def feature_path(cfg: RunConfig, n: int, r: int, index: int, root: Path | None = None) -> Path:
    return (root or cfg.output_root) / "features" / cfg.family / f"n{n}_r{r}" / f"g{index:02d}.csv"


def graph_dir(cfg: RunConfig, n: int, r: int) -> Path:
    return cfg.output_root / "graph" / cfg.family / f"n{n}_r{r}"


def _executor(cfg: RunConfig):
    return ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else contextlib.nullcontext(None)


# ---------------------------------------------------------------------------
# commands


def generate_set(cfg: RunConfig, g: float, seed: int) -> sampler.SampleSet:
    fam = mps.right_canonicalize(mps.build_family(cfg.family, float(g)))
    noise = sampler.NoiseSpec(cfg.p_depolarize)
    return sampler.sample_mub(fam, cfg.length, cfg.samples, seed, noise, stratified=cfg.stratified)


def cmd_generate(cfg: RunConfig) -> dict:
    """One JSONL file per grid point plus a manifest with seeds and counts.

    With ``p_discard_pair > 0`` (spin-one only) files are written in the
    qubit-pair variant with that fraction of records made invalid.
    """
    if cfg.p_discard_pair > 0 and cfg.family != mps.SPIN_ONE:
        raise ConfigError("qubit-pair records only exist for spin-one")
    files = []
    for idx, g in enumerate(cfg.grid):
        seed = cfg.grid_seed(idx)
        ss = generate_set(cfg, g, seed)
        path = sample_path(cfg, idx)
        if cfg.p_discard_pair > 0:
            recs = sampler.encode_qubit_pairs(ss, cfg.p_discard_pair, seed)
            write_pair_records(path, recs, cfg.family, float(g))
        else:
            write_samples(path, ss)
        files.append({"file": path.name, "g": float(g), "seed": seed, "count": len(ss)})
    manifest = {
        "v": 1,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "family": cfg.family,
        "L": cfg.length,
        "stratified": cfg.stratified,
        "strata": (cfg.d + 1) ** cfg.length if cfg.stratified else None,
        "config": cfg.to_dict(),
        "files": files,
    }
    write_text(sample_dir(cfg) / "manifest.json", json.dumps(manifest, indent=2, default=list))
    return manifest


def batch_feature_matrix(samples: sampler.SampleSet, n_features: int, n: int, r: int, averaging: str) -> np.ndarray:
    table = shadows.build_table(mps.operator_basis(samples.d), shadows.mub_set(samples.d))
    return shadows.stack(shadows.batch_features(samples, n_features, n, r, table, averaging))


def cmd_features(cfg: RunConfig) -> list[Path]:
    """Feature CSVs for every grid point and every configured rank."""
    basis = mps.operator_basis(cfg.d)
    table = shadows.build_table(basis, shadows.mub_set(cfg.d))
    n = cfg.cluster_size
    written = []
    for idx, g in enumerate(cfg.grid):
        ss = read_samples(sample_path(cfg, idx, cfg.input_root))
        if ss.d != cfg.d or ss.L != cfg.length:
            raise FormatError(f"sample file g{idx:02d} has (d, L) = ({ss.d}, {ss.L}), config expects ({cfg.d}, {cfg.length})")
        per = len(ss) // cfg.n_features
        for r in cfg.rank_list:
            vecs = shadows.batch_features(ss, cfg.n_features, n, r, table, cfg.averaging)
            ff = FeatureFile(
                cfg.family,
                float(g),
                cfg.d,
                cfg.length,
                n,
                r,
                cfg.averaging,
                per,
                tuple(shadows.component_names(n, r, basis)),
                shadows.stack(vecs),
            )
            written.append(write_features(feature_path(cfg, n, r, idx), ff))
    return written


def load_feature_sets(cfg: RunConfig, n: int, r: int) -> list[FeatureFile]:
    files = [read_features(feature_path(cfg, n, r, idx, cfg.input_root)) for idx in range(cfg.g_count)]
    shapes = {(f.d, f.L, f.n, f.r) for f in files}
    if len(shapes) != 1:
        raise FormatError(f"feature files disagree on (d, L, n, r): {sorted(shapes)}")
    return files


def _grid_index(cfg: RunConfig, g: float) -> int:
    hits = np.flatnonzero(np.isclose(cfg.grid, g, atol=1e-9))
    if hits.size == 0:
        raise ConfigError(f"g={g} is not on the configured grid")
    return int(hits[0])


@dataclass(frozen=True)
class PairResult:
    g_a: float
    g_b: float
    bias: float
    weight: float
    accuracy: float
    model: svm.SvmModel = field(repr=False)


def cmd_classify_pair(cfg: RunConfig, g_a: float, g_b: float, rank: int | None = None) -> PairResult:
    r = rank or cfg.rank_list[-1]
    n = cfg.cluster_size
    ia, ib = _grid_index(cfg, g_a), _grid_index(cfg, g_b)
    fa = read_features(feature_path(cfg, n, r, ia, cfg.input_root))
    fb = read_features(feature_path(cfg, n, r, ib, cfg.input_root))
    model = svm.train(fa.values, fb.values, cfg.C, cfg.tol)
    acc = float(np.mean(svm.predict(model, model.features) == model.labels))
    weight = phasegraph.lorentzian_weight(abs(model.bias), cfg.gamma, cfg.weighting)
    # relative to the input root so results do not depend on where the tree lives
    names = [str(feature_path(cfg, n, r, i, Path("."))) for i in (ia, ib)]
    path = cfg.output_root / "models" / cfg.family / f"n{n}_r{r}" / f"g{ia:02d}_g{ib:02d}.json"
    write_text(path, svm.model_to_json(model, len(fa.values), names))
    return PairResult(float(g_a), float(g_b), float(model.bias), float(weight), acc, model)


def cmd_phase_graph(cfg: RunConfig, rank: int | None = None) -> dict[int, phasegraph.Partition]:
    """Bias graph, Fiedler partition and jackknife errors for each configured rank."""
    n = cfg.cluster_size
    ranks = (rank,) if rank else cfg.rank_list
    out = {}
    for r in ranks:
        files = load_feature_sets(cfg, n, r)
        with _executor(cfg) as ex:
            graph = phasegraph.build_graph(
                [f.g for f in files],
                [f.values for f in files],
                cfg.C,
                cfg.gamma,
                cfg.tol,
                weighting=cfg.weighting,
                jackknife=cfg.jackknife,
                jackknife_blocks=cfg.jackknife_blocks or None,
                executor=ex,
            )
        part = phasegraph.fiedler_partition(graph)
        gd = graph_dir(cfg, n, r)
        write_text(gd / "edges.csv", phasegraph.edges_csv(graph))
        write_text(gd / "summary.json", phasegraph.summary_json(graph, part))
        write_text(gd / "graph.dot", phasegraph.to_dot(graph))
        out[r] = part
    return out


@dataclass(frozen=True)
class InterpretResult:
    coefficients: svm.CoefficientVector
    ranked: list[tuple[str, float]]
    pooled_g: tuple[float, ...]
    top_to_median: float


def _pooled_indices(cfg: RunConfig, n: int, r: int) -> list[int]:
    if cfg.pool == "negative":
        return [i for i, g in enumerate(cfg.grid) if g < 0]
    if cfg.pool == "positive":
        return [i for i, g in enumerate(cfg.grid) if g > 0]
    summary = graph_dir(cfg, n, r) / "summary.json"
    try:
        labels = json.loads(summary.read_text())["labels"]
    except OSError as exc:
        raise FormatError(f"cannot read {summary}: {exc.strerror}") from None
    want = 1 if cfg.pool == "label+" else -1
    return [i for i, lab in enumerate(labels) if lab == want]


def cmd_interpret(cfg: RunConfig, rank: int | None = None) -> InterpretResult:
    """Pool one phase's feature vectors, train against uniform random snapshots, rank ``|C_mu|``."""
    n = cfg.cluster_size
    r = rank or cfg.rank_list[-1]
    idx = _pooled_indices(cfg, n, r)
    if not idx:
        raise ConfigError(f"pool {cfg.pool!r} selects no grid points")
    files = [read_features(feature_path(cfg, n, r, i, cfg.input_root)) for i in idx]
    if len({(f.d, f.L, f.n, f.r, f.averaging) for f in files}) != 1:
        raise FormatError("pooled feature files are incompatible")
    phase = np.vstack([f.values for f in files])
    per = files[0].samples_per_vector
    rnd = sampler.sample_random_uniform(cfg.d, cfg.length, per * len(phase), derived_seed(cfg.seed, _RANDOM_STREAM))
    random_feats = batch_feature_matrix(rnd, len(phase), n, r, cfg.averaging)
    model = svm.train(phase, random_feats, cfg.C, cfg.tol)
    basis = mps.operator_basis(cfg.d)
    coef = svm.mask_redundant(svm.coefficient_vector_for(model, n, r, basis), basis)
    ranked = coef.ranked()
    mags = np.abs([v for _, v in ranked])
    ratio = float(mags[0] / np.median(mags)) if len(mags) and np.median(mags) > 0 else float("inf")
    rows = ["rank,name,coefficient,masked"]
    for k, i in enumerate(np.argsort(-np.abs(coef.values), kind="stable"), 1):
        rows.append(f"{k},{coef.names[i]},{float(coef.values[i])!r},{int(coef.mask[i])}")
    write_text(cfg.output_root / "interpret" / cfg.family / f"{cfg.pool}_n{n}_r{r}.csv", "\n".join(rows) + "\n")
    return InterpretResult(coef, ranked, tuple(float(files[k].g) for k in range(len(idx))), ratio)


def cmd_analytic(family: str, g: float, lengths: Sequence[int] = (3, 4, 5, 6)) -> dict:
    """Closed-form string order next to transfer contractions of the string operator.

    For spin-one the squared-operator string is compared to ``(-1)^r`` times
    the phase string at every length ``r`` in ``lengths``.
    """
    fam = mps.build_family(family, g)
    tm = mps.transfer_fixed_points(fam)
    report: dict[str, Any] = {"family": family, "g": g, "closed_form": mps.string_order_closed_form(family, g)}
    contractions = {}
    for r in range(max(4, min(lengths)) if family == mps.SPIN_HALF else 2, 9):
        contractions[r] = mps.expectation(tm, mps.string_operator(family, r))
    report["contraction"] = contractions
    # the phase string of the stated spin-one tensors contracts to minus the closed form
    sign = 1.0 if family == mps.SPIN_HALF else -1.0
    report["contraction_sign"] = sign
    report["max_deviation"] = max(abs(v - sign * report["closed_form"]) for v in contractions.values())
    if family == mps.SPIN_ONE:
        checks = {}
        for r in lengths:
            sq = mps.expectation(tm, mps.string_operator(family, r, "squared"))
            ph = mps.expectation(tm, mps.string_operator(family, r, "phase"))
            checks[r] = {"squared": sq, "phase": ph, "difference": abs(sq - (-1) ** r * ph)}
        report["squared_vs_phase"] = checks
    return report


@dataclass(frozen=True)
class AccuracyRow:
    budget: int
    n_features: int
    samples_per_vector: int
    accuracy: float
    stderr: float
    failed_replicates: int = 0


def _accuracy(model: svm.SvmModel, test_a: np.ndarray, test_b: np.ndarray) -> float:
    hits = np.sum(svm.predict(model, test_a) < 0) + np.sum(svm.predict(model, test_b) > 0)
    return float(hits / (len(test_a) + len(test_b)))


def cmd_accuracy(cfg: RunConfig, rank: int | None = None) -> list[AccuracyRow]:
    """Accuracy against a clean test set as a function of the training budget.

    The two classes are the grid end points.  For a budget of ``M`` samples per
    class, the first ``M`` noisy training snapshots of each class form
    ``min(N_f, M)`` feature vectors.  Test vectors use ``test_samples`` clean
    snapshots each.  Errors are leave-one-training-vector-out jackknife errors;
    replicates whose solve hits the update cap are left out and counted.
    """
    n = cfg.cluster_size
    r = rank or cfg.rank_list[0]
    big = max(cfg.budgets)
    train, test = [], []
    for label, g in enumerate((cfg.g_min, cfg.g_max)):
        fam = mps.right_canonicalize(mps.build_family(cfg.family, g))
        train.append(
            sampler.sample_mub(
                fam, cfg.length, big, derived_seed(cfg.seed, _TRAIN_STREAM, label), sampler.NoiseSpec(cfg.p_depolarize)
            )
        )
        clean = sampler.sample_mub(
            fam, cfg.length, cfg.test_vectors * cfg.test_samples, derived_seed(cfg.seed, _TEST_STREAM, label)
        )
        test.append(batch_feature_matrix(clean, cfg.test_vectors, n, r, cfg.averaging))
    rows = []
    for m in sorted(cfg.budgets):
        nf = min(cfg.n_features, m)
        fa = batch_feature_matrix(train[0][:m], nf, n, r, cfg.averaging)
        fb = batch_feature_matrix(train[1][:m], nf, n, r, cfg.averaging)
        model = svm.train(fa, fb, cfg.C, cfg.tol)
        acc = _accuracy(model, *test)
        reps, failed = [], 0
        x = np.vstack([fa, fb])
        for k in range(len(x)):
            keep = np.delete(np.arange(len(x)), k)
            na = nf - (k < nf)
            warm = np.delete(model.dual, k)
            try:
                sub = svm.train(x[keep[:na]], x[keep[na:]], cfg.C, cfg.tol, warm_start=warm)
            except svm.ConvergenceError:
                failed += 1  # dropped from the error estimate and reported
                continue
            reps.append(_accuracy(sub, *test))
        se = float(phasegraph.jackknife_se(np.array(reps))) if len(reps) >= 2 else float("nan")
        rows.append(AccuracyRow(m, nf, m // nf, acc, se, failed))
    lines = ["budget,n_features,samples_per_vector,accuracy,jackknife_se,failed_replicates"]
    lines += [
        f"{a.budget},{a.n_features},{a.samples_per_vector},{a.accuracy!r},{a.stderr!r},{a.failed_replicates}"
        for a in rows
    ]
    write_text(cfg.output_root / "accuracy" / cfg.family / f"n{n}_r{r}.csv", "\n".join(lines) + "\n")
    return rows


def cmd_circuit(cfg: RunConfig, g: float) -> dict:
    """Bulk and environment unitaries, statevector verification and an optional transpile report."""
    fam = mps.right_canonicalize(mps.build_family(cfg.family, g))
    encoding = cfg.encoding or ("two-qubit" if cfg.family == mps.SPIN_HALF else "two-qutrit")
    if circuits.encoding_family(encoding) != cfg.family:
        raise ConfigError(f"encoding {encoding!r} does not fit family {cfg.family!r}")
    bulk = circuits.unitarize(fam, encoding)
    env = circuits.environment_unitary(mps.transfer_fixed_points(fam), encoding)
    small = (cfg.d + 1) ** cfg.length * cfg.d**cfg.length <= 10**6
    check = circuits.simulate_and_verify(fam, cfg.length, encoding, bulk, env, distributions=small)
    report: dict[str, Any] = {
        "family": cfg.family,
        "g": float(g),
        "L": cfg.length,
        "encoding": encoding,
        "fidelity": check.fidelity,
        "infidelity": 1 - check.fidelity,
        "leakage": check.leakage,
        "tv_distance": check.tv_distance if small else None,
        "bulk_unitarity_error": bulk.unitarity_error(),
        "environment_unitarity_error": env.unitarity_error(),
    }
    cd = cfg.output_root / "circuit" / cfg.family / f"g{g:+.3f}_L{cfg.length}"
    write_text(cd / "bulk.json", circuits.unitary_to_json(bulk))
    write_text(cd / "environment.json", circuits.unitary_to_json(env))
    if cfg.gates:
        try:
            gl = circuits.gatelist_from_json(Path(cfg.gates).read_text())
        except OSError as exc:
            raise FormatError(f"cannot read gate list {cfg.gates}: {exc.strerror}") from None
        out = circuits.transpile(gl)
        lo, hi = circuits.gate_budget(encoding, "bulk", g)
        report["transpile"] = {
            "gates_before": len(gl.gates),
            "gates_after": len(out.gates),
            "entangling": circuits.count_entangling(out),
            "entangling_budget": [lo, hi],
            "within_budget": circuits.within_budget(out, encoding, "bulk", g),
            "phase_distance": circuits.phase_distance(circuits.gatelist_unitary(gl), circuits.gatelist_unitary(out)),
        }
        write_text(cd / "transpiled.json", circuits.gatelist_to_json(out))
    write_text(cd / "report.json", json.dumps(report, indent=2))
    return report
