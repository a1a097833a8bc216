"""
Randomized-trial campaigns over scaling spectra.

Each trial draws angles, builds the (weighted) average descending
superoperator over the configured cones, diagonalizes it and keeps the
leading ``k`` scaling dimensions. Trial ``i`` uses its own counter-based
generator keyed by ``base_seed + i``, so results do not depend on how trials
are scheduled across workers.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .composition import load_decomposition
from .constituents import DEFAULT_RANGES, ParameterSet
from .errors import HymeraError, SchemaError, SolverError
from .superop import (
    average_superoperator,
    boundary_weights,
    build_descending,
    load_cone,
    model_table,
    scaling_spectrum,
)
from .tiling import load_grammar, scale_factor

log = logging.getLogger(__name__)

N_THETA = 9
FORMATS = ("csv", "json", "plot-data")


@dataclass(frozen=True)
class ExperimentConfig:
    decomposition: str = "YQR"
    tiling: str = "54"
    cones: tuple = ("a",)
    weights: object = "uniform"
    trials: int = 1000
    base_seed: int = 0
    k: int = 8
    theta_ranges: dict = field(default_factory=dict)
    targets: tuple = ("ising", "tricritical-ising", "potts3")
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "cones", tuple(self.cones))
        object.__setattr__(self, "targets", tuple(self.targets))
        ranges = {int(i): (float(lo), float(hi)) for i, (lo, hi) in dict(self.theta_ranges).items()}
        object.__setattr__(self, "theta_ranges", ranges)
        if isinstance(self.weights, (list, tuple)):
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise SchemaError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self, with_workers: bool = True) -> dict:
        d = asdict(self)
        d["cones"] = list(self.cones)
        d["targets"] = list(self.targets)
        d["weights"] = list(self.weights) if isinstance(self.weights, tuple) else self.weights
        d["theta_ranges"] = {str(i): list(r) for i, r in sorted(self.theta_ranges.items())}
        if not with_workers:
            d.pop("workers")
        return d

    def validate(self) -> None:
        """Check every field and every referenced preset before any trial runs."""
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if not self.cones:
            raise ValueError("at least one cone is required")
        for i, (lo, hi) in self.theta_ranges.items():
            if i not in DEFAULT_RANGES or not hi > lo:
                raise ValueError(f"bad range for theta_{i}: {(lo, hi)}")
        for t in self.targets:
            model_table(t)
        self.resolve()

    def resolve(self):
        """Load the decomposition, cones, averaging weights and scale factor."""
        grammar = load_grammar(self.tiling)
        name = self.decomposition
        if "-" not in name:
            name = f"{name}-{self.tiling}"
        dec = load_decomposition(name)
        cones = [load_cone(c) for c in self.cones]
        for c in cones:
            if c.schlafli != (0, 0) and tuple(c.schlafli) != tuple(dec.schlafli):
                raise SchemaError(f"cone {c.id} is for {c.schlafli}, decomposition {dec.name} for {dec.schlafli}")
        if self.weights == "uniform":
            weights = [1.0 / len(cones)] * len(cones)
        elif self.weights == "boundary":
            weights = boundary_weights(cones, grammar)
        elif isinstance(self.weights, tuple) and len(self.weights) == len(cones):
            weights = list(self.weights)
        else:
            raise ValueError(f"weights must be 'uniform', 'boundary' or one number per cone, got {self.weights!r}")
        return dec, cones, weights, scale_factor(grammar)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    seed: int
    decomposition: str
    params: ParameterSet
    magnitudes: tuple = ()
    dimensions: tuple = ()
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


def trial_rng(base_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=base_seed + index))


def run_trial(config: ExperimentConfig, index: int, resolved=None) -> TrialRecord:
    dec, cones, weights, s = resolved or config.resolve()
    seed = config.base_seed + index
    d = dec.sample(trial_rng(config.base_seed, index), config.theta_ranges)
    try:
        op = average_superoperator([build_descending(d, c) for c in cones], weights)
        spec = scaling_spectrum(op, s, config.k, params=d.params)
    except (SolverError, HymeraError, np.linalg.LinAlgError) as exc:
        log.warning("trial %d failed: %s", index, exc)
        return TrialRecord(index, seed, dec.name, d.params, error=f"{type(exc).__name__}: {exc}")
    return TrialRecord(index, seed, dec.name, d.params,
                       tuple(float(x) for x in spec.magnitudes),
                       tuple(float(x) for x in spec.dimensions))


def _run_chunk(args):
    config, indices = args
    resolved = config.resolve()
    return [run_trial(config, i, resolved) for i in indices]


def run_trials(config: ExperimentConfig) -> list:
    """Run every trial of ``config``; records come back sorted by trial id."""
    config.validate()
    indices = list(range(config.trials))
    if config.workers == 1:
        records = _run_chunk((config, indices))
    else:
        chunks = [indices[i::config.workers] for i in range(config.workers)]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = [r for part in pool.map(_run_chunk, [(config, c) for c in chunks]) for r in part]
    return sorted(records, key=lambda r: r.trial_id)


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class EnvelopeSummary:
    decomposition: str
    trials: int
    n_failed: int
    envelopes: list  # per index: {"index", "min", "max", "mean", "std", "n_finite"}
    containment: list  # per target dimension
    primary_pairs: list  # per model: its two lowest dimensions against the Delta_1, Delta_2 envelopes
    config: dict = field(default_factory=dict)

    def envelope(self, index: int) -> dict:
        return self.envelopes[index]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvelopeSummary":
        return cls(**d)


def _stats(values) -> dict:
    finite = sorted(v for v in values if math.isfinite(v))
    if not finite:
        return {"min": None, "max": None, "mean": None, "std": None, "n_finite": 0}
    mean = math.fsum(finite) / len(finite)
    var = math.fsum((v - mean) ** 2 for v in finite) / len(finite)
    # keep the ordering invariant exact under rounding
    mean = min(max(mean, finite[0]), finite[-1])
    return {"min": finite[0], "max": finite[-1], "mean": mean, "std": math.sqrt(var), "n_finite": len(finite)}


def contains(env: dict, value: float) -> bool:
    return env["n_finite"] > 0 and env["min"] <= value <= env["max"]


def summarize(records, targets=("ising", "tricritical-ising", "potts3"), config=None) -> EnvelopeSummary:
    """Envelope statistics per dimension index and containment of CFT targets.

    A target dimension counts as contained when it lies inside the envelope
    of the first or second nontrivial dimension.

    Raises:
        ValueError: no records, or records from several decompositions.
    """
    records = sorted(records, key=lambda r: r.trial_id)
    if not records:
        raise ValueError("cannot summarize an empty record set")
    names = {r.decomposition for r in records}
    if len(names) != 1:
        raise ValueError(f"records mix decompositions: {sorted(names)}")
    ok = [r for r in records if not r.failed]
    k = max((len(r.dimensions) for r in ok), default=0)
    envelopes = [{"index": i, **_stats([r.dimensions[i] for r in ok if i < len(r.dimensions)])} for i in range(k)]

    containment, pairs = [], []
    for model in targets:
        table = model_table(model)
        seen = set()
        for rs, h in sorted(table.entries.items()):
            delta = 2 * h
            if delta == 0 or delta in seen:
                continue
            seen.add(delta)
            inside = [i for i in (1, 2) if i < k and contains(envelopes[i], float(delta))]
            containment.append({"model": model, "rs": list(rs), "delta": str(delta),
                                "value": float(delta), "contained_in": inside, "contained": bool(inside)})
        lo = table.dimensions[:2]
        if len(lo) == 2 and k > 2:
            pairs.append({"model": model, "targets": [str(x) for x in lo],
                          "contained": contains(envelopes[1], float(lo[0])) and contains(envelopes[2], float(lo[1]))})
    return EnvelopeSummary(names.pop(), len(records), len(records) - len(ok), envelopes,
                           containment, pairs, dict(config or {}))


def envelope_shift(a: EnvelopeSummary, b: EnvelopeSummary, indices=(1, 2)) -> float:
    """Largest endpoint difference between two summaries over ``indices``."""
    diffs = []
    for i in indices:
        for key in ("min", "max"):
            x, y = a.envelopes[i][key], b.envelopes[i][key]
            if x is not None and y is not None:
                diffs.append(abs(x - y))
    return max(diffs) if diffs else math.nan


# ---------------------------------------------------------------------------
# serialization


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def report(summary: EnvelopeSummary, records=(), fmt: str = "json") -> str:
    """Serialize a campaign.

    Args:
        summary: envelope summary.
        records: trial records, needed for ``csv`` and ``plot-data``.
        fmt: ``json`` (the summary), ``csv`` (one row per trial and
            dimension index) or ``plot-data`` (trial index against each
            dimension, one column per index).

    Returns:
        The document as text.
    """
    if fmt == "json":
        return json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"
    records = sorted(records, key=lambda r: r.trial_id)
    if fmt == "csv":
        header = ["trial_id", "seed"] + [f"theta{i}" for i in range(1, N_THETA + 1)] + ["index", "magnitude", "delta"]
        rows = []
        for r in records:
            theta = [_fmt(x) if not math.isnan(x) else "" for x in r.params.row()]
            for i, (m, dlt) in enumerate(zip(r.magnitudes, r.dimensions)):
                rows.append([r.trial_id, r.seed, *theta, i, _fmt(m), _fmt(dlt)])
        return _csv(rows, header)
    if fmt == "plot-data":
        k = max((len(r.dimensions) for r in records), default=0)
        rows = [[r.trial_id] + [_fmt(x) for x in r.dimensions] for r in records if not r.failed]
        return _csv(rows, ["trial_index"] + [f"delta_{i}" for i in range(k)])
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def load_summary(path) -> EnvelopeSummary:
    with open(path) as fh:
        return EnvelopeSummary.from_dict(json.load(fh))


def write_outputs(out_dir, summary: EnvelopeSummary, records, figures: bool = True) -> dict:
    """Write results.csv, summary.json, plotdata/delta_<i>.csv and figures.

    Returns:
        Mapping from artifact name to its path.
    """
    out = Path(out_dir)
    (out / "plotdata").mkdir(parents=True, exist_ok=True)
    paths = {"results": out / "results.csv", "summary": out / "summary.json"}
    paths["results"].write_text(report(summary, records, "csv"))
    paths["summary"].write_text(report(summary, records, "json"))
    ok = [r for r in sorted(records, key=lambda r: r.trial_id) if not r.failed]
    for i in range(len(summary.envelopes)):
        p = out / "plotdata" / f"delta_{i}.csv"
        p.write_text(_csv([[r.trial_id, _fmt(r.dimensions[i])] for r in ok], ["trial_index", f"delta_{i}"]))
        paths[f"delta_{i}"] = p
    if figures:
        from .plotting import plot_campaign

        paths["figure"] = plot_campaign(summary, records, out / "figures" / f"{summary.decomposition}_scatter.png")
    return paths


def ising_targets() -> tuple:
    """The two lowest Ising dimensions as exact fractions (1/8, 1)."""
    return tuple(model_table("ising").dimensions[:2])

