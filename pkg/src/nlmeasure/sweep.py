"""Config-driven sweeps over (model, alpha, measure) with CSV output.

A sweep crosses a model list with a log-spaced alpha grid and a measure
list.  Every grid point owns a seed derived from (base seed, model,
variant, alpha), so any single row can be recomputed independently and
measures evaluated at the same point share one Monte Carlo pass.  An
optional envelope scan records, per alpha, the min/max of the normalized
classic measure over a grid of unit scales for one output component.

Config files are INI-style text::

    [sweep]
    models = cart2polar_rad, cart2polar_deg
    alpha_start = 1e-4
    alpha_stop = 1e2
    alpha_points = 25
    measures = orig_normalized, diag, full, family(0.6,0.4)
    samples = 1000000
    seed = 7
    out = sweep.csv

    [envelope]                  ; optional section
    models = cart2polar_rad
    component = 1
    exp_min = -10
    exp_max = 10
    points = 61

Model entries may carry a unit variant after a colon (``gmti:km_deg_kmh``).
CSV schema: ``model,variant,alpha,measure,weight,value,bound,j_det,j_sto,
n_samples,seed,error`` with floats at 17 significant digits and ``#``
metadata lines before the header.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import NoClosedFormError
from .measures import (
    MonResult,
    WeightMatrix,
    compute_mon,
    weight_diag,
    weight_family,
    weight_full,
    weight_identity,
    weight_legacy,
)
from .models import MODEL_VARIANTS, builtin_model
from .moments import MomentEstimates, estimate_moments, rescale_outputs

CSV_COLUMNS = (
    "model",
    "variant",
    "alpha",
    "measure",
    "weight",
    "value",
    "bound",
    "j_det",
    "j_sto",
    "n_samples",
    "seed",
    "error",
)

MEASURE_KINDS = ("orig", "orig_normalized", "diag", "full", "family", "general")

DEFAULT_SAMPLES = 1_000_000


def derive_point_seed(base_seed: int, model: str, alpha: float) -> int:
    """Deterministic 63-bit seed for one sweep point.

    Derived from the alpha value (17 significant digits), not its grid
    index, so a single `compute` call reproduces any sweep row exactly.
    Neither the measure nor the unit variant enters: all measures at a
    point share one moment run, and unit variants of the same model run on
    common random numbers (which is what makes their comparison a
    statement about units rather than about sampling noise).
    """
    key = f"{base_seed}|{model}|{alpha:.17g}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


@dataclass(frozen=True)
class Measure:
    """A parsed measure request: the kind plus any family parameters."""

    kind: str
    alphas: tuple[float, ...] | None = None

    @property
    def token(self) -> str:
        if self.kind == "family" and self.alphas is not None:
            return "family(" + ",".join(repr(a) for a in self.alphas) + ")"
        return self.kind

    @classmethod
    def parse(cls, token: str) -> "Measure":
        token = token.strip()
        if token.startswith("family(") and token.endswith(")"):
            inner = token[len("family(") : -1]
            alphas = tuple(float(part) for part in inner.split(",") if part.strip())
            if not alphas:
                raise ValueError(f"empty family alpha list in {token!r}")
            return cls(kind="family", alphas=alphas)
        if token not in MEASURE_KINDS:
            raise ValueError(f"unknown measure {token!r}; known: {', '.join(MEASURE_KINDS)}")
        return cls(kind=token)


def weight_for_measure(measure: Measure, est: MomentEstimates) -> WeightMatrix:
    if measure.kind == "orig":
        return weight_identity(est.n_y)
    if measure.kind == "orig_normalized":
        return weight_legacy(est)
    if measure.kind == "diag":
        return weight_diag(est)
    if measure.kind == "full":
        return weight_full(est)
    if measure.kind == "family":
        alphas = measure.alphas or tuple(1.0 / est.n_y for _ in range(est.n_y))
        return weight_family(est, np.asarray(alphas))
    if measure.kind == "general":
        raise NoClosedFormError("no closed form for general noise")
    raise ValueError(f"unknown measure kind {measure.kind!r}")


def _split_top_level(text: str) -> list[str]:
    """Split a comma list, ignoring commas inside parentheses."""
    parts, depth, current = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    tail = "".join(current).strip()
    if tail:
        parts.append(tail)
    return [p for p in parts if p]


def _parse_model_entry(entry: str) -> tuple[str, str]:
    name, _, variant = entry.partition(":")
    name = name.strip()
    variant = variant.strip() or "native"
    if name not in MODEL_VARIANTS:
        raise ValueError(f"unknown model {name!r}")
    if variant not in MODEL_VARIANTS[name]:
        raise ValueError(f"unknown variant {variant!r} for model {name!r}")
    return name, variant


@dataclass
class EnvelopeSpec:
    """Per-alpha min/max scan of the normalized classic measure over a
    log grid of unit scale factors applied to one output component."""

    models: list[tuple[str, str]]
    component: int = 1
    exp_min: float = -10.0
    exp_max: float = 10.0
    points: int = 61

    def validate(self):
        if not np.isfinite([self.exp_min, self.exp_max]).all():
            raise ValueError("envelope exponent range must be finite")
        if self.exp_min >= self.exp_max:
            raise ValueError("envelope exponent range must be increasing")
        if not 1 <= self.points <= 1000:
            raise ValueError("envelope scan allows at most 1000 points")
        if self.component < 0:
            raise ValueError("envelope component must be a valid output index")

    def factors(self) -> np.ndarray:
        return np.logspace(self.exp_min, self.exp_max, self.points)


@dataclass
class SweepConfig:
    models: list[tuple[str, str]]
    alpha_start: float
    alpha_stop: float
    alpha_points: int
    measures: list[Measure]
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    out: str | None = None
    envelope: EnvelopeSpec | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.models:
            raise ValueError("sweep needs at least one model")
        if not self.measures:
            raise ValueError("sweep needs at least one measure")
        if self.alpha_points < 1:
            raise ValueError("alpha grid needs at least one point")
        if not (self.alpha_start > 0.0 and np.isfinite(self.alpha_start)):
            raise ValueError("alpha grid must be strictly positive")
        if self.alpha_points > 1 and not self.alpha_stop > self.alpha_start:
            raise ValueError("alpha grid must be increasing")
        if self.n_samples < 2:
            raise ValueError("samples must be at least 2")
        if self.envelope is not None:
            self.envelope.validate()

    def alpha_grid(self) -> np.ndarray:
        if self.alpha_points == 1:
            return np.array([self.alpha_start])
        return np.logspace(
            np.log10(self.alpha_start), np.log10(self.alpha_stop), self.alpha_points
        )

    @classmethod
    def from_file(cls, path: str) -> "SweepConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        read = parser.read(path)
        if not read:
            raise ValueError(f"cannot read config file {path!r}")
        if "sweep" not in parser:
            raise ValueError("config needs a [sweep] section")
        sweep = parser["sweep"]
        models = [_parse_model_entry(e) for e in _split_top_level(sweep.get("models", ""))]
        measures = [Measure.parse(t) for t in _split_top_level(sweep.get("measures", ""))]
        envelope = None
        if "envelope" in parser:
            env = parser["envelope"]
            env_models = [_parse_model_entry(e) for e in _split_top_level(env.get("models", ""))]
            envelope = EnvelopeSpec(
                models=env_models or list(models),
                component=env.getint("component", 1),
                exp_min=env.getfloat("exp_min", -10.0),
                exp_max=env.getfloat("exp_max", 10.0),
                points=env.getint("points", 61),
            )
        return cls(
            models=models,
            alpha_start=sweep.getfloat("alpha_start", 1.0),
            alpha_stop=sweep.getfloat("alpha_stop", 1.0),
            alpha_points=sweep.getint("alpha_points", 1),
            measures=measures,
            n_samples=sweep.getint("samples", DEFAULT_SAMPLES),
            seed=sweep.getint("seed", 0),
            out=sweep.get("out", None),
            envelope=envelope,
        )


@dataclass(frozen=True)
class SweepRecord:
    """One CSV row: a measure value at a sweep point, or an error."""

    model: str
    variant: str
    alpha: float
    measure: str
    weight: str = ""
    value: float | None = None
    bound: float | None = None
    j_det: float | None = None
    j_sto: float | None = None
    n_samples: int | None = None
    seed: int | None = None
    error: str = ""

    def to_csv_row(self) -> list[str]:
        fmt = lambda x: "" if x is None else f"{x:.17g}"
        return [
            self.model,
            self.variant,
            fmt(self.alpha),
            self.measure,
            self.weight,
            fmt(self.value),
            fmt(self.bound),
            fmt(self.j_det),
            fmt(self.j_sto),
            "" if self.n_samples is None else str(self.n_samples),
            "" if self.seed is None else str(self.seed),
            self.error,
        ]

    @classmethod
    def from_csv_row(cls, row: list[str]) -> "SweepRecord":
        opt = lambda s: None if s == "" else float(s)
        return cls(
            model=row[0],
            variant=row[1],
            alpha=float(row[2]),
            measure=row[3],
            weight=row[4],
            value=opt(row[5]),
            bound=opt(row[6]),
            j_det=opt(row[7]),
            j_sto=opt(row[8]),
            n_samples=None if row[9] == "" else int(row[9]),
            seed=None if row[10] == "" else int(row[10]),
            error=row[11],
        )


def _record_from_result(
    model: str, variant: str, alpha: float, measure: Measure, result: MonResult
) -> SweepRecord:
    return SweepRecord(
        model=model,
        variant=variant,
        alpha=alpha,
        measure=measure.token,
        weight=result.weight_provenance,
        value=result.value,
        bound=result.bound,
        j_det=result.j_det,
        j_sto=result.j_sto,
        n_samples=result.n_samples,
        seed=result.seed,
    )


def _estimate_point(
    model_name: str, variant: str, alpha: float, n_samples: int, base_seed: int
) -> MomentEstimates:
    seed = derive_point_seed(base_seed, model_name, alpha)
    model = builtin_model(model_name, alpha, variant if variant != "native" else None)
    return estimate_moments(model, n_samples, seed)


def run_point(
    model_name: str,
    alpha: float,
    measure: Measure | str,
    n_samples: int = DEFAULT_SAMPLES,
    base_seed: int = 0,
    variant: str = "native",
) -> SweepRecord:
    """Evaluate one (model, alpha, measure) point, catching evaluation errors.

    The point's seed comes from derive_point_seed, so the record is
    identical to the matching row of any sweep with the same base seed.
    """
    if isinstance(measure, str):
        measure = Measure.parse(measure)
    try:
        est = _estimate_point(model_name, variant, alpha, n_samples, base_seed)
        result = compute_mon(est, weight_for_measure(measure, est))
        return _record_from_result(model_name, variant, alpha, measure, result)
    except ValueError as exc:
        return SweepRecord(
            model=model_name,
            variant=variant,
            alpha=alpha,
            measure=measure.token,
            error=str(exc),
        )


def _envelope_records(
    model_name: str,
    variant: str,
    alpha: float,
    est: MomentEstimates,
    spec: EnvelopeSpec,
) -> list[SweepRecord]:
    if spec.component >= est.n_y:
        return [
            SweepRecord(
                model=model_name,
                variant=variant,
                alpha=alpha,
                measure="envelope_min",
                error=f"envelope component {spec.component} out of range for n_y={est.n_y}",
            )
        ]
    values = []
    for factor in spec.factors():
        factors = np.ones(est.n_y)
        factors[spec.component] = factor
        scaled = rescale_outputs(est, factors)
        values.append(compute_mon(scaled, weight_legacy(scaled)).value)
    lo, hi = float(np.min(values)), float(np.max(values))
    common = dict(
        model=model_name,
        variant=variant,
        alpha=alpha,
        weight="legacy_normalized",
        bound=1.0,
        n_samples=est.n_samples,
        seed=est.seed,
    )
    return [
        SweepRecord(measure="envelope_min", value=lo, **common),
        SweepRecord(measure="envelope_max", value=hi, **common),
    ]


def run_sweep(config: SweepConfig, out_path: str | None = None) -> list[SweepRecord]:
    """Run the full cross product and optionally write the CSV atomically.

    Rows are ordered (model, alpha, measure) in config order, with envelope
    rows appended after all value rows.  Errors at a point become error
    rows; the sweep continues.
    """
    config.validate()
    grid = config.alpha_grid()
    records: list[SweepRecord] = []
    envelope_rows: list[SweepRecord] = []
    env_models = set(config.envelope.models) if config.envelope is not None else set()

    for model_name, variant in config.models:
        for alpha in grid:
            est = None
            try:
                est = _estimate_point(model_name, variant, alpha, config.n_samples, config.seed)
            except ValueError as exc:
                for measure in config.measures:
                    records.append(
                        SweepRecord(
                            model=model_name,
                            variant=variant,
                            alpha=alpha,
                            measure=measure.token,
                            error=str(exc),
                        )
                    )
                continue
            for measure in config.measures:
                try:
                    result = compute_mon(est, weight_for_measure(measure, est))
                    records.append(
                        _record_from_result(model_name, variant, alpha, measure, result)
                    )
                except ValueError as exc:
                    records.append(
                        SweepRecord(
                            model=model_name,
                            variant=variant,
                            alpha=alpha,
                            measure=measure.token,
                            error=str(exc),
                        )
                    )
            if (model_name, variant) in env_models:
                envelope_rows.extend(
                    _envelope_records(model_name, variant, alpha, est, config.envelope)
                )

    records.extend(envelope_rows)
    target = out_path or config.out
    if target:
        write_csv(records, target, config)
    return records


def _metadata_lines(config: SweepConfig | None) -> list[str]:
    if config is None:
        return ["# nlmeasure sweep"]
    lines = [
        "# nlmeasure sweep",
        f"# models = {', '.join(f'{m}:{v}' if v != 'native' else m for m, v in config.models)}",
        f"# alpha_grid = logspace({config.alpha_start:.17g}, {config.alpha_stop:.17g}, {config.alpha_points})",
        f"# measures = {', '.join(m.token for m in config.measures)}",
        f"# samples = {config.n_samples} (Monte Carlo standard error scales as 1/sqrt(samples))",
        f"# base_seed = {config.seed}",
    ]
    if config.envelope is not None:
        env = config.envelope
        lines.append(
            f"# envelope = component {env.component}, scale 10^{env.exp_min:g}..10^{env.exp_max:g}, {env.points} points"
        )
    return lines


def write_csv(records: list[SweepRecord], path: str, config: SweepConfig | None = None) -> None:
    """Write records atomically (temp file + rename) with '#' metadata lines."""
    buffer = io.StringIO()
    for line in _metadata_lines(config):
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in records:
        writer.writerow(record.to_csv_row())

    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(buffer.getvalue())
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def read_csv(path: str) -> list[SweepRecord]:
    """Read back a sweep CSV, skipping metadata lines."""
    records = []
    with open(path, newline="") as handle:
        rows = csv.reader(
            line for line in handle if line.strip() and not line.startswith("#")
        )
        header = next(rows)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header!r}")
        for row in rows:
            records.append(SweepRecord.from_csv_row(row))
    return records
