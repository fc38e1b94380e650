"""Synthetic experiments on Gini-based model selection.

Each replication draws ``n`` records from a known regression model, splits
them in half (train / evaluation), builds a set of model variants from the
true conditional means, and scores every variant on the evaluation half.
Variants that need fitting (coarsening, constant mean) are fitted on the
training half only.

Randomness comes from counter-based Philox streams keyed by
``(seed, replication, attempt, stream)``, so a replication's data do not
depend on how many replications run, in which order, or on how many workers.
"""

from __future__ import annotations

import enum
import io
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .autocal import BinCalibrator, bin_means, calibration_report, convex_order_check
from .core import Dataset, DegenerateResponse, InvalidInput
from .gini import DenominatorMethod, auc, gini_eco, gini_ml, somers_d
from .scoring import ConvexGenerator, masked_score

log = logging.getLogger(__name__)

STREAM_COVARIATES = 0
STREAM_RESPONSES = 1
STREAM_SPLIT = 2
STREAM_NOISE = 3

MAX_ATTEMPTS = 10


def stream(seed: int, replication: int, stream_id: int, attempt: int = 0) -> np.random.Generator:
    """Independent Philox generator for one (seed, replication, attempt, stream)."""
    key = np.random.SeedSequence([int(seed), int(replication), int(attempt), int(stream_id)])
    return np.random.Generator(np.random.Philox(key))


# ---------------------------------------------------------------- generators


class GeneratorKind(enum.Enum):
    BINARY_LOGISTIC = "binary_logistic"
    GAMMA_REGRESSION = "gamma_regression"
    LOG_NORMAL = "log_normal"


@dataclass(frozen=True)
class GeneratorSpec:
    """Regression model ``mu(x) = link^-1(eta(x))`` with a single linear index ``eta``.

    Covariates are i.i.d. standard normal in ``dim`` dimensions and enter
    through the index ``intercept + coef_scale * sum(x) / sqrt(dim)``, which
    is ``N(intercept, coef_scale**2)``.  ``shape`` is the gamma shape and
    ``sigma`` the log-normal log-scale; each is ignored by the other kinds.
    """

    kind: GeneratorKind
    dim: int = 4
    coef_scale: float = 1.0
    intercept: float = 0.0
    shape: float = 2.0
    sigma: float = 0.5

    def validate(self) -> None:
        if self.dim < 1:
            raise InvalidInput("dim must be >= 1")
        if not self.coef_scale >= 0:
            raise InvalidInput("coef_scale must be >= 0")
        if not self.shape > 0:
            raise InvalidInput("shape must be > 0")
        if not self.sigma >= 0:
            raise InvalidInput("sigma must be >= 0")

    @property
    def binary(self) -> bool:
        return self.kind is GeneratorKind.BINARY_LOGISTIC

    def true_mean(self, x: np.ndarray) -> np.ndarray:
        eta = self.intercept + self.coef_scale * x.sum(axis=1) / math.sqrt(self.dim)
        if self.kind is GeneratorKind.BINARY_LOGISTIC:
            return 1.0 / (1.0 + np.exp(-eta))
        return np.exp(eta)

    def draw_responses(self, mu: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.kind is GeneratorKind.BINARY_LOGISTIC:
            return (rng.random(mu.size) < mu).astype(np.float64)
        if self.kind is GeneratorKind.GAMMA_REGRESSION:
            return rng.gamma(self.shape, mu / self.shape)
        z = rng.standard_normal(mu.size)
        return mu * np.exp(self.sigma * z - 0.5 * self.sigma**2)


# ------------------------------------------------------------------ variants


class VariantKind(enum.Enum):
    TRUE_MEAN = "true_mean"
    MONOTONE_DISTORTION = "monotone_distortion"
    AFFINE_SHIFT = "affine_shift"
    COARSENED_AUTOCAL = "coarsened_autocal"
    NOISY_PREDICTOR = "noisy_predictor"
    CONSTANT_MEAN = "constant_mean"
    INFORMED_DISTORTION = "informed_distortion"


_VARIANT_ARITY = {
    VariantKind.TRUE_MEAN: 0,
    VariantKind.MONOTONE_DISTORTION: 1,
    VariantKind.AFFINE_SHIFT: 2,
    VariantKind.COARSENED_AUTOCAL: 1,
    VariantKind.NOISY_PREDICTOR: 1,
    VariantKind.CONSTANT_MEAN: 0,
    VariantKind.INFORMED_DISTORTION: 2,
}

# predictors that are auto-calibrated (exactly, or up to fitting error)
AUTO_CALIBRATED = frozenset(
    {VariantKind.TRUE_MEAN, VariantKind.COARSENED_AUTOCAL, VariantKind.CONSTANT_MEAN}
)


def _fmt_param(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else repr(float(p))


@dataclass(frozen=True)
class Variant:
    """A way of turning the true means into predictions.

    ========================  =============================================
    ``true_mean``             the true conditional mean
    ``monotone_distortion(g)``  ``mu ** g``
    ``affine_shift(a, b)``    ``a * mu + b``
    ``coarsened_autocal(k)``  training mean response within ``k`` equal-count bins of ``mu``
    ``noisy_predictor(sd)``   ``mu + N(0, sd**2)``
    ``constant_mean``         training mean response
    ``informed_distortion(w, g)``  ``((1 - w) mu + w y) ** g``: sees the response
    ========================  =============================================
    """

    kind: VariantKind
    params: tuple[float, ...] = ()

    def __post_init__(self):
        arity = _VARIANT_ARITY[self.kind]
        if len(self.params) != arity:
            raise InvalidInput(f"{self.kind.value} takes {arity} parameter(s), got {len(self.params)}")
        p = self.params
        if self.kind is VariantKind.MONOTONE_DISTORTION and not p[0] > 0:
            raise InvalidInput("monotone_distortion exponent must be > 0")
        if self.kind is VariantKind.AFFINE_SHIFT and not p[0] > 0:
            raise InvalidInput("affine_shift slope must be > 0")
        if self.kind is VariantKind.COARSENED_AUTOCAL and (p[0] < 2 or not float(p[0]).is_integer()):
            raise InvalidInput("coarsened_autocal needs an integer k >= 2")
        if self.kind is VariantKind.NOISY_PREDICTOR and not p[0] >= 0:
            raise InvalidInput("noisy_predictor sd must be >= 0")
        if self.kind is VariantKind.INFORMED_DISTORTION and not (0 <= p[0] <= 1 and p[1] > 0):
            raise InvalidInput("informed_distortion needs 0 <= w <= 1 and g > 0")

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind.value
        return f"{self.kind.value}({','.join(_fmt_param(p) for p in self.params)})"

    @property
    def auto_calibrated(self) -> bool:
        return self.kind in AUTO_CALIBRATED

    @classmethod
    def parse(cls, text: str) -> "Variant":
        match = re.fullmatch(r"\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*", text)
        if not match:
            raise InvalidInput(f"cannot parse variant {text!r}")
        try:
            kind = VariantKind(match.group(1))
        except ValueError:
            raise InvalidInput(f"unknown variant {match.group(1)!r}") from None
        args = match.group(2)
        params = tuple(float(a) for a in args.split(",")) if args and args.strip() else ()
        return cls(kind, params)


def apply_variant(
    variant: Variant,
    true_means: np.ndarray,
    responses: np.ndarray,
    fit_mask: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Predictions of ``variant`` for every record.

    Fitted variants use only the records where ``fit_mask`` is true (all
    records by default); predictions are produced for every record.
    """
    mu = np.asarray(true_means, dtype=np.float64)
    y = np.asarray(responses, dtype=np.float64)
    fit = np.ones(mu.size, dtype=bool) if fit_mask is None else np.asarray(fit_mask, dtype=bool)
    kind, p = variant.kind, variant.params
    if kind is VariantKind.TRUE_MEAN:
        return mu.copy()
    if kind is VariantKind.MONOTONE_DISTORTION:
        return mu ** p[0]
    if kind is VariantKind.AFFINE_SHIFT:
        return p[0] * mu + p[1]
    if kind is VariantKind.COARSENED_AUTOCAL:
        if fit.all():
            return bin_means(y, mu, int(p[0]))
        return BinCalibrator.fit(y[fit], mu[fit], int(p[0])).predict(mu)
    if kind is VariantKind.NOISY_PREDICTOR:
        if rng is None:
            raise InvalidInput("noisy_predictor needs a random generator")
        return mu + p[0] * rng.standard_normal(mu.size)
    if kind is VariantKind.CONSTANT_MEAN:
        return np.full(mu.size, float(np.mean(y[fit])))
    if kind is VariantKind.INFORMED_DISTORTION:
        return ((1.0 - p[0]) * mu + p[0] * y) ** p[1]
    raise InvalidInput(f"unhandled variant {variant!r}")


# ------------------------------------------------------------------- metrics


class MetricKind(enum.Enum):
    GINI_ML = "gini_ml"
    GINI_ECO = "gini_eco"
    AUC = "auc"
    SOMERS_D = "somers_d"
    BREGMAN = "bregman"
    CALIBRATION_GAP = "calibration_gap"


@dataclass(frozen=True)
class Metric:
    kind: MetricKind
    generator: ConvexGenerator | None = None

    def __post_init__(self):
        if (self.kind is MetricKind.BREGMAN) != (self.generator is not None):
            raise InvalidInput("bregman metrics, and only they, take a generator")

    @property
    def label(self) -> str:
        if self.generator is None:
            return self.kind.value
        return f"bregman({self.generator.value})"

    @property
    def higher_is_better(self) -> bool:
        return self.kind is not MetricKind.CALIBRATION_GAP

    @classmethod
    def parse(cls, text: str) -> "Metric":
        match = re.fullmatch(r"\s*([a-z_]+)\s*(?:\(\s*([a-z_]+)\s*\))?\s*", text)
        if not match:
            raise InvalidInput(f"cannot parse metric {text!r}")
        try:
            kind = MetricKind(match.group(1))
            gen = ConvexGenerator(match.group(2)) if match.group(2) else None
        except ValueError:
            raise InvalidInput(f"unknown metric {text.strip()!r}") from None
        return cls(kind, gen)


# -------------------------------------------------------------------- config


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorSpec
    n: int
    replications: int
    seed: int
    variants: tuple[Variant, ...]
    metrics: tuple[Metric, ...]
    win_fraction: float = 0.95
    bregman_loss_fraction: float = 0.99
    calibration_bins: int = 10
    calibration_tol: float = 0.05

    def __post_init__(self):
        self.generator.validate()
        if self.n < 100:
            raise InvalidInput("n must be >= 100")
        if self.replications < 1:
            raise InvalidInput("replications must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidInput("seed must be a 64-bit unsigned integer")
        if not self.variants or not self.metrics:
            raise InvalidInput("need at least one variant and one metric")
        labels = [v.label for v in self.variants]
        if len(set(labels)) != len(labels):
            raise InvalidInput("duplicate variants")
        mlabels = [m.label for m in self.metrics]
        if len(set(mlabels)) != len(mlabels):
            raise InvalidInput("duplicate metrics")
        if any(m.kind is MetricKind.AUC for m in self.metrics) and not self.generator.binary:
            raise InvalidInput("auc needs the binary_logistic generator")
        if not 0 < self.win_fraction <= 1 or not 0 < self.bregman_loss_fraction <= 1:
            raise InvalidInput("fractions must lie in (0, 1]")
        if self.calibration_bins < 2 or not self.calibration_tol > 0:
            raise InvalidInput("calibration_bins >= 2 and calibration_tol > 0 required")

    def to_dict(self) -> dict:
        g = self.generator
        return {
            "generator": g.kind.value,
            "dim": g.dim,
            "coef_scale": g.coef_scale,
            "intercept": g.intercept,
            "shape": g.shape,
            "sigma": g.sigma,
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "variants": [v.label for v in self.variants],
            "metrics": [m.label for m in self.metrics],
            "win_fraction": self.win_fraction,
            "bregman_loss_fraction": self.bregman_loss_fraction,
            "calibration_bins": self.calibration_bins,
            "calibration_tol": self.calibration_tol,
        }


_GENERATOR_KEYS = {"dim": int, "coef_scale": float, "intercept": float, "shape": float, "sigma": float}
_CONFIG_KEYS = {
    "n": int,
    "replications": int,
    "seed": int,
    "win_fraction": float,
    "bregman_loss_fraction": float,
    "calibration_bins": int,
    "calibration_tol": float,
}
_REQUIRED = ("generator", "n", "replications", "seed", "variants", "metrics")


def _split_items(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    items, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    items.append("".join(cur))
    return [i.strip() for i in items if i.strip()]


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat ``key = value`` format; ``#`` starts a comment.

    Unknown or repeated keys are errors.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        known = key in _GENERATOR_KEYS or key in _CONFIG_KEYS or key in ("generator", "variants", "metrics")
        if not known:
            raise InvalidInput(f"config line {lineno}: unknown key {key!r}")
        if key in raw:
            raise InvalidInput(f"config line {lineno}: duplicate key {key!r}")
        raw[key] = value
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise InvalidInput(f"config is missing {', '.join(missing)}")

    def convert(key: str, typ: type):
        try:
            return typ(raw[key])
        except ValueError:
            raise InvalidInput(f"config key {key!r}: cannot read {raw[key]!r} as {typ.__name__}") from None

    try:
        kind = GeneratorKind(raw["generator"])
    except ValueError:
        raise InvalidInput(f"unknown generator {raw['generator']!r}") from None
    gen = GeneratorSpec(kind, **{k: convert(k, t) for k, t in _GENERATOR_KEYS.items() if k in raw})
    return ExperimentConfig(
        generator=gen,
        variants=tuple(Variant.parse(v) for v in _split_items(raw["variants"])),
        metrics=tuple(Metric.parse(m) for m in _split_items(raw["metrics"])),
        **{k: convert(k, t) for k, t in _CONFIG_KEYS.items() if k in raw},
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ----------------------------------------------------------------- generate


@dataclass(frozen=True)
class SimulatedData:
    responses: np.ndarray
    true_means: np.ndarray
    covariates: np.ndarray

    @property
    def dataset(self) -> Dataset:
        """Responses paired with the true means as predictions."""
        return Dataset(self.responses, self.true_means)


def generate(config: ExperimentConfig, replication_index: int, attempt: int = 0) -> SimulatedData:
    """Draw one replication; a pure function of (seed, replication, attempt)."""
    g = config.generator
    rng_x = stream(config.seed, replication_index, STREAM_COVARIATES, attempt)
    x = rng_x.standard_normal((config.n, g.dim))
    mu = g.true_mean(x)
    y = g.draw_responses(mu, stream(config.seed, replication_index, STREAM_RESPONSES, attempt))
    return SimulatedData(y, mu, x)


def split_mask(config: ExperimentConfig, replication_index: int, attempt: int = 0) -> np.ndarray:
    """Boolean training mask: a random half of the records."""
    perm = stream(config.seed, replication_index, STREAM_SPLIT, attempt).permutation(config.n)
    mask = np.zeros(config.n, dtype=bool)
    mask[perm[: config.n // 2]] = True
    return mask


# ------------------------------------------------------------------- running


@dataclass
class ReplicationResult:
    index: int
    attempts: int
    evaluation: dict[str, dict[str, float]]
    in_sample: dict[str, dict[str, float]]
    dropped: dict[str, dict[str, int]]
    convex_order: dict[str, dict[str, float]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


def _metric_value(metric: Metric, y: np.ndarray, m: np.ndarray, config: ExperimentConfig) -> tuple[float, int]:
    ds = Dataset(y, m)
    kind = metric.kind
    if kind is MetricKind.GINI_ML:
        method = DenominatorMethod.BINARY if config.generator.binary else DenominatorMethod.CONTINUOUS_SELF_CAP
        return gini_ml(ds, method, rank_stats=False).gini_ml, 0
    if kind is MetricKind.GINI_ECO:
        if np.any(m < 0) or not np.mean(m) > 0:
            return float("nan"), 0
        return gini_eco(m), 0
    if kind is MetricKind.AUC:
        return auc(ds), 0
    if kind is MetricKind.SOMERS_D:
        return somers_d(ds), 0
    if kind is MetricKind.BREGMAN:
        return masked_score(metric.generator, y, m)
    rep = calibration_report(ds, config.calibration_bins, config.calibration_tol)
    return rep.relative_gap, 0


def _evaluate(config: ExperimentConfig, replication_index: int, attempt: int) -> ReplicationResult:
    data = generate(config, replication_index, attempt)
    train = split_mask(config, replication_index, attempt)
    test = ~train
    y = data.responses
    noise_rng = stream(config.seed, replication_index, STREAM_NOISE, attempt)
    evaluation: dict[str, dict[str, float]] = {}
    in_sample: dict[str, dict[str, float]] = {}
    dropped: dict[str, dict[str, int]] = {}
    for variant in config.variants:
        pred = apply_variant(variant, data.true_means, y, train, noise_rng)
        ev, ins, dr = {}, {}, {}
        for metric in config.metrics:
            ev[metric.label], d = _metric_value(metric, y[test], pred[test], config)
            ins[metric.label], _ = _metric_value(metric, y[train], pred[train], config)
            if metric.kind is MetricKind.BREGMAN:
                dr[metric.label] = d
        evaluation[variant.label] = ev
        in_sample[variant.label] = ins
        dropped[variant.label] = dr

    convex: dict[str, dict[str, float]] = {}
    mu_test = data.true_means[test]
    for variant in config.variants:
        if variant.kind is not VariantKind.COARSENED_AUTOCAL:
            continue
        coarse = bin_means(mu_test, mu_test, int(variant.params[0]))
        co = convex_order_check(mu_test, coarse)
        convex[variant.label] = {
            "violations": co.violations,
            "min_gap": float(np.min(co.gaps)),
            "gini_eco_true": gini_eco(mu_test),
            "gini_eco_coarse": gini_eco(coarse),
        }
    return ReplicationResult(replication_index, attempt + 1, evaluation, in_sample, dropped, convex)


def run_replication(config: ExperimentConfig, replication_index: int) -> ReplicationResult:
    """Evaluate one replication, redrawing it if a metric is degenerate."""
    notes = []
    for attempt in range(MAX_ATTEMPTS):
        try:
            result = _evaluate(config, replication_index, attempt)
        except DegenerateResponse as exc:
            msg = f"replication {replication_index} attempt {attempt}: {exc}; redrawing"
            log.warning(msg)
            notes.append(msg)
            continue
        result.notes = notes
        return result
    raise DegenerateResponse(f"replication {replication_index} degenerate after {MAX_ATTEMPTS} attempts")


def _run_one(args: tuple[ExperimentConfig, int]) -> ReplicationResult:
    return run_replication(*args)


def run_replications(config: ExperimentConfig, threads: int = 1) -> list[ReplicationResult]:
    jobs = [(config, r) for r in range(config.replications)]
    if threads <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * threads))))


# ---------------------------------------------------------------- reporting


def _summary(values: list[float]) -> dict:
    v = np.array(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"mean": None, "std": None, "count": 0}
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(np.mean(v)), "std": std, "count": int(v.size)}


def _gap_stats(gaps: np.ndarray) -> dict:
    mean = float(np.mean(gaps))
    se = float(np.std(gaps, ddof=1) / math.sqrt(gaps.size)) if gaps.size > 1 else 0.0
    z = mean / se if se > 0 else (math.inf if mean > 0 else -math.inf if mean < 0 else 0.0)
    return {"mean": mean, "se": se, "z": z}


def _status(ok: bool | None) -> str:
    return "not_applicable" if ok is None else ("pass" if ok else "fail")


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    replications: list[ReplicationResult]
    summary: dict = field(init=False)
    in_sample_summary: dict = field(init=False)
    wins: dict = field(init=False)
    verdicts: dict = field(init=False)

    def __post_init__(self):
        self.summary = self._summarise("evaluation")
        self.in_sample_summary = self._summarise("in_sample")
        self.wins = self._wins()
        self.verdicts = {
            "v1_gini_selects_true_mean": self._v1(),
            "v2_rank_invariance_vs_bregman": self._v2(),
            "v3_bregman_selects_true_mean": self._v3(),
            "v4_gini_fooled_by_information_leak": self._v4(),
            "convex_order_coherence": self._convex(),
        }

    # -- helpers

    def values(self, variant: str, metric: str, split: str = "evaluation") -> np.ndarray:
        return np.array([getattr(r, split)[variant][metric] for r in self.replications])

    def _labels(self):
        return [v.label for v in self.config.variants], [m.label for m in self.config.metrics]

    def _summarise(self, split: str) -> dict:
        variants, metrics = self._labels()
        return {v: {m: _summary(self.values(v, m, split).tolist()) for m in metrics} for v in variants}

    def _wins(self) -> dict:
        variants, _ = self._labels()
        out = {}
        for metric in self.config.metrics:
            counts = dict.fromkeys(variants, 0.0)
            for r in self.replications:
                vals = {v: r.evaluation[v][metric.label] for v in variants}
                vals = {v: x for v, x in vals.items() if math.isfinite(x)}
                if not vals:
                    continue
                best = max(vals.values()) if metric.higher_is_better else min(vals.values())
                winners = [v for v, x in vals.items() if x == best]
                for v in winners:
                    counts[v] += 1.0 / len(winners)
            out[metric.label] = counts
        return out

    def _autocal_labels(self) -> list[str]:
        return [v.label for v in self.config.variants if v.auto_calibrated]

    def _has(self, kind: VariantKind) -> list[str]:
        return [v.label for v in self.config.variants if v.kind is kind]

    def _metric_labels(self, kind: MetricKind) -> list[str]:
        return [m.label for m in self.config.metrics if m.kind is kind]

    def _v1(self) -> dict:
        true = VariantKind.TRUE_MEAN.value
        rivals = [v for v in self._autocal_labels() if v != true]
        if true not in self._labels()[0] or not rivals or "gini_ml" not in self._labels()[1]:
            return {"status": _status(None)}
        t = self.values(true, "gini_ml")
        others = np.stack([self.values(v, "gini_ml") for v in rivals])
        wins = t > others.max(axis=0)
        frac = float(np.mean(wins))
        gaps = {v: _gap_stats(t - self.values(v, "gini_ml")) for v in rivals}
        ok = frac >= self.config.win_fraction
        return {"status": _status(ok), "win_fraction": frac, "threshold": self.config.win_fraction, "gaps": gaps}

    def _v2(self) -> dict:
        true = VariantKind.TRUE_MEAN.value
        distortions = self._has(VariantKind.MONOTONE_DISTORTION)
        bregs = self._metric_labels(MetricKind.BREGMAN)
        if true not in self._labels()[0] or not distortions or "gini_ml" not in self._labels()[1]:
            return {"status": _status(None)}
        detail = {}
        ok = True
        for d in distortions:
            exact = int(np.sum(self.values(d, "gini_ml") == self.values(true, "gini_ml")))
            per_metric = {b: float(np.mean(self.values(d, b) < self.values(true, b))) for b in bregs}
            all_worse = float(np.mean(np.all([self.values(d, b) < self.values(true, b) for b in bregs], axis=0))) if bregs else None
            ties_ok = exact == len(self.replications)
            loses_ok = all_worse is not None and all_worse >= self.config.bregman_loss_fraction
            ok = ok and ties_ok and loses_ok
            detail[d] = {
                "exact_gini_ties": exact,
                "bregman_loss_fraction": per_metric,
                "loses_all_bregman_fraction": all_worse,
            }
        return {"status": _status(ok), "threshold": self.config.bregman_loss_fraction, "variants": detail}

    def _v3(self) -> dict:
        true = VariantKind.TRUE_MEAN.value
        rivals = [v for v in self._autocal_labels() if v != true]
        bregs = self._metric_labels(MetricKind.BREGMAN)
        if true not in self._labels()[0] or not rivals or not bregs:
            return {"status": _status(None)}
        fractions = {}
        for b in bregs:
            t = self.values(true, b)
            others = np.stack([self.values(v, b) for v in rivals])
            fractions[b] = float(np.mean(t > np.nanmax(others, axis=0)))
        ok = all(f >= self.config.win_fraction for f in fractions.values())
        return {"status": _status(ok), "win_fraction": fractions, "threshold": self.config.win_fraction}

    def _v4(self) -> dict:
        true = VariantKind.TRUE_MEAN.value
        leaks = self._has(VariantKind.INFORMED_DISTORTION)
        bregs = self._metric_labels(MetricKind.BREGMAN)
        if true not in self._labels()[0] or not leaks or "gini_ml" not in self._labels()[1]:
            return {"status": _status(None)}
        detail = {}
        ok = True
        for leak in leaks:
            beats = self.values(leak, "gini_ml") > self.values(true, "gini_ml")
            loses = np.all([self.values(leak, b) < self.values(true, b) for b in bregs], axis=0) if bregs else beats
            frac = float(np.mean(beats & loses))
            ok = ok and frac >= self.config.win_fraction
            detail[leak] = {"gini_beats_true_fraction": float(np.mean(beats)), "gini_wins_bregman_loses_fraction": frac}
        return {"status": _status(ok), "threshold": self.config.win_fraction, "variants": detail}

    def _convex(self) -> dict:
        coarse = self._has(VariantKind.COARSENED_AUTOCAL)
        if not coarse:
            return {"status": _status(None)}
        detail = {}
        ok = True
        for c in coarse:
            rows = [r.convex_order[c] for r in self.replications]
            violations = int(sum(row["violations"] for row in rows))
            eco_violations = int(sum(row["gini_eco_true"] < row["gini_eco_coarse"] - 1e-9 for row in rows))
            ok = ok and violations == 0 and eco_violations == 0
            detail[c] = {"stop_loss_violations": violations, "gini_eco_violations": eco_violations}
        return {"status": _status(ok), "variants": detail}

    # -- serialisation

    def to_dict(self) -> dict:
        notes = [n for r in self.replications for n in r.notes]
        dropped: dict[str, dict[str, int]] = {}
        for r in self.replications:
            for v, per in r.dropped.items():
                for m, d in per.items():
                    dropped.setdefault(v, {}).setdefault(m, 0)
                    dropped[v][m] += d
        return _clean(
            {
                "config": self.config.to_dict(),
                "evaluation": self.summary,
                "in_sample": self.in_sample_summary,
                "wins": self.wins,
                "verdicts": self.verdicts,
                "bregman_records_excluded": dropped,
                "redraws": notes,
            }
        )

    def replication_csv(self) -> str:
        buf = io.StringIO()
        buf.write("replication,split,variant,metric,value\n")
        for r in self.replications:
            for split in ("evaluation", "in_sample"):
                table = getattr(r, split)
                for v, per in table.items():
                    for m, x in per.items():
                        buf.write(f"{r.index},{split},{v},{m},{'' if not math.isfinite(x) else repr(float(x))}\n")
        return buf.getvalue()


def _clean(obj):
    """Make ``obj`` strict-JSON: non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Run every replication and aggregate, in replication order."""
    return ExperimentReport(config, run_replications(config, threads))


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(config, seed=seed)
