"""End-to-end frame loop plus the train/eval entry points used by the CLI.

Per frame: resolve the ripple pair, normalize nutriment centers, predict the
next positions, map them back to pixels, count line crossings, update the
windowed count, compute the texture activity when a frame image is supplied,
and take a feed decision.  Frames without usable geometry still advance every
series (raw count 0, carried activity).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .control import ControlConfig, ControlDecision, control_decide
from .counting import DEFAULT_RHO, count_crossings, passed_line
from .errors import (
    ConfigError,
    DegenerateLine,
    EmptyDatasetError,
    EmptyInputError,
    ValidationError,
)
from .geometry import NormalizedFrame, RipplePair, to_normalized, to_pixel
from .records import FrameRecord, TruthRecord
from .regression import (
    ErrorStats,
    LayerSpec,
    RegressionModel,
    TrainConfig,
    TrainResult,
    eval_error,
    new_model,
    predict_next,
    select_best,
    train,
)
from .streams import resolve_ripple_pair
from .texture import ReferenceExtractor, crop_region, pyramid_sigma

DEFAULT_WINDOW = 20
DEFAULT_GATE = 0.05

PREDICTORS = ("model", "persistence", "truth")


def _centers(record: FrameRecord) -> np.ndarray:
    return np.array([[b.cx, b.cy] for b in record.nutriments]).reshape(-1, 2)


@dataclass
class FrameOutput:
    frame: int
    raw_count: int
    windowed_count: int
    sigma: float | None
    windowed_sigma: float | None
    decision: ControlDecision
    theta: float | None
    z: float | None
    anchor: tuple[float, float] | None
    kappa: np.ndarray | None
    duration_ms: float


@dataclass
class PipelineResult:
    frames: list[FrameOutput] = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def frame_ms(self) -> list[float]:
        return [f.duration_ms for f in self.frames]


@dataclass(frozen=True)
class TimingReport:
    """Per-frame fps statistics plus the aggregate-throughput view."""

    frame_ms: tuple[float, ...]
    n: int
    mean_fps: float
    std_fps: float
    stderr_fps: float
    ci_lower: float
    ci_upper: float
    throughput_fps: float


def timing_report(durations_ms) -> TimingReport:
    """Mean/std/stderr/95% CI of per-frame fps (fps_i = 1000 / ms_i)."""
    ms = [float(d) for d in durations_ms]
    if not ms:
        raise EmptyInputError("timing report needs at least one frame duration")
    # guard against a zero-resolution timer reading
    fps = np.array([1000.0 / max(d, 1e-9) for d in ms])
    n = len(ms)
    mean = float(np.mean(fps))
    std = float(np.std(fps, ddof=1)) if n > 1 else 0.0
    stderr = std / math.sqrt(n)
    return TimingReport(
        frame_ms=tuple(ms),
        n=n,
        mean_fps=mean,
        std_fps=std,
        stderr_fps=stderr,
        ci_lower=mean - 1.96 * stderr,
        ci_upper=mean + 1.96 * stderr,
        throughput_fps=1000.0 / (sum(ms) / n),
    )


def format_timing_report(report: TimingReport) -> str:
    lines = [
        f"frames processed: {report.n}",
        f"mean fps: {report.mean_fps:.4f}",
        f"std fps: {report.std_fps:.4f}",
        f"stderr fps: {report.stderr_fps:.4f}",
        f"95% CI fps: [{report.ci_lower:.4f}, {report.ci_upper:.4f}]",
        f"throughput fps: {report.throughput_fps:.4f}",
        f"mean frame ms: {1000.0 / report.throughput_fps:.4f}",
    ]
    return "\n".join(lines) + "\n"


class _PairTracker:
    """Carry the last usable ripple pair across frames."""

    def __init__(self):
        self.pair: RipplePair | None = None

    def update(self, record: FrameRecord) -> RipplePair | None:
        fresh = resolve_ripple_pair(record, None)
        if fresh is not None and fresh.usable:
            self.pair = fresh
        return self.pair


def run_pipeline(
    records,
    mx: RegressionModel | None = None,
    my: RegressionModel | None = None,
    *,
    predictor: str = "model",
    truth: dict[int, TruthRecord] | None = None,
    image_source=None,
    pyramid_source=None,
    extractor=None,
    rho: float = DEFAULT_RHO,
    window: int = DEFAULT_WINDOW,
    control: ControlConfig | None = None,
    toward_ripple: bool = True,
) -> PipelineResult:
    """Process a detection stream frame by frame.

    ``predictor`` selects where next positions come from: trained models,
    persistence (next = current), or the ground-truth sidecar.  The texture
    channel runs when ``image_source(frame)`` or ``pyramid_source(frame)``
    yields data; otherwise activity stays absent and control is count-only.
    Per-frame timing covers the algorithmic core, not parsing or file I/O.
    """
    if predictor not in PREDICTORS:
        raise ConfigError(f"unknown predictor {predictor!r}; choose from {PREDICTORS}")
    if predictor == "model" and (mx is None or my is None):
        raise ConfigError("predictor 'model' needs both mx and my models")
    if predictor == "truth" and truth is None:
        raise ConfigError("predictor 'truth' needs a ground-truth sidecar")
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if control is None:
        control = ControlConfig(act_on=0.0, act_off=0.0, count_max=2**31, window=window)
    texture_on = image_source is not None or pyramid_source is not None
    if texture_on and extractor is None:
        extractor = ReferenceExtractor()

    result = PipelineResult()
    tracker = _PairTracker()
    raw_window: list[int] = []
    sigma_window: list[float] = []
    last_sigma = 0.0
    decision: ControlDecision | None = None

    for record in records:
        image = image_source(record.frame) if image_source is not None else None
        pyramid = pyramid_source(record.frame) if pyramid_source is not None else None
        truth_rec = truth.get(record.frame) if truth is not None else None

        start = time.perf_counter()
        pair = tracker.update(record)

        raw = 0
        theta = z = None
        anchor = None
        kappa = None
        if pair is not None:
            theta, z, anchor = pair.theta, pair.z, pair.anchor
            current = _centers(record)
            normalized = to_normalized(record, pair)
            kappa = normalized.kappa
            predicted = _predict_pixels(record, normalized, pair, predictor, mx, my, truth_rec)
            try:
                line = passed_line(pair, rho)
                raw = count_crossings(current, predicted, line, toward_ripple=toward_ripple)
            except DegenerateLine:
                raw = 0

        sigma: float | None = None
        if texture_on:
            if pyramid is not None:
                sigma = pyramid_sigma(pyramid)
            elif image is not None and pair is not None:
                try:
                    sigma = pyramid_sigma(extractor.extract(crop_region(image, pair)))
                except ValidationError:
                    sigma = last_sigma  # crop too small for the extractor
            else:
                sigma = last_sigma
            last_sigma = sigma

        raw_window.append(raw)
        if len(raw_window) > window:
            raw_window.pop(0)
        wcount = sum(raw_window)

        wsigma: float | None = None
        if texture_on:
            sigma_window.append(sigma)
            if len(sigma_window) > window:
                sigma_window.pop(0)
            wsigma = sum(sigma_window) / len(sigma_window)

        decision = control_decide(decision, record.frame, wcount, wsigma, control)
        duration_ms = (time.perf_counter() - start) * 1000.0

        result.frames.append(
            FrameOutput(
                frame=record.frame,
                raw_count=raw,
                windowed_count=wcount,
                sigma=sigma,
                windowed_sigma=wsigma,
                decision=decision,
                theta=theta,
                z=z,
                anchor=anchor,
                kappa=kappa,
                duration_ms=duration_ms,
            )
        )
    return result


def _predict_pixels(
    record: FrameRecord,
    normalized: NormalizedFrame,
    pair: RipplePair,
    predictor: str,
    mx: RegressionModel | None,
    my: RegressionModel | None,
    truth_rec: TruthRecord | None,
) -> np.ndarray:
    if predictor == "persistence":
        return _centers(record)
    if predictor == "truth":
        if truth_rec is None:
            raise ValidationError(f"no ground-truth record for frame {record.frame}")
        if len(truth_rec.next_positions) != len(record.nutriments):
            raise ValidationError(
                f"frame {record.frame}: truth has {len(truth_rec.next_positions)} "
                f"next positions for {len(record.nutriments)} nutriments"
            )
        return np.array(truth_rec.next_positions, dtype=float).reshape(-1, 2)
    return to_pixel(predict_next(mx, my, normalized), pair)


def harvest_training_pairs(records, gate: float = DEFAULT_GATE):
    """Associate normalized positions across consecutive frames.

    Each position in frame f pairs with its nearest neighbour in frame f+1
    when the distance is within ``gate`` (normalized units).  Returns
    (x_pairs, y_pairs) ready for the two networks: x' from x, and y' from
    (x, y).
    """
    if gate <= 0:
        raise ConfigError(f"gate must be positive, got {gate}")
    tracker = _PairTracker()
    normalized: list[NormalizedFrame | None] = []
    frames: list[int] = []
    for record in records:
        pair = tracker.update(record)
        normalized.append(to_normalized(record, pair) if pair is not None else None)
        frames.append(record.frame)

    x_pairs: list[tuple[np.ndarray, float]] = []
    y_pairs: list[tuple[np.ndarray, float]] = []
    for i in range(len(normalized) - 1):
        cur, nxt = normalized[i], normalized[i + 1]
        if cur is None or nxt is None or frames[i + 1] != frames[i] + 1:
            continue
        if cur.kappa.shape[0] == 0 or nxt.kappa.shape[0] == 0:
            continue
        diff = cur.kappa[:, None, :] - nxt.kappa[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        nearest = np.argmin(dist, axis=1)
        for a, b in enumerate(nearest):
            if dist[a, b] <= gate:
                k0, k1 = cur.kappa[a], nxt.kappa[b]
                x_pairs.append((k0[:1].copy(), float(k1[0])))
                y_pairs.append((k0.copy(), float(k1[1])))
    return x_pairs, y_pairs


@dataclass
class TrainedModels:
    mx: TrainResult
    my: TrainResult
    n_pairs: int


def train_models(
    records,
    spec_name: str,
    config: TrainConfig,
    gate: float = DEFAULT_GATE,
) -> TrainedModels:
    """Harvest pairs from a stream and train the two networks.

    mu_x is seeded with config.seed, mu_y with config.seed + 1.
    """
    x_pairs, y_pairs = harvest_training_pairs(records, gate=gate)
    if not x_pairs:
        raise EmptyDatasetError("no training pairs could be harvested from the stream")
    mx = new_model(LayerSpec.named(spec_name, input_dim=1), seed=config.seed)
    my = new_model(LayerSpec.named(spec_name, input_dim=2), seed=config.seed + 1)
    return TrainedModels(
        mx=train(mx, x_pairs, config),
        my=train(my, y_pairs, config),
        n_pairs=len(x_pairs),
    )


@dataclass
class ModelEvaluation:
    names: list[str]
    stats: list[ErrorStats]
    best: int


def evaluate_models(
    records,
    truth: dict[int, TruthRecord],
    models: list[tuple[str, RegressionModel, RegressionModel]],
    formula: str = "euclidean",
) -> ModelEvaluation:
    """Score each (mx, my) pair against annotated next positions.

    Predictions run through the same normalize/predict/invert path as the
    live pipeline; the statistics follow eval_error.
    """
    if not models:
        raise EmptyInputError("evaluate_models needs at least one model pair")
    tracker = _PairTracker()
    per_model: list[list[np.ndarray]] = [[] for _ in models]
    gts: list[np.ndarray] = []
    for record in records:
        pair = tracker.update(record)
        truth_rec = truth.get(record.frame)
        if pair is None or truth_rec is None or not record.nutriments:
            continue
        if len(truth_rec.next_positions) != len(record.nutriments):
            raise ValidationError(
                f"frame {record.frame}: truth has {len(truth_rec.next_positions)} "
                f"next positions for {len(record.nutriments)} nutriments"
            )
        normalized = to_normalized(record, pair)
        gts.append(np.array(truth_rec.next_positions, dtype=float))
        for i, (_, mx, my) in enumerate(models):
            per_model[i].append(to_pixel(predict_next(mx, my, normalized), pair))
    if not gts:
        raise EmptyDatasetError("no annotated geometry-ready frames to evaluate on")
    gt_all = np.concatenate(gts, axis=0)
    stats = [
        eval_error(np.concatenate(chunks, axis=0), gt_all, formula=formula)
        for chunks in per_model
    ]
    return ModelEvaluation(
        names=[name for name, _, _ in models],
        stats=stats,
        best=select_best(stats),
    )
