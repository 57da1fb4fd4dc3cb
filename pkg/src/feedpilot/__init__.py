"""Nutriment tracking, counting, and ripple-activity based feed control."""

from .control import ControlConfig, ControlDecision, control_decide
from .counting import PassedLine, count_crossings, passed_line, side_of, windowed
from .errors import (
    ConfigError,
    DegenerateGeometry,
    DegenerateLine,
    DivergenceError,
    EmptyDatasetError,
    EmptyInputError,
    FeedPilotError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .geometry import (
    Corners,
    NormalizedFrame,
    RipplePair,
    corners_of,
    make_ripple_pair,
    ripple_angle,
    rotate_point,
    to_normalized,
    to_pixel,
)
from .pipeline import (
    TimingReport,
    evaluate_models,
    harvest_training_pairs,
    run_pipeline,
    timing_report,
    train_models,
)
from .records import BoundingBox, FrameRecord, TruthRecord
from .regression import (
    ErrorStats,
    LayerSpec,
    RegressionModel,
    TrainConfig,
    eval_error,
    forward,
    load_model,
    new_model,
    predict_next,
    save_model,
    select_best,
    train,
)
from .streams import (
    parse_frame_record,
    read_stream,
    read_truth,
    resolve_ripple_pair,
    serialize_frame_record,
    write_stream,
    write_truth,
)
from .synth import ScenarioConfig, SyntheticScenario, synth_scenario
from .texture import (
    FeaturePyramid,
    GrayImage,
    ReferenceExtractor,
    activity_series,
    crop_region,
    extract_features,
    global_sigma,
    load_pyramid,
    map_variance,
    pyramid_sigma,
    read_pgm,
    save_pyramid,
    stage_sigma,
    write_pgm,
)

__version__ = "0.1.0"
