"""RGB-D multiscale convnet scene labelling."""

from ._rgbdseg import (
    ConfigError,
    DataError,
    Error,
    Model,
    NumericError,
    RunConfig,
    ShapeError,
    TemporalSmoother,
    classwise_accuracy,
    confusion_matrix,
    conv2d,
    flicker_fraction,
    generate_scene,
    load_checkpoint,
    load_container,
    maxpool2x2,
    read_color,
    read_depth,
    read_labels,
    region_distributions,
    run_eval,
    run_synth,
    run_train,
    save_checkpoint,
    save_container,
    segment,
    write_sample,
)

__all__ = [name for name in dir() if not name.startswith("_")]
