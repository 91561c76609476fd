"""Auxiliary-data augmentation for imbalanced sentence classification."""

from ._core import (
    AugmentationPlan,
    Dataset,
    Encoder,
    Model,
    NumericError,
    Selection,
    Sentence,
    SplitBundle,
    SplitRatio,
    SynthSpec,
    TrainConfig,
    ValidationError,
    apply_plan,
    build_plan,
    cosine,
    deduplicate,
    evaluate,
    filter_min_class_size,
    grid,
    load_dataset,
    lr_at,
    merge_labels,
    normalize,
    prepare,
    read_plan,
    report,
    run,
    split_sizes,
    stratified_split,
    synth,
    two_stage_train,
    write_dataset,
    write_model,
    write_plan,
    write_synth,
)

__all__ = [name for name in dir() if not name.startswith("_")]
