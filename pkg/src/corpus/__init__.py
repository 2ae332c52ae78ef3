from corpus.builder import (
    A_SPLIT,
    D_SPLITS,
    EVAL_SPLITS,
    MANIFEST_COLUMNS,
    PROBE_SPLIT,
    Corpus,
    SplitDef,
    build_corpus,
    check_disjoint,
    split_defs,
)
from corpus.png_io import load_png, load_png_uint8, quantize, random_crop, save_png, to_float
from corpus.synth import ImageSample, synth_fake, synth_real, upsample_nearest

__all__ = [
    "A_SPLIT",
    "Corpus",
    "D_SPLITS",
    "EVAL_SPLITS",
    "ImageSample",
    "MANIFEST_COLUMNS",
    "PROBE_SPLIT",
    "SplitDef",
    "build_corpus",
    "check_disjoint",
    "load_png",
    "load_png_uint8",
    "quantize",
    "random_crop",
    "save_png",
    "split_defs",
    "synth_fake",
    "synth_real",
    "to_float",
    "upsample_nearest",
]
