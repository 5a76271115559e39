"""Frame-record corpora: generation, FRV1 files, cropping and batching."""
from .batching import Batch, batch_iter, epoch_permutation, make_batch
from .corpus import (Corpus, CorpusConfig, ConfigError, FrameSequence, PRESETS,
                     generate_corpus, label_rates, noise_stats, preset, read_truth,
                     split, synthesize, write_truth)
from .crop import DESK_CROP, FULL_SCALE_CROP, CropSpec, crop_indices, crop_sequence
from .records import RecordFormatError, decode_records, encode_records, read_records, write_records

__all__ = [
    "Batch", "ConfigError", "Corpus", "CorpusConfig", "CropSpec", "DESK_CROP", "FrameSequence",
    "FULL_SCALE_CROP", "PRESETS", "RecordFormatError", "batch_iter", "crop_indices", "crop_sequence",
    "decode_records", "encode_records", "epoch_permutation", "generate_corpus", "label_rates",
    "make_batch", "noise_stats", "preset", "read_records", "read_truth", "split", "synthesize",
    "write_records", "write_truth",
]
