from .attention import (
    DISTANCE_EPS,
    SimilarDayWeights,
    TemporalAttentionParams,
    attention_scores,
    context_vector,
    similar_day_weights,
)
from .cells import CELL_KINDS, RecurrentCellParams
from .model import (
    GROUPS,
    DecoderState,
    EncoderState,
    ForecastModel,
    ForwardPass,
    ModelConfig,
    OutputHeadParams,
    decode,
    encode,
    forecast,
    output_head,
)

__all__ = [
    "CELL_KINDS",
    "DISTANCE_EPS",
    "DecoderState",
    "EncoderState",
    "ForecastModel",
    "ForwardPass",
    "GROUPS",
    "ModelConfig",
    "OutputHeadParams",
    "RecurrentCellParams",
    "SimilarDayWeights",
    "TemporalAttentionParams",
    "attention_scores",
    "context_vector",
    "decode",
    "encode",
    "forecast",
    "output_head",
    "similar_day_weights",
]
