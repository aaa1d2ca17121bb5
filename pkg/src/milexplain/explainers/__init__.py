from .anchors import AnchorConfig, AnchorRule, anchors_explain_pair, anchors_explain_side
from .attention import attention_explain, select_tokens, threshold_attention
from .base import (
    Explanation,
    FunctionHandle,
    ModelHandle,
    read_explanations,
    write_explanations,
)
from .lime import LimeConfig, lime_explain_pair, lime_explain_side, weighted_ridge

__all__ = [
    "AnchorConfig", "AnchorRule", "Explanation", "FunctionHandle", "LimeConfig",
    "ModelHandle", "anchors_explain_pair", "anchors_explain_side", "attention_explain",
    "lime_explain_pair", "lime_explain_side", "read_explanations", "select_tokens",
    "threshold_attention", "weighted_ridge", "write_explanations",
]
