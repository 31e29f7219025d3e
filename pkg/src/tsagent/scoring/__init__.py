from tsagent.scoring.fusion import GATE_INIT, FusionInputs, cross_attention, gated_fusion_forward, layer_norm
from tsagent.scoring.loss import (
    DEFAULT_QUANTILES,
    QuantileForecast,
    TargetBundle,
    check_quantiles,
    horizon_loss,
    log_decay_weights,
    objective,
    pinball,
    pinball_array,
)
from tsagent.scoring.scorers import RemoteScorer, Scorer, SeasonalNaiveScorer, full_objective, score

__all__ = [
    "DEFAULT_QUANTILES", "GATE_INIT", "FusionInputs", "QuantileForecast", "RemoteScorer", "Scorer",
    "SeasonalNaiveScorer", "TargetBundle", "check_quantiles", "cross_attention", "full_objective",
    "gated_fusion_forward", "horizon_loss", "layer_norm", "log_decay_weights", "objective", "pinball",
    "pinball_array", "score",
]
