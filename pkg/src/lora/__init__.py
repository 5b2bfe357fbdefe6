from src.lora.layers import (
    DEFAULT_RANK_VECTOR,
    LoraInjectionSpec,
    LoraLinear,
    RankVector,
    lora_forward,
)
from src.lora.inject import (
    AdaptationConfig,
    AdaptationMode,
    apply_adaptation,
    build_rank_vector,
    count_trainable_parameters,
    inject_vector_lora,
    lora_modules,
    parameter_summary,
    trainable_param_count,
)
