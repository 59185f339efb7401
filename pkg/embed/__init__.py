"""Time2Vec, radial-basis and lookup embeddings."""
from embed.layers import DiffScale, LookupEmbedding, RbfLayer, Time2VecLayer
from embed.features import ActionFieldEmbedder, ActionFields, embed_action_fields, embed_time_diff

__all__ = [
    'DiffScale', 'LookupEmbedding', 'RbfLayer', 'Time2VecLayer',
    'ActionFieldEmbedder', 'ActionFields', 'embed_action_fields', 'embed_time_diff',
]
