from .common import (
    Experience,
    OnPolicyBatch,
    ReplayBuffer,
    discounted_returns,
    returns_with_resets,
    soft_update,
)

__all__ = [
    "Experience",
    "OnPolicyBatch",
    "ReplayBuffer",
    "discounted_returns",
    "returns_with_resets",
    "soft_update",
]
