"""Negotiation agent that learns under user preference uncertainty."""

from .domain import (
    Bid,
    Domain,
    LinearAdditiveUtility,
    PartialPreferenceProfile,
    Profile,
    SessionConfig,
)
from .protocol import Accept, Offer, SessionLog, run_session

__all__ = [
    "Bid",
    "Domain",
    "LinearAdditiveUtility",
    "PartialPreferenceProfile",
    "Profile",
    "SessionConfig",
    "Accept",
    "Offer",
    "SessionLog",
    "run_session",
]
__version__ = "0.1.0"
