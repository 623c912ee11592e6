"""Realtime online auction service.

Soft-close auction engine, role-filtered views, cursor-polling RPC,
event-sourced recovery, post-auction reporting, and a deterministic
simulation harness.
"""
from .domain import (
    AuctionConfig,
    AuctionFormat,
    AuctionState,
    Bid,
    Message,
    MessageKind,
    Money,
    Phase,
    Role,
    Slot,
    validate_config,
)
from .engine import AuctionMachine, BindingResult, binding_result, determine_winners
from .service import AuctionService, poll_interval
from .views import render_view

__all__ = [
    "AuctionConfig",
    "AuctionFormat",
    "AuctionMachine",
    "AuctionService",
    "AuctionState",
    "Bid",
    "BindingResult",
    "Message",
    "MessageKind",
    "Money",
    "Phase",
    "Role",
    "Slot",
    "binding_result",
    "determine_winners",
    "poll_interval",
    "render_view",
    "validate_config",
]
