"""Sharded BFT account ledger with on-demand one-shot consensus instances,
certified off-chain assets, a commutative state algebra, threshold-encrypted
sealed-bid auctions, and a deterministic simulation harness."""

from . import wire as _wire  # noqa: F401  (importing the package freezes wire tags)

__version__ = "0.1.0"
