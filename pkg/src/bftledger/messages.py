"""Client/authority message payloads carried over the simulated network."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import serialize, tpke
from .accounts import AccountId
from .committee import Authenticated, Certificate, Vote
from .swap import Proposal


# -- requests to an authority --


@dataclass(frozen=True)
class HandleRequestMsg:
    auth: Authenticated


@dataclass(frozen=True)
class ConfirmMsg:
    cert: Certificate


@dataclass(frozen=True)
class QueryAccountMsg:
    id: AccountId


@dataclass(frozen=True)
class ProposalMsg:
    auth: Authenticated  # over a Proposal
    lock1: Optional[Certificate]
    lock2: Optional[Certificate]


@dataclass(frozen=True)
class PreCommitMsg:
    cert: Certificate


@dataclass(frozen=True)
class CommitMsg:
    cert: Certificate
    lock1: Optional[Certificate]
    lock2: Optional[Certificate]


@dataclass(frozen=True)
class QueryInstanceMsg:
    swid: AccountId


@dataclass(frozen=True)
class CertifyAssetMsg:
    auth: Authenticated


@dataclass(frozen=True)
class TransmuteMsg:
    request: serialize.AnyWire  # a TransmuteRequest


@dataclass(frozen=True)
class SubmitBidMsg:
    auth: Authenticated


@dataclass(frozen=True)
class EndOfBiddingMsg:
    auth: Authenticated


@dataclass(frozen=True)
class SharesQueryMsg:
    cert: Certificate  # end-of-bidding certificate


@dataclass(frozen=True)
class EndOfAuctionMsg:
    auth: Authenticated
    eob_cert: Certificate


@dataclass(frozen=True)
class SettleAuctionMsg:
    cert: Certificate  # end-of-auction certificate
    eob_cert: Certificate


# -- replies --


@dataclass(frozen=True)
class VoteReply:
    value: serialize.AnyWire  # the statement that was voted on
    vote: Vote


@dataclass(frozen=True)
class TransmuteReply:
    items: tuple[tuple[serialize.AnyWire, Vote], ...]  # (output binding, vote)


@dataclass(frozen=True)
class AckReply:
    status: str


@dataclass(frozen=True)
class ErrorReply:
    code: str
    detail: str


@dataclass(frozen=True)
class AccountInfoReply:
    exists: bool
    active: bool
    next_sequence: int
    balance: int
    busy: bool


@dataclass(frozen=True)
class InstanceViewReply:
    exists: bool
    created_at: int
    proposed: Optional[Proposal]
    locked: Optional[Certificate]


@dataclass(frozen=True)
class SharesReply:
    auction_id: AccountId
    shares: tuple[tpke.DecryptionShare, ...]
