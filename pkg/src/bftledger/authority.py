"""One authority: message dispatch over its account ledger, swap instances,
and auction objects, plus the canonical state snapshot.

The authority validates certificates and signs votes; domain modules decide.
Cross-shard effects are returned addressed to the authority itself and travel
through the (never-dropping, possibly delaying and duplicating) internal
queue, even when source and target live on the same shard.
"""

from __future__ import annotations

from typing import Any, Callable

from . import assets, errors
from .accounts import (
    AccountId,
    CreditEffect,
    InitAccountEffect,
    Ledger,
    Request,
    SetOwnerEffect,
    UnlockEffect,
)
from .auction import AuctionService, EscrowDebitEffect, InitAuctionEffect, apply_escrow_debit
from .committee import Certificate, Committee, check_certificate, make_vote, value_digest
from .errors import ProtocolError, err
from .keys import Signer, digest32
from .messages import (
    AccountInfoReply,
    AckReply,
    CertifyAssetMsg,
    CommitMsg,
    ConfirmMsg,
    EndOfAuctionMsg,
    EndOfBiddingMsg,
    ErrorReply,
    HandleRequestMsg,
    InstanceViewReply,
    PreCommitMsg,
    ProposalMsg,
    QueryAccountMsg,
    QueryInstanceMsg,
    SettleAuctionMsg,
    SharesQueryMsg,
    SharesReply,
    SubmitBidMsg,
    TransmuteMsg,
    TransmuteReply,
    VoteReply,
)
from .swap import InitInstanceEffect, RoundSchedule, SwapService
from .serialize import encode


def shard_of(uid: AccountId, shard_count: int) -> int:
    return digest32(encode(uid))[0] % shard_count


class Authority:
    honest = True

    def __init__(
        self,
        index: int,
        signer: Signer,
        committee: Committee,
        *,
        shard_count: int = 4,
        algebra_of: Callable[[AccountId], str] = lambda _uid: "balance",
        schedule: RoundSchedule = RoundSchedule(),
        parity_leader: bool = False,
        disabled_rules: frozenset = frozenset(),
        tpke_public=None,
        tpke_share=None,
    ):
        self.index = index
        self.name = f"auth:{index}"
        self.signer = signer
        self.committee = committee
        self.shard_count = shard_count
        self.warnings: list[str] = []
        self.ledger = Ledger(algebra_of, warn=self.warnings.append)
        self.ledger.on_mutate = self._check_account
        self.swaps = SwapService(
            committee,
            schedule=schedule,
            parity_leader=parity_leader,
            disabled_rules=disabled_rules,
        )
        self.auctions = AuctionService(committee, tpke_public=tpke_public, tpke_share=tpke_share)
        self._notes: list[tuple] = []

    # -- helpers --

    def _check_account(self, uid: AccountId, account) -> None:
        if not account.alg.is_valid(account.state):
            self._notes.append(("invalid_state", uid, account.state))

    def _vote(self, statement: Any):
        vote = make_vote(self.index, self.signer, statement)
        self._notes.append(("vote", statement))
        return VoteReply(value=statement, vote=vote)

    def _accept_cert(self, cert: Certificate, kind: str) -> None:
        signers = tuple(sorted(v.signer for v in cert.votes))
        self._notes.append(("cert_accepted", kind, signers, value_digest(cert.value)))

    def _swap_note(self, swid: AccountId) -> None:
        exists, proposed, locked = self.swaps.query(swid)
        if exists:
            locked_p = locked.value.proposal if locked is not None else None
            self._notes.append(("swap_state", swid, proposed, locked_p))

    # -- dispatch --

    def handle(self, src: str, payload: Any, now: int):
        """Process one delivery; returns ([(dest, payload), ...], notes)."""
        self._notes = []
        try:
            outputs = self._dispatch(src, payload, now)
        except ProtocolError as exc:
            outputs = [(src, ErrorReply(code=exc.code, detail=exc.detail))]
        return outputs, self._notes

    def _dispatch(self, src: str, payload: Any, now: int):
        if isinstance(payload, HandleRequestMsg):
            request = self.ledger.handle_request(payload.auth)
            return [(src, self._vote(request))]

        if isinstance(payload, ConfirmMsg):
            cert = payload.cert
            if not isinstance(cert.value, Request) or not check_certificate(self.committee, cert):
                raise err(errors.BAD_CERTIFICATE, "confirmation")
            self._accept_cert(cert, "request")
            effects = self.ledger.handle_confirmation(cert)
            return [(self.name, eff) for eff in effects] + [(src, AckReply("ok"))]

        if isinstance(payload, QueryAccountMsg):
            account = self.ledger.accounts.get(payload.id)
            if account is None:
                return [(src, AccountInfoReply(False, False, 0, 0, False))]
            return [
                (
                    src,
                    AccountInfoReply(
                        exists=True,
                        active=account.pk is not None,
                        next_sequence=account.next_sequence,
                        balance=account.balance,
                        busy=account.pending is not None,
                    ),
                )
            ]

        if isinstance(payload, ProposalMsg):
            statement = self.swaps.handle_proposal(payload.auth, payload.lock1, payload.lock2, now)
            self._swap_note(statement.proposal.swid)
            return [(src, self._vote(statement))]

        if isinstance(payload, PreCommitMsg):
            statement = self.swaps.handle_pre_commit(payload.cert)
            self._accept_cert(payload.cert, "pre_commit")
            self._swap_note(statement.proposal.swid)
            return [(src, self._vote(statement))]

        if isinstance(payload, CommitMsg):
            effects = self.swaps.handle_commit(payload.cert, payload.lock1, payload.lock2)
            self._accept_cert(payload.cert, "commit")
            return [(self.name, eff) for eff in effects] + [(src, AckReply("ok"))]

        if isinstance(payload, QueryInstanceMsg):
            exists, proposed, locked = self.swaps.query(payload.swid)
            created = self.swaps.instances[payload.swid].created_at if exists else 0
            return [(src, InstanceViewReply(exists, created, proposed, locked))]

        if isinstance(payload, CertifyAssetMsg):
            binding = assets.handle_certify(self.ledger, payload.auth)
            return [(src, self._vote(binding))]

        if isinstance(payload, TransmuteMsg):
            bindings = assets.handle_transmute(self.ledger, self.committee, payload.request)
            items = tuple(
                (binding, make_vote(self.index, self.signer, binding)) for binding in bindings
            )
            for binding, _vote in items:
                self._notes.append(("vote", binding))
            return [(src, TransmuteReply(items=items))]

        if isinstance(payload, SubmitBidMsg):
            statement = self.auctions.handle_submit_bid(payload.auth)
            self._notes.append(("bid_accepted", statement.auction_id, statement.bidder))
            return [(src, self._vote(statement))]

        if isinstance(payload, EndOfBiddingMsg):
            statement = self.auctions.handle_end_of_bidding(payload.auth)
            self._notes.append(("phase", statement.auction_id, "revealing"))
            return [(src, self._vote(statement))]

        if isinstance(payload, SharesQueryMsg):
            shares = self.auctions.release_shares(payload.cert)
            self._accept_cert(payload.cert, "end_of_bidding")
            auction_id = payload.cert.value.auction_id
            self._notes.append(("phase", auction_id, "revealing"))
            return [(src, SharesReply(auction_id=auction_id, shares=shares))]

        if isinstance(payload, EndOfAuctionMsg):
            statement = self.auctions.handle_end_of_auction(payload.auth, payload.eob_cert)
            return [(src, self._vote(statement))]

        if isinstance(payload, SettleAuctionMsg):
            effects = self.auctions.apply_settlement(payload.cert, payload.eob_cert)
            if effects:
                self._accept_cert(payload.cert, "end_of_auction")
                self._notes.append(("phase", payload.cert.value.auction_id, "settled"))
            return [(self.name, eff) for eff in effects] + [(src, AckReply("ok"))]

        # Internal cross-shard effects (addressed to ourselves).
        if isinstance(payload, InitAccountEffect):
            self.ledger.apply_init_account(payload)
            return []
        if isinstance(payload, CreditEffect):
            more = self.ledger.apply_credit(payload)
            return [(self.name, eff) for eff in more]
        if isinstance(payload, UnlockEffect):
            self.ledger.apply_unlock(payload)
            return []
        if isinstance(payload, SetOwnerEffect):
            self.ledger.apply_set_owner(payload)
            return []
        if isinstance(payload, EscrowDebitEffect):
            apply_escrow_debit(self.ledger, payload)
            return []
        if isinstance(payload, InitInstanceEffect):
            self.swaps.init_instance(payload, now)
            return []
        if isinstance(payload, InitAuctionEffect):
            self.auctions.init_auction(payload)
            return []

        raise err(errors.BAD_VALUE, f"unhandled message {type(payload).__name__}")

    # -- snapshots --

    def snapshot_accounts(self, include_pending: bool = True) -> str:
        """Canonical text of every live account.

        With ``include_pending=False`` this is the certificate-derived state
        only, which must be byte-identical across replicas that executed the
        same certificates (pending is set by uncertified requests and may
        legitimately differ)."""
        lines = []
        for uid in sorted(self.ledger.accounts):
            account = self.ledger.accounts[uid]
            lines.append(f"[account {uid}]")
            lines.append(f"shard: {shard_of(uid, self.shard_count)}")
            lines.append(f"pk: {account.pk.hex() if account.pk else '-'}")
            lines.append(f"algebra: {account.algebra}")
            lines.append(f"state: {account.alg.encode_state(account.state).hex()}")
            lines.append(f"balance: {account.balance}")
            lines.append(f"next_sequence: {account.next_sequence}")
            if include_pending:
                pending = value_digest(account.pending).hex() if account.pending else "-"
                lines.append(f"pending: {pending}")
            confirmed = ",".join(value_digest(c.value).hex()[:16] for c in account.confirmed)
            lines.append(f"confirmed: {confirmed}")
            received = ",".join(sorted(d.hex()[:16] for d in account.received))
            lines.append(f"received: {received}")
        return "\n".join(lines) + "\n"

    def consistency_snapshot(self) -> str:
        return self.snapshot_accounts(include_pending=False)

    def snapshot(self) -> str:
        lines = [f"# authority {self.index} snapshot v1"]
        lines.append(self.snapshot_accounts().rstrip("\n"))
        for swid in sorted(self.swaps.instances):
            inst = self.swaps.instances[swid]
            lines.append(f"[instance {swid}]")
            lines.append(f"accounts: {inst.id1} @{inst.n1} / {inst.id2} @{inst.n2}")
            lines.append(f"pk1: {inst.pk1.hex() if inst.pk1 else '-'}")
            lines.append(f"pk2: {inst.pk2.hex() if inst.pk2 else '-'}")
            proposed = (
                f"{inst.proposed.round}:{inst.proposed.decision.name}" if inst.proposed else "-"
            )
            lines.append(f"proposed: {proposed}")
            locked = (
                f"{inst.locked.value.proposal.round}:{inst.locked.value.proposal.decision.name}"
                if inst.locked
                else "-"
            )
            lines.append(f"locked: {locked}")
        for auction_id in sorted(self.auctions.auctions):
            auction = self.auctions.auctions[auction_id]
            lines.append(f"[auction {auction_id}]")
            lines.append(f"seller: {auction.seller}")
            lines.append(f"item: {auction.item}")
            lines.append(f"rule: {auction.rule.name}")
            lines.append(f"phase: {auction.phase.name}")
            lines.append(f"bids: {len(auction.bids)}")
        for uid in sorted(self.ledger.tombstones):
            lines.append(f"[tombstone {uid}] {self.ledger.tombstones[uid].hex()[:16]}")
        for swid in sorted(self.swaps.tombstones):
            lines.append(f"[instance-tombstone {swid}]")
        for auction_id in sorted(self.auctions.settled):
            lines.append(f"[auction-settled {auction_id}]")
        return "\n".join(lines) + "\n"

    def total_money(self) -> int:
        return sum(acct.balance for acct in self.ledger.accounts.values())


class ArbitrarySigner(Authority):
    """Byzantine authority: signs whatever it is asked to, checks nothing.

    It can equivocate freely with its own key but cannot forge other
    authorities' signatures; its local state is frozen and excluded from
    honest-state audits.
    """

    honest = False

    def _dispatch(self, src: str, payload: Any, now: int):
        from .swap import CommitStatement, PreCommitStatement, Proposal

        if isinstance(payload, HandleRequestMsg):
            return [(src, self._vote(payload.auth.payload))]
        if isinstance(payload, ProposalMsg):
            proposal = payload.auth.payload
            if isinstance(proposal, Proposal):
                return [(src, self._vote(PreCommitStatement(proposal)))]
            return []
        if isinstance(payload, PreCommitMsg):
            value = payload.cert.value
            if isinstance(value, PreCommitStatement):
                return [(src, self._vote(CommitStatement(value.proposal)))]
            return []
        if isinstance(payload, QueryInstanceMsg):
            return [(src, InstanceViewReply(False, 0, None, None))]
        if isinstance(payload, QueryAccountMsg):
            return [(src, AccountInfoReply(False, False, 0, 0, False))]
        return [(src, AckReply("ok"))]
