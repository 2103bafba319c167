"""Driver-level protocol behavior against a controlled authority world."""

import pytest

from bftledger.accounts import AccountId, LockInto, StartConsensusInstance, execute_request, lock_request
from bftledger.authority import Authority
from bftledger.committee import aggregate_certificate, authenticate
from bftledger.drivers import DriverLog, drive_round, gather_votes
from bftledger.messages import HandleRequestMsg, PreCommitMsg, ProposalMsg, VoteReply
from bftledger.sim import NetConfig, Simulator
from bftledger.swap import (
    CommitStatement,
    DecisionValue,
    InitInstanceEffect,
    PreCommitStatement,
    Proposal,
    RoundSchedule,
)

ALICE, BOB, BROKER = AccountId(0), AccountId(1), AccountId(2)
SWID = BROKER.child(0)


@pytest.fixture
def world(harness):
    sim = Simulator(seed=17, net=NetConfig(min_delay=5, max_delay=30), budget=120_000)
    owner1, owner2 = harness.keypair(), harness.keypair()
    creation = harness.certify(
        execute_request(BROKER, 0, StartConsensusInstance(SWID, ALICE, 0, BOB, 0))
    )
    lock1 = harness.certify(lock_request(ALICE, 0, LockInto(SWID, 1, owner1.public_key)))
    lock2 = harness.certify(lock_request(BOB, 0, LockInto(SWID, 2, owner2.public_key)))
    for i in range(4):
        authority = Authority(i, harness.signers[i], harness.committee)
        authority.swaps.init_instance(
            InitInstanceEffect(target=SWID, id1=ALICE, n1=0, id2=BOB, n2=0, cert=creation),
            now=0,
        )
        sim.add_authority(authority)
    return sim, harness, owner1, owner2, lock1, lock2


def test_driver_adopts_observed_locked_decision(world):
    """A leader that wants Confirm but sees a locked Abort pre-commit must
    broadcast that pre-commit and finish with an Abort commit."""
    sim, harness, owner1, owner2, lock1, lock2 = world
    abort = Proposal(SWID, 0, DecisionValue.ABORT)
    for authority in sim.authorities.values():
        authority.swaps.handle_proposal(
            authenticate(abort, owner2.public_key, owner2), lock1, lock2, now=0
        )
    pre_cert = harness.certify(PreCommitStatement(abort))
    for authority in sim.authorities.values():
        authority.swaps.handle_pre_commit(pre_cert)  # every replica locks Abort

    log = DriverLog()
    outcome = {}

    def leader(env):
        status, commit = yield from drive_round(
            env, harness.committee, SWID, owner1, DecisionValue.CONFIRM,
            lock1, lock2, deadline=100_000, delta=100,
            schedule=RoundSchedule(), timeout=1000, log=log,
        )
        outcome["status"] = status
        outcome["commit"] = commit

    sim.add_client("client:leader", leader)
    sim.start_client_at("client:leader", 0)
    sim.run()

    assert outcome["status"] == "committed"
    assert outcome["commit"].value.proposal.decision == DecisionValue.ABORT
    assert any(e[0] == "conflict_observed" for e in log.events)


def test_gather_votes_tolerates_junk(world):
    sim, harness, owner1, owner2, lock1, lock2 = world
    request = lock_request(ALICE, 0, LockInto(SWID, 1, owner1.public_key))
    # one authority is silenced; the other three still reach quorum
    sim.crash_at["auth:3"] = 0
    result = {}

    def client(env):
        # accounts do not exist at the authorities, so handle_request errors;
        # gather votes on a proposal instead, which only needs the instance
        proposal = Proposal(SWID, 0, DecisionValue.CONFIRM)
        auth = authenticate(proposal, owner1.public_key, owner1)
        cert = yield from gather_votes(
            env, harness.committee, ProposalMsg(auth, lock1, lock2),
            lambda v: v == PreCommitStatement(proposal), timeout=1500, log=DriverLog(),
        )
        result["cert"] = cert

    sim.add_client("client:x", client)
    sim.start_client_at("client:x", 0)
    sim.run()
    assert result["cert"] is not None
    assert len(result["cert"].votes) == 3


def test_drive_round_reports_deleted_instance(world):
    sim, harness, owner1, owner2, lock1, lock2 = world
    commit = harness.certify(CommitStatement(Proposal(SWID, 0, DecisionValue.ABORT)))
    for authority in sim.authorities.values():
        authority.swaps.handle_commit(commit, lock1, lock2)
    outcome = {}

    def leader(env):
        status, cert = yield from drive_round(
            env, harness.committee, SWID, owner1, DecisionValue.CONFIRM,
            lock1, lock2, deadline=20_000, delta=100,
            schedule=RoundSchedule(), timeout=1000, log=DriverLog(),
        )
        outcome["status"] = status

    sim.add_client("client:leader", leader)
    sim.start_client_at("client:leader", 0)
    sim.run()
    assert outcome["status"] == "deleted"
