"""Audit machinery: clean runs pass; a corrupted committee is flagged."""

import random

from bftledger import audit, keys
from bftledger.accounts import AccountId, StartConsensusInstance, execute_request, lock_request, LockInto
from bftledger.authority import ArbitrarySigner, Authority
from bftledger.committee import Committee, aggregate_certificate, authenticate, make_vote
from bftledger.messages import CommitMsg, ConfirmMsg, PreCommitMsg, ProposalMsg, VoteReply
from bftledger.sim import NetConfig, Simulator
from bftledger.swap import CommitStatement, DecisionValue, PreCommitStatement, Proposal


def build_corrupt_world():
    """Two byzantine signers (beyond f=1, deliberately) plus two honest ones."""
    rng = random.Random(31)
    signers = [keys.mac_keypair(rng) for _ in range(4)]
    committee = Committee(tuple(s.public_key for s in signers))
    authorities = [
        Authority(0, signers[0], committee),
        Authority(1, signers[1], committee),
        ArbitrarySigner(2, signers[2], committee),
        ArbitrarySigner(3, signers[3], committee),
    ]
    sim = Simulator(seed=5, net=NetConfig(), budget=120_000)
    for a in authorities:
        sim.add_authority(a)
    return sim, committee, signers, authorities, rng


def certify_all(committee, signers, value):
    votes = [make_vote(i, signers[i], value) for i in range(4)]
    return aggregate_certificate(committee, value, votes)


def test_double_signing_committee_flagged_by_agreement_audit():
    """Negative control: with two equivocating authorities the adversary can
    assemble conflicting commit certificates, and the audit must say so."""
    sim, committee, signers, authorities, rng = build_corrupt_world()
    alice, bob, broker = AccountId(0), AccountId(1), AccountId(2)
    owner1, owner2, broker_key = (keys.mac_keypair(rng) for _ in range(3))
    for a in authorities:
        a.ledger.init_account(alice, owner1.public_key)
        a.ledger.init_account(bob, owner2.public_key)
        a.ledger.init_account(broker, broker_key.public_key)
    swid = broker.child(0)
    creation = certify_all(
        committee, signers,
        execute_request(broker, 0, StartConsensusInstance(swid, alice, 0, bob, 0)),
    )
    lock1 = certify_all(committee, signers, lock_request(alice, 0, LockInto(swid, 1, owner1.public_key)))
    lock2 = certify_all(committee, signers, lock_request(bob, 0, LockInto(swid, 2, owner2.public_key)))

    def attack(env):
        env.broadcast(ConfirmMsg(creation))
        yield env.sleep(2000)

        def propose_to(subset, proposal, signer):
            auth = authenticate(proposal, signer.public_key, signer)
            for dest in subset:
                env.send(dest, ProposalMsg(auth, lock1, lock2))

        def collect(expected, count):
            votes = {}
            while len(votes) < count:
                envelope = yield env.recv(timeout=3000)
                if envelope is None:
                    break
                payload = envelope.payload
                if isinstance(payload, VoteReply) and payload.value == expected:
                    votes[payload.vote.signer] = payload.vote
            return votes

        p_confirm = Proposal(swid, 0, DecisionValue.CONFIRM)
        p_abort = Proposal(swid, 0, DecisionValue.ABORT)
        propose_to(["auth:0", "auth:2", "auth:3"], p_confirm, owner1)
        votes = yield from collect(PreCommitStatement(p_confirm), 3)
        pre_confirm = aggregate_certificate(committee, PreCommitStatement(p_confirm), votes.values())
        propose_to(["auth:1", "auth:2", "auth:3"], p_abort, owner2)
        votes = yield from collect(PreCommitStatement(p_abort), 3)
        pre_abort = aggregate_certificate(committee, PreCommitStatement(p_abort), votes.values())

        for dest in ("auth:0", "auth:2", "auth:3"):
            env.send(dest, PreCommitMsg(pre_confirm))
        votes = yield from collect(CommitStatement(p_confirm), 3)
        commit_confirm = aggregate_certificate(committee, CommitStatement(p_confirm), votes.values())
        for dest in ("auth:1", "auth:2", "auth:3"):
            env.send(dest, PreCommitMsg(pre_abort))
        votes = yield from collect(CommitStatement(p_abort), 3)
        commit_abort = aggregate_certificate(committee, CommitStatement(p_abort), votes.values())
        env.broadcast(CommitMsg(commit_confirm, lock1, lock2))
        env.broadcast(CommitMsg(commit_abort, lock1, lock2))
        yield env.sleep(2000)

    sim.add_client("client:attack", attack)
    sim.start_client_at("client:attack", 0)
    sim.run()

    result = audit.audit_agreement(sim, committee)
    assert not result.passed
    assert "swid" in result.violations[0]


def test_clean_world_audits_pass():
    rng = random.Random(32)
    signers = [keys.mac_keypair(rng) for _ in range(4)]
    committee = Committee(tuple(s.public_key for s in signers))
    sim = Simulator(seed=6, net=NetConfig(), budget=60_000)
    authorities = [Authority(i, signers[i], committee) for i in range(4)]
    alice, bob = AccountId(0), AccountId(1)
    owner = keys.mac_keypair(rng)
    total = 0
    for a in authorities:
        a.ledger.init_account(alice, owner.public_key, balance=40)
        a.ledger.init_account(bob, None)
        sim.add_authority(a)
    total = 40

    def client(env):
        from bftledger.accounts import Transfer
        from bftledger.drivers import Wallet, certified_operation, DriverLog

        wallet = Wallet()
        wallet.add(alice, owner)
        yield from certified_operation(
            env, committee, wallet, alice, Transfer(bob, 15), 1000, log=DriverLog()
        )

    sim.add_client("client:x", client)
    sim.start_client_at("client:x", 0)
    sim.run()
    for result in audit.run_standard_audits(sim, committee, total):
        assert result.passed, (result.name, result.violations)


def test_commit_certificate_collector():
    sim, committee, signers, authorities, rng = build_corrupt_world()
    swid = AccountId(2, (0,))
    commit = certify_all(
        committee, signers, CommitStatement(Proposal(swid, 0, DecisionValue.ABORT))
    )

    def client(env):
        env.broadcast(CommitMsg(commit, None, None))
        yield env.sleep(1000)

    sim.add_client("client:x", client)
    sim.start_client_at("client:x", 0)
    sim.run()
    by_swid = audit.collect_commit_certificates(sim, committee)
    assert swid in by_swid
