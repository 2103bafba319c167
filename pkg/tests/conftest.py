"""Shared fixtures: a 4-authority committee with helpers to mint certificates."""

import random

import pytest

import bftledger.wire  # noqa: F401  (freeze wire tags for every test module)
from bftledger import keys
from bftledger.committee import Committee, aggregate_certificate, make_vote


class CommitteeHarness:
    def __init__(self, seed=11, n=4):
        rng = random.Random(seed)
        self.rng = rng
        self.signers = [keys.mac_keypair(rng) for _ in range(n)]
        self.committee = Committee(tuple(s.public_key for s in self.signers))

    def certify(self, value, signers=None):
        indices = range(self.committee.quorum) if signers is None else signers
        votes = [make_vote(i, self.signers[i], value) for i in indices]
        return aggregate_certificate(self.committee, value, votes)

    def keypair(self):
        return keys.mac_keypair(self.rng)


@pytest.fixture
def harness():
    return CommitteeHarness()
