"""Scenario configuration and the run harness.

A scenario is a JSON document with a versioned header describing the
committee, the network model, fault assignments, genesis accounts, and a
list of timed client action blocks (transfers, swaps, auctions, asset
exchanges, algebra updates). ``run_scenario`` builds the deterministic
simulation, runs it to quiescence or budget, performs the end-of-run full
sync, and wires every invariant audit into the report.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Any, Optional

from . import algebra as algebra_mod
from . import audit, errors, tpke, wire  # noqa: F401  (wire import freezes tags)
from .accounts import AccountId, ApplyUpdate, ChangeKey, OpenAccount, Transfer
from .auction import PriceRule
from .authority import ArbitrarySigner, Authority
from .committee import Committee, value_digest
from .drivers import (
    AuctionContext,
    DriverLog,
    SwapContext,
    Wallet,
    bidder_script,
    broker_script,
    certified_operation,
    certify_asset,
    seller_script,
    swap_owner_script,
    transmute,
)
from .errors import err
from .keys import mac_keypair
from .messages import CommitMsg, ConfirmMsg, SettleAuctionMsg
from .sim import SECOND, NetConfig, Simulator
from .swap import DecisionValue, RoundSchedule

SCHEMA_VERSION = 1


def load_scenario(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    validate_scenario(config)
    return config


def validate_scenario(config: dict) -> None:
    if not isinstance(config, dict):
        raise err(errors.CONFIG_ERROR, "scenario must be a JSON object")
    if config.get("version") != SCHEMA_VERSION:
        raise err(errors.CONFIG_ERROR, f"unsupported scenario version {config.get('version')!r}")
    n = config.get("committee", {}).get("n", 4)
    if n < 4 or (n - 1) % 3 != 0:
        raise err(errors.CONFIG_ERROR, f"committee size must be 3f+1, got {n}")
    f = (n - 1) // 3
    faults = config.get("faults", {})
    byzantine = len(faults.get("arbitrary_signer", []))
    if byzantine > f:
        raise err(errors.CONFIG_ERROR, f"{byzantine} byzantine authorities exceeds f={f}")
    names = [a["name"] for a in config.get("accounts", [])]
    if len(names) != len(set(names)):
        raise err(errors.CONFIG_ERROR, "duplicate account names")
    for action in config.get("actions", []):
        if action.get("kind") not in (
            "transfer", "open_account", "change_key", "apply",
            "swap", "auction", "transmute",
        ):
            raise err(errors.CONFIG_ERROR, f"unknown action kind {action.get('kind')!r}")


def _ticks(seconds: float) -> int:
    return int(round(seconds * SECOND))


def parse_update(obj: dict):
    if "scalar" in obj:
        return algebra_mod.ScalarUpdate(int(obj["scalar"]))
    if "item" in obj:
        return algebra_mod.ItemUpdate(bytes.fromhex(obj["item"]), int(obj["delta"]))
    if "side" in obj:
        return algebra_mod.SideUpdate(int(obj["side"]), parse_update(obj["inner"]))
    raise err(errors.CONFIG_ERROR, f"cannot parse update {obj!r}")


@dataclass
class RunResult:
    sim: Simulator
    committee: Committee
    wallet: Wallet
    account_ids: dict[str, AccountId]
    contexts: dict[str, Any]
    logs: dict[str, DriverLog]
    initial_total: int
    tpke_system: Optional[tpke.TpkeSystem]
    synced_snapshots: dict[str, str] = field(default_factory=dict)
    results: dict[str, Any] = field(default_factory=dict)


@dataclass
class ScenarioReport:
    name: str
    seed: int
    end_time: int
    quiesced: bool
    delivered: int
    dropped: int
    audits: list[audit.AuditResult]
    outcomes: dict[str, Any]

    @property
    def all_passed(self) -> bool:
        return all(a.passed for a in self.audits)

    def to_text(self) -> str:
        lines = [
            f"scenario: {self.name}",
            f"seed: {self.seed}",
            f"simulated time: {self.end_time / SECOND:.3f}s"
            + ("" if self.quiesced else " (budget exceeded)"),
            f"deliveries: {self.delivered}, dropped: {self.dropped}",
            "audits:",
        ]
        lines += [f"  {a.line()}" for a in self.audits]
        for a in self.audits:
            for v in a.violations[:10]:
                lines.append(f"    ! {v}")
        if self.outcomes:
            lines.append("outcomes:")
            for key in sorted(self.outcomes):
                lines.append(f"  {key}: {self.outcomes[key]}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "seed": self.seed,
                "end_time_ticks": self.end_time,
                "quiesced": self.quiesced,
                "delivered": self.delivered,
                "dropped": self.dropped,
                "audits": [
                    {"name": a.name, "passed": a.passed, "violations": a.violations}
                    for a in self.audits
                ],
                "outcomes": {k: repr(v) for k, v in self.outcomes.items()},
            },
            indent=2,
            sort_keys=True,
        )


def run_scenario(config: dict, seed: Optional[int] = None) -> tuple[RunResult, ScenarioReport]:
    validate_scenario(config)
    seed = config.get("seed", 0) if seed is None else seed
    rng = random.Random(seed)

    committee_cfg = config.get("committee", {})
    n = committee_cfg.get("n", 4)
    shards = committee_cfg.get("shards", 4)
    signers = [mac_keypair(rng) for _ in range(n)]
    committee = Committee(tuple(s.public_key for s in signers))

    net_cfg = config.get("net", {})
    net = NetConfig(
        min_delay=net_cfg.get("min_delay_ms", 10),
        max_delay=net_cfg.get("max_delay_ms", 120),
        drop=net_cfg.get("drop", 0.0),
        dup=net_cfg.get("dup", 0.0),
        gst=_ticks(net_cfg.get("gst_seconds", 0.0)),
        gst_bound=net_cfg.get("gst_bound_ms", 150),
        xshard_min=net_cfg.get("xshard_min_ms", 1),
        xshard_max=net_cfg.get("xshard_max_ms", 60),
        xshard_dup=net_cfg.get("xshard_dup", 0.05),
    )
    timeout = max(500, 4 * net.max_delay)
    delta = config.get("consensus", {}).get("delta_ms", 4 * net.max_delay)

    consensus_cfg = config.get("consensus", {})
    schedule = RoundSchedule(
        interval=_ticks(consensus_cfg.get("interval_seconds", 1.0)),
        escalation_round=consensus_cfg.get("escalation_round", 8),
    )
    parity = consensus_cfg.get("parity_leader", False)

    # Genesis accounts: root index is list position; children inherit the class.
    account_ids: dict[str, AccountId] = {}
    root_algebra: dict[int, str] = {}
    wallet = Wallet()
    accounts_cfg = config.get("accounts", [])
    for i, acct in enumerate(accounts_cfg):
        uid = AccountId(i)
        account_ids[acct["name"]] = uid
        root_algebra[i] = acct.get("algebra", "balance")
    owner_signers = {}
    for i, acct in enumerate(accounts_cfg):
        owner_signers[acct["name"]] = mac_keypair(rng)
    for i, acct in enumerate(accounts_cfg):
        signer = owner_signers[acct.get("owner", acct["name"])]
        wallet.add(account_ids[acct["name"]], signer)

    def algebra_of(uid: AccountId) -> str:
        return root_algebra.get(uid.root, "balance")

    faults = config.get("faults", {})
    byzantine = set(faults.get("arbitrary_signer", []))
    tpke_system = None
    if any(a.get("kind") == "auction" for a in config.get("actions", [])):
        tpke_system = tpke.setup(n, committee.f + 1, rng=rng)

    authorities = []
    for i in range(n):
        cls = ArbitrarySigner if i in byzantine else Authority
        authorities.append(
            cls(
                i,
                signers[i],
                committee,
                shard_count=shards,
                algebra_of=algebra_of,
                schedule=schedule,
                parity_leader=parity,
                tpke_public=tpke_system.public if tpke_system else None,
                tpke_share=tpke_system.shares[i] if tpke_system else None,
            )
        )
    initial_total = 0
    for i, acct in enumerate(accounts_cfg):
        balance = acct.get("balance", 0)
        initial_total += balance
        for authority in authorities:
            entry = wallet[account_ids[acct["name"]]]
            authority.ledger.init_account(account_ids[acct["name"]], entry.pk, balance=balance)

    sim = Simulator(
        seed=rng.randrange(1 << 62),
        net=net,
        budget=_ticks(config.get("budget_seconds", 120.0)),
    )
    for authority in authorities:
        sim.add_authority(authority)
    for idx, when in faults.get("crash", {}).items():
        sim.crash_at[f"auth:{int(idx)}"] = _ticks(when)
    for idx, p in faults.get("withhold_votes", {}).items():
        sim.withhold[f"auth:{int(idx)}"] = float(p)
    for idx, windows in faults.get("outages", {}).items():
        sim.outages[f"auth:{int(idx)}"] = [(_ticks(a), _ticks(b)) for a, b in windows]

    contexts: dict[str, Any] = {}
    logs: dict[str, DriverLog] = {}
    results: dict[str, Any] = {}

    def add_client(name: str, script_factory, start: float) -> None:
        logs[name] = DriverLog()
        sim.add_client(name, script_factory)
        sim.start_client_at(name, _ticks(start))

    for idx, action in enumerate(config.get("actions", [])):
        kind = action["kind"]
        key = action.get("id", f"{kind}{idx}")
        start = action.get("start", 0.0)

        if kind == "transfer":
            src = account_ids[action["from"]]
            dest = account_ids[action["to"]]
            value = int(action["value"])

            def script(env, _src=src, _dest=dest, _value=value, _key=key):
                log = logs[env.name]
                cert = yield from certified_operation(
                    env, committee, wallet, _src, Transfer(_dest, _value), timeout, log=log
                )
                results[_key] = "ok" if cert else "failed"

            add_client(f"client:{key}", script, start)

        elif kind == "open_account":
            owner = account_ids[action["owner"]]
            child_signer = mac_keypair(rng)

            def script(env, _owner=owner, _signer=child_signer, _key=key,
                       _name=action.get("name")):
                log = logs[env.name]
                entry = wallet[_owner]
                child = _owner.child(entry.next_sequence)
                cert = yield from certified_operation(
                    env, committee, wallet, _owner,
                    OpenAccount(child, _signer.public_key), timeout, log=log,
                )
                if cert:
                    wallet.add(child, _signer)
                    if _name:
                        account_ids[_name] = child
                results[_key] = str(child) if cert else "failed"

            add_client(f"client:{key}", script, start)

        elif kind == "change_key":
            target = account_ids[action["account"]]
            new_signer = mac_keypair(rng)

            def script(env, _target=target, _signer=new_signer, _key=key):
                log = logs[env.name]
                cert = yield from certified_operation(
                    env, committee, wallet, _target, ChangeKey(_signer.public_key),
                    timeout, log=log,
                )
                if cert:
                    wallet[_target].signer = _signer
                results[_key] = "ok" if cert else "failed"

            add_client(f"client:{key}", script, start)

        elif kind == "apply":
            src = account_ids[action["from"]]
            dest = account_ids[action["to"]]
            u_minus = parse_update(action["u_minus"])
            u_plus = parse_update(action["u_plus"])

            def script(env, _src=src, _dest=dest, _um=u_minus, _up=u_plus, _key=key):
                log = logs[env.name]
                cert = yield from certified_operation(
                    env, committee, wallet, _src, ApplyUpdate(_dest, _um, _up),
                    timeout, log=log,
                )
                results[_key] = "ok" if cert else "failed"

            add_client(f"client:{key}", script, start)

        elif kind == "swap":
            id1 = account_ids[action["owner1"]]
            id2 = account_ids[action["owner2"]]
            ctx = SwapContext(id1=id1, n1=0, id2=id2, n2=0)
            contexts[key] = ctx
            handover = {1: mac_keypair(rng), 2: mac_keypair(rng)}
            broker_name = action.get("broker", "owner1")
            broker_id = id1 if broker_name == "owner1" else id2
            drivers_cfg = action.get("drivers", [1])
            deadline = _ticks(action.get("deadline_seconds", config.get("budget_seconds", 120.0)))

            def broker(env, _ctx=ctx, _broker_id=broker_id, _id1=id1, _id2=id2):
                log = logs[env.name]
                # The owners lock after the instance is created, so when the
                # broker is one of them its own creation op bumps its sequence.
                _ctx.n1 = wallet[_id1].next_sequence + (1 if _id1 == _broker_id else 0)
                _ctx.n2 = wallet[_id2].next_sequence + (1 if _id2 == _broker_id else 0)
                yield from broker_script(env, committee, wallet, _broker_id, _ctx, timeout, log)

            add_client(f"client:{key}.broker", broker, start)

            for role, owner_id in ((1, id1), (2, id2)):
                behavior = action.get(f"owner{role}_behavior", "honest")
                if behavior == "absent":
                    continue
                desired_cfg = action.get(f"owner{role}_desired", "auto")
                desired = {
                    "auto": None,
                    "confirm": DecisionValue.CONFIRM,
                    "abort": DecisionValue.ABORT,
                }[desired_cfg]

                def owner(env, _role=role, _uid=owner_id, _ctx=ctx,
                          _handover=handover[role], _behavior=behavior,
                          _desired=desired, _drives=(role in drivers_cfg),
                          _deadline=deadline):
                    log = logs[env.name]
                    yield from swap_owner_script(
                        env, committee, wallet, _uid, _role, _ctx, _handover,
                        timeout, delta, schedule, log,
                        drives=_drives and _behavior != "no_lock",
                        desired=_desired,
                        flip_flop=_behavior == "flip_flop",
                        skip_lock=_behavior == "no_lock",
                        lock_wait=_ticks(action.get("lock_wait_seconds", 4.0)),
                        deadline=_deadline,
                    )

                add_client(
                    f"client:{key}.owner{role}",
                    owner,
                    start + action.get(f"owner{role}_delay", 0.1 * role),
                )

        elif kind == "auction":
            seller_id = account_ids[action["seller"]]
            item_id = account_ids[action["item"]]
            rule = PriceRule.SECOND_PRICE if action.get("rule", "second_price") == "second_price" else PriceRule.FIRST_PRICE
            ctx = AuctionContext(expected_bidders=len(action.get("bidders", [])))
            contexts[key] = ctx

            def seller(env, _seller=seller_id, _item=item_id, _rule=rule, _ctx=ctx,
                       _behavior=action.get("seller_behavior", "honest"),
                       _wait=action.get("bid_wait_seconds", 20.0)):
                log = logs[env.name]
                yield from seller_script(
                    env, committee, wallet, _seller, _item, _rule, _ctx,
                    tpke_system.public, timeout, log,
                    behavior=_behavior, bid_wait=_ticks(_wait),
                )

            add_client(f"client:{key}.seller", seller, start)
            for b_idx, bidder in enumerate(action.get("bidders", [])):
                bidder_id = account_ids[bidder["name"]]

                def bid(env, _uid=bidder_id, _bid=int(bidder["bid"]),
                        _deposit=int(bidder["deposit"]), _ctx=ctx):
                    log = logs[env.name]
                    yield from bidder_script(
                        env, committee, wallet, _uid, _bid, _deposit, _ctx,
                        tpke_system.public, sim.rng, timeout, log,
                    )

                add_client(f"client:{key}.bidder{b_idx}", bid,
                           start + bidder.get("delay", 0.05 * (b_idx + 1)))

        elif kind == "transmute":
            input_names = action["inputs"]
            data = [bytes.fromhex(h) for h in action["data"]]
            params = bytes.fromhex(action.get("params", ""))
            fexec = action["fexec"]
            out_count = int(action.get("outputs", 1))
            repeat = int(action.get("repeat", 1))

            def script(env, _names=input_names, _data=data, _params=params,
                       _fexec=fexec, _out=out_count, _key=key, _repeat=repeat):
                log = logs[env.name]
                input_ids = [account_ids[nm] for nm in _names]
                asset_certs = []
                for uid, payload in zip(input_ids, _data):
                    cert = yield from certify_asset(env, committee, wallet, uid, payload, timeout, log=log)
                    if cert is None:
                        results[_key] = "certify_failed"
                        return
                    asset_certs.append(cert)
                outputs = None
                for _ in range(_repeat):
                    outputs = yield from transmute(
                        env, committee, wallet, _fexec, _params, input_ids,
                        asset_certs, _out, timeout, log=log,
                    )
                    if outputs is None:
                        results[_key] = "failed"
                        return
                results[_key] = [value_digest(c.value).hex() for c in outputs]

            add_client(f"client:{key}", script, start)

    sim.run()

    # Full sync: redeliver every certified message observed in the run (plus
    # certificates still held by clients) to all live honest authorities.
    sync_messages: dict[bytes, Any] = {}
    for event in sim.trace.rich:
        payload = event.payload
        if isinstance(payload, (ConfirmMsg, CommitMsg, SettleAuctionMsg)):
            sync_messages.setdefault(value_digest(payload), payload)
    for ctx in contexts.values():
        if isinstance(ctx, SwapContext):
            if ctx.creation_cert is not None:
                message = ConfirmMsg(ctx.creation_cert)
                sync_messages.setdefault(value_digest(message), message)
            if ctx.commit is not None:
                message = CommitMsg(ctx.commit, ctx.locks.get(1), ctx.locks.get(2))
                sync_messages.setdefault(value_digest(message), message)
    sim.sync_deliver(list(sync_messages.values()))
    synced = {a.name: a.consistency_snapshot() for a in sim.honest_authorities()}

    audits = audit.run_standard_audits(sim, committee, initial_total, synced_snapshots=synced)
    outcomes = dict(results)
    for key, ctx in contexts.items():
        outcomes[key] = getattr(ctx, "outcome", None)

    report = ScenarioReport(
        name=config.get("name", "scenario"),
        seed=seed,
        end_time=sim.now,
        quiesced=not sim.budget_exceeded,
        delivered=sim.stats["delivered"],
        dropped=sim.stats["dropped"],
        audits=audits,
        outcomes=outcomes,
    )
    run = RunResult(
        sim=sim,
        committee=committee,
        wallet=wallet,
        account_ids=account_ids,
        contexts=contexts,
        logs=logs,
        initial_total=initial_total,
        tpke_system=tpke_system,
        synced_snapshots=synced,
        results=results,
    )
    return run, report
