"""End-to-end attack simulation.

The adversary controls both endpoints of every payment: a *source* node that
opens a channel to each victim, and a *target* node the victims forward to.
The run proceeds in four phases:

  I.   open source->victim channels (attacker-funded) and victim->target
       channels (victim-funded), optionally sitting out a feerate-
       minimization window first;
  II.  load every source->victim channel with the maximum number of HTLCs it
       will carry, all sized identically and all expiring at the same height;
  III. the target settles every forwarded HTLC off-chain -- handing the
       victims the preimages -- while the source goes silent, so the incoming
       HTLCs can only be redeemed on-chain;
  IV.  victims force-close when expiry minus their broadcast delta arrives
       and race to confirm success claims; from the expiry height on, the
       attacker broadcasts single-signer timeout claims, replacing any victim
       claim still in the mempool.

Accounting: an HTLC is stolen when the attacker's timeout claim confirms, or
-- if the chain stalls -- when at quiescence the attacker holds the only live
claim on it and the victim is locked out (the pending claim does not signal
replaceability and any competing victim spend would be rejected).
"""
from __future__ import annotations

import multiprocessing
import random
from dataclasses import dataclass, field, replace

from .chain import ChainState, DEFAULT_BLOCKMAXWEIGHT, OutputRef, Transaction, TxOutput
from .channel import (
    Channel, ChannelParams, CounterpartyUnresponsive, FUNDING_TX_WEIGHT, Wallet,
    WeightSchedule, fee_for_weight, open_channel, profile_params,
)
from .fees import FeerateSeries, parse_strategy

SOURCE = "attacker-source"
TARGET = "attacker-target"
CPFP_CHILD_WEIGHT = 400


class ConfigError(ValueError):
    pass


def compute_htlc_value(balance: int, max_in_flight: int | None,
                       max_htlcs: int, commitment_fee: int) -> int:
    """Largest uniform HTLC amount that lets `max_htlcs` payments fit in the
    offerer's balance net of the commitment fee (and under the receiver's
    in-flight cap)."""
    if max_htlcs < 1:
        raise ConfigError("max_htlcs must be at least 1")
    if balance <= commitment_fee:
        raise ConfigError(
            f"balance {balance} does not cover commitment fee {commitment_fee}")
    spendable = balance - commitment_fee
    if max_in_flight is not None:
        spendable = min(spendable, max_in_flight)
    return spendable // max_htlcs


@dataclass(frozen=True)
class TrafficSpec:
    """Synthetic competing traffic: `txs_per_tick` fillers per tick with
    weight and feerate drawn uniformly from the given ranges, active on
    heights in [start_height, end_height)."""
    txs_per_tick: int = 0
    weight_low: int = 500
    weight_high: int = 20_000
    feerate_low: int = 500
    feerate_high: int = 20_000
    start_height: int = 0
    end_height: int | None = None


@dataclass
class AttackConfig:
    num_victim_channels: int
    victim_profile: str | ChannelParams = "lnd"
    htlc_expiry_height: int = 44
    channel_funding: int = 10_000_000
    channel_feerate: int = 2_000
    attacker_fee_bump_increment: int = 1
    blockmaxweight: int = DEFAULT_BLOCKMAXWEIGHT
    weights: WeightSchedule = field(default_factory=WeightSchedule)
    seed: int = 0
    min_htlc_amount: int = 1
    feerate_strategy: str = "naive"
    feerate_series: FeerateSeries | None = None
    background_traffic: TrafficSpec | None = None
    preimage_release: str = "batch"  # batch | staggered (one channel per tick)
    attacker_claims_replaceable: bool = False
    # Victim-side behavior knobs; MitigationPolicy.apply() sets these.
    victim_claims_replaceable: bool = True
    dynamic_delta: tuple[float, int] | None = None  # (blocks per pending HTLC, cap)
    anchor_mode: bool = False
    victim_bump_feerate: int = 25_000
    victim_bump_offset: int = 2
    victim_bump_funds: bool = True
    cpfp_demo: bool = False
    cpfp_child_feerate: int = 25_000
    victim_first_at_expiry: bool = False
    drain_cap: int = 300

    def victim_params(self) -> ChannelParams:
        if isinstance(self.victim_profile, ChannelParams):
            return self.victim_profile
        return profile_params(self.victim_profile)


@dataclass(frozen=True, slots=True)
class TraceRow:
    height: int
    weight_used: int
    victim_claims_confirmed: int
    attacker_claims_confirmed: int


@dataclass(frozen=True)
class AttackReport:
    num_victim_channels: int
    htlcs_per_channel: int
    htlc_value: int
    total_htlcs: int
    stolen_htlcs: int
    victim_claimed_htlcs: int
    unresolved_htlcs: int
    stolen_value: int
    victim_fees_paid: int
    attacker_cost: int
    launch_feerate: int
    end_height: int
    per_channel_stolen: tuple[int, ...]
    trace: tuple[TraceRow, ...]


def validate_config(cfg: AttackConfig) -> None:
    if cfg.num_victim_channels < 1:
        raise ConfigError("num_victim_channels must be at least 1")
    if cfg.channel_funding <= 0:
        raise ConfigError("channel_funding must be positive")
    if cfg.channel_feerate <= 0:
        raise ConfigError("channel_feerate must be positive")
    if cfg.attacker_fee_bump_increment < 1:
        raise ConfigError("attacker_fee_bump_increment must be at least 1")
    if cfg.blockmaxweight <= 0:
        raise ConfigError("blockmaxweight must be positive")
    if cfg.min_htlc_amount < 0:
        raise ConfigError("min_htlc_amount must be non-negative")
    if cfg.preimage_release not in ("batch", "staggered"):
        raise ConfigError(f"unknown preimage_release {cfg.preimage_release!r}")
    kind, _ = parse_strategy(cfg.feerate_strategy)
    if kind == "minimize" and cfg.feerate_series is None:
        raise ConfigError("minimize strategy requires a feerate_series")
    if cfg.anchor_mode and not cfg.victim_claims_replaceable:
        raise ConfigError("anchor_mode needs replaceable victim claims to re-issue them")
    cfg.victim_params()  # raises on unknown profile


def run_attack(cfg: AttackConfig) -> AttackReport:
    validate_config(cfg)
    return _Run(cfg).execute()


class _Run:
    def __init__(self, cfg: AttackConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.chain = ChainState(cfg.blockmaxweight)
        self.weights = cfg.weights
        self.victim_params = cfg.victim_params()
        self.expiry = cfg.htlc_expiry_height
        self.channels: list[tuple[Channel, Channel, str]] = []  # (incoming, outgoing, victim)
        # Bookkeeping keyed by (channel index, htlc id).
        self.meta: dict[str, tuple[str, int, int]] = {}  # txid -> (kind, idx, htlc id)
        self.victim_pending: dict[tuple[int, int], str] = {}
        self.attacker_pending: dict[tuple[int, int], str] = {}
        self.unresolved: dict[tuple[int, int], None] = {}
        self.blocked: set[tuple[int, int]] = set()
        self.bumped: set[tuple[int, int]] = set()
        self.claims_released: set[int] = set()
        self.released_channels: set[int] = set()
        self.victim_fees = 0
        self.attacker_cost = 0
        self.victim_claim_confirmed = 0
        self.attacker_claim_confirmed = 0
        self.trace: list[TraceRow] = []
        self.launch_feerate = 0
        self.htlc_value = 0
        self.htlcs_per_channel = 0
        self.no_bump_funds = False

    # -- phases ------------------------------------------------------------

    def execute(self) -> AttackReport:
        self._open_channels()
        self._minimize_feerate()
        self._load_htlcs()
        if self.cfg.preimage_release == "batch":
            for i in range(len(self.channels)):
                self._release_channel(i)
        self._race()
        self.chain.audit()   # conservation + double-spend replay, every run
        return self._classify()

    def _open_channels(self) -> None:
        cfg = self.cfg
        chain = self.chain
        feerate = cfg.channel_feerate
        if cfg.feerate_series is not None:
            feerate = cfg.feerate_series.estimate_at(chain.height)
        source_params = ChannelParams(channel_feerate=feerate)
        victim = replace(self.victim_params, channel_feerate=feerate)
        self.victim_params = victim
        target_params = ChannelParams(
            max_accepted_htlcs=max(1000, victim.max_accepted_htlcs),
            channel_feerate=feerate, commitment_broadcast_delta=1, htlc_expiry_delta=1)
        fund_fee = fee_for_weight(feerate, FUNDING_TX_WEIGHT)
        source_wallet = Wallet(SOURCE)
        fund_ids = []
        for i in range(cfg.num_victim_channels):
            name = f"victim{i:03d}"
            source_wallet.deposit(chain.grant(SOURCE, cfg.channel_funding + fund_fee))
            ch_in = open_channel(chain, f"a{i:03d}", SOURCE, name, cfg.channel_funding,
                                 source_params, victim, source_wallet, self.weights)
            w = Wallet(name)
            w.deposit(chain.grant(name, cfg.channel_funding + fund_fee))
            ch_out = open_channel(chain, f"b{i:03d}", name, TARGET, cfg.channel_funding,
                                  victim, target_params, w, self.weights)
            self.meta[f"a{i:03d}-fund"] = ("fund", i, -1)
            self.channels.append((ch_in, ch_out, name))
            fund_ids.append(ch_in.funding_outpoint.txid)
            fund_ids.append(ch_out.funding_outpoint.txid)
        while any(not chain.is_confirmed(t) for t in fund_ids):
            block = self._mine()
            if block.weight_used == 0:
                raise ConfigError(
                    "funding transactions cannot confirm under this blockmaxweight")

    def _minimize_feerate(self) -> None:
        kind, duration = parse_strategy(self.cfg.feerate_strategy)
        current = self.channels[0][0].feerate if self.channels else 0
        if kind == "minimize":
            series = self.cfg.feerate_series
            for _ in range(duration):
                estimate = series.estimate_at(self.chain.height)
                if 0 < estimate < current:
                    # Every node watches the same fee market, so the victims
                    # renegotiate their outgoing channels in step with the
                    # attacker's proposals on the incoming ones.
                    for ch_in, ch_out, name in self.channels:
                        ok, why = ch_in.update_fee(SOURCE, estimate, estimate)
                        if not ok:
                            raise AssertionError(f"update_fee refused: {why}")
                        ok, why = ch_out.update_fee(name, estimate, estimate)
                        if not ok:
                            raise AssertionError(f"update_fee refused: {why}")
                    current = estimate
                self._background_pass()
                self._mine()
        self.launch_feerate = current

    def _load_htlcs(self) -> None:
        cfg = self.cfg
        load_height = self.chain.height
        victim = self.victim_params
        count = victim.max_accepted_htlcs
        needed = victim.htlc_expiry_delta + 1
        if cfg.preimage_release == "staggered":
            needed += cfg.num_victim_channels
        if self.expiry - load_height < needed:
            raise ConfigError(
                f"htlc_expiry_height {self.expiry} leaves less than {needed} blocks "
                f"after setup ends at height {load_height}")
        self.htlcs_per_channel = count
        out_expiry = self.expiry - victim.htlc_expiry_delta
        for i, (ch_in, ch_out, name) in enumerate(self.channels):
            fee = ch_in.commitment_fee(count)
            value = compute_htlc_value(ch_in.balances[SOURCE],
                                       victim.max_htlc_value_in_flight, count, fee)
            if value < cfg.min_htlc_amount:
                raise ConfigError(
                    f"HTLC value {value} below configured minimum {cfg.min_htlc_amount}")
            self.htlc_value = value
            for k in range(count):
                hsh, pre = f"h{i:03d}.{k}", f"p{i:03d}.{k}"
                ch_in.add_htlc(SOURCE, value, hsh, pre, self.expiry)
                ch_out.add_htlc(name, value, hsh, pre, out_expiry, known_to=(TARGET,))
                self.unresolved[(i, k)] = None

    def _release_channel(self, i: int) -> None:
        """Phase III for one channel: the target settles the forwarded HTLCs
        (revealing every preimage to the victim) while the source ignores the
        victim's own settlement attempts."""
        ch_in, ch_out, name = self.channels[i]
        ch_in.silent.add(SOURCE)
        for hid in list(ch_out.pending_htlcs):
            htlc_out = ch_out.pending_htlcs[hid]
            ch_out.fulfill_htlc_offchain(hid, htlc_out.preimage)
            htlc_in = ch_in.all_htlcs[hid]
            htlc_in.preimage_known_by.add(name)
            try:
                ch_in.fulfill_htlc_offchain(hid, htlc_in.preimage)
            except CounterpartyUnresponsive:
                pass
            else:
                raise AssertionError("silent source settled an HTLC off-chain")
        self.released_channels.add(i)

    # -- phase IV ------------------------------------------------------------

    def _race(self) -> None:
        cfg = self.cfg
        expiry = self.expiry
        load_height = self.chain.height
        empty_streak = 0
        while True:
            h = self.chain.height
            subs = 0
            if cfg.preimage_release == "staggered":
                i = h - load_height
                if 0 <= i < len(self.channels) and i not in self.released_channels:
                    self._release_channel(i)
            subs += self._victim_close_pass(h)
            subs += self._victim_release_pass(h)
            if cfg.victim_first_at_expiry:
                subs += self._victim_bump_pass(h)
                subs += self._attacker_pass(h) if h >= expiry else 0
            else:
                subs += self._attacker_pass(h) if h >= expiry else 0
                subs += self._victim_bump_pass(h)
            subs += self._background_pass()
            block = self._mine()
            if self.chain.height > expiry:
                if not self.unresolved:
                    break  # every HTLC has a confirmed claim; report is final
                if subs == 0 and not len(self.chain.mempool):
                    break
                if subs == 0 and block.weight_used == 0:
                    empty_streak += 1
                    if empty_streak >= 2:
                        break  # quiescent: whatever is left can never advance
                else:
                    empty_streak = 0
            if self.chain.height >= expiry + cfg.drain_cap:
                break

    def _victim_delta(self, ch: Channel) -> int:
        base = self.victim_params.commitment_broadcast_delta
        if self.cfg.dynamic_delta is None:
            return base
        per_htlc, cap = self.cfg.dynamic_delta
        return min(int(base + per_htlc * len(ch.pending_htlcs)), cap)

    def _victim_close_pass(self, h: int) -> int:
        subs = 0
        for i, (ch_in, _, name) in enumerate(self.channels):
            if ch_in.status != "open" or not ch_in.pending_htlcs:
                continue
            if i not in self.released_channels:
                continue  # nothing worth going to chain for yet
            if h < self.expiry - self._victim_delta(ch_in):
                continue
            txs = ch_in.force_close(self.chain, name, h, submit_claims=False)
            self.meta[txs[0].id] = ("commit", i, -1)
            subs += len(txs)
            if not self.victim_params.wait_for_commit_confirmation:
                subs += self._submit_victim_claims(i, h)
        return subs

    def _victim_release_pass(self, h: int) -> int:
        if not self.victim_params.wait_for_commit_confirmation or h >= self.expiry:
            return 0
        subs = 0
        for i, (ch_in, _, name) in enumerate(self.channels):
            if ch_in.status != "force-closing" or i in self.claims_released:
                continue
            if not self.chain.is_confirmed(ch_in.published.txid):
                continue
            subs += self._submit_victim_claims(i, h)
        return subs

    def _submit_victim_claims(self, i: int, h: int) -> int:
        ch_in, _, name = self.channels[i]
        subs = 0
        for htlc in ch_in.pending_htlcs.values():
            if htlc.offerer == name or name not in htlc.preimage_known_by:
                continue
            tx = ch_in.build_htlc_claim(
                name, htlc.id, "success-local", h,
                rbf_signal=self.cfg.victim_claims_replaceable)
            result = self.chain.submit(tx)
            if not result.ok:
                raise AssertionError(f"victim claim rejected: {result.reason}")
            self.meta[tx.id] = ("vclaim", i, htlc.id)
            self.victim_pending[(i, htlc.id)] = tx.id
            subs += 1
        self.claims_released.add(i)
        return subs

    def _attacker_pass(self, h: int) -> int:
        """Timeout-remote claims for every HTLC output not yet confirmed-spent,
        replacing pending victim claims (and their fee-bump children)."""
        cfg = self.cfg
        chain = self.chain
        pending = chain.mempool.pending
        w_timeout = self.weights.htlc_timeout
        subs = 0
        for key in list(self.unresolved):
            if key in self.blocked:
                continue
            mine = self.attacker_pending.get(key)
            if mine is not None and mine in pending:
                continue
            i, hid = key
            ch_in = self.channels[i][0]
            if ch_in.published is None:
                continue  # victim has not closed yet; output does not exist
            fee = fee_for_weight(ch_in.feerate, w_timeout)
            victim_tx = self.victim_pending.get(key)
            if victim_tx is not None and victim_tx in pending:
                evicted = [pending[victim_tx]]
                child = chain.mempool.spent_index.get(OutputRef(victim_tx, 0))
                if child is not None:
                    evicted.append(pending[child])
                need = sum(e.fee for e in evicted) + cfg.attacker_fee_bump_increment
                for ev in evicted:
                    need = max(need, ev.fee * w_timeout // ev.weight + 1)
                fee = max(fee, need)
            tx = ch_in.build_htlc_claim(
                SOURCE, hid, "timeout-remote", h, fee_override=fee,
                rbf_signal=cfg.attacker_claims_replaceable)
            result = chain.submit(tx)
            if result.ok:
                self.meta[tx.id] = ("aclaim", i, hid)
                self.attacker_pending[key] = tx.id
                for evicted_id in result.evicted:
                    kind, ei, ehid = self.meta.get(evicted_id, ("", -1, -1))
                    if kind == "vclaim":
                        self.victim_pending.pop((ei, ehid), None)
                subs += 1
            elif result.reason == "conflict-not-replaceable":
                self.blocked.add(key)
            else:
                raise AssertionError(
                    f"unexpected replacement rejection: {result.reason}")
        return subs

    def _victim_bump_pass(self, h: int) -> int:
        cfg = self.cfg
        subs = 0
        if cfg.anchor_mode and h == self.expiry - cfg.victim_bump_offset:
            subs += self._anchor_bumps(h)
        if cfg.cpfp_demo and h == self.expiry:
            subs += self._cpfp_bumps()
        return subs

    def _anchor_bumps(self, h: int) -> int:
        """With anchor-style commitments the success claim is no longer
        fee-frozen: the victim re-issues it with an extra wallet input at an
        aggressive feerate."""
        cfg = self.cfg
        chain = self.chain
        subs = 0
        for key, old_id in list(self.victim_pending.items()):
            if key in self.bumped or old_id not in chain.mempool.pending:
                continue
            if not cfg.victim_bump_funds:
                self.no_bump_funds = True  # nothing spendable: behaves like baseline
                break
            i, hid = key
            ch_in, _, name = self.channels[i]
            old = chain.mempool.pending[old_id]
            weight = self.weights.htlc_success + 280
            fee = max(fee_for_weight(cfg.victim_bump_feerate, weight),
                      old.fee + 1, old.fee * weight // old.weight + 1)
            spare = chain.grant(name, fee)
            tx = ch_in.build_htlc_claim(
                name, hid, "success-local", h, fee_override=fee, rbf_signal=True,
                extra_input=spare, extra_value=fee, anchor=True)
            result = chain.submit(tx)
            if not result.ok:
                raise AssertionError(f"victim fee bump rejected: {result.reason}")
            self.meta[tx.id] = ("vclaim", i, hid)
            self.victim_pending[key] = tx.id
            self.bumped.add(key)
            subs += 1
        return subs

    def _cpfp_bumps(self) -> int:
        """Futile child-pays-for-parent attempt on still-unconfirmed claims:
        the child inherits the parent's replaceability, so the attacker's
        replacement sweeps both away."""
        cfg = self.cfg
        chain = self.chain
        subs = 0
        for key, parent_id in list(self.victim_pending.items()):
            parent = chain.mempool.pending.get(parent_id)
            if parent is None or key in self.bumped:
                continue
            i, hid = key
            name = self.channels[i][2]
            out_value = parent.outputs[0].value
            fee = min(fee_for_weight(cfg.cpfp_child_feerate, CPFP_CHILD_WEIGHT), out_value)
            child = Transaction(
                id=f"{parent_id}-bump", inputs=(OutputRef(parent_id, 0),),
                outputs=(TxOutput(out_value - fee, name, "claim"),),
                weight=CPFP_CHILD_WEIGHT, fee=fee, rbf_signal=True, origin=name)
            result = chain.submit(child)
            if result.ok:
                self.meta[child.id] = ("bump", i, hid)
                self.bumped.add(key)
                subs += 1
        return subs

    def _background_pass(self) -> int:
        spec = self.cfg.background_traffic
        if spec is None or spec.txs_per_tick <= 0:
            return 0
        chain = self.chain
        rng = self.rng
        h = chain.height
        if h < spec.start_height:
            return 0
        if spec.end_height is not None and h >= spec.end_height:
            return 0
        for j in range(spec.txs_per_tick):
            weight = rng.randint(spec.weight_low, spec.weight_high)
            feerate = rng.randint(spec.feerate_low, spec.feerate_high)
            fee = fee_for_weight(feerate, weight)
            ref = chain.grant("background", 1000 + fee)
            tx = Transaction(id=f"bg{h}.{j}", inputs=(ref,),
                             outputs=(TxOutput(1000, "background", "plain"),),
                             weight=weight, fee=fee, origin="background")
            result = chain.submit(tx)
            if not result.ok:
                raise AssertionError(f"background tx rejected: {result.reason}")
        return spec.txs_per_tick

    def _mine(self):
        block = self.chain.mine_block()
        victim_conf = attacker_conf = 0
        for tx in block.txs:
            kind, i, hid = self.meta.get(tx.id, ("", -1, -1))
            if not kind:
                continue
            if kind == "vclaim":
                self.victim_fees += tx.fee
                self.channels[i][0].mark_claimed(hid, by_timeout=False)
                self.unresolved.pop((i, hid), None)
                self.victim_pending.pop((i, hid), None)
                victim_conf += 1
            elif kind == "aclaim":
                self.attacker_cost += tx.fee
                self.channels[i][0].mark_claimed(hid, by_timeout=True)
                self.unresolved.pop((i, hid), None)
                self.attacker_pending.pop((i, hid), None)
                attacker_conf += 1
            elif kind in ("commit", "fund"):
                self.attacker_cost += tx.fee
            elif kind == "bump":
                self.victim_fees += tx.fee
        self.victim_claim_confirmed += victim_conf
        self.attacker_claim_confirmed += attacker_conf
        self.trace.append(TraceRow(block.height, block.weight_used,
                                   victim_conf, attacker_conf))
        return block

    # -- reporting -----------------------------------------------------------

    def _classify(self) -> AttackReport:
        chain = self.chain
        stolen = victim_claimed = unresolved = 0
        stolen_value = 0
        per_channel = [0] * len(self.channels)
        for i, (ch_in, _, name) in enumerate(self.channels):
            for htlc in ch_in.all_htlcs.values():
                if htlc.state == "claimed-by-success":
                    victim_claimed += 1
                    continue
                if htlc.state == "claimed-by-timeout":
                    stolen += 1
                    stolen_value += htlc.amount
                    per_channel[i] += 1
                    continue
                mine = self.attacker_pending.get((i, htlc.id))
                if mine is not None and mine in chain.mempool:
                    # Quiescent but decided: the attacker's claim is the only
                    # live spend and does not signal replaceability, so the
                    # victim can never displace it.
                    htlc.state = "claimed-by-timeout"
                    stolen += 1
                    stolen_value += htlc.amount
                    per_channel[i] += 1
                else:
                    unresolved += 1
        total = sum(len(c[0].all_htlcs) for c in self.channels)
        if stolen + victim_claimed + unresolved != total:
            raise AssertionError("theft accounting does not add up")
        return AttackReport(
            num_victim_channels=self.cfg.num_victim_channels,
            htlcs_per_channel=self.htlcs_per_channel,
            htlc_value=self.htlc_value,
            total_htlcs=total,
            stolen_htlcs=stolen,
            victim_claimed_htlcs=victim_claimed,
            unresolved_htlcs=unresolved,
            stolen_value=stolen_value,
            victim_fees_paid=self.victim_fees,
            attacker_cost=self.attacker_cost,
            launch_feerate=self.launch_feerate,
            end_height=chain.height,
            per_channel_stolen=tuple(per_channel),
            trace=tuple(self.trace),
        )


# -- closed form and sweeps ---------------------------------------------------


def min_channels_guaranteed_theft(victim_params: ChannelParams | str,
                                  weights: WeightSchedule | None = None,
                                  blockmaxweight: int = DEFAULT_BLOCKMAXWEIGHT,
                                  window: int | None = None) -> int:
    """Channels that provably overflow the victims' claim window: with `n`
    channels the victims need n * (commitment + per-HTLC claim) weight inside
    `window` blocks, so the smallest n whose demand exceeds the window's
    capacity guarantees at least one theft even in the attacker's worst case."""
    if isinstance(victim_params, str):
        victim_params = profile_params(victim_params)
    weights = weights or WeightSchedule()
    if window is None:
        window = victim_params.commitment_broadcast_delta
    if window < 0:
        raise ConfigError("window must be non-negative")
    count = victim_params.max_accepted_htlcs
    per_channel = weights.commitment_weight(count) + count * weights.htlc_success
    return window * blockmaxweight // per_channel + 1


def _sweep_one(cfg: AttackConfig) -> tuple[int, AttackReport]:
    return cfg.num_victim_channels, run_attack(cfg)


def sweep_channels(template: AttackConfig, n_values, jobs: int = 1):
    """Independent runs over channel counts; per-run seeds derive from the
    template seed and n, so curves reproduce regardless of `jobs`."""
    configs = [replace(template, num_victim_channels=n, seed=template.seed + 7919 * n)
               for n in n_values]
    if jobs > 1 and len(configs) > 1:
        with multiprocessing.get_context("fork").Pool(jobs) as pool:
            return pool.map(_sweep_one, configs)
    return [_sweep_one(c) for c in configs]


def break_even_channels(curve) -> int | None:
    """Smallest n on the curve with any theft."""
    for n, report in curve:
        if report.stolen_htlcs > 0:
            return n
    return None
