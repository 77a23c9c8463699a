"""Payment-channel model: balances, HTLCs, commitment transactions and the
four HTLC claim transactions.

The asymmetry the whole simulation turns on lives in build_htlc_claim: claims
spending the *claimer's own* published commitment (success-local /
timeout-local) carry both parties' signatures, so their fee is frozen at the
channel feerate and cannot be overridden after the fact.  Claims spending the
*counterparty's* commitment (success-remote / timeout-remote) need only the
claimer's signature, so that party may attach any fee it likes.

Weights follow the standard BOLT-3 estimates; second-stage HTLC transactions
are collapsed into single direct claims.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from .chain import ChainState, OutputRef, Transaction, TxOutput

COMMITMENT_BASE_WEIGHT = 724
HTLC_OUTPUT_WEIGHT = 172
HTLC_SUCCESS_WEIGHT = 703
HTLC_TIMEOUT_WEIGHT = 663
FUNDING_TX_WEIGHT = 800

CLAIM_KINDS = ("success-local", "success-remote", "timeout-local", "timeout-remote")
_KIND_CODE = {"success-local": "sl", "success-remote": "sr",
              "timeout-local": "tl", "timeout-remote": "tr"}


class ChannelError(Exception):
    pass


class ChannelNotOpen(ChannelError):
    pass


class AlreadyClosing(ChannelError):
    pass


class TooManyHtlcs(ChannelError):
    pass


class ValueInFlightExceeded(ChannelError):
    pass


class InsufficientBalance(ChannelError):
    pass


class HtlcBelowMinimum(ChannelError):
    pass


class HtlcNotPending(ChannelError):
    pass


class UnknownPreimage(ChannelError):
    pass


class CounterpartyUnresponsive(ChannelError):
    pass


class PreimageMissing(ChannelError):
    pass


class PrematureTimeout(ChannelError):
    pass


class FeeOverrideOnDualSigned(ChannelError):
    pass


class WrongClaim(ChannelError):
    pass


class NoPublishedCommitment(ChannelError):
    pass


class InsufficientFunds(ChannelError):
    pass


def fee_for_weight(feerate: int, weight: int) -> int:
    """Satoshi fee at `feerate` sat/kWU, rounded down."""
    return feerate * weight // 1000


@dataclass(frozen=True, slots=True)
class WeightSchedule:
    commitment_base: int = COMMITMENT_BASE_WEIGHT
    per_htlc_output: int = HTLC_OUTPUT_WEIGHT
    htlc_success: int = HTLC_SUCCESS_WEIGHT
    htlc_timeout: int = HTLC_TIMEOUT_WEIGHT

    def __post_init__(self):
        for name in ("commitment_base", "per_htlc_output", "htlc_success", "htlc_timeout"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def commitment_weight(self, htlc_count: int) -> int:
        return self.commitment_base + self.per_htlc_output * htlc_count


@dataclass(frozen=True, slots=True)
class ChannelParams:
    """Per-side channel policy.  Deltas are in blocks: htlc_expiry_delta is
    the minimum slack this side demands between accepting an HTLC and its
    expiry; commitment_broadcast_delta is how many blocks before the earliest
    expiry it unilaterally closes."""
    max_accepted_htlcs: int = 483
    max_htlc_value_in_flight: int | None = None
    to_self_delay: int = 144
    channel_feerate: int = 2000
    commitment_broadcast_delta: int = 10
    htlc_expiry_delta: int = 40
    wait_for_commit_confirmation: bool = True
    htlc_minimum: int = 0

    def __post_init__(self):
        if self.max_accepted_htlcs < 1:
            raise ValueError("max_accepted_htlcs must be at least 1")
        if self.channel_feerate <= 0:
            raise ValueError("channel_feerate must be positive")
        if not 0 < self.commitment_broadcast_delta <= self.htlc_expiry_delta:
            raise ValueError("commitment_broadcast_delta must be in (0, htlc_expiry_delta]")
        if self.max_htlc_value_in_flight is not None and self.max_htlc_value_in_flight < 0:
            raise ValueError("max_htlc_value_in_flight must be non-negative")
        if self.htlc_minimum < 0:
            raise ValueError("htlc_minimum must be non-negative")


# Defaults observed in the three mainstream node implementations.
PROFILES: dict[str, ChannelParams] = {
    "lnd": ChannelParams(max_accepted_htlcs=483, commitment_broadcast_delta=10,
                         htlc_expiry_delta=40, wait_for_commit_confirmation=True),
    "c-lightning": ChannelParams(max_accepted_htlcs=30, commitment_broadcast_delta=7,
                                 htlc_expiry_delta=14, wait_for_commit_confirmation=True),
    "eclair": ChannelParams(max_accepted_htlcs=30, commitment_broadcast_delta=6,
                            htlc_expiry_delta=144, wait_for_commit_confirmation=False),
}


def profile_params(name: str, **overrides) -> ChannelParams:
    if name not in PROFILES:
        raise ValueError(f"unknown node profile {name!r}; know {sorted(PROFILES)}")
    return replace(PROFILES[name], **overrides) if overrides else PROFILES[name]


@dataclass(slots=True)
class Htlc:
    id: int
    amount: int
    payment_hash: str
    preimage: str
    preimage_known_by: set[str]
    expiry_height: int
    offerer: str
    state: str = "pending"  # pending | fulfilled-offchain | failed |
                            # claimed-by-success | claimed-by-timeout


@dataclass(frozen=True, slots=True)
class PublishedCommitment:
    holder: str
    txid: str
    htlc_index: dict[int, int]  # htlc id -> output index on the commitment


@dataclass
class Channel:
    channel_id: str
    initiator: str
    peer: str
    funding_value: int
    funding_outpoint: OutputRef
    params: dict[str, ChannelParams]
    weights: WeightSchedule = field(default_factory=WeightSchedule)
    feerate: int = 0  # current commitment feerate; set at open
    status: str = "open"  # open | force-closing | closed
    balances: dict[str, int] = field(default_factory=dict)
    pending_htlcs: dict[int, Htlc] = field(default_factory=dict)
    all_htlcs: dict[int, Htlc] = field(default_factory=dict)
    silent: set[str] = field(default_factory=set)
    published: PublishedCommitment | None = None
    _next_htlc_id: int = 0
    _offered_count: dict[str, int] = field(default_factory=dict)
    _offered_value: dict[str, int] = field(default_factory=dict)
    _build_count: int = 0

    def __post_init__(self):
        if not self.feerate:
            self.feerate = self.params[self.initiator].channel_feerate
        if not self.balances:
            self.balances = {self.initiator: self.funding_value, self.peer: 0}
        for party in (self.initiator, self.peer):
            self._offered_count.setdefault(party, 0)
            self._offered_value.setdefault(party, 0)

    def other(self, party: str) -> str:
        return self.peer if party == self.initiator else self.initiator

    def commitment_fee(self, htlc_count: int | None = None) -> int:
        count = len(self.pending_htlcs) if htlc_count is None else htlc_count
        return fee_for_weight(self.feerate, self.weights.commitment_weight(count))

    # -- off-chain operations ---------------------------------------------

    def add_htlc(self, offerer: str, amount: int, payment_hash: str,
                 preimage: str, expiry_height: int, known_to=()) -> Htlc:
        if self.status != "open":
            raise ChannelNotOpen(self.channel_id)
        receiver = self.other(offerer)
        accept = self.params[receiver]
        if amount < accept.htlc_minimum:
            raise HtlcBelowMinimum(f"{amount} < {accept.htlc_minimum}")
        if self._offered_count[offerer] >= accept.max_accepted_htlcs:
            raise TooManyHtlcs(f"{accept.max_accepted_htlcs} already pending")
        cap = accept.max_htlc_value_in_flight
        if cap is not None and self._offered_value[offerer] + amount > cap:
            raise ValueInFlightExceeded(f"in-flight cap {cap}")
        new_fee = self.commitment_fee(len(self.pending_htlcs) + 1)
        if offerer == self.initiator:
            if self.balances[offerer] < amount + new_fee:
                raise InsufficientBalance(
                    f"{offerer} has {self.balances[offerer]}, needs {amount + new_fee}")
        else:
            if self.balances[offerer] < amount:
                raise InsufficientBalance(
                    f"{offerer} has {self.balances[offerer]}, needs {amount}")
            if self.balances[self.initiator] < new_fee:
                raise InsufficientBalance(f"initiator cannot cover fee {new_fee}")

        htlc = Htlc(self._next_htlc_id, amount, payment_hash, preimage,
                    set(known_to), expiry_height, offerer)
        self._next_htlc_id += 1
        self.balances[offerer] -= amount
        self.pending_htlcs[htlc.id] = htlc
        self.all_htlcs[htlc.id] = htlc
        self._offered_count[offerer] += 1
        self._offered_value[offerer] += amount
        return htlc

    def fulfill_htlc_offchain(self, htlc_id: int, preimage: str) -> None:
        """Receiver redeems with the preimage; needs the offerer to co-sign
        the updated commitment, so a silent offerer blocks settlement (the
        preimage still travels -- revealing it is a one-way message)."""
        if self.status != "open":
            raise ChannelNotOpen(self.channel_id)
        htlc = self.pending_htlcs.get(htlc_id)
        if htlc is None:
            raise HtlcNotPending(htlc_id)
        if preimage != htlc.preimage:
            raise UnknownPreimage(htlc.payment_hash)
        receiver = self.other(htlc.offerer)
        htlc.preimage_known_by.add(receiver)
        htlc.preimage_known_by.add(htlc.offerer)
        if htlc.offerer in self.silent:
            raise CounterpartyUnresponsive(htlc.offerer)
        self._resolve(htlc, credit_to=receiver, state="fulfilled-offchain")

    def fail_htlc_offchain(self, htlc_id: int) -> None:
        if self.status != "open":
            raise ChannelNotOpen(self.channel_id)
        htlc = self.pending_htlcs.get(htlc_id)
        if htlc is None:
            raise HtlcNotPending(htlc_id)
        if self.other(htlc.offerer) in self.silent:
            raise CounterpartyUnresponsive(self.other(htlc.offerer))
        self._resolve(htlc, credit_to=htlc.offerer, state="failed")

    def _resolve(self, htlc: Htlc, credit_to: str, state: str) -> None:
        self.balances[credit_to] += htlc.amount
        htlc.state = state
        del self.pending_htlcs[htlc.id]
        self._offered_count[htlc.offerer] -= 1
        self._offered_value[htlc.offerer] -= htlc.amount

    def update_fee(self, proposer: str, new_feerate: int,
                   oracle_estimate: int, tolerance: float = 0.10):
        """Initiator-only feerate renegotiation.  The counterparty accepts
        any proposal that tracks its own fee estimate within `tolerance`."""
        if self.status != "open":
            return False, "channel-not-open"
        if proposer != self.initiator:
            return False, "not-initiator"
        if new_feerate <= 0:
            return False, "invalid-feerate"
        if abs(new_feerate - oracle_estimate) > tolerance * oracle_estimate:
            return False, "unreasonable-feerate"
        new_fee = fee_for_weight(new_feerate,
                                 self.weights.commitment_weight(len(self.pending_htlcs)))
        if self.balances[self.initiator] < new_fee:
            return False, "cannot-afford-fee"
        self.feerate = new_feerate
        return True, None

    # -- on-chain transactions ---------------------------------------------

    def build_commitment(self, holder: str) -> Transaction:
        """Holder's current commitment: to_local, to_remote, then one output
        per pending HTLC in id order.  Fee comes out of the initiator's
        output (guaranteed non-negative by add_htlc)."""
        other = self.other(holder)
        weight = self.weights.commitment_weight(len(self.pending_htlcs))
        fee = fee_for_weight(self.feerate, weight)
        local = self.balances[holder] - (fee if holder == self.initiator else 0)
        remote = self.balances[other] - (fee if other == self.initiator else 0)
        if local < 0 or remote < 0:
            raise InsufficientBalance("initiator balance cannot cover commitment fee")
        outputs = [TxOutput(local, holder, "to_local"),
                   TxOutput(remote, other, "to_remote")]
        for hid in self.pending_htlcs:
            outputs.append(TxOutput(self.pending_htlcs[hid].amount, self.channel_id, "htlc"))
        self._build_count += 1
        return Transaction(
            id=f"{self.channel_id}-commit{self._build_count}-{holder}",
            inputs=(self.funding_outpoint,),
            outputs=tuple(outputs),
            weight=weight,
            fee=fee,
            rbf_signal=False,
            origin=holder,
        )

    def force_close(self, chain: ChainState, closer: str, height: int,
                    submit_claims: bool | None = None) -> list[Transaction]:
        """Publish the closer's commitment; implementations that do not wait
        for it to confirm broadcast their HTLC success claims in the same
        tick (as unconfirmed children).  Pass submit_claims=False to publish
        only the commitment and leave claim submission to the caller."""
        if self.status != "open":
            raise AlreadyClosing(self.channel_id)
        commit = self.build_commitment(closer)
        result = chain.submit(commit)
        if not result.ok:
            raise AssertionError(f"commitment rejected: {result.reason}")
        self.status = "force-closing"
        index = {hid: 2 + i for i, hid in enumerate(self.pending_htlcs)}
        self.published = PublishedCommitment(closer, commit.id, index)
        submitted = [commit]
        if submit_claims is None:
            submit_claims = not self.params[closer].wait_for_commit_confirmation
        if submit_claims:
            for tx in self.claimable_successes(closer, height):
                res = chain.submit(tx)
                if res.ok:
                    submitted.append(tx)
        return submitted

    def claimable_successes(self, claimer: str, height: int) -> list[Transaction]:
        """Success-local claims for every pending incoming HTLC whose
        preimage the claimer knows."""
        out = []
        for htlc in self.pending_htlcs.values():
            if htlc.offerer != claimer and claimer in htlc.preimage_known_by:
                out.append(self.build_htlc_claim(claimer, htlc.id, "success-local", height))
        return out

    def build_htlc_claim(self, claimer: str, htlc_id: int, kind: str, height: int,
                         fee_override: int | None = None,
                         rbf_signal: bool | None = None,
                         extra_input: OutputRef | None = None,
                         extra_value: int = 0,
                         extra_weight: int = 280,
                         anchor: bool = False) -> Transaction:
        if kind not in CLAIM_KINDS:
            raise WrongClaim(f"unknown claim kind {kind!r}")
        if self.published is None:
            raise NoPublishedCommitment(self.channel_id)
        htlc = self.all_htlcs.get(htlc_id)
        if htlc is None or htlc_id not in self.published.htlc_index:
            raise HtlcNotPending(htlc_id)
        success = kind.startswith("success")
        local = kind.endswith("local")
        if local != (self.published.holder == claimer):
            raise WrongClaim(f"{kind} does not match published commitment holder")
        if success:
            if htlc.offerer == claimer:
                raise WrongClaim("success claims redeem incoming HTLCs only")
            if claimer not in htlc.preimage_known_by:
                raise PreimageMissing(htlc.payment_hash)
        else:
            if htlc.offerer != claimer:
                raise WrongClaim("timeout claims refund the offerer only")
            if height < htlc.expiry_height:
                raise PrematureTimeout(
                    f"height {height} < expiry {htlc.expiry_height}")
        weight = self.weights.htlc_success if success else self.weights.htlc_timeout
        dual_signed = local
        if dual_signed and not anchor:
            # Both signatures commit to this exact transaction, so neither the
            # fee nor the input set can change afterwards.
            if fee_override is not None:
                raise FeeOverrideOnDualSigned(
                    "pre-signed claim fee is fixed by both signatures")
            if extra_input is not None:
                raise FeeOverrideOnDualSigned(
                    "pre-signed claim cannot gain inputs")
            fee = fee_for_weight(self.feerate, weight)
            rbf = True if rbf_signal is None else bool(rbf_signal)
        elif dual_signed:
            # Anchor-style commitment: the claim is signed with flags that
            # leave room for the claimer to add an input and raise the fee.
            fee = fee_for_weight(self.feerate, weight) if fee_override is None else fee_override
            rbf = True if rbf_signal is None else bool(rbf_signal)
        else:
            fee = fee_for_weight(self.feerate, weight) if fee_override is None else fee_override
            rbf = bool(rbf_signal)
        inputs = [OutputRef(self.published.txid, self.published.htlc_index[htlc_id])]
        total_in = htlc.amount + extra_value
        if extra_input is not None:
            inputs.append(extra_input)
            weight += extra_weight
        fee = min(fee, total_in)
        self._build_count += 1
        return Transaction(
            id=f"{self.channel_id}-{_KIND_CODE[kind]}{self._build_count}-h{htlc_id}",
            inputs=tuple(inputs),
            outputs=(TxOutput(total_in - fee, claimer, "claim"),),
            weight=weight,
            fee=fee,
            rbf_signal=rbf,
            origin=claimer,
        )

    def mark_claimed(self, htlc_id: int, by_timeout: bool) -> None:
        """Record the on-chain outcome of a contested HTLC (exactly once)."""
        htlc = self.all_htlcs[htlc_id]
        if htlc.state not in ("pending",):
            raise AssertionError(f"HTLC {htlc_id} already terminal: {htlc.state}")
        htlc.state = "claimed-by-timeout" if by_timeout else "claimed-by-success"


class Wallet:
    """Flat list of confirmed outpoints a node may spend for funding."""

    def __init__(self, owner: str):
        self.owner = owner
        self.outpoints: list[OutputRef] = []

    def deposit(self, ref: OutputRef) -> None:
        self.outpoints.append(ref)

    def collect(self, chain: ChainState, amount: int) -> tuple[list[OutputRef], int]:
        chosen: list[OutputRef] = []
        total = 0
        for ref in self.outpoints:
            if ref not in chain.utxo_set:
                continue
            chosen.append(ref)
            total += chain.utxo_set[ref].value
            if total >= amount:
                break
        if total < amount:
            raise InsufficientFunds(f"{self.owner}: {total} < {amount}")
        for ref in chosen:
            self.outpoints.remove(ref)
        return chosen, total


def open_channel(chain: ChainState, channel_id: str, initiator: str, peer: str,
                 funding: int, initiator_params: ChannelParams,
                 peer_params: ChannelParams, wallet: Wallet,
                 weights: WeightSchedule | None = None,
                 funding_tx_weight: int = FUNDING_TX_WEIGHT) -> Channel:
    """Fund a channel from the initiator's wallet.  The funding transaction
    is submitted here; it confirms with the next mined block."""
    if funding <= 0:
        raise ValueError("funding must be positive")
    weights = weights or WeightSchedule()
    feerate = initiator_params.channel_feerate
    fee = fee_for_weight(feerate, funding_tx_weight)
    refs, total = wallet.collect(chain, funding + fee)
    outputs = [TxOutput(funding, channel_id, "funding")]
    change = total - funding - fee
    if change > 0:
        outputs.append(TxOutput(change, initiator, "change"))
    tx = Transaction(
        id=f"{channel_id}-fund",
        inputs=tuple(refs),
        outputs=tuple(outputs),
        weight=funding_tx_weight,
        fee=fee,
        origin=initiator,
    )
    result = chain.submit(tx)
    if not result.ok:
        raise AssertionError(f"funding tx rejected: {result.reason}")
    if change > 0:
        wallet.deposit(OutputRef(tx.id, 1))
    return Channel(
        channel_id=channel_id,
        initiator=initiator,
        peer=peer,
        funding_value=funding,
        funding_outpoint=OutputRef(tx.id, 0),
        params={initiator: initiator_params, peer: peer_params},
        weights=weights,
    )
