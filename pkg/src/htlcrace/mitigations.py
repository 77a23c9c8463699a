"""Victim-side countermeasures, expressed as policy toggles over the same
attack engine, plus a comparison matrix runner.

Each policy rewrites the victim profile (close earlier, carry fewer HTLCs,
publish claims without waiting) and/or flips engine behavior (anchor-style
fee bumping, non-replaceable success claims, a child-pays-for-parent attempt
that demonstrates why CPFP cannot defend against replacement: evicting the
parent evicts the child with it).
"""
from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, replace

from .attack import AttackConfig, AttackReport, min_channels_guaranteed_theft, run_attack
from .chain import ChainState, Transaction
from .channel import Channel, ChannelParams, fee_for_weight, profile_params


class PolicyError(ValueError):
    pass


class NoBumpFunds(Exception):
    """The victim has no spare confirmed output to fund a fee bump."""


@dataclass(frozen=True)
class MitigationPolicy:
    policy_id: str = "baseline"
    commitment_broadcast_delta_override: int | None = None
    max_accepted_htlcs_override: int | None = None
    immediate_htlc_publication: bool = False
    dynamic_delta: tuple[float, int] | None = None  # (blocks per pending HTLC, cap)
    anchor_outputs_mode: bool = False
    non_replaceable_htlc_success: bool = False
    cpfp_demo: bool = False

    def __post_init__(self):
        if self.anchor_outputs_mode and self.non_replaceable_htlc_success:
            raise PolicyError(
                "anchor_outputs_mode and non_replaceable_htlc_success rewrite the "
                "same claim transactions differently; enable at most one")
        if self.dynamic_delta is not None:
            per_htlc, cap = self.dynamic_delta
            if per_htlc < 0 or cap < 1:
                raise PolicyError("dynamic_delta needs slope >= 0 and cap >= 1")


def apply_policy(policy: MitigationPolicy,
                 victim_profile: str | ChannelParams) -> ChannelParams:
    """Victim profile with the policy's parameter overrides applied."""
    profile = (profile_params(victim_profile) if isinstance(victim_profile, str)
               else victim_profile)
    delta = policy.commitment_broadcast_delta_override
    if delta is not None and not 1 <= delta <= profile.htlc_expiry_delta:
        raise PolicyError(
            f"invalid-override: broadcast delta {delta} outside "
            f"[1, {profile.htlc_expiry_delta}]")
    count = policy.max_accepted_htlcs_override
    if count is not None and count < 1:
        raise PolicyError(f"invalid-override: max_accepted_htlcs {count} < 1")
    changes: dict = {}
    if delta is not None:
        changes["commitment_broadcast_delta"] = delta
    if count is not None:
        changes["max_accepted_htlcs"] = count
    if policy.immediate_htlc_publication:
        changes["wait_for_commit_confirmation"] = False
    return replace(profile, **changes) if changes else profile


def apply_to_config(policy: MitigationPolicy, base: AttackConfig) -> AttackConfig:
    """Attack configuration with the policy in force on the victim side."""
    return replace(
        base,
        victim_profile=apply_policy(policy, base.victim_profile),
        dynamic_delta=policy.dynamic_delta,
        anchor_mode=policy.anchor_outputs_mode,
        victim_claims_replaceable=not policy.non_replaceable_htlc_success,
        cpfp_demo=policy.cpfp_demo,
    )


def anchor_mode_claim_behavior(chain: ChainState, channel: Channel, victim: str,
                               htlc_id: int, height: int, bump_feerate: int,
                               wallet, replacing: Transaction | None = None,
                               extra_weight: int = 280) -> Transaction:
    """Bumped success claim funded from the victim's wallet: picks the first
    spare confirmed output that covers the new fee and rebuilds the claim at
    `bump_feerate` (never below what replacing its own predecessor demands)."""
    weight = channel.weights.htlc_success + extra_weight
    fee = fee_for_weight(bump_feerate, weight)
    if replacing is not None:
        fee = max(fee, replacing.fee + 1,
                  replacing.fee * weight // replacing.weight + 1)
    chosen = None
    for ref in wallet.outpoints:
        if ref in chain.utxo_set and chain.utxo_set[ref].value >= fee:
            chosen = ref
            break
    if chosen is None:
        raise NoBumpFunds(f"no spare output worth {fee} sat in {wallet.owner}'s wallet")
    wallet.outpoints.remove(chosen)
    return channel.build_htlc_claim(
        victim, htlc_id, "success-local", height, fee_override=fee,
        rbf_signal=True, extra_input=chosen,
        extra_value=chain.utxo_set[chosen].value, anchor=True)


@dataclass(frozen=True)
class MatrixRow:
    policy_id: str
    n_channels: int
    stolen_htlcs: int
    stolen_value: int
    break_even_n: int
    report: AttackReport


def _matrix_one(args: tuple[MitigationPolicy, AttackConfig]) -> MatrixRow:
    policy, base = args
    cfg = apply_to_config(policy, base)
    report = run_attack(cfg)
    profile = cfg.victim_params()
    break_even = min_channels_guaranteed_theft(
        profile, cfg.weights, cfg.blockmaxweight)
    return MatrixRow(policy.policy_id, cfg.num_victim_channels,
                     report.stolen_htlcs, report.stolen_value, break_even, report)


def run_mitigation_matrix(base: AttackConfig, policies, jobs: int = 1) -> list[MatrixRow]:
    """One attack run per policy on the shared base config.  break_even_n is
    the closed-form guarantee threshold under the policy's modified profile
    (window = the possibly-overridden broadcast delta)."""
    policies = list(policies)
    if not policies:
        raise PolicyError("policies must be non-empty")
    work = [(p, base) for p in policies]
    if jobs > 1 and len(work) > 1:
        with multiprocessing.get_context("fork").Pool(jobs) as pool:
            return pool.map(_matrix_one, work)
    return [_matrix_one(w) for w in work]
