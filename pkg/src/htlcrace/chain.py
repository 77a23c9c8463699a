"""Closed-world Bitcoin layer: UTXO set, mempool with BIP-125-style
replacement, and greedy feerate-ordered block assembly.

One block is mined per tick, there are no reorgs, and all amounts are integer
satoshis.  Feerates are satoshi per 1000 weight units (sat/kWU); wherever a
policy decision depends on a fee/weight ratio the comparison is done by
integer cross-multiplication so results never hinge on float rounding.

Replacement policy (submit): a transaction conflicting with pending
transactions is accepted only if every direct conflict is replaceable --
meaning it signals replaceability itself or inherits it from an unconfirmed
ancestor -- and the newcomer pays strictly more total fee than everything it
evicts while also beating each evicted transaction's feerate.  Absolute-fee
and rate-limit rules of the full BIP are deliberately out of scope.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

# Consensus cap on a single transaction.  The *mining* limit (blockmaxweight)
# is configurable per chain and may be far smaller; an oversized-for-mining
# transaction is still valid and simply sits in the mempool forever, which is
# exactly how sustained congestion is modelled.
MAX_TX_WEIGHT = 4_000_000
DEFAULT_BLOCKMAXWEIGHT = 4_000_000

REJECT_MISSING_INPUT = "missing-input"
REJECT_NOT_REPLACEABLE = "conflict-not-replaceable"
REJECT_INSUFFICIENT_FEE = "insufficient-replacement-fee"
REJECT_OWN_DOUBLE_SPEND = "double-spend-of-own-input"


class OutputRef(NamedTuple):
    txid: str
    index: int


class TxOutput(NamedTuple):
    value: int
    owner: str
    kind: str = "plain"


@dataclass(frozen=True, slots=True)
class Transaction:
    id: str
    inputs: tuple[OutputRef, ...]
    outputs: tuple[TxOutput, ...]
    weight: int
    fee: int
    rbf_signal: bool = False
    origin: str = ""

    def feerate(self) -> float:
        """sat/kWU as a float; use outranks() when exactness matters."""
        return self.fee * 1000.0 / self.weight

    def outranks(self, other: "Transaction") -> bool:
        """Exact strictly-greater feerate comparison."""
        return self.fee * other.weight > other.fee * self.weight


@dataclass(frozen=True, slots=True)
class SubmitResult:
    status: str                      # accepted | replaced | rejected
    evicted: tuple[str, ...] = ()
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.status != "rejected"


@dataclass(frozen=True, slots=True)
class Block:
    height: int
    txs: tuple[Transaction, ...]
    weight_used: int


@dataclass
class MempoolState:
    """Pending transactions plus the indexes needed for O(1) policy checks.

    spent_index maps every outpoint spent by a pending transaction to the
    spender's id; it is what makes conflict detection and descendant walks
    cheap.  _eligible is a lazy-deletion heap of (sort_key, txid) for
    transactions whose parents are all confirmed; entries whose txid has left
    `pending` are skipped on pop.
    """
    pending: dict[str, Transaction] = field(default_factory=dict)
    spent_index: dict[OutputRef, str] = field(default_factory=dict)
    seq: dict[str, int] = field(default_factory=dict)
    dep_count: dict[str, int] = field(default_factory=dict)
    _eligible: list[tuple[tuple[float, int, int], str]] = field(default_factory=list)
    _next_seq: int = 0

    def sort_key(self, tx: Transaction) -> tuple[float, int, int]:
        # Highest feerate first; at equal feerate smaller transactions pack
        # better under a weight limit, so they win the tie; submission order
        # is the final, determinism-preserving tiebreak.
        return (-tx.fee * 1000.0 / tx.weight, tx.weight, self.seq[tx.id])

    def __len__(self) -> int:
        return len(self.pending)

    def __contains__(self, txid: str) -> bool:
        return txid in self.pending


class ChainState:
    """Chain tip state: height, UTXO set, mempool and mined blocks.

    Value conservation (sum of unspent outputs plus all confirmed fees equals
    everything ever granted) is re-checked incrementally after every block.
    """

    def __init__(self, blockmaxweight: int = DEFAULT_BLOCKMAXWEIGHT):
        if blockmaxweight <= 0:
            raise ValueError("blockmaxweight must be positive")
        self.blockmaxweight = blockmaxweight
        self.height = 0
        self.blocks: list[Block] = []
        self.utxo_set: dict[OutputRef, TxOutput] = {}
        self.mempool = MempoolState()
        self.confirmed_ids: set[str] = set()
        self._granted_total = 0
        self._utxo_value = 0
        self._fees_confirmed = 0
        self._grant_counter = 0
        self._grants: dict[OutputRef, int] = {}

    # -- funding ---------------------------------------------------------

    def grant(self, owner: str, value: int, kind: str = "grant") -> OutputRef:
        """Mint a spendable output out of thin air (genesis/coinbase stand-in)."""
        if value <= 0:
            raise ValueError("grant value must be positive")
        ref = OutputRef(f"grant-{self._grant_counter}", 0)
        self._grant_counter += 1
        self.utxo_set[ref] = TxOutput(value, owner, kind)
        self._grants[ref] = value
        self._granted_total += value
        self._utxo_value += value
        return ref

    # -- mempool policy --------------------------------------------------

    def submit(self, tx: Transaction) -> SubmitResult:
        mp = self.mempool
        if tx.id in mp.pending or tx.id in self.confirmed_ids:
            raise ValueError(f"duplicate transaction id {tx.id!r}")
        if not 0 < tx.weight <= MAX_TX_WEIGHT:
            raise ValueError(f"transaction weight {tx.weight} out of range")
        if len(set(tx.inputs)) != len(tx.inputs):
            return SubmitResult("rejected", reason=REJECT_OWN_DOUBLE_SPEND)

        total_in = 0
        parents: set[str] = set()
        for ref in tx.inputs:
            out = self.utxo_set.get(ref)
            if out is None:
                parent = mp.pending.get(ref.txid)
                if parent is None or ref.index >= len(parent.outputs):
                    return SubmitResult("rejected", reason=REJECT_MISSING_INPUT)
                out = parent.outputs[ref.index]
                parents.add(ref.txid)
            total_in += out.value
        out_value = sum(o.value for o in tx.outputs)
        if total_in - out_value != tx.fee or tx.fee < 0:
            raise ValueError(
                f"tx {tx.id!r}: fee {tx.fee} != inputs {total_in} - outputs {out_value}"
            )

        direct = {mp.spent_index[ref] for ref in tx.inputs if ref in mp.spent_index}
        evicted_ids: tuple[str, ...] = ()
        if direct:
            for cid in direct:
                if not self._replaceable(cid):
                    return SubmitResult("rejected", reason=REJECT_NOT_REPLACEABLE)
            evicted = self._with_descendants(direct)
            if any(ref.txid in evicted for ref in tx.inputs):
                # The newcomer cannot ride on outputs it is about to destroy.
                return SubmitResult("rejected", reason=REJECT_MISSING_INPUT)
            evicted_txs = [mp.pending[i] for i in evicted]
            if tx.fee <= sum(e.fee for e in evicted_txs):
                return SubmitResult("rejected", reason=REJECT_INSUFFICIENT_FEE)
            for ev in evicted_txs:
                if not tx.outranks(ev):
                    return SubmitResult("rejected", reason=REJECT_INSUFFICIENT_FEE)
            for ev in sorted(evicted_txs, key=lambda e: mp.seq[e.id]):
                self._remove_pending(ev)
            evicted_ids = tuple(e.id for e in sorted(evicted_txs, key=lambda e: mp.seq[e.id]))
            parents -= set(evicted_ids)

        mp.pending[tx.id] = tx
        mp.seq[tx.id] = mp._next_seq
        mp._next_seq += 1
        for ref in tx.inputs:
            mp.spent_index[ref] = tx.id
        mp.dep_count[tx.id] = len(parents)
        if not parents:
            heapq.heappush(mp._eligible, (mp.sort_key(tx), tx.id))
        if evicted_ids:
            return SubmitResult("replaced", evicted=evicted_ids)
        return SubmitResult("accepted")

    def _replaceable(self, txid: str) -> bool:
        """rbf_signal on the transaction itself or any unconfirmed ancestor."""
        mp = self.mempool
        stack = [txid]
        seen: set[str] = set()
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            tx = mp.pending[cur]
            if tx.rbf_signal:
                return True
            for ref in tx.inputs:
                if ref.txid in mp.pending:
                    stack.append(ref.txid)
        return False

    def _with_descendants(self, roots: set[str]) -> set[str]:
        mp = self.mempool
        out: set[str] = set()
        stack = list(roots)
        while stack:
            cur = stack.pop()
            if cur in out:
                continue
            out.add(cur)
            tx = mp.pending[cur]
            for i in range(len(tx.outputs)):
                child = mp.spent_index.get(OutputRef(tx.id, i))
                if child is not None:
                    stack.append(child)
        return out

    def _remove_pending(self, tx: Transaction) -> None:
        mp = self.mempool
        del mp.pending[tx.id]
        mp.dep_count.pop(tx.id, None)
        for ref in tx.inputs:
            if mp.spent_index.get(ref) == tx.id:
                del mp.spent_index[ref]

    # -- mining ----------------------------------------------------------

    def mine_block(self) -> Block:
        """Greedy assembly: repeatedly take the best eligible transaction
        (parents confirmed or already selected), skipping ones that do not
        fit, until nothing else can be added."""
        mp = self.mempool
        limit = self.blockmaxweight
        heap = mp._eligible
        selected: list[Transaction] = []
        used = 0
        stash: list[tuple[tuple[float, int, int], str]] = []
        while heap:
            key, txid = heapq.heappop(heap)
            tx = mp.pending.get(txid)
            if tx is None or mp.dep_count.get(txid):
                continue  # stale entry (evicted/mined) -- lazy deletion
            if used + tx.weight > limit:
                stash.append((key, txid))
                continue
            selected.append(tx)
            used += tx.weight
            del mp.pending[txid]
            del mp.dep_count[txid]
            for i in range(len(tx.outputs)):
                child = mp.spent_index.get(OutputRef(txid, i))
                if child is not None:
                    mp.dep_count[child] -= 1
                    if not mp.dep_count[child]:
                        heapq.heappush(heap, (mp.sort_key(mp.pending[child]), child))
        for entry in stash:
            heapq.heappush(heap, entry)

        for tx in selected:  # topological by construction
            for ref in tx.inputs:
                del mp.spent_index[ref]
                spent = self.utxo_set.pop(ref)
                self._utxo_value -= spent.value
            for i, out in enumerate(tx.outputs):
                self.utxo_set[OutputRef(tx.id, i)] = out
                self._utxo_value += out.value
            self._fees_confirmed += tx.fee
            self.confirmed_ids.add(tx.id)

        self.height += 1
        block = Block(self.height, tuple(selected), used)
        self.blocks.append(block)
        if self._utxo_value + self._fees_confirmed != self._granted_total:
            raise AssertionError(
                f"value conservation broken at height {self.height}: "
                f"{self._utxo_value} utxo + {self._fees_confirmed} fees "
                f"!= {self._granted_total} granted"
            )
        return block

    # -- queries ---------------------------------------------------------

    def is_confirmed(self, txid: str) -> bool:
        return txid in self.confirmed_ids

    def pending_txs(self) -> Iterator[Transaction]:
        return iter(self.mempool.pending.values())

    def audit(self) -> None:
        """Full structural audit (slow): replay every block against a fresh
        UTXO view, checking for double spends, per-block weight violations
        and value conservation.  Intended for tests and end-of-run checks."""
        utxo: dict[OutputRef, int] = dict(self._grants)
        fees = 0
        spent_ever: set[OutputRef] = set()
        for block in self.blocks:
            weight = sum(t.weight for t in block.txs)
            if weight != block.weight_used or weight > self.blockmaxweight:
                raise AssertionError(f"block {block.height} weight bookkeeping broken")
            for tx in block.txs:
                in_val = 0
                for ref in tx.inputs:
                    if ref in spent_ever:
                        raise AssertionError(f"double spend of {ref} by {tx.id}")
                    spent_ever.add(ref)
                    if ref not in utxo:
                        raise AssertionError(f"missing input {ref} for {tx.id}")
                    in_val += utxo.pop(ref)
                for i, out in enumerate(tx.outputs):
                    utxo[OutputRef(tx.id, i)] = out.value
                fees += tx.fee
                if in_val - sum(o.value for o in tx.outputs) != tx.fee:
                    raise AssertionError(f"fee mismatch in confirmed tx {tx.id}")
        if sum(utxo.values()) + fees != self._granted_total:
            raise AssertionError("replayed value conservation failed")
        replay_unspent = {r: v for r, v in utxo.items()}
        live = {r: o.value for r, o in self.utxo_set.items()}
        if replay_unspent != live:
            raise AssertionError("replayed UTXO set diverges from live state")

    def available_space(self, feerate: int, block: Block) -> int:
        return available_space(feerate, block, self.blockmaxweight)


def available_space(feerate: int, block: Block,
                    blockmaxweight: int = DEFAULT_BLOCKMAXWEIGHT) -> int:
    """Block weight not claimed by transactions paying strictly more than
    `feerate` (sat/kWU): the room a transaction at that feerate could have
    competed for.  Strictness is exact (cross-multiplied)."""
    taken = 0
    for tx in block.txs:
        if tx.fee * 1000 > feerate * tx.weight:
            taken += tx.weight
    return blockmaxweight - taken
