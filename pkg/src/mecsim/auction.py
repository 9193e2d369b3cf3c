"""Per-slot band competition: uniform-price (highest-losing-bid) sealed auction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class AuctionError(ValueError):
    pass


@dataclass(frozen=True)
class Bid:
    wsp: int
    mt: int
    valuation: float


@dataclass(frozen=True)
class AuctionResult:
    """Band grants per terminal and the resulting per-operator payments."""

    grants: dict[int, int]  # mt -> band index, injective
    payments: dict[int, float]  # wsp -> payment
    clearing_price: float = 0.0

    def granted(self, mt: int) -> bool:
        return mt in self.grants

    @staticmethod
    def empty(num_wsps: int) -> "AuctionResult":
        return AuctionResult(grants={}, payments={j: 0.0 for j in range(num_wsps)})


def allocate_bands(bids: list[Bid], num_bands: int, rng: np.random.Generator) -> AuctionResult:
    """Grant bands to the highest-valuation terminals at the highest losing price.

    Only strictly positive valuations win. Ties are broken by a seeded uniform
    draw per entry. Each winning terminal gets the lowest free band index and
    its operator pays one clearing price per winning terminal.
    """
    seen = set()
    for b in bids:
        if b.mt in seen:
            raise AuctionError(f"duplicate bid for MT {b.mt}")
        seen.add(b.mt)
        if not math.isfinite(b.valuation) or b.valuation < 0:
            raise AuctionError(f"invalid valuation {b.valuation} for MT {b.mt}")

    tiebreak = rng.random(len(bids))
    order = sorted(range(len(bids)), key=lambda i: (-bids[i].valuation, tiebreak[i]))

    positive = [i for i in order if bids[i].valuation > 0.0]
    winners = positive[: min(num_bands, len(positive))]
    winner_set = set(winners)
    losing = [bids[i].valuation for i in order if i not in winner_set]
    clearing = max(losing) if winners and losing else 0.0

    grants = {bids[i].mt: band for band, i in enumerate(winners)}
    payments = {b.wsp: 0.0 for b in bids}
    for i in winners:
        payments[bids[i].wsp] += clearing
    return AuctionResult(grants=grants, payments=payments, clearing_price=clearing)


def wsp_payoff(utilities, weights, payment: float) -> float:
    """Weighted sum of subscribed-terminal utilities minus the band payment."""
    return float(np.dot(np.asarray(utilities, dtype=float), np.asarray(weights, dtype=float))) - payment
