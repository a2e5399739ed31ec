"""Global PHY parameter set shared by every signal-domain operation."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

VALID_SF = tuple(range(6, 13))
VALID_BW = (125_000, 250_000, 500_000)


@dataclass(frozen=True)
class LoraParams:
    """Validated chirp-spread-spectrum parameter set.

    The receiver sample rate is always the exact integer product ``os * bw``;
    a sampling-rate offset between transmitter and receiver is a channel
    impairment and is modelled separately (see :mod:`cssphy.channel`).

    Immutable after construction, so instances can be shared freely across
    concurrent workers.
    """

    sf: int
    bw: int
    os: int = 1
    n_pre: int = 8

    def __post_init__(self) -> None:
        if self.sf not in VALID_SF:
            raise ValueError(f"sf must be in {list(VALID_SF)}, got {self.sf}")
        if self.bw not in VALID_BW:
            raise ValueError(f"bw must be one of {VALID_BW} Hz, got {self.bw}")
        if not isinstance(self.os, int) or self.os < 1:
            raise ValueError(f"os must be an integer >= 1, got {self.os}")
        # CFO estimation needs at least two consecutive preamble upchirps.
        if not isinstance(self.n_pre, int) or self.n_pre < 2:
            raise ValueError(f"n_pre must be an integer >= 2, got {self.n_pre}")

    @property
    def chips_per_symbol(self) -> int:
        return 1 << self.sf

    @property
    def samples_per_symbol(self) -> int:
        return self.os << self.sf

    @property
    def fs(self) -> int:
        """Receiver sample rate in Hz (exact integer)."""
        return self.os * self.bw

    @property
    def symbol_duration(self) -> Fraction:
        """Symbol duration in seconds as an exact rational."""
        return Fraction(1 << self.sf, self.bw)


def make_params(sf: int, bw: int, os: int = 1, n_pre: int = 8) -> LoraParams:
    """Build a validated parameter set."""
    return LoraParams(sf=sf, bw=bw, os=os, n_pre=n_pre)
