"""Mixed-frequency data model.

Time is an integer low-frequency period ``t`` plus a sub-period offset.
``x_{t + f/m}`` denotes the high-frequency observation ``f`` sub-periods after
the last sub-period of period ``t``; ``f = 0`` is the end of period ``t`` and
``f = -(m - 1)`` its first sub-period.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LowFrequencySeries:
    """Target series observed at consecutive integer periods.

    ``values[i]`` is the observation for period ``first_period + i``.
    """

    values: np.ndarray
    first_period: int = 1
    labels: tuple[str, ...] | None = None
    name: str = "y"

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("target series must be a non-empty 1-d sequence")
        object.__setattr__(self, "values", vals)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != vals.size:
                raise ValueError("labels must match the number of values")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.values.size

    @property
    def last_period(self) -> int:
        return self.first_period + self.values.size - 1

    @property
    def periods(self) -> np.ndarray:
        return np.arange(self.first_period, self.last_period + 1)

    def has(self, period: int) -> bool:
        return self.first_period <= period <= self.last_period

    def at(self, period: int) -> float:
        if not self.has(period):
            raise KeyError(f"period {period} outside target sample")
        return float(self.values[period - self.first_period])


@dataclass(frozen=True)
class HighFrequencySeries:
    """Covariate sampled ``m`` times per low-frequency period.

    Parameters
    ----------
    values : array_like
        Observations in time order.
    m : int
        Sub-periods per low-frequency period.
    first_period, first_subperiod : int
        Calendar position of ``values[0]`` (sub-periods are numbered 1..m).
    delay : int
        Publication lag in sub-periods.
    lead : int
        Sub-periods of the target period available at prediction time.
    q : int
        Low-frequency periods of lags used by default.
    """

    name: str
    values: np.ndarray
    m: int
    first_period: int = 1
    first_subperiod: int = 1
    delay: int = 0
    lead: int = 0
    q: int = 1
    category: str | None = None

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 1:
            raise ValueError(f"{self.name}: values must be 1-d")
        object.__setattr__(self, "values", vals)
        if self.m < 1:
            raise ValueError(f"{self.name}: m must be >= 1")
        if self.delay < 0:
            raise ValueError(f"{self.name}: delay must be >= 0")
        if not 0 <= self.lead <= self.m:
            raise ValueError(f"{self.name}: lead must lie in [0, m]")
        if self.q < 1:
            raise ValueError(f"{self.name}: q must be >= 1")
        if not 1 <= self.first_subperiod <= self.m:
            raise ValueError(f"{self.name}: first_subperiod must lie in [1, m]")

    def __len__(self) -> int:
        return self.values.size

    @property
    def effective_lead(self) -> int:
        """Lead net of publication delay (may be negative)."""
        return self.lead - self.delay

    def position(self, period, offset) -> np.ndarray:
        """Array index of ``x_{period + offset/m}`` (may fall outside the data)."""
        period = np.asarray(period)
        offset = np.asarray(offset)
        return (period - self.first_period) * self.m + offset + (self.m - self.first_subperiod)


@dataclass(frozen=True)
class MixedFrequencyPanel:
    target: LowFrequencySeries
    covariates: tuple[HighFrequencySeries, ...] = ()
    impute_zero: bool = False

    def __post_init__(self):
        covs = tuple(self.covariates)
        names = [c.name for c in covs]
        if len(set(names)) != len(names):
            raise ValueError("covariate names must be unique")
        object.__setattr__(self, "covariates", covs)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.covariates]

    def covariate(self, name: str) -> HighFrequencySeries:
        for c in self.covariates:
            if c.name == name:
                return c
        raise KeyError(name)

    def with_target(self, target: LowFrequencySeries) -> "MixedFrequencyPanel":
        return MixedFrequencyPanel(target, self.covariates, self.impute_zero)


@dataclass(frozen=True)
class Violation:
    series: str
    message: str
    index: int | None = None

    def __str__(self) -> str:
        where = f"[{self.index}]" if self.index is not None else ""
        return f"{self.series}{where}: {self.message}"


def validate_panel(panel: MixedFrequencyPanel, ar_lags: int = 0) -> list[Violation]:
    """Report problems that would stop a design from being built.

    The first usable row targets period ``first_period + ar_lags``; each
    covariate must supply ``m * q`` sub-periods of history for it, ending at
    its effective lead. Returns an empty list when the panel is usable.
    """
    out: list[Violation] = []
    y = panel.target
    for i in np.flatnonzero(~np.isfinite(y.values)):
        out.append(Violation(y.name, "non-finite value", int(i)))
    if ar_lags >= len(y):
        out.append(Violation(y.name, f"{len(y)} observations cannot supply {ar_lags} lags"))
    first_row = y.first_period + ar_lags
    for c in panel.covariates:
        for i in np.flatnonzero(~np.isfinite(c.values)):
            out.append(Violation(c.name, "non-finite value", int(i)))
        h = c.effective_lead
        # row for target s uses x_{s-1 + f/m}, f = h, h-1, ..., h+1-m*q
        oldest = int(c.position(first_row - 1, h + 1 - c.m * c.q))
        if oldest < 0 and not panel.impute_zero:
            out.append(Violation(
                c.name,
                f"insufficient pre-sample history: {-oldest} sub-period values missing "
                f"for {c.q} period(s) of lags",
            ))
        newest = int(c.position(y.last_period - 1, h))
        if newest >= len(c):
            out.append(Violation(
                c.name,
                f"series ends {newest - len(c) + 1} sub-period(s) before the last target period needs",
            ))
    return out


@dataclass(frozen=True)
class GroupStructure:
    """Ordered partition of coefficient indices ``0..p-1`` into named groups."""

    names: tuple[str, ...]
    indices: tuple[np.ndarray, ...]
    p: int = field(default=-1)

    def __post_init__(self):
        names = tuple(self.names)
        idx = tuple(_frozen(np.atleast_1d(g), dtype=np.int64) for g in self.indices)
        if len(names) != len(idx):
            raise ValueError("one name per group is required")
        if len(set(names)) != len(names):
            raise ValueError("group names must be unique")
        if any(g.size == 0 for g in idx):
            raise ValueError("groups must be non-empty")
        p = sum(g.size for g in idx) if self.p < 0 else self.p
        if idx:
            flat = np.concatenate(idx)
        else:
            flat = np.empty(0, dtype=np.int64)
        if flat.size != p or not np.array_equal(np.sort(flat), np.arange(p)):
            raise ValueError("groups must partition the coefficient indices 0..p-1")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], names: Iterable[str] | None = None) -> "GroupStructure":
        bounds = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        groups = [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        names = tuple(names) if names is not None else tuple(f"g{i}" for i in range(len(groups)))
        return cls(names, tuple(groups))

    @classmethod
    def from_labels(cls, labels: Sequence[str]) -> "GroupStructure":
        """Group columns sharing a label, in order of first appearance."""
        order: dict[str, list[int]] = {}
        for j, lab in enumerate(labels):
            order.setdefault(lab, []).append(j)
        return cls(tuple(order), tuple(np.array(v) for v in order.values()))

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(zip(self.names, self.indices))

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.indices])

    def group_of(self) -> np.ndarray:
        """Group id of every coefficient."""
        out = np.empty(self.p, dtype=np.int64)
        for k, g in enumerate(self.indices):
            out[g] = k
        return out

    def index(self, name: str) -> np.ndarray:
        return self.indices[self.names.index(name)]
