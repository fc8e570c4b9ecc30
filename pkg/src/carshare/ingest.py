"""Trip-record ingestion: parse raw trip files, aggregate pickups into a
daily demand panel, select the busiest locations, and split by date.

Real trip extracts are noisy, so malformed rows are skipped and tallied
rather than treated as fatal; zero-distance and negative-fare rows are
kept (they are valid pickups) but counted separately."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

import numpy as np

DEFAULT_SCHEMA = {
    "pickup_datetime": "lpep_pickup_datetime",
    "dropoff_datetime": "lpep_dropoff_datetime",
    "pickup_location_id": "PULocationID",
    "dropoff_location_id": "DOLocationID",
    "trip_distance": "trip_distance",
    "fare_amount": "fare_amount",
}

_FALLBACK_TS = "%m/%d/%Y %I:%M:%S %p"


class SchemaError(ValueError):
    """The input file lacks a required column."""


class EmptyInputError(ValueError):
    """The input file has no header or no usable rows."""


@dataclass
class TripRecord:
    pickup_datetime: datetime
    dropoff_datetime: datetime
    pickup_location_id: int
    dropoff_location_id: int
    trip_distance: float
    fare_amount: float


@dataclass
class ParseResult:
    records: list
    rejected: int
    flagged: dict = field(default_factory=dict)


@dataclass
class DemandPanel:
    """Daily pickup counts: one row per calendar date, one column per
    location id, covering the full min-max date range (zero-filled)."""

    dates: list
    location_ids: list
    counts: np.ndarray

    def __post_init__(self):
        self.dates = list(self.dates)
        self.location_ids = list(self.location_ids)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.dates), len(self.location_ids)):
            raise ValueError(
                f"counts shape {self.counts.shape} does not match "
                f"{len(self.dates)} dates x {len(self.location_ids)} locations")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if len(set(self.location_ids)) != len(self.location_ids):
            raise ValueError("location ids must be distinct")

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def location_means(self) -> np.ndarray:
        return self.counts.mean(axis=0)


def _parse_timestamp(raw: str) -> datetime:
    raw = raw.strip()
    try:
        return datetime.fromisoformat(raw)
    except ValueError:
        return datetime.strptime(raw, _FALLBACK_TS)


def parse_trips(source, schema: dict = None) -> ParseResult:
    """Parse delimiter-separated trip rows from a text stream or path.

    Returns every parseable record; rows with bad timestamps, missing or
    invalid location ids, negative distances, or dropoff before pickup are
    skipped and counted in ``rejected``. Zero-distance and negative-fare
    rows are retained and tallied in ``flagged``.
    """
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, encoding="utf-8", newline="") as fh:
            return parse_trips(fh, schema)

    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise EmptyInputError("input has no header row")
    fieldnames = [f.strip() for f in reader.fieldnames]
    for column in schema.values():
        if column not in fieldnames:
            raise SchemaError(f"missing required column: {column}")

    records = []
    rejected = 0
    flagged = {"zero_distance": 0, "negative_fare": 0}
    rows_seen = 0
    for row in reader:
        rows_seen += 1
        cleaned = {(k.strip() if k else k): (v.strip() if isinstance(v, str) else v)
                   for k, v in row.items()}
        try:
            pickup = _parse_timestamp(cleaned[schema["pickup_datetime"]])
            dropoff = _parse_timestamp(cleaned[schema["dropoff_datetime"]])
            pu = int(cleaned[schema["pickup_location_id"]])
            do = int(cleaned[schema["dropoff_location_id"]])
            dist = float(cleaned[schema["trip_distance"]])
            fare = float(cleaned[schema["fare_amount"]])
        except (ValueError, TypeError, KeyError):
            rejected += 1
            continue
        if pickup > dropoff or pu < 1 or dist < 0:
            rejected += 1
            continue
        if dist == 0:
            flagged["zero_distance"] += 1
        if fare < 0:
            flagged["negative_fare"] += 1
        records.append(TripRecord(pickup, dropoff, pu, do, dist, fare))

    if rows_seen == 0:
        raise EmptyInputError("input has a header but no data rows")
    return ParseResult(records, rejected, flagged)


def aggregate_daily(records) -> DemandPanel:
    """Count pickups per (calendar date, pickup location).

    Every date in the min-max pickup range appears, including days with no
    pickups at any retained location.
    """
    records = list(records)
    if not records:
        raise EmptyInputError("no records to aggregate")
    location_ids = sorted({r.pickup_location_id for r in records})
    loc_index = {loc: j for j, loc in enumerate(location_ids)}
    first = min(r.pickup_datetime for r in records).date()
    last = max(r.pickup_datetime for r in records).date()
    dates = []
    day = first
    while day <= last:
        dates.append(day)
        day += timedelta(days=1)
    date_index = {d: i for i, d in enumerate(dates)}
    counts = np.zeros((len(dates), len(location_ids)), dtype=np.int64)
    for r in records:
        counts[date_index[r.pickup_datetime.date()], loc_index[r.pickup_location_id]] += 1
    return DemandPanel(dates, location_ids, counts)


def merge_panels(panels) -> DemandPanel:
    """Merge partial panels (e.g. one per monthly file) by date/location."""
    panels = list(panels)
    if not panels:
        raise EmptyInputError("no panels to merge")
    location_ids = sorted({loc for p in panels for loc in p.location_ids})
    first = min(p.dates[0] for p in panels)
    last = max(p.dates[-1] for p in panels)
    dates = []
    day = first
    while day <= last:
        dates.append(day)
        day += timedelta(days=1)
    date_index = {d: i for i, d in enumerate(dates)}
    loc_index = {loc: j for j, loc in enumerate(location_ids)}
    counts = np.zeros((len(dates), len(location_ids)), dtype=np.int64)
    for p in panels:
        rows = [date_index[d] for d in p.dates]
        cols = [loc_index[loc] for loc in p.location_ids]
        counts[np.ix_(rows, cols)] += p.counts
    return DemandPanel(dates, location_ids, counts)


def top_k_locations(panel: DemandPanel, k: int) -> DemandPanel:
    """Sub-panel of the k highest-mean locations, columns ordered by
    descending mean; ties break toward the lower location id."""
    if k < 1:
        raise ValueError("k must be positive")
    if k > len(panel.location_ids):
        raise ValueError(f"k={k} exceeds {len(panel.location_ids)} locations")
    means = panel.location_means()
    order = sorted(range(len(panel.location_ids)),
                   key=lambda j: (-means[j], panel.location_ids[j]))[:k]
    return DemandPanel(panel.dates, [panel.location_ids[j] for j in order],
                       panel.counts[:, order])


def split_by_date(panel: DemandPanel, cutoff: date):
    """(train, test) with train = days <= cutoff, test = days after.

    The cutoff must leave both sides nonempty.
    """
    if cutoff < panel.dates[0] or cutoff >= panel.dates[-1]:
        raise ValueError(
            f"cutoff {cutoff!s} must lie within [{panel.dates[0]!s}, {panel.dates[-1]!s})")
    split = sum(1 for d in panel.dates if d <= cutoff)
    if split == 0:
        raise ValueError("cutoff leaves an empty training split")
    train = DemandPanel(panel.dates[:split], panel.location_ids,
                        panel.counts[:split])
    test = DemandPanel(panel.dates[split:], panel.location_ids,
                       panel.counts[split:])
    return train, test


def panel_to_csv(panel: DemandPanel, path_or_buf):
    """First column ISO date, then one integer column per location id."""
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
            panel_to_csv(panel, fh)
        return
    path_or_buf.write("date," + ",".join(str(i) for i in panel.location_ids) + "\n")
    for day, row in zip(panel.dates, panel.counts):
        path_or_buf.write(day.isoformat() + "," + ",".join(str(int(v)) for v in row) + "\n")


def panel_from_csv(path_or_buf) -> DemandPanel:
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, encoding="utf-8", newline="") as fh:
            return panel_from_csv(fh)
    header = path_or_buf.readline().strip().split(",")
    if header[0] != "date":
        raise SchemaError("panel file must start with a 'date' column")
    location_ids = [int(v) for v in header[1:]]
    dates = []
    rows = []
    for line in path_or_buf:
        if not line.strip():
            continue
        parts = line.strip().split(",")
        dates.append(date.fromisoformat(parts[0]))
        rows.append([int(v) for v in parts[1:]])
    return DemandPanel(dates, location_ids, np.array(rows, dtype=np.int64))
