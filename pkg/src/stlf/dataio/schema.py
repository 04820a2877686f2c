"""Feature schemas: which columns are read, derived and how each is embedded."""

from __future__ import annotations

from dataclasses import dataclass

NUMERIC = "numeric"  # standardized with training statistics
BINARY = "binary"  # 0/1 indicator, left as is
ONEHOT = "onehot"

# derived calendar sources and their one-hot cardinality
CALENDAR_CARDINALITY = {"season": 4, "hour": 24, "dow": 7, "month": 12}
DERIVED_BINARY = ("weekday", "holiday")


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    source: str
    width: int = 1

    def __post_init__(self):
        if self.kind not in (NUMERIC, BINARY, ONEHOT):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind != ONEHOT and self.width != 1:
            raise SchemaError(f"feature {self.name!r}: {self.kind} features have width 1")
        if self.width < 1:
            raise SchemaError(f"feature {self.name!r}: width must be positive")

    @property
    def derived(self) -> bool:
        return self.source.startswith("calendar:")

    def column_names(self) -> list[str]:
        if self.kind == ONEHOT:
            return [f"{self.name}_{k}" for k in range(self.width)]
        return [self.name]


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    features: tuple[FeatureSpec, ...]
    target: str = "load_mw"
    timestamp: str = "timestamp"

    @property
    def width(self) -> int:
        return sum(f.width for f in self.features)

    @property
    def file_columns(self) -> list[str]:
        """Columns expected in the CSV besides timestamp and target."""
        return [f.source for f in self.features if not f.derived]

    @property
    def numeric_sources(self) -> list[str]:
        return [f.source for f in self.features if f.kind == NUMERIC]

    @property
    def categorical_sources(self) -> list[str]:
        return [f.source for f in self.features if not f.derived and f.kind != NUMERIC]

    def column_names(self) -> list[str]:
        return [c for f in self.features for c in f.column_names()]

    def offsets(self) -> dict[str, tuple[int, int]]:
        """Column span of each feature in the embedded matrix."""
        out, pos = {}, 0
        for f in self.features:
            out[f.name] = (pos, pos + f.width)
            pos += f.width
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "target": self.target,
            "features": [[f.name, f.kind, f.source, f.width] for f in self.features],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(d["name"], tuple(FeatureSpec(*f) for f in d["features"]), target=d.get("target", "load_mw"))


def _calendar(*names: str) -> list[FeatureSpec]:
    out = []
    for n in names:
        if n in DERIVED_BINARY:
            out.append(FeatureSpec(n, BINARY, f"calendar:{n}"))
        elif n in CALENDAR_CARDINALITY:
            out.append(FeatureSpec(n, ONEHOT, f"calendar:{n}", CALENDAR_CARDINALITY[n]))
        else:
            raise SchemaError(f"unknown calendar feature {n!r}")
    return out


def iso_ne() -> FeatureSchema:
    numeric = [
        FeatureSpec("da_demand", NUMERIC, "da_demand"),
        FeatureSpec("dry_bulb", NUMERIC, "dry_bulb"),
        FeatureSpec("dew_pnt", NUMERIC, "dew_pnt"),
    ]
    cal = _calendar("weekday", "holiday", "season", "hour", "dow", "month")
    return FeatureSchema("iso-ne", tuple(numeric + cal))


def nau() -> FeatureSchema:
    numeric = [FeatureSpec("temperature", NUMERIC, "temperature")]
    cal = _calendar("holiday", "season", "hour", "dow", "month")
    return FeatureSchema("nau", tuple(numeric + cal))


DEFAULT_CALENDAR = ("weekday", "holiday", "season", "hour", "dow", "month")


def custom(numeric_columns, calendar=DEFAULT_CALENDAR, name: str = "custom") -> FeatureSchema:
    if not numeric_columns and not calendar:
        raise SchemaError("a schema needs at least one feature")
    numeric = [FeatureSpec(c, NUMERIC, c) for c in numeric_columns]
    return FeatureSchema(name, tuple(numeric + _calendar(*calendar)))


def get_schema(name: str, numeric_columns=None, calendar=None) -> FeatureSchema:
    if name == "iso-ne":
        return iso_ne()
    if name == "nau":
        return nau()
    if name == "custom":
        return custom(list(numeric_columns or []), tuple(DEFAULT_CALENDAR if calendar is None else calendar))
    raise SchemaError(f"unknown schema {name!r}; expected iso-ne, nau or custom")
