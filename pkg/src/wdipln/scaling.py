"""Element counts, component footprint and electrical I/O of linear-neuron variants."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass

FOOTPRINT_CAVEAT = "Component Size Only (no routing considered)"

# Approximate element areas [mm^2].
MZM_MM2 = 0.8
THERMAL_MZI_MM2 = 1e-1
SMALL_MRD_MM2 = 1e-4
LARGE_MRD_MM2 = 1e-2


class Variant(enum.Enum):
    COLN_NOMINAL = "coln-nominal"
    COLN_THERMAL = "coln-thermal"
    WDIPLN_NAIVE = "wdipln-naive"
    WDIPLN_NOMINAL = "wdipln-nominal"

    @property
    def label(self) -> str:
        return {
            Variant.COLN_NOMINAL: "COLN-nominal",
            Variant.COLN_THERMAL: "COLN-thermal",
            Variant.WDIPLN_NAIVE: "WDIPLN-naive",
            Variant.WDIPLN_NOMINAL: "WDIPLN-nominal",
        }[self]

    @classmethod
    def parse(cls, name: str) -> "Variant":
        key = name.lower().replace("_", "-")
        aliases = {"coln": "coln-nominal", "wdipln": "wdipln-nominal"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown variant {name!r}; choose from {choices}") from None


DEFAULT_SIZES = {
    Variant.COLN_NOMINAL: (MZM_MM2, MZM_MM2),
    Variant.COLN_THERMAL: (MZM_MM2, THERMAL_MZI_MM2),
    Variant.WDIPLN_NAIVE: (SMALL_MRD_MM2, SMALL_MRD_MM2),
    Variant.WDIPLN_NOMINAL: (LARGE_MRD_MM2, SMALL_MRD_MM2),
}


@dataclass(frozen=True)
class ArchitectureSpec:
    variant: Variant
    n: int
    m: int = 1
    input_size_mm2: float | None = None
    weight_size_mm2: float | None = None
    io_per_element: int = 4

    def __post_init__(self) -> None:
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.n < 1 or self.m < 1:
            raise ValueError("N and M must be at least 1")
        if self.io_per_element < 0:
            raise ValueError("io_per_element must be non-negative")
        default_in, default_w = DEFAULT_SIZES[self.variant]
        if self.input_size_mm2 is None:
            object.__setattr__(self, "input_size_mm2", default_in)
        if self.weight_size_mm2 is None:
            object.__setattr__(self, "weight_size_mm2", default_w)
        if self.input_size_mm2 <= 0 or self.weight_size_mm2 <= 0:
            raise ValueError("element sizes must be positive")

    @property
    def input_count(self) -> int:
        return self.n if self.variant is Variant.WDIPLN_NOMINAL else self.n * self.m

    @property
    def weight_count(self) -> int:
        return self.n * self.m


@dataclass(frozen=True)
class ScalingReport:
    variant: str
    n: int
    m: int
    element_count: int
    input_element_count: int
    weight_element_count: int
    footprint_mm2: float
    electrical_io: int
    pad_area_mm2: float | None = None
    footprint_note: str = FOOTPRINT_CAVEAT

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def element_count(spec: ArchitectureSpec) -> int:
    return spec.input_count + spec.weight_count


def footprint(spec: ArchitectureSpec) -> float:
    return spec.input_count * spec.input_size_mm2 + spec.weight_count * spec.weight_size_mm2


def electrical_io(spec: ArchitectureSpec) -> int:
    return spec.io_per_element * element_count(spec)


def pad_area(pad_count: int, pad_size_um: float, pitch_um: float, grid_rows: int, grid_cols: int) -> float:
    """Area [mm^2] of a rows x cols pad grid at ``pitch_um``."""
    if grid_rows < 1 or grid_cols < 1:
        raise ValueError("pad grid needs at least one row and one column")
    if pad_count > grid_rows * grid_cols:
        raise ValueError(f"{pad_count} pads do not fit on a {grid_rows}x{grid_cols} grid")
    if pad_size_um > pitch_um:
        raise ValueError("pads are larger than the grid pitch")
    return (grid_rows * pitch_um) * (grid_cols * pitch_um) * 1e-6


def pad_grid(pad_count: int) -> tuple[int, int]:
    """Most nearly square grid holding ``pad_count`` pads (rows <= cols)."""
    rows = max(1, math.isqrt(pad_count))
    while rows > 1 and pad_count % rows:
        rows -= 1
    cols = math.ceil(pad_count / rows)
    if cols > 2 * rows:
        rows = math.isqrt(pad_count)
        cols = math.ceil(pad_count / rows)
    return rows, cols


def report(
    spec: ArchitectureSpec,
    *,
    pad_size_um: float | None = None,
    pitch_um: float = 150.0,
) -> ScalingReport:
    io_count = electrical_io(spec)
    area = None
    if pad_size_um is not None and io_count:
        rows, cols = pad_grid(io_count)
        area = pad_area(io_count, pad_size_um, pitch_um, rows, cols)
    return ScalingReport(
        variant=spec.variant.label,
        n=spec.n,
        m=spec.m,
        element_count=element_count(spec),
        input_element_count=spec.input_count,
        weight_element_count=spec.weight_count,
        footprint_mm2=footprint(spec),
        electrical_io=io_count,
        pad_area_mm2=area,
    )


def format_table(reports: list[ScalingReport]) -> str:
    headers = ["variant", "N", "M", "elements", "inputs", "weights", "size_mm2", "io"]
    with_pads = any(r.pad_area_mm2 is not None for r in reports)
    if with_pads:
        headers.append("pad_area_mm2")
    rows = []
    for r in reports:
        row = [
            r.variant,
            str(r.n),
            str(r.m),
            str(r.element_count),
            str(r.input_element_count),
            str(r.weight_element_count),
            f"{r.footprint_mm2:.4g}",
            str(r.electrical_io),
        ]
        if with_pads:
            row.append("-" if r.pad_area_mm2 is None else f"{r.pad_area_mm2:.4g}")
        rows.append(row)
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    lines.append(f"size: {FOOTPRINT_CAVEAT}")
    return "\n".join(lines) + "\n"
