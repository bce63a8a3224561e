"""Expected geometry and class lists for the three supported scenes."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    height: int   # image rows
    width: int    # image columns
    bands: int
    nclass: int
    class_names: tuple[str, ...]

    def __post_init__(self):
        assert len(self.class_names) == self.nclass


DATASETS: dict[str, DatasetDescriptor] = {
    "pavia_university": DatasetDescriptor(
        name="pavia_university",
        height=610, width=340, bands=103, nclass=9,
        class_names=(
            "Water", "Trees", "Asphalt", "Self-Blocking Bricks", "Bitumen",
            "Tiles", "Shadows", "Meadows", "Bare Soil",
        ),
    ),
    "pavia_center": DatasetDescriptor(
        name="pavia_center",
        height=1096, width=1096, bands=102, nclass=9,
        class_names=(
            "Asphalt", "Meadows", "Gravel", "Trees", "Painted Metal Sheets",
            "Bare Soil", "Bitumen", "Self-Blocking Bricks", "Shadows",
        ),
    ),
    "ksc": DatasetDescriptor(
        name="ksc",
        height=512, width=453, bands=176, nclass=13,
        class_names=(
            "Scrub", "Willow swamp", "Cabbage palm hammock",
            "Cabbage palm/oak hammock", "Slash pine", "Oak/broadleaf hammock",
            "Hardwood swamp", "Graminoid marsh", "Spartina marsh",
            "Cattail marsh", "Salt marsh", "Mud flats", "Water",
        ),
    ),
}


def match_descriptor(height: int, width: int, bands: int) -> DatasetDescriptor | None:
    """Identify a known scene by its cube geometry."""
    for desc in DATASETS.values():
        if (desc.height, desc.width, desc.bands) == (height, width, bands):
            return desc
    return None
