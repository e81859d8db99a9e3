"""
schema/map.py - Map Data Shapes

The room graph the game is played on: rooms, weighted corridors, task
anchors and the emergency-button room.

This file contains ONLY data shapes. Loading, validation against the graph
rules and path finding live in tools/map/map_graph.py.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, StrictInt


class Corridor(BaseModel):
    """An undirected corridor between two rooms; weight = travel ticks."""
    model_config = ConfigDict(extra="forbid")

    a: str
    b: str
    weight: StrictInt


class MapDocument(BaseModel):
    """
    The raw map-config document as written by a human.

    Room names are NOT normalized yet; load_map() does that.
    """
    model_config = ConfigDict(extra="forbid")

    name: str = "custom"
    rooms: list[str]
    corridors: list[Corridor]
    task_rooms: Optional[list[str]] = None   # defaults to every room
    emergency_room: Optional[str] = None     # defaults to "cafeteria" when present
    aliases: dict[str, str] = Field(default_factory=dict)
    layout: dict[str, tuple[float, float]] = Field(default_factory=dict)


class Map(BaseModel):
    """
    A validated, normalized map. Treat as immutable after load.

    rooms keeps the document order; corridors are stored with a < b.
    """
    name: str
    rooms: tuple[str, ...]
    corridors: tuple[Corridor, ...]
    task_rooms: tuple[str, ...]
    emergency_room: str
    aliases: dict[str, str] = Field(default_factory=dict)
    layout: dict[str, tuple[float, float]] = Field(default_factory=dict)

    # networkx graph, built once per map by tools/map/map_graph.py
    _graph: object = PrivateAttr(default=None)

    def weight(self, a: str, b: str) -> Optional[int]:
        """Corridor weight between a and b, or None if not adjacent."""
        for corridor in self.corridors:
            if {corridor.a, corridor.b} == {a, b}:
                return corridor.weight
        return None
