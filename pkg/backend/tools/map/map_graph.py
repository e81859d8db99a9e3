"""
tools/map/map_graph.py - Map Layer

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

Input:  A map-config document (YAML file, bytes, or an already-parsed dict)
Output: A validated Map, plus graph queries on it

    load_map(source)            -> Map
    adjacent(map, room)         -> [(room, weight), ...]   lexicographic
    shortest_travel(map, a, b)  -> (path, cost)            ties: lexicographic path
    normalize_room(text, map)   -> room id or None         alias-aware

This file does NOT know about players, phases or events.
The graph itself is a networkx.Graph with the corridor weight on each edge.
"""

import hashlib
import json
import re
from pathlib import Path
from typing import Optional

import networkx as nx
import yaml
from pydantic import ValidationError

from auto.auto import DEFAULT_MAP_PATH
from schema.map import Corridor, Map, MapDocument

DEFAULT_EMERGENCY_ROOM = "cafeteria"

_SEPARATORS = re.compile(r"[\s\-]+")
_SQUASH = re.compile(r"[\s_\-]+")


class MapConfigError(ValueError):
    """The map document is malformed or violates a graph rule."""

    def __init__(self, message: str, element=None):
        self.element = element
        super().__init__(f"{message}: {element!r}" if element is not None else message)


class UnknownRoomError(KeyError):
    """A room id that is not part of the map."""


# =============================================================================
# LOADING
# =============================================================================

def canonical_room_name(name: str) -> str:
    """Lowercase, trimmed, separators collapsed to underscores ("Upper Engine" -> "upper_engine")."""
    return _SEPARATORS.sub("_", str(name).strip().lower()).strip("_")


def load_map(source) -> Map:
    """
    Load and validate a map-config document.

    Args:
        source: path to a YAML file, raw YAML bytes, or a parsed dict

    Returns:
        Map: satisfies every graph rule (connected, no self loops, no
        duplicate corridors, integer weights >= 1, known task/emergency rooms)

    Raises:
        MapConfigError: with the offending element
    """
    raw = _read_source(source)
    try:
        document = MapDocument.model_validate(raw)
    except ValidationError as e:
        raise MapConfigError("Map document does not match the map-config format", str(e)) from e

    rooms: list[str] = []
    for name in document.rooms:
        room = canonical_room_name(name)
        if not room:
            raise MapConfigError("Empty room name", name)
        if room in rooms:
            raise MapConfigError("Duplicate room", room)
        rooms.append(room)
    known = set(rooms)

    corridors: list[Corridor] = []
    seen_pairs: set[frozenset] = set()
    for corridor in document.corridors:
        a, b = canonical_room_name(corridor.a), canonical_room_name(corridor.b)
        element = corridor.model_dump()
        for end in (a, b):
            if end not in known:
                raise MapConfigError(f"Corridor references unknown room '{end}'", element)
        if a == b:
            raise MapConfigError("Self-loop corridor", element)
        if corridor.weight < 1:
            raise MapConfigError("Invalid corridor weight (must be an integer >= 1)", element)
        pair = frozenset((a, b))
        if pair in seen_pairs:
            raise MapConfigError("Duplicate corridor", element)
        seen_pairs.add(pair)
        low, high = sorted((a, b))
        corridors.append(Corridor(a=low, b=high, weight=corridor.weight))

    if document.task_rooms is None:
        task_rooms = list(rooms)
    else:
        task_rooms = []
        for name in document.task_rooms:
            room = canonical_room_name(name)
            if room not in known:
                raise MapConfigError("Unknown task room", name)
            if room not in task_rooms:
                task_rooms.append(room)

    if document.emergency_room is not None:
        emergency_room = canonical_room_name(document.emergency_room)
    elif DEFAULT_EMERGENCY_ROOM in known:
        emergency_room = DEFAULT_EMERGENCY_ROOM
    else:
        raise MapConfigError("emergency_room is required when the map has no cafeteria")
    if emergency_room not in known:
        raise MapConfigError("Unknown emergency room", document.emergency_room)

    aliases = {}
    for alias, target in document.aliases.items():
        room = canonical_room_name(target)
        if room not in known:
            raise MapConfigError("Alias points to unknown room", {alias: target})
        aliases[_squash(alias)] = room

    layout = {}
    for name, point in document.layout.items():
        room = canonical_room_name(name)
        if room not in known:
            raise MapConfigError("Layout entry for unknown room", name)
        layout[room] = (float(point[0]), float(point[1]))

    game_map = Map(
        name=document.name,
        rooms=tuple(rooms),
        corridors=tuple(sorted(corridors, key=lambda c: (c.a, c.b))),
        task_rooms=tuple(task_rooms),
        emergency_room=emergency_room,
        aliases=aliases,
        layout=layout,
    )

    graph = _build_graph(game_map)
    if len(rooms) > 1 and not nx.is_connected(graph):
        components = sorted(sorted(c) for c in nx.connected_components(graph))
        raise MapConfigError("Map graph is disconnected", components)
    if not rooms:
        raise MapConfigError("Map has no rooms")

    return game_map


def default_map() -> Map:
    """The bundled 10-room / 14-corridor map."""
    return load_map(DEFAULT_MAP_PATH)


def _read_source(source):
    if isinstance(source, dict):
        return source
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise MapConfigError("Cannot read map file", str(path)) from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise MapConfigError("Map document does not parse", str(e)) from e
    if not isinstance(raw, dict):
        raise MapConfigError("Map document must be a mapping at the top level", type(raw).__name__)
    return raw


# =============================================================================
# GRAPH QUERIES
# =============================================================================

def graph(game_map: Map) -> nx.Graph:
    """The (cached) networkx view of the map."""
    if game_map._graph is None:
        game_map._graph = _build_graph(game_map)
    return game_map._graph


def _build_graph(game_map: Map) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(game_map.rooms)
    for corridor in game_map.corridors:
        g.add_edge(corridor.a, corridor.b, weight=corridor.weight)
    return g


def _require_room(game_map: Map, room: str) -> None:
    if room not in game_map.rooms:
        raise UnknownRoomError(room)


def adjacent(game_map: Map, room: str) -> list[tuple[str, int]]:
    """Neighbors of room with corridor weights, sorted by room id."""
    _require_room(game_map, room)
    g = graph(game_map)
    return sorted((other, g[room][other]["weight"]) for other in g.neighbors(room))


def shortest_travel(game_map: Map, a: str, b: str) -> tuple[list[str], int]:
    """
    Minimal-cost path from a to b under corridor weights.

    Among equal-cost paths the lexicographically smallest room sequence wins.
    """
    _require_room(game_map, a)
    _require_room(game_map, b)
    if a == b:
        return [a], 0
    g = graph(game_map)
    path = min(nx.all_shortest_paths(g, a, b, weight="weight"))
    return list(path), nx.path_weight(g, path, weight="weight")


def travel_costs_from(game_map: Map, room: str) -> dict[str, int]:
    """Shortest travel cost from room to every room."""
    _require_room(game_map, room)
    return dict(nx.single_source_dijkstra_path_length(graph(game_map), room, weight="weight"))


# =============================================================================
# NAMES
# =============================================================================

def _squash(text: str) -> str:
    return _SQUASH.sub("", str(text).strip().lower())


def normalize_room(text: str, game_map: Map) -> Optional[str]:
    """
    Resolve a free-text room mention to a room id.

    "med bay" -> "medbay", "Upper Engine" -> "upper_engine", "o2" -> "oxygen"
    (aliases come from the map document). Unknown text -> None.
    """
    if text is None:
        return None
    key = _squash(text)
    if not key:
        return None
    for room in game_map.rooms:
        if _squash(room) == key:
            return room
    return game_map.aliases.get(key)


def map_digest(game_map: Map) -> str:
    """Stable content hash of the map (rooms, corridors, task rooms, button room)."""
    body = {
        "rooms": list(game_map.rooms),
        "corridors": [[c.a, c.b, c.weight] for c in game_map.corridors],
        "task_rooms": list(game_map.task_rooms),
        "emergency_room": game_map.emergency_room,
    }
    encoded = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(encoded).hexdigest()
