"""
tools/observation/svg_render.py - Vector Views

Builds the two per-agent SVG documents from a StructuredSummary plus the
map geometry. Output depends only on its inputs, so the same state renders
to the same bytes.

    render_global(summary, map)  -> RenderedView   map + own position + own tasks
    render_local(summary, map)   -> RenderedView   current room contents + arrows

The global view never draws another player. The local view draws only what
the summary already lists (co-located players, bodies, witnessed movers).
"""

from typing import Optional
from xml.sax.saxutils import escape, quoteattr

import networkx as nx

from schema.map import Map
from schema.observation import RenderedView, StructuredSummary
from tools.map.map_graph import graph, map_digest

GLOBAL_WIDTH, GLOBAL_HEIGHT = 900, 560
LOCAL_WIDTH, LOCAL_HEIGHT = 480, 320
ROOM_W, ROOM_H = 120, 54
MARGIN = 70

STYLE = (
    ".room{fill:#eef1f5;stroke:#34495e;stroke-width:2}"
    ".here{fill:#d6eaf8}"
    ".corridor{stroke:#7f8c8d;stroke-width:3}"
    ".weight{font-size:11px;fill:#7f8c8d}"
    ".label{font-size:13px;font-family:sans-serif;fill:#2c3e50}"
    ".viewer{fill:#2980b9}"
    ".player{fill:#27ae60}"
    ".body{stroke:#c0392b;stroke-width:3}"
    ".task{fill:#f39c12}"
    ".done{fill:#bdc3c7}"
    ".arrow{stroke:#8e44ad;stroke-width:2;fill:none;marker-end:url(#head)}"
)


class SvgDocument:
    """Accumulates SVG elements and serializes them with a fixed header."""

    def __init__(self, width: int, height: int, title: str):
        self.width = width
        self.height = height
        self.title = title
        self.data: list[str] = []

    def rect(self, x: float, y: float, w: float, h: float, cls: str, **attrs) -> None:
        self.data.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{w:.1f}" height="{h:.1f}" '
                         f'class="{cls}"{_attrs(attrs)}/>')

    def line(self, x1: float, y1: float, x2: float, y2: float, cls: str, **attrs) -> None:
        self.data.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
                         f'class="{cls}"{_attrs(attrs)}/>')

    def circle(self, x: float, y: float, r: float, cls: str, **attrs) -> None:
        self.data.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{r:.1f}" class="{cls}"{_attrs(attrs)}/>')

    def text(self, x: float, y: float, content: str, cls: str = "label", anchor: str = "middle") -> None:
        self.data.append(f'<text x="{x:.1f}" y="{y:.1f}" class="{cls}" '
                         f'text-anchor="{anchor}">{escape(content)}</text>')

    def cross(self, x: float, y: float, size: float, **attrs) -> None:
        self.line(x - size, y - size, x + size, y + size, "body", **attrs)
        self.line(x - size, y + size, x + size, y - size, "body", **attrs)

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">'
            f"<title>{escape(self.title)}</title>"
            f"<style>{STYLE}</style>"
            '<defs><marker id="head" markerWidth="8" markerHeight="8" refX="6" refY="3" '
            'orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#8e44ad"/></marker></defs>'
        )
        return "\n".join([head] + self.data + ["</svg>"]) + "\n"


def _attrs(attrs: dict) -> str:
    return "".join(f" {key.replace('_', '-')}={quoteattr(str(value))}" for key, value in sorted(attrs.items()))


# =============================================================================
# LAYOUT
# =============================================================================

_LAYOUT_CACHE: dict[tuple, dict[str, tuple[float, float]]] = {}


def room_positions(game_map: Map) -> dict[str, tuple[float, float]]:
    """
    Canvas coordinates for every room: the map's own layout when it has one
    for every room, else a seeded spring embedding scaled to the canvas.
    """
    key = (map_digest(game_map), tuple(sorted(game_map.layout.items())))
    if key in _LAYOUT_CACHE:
        return _LAYOUT_CACHE[key]

    if game_map.layout and set(game_map.layout) == set(game_map.rooms):
        raw = dict(game_map.layout)
    else:
        embedding = nx.spring_layout(graph(game_map), seed=0)
        raw = {room: (float(embedding[room][0]), float(embedding[room][1])) for room in game_map.rooms}

    xs = [p[0] for p in raw.values()]
    ys = [p[1] for p in raw.values()]
    span_x = (max(xs) - min(xs)) or 1.0
    span_y = (max(ys) - min(ys)) or 1.0
    positions = {
        room: (
            MARGIN + (x - min(xs)) / span_x * (GLOBAL_WIDTH - 2 * MARGIN),
            MARGIN + (y - min(ys)) / span_y * (GLOBAL_HEIGHT - 2 * MARGIN),
        )
        for room, (x, y) in raw.items()
    }
    _LAYOUT_CACHE[key] = positions
    return positions


def _corridor_point(positions, from_room: str, to_room: str, fraction: float) -> tuple[float, float]:
    (x1, y1), (x2, y2) = positions[from_room], positions[to_room]
    return x1 + (x2 - x1) * fraction, y1 + (y2 - y1) * fraction


# =============================================================================
# GLOBAL VIEW
# =============================================================================

def render_global(summary: StructuredSummary, game_map: Map) -> RenderedView:
    positions = room_positions(game_map)
    doc = SvgDocument(GLOBAL_WIDTH, GLOBAL_HEIGHT, f"global view of {summary.viewer} at tick {summary.tick}")

    for corridor in game_map.corridors:
        x1, y1 = positions[corridor.a]
        x2, y2 = positions[corridor.b]
        doc.line(x1, y1, x2, y2, "corridor", data_corridor=f"{corridor.a}-{corridor.b}")
        doc.text((x1 + x2) / 2, (y1 + y2) / 2 - 4, str(corridor.weight), cls="weight")

    for room in game_map.rooms:
        x, y = positions[room]
        cls = "room here" if room == summary.room else "room"
        doc.rect(x - ROOM_W / 2, y - ROOM_H / 2, ROOM_W, ROOM_H, cls, data_room=room)
        doc.text(x, y - 6, room.replace("_", " "))

    for index, task in enumerate(summary.tasks):
        x, y = positions[task.room]
        cls = "done" if task.completed else "task"
        doc.rect(x - ROOM_W / 2 + 6 + 12 * index, y + ROOM_H / 2 - 14, 9, 9, cls,
                 data_task=str(task.task_id))

    viewer_point = _viewer_point(summary, positions, game_map)
    if viewer_point is not None:
        doc.circle(viewer_point[0], viewer_point[1] + 10, 7, "viewer")
        doc.text(viewer_point[0], viewer_point[1] + 28, "you")

    return RenderedView(kind="global", width=GLOBAL_WIDTH, height=GLOBAL_HEIGHT, svg=doc.render())


def _viewer_point(summary: StructuredSummary, positions, game_map: Map) -> Optional[tuple[float, float]]:
    if summary.room is not None:
        return positions[summary.room]
    if summary.transit is not None:
        transit = summary.transit
        total = game_map.weight(transit.from_room, transit.to_room) or 1
        fraction = 1 - transit.remaining / (total + 1)
        return _corridor_point(positions, transit.from_room, transit.to_room, fraction)
    return None


# =============================================================================
# LOCAL VIEW
# =============================================================================

def render_local(summary: StructuredSummary, game_map: Map) -> RenderedView:
    doc = SvgDocument(LOCAL_WIDTH, LOCAL_HEIGHT, f"local view of {summary.viewer} at tick {summary.tick}")

    if summary.transit is not None:
        transit = summary.transit
        doc.rect(30, 120, 120, 60, "room", data_room=transit.from_room)
        doc.text(90, 155, transit.from_room.replace("_", " "))
        doc.rect(330, 120, 120, 60, "room", data_room=transit.to_room)
        doc.text(390, 155, transit.to_room.replace("_", " "))
        doc.line(150, 150, 330, 150, "corridor")
        doc.circle(240, 150, 8, "viewer")
        doc.text(240, 130, f"you, {transit.remaining} tick(s) to go")
        return RenderedView(kind="local", width=LOCAL_WIDTH, height=LOCAL_HEIGHT, svg=doc.render())

    doc.rect(90, 50, 300, 200, "room here", data_room=summary.room or "")
    doc.text(240, 40, (summary.room or "").replace("_", " "))

    slots = [(150 + 60 * (i % 4), 110 + 60 * (i // 4)) for i in range(12)]
    occupants = [(summary.viewer, "viewer")] + [(p, "player") for p in summary.co_located]
    for (name, cls), (x, y) in zip(occupants, slots):
        doc.circle(x, y, 12, cls, data_player=name)
        doc.text(x, y + 26, "you" if cls == "viewer" else name)
    for name, (x, y) in zip(summary.bodies_here, slots[len(occupants):]):
        doc.cross(x, y, 10, data_body=name)
        doc.text(x, y + 26, f"{name} (body)")

    for index, move in enumerate(summary.witnessed):
        y = 70 + 24 * index
        if move.direction == "departed":
            doc.line(390, y, 460, y, "arrow", data_mover=move.mover)
            doc.text(470, y - 4, f"{move.mover} -> {move.other_room}", anchor="end")
        else:
            doc.line(20, y, 90, y, "arrow", data_mover=move.mover)
            doc.text(10, y - 4, f"{move.mover} <- {move.other_room}", anchor="start")

    for index, exit_room in enumerate(summary.adjacent):
        doc.text(100 + 95 * (index % 4), 275 + 18 * (index // 4),
                 f"{exit_room.room.replace('_', ' ')} ({exit_room.cost})", cls="weight", anchor="start")

    return RenderedView(kind="local", width=LOCAL_WIDTH, height=LOCAL_HEIGHT, svg=doc.render())
