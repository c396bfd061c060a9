"""Grid geometry: octile distances, path construction, A* around congestion.

Movement is 8-connected with unit cost for cardinal steps and sqrt(2) for
diagonal steps; path length under this metric defines distance() everywhere
in the scenario (order values, assignment costs, perception).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

SQRT2 = math.sqrt(2.0)

# Fixed neighbor expansion order for deterministic A* tie-breaking:
# N, NE, E, SE, S, SW, W, NW (matches the action vocabulary).
NEIGHBOR_ORDER = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]


def octile(ax: int, ay: int, bx: int, by: int) -> float:
    """Shortest 8-connected path length on an unobstructed grid."""
    dx = abs(ax - bx)
    dy = abs(ay - by)
    lo, hi = (dx, dy) if dx < dy else (dy, dx)
    return (hi - lo) + SQRT2 * lo


@dataclass
class CongestionRect:
    x0: int
    y0: int
    x1: int  # inclusive
    y1: int
    expiry: int  # first step at which the rect is passable again

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass
class GridMap:
    """Rectangular grid; all cells passable except active congestion rects.

    Subregions are the 2x2 equal partition of the rectangle.
    """

    width: int = 786
    height: int = 890
    rects: list[CongestionRect] = field(default_factory=list)
    version: int = 0  # bumped whenever the congestion set changes

    N_REGIONS = 4

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def blocked(self, x: int, y: int) -> bool:
        return any(r.contains(x, y) for r in self.rects)

    def add_rect(self, rect: CongestionRect) -> None:
        self.rects.append(rect)
        self.version += 1

    def expire_rects(self, step: int) -> None:
        live = [r for r in self.rects if r.expiry > step]
        if len(live) != len(self.rects):
            self.rects = live
            self.version += 1

    def region_of(self, x: int, y: int) -> int:
        return (1 if x >= self.width // 2 else 0) + (2 if y >= self.height // 2 else 0)

    def region_center(self, region: int) -> tuple[int, int]:
        hw, hh = self.width // 2, self.height // 2
        cx = hw // 2 if region % 2 == 0 else hw + (self.width - hw) // 2
        cy = hh // 2 if region < 2 else hh + (self.height - hh) // 2
        return cx, cy


def line_path(ax: int, ay: int, bx: int, by: int) -> list[tuple[int, int]]:
    """Canonical shortest path ignoring congestion: diagonal leg first,
    then the straight remainder.  Excludes the start cell."""
    path = []
    x, y = ax, ay
    sx = 0 if bx == ax else (1 if bx > ax else -1)
    sy = 0 if by == ay else (1 if by > ay else -1)
    while x != bx and y != by:
        x += sx
        y += sy
        path.append((x, y))
    while x != bx:
        x += sx
        path.append((x, y))
    while y != by:
        y += sy
        path.append((x, y))
    return path


def path_cost(start: tuple[int, int], path: list[tuple[int, int]]) -> float:
    cost = 0.0
    px, py = start
    for x, y in path:
        cost += SQRT2 if (x != px and y != py) else 1.0
        px, py = x, y
    return cost


def astar(
    grid: GridMap,
    start: tuple[int, int],
    goal: tuple[int, int],
    margin: int = 60,
) -> list[tuple[int, int]] | None:
    """Shortest path avoiding congested cells, searched inside the inflated
    bounding box of start/goal.  Returns None when no path exists there."""
    if start == goal:
        return []
    x0 = max(min(start[0], goal[0]) - margin, 0)
    x1 = min(max(start[0], goal[0]) + margin, grid.width - 1)
    y0 = max(min(start[1], goal[1]) - margin, 0)
    y1 = min(max(start[1], goal[1]) + margin, grid.height - 1)

    g = {start: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    counter = 0
    h0 = octile(start[0], start[1], goal[0], goal[1])
    heap = [(h0, counter, start)]
    closed: set[tuple[int, int]] = set()
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur == goal:
            path = [cur]
            while path[-1] != start:
                path.append(came[path[-1]])
            path.reverse()
            return path[1:]
        if cur in closed:
            continue
        closed.add(cur)
        cx, cy = cur
        for dx, dy in NEIGHBOR_ORDER:
            nx, ny = cx + dx, cy + dy
            if not (x0 <= nx <= x1 and y0 <= ny <= y1):
                continue
            if grid.blocked(nx, ny):
                continue
            ng = g[cur] + (SQRT2 if dx and dy else 1.0)
            nxt = (nx, ny)
            if ng < g.get(nxt, math.inf) - 1e-12:
                g[nxt] = ng
                came[nxt] = cur
                counter += 1
                heapq.heappush(heap, (ng + octile(nx, ny, goal[0], goal[1]), counter, nxt))
    return None


def plan_path(
    start: tuple[int, int],
    goal: tuple[int, int],
    grid: GridMap,
) -> tuple[list[tuple[int, int]], bool]:
    """Shortest path from start to goal avoiding current congestion.

    Returns (path, wait_flag).  When the goal is unreachable under current
    congestion the congestion-free path is returned with wait_flag True: the
    carrier advances as far as possible and waits at the blockage.
    """
    if start == goal:
        return [], False
    if not grid.rects:
        return line_path(*start, *goal), False
    direct = line_path(*start, *goal)
    if not any(grid.blocked(x, y) for x, y in direct):
        return direct, False
    found = astar(grid, start, goal)
    if found is not None:
        return found, False
    return direct, True
