"""2D bounded world: wall/obstacle geometry, ray sensing, kinematics, food.

Distances are in world units. The boundary counts as four implicit wall
segments, so sensing and collision code only ever deal with one segment
array. Rays are measured from the agent's surface: a reading of 0.0 means
contact, 1.0 means nothing within sensor range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi
N_RAYS = 8
RAY_ANGLES = np.arange(N_RAYS) * (TWO_PI / N_RAYS)

MAX_PLACEMENT_ATTEMPTS = 10_000


class ArenaError(ValueError):
    """Invalid arena geometry or an impossible placement request."""


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


@dataclass
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        self.heading = normalize_angle(self.heading)


@dataclass
class SensorReading:
    proximity: np.ndarray  # 8 values in [0, 1]; 1.0 = nothing in range
    food: np.ndarray | None = None  # 8 values, foraging only

    def as_inputs(self) -> np.ndarray:
        """Controller input vector: proximity rays, then food rays if present."""
        if self.food is None:
            return self.proximity
        return np.concatenate([self.proximity, self.food])


# Default arena: 1000x1000 square with four interior wall segments.
DEFAULT_WIDTH = 1000.0
DEFAULT_HEIGHT = 1000.0
DEFAULT_OBSTACLES = (
    (250.0, 250.0, 450.0, 250.0),
    (550.0, 700.0, 750.0, 700.0),
    (700.0, 200.0, 700.0, 400.0),
    (300.0, 600.0, 300.0, 800.0),
)


@dataclass
class Arena:
    """Bounded rectangle with interior wall segments and respawning food items.

    `food` is mutated in place by collect_food; everything else is fixed for
    the lifetime of the arena. `segments` holds interior obstacles plus the
    four boundary walls.
    """

    width: float
    height: float
    obstacles: np.ndarray  # (S, 4) rows of x1, y1, x2, y2
    food: np.ndarray  # (F, 2) item centers
    agent_radius: float = 5.0
    food_radius: float = 5.0

    segments: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ArenaError(f"arena dimensions must be positive, got {self.width}x{self.height}")
        self.obstacles = np.asarray(self.obstacles, dtype=float).reshape(-1, 4)
        self.food = np.asarray(self.food, dtype=float).reshape(-1, 2)
        walls = np.array(
            [
                [0.0, 0.0, self.width, 0.0],
                [self.width, 0.0, self.width, self.height],
                [self.width, self.height, 0.0, self.height],
                [0.0, self.height, 0.0, 0.0],
            ]
        )
        self.segments = np.vstack([self.obstacles, walls])

    @property
    def food_count(self) -> int:
        return len(self.food)


def make_arena(
    width: float,
    height: float,
    obstacles,
    n_food: int,
    rng: np.random.Generator,
    agent_radius: float = 5.0,
    food_radius: float = 5.0,
) -> Arena:
    """Build an arena and scatter `n_food` items at valid random positions."""
    arena = Arena(width, height, np.asarray(obstacles, dtype=float).reshape(-1, 4),
                  np.empty((0, 2)), agent_radius, food_radius)
    if n_food > 0:
        items = [sample_free_position(arena, rng) for _ in range(n_food)]
        arena.food = np.array(items)
    return arena


def parse_arena_file(text: str, source: str = "<arena>") -> tuple[float, float, list]:
    """Parse an arena description: `width W`, `height H`, repeated `obstacle x1 y1 x2 y2`.

    Full-line and trailing `#` comments are allowed. Returns (width, height,
    obstacle list); raises ArenaError naming the offending line.
    """
    width = height = None
    obstacles = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key, args = parts[0], parts[1:]
        try:
            if key == "width" and len(args) == 1:
                width = float(args[0])
            elif key == "height" and len(args) == 1:
                height = float(args[0])
            elif key == "obstacle" and len(args) == 4:
                obstacles.append(tuple(float(a) for a in args))
            else:
                raise ArenaError(f"{source}:{lineno}: unrecognized arena line {raw!r}")
        except ValueError as exc:
            if isinstance(exc, ArenaError):
                raise
            raise ArenaError(f"{source}:{lineno}: bad number in {raw!r}") from None
    if width is None or height is None:
        raise ArenaError(f"{source}: width and height are required")
    return width, height, obstacles


# ---------------------------------------------------------------------------
# geometry primitives

def segment_point_dist2(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Squared distance from each point to each segment: (N,2), (S,4) -> (N,S)."""
    points = np.atleast_2d(points)
    p1 = segments[:, :2]
    d = segments[:, 2:] - p1
    length2 = (d * d).sum(axis=1)
    rel = points[:, None, :] - p1[None, :, :]
    t = (rel * d[None, :, :]).sum(axis=2) / np.where(length2 > 0, length2, 1.0)
    np.clip(t, 0.0, 1.0, out=t)
    diff = rel - t[:, :, None] * d[None, :, :]
    return (diff * diff).sum(axis=2)


def segment_point_distance(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Distance from each point to each segment. points (N,2), segments (S,4) -> (N,S)."""
    return np.sqrt(segment_point_dist2(points, segments))


def ray_segment_distances(origins: np.ndarray, dirs: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Distance along each ray to the nearest segment hit, inf when none.

    origins (A,2), dirs (A,R,2) unit vectors, segments (S,4) -> (A,R).
    """
    p1 = segments[:, :2]
    e = segments[:, 2:] - p1
    # denom = cross(dir, e); rays parallel to a segment never hit it
    denom = dirs[:, :, None, 0] * e[None, None, :, 1] - dirs[:, :, None, 1] * e[None, None, :, 0]
    delta = p1[None, :, :] - origins[:, None, :]  # (A,S,2)
    tnum = delta[:, None, :, 0] * e[None, None, :, 1] - delta[:, None, :, 1] * e[None, None, :, 0]
    snum = delta[:, None, :, 0] * dirs[:, :, None, 1] - delta[:, None, :, 1] * dirs[:, :, None, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = tnum / denom
        s = snum / denom
    ok = (np.abs(denom) > 1e-12) & (t >= 0.0) & (s >= 0.0) & (s <= 1.0)
    return np.where(ok, t, np.inf).min(axis=2)


def ray_circle_hit_times(
    origins: np.ndarray,
    dirs: np.ndarray,
    centers: np.ndarray,
    radii: np.ndarray | float,
) -> np.ndarray:
    """Distance along each ray to each circle surface, inf when missed.

    origins (A,2), dirs (A,R,2), centers (C,2) shared or (A,C,2) per-row,
    radii scalar, (C,), or (A,C) -> (A,R,C). A ray starting inside a circle
    reads 0 (contact).
    """
    if centers.ndim == 2:
        centers = centers[None, :, :]
    m = centers - origins[:, None, :]  # (A,C,2)
    b = m[:, None, :, 0] * dirs[:, :, None, 0] + m[:, None, :, 1] * dirs[:, :, None, 1]
    c = (m * m).sum(axis=2) - np.square(radii)  # (A,C); negative inside
    disc = b * b
    disc -= c[:, None, :]
    hit = disc >= 0.0
    np.sqrt(np.maximum(disc, 0.0, out=disc), out=disc)
    t_far = b + disc
    t = b
    t -= disc  # nearest crossing; < 0 means behind or inside
    np.maximum(t, 0.0, out=t)
    t[~(hit & (t_far >= 0.0))] = np.inf
    return t


def _nearest_in_reach(
    origins: np.ndarray,
    dirs: np.ndarray,
    centers: np.ndarray,
    radius: float,
    reach: float,
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Min hit distance per ray against only the circles within `reach`.

    A circle farther than `reach` from a ray's origin cannot produce a
    finite reading, so each origin row is reduced to its nearest K
    candidates (K = the worst row's in-reach count) before the intersection
    pass. `exclude[i]` removes circle index exclude[i] from row i.
    """
    n_rows = len(origins)
    n_circles = len(centers)
    if n_circles == 0:
        return np.full(dirs.shape[:2], np.inf)
    diff = centers[None, :, :] - origins[:, None, :]
    d2 = (diff * diff).sum(axis=2)  # (rows, C)
    if exclude is not None:
        d2[np.arange(n_rows), exclude] = np.inf
    k = int((d2 <= reach * reach).sum(axis=1).max())
    if k == 0:
        return np.full(dirs.shape[:2], np.inf)
    if k >= n_circles:
        t = ray_circle_hit_times(origins, dirs, centers, radius)
        if exclude is not None:
            t[np.arange(n_rows), :, exclude] = np.inf
        return t.min(axis=2)
    cols = np.argpartition(d2, k - 1, axis=1)[:, :k]  # (rows, k)
    t = ray_circle_hit_times(origins, dirs, centers[cols], radius)
    if exclude is not None:
        # a row short on in-reach candidates can still gather its excluded
        # circle (artificial inf distance, real nearby center): mask it
        rows, slots = np.nonzero(cols == exclude[:, None])
        if rows.size:
            t[rows, :, slots] = np.inf
    return t.min(axis=2)


def ray_circle_distances(
    origins: np.ndarray,
    dirs: np.ndarray,
    centers: np.ndarray,
    radius: float,
    ignore: np.ndarray | None = None,
) -> np.ndarray:
    """Distance along each ray to the nearest circle surface, inf when none.

    `ignore[i]` optionally names one circle index to skip for origin row i
    (the agent's own disc).
    """
    if len(centers) == 0:
        return np.full(dirs.shape[:2], np.inf)
    t = ray_circle_hit_times(origins, dirs, centers, radius)
    if ignore is not None:
        t[np.arange(len(origins)), :, ignore] = np.inf
    return t.min(axis=2)


# ---------------------------------------------------------------------------
# sensing

def _readings(t_hit: np.ndarray, agent_radius: float, sensor_range: float) -> np.ndarray:
    r = t_hit - agent_radius
    np.clip(r, 0.0, sensor_range, out=r)
    r /= sensor_range
    return r


def sense_all(
    arena: Arena,
    x: np.ndarray,
    y: np.ndarray,
    heading: np.ndarray,
    idx: np.ndarray,
    sensor_range: float,
    with_food: bool,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Ray readings for the agents listed in `idx`, against all agents.

    Returns (proximity, food) arrays of shape (len(idx), 8); food is None
    when `with_food` is false. Proximity rays hit wall/obstacle segments and
    other agents' discs; food rays hit food items only. Agent and food
    circles go through one fused intersection pass.
    """
    origins = np.stack([x[idx], y[idx]], axis=1)
    angles = heading[idx][:, None] + RAY_ANGLES[None, :]
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=2)

    t_seg = ray_segment_distances(origins, dirs, arena.segments)
    r = arena.agent_radius
    t_agents = _nearest_in_reach(origins, dirs, np.stack([x, y], axis=1), r,
                                 reach=sensor_range + 2 * r, exclude=idx)
    proximity = _readings(np.minimum(t_seg, t_agents), r, sensor_range)
    if not with_food:
        return proximity, None
    t_food = _nearest_in_reach(origins, dirs, arena.food, arena.food_radius,
                               reach=sensor_range + r + arena.food_radius)
    return proximity, _readings(t_food, r, sensor_range)


def sense(
    arena: Arena,
    pose: Pose,
    other_poses: list[Pose],
    sensor_range: float,
    with_food: bool = False,
) -> SensorReading:
    """Single-agent sensing: 8 rays at heading + k*45 degrees, k = 0..7."""
    xs = np.array([pose.x] + [p.x for p in other_poses])
    ys = np.array([pose.y] + [p.y for p in other_poses])
    hs = np.array([pose.heading] + [p.heading for p in other_poses])
    prox, food = sense_all(arena, xs, ys, hs, np.array([0]), sensor_range, with_food)
    return SensorReading(prox[0], None if food is None else food[0])


# ---------------------------------------------------------------------------
# motion

def disc_blocked(arena: Arena, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """True where an agent disc centered at (x, y) collides with a wall or obstacle."""
    r = arena.agent_radius
    points = np.stack([np.atleast_1d(x), np.atleast_1d(y)], axis=1)
    outside = (points[:, 0] < r) | (points[:, 0] > arena.width - r) \
        | (points[:, 1] < r) | (points[:, 1] > arena.height - r)
    if len(arena.obstacles):
        near = segment_point_dist2(points, arena.obstacles).min(axis=1) < r * r
    else:
        near = np.zeros(len(points), dtype=bool)
    return outside | near


def step_kinematics_all(
    arena: Arena,
    x: np.ndarray,
    y: np.ndarray,
    heading: np.ndarray,
    v_trans: np.ndarray,
    v_rot: np.ndarray,
    v_max: float,
    theta_max: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One motion step for a batch of agents; blocked translations are cancelled."""
    new_h = (heading + v_rot * theta_max + math.pi) % TWO_PI - math.pi
    step = v_trans * v_max
    cand_x = x + step * np.cos(new_h)
    cand_y = y + step * np.sin(new_h)
    blocked = disc_blocked(arena, cand_x, cand_y)
    return np.where(blocked, x, cand_x), np.where(blocked, y, cand_y), new_h


def step_kinematics(
    arena: Arena, pose: Pose, v_trans: float, v_rot: float, v_max: float, theta_max: float
) -> Pose:
    """One motion step: rotate, then translate unless the new disc position collides.

    Rotation always applies; agents block on walls and obstacles but not on
    each other.
    """
    nx, ny, nh = step_kinematics_all(
        arena,
        np.array([pose.x]), np.array([pose.y]), np.array([pose.heading]),
        np.array([v_trans]), np.array([v_rot]), v_max, theta_max,
    )
    return Pose(float(nx[0]), float(ny[0]), float(nh[0]))


# ---------------------------------------------------------------------------
# food

def sample_free_position(arena: Arena, rng: np.random.Generator, clearance: float | None = None) -> np.ndarray:
    """Uniform random point inside the boundary with `clearance` to every wall/obstacle.

    Retries are bounded; exhausting them means the arena is too crowded for
    the requested clearance and is a configuration error.
    """
    c = arena.agent_radius if clearance is None else clearance
    lo_x, hi_x = c, arena.width - c
    lo_y, hi_y = c, arena.height - c
    if lo_x >= hi_x or lo_y >= hi_y:
        raise ArenaError("arena too small for the requested clearance")
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        p = np.array([rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)])
        if len(arena.obstacles) == 0:
            return p
        if segment_point_distance(p[None, :], arena.obstacles).min() >= c:
            return p
    raise ArenaError("arena too crowded: no free position found "
                     f"after {MAX_PLACEMENT_ATTEMPTS} attempts")


def collect_food(arena: Arena, pose: Pose, rng: np.random.Generator) -> int:
    """Collect every item within pickup distance of the agent center.

    Collected items respawn immediately at a random valid location, so the
    item count is invariant. Returns the number collected.
    """
    if arena.food_count == 0:
        return 0
    d2 = ((arena.food - np.array([pose.x, pose.y])) ** 2).sum(axis=1)
    pick = (arena.agent_radius + arena.food_radius) ** 2
    hit = np.nonzero(d2 <= pick)[0]
    for i in hit:
        arena.food[i] = sample_free_position(arena, rng)
    return len(hit)


def collect_food_all(
    arena: Arena,
    x: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Food collection for the agents in `idx`, processed in index order.

    An item covered by several agents this step goes to the lowest-id one;
    items respawned this step cannot be collected until the next step.
    Returns per-agent pickup counts aligned with `idx`.
    """
    counts = np.zeros(len(idx), dtype=np.int64)
    if arena.food_count == 0 or len(idx) == 0:
        return counts
    centers = np.stack([x[idx], y[idx]], axis=1)
    d2 = ((centers[:, None, :] - arena.food[None, :, :]) ** 2).sum(axis=2)
    hits = d2 <= (arena.agent_radius + arena.food_radius) ** 2
    taken = hits.any(axis=0)
    if not taken.any():
        return counts
    items = np.nonzero(taken)[0]
    claimer = hits[:, items].argmax(axis=0)
    np.add.at(counts, claimer, 1)
    for i in items:
        arena.food[i] = sample_free_position(arena, rng)
    return counts


# ---------------------------------------------------------------------------
# locality

def agents_within(x: np.ndarray, y: np.ndarray, center: int, radius: float) -> list[int]:
    """Indices of all other agents within `radius` of agent `center`, boundary inclusive."""
    d2 = (x - x[center]) ** 2 + (y - y[center]) ** 2
    near = np.nonzero(d2 <= radius * radius)[0]
    return [int(i) for i in near if i != center]
