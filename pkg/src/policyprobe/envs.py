"""Two deterministic pixel-observation environments at desk scale.

PixelGrid: navigate a walled n-by-n grid to a goal cell. MiniPong: a minimal
paddle-ball rally against a scripted half-speed opponent. Both render logical
cells as 3x3 pixel blocks into a single-channel [0, 255] image, and both are
pure functions of (spec, episode_seed, action sequence): all stochasticity is
front-loaded into seeded draws.

Rewards:
  PixelGrid  +1 on the step that reaches the goal (terminal), -0.01 otherwise
             (wall bumps leave the position unchanged and still cost -0.01).
  MiniPong   +1 when the opponent misses the ball, -1 when the player does;
             the episode ends when either side reaches 5 points or at the cap.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray

CELL = 3  # rendered pixel block per logical cell

PIXELGRID_ACTIONS = 4   # up, down, left, right
MINIPONG_ACTIONS = 3    # stay, up, down

WALL_DENSITY = 0.15
PADDLE_HEIGHT = 3
POINTS_TO_WIN = 5

# grayscale ladder shared by both renderers
SHADE_AGENT = 255   # PixelGrid agent / MiniPong ball
SHADE_GOAL = 170    # PixelGrid goal / MiniPong player paddle
SHADE_WALL = 85     # PixelGrid walls / MiniPong opponent paddle
SHADE_FLOOR = 0


@dataclass(frozen=True)
class EnvSpec:
    env_id: str                      # "pixelgrid" | "minipong"
    size: int                        # logical grid/board side length
    obs_shape: tuple[int, int, int]  # (H, W, C)
    n_actions: int
    gamma: float
    episode_cap: int
    score_min: float
    score_max: float
    seed: int

    def __post_init__(self):
        if self.env_id not in ("pixelgrid", "minipong"):
            raise ValueError(f"unknown environment id {self.env_id!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("discount must be in (0, 1]")
        if not self.score_min < self.score_max:
            raise ValueError("score bounds must satisfy min < max")
        if self.episode_cap < 1:
            raise ValueError("episode cap must be positive")


def make_spec(env_id: str, size: int = 8, seed: int = 0,
              gamma: float = 0.9) -> EnvSpec:
    """Canonical spec for an environment; derived fields are filled in."""
    if env_id == "pixelgrid":
        if size < 4:
            raise ValueError("pixelgrid needs size >= 4")
        cap = 200
        return EnvSpec(env_id, size, (CELL * size, CELL * size, 1),
                       PIXELGRID_ACTIONS, gamma, cap,
                       score_min=-0.01 * cap, score_max=1.0, seed=seed)
    if env_id == "minipong":
        if size != 12:
            raise ValueError("minipong is defined on a 12x12 board")
        return EnvSpec(env_id, size, (CELL * size, CELL * size, 1),
                       MINIPONG_ACTIONS, gamma, episode_cap=1000,
                       score_min=-float(POINTS_TO_WIN),
                       score_max=float(POINTS_TO_WIN), seed=seed)
    raise ValueError(f"unknown environment id {env_id!r}")


@dataclass
class StepResult:
    observation: Array
    reward: float
    terminal: bool
    step_index: int
    truncated: bool = False  # terminal only because the episode cap was hit


class EpisodeOverError(RuntimeError):
    """step() called after the terminal flag without an intervening reset()."""


def _render_cells(cells: Array) -> Array:
    """Upscale an (n, n) grid of shades into (3n, 3n, 1) uint8 pixels."""
    img = np.kron(cells, np.ones((CELL, CELL)))
    return img.astype(np.uint8)[:, :, None]


# ---------------------------------------------------------------------------
# PixelGrid
# ---------------------------------------------------------------------------

def _grid_layout(spec: EnvSpec) -> tuple[Array, tuple[int, int]]:
    """Walls and goal for a spec. Wall patterns are redrawn until the floor
    forms a single connected component, so every seeded start can reach the
    goal; the goal is then drawn uniformly over floor cells."""
    n = spec.size
    for attempt in range(1000):
        rng = np.random.default_rng([spec.seed, 11, attempt])
        walls = rng.random((n, n)) < WALL_DENSITY
        floor = np.argwhere(~walls)
        if len(floor) < 2:
            continue
        seen = {tuple(floor[0])}
        queue = deque([tuple(floor[0])])
        while queue:
            r, c = queue.popleft()
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                nr, nc = r + dr, c + dc
                if 0 <= nr < n and 0 <= nc < n and not walls[nr, nc] \
                        and (nr, nc) not in seen:
                    seen.add((nr, nc))
                    queue.append((nr, nc))
        if len(seen) == len(floor):
            goal_rng = np.random.default_rng([spec.seed, 12])
            goal = tuple(floor[goal_rng.integers(len(floor))])
            return walls, goal
    raise RuntimeError("could not draw a connected wall layout")


def _grid_start(spec: EnvSpec, walls: Array, goal: tuple[int, int],
                episode_seed: int) -> tuple[int, int]:
    floor = [tuple(p) for p in np.argwhere(~walls) if tuple(p) != goal]
    rng = np.random.default_rng([spec.seed, 13, episode_seed])
    return floor[rng.integers(len(floor))]


class PixelGridEnv:
    """Grid navigation: actions up/down/left/right, deterministic walls."""

    MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))

    def __init__(self, spec: EnvSpec):
        if spec.env_id != "pixelgrid":
            raise ValueError("spec is not a pixelgrid spec")
        self.spec = spec
        self.walls, self.goal = _grid_layout(spec)
        self.pos: tuple[int, int] | None = None
        self.step_index = 0
        self.terminal = True

    def _observe(self) -> Array:
        cells = np.full((self.spec.size, self.spec.size), SHADE_FLOOR, dtype=np.float64)
        cells[self.walls] = SHADE_WALL
        cells[self.goal] = SHADE_GOAL
        cells[self.pos] = SHADE_AGENT
        return _render_cells(cells)

    def reset(self, episode_seed: int) -> Array:
        self.pos = _grid_start(self.spec, self.walls, self.goal, episode_seed)
        self.step_index = 0
        self.terminal = False
        return self._observe()

    def step(self, action: int) -> StepResult:
        if self.terminal:
            raise EpisodeOverError("episode is over; call reset() first")
        if not 0 <= action < self.spec.n_actions:
            raise ValueError(f"action {action} out of range")
        dr, dc = self.MOVES[action]
        nr, nc = self.pos[0] + dr, self.pos[1] + dc
        n = self.spec.size
        if 0 <= nr < n and 0 <= nc < n and not self.walls[nr, nc]:
            self.pos = (nr, nc)
        self.step_index += 1
        truncated = False
        if self.pos == self.goal:
            reward, self.terminal = 1.0, True
        else:
            reward = -0.01
            if self.step_index >= self.spec.episode_cap:
                self.terminal, truncated = True, True
        return StepResult(self._observe(), reward, self.terminal,
                          self.step_index, truncated)


def shortest_path_steps(walls: Array, start: tuple[int, int],
                        goal: tuple[int, int]) -> int:
    """Breadth-first shortest path length in moves; -1 if unreachable."""
    n = walls.shape[0]
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        if cell == goal:
            return dist[cell]
        r, c = cell
        for dr, dc in PixelGridEnv.MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < n and 0 <= nc < n and not walls[nr, nc] \
                    and (nr, nc) not in dist:
                dist[(nr, nc)] = dist[cell] + 1
                queue.append((nr, nc))
    return -1


def shortest_path_actions(walls: Array, start: tuple[int, int],
                          goal: tuple[int, int]) -> list[int]:
    """One action sequence realizing the BFS-shortest path."""
    n = walls.shape[0]
    parent: dict[tuple[int, int], tuple[tuple[int, int], int]] = {}
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        if cell == goal:
            actions: list[int] = []
            while cell != start:
                cell, action = parent[cell]
                actions.append(action)
            return actions[::-1]
        r, c = cell
        for action, (dr, dc) in enumerate(PixelGridEnv.MOVES):
            nr, nc = r + dr, c + dc
            if 0 <= nr < n and 0 <= nc < n and not walls[nr, nc] \
                    and (nr, nc) not in dist:
                dist[(nr, nc)] = dist[cell] + 1
                parent[(nr, nc)] = (cell, action)
                queue.append((nr, nc))
    raise ValueError("goal unreachable from start")


def oracle_return(spec: EnvSpec, episode_seed: int) -> float:
    """Optimal undiscounted episode return for the seeded start.

    The start cell depends on the episode seed, so the optimum is per-episode:
    a shortest path of d moves earns 1 - 0.01*(d - 1).
    """
    if spec.env_id != "pixelgrid":
        raise ValueError("oracle_return is defined for pixelgrid only")
    walls, goal = _grid_layout(spec)
    start = _grid_start(spec, walls, goal, episode_seed)
    d = shortest_path_steps(walls, start, goal)
    if d < 0:
        raise RuntimeError("start cannot reach goal (layout bug)")
    return 1.0 - 0.01 * (d - 1)


# ---------------------------------------------------------------------------
# MiniPong
# ---------------------------------------------------------------------------

@dataclass
class _PongState:
    ball: tuple[int, int]
    vel: tuple[int, int]
    player_top: int     # player paddle, rightmost column
    opp_top: int        # opponent paddle, leftmost column
    player_points: int = 0
    opp_points: int = 0
    serve_count: int = 0


class MiniPongEnv:
    """Paddle-ball rally on a 12x12 board.

    The ball moves one cell diagonally per step, reflecting off the top and
    bottom rows and off paddle faces. The scripted opponent (left column)
    tracks the ball row each step and in this geometry never misses, so the
    score is decided entirely by the player (right column, actions
    stay/up/down): flawless play rallies to the episode cap at 0-0, and
    every player miss concedes a point. A miss triggers a fresh center
    serve with a seeded velocity.
    """

    def __init__(self, spec: EnvSpec):
        if spec.env_id != "minipong":
            raise ValueError("spec is not a minipong spec")
        self.spec = spec
        self.state: _PongState | None = None
        self.episode_seed = 0
        self.step_index = 0
        self.terminal = True

    # -- seeded serve velocities ------------------------------------------
    def _serve_velocity(self, serve_index: int) -> tuple[int, int]:
        rng = np.random.default_rng(
            [self.spec.seed, 21, self.episode_seed, serve_index])
        dr, dc = rng.integers(0, 2, size=2) * 2 - 1
        return int(dr), int(dc)

    def _serve(self) -> None:
        st = self.state
        center = self.spec.size // 2
        vel = self._serve_velocity(st.serve_count)
        st.serve_count += 1
        st.ball = (center, center)
        st.vel = vel
        paddle_top = (self.spec.size - PADDLE_HEIGHT) // 2
        st.player_top = paddle_top
        st.opp_top = paddle_top

    # -- rendering ---------------------------------------------------------
    def _observe(self) -> Array:
        n = self.spec.size
        st = self.state
        cells = np.full((n, n), SHADE_FLOOR, dtype=np.float64)
        cells[st.opp_top:st.opp_top + PADDLE_HEIGHT, 0] = SHADE_WALL
        cells[st.player_top:st.player_top + PADDLE_HEIGHT, n - 1] = SHADE_GOAL
        cells[st.ball] = SHADE_AGENT
        return _render_cells(cells)

    # -- public api --------------------------------------------------------
    def reset(self, episode_seed: int) -> Array:
        self.episode_seed = episode_seed
        self.step_index = 0
        self.terminal = False
        self.state = _PongState(ball=(0, 0), vel=(1, 1), player_top=0, opp_top=0)
        self._serve()
        return self._observe()

    def tracker_action(self) -> int:
        """Scripted reference player: chase the ball's current row."""
        st = self.state
        center = st.player_top + PADDLE_HEIGHT // 2
        if st.ball[0] < center:
            return 1
        if st.ball[0] > center:
            return 2
        return 0

    def step(self, action: int) -> StepResult:
        if self.terminal:
            raise EpisodeOverError("episode is over; call reset() first")
        if not 0 <= action < self.spec.n_actions:
            raise ValueError(f"action {action} out of range")
        n = self.spec.size
        st = self.state
        top_max = n - PADDLE_HEIGHT

        # player paddle, then the half-speed opponent
        if action == 1:
            st.player_top = max(0, st.player_top - 1)
        elif action == 2:
            st.player_top = min(top_max, st.player_top + 1)
        # the scripted opponent tracks the ball row at full speed; with this
        # ball model it never misses, so the player's misses alone decide
        # the score and a flawless rally runs to the episode cap at 0-0
        opp_center = st.opp_top + PADDLE_HEIGHT // 2
        if st.ball[0] < opp_center:
            st.opp_top = max(0, st.opp_top - 1)
        elif st.ball[0] > opp_center:
            st.opp_top = min(top_max, st.opp_top + 1)

        # ball: resolve row reflection, then paddle faces / misses
        r, c = st.ball
        dr, dc = st.vel
        nr = r + dr
        if nr < 0 or nr > n - 1:
            dr = -dr
            nr = r + dr
        nc = c + dc
        reward = 0.0
        if nc == n - 1:  # player face
            if st.player_top <= nr < st.player_top + PADDLE_HEIGHT:
                dc, nc = -dc, c
            else:
                st.opp_points += 1
                reward = -1.0
        elif nc == 0:    # opponent face
            if st.opp_top <= nr < st.opp_top + PADDLE_HEIGHT:
                dc, nc = -dc, c
            else:
                st.player_points += 1
                reward = 1.0
        if reward == 0.0:
            st.ball, st.vel = (nr, nc), (dr, dc)
        else:
            self._serve()

        self.step_index += 1
        truncated = False
        if abs(st.player_points - st.opp_points) >= POINTS_TO_WIN:
            self.terminal = True
        elif self.step_index >= self.spec.episode_cap:
            self.terminal, truncated = True, True
        return StepResult(self._observe(), reward, self.terminal,
                          self.step_index, truncated)


Env = PixelGridEnv | MiniPongEnv


def make_env(spec: EnvSpec) -> Env:
    if spec.env_id == "pixelgrid":
        return PixelGridEnv(spec)
    return MiniPongEnv(spec)
