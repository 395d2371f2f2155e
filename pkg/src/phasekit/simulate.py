"""Synthetic interferogram scenes and coherence-calibrated Gaussian phase noise.

Scenes are sums of Gaussian bubbles, constant-offset road bands, and
constant-offset building rectangles over a flat background. Noise with
std sigma_theta = sqrt(-2 ln gamma) added to the unwrapped truth and
re-wrapped yields |E{e^{i theta}}| = gamma, so the injected noise level
doubles as the ground-truth coherence for evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError, InvalidCoherence, InvalidScene, InvalidValue
from .grid import CoherenceMap, PhaseImage, UnwrappedImage, wrap


@dataclass(frozen=True)
class Bubble:
    center: tuple[float, float]  # (row, col)
    sigma: float                 # pixels
    amplitude: float             # radians


@dataclass(frozen=True)
class Road:
    start: tuple[float, float]
    end: tuple[float, float]
    half_width: float            # pixels
    offset: float                # radians


@dataclass(frozen=True)
class Building:
    top_left: tuple[float, float]
    bottom_right: tuple[float, float]
    offset: float                # radians


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    bubbles: tuple[Bubble, ...] = ()
    roads: tuple[Road, ...] = ()
    buildings: tuple[Building, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidScene(f"bad scene dims {self.width}x{self.height}")
        object.__setattr__(self, "bubbles", tuple(self.bubbles))
        object.__setattr__(self, "roads", tuple(self.roads))
        object.__setattr__(self, "buildings", tuple(self.buildings))
        for b in self.bubbles:
            if b.sigma <= 0:
                raise InvalidScene(f"bubble sigma must be > 0, got {b.sigma}")
            self._check_point(b.center, "bubble center")
        for r in self.roads:
            if r.half_width < 1:
                raise InvalidScene(f"road half_width must be >= 1, got {r.half_width}")
            self._check_point(r.start, "road start")
            self._check_point(r.end, "road end")
        for bl in self.buildings:
            self._check_point(bl.top_left, "building top_left")
            self._check_point(bl.bottom_right, "building bottom_right")
            if bl.bottom_right[0] < bl.top_left[0] or bl.bottom_right[1] < bl.top_left[1]:
                raise InvalidScene("building bottom_right must not precede top_left")

    def _check_point(self, pt, what):
        row, col = pt
        if not (0 <= row <= self.height - 1) or not (0 <= col <= self.width - 1):
            raise InvalidScene(f"{what} ({row},{col}) outside {self.height}x{self.width} image")


@dataclass(frozen=True)
class NoiseSpec:
    """Either a uniform coherence level or a per-pixel coherence map."""

    mode: str                               # "uniform" | "map"
    gamma: float | None = None              # uniform mode
    gamma_map: CoherenceMap | None = None   # map mode
    seed: int = 0

    def __post_init__(self):
        if self.mode == "uniform":
            if self.gamma is None or not (0.0 < self.gamma <= 1.0):
                raise InvalidCoherence(f"uniform gamma must be in (0, 1], got {self.gamma}")
        elif self.mode == "map":
            if self.gamma_map is None:
                raise InvalidValue("map mode requires gamma_map")
            if np.any(self.gamma_map.data <= 0.0):
                raise InvalidCoherence("gamma_map has pixels with gamma <= 0 (infinite noise)")
        else:
            raise InvalidValue(f"unknown noise mode {self.mode!r}")


def sigma_from_gamma(gamma):
    """Phase-noise std sigma_theta = sqrt(-2 ln gamma), gamma in (0, 1]."""
    g = np.asarray(gamma, dtype=np.float64)
    if np.any(g <= 0.0) or np.any(g > 1.0):
        raise InvalidCoherence(f"gamma must be in (0, 1], got {gamma}")
    s = np.sqrt(-2.0 * np.log(g))
    return float(s) if np.ndim(gamma) == 0 else s


def generate_truth(spec: SceneSpec):
    """Render the clean scene.

    Returns (unwrapped, wrapped, coherence) where coherence is 1 everywhere:
    noise, and with it the evaluation-grade coherence, is applied separately.
    """
    rows = np.arange(spec.height, dtype=np.float64)[:, None]
    cols = np.arange(spec.width, dtype=np.float64)[None, :]
    surface = np.zeros((spec.height, spec.width), dtype=np.float64)

    for b in spec.bubbles:
        d2 = (rows - b.center[0]) ** 2 + (cols - b.center[1]) ** 2
        surface += b.amplitude * np.exp(-d2 / (2.0 * b.sigma**2))

    for r in spec.roads:
        dr = r.end[0] - r.start[0]
        dc = r.end[1] - r.start[1]
        length2 = dr * dr + dc * dc
        if length2 == 0.0:
            raise InvalidScene("road start and end coincide")
        t = ((rows - r.start[0]) * dr + (cols - r.start[1]) * dc) / length2
        perp = np.abs((rows - r.start[0]) * dc - (cols - r.start[1]) * dr) / np.sqrt(length2)
        band = (t >= 0.0) & (t <= 1.0) & (perp <= r.half_width)
        surface += np.where(band, r.offset, 0.0)

    for bl in spec.buildings:
        inside = (
            (rows >= bl.top_left[0])
            & (rows <= bl.bottom_right[0])
            & (cols >= bl.top_left[1])
            & (cols <= bl.bottom_right[1])
        )
        surface += np.where(inside, bl.offset, 0.0)

    unwrapped = UnwrappedImage(surface.astype(np.float32))
    wrapped = PhaseImage(wrap(unwrapped.data.astype(np.float64)).astype(np.float32))
    coherence = CoherenceMap(np.ones((spec.height, spec.width), dtype=np.float32))
    return unwrapped, wrapped, coherence


def counter_normals(seed: int, shape) -> np.ndarray:
    """Standard normals from a counter-based Philox stream.

    Draw i (row-major) maps the i-th 64-bit output through the inverse
    normal CDF, so the result is a pure function of (seed, index) and can
    be generated in any chunking without changing values.
    """
    n = int(np.prod(shape))
    gen = np.random.Generator(np.random.Philox(key=seed))
    bits = gen.integers(0, 2**64, size=n, dtype=np.uint64, endpoint=False)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) / float(1 << 53)
    return ndtri(u).reshape(shape)


def add_noise(truth: PhaseImage, noise: NoiseSpec) -> PhaseImage:
    """Per-pixel wrap(theta + n), n ~ N(0, sigma_from_gamma(gamma)^2)."""
    if noise.mode == "uniform":
        sigma = sigma_from_gamma(noise.gamma)
    else:
        gm = noise.gamma_map
        if (gm.height, gm.width) != (truth.height, truth.width):
            raise InvalidValue(
                f"gamma_map {gm.height}x{gm.width} does not match truth {truth.height}x{truth.width}"
            )
        sigma = sigma_from_gamma(gm.data.astype(np.float64))
    if np.all(np.asarray(sigma) == 0.0):
        return PhaseImage(truth.data.copy())
    draws = counter_normals(noise.seed, (truth.height, truth.width))
    noisy = wrap(truth.data.astype(np.float64) + sigma * draws)
    return PhaseImage(noisy.astype(np.float32))


def noise_gamma_map(truth: PhaseImage, noise: NoiseSpec) -> CoherenceMap:
    """The coherence map the noise injection realises; evaluation ground truth."""
    if noise.mode == "uniform":
        data = np.full((truth.height, truth.width), noise.gamma, dtype=np.float32)
        return CoherenceMap(data)
    return CoherenceMap(noise.gamma_map.data.copy())


def random_scene(width: int, height: int, seed: int, *,
                 n_bubbles=(3, 8), n_roads=(1, 3), n_buildings=(1, 3),
                 offset_range=(0.6, 1.8)) -> SceneSpec:
    """Draw a scene with randomized feature placement; deterministic per seed.

    Bubble amplitudes scale with sigma so peak fringe slopes stay below
    ~0.75 rad/px; road/building offsets are drawn from offset_range with
    random sign.
    """
    rng = np.random.Generator(np.random.PCG64(seed))

    def offset():
        return float(rng.uniform(*offset_range) * rng.choice([-1.0, 1.0]))

    bubbles = []
    for _ in range(rng.integers(n_bubbles[0], n_bubbles[1] + 1)):
        sigma = rng.uniform(0.05, 0.25) * min(width, height)
        amplitude = rng.uniform(2.0, max(2.5, min(20.0, 1.2 * sigma))) * rng.choice([-1.0, 1.0])
        bubbles.append(Bubble(
            center=(rng.uniform(0, height - 1), rng.uniform(0, width - 1)),
            sigma=float(sigma),
            amplitude=float(amplitude),
        ))
    roads = []
    for _ in range(rng.integers(n_roads[0], n_roads[1] + 1)):
        roads.append(Road(
            start=(rng.uniform(0, height - 1), rng.uniform(0, width - 1)),
            end=(rng.uniform(0, height - 1), rng.uniform(0, width - 1)),
            half_width=float(rng.uniform(1.5, 5.0)),
            offset=offset(),
        ))
    buildings = []
    for _ in range(rng.integers(n_buildings[0], n_buildings[1] + 1)):
        r0 = rng.uniform(0, height - 12)
        c0 = rng.uniform(0, width - 12)
        buildings.append(Building(
            top_left=(r0, c0),
            bottom_right=(min(r0 + rng.uniform(8, height / 3), height - 1),
                          min(c0 + rng.uniform(8, width / 3), width - 1)),
            offset=offset(),
        ))
    return SceneSpec(width=width, height=height, bubbles=tuple(bubbles),
                     roads=tuple(roads), buildings=tuple(buildings), seed=seed)


def parse_scene_config(text: str) -> SceneSpec:
    """Parse the plain-text key=value scene grammar.

    Recognised keys: width, height, seed (scalars) and repeated
    bubble=row,col,sigma,amplitude
    road=r0,c0,r1,c1,half_width,offset
    building=r0,c0,r1,c1,offset
    Comment lines start with '#'; blank lines are ignored.
    """
    width = height = None
    seed = 0
    bubbles, roads, buildings = [], [], []

    def floats(value, n, lineno):
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != n:
            raise ConfigError(f"expected {n} comma-separated values, got {len(parts)}", line=lineno)
        try:
            return [float(p) for p in parts]
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno) from exc

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            if key == "width":
                width = int(value)
            elif key == "height":
                height = int(value)
            elif key == "seed":
                seed = int(value)
            elif key == "bubble":
                row, col, sigma, amp = floats(value, 4, lineno)
                bubbles.append(Bubble(center=(row, col), sigma=sigma, amplitude=amp))
            elif key == "road":
                r0, c0, r1, c1, hw, off = floats(value, 6, lineno)
                roads.append(Road(start=(r0, c0), end=(r1, c1), half_width=hw, offset=off))
            elif key == "building":
                r0, c0, r1, c1, off = floats(value, 5, lineno)
                buildings.append(Building(top_left=(r0, c0), bottom_right=(r1, c1), offset=off))
            else:
                raise ConfigError(f"unknown key {key!r}", line=lineno)
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno) from exc

    if width is None or height is None:
        raise ConfigError("config must set width and height")
    try:
        return SceneSpec(width=width, height=height, bubbles=tuple(bubbles),
                         roads=tuple(roads), buildings=tuple(buildings), seed=seed)
    except InvalidScene as exc:
        raise ConfigError(str(exc)) from exc
