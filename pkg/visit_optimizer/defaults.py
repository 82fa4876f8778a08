# ===== Built-in defaults (every knob the CLI and config file expose) =====

# Stay-point extraction
DEFAULT_THETA_DIST: float = 100.0  # meters
DEFAULT_THETA_TIME: float = 180.0  # seconds

# Table of settings swept when comparing conventional extraction parameters
SWEEP_THETA_DIST: list[float] = [100.0, 200.0, 500.0]
SWEEP_THETA_TIME: list[float] = [180.0, 900.0, 1800.0]

# Feature parameters
DEFAULT_GAMMA: float = 0.1  # 1/m^2
DEFAULT_LAMBDA: float = 1.0 / 30.0  # per minute
DEFAULT_ALPHA1: float = 0.9
DEFAULT_ALPHA2: float = 0.9
DEFAULT_BETA: float = 0.01
DEFAULT_CANDIDATE_RADIUS: float = 500.0  # meters
DEFAULT_MAX_CANDIDATES: int = 50
DEFAULT_LOGNORM_TAU_FLOOR: float = 0.25  # log-minutes^2, single-sample categories
DEFAULT_UNSEEN_LOGNORM_DENSITY: float = 0.0
DEFAULT_TRANSITION_SCOPE: str = "all"  # "all" | "next"

# Four six-hour windows: [00-06), [06-12), [12-18), [18-24)
TIME_WINDOW_HOURS: int = 6
N_TIME_WINDOWS: int = 24 // TIME_WINDOW_HOURS

# Weight vector layout: (w_s, w_sbar, w_v, w_t, w_y)
WEIGHT_DIMS: dict[str, int] = {"w_s": 2, "w_sbar": 2, "w_v": 3, "w_t": 2, "w_y": 1}
DEFAULT_WEIGHT_GRID: list[float] = [0.1, 1.0]
WEIGHT_SOURCES: list[str] = ["file", "grid-search"]

# Solvers
DEFAULT_BACKEND: str = "bnb"
BACKENDS: list[str] = ["exhaustive", "bnb", "chain"]
METHODS: list[str] = ["je", "chain", "nn", "nci"]
EXHAUSTIVE_GUARD: int = 10_000_000
TIE_EPS: float = 1e-12

# Evaluation
DEFAULT_FOLDS: int = 10
DEFAULT_SEED: int = 0
MATCH_CENTER_METERS: float = 50.0
SEQUENTIAL_WARMUP_SESSIONS: int = 3
OVERLAP_POLICIES: list[str] = ["earliest", "longest"]

# Sessions and time
DEFAULT_TZ_OFFSET_MINUTES: int = 0
SECONDS_PER_DAY: int = 86_400

# Geodesy
EARTH_RADIUS_M: float = 6_371_000.0

# Synthetic worlds
DEFAULT_SAMPLE_INTERVAL: int = 3  # seconds between track-points
DEFAULT_WALK_SPEED: float = 1.3  # m/s
DEFAULT_VISIT_FLOOR: int = 60  # seconds
DEFAULT_GPS_NOISE_SIGMA: float = 10.0  # meters
DEFAULT_AREA: tuple[float, float, float, float] = (139.690, 35.650, 139.750, 35.700)
DEFAULT_START_DATE: str = "2024-01-15"

DEFAULT_CATEGORY_LABELS: list[str] = [
    "cafe",
    "restaurant",
    "daycare",
    "station",
    "supermarket",
    "gym",
    "park",
    "clinic",
    "bookstore",
    "bank",
    "bar",
    "pharmacy",
]

# Median stay time per category in minutes (synthetic behavior)
DEFAULT_CATEGORY_STAY_MINUTES: dict[str, float] = {
    "home": 30.0,
    "office": 240.0,
    "cafe": 25.0,
    "restaurant": 55.0,
    "daycare": 8.0,
    "station": 6.0,
    "supermarket": 20.0,
    "gym": 70.0,
    "park": 35.0,
    "clinic": 45.0,
    "bookstore": 15.0,
    "bank": 10.0,
    "bar": 90.0,
    "pharmacy": 7.0,
}
