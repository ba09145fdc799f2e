"""
Synthetic datasets with a planted group-sparse signal, and their on-disk format.

A dataset directory holds meta.json plus three binary arrays (A.f64,
response.f64, planted_x.f64). Each binary file starts with the magic
b"CFKIT\\0", then u32 version, u32 rows and u32 cols (little-endian), then
rows*cols little-endian float64 values in row-major order.
"""

import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from cfkit.config import Config
from cfkit.errors import CorruptFile, FormatVersionMismatch, OddSampleCount, PatternMismatch
from cfkit.prox import GroupStructure

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = b"CFKIT\0"
HEADER_SIZE = len(MAGIC) + 12
SAMPLER = "numpy.random.default_rng(PCG64).standard_normal"

MODELS = ("lasso", "logistic")
RAMP_LENGTH = 10
PLANTED_BLOCKS = 10

# Penalty weights at the original 8000-row scale; Lasso weights scale with m
BASE_GAMMAS = {
    "lasso": {"gl": (5.0, 0.0), "sgl": (10.0, 10.0), "osgl": (0.1, 0.1)},
    "logistic": {"sglr": (0.01, 0.01)},
}
BASE_ROWS = 8000
GAMMA_RULE = "lasso: base * m / 8000 (sum-of-squares loss grows with m); logistic: base (averaged loss)"

DESK_SHAPES = {"lasso": (800, 400), "logistic": (100, 500)}


@dataclass(frozen=True)
class GenSpec:
    """Parameters of a synthetic dataset. overlap_stride=0 means disjoint groups."""
    m: int
    n: int
    group_size: int = 10
    overlap_stride: int = 0
    delta: float = field(default_factory=lambda: Config.NOISE_DELTA)
    seed: int = 0
    model: str = "lasso"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"Unknown model '{self.model}'. Available: {list(MODELS)}")
        if self.m < 1 or self.n < 1:
            raise ValueError(f"dimensions must be positive, got m={self.m}, n={self.n}")
        if self.group_size < 1:
            raise PatternMismatch(f"group size must be at least 1, got {self.group_size}")
        if not 0 <= self.overlap_stride < self.group_size:
            raise PatternMismatch(
                f"overlap stride must lie in [0, {self.group_size}), got {self.overlap_stride}"
            )
        if self.delta < 0:
            raise ValueError(f"noise scale must be nonnegative, got {self.delta}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        # Raises PatternMismatch when the groups cannot tile [0, n)
        make_groups(self.n, self.group_size, self.overlap_stride)

    @property
    def stride(self) -> int:
        return self.overlap_stride or self.group_size


@dataclass(frozen=True)
class Dataset:
    a_matrix: np.ndarray
    response: np.ndarray
    groups: GroupStructure
    planted_x: np.ndarray
    meta: Dict

    @property
    def m(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def model(self) -> str:
        return self.meta["model"]

    def gamma_defaults(self, flavor: str) -> Tuple[float, float]:
        try:
            g1, g2 = self.meta["gamma_defaults"][flavor]
        except KeyError:
            raise ValueError(f"dataset has no default penalty weights for flavor '{flavor}'")
        return float(g1), float(g2)


def make_groups(n: int, size: int, stride: int = 0) -> GroupStructure:
    """Groups [g*stride, g*stride + size) for g = 0, 1, ... with the last ending at n."""
    stride = stride or size
    if not 1 <= stride <= size <= n:
        raise PatternMismatch(f"need 1 <= stride <= size <= n, got stride={stride}, size={size}, n={n}")
    if (n - size) % stride:
        raise PatternMismatch(f"groups of size {size} with stride {stride} cannot tile {n} coordinates")
    count = (n - size) // stride + 1
    return GroupStructure(tuple(tuple(range(g * stride, g * stride + size)) for g in range(count)), n)


def default_gammas(model: str, m: int) -> Dict[str, List[float]]:
    scale = m / BASE_ROWS if model == "lasso" else 1.0
    return {flavor: [g1 * scale, g2 * scale] for flavor, (g1, g2) in BASE_GAMMAS[model].items()}


def planted_signal(n: int, group_size: int) -> np.ndarray:
    """Ramp 1..min(10, group_size) at the start of each of the first ten blocks of group_size."""
    x = np.zeros(n)
    ramp = np.arange(1.0, min(RAMP_LENGTH, group_size) + 1.0)
    for j in range(PLANTED_BLOCKS):
        start = j * group_size
        if start >= n:
            break
        length = min(ramp.size, n - start)
        x[start:start + length] = ramp[:length]
    return x


def _meta(spec: GenSpec, groups: GroupStructure) -> Dict:
    meta = asdict(spec)
    meta.update(
        format_version=FORMAT_VERSION,
        groups=groups.to_lists(),
        gamma_defaults=default_gammas(spec.model, spec.m),
        gamma_rule=GAMMA_RULE,
        sampler=SAMPLER,
    )
    return meta


def gen_lasso_dataset(spec: GenSpec) -> Dataset:
    """A ~ N(0,1) entrywise, response = A x_planted + delta * eps."""
    if spec.model != "lasso":
        raise ValueError(f"expected a lasso spec, got model '{spec.model}'")
    groups = make_groups(spec.n, spec.group_size, spec.overlap_stride)
    rng = np.random.default_rng(spec.seed)
    a = rng.standard_normal((spec.m, spec.n))
    noise = rng.standard_normal(spec.m)
    x = planted_signal(spec.n, spec.group_size)
    response = a @ x
    if spec.delta:
        response = response + spec.delta * noise
    logger.info(f"Generated lasso dataset {spec.m}x{spec.n} ({len(groups)} groups, seed {spec.seed})")
    return Dataset(a, response, groups, x, _meta(spec, groups))


def gen_logistic_dataset(spec: GenSpec) -> Dataset:
    """A ~ N(0,1) entrywise; the first m/2 labels are -1, the rest +1."""
    if spec.model != "logistic":
        raise ValueError(f"expected a logistic spec, got model '{spec.model}'")
    if spec.m % 2:
        raise OddSampleCount(f"logistic datasets need an even sample count, got {spec.m}")
    groups = make_groups(spec.n, spec.group_size, spec.overlap_stride)
    rng = np.random.default_rng(spec.seed)
    a = rng.standard_normal((spec.m, spec.n))
    half = spec.m // 2
    labels = np.concatenate([-np.ones(half), np.ones(half)])
    logger.info(f"Generated logistic dataset {spec.m}x{spec.n} ({len(groups)} groups, seed {spec.seed})")
    return Dataset(a, labels, groups, np.zeros(spec.n), _meta(spec, groups))


def generate(spec: GenSpec) -> Dataset:
    return gen_lasso_dataset(spec) if spec.model == "lasso" else gen_logistic_dataset(spec)


# -- Binary arrays --

def write_atomic(path: str, data: bytes) -> None:
    """Write bytes to a sibling temp file and rename it over path."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_array(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, dtype=float)
    rows, cols = (arr.shape[0], 1) if arr.ndim == 1 else arr.shape
    header = np.array([FORMAT_VERSION, rows, cols], dtype="<u4").tobytes()
    return MAGIC + header + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def decode_array(data: bytes, name: str = "array") -> np.ndarray:
    """Inverse of encode_array; always returns a rows x cols matrix."""
    if len(data) < HEADER_SIZE or data[:len(MAGIC)] != MAGIC:
        raise CorruptFile(f"{name}: missing magic header")
    version, rows, cols = (int(v) for v in np.frombuffer(data, dtype="<u4", count=3, offset=len(MAGIC)))
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"{name}: format version {version}, expected {FORMAT_VERSION}")
    expected = HEADER_SIZE + 8 * rows * cols
    if len(data) != expected:
        raise CorruptFile(f"{name}: {len(data)} bytes, header declares {expected}")
    return np.frombuffer(data, dtype="<f8", offset=HEADER_SIZE).astype(float).reshape(rows, cols)


def write_array(path: str, arr: np.ndarray) -> None:
    write_atomic(path, encode_array(arr))


def read_array(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_array(f.read(), os.path.basename(path))


def read_vector(path: str) -> np.ndarray:
    arr = read_array(path)
    if arr.shape[1] != 1:
        raise CorruptFile(f"{os.path.basename(path)}: expected a vector, got {arr.shape[1]} columns")
    return arr[:, 0].copy()


# -- Dataset directories --

def save_dataset(d: Dataset, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    write_array(os.path.join(directory, "A.f64"), d.a_matrix)
    write_array(os.path.join(directory, "response.f64"), d.response)
    write_array(os.path.join(directory, "planted_x.f64"), d.planted_x)
    text = json.dumps(d.meta, indent=2) + "\n"
    write_atomic(os.path.join(directory, "meta.json"), text.encode("utf-8"))
    logger.info(f"Saved dataset to {directory}")


def load_dataset(directory: str) -> Dataset:
    try:
        with open(os.path.join(directory, "meta.json"), encoding="utf-8") as f:
            meta = json.load(f)
    except json.JSONDecodeError as e:
        raise CorruptFile(f"meta.json is not valid JSON: {e}")
    if meta.get("format_version") != FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"meta.json format version {meta.get('format_version')}, expected {FORMAT_VERSION}"
        )
    try:
        m, n, groups = int(meta["m"]), int(meta["n"]), meta["groups"]
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptFile(f"meta.json is missing a field: {e}")

    a = read_array(os.path.join(directory, "A.f64"))
    response = read_vector(os.path.join(directory, "response.f64"))
    planted = read_vector(os.path.join(directory, "planted_x.f64"))
    if a.shape != (m, n) or response.shape != (m,) or planted.shape != (n,):
        raise CorruptFile(f"array shapes {a.shape}, {response.shape}, {planted.shape} do not match m={m}, n={n}")
    try:
        structure = GroupStructure.from_lists(groups, n)
    except ValueError as e:
        raise CorruptFile(f"meta.json has an invalid group list: {e}")
    if meta.get("model") == "logistic" and not np.all(np.abs(response) == 1):
        raise CorruptFile("logistic responses must all be -1 or +1")
    logger.info(f"Loaded {meta.get('model')} dataset {m}x{n} from {directory}")
    return Dataset(a, response, structure, planted, meta)
