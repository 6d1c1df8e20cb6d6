"""Problem files: a TOML document describing driver, coefficients, barriers
and solver settings.

Sections::

    [driver]              # keys mirror DriverSpec; all optional
    horizon = 1.0
    step = 0.01
    volatility = 1.0
    poisson_rate = 2.0
    poisson_kind = "binary"     # fixed | uniform | binary
    poisson_scale = 0.5
    mg_times = [0.25, 0.75]
    mg_scale = 0.3
    drift_slope = 0.1
    vr_jumps = [[0.5, -0.2]]    # (time, size) pairs
    vg_jumps = [[0.6, 0.1]]

    [coefficients.sigma]  # and [coefficients.b]; default: constant 0
    kind = "affine"             # constant | affine | table
    value = 1.0                 # constant
    intercept = 0.5             # affine
    slope = 0.25
    x = [-1.0, 0.0, 1.0]        # table nodes
    y = [0.2, 0.5, 0.2]
    lipschitz = 0.3             # required for table
    time_factor = "factor.csv"  # optional CSV path, relative to the config

    [barriers]            # floats for flat barriers, or CSV paths
    lower = 0.0
    upper = 2.0

    [solver]
    x0 = 1.0                    # required
    m = 1.0
    picard_tol = 1e-9
    max_iters = 100
    seed = 0

Unknown sections or keys raise ConfigError — a typo should never silently
fall back to a default.  The config digest is a SHA-256 over the parsed
document in canonical JSON form, so formatting and key order do not matter
but every value does.
"""

from __future__ import annotations

import hashlib
import json
import os

try:
    import tomllib as _toml
except ImportError:  # Python < 3.11
    import tomli as _toml

from .errors import ConfigError
from .regulated import RegulatedPath, read_path_csv
from .sde import CoefficientSpec, SdeProblem
from .semimartingale import DriverSpec, JumpLaw, simulate_driver
from .skorokhod_two import BarrierPair

_DRIVER_KEYS = frozenset({
    "horizon", "step", "volatility", "poisson_rate", "poisson_kind",
    "poisson_scale", "mg_times", "mg_scale", "drift_slope", "vr_jumps",
    "vg_jumps",
})
_COEFF_KEYS = frozenset({
    "kind", "value", "intercept", "slope", "x", "y", "lipschitz",
    "time_factor",
})
_BARRIER_KEYS = frozenset({"lower", "upper"})
_SOLVER_KEYS = frozenset({"x0", "m", "picard_tol", "max_iters", "seed"})
_SECTIONS = frozenset({"driver", "coefficients", "barriers", "solver"})


def load_config(source, require_problem: bool = True) -> dict:
    """Parse a TOML problem file (path or binary file object) and validate
    its section/key structure.

    With ``require_problem=False`` only the structure is checked — barriers
    and ``x0`` may be absent.  Driver-only emission needs nothing else.

    Raises:
        ConfigError: unparseable TOML, unknown section or key, or a section
            of the wrong shape.
    """
    if hasattr(source, "read"):
        data = source.read()
        name = "<stream>"
    else:
        name = str(source)
        if not os.path.exists(source):
            raise ConfigError(f"no such config file: {name}")
        with open(source, "rb") as fh:
            data = fh.read()
    try:
        doc = _toml.loads(data.decode("utf-8"))
    except (_toml.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{name}: not valid TOML: {exc}") from exc

    unknown = set(doc) - _SECTIONS
    if unknown:
        raise ConfigError(f"{name}: unknown section(s): {sorted(unknown)}")
    _check_keys(name, "[driver]", doc.get("driver", {}), _DRIVER_KEYS)
    coeffs = doc.get("coefficients", {})
    if not isinstance(coeffs, dict):
        raise ConfigError(f"{name}: [coefficients] must be a table")
    bad = set(coeffs) - {"sigma", "b"}
    if bad:
        raise ConfigError(
            f"{name}: [coefficients] allows only 'sigma' and 'b', got {sorted(bad)}")
    for sub in ("sigma", "b"):
        _check_keys(name, f"[coefficients.{sub}]", coeffs.get(sub, {}), _COEFF_KEYS)
    _check_keys(name, "[barriers]", doc.get("barriers", {}), _BARRIER_KEYS)
    _check_keys(name, "[solver]", doc.get("solver", {}), _SOLVER_KEYS)

    if require_problem:
        if "barriers" not in doc:
            raise ConfigError(f"{name}: missing required section [barriers]")
        for key in ("lower", "upper"):
            if key not in doc["barriers"]:
                raise ConfigError(f"{name}: [barriers] is missing '{key}'")
        if "x0" not in doc.get("solver", {}):
            raise ConfigError(f"{name}: [solver] must set 'x0'")
    return doc


def _check_keys(name, label, section, allowed):
    if not isinstance(section, dict):
        raise ConfigError(f"{name}: {label} must be a table")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{name}: {label} has unknown key(s): {sorted(unknown)}")


def config_digest(doc: dict) -> str:
    """SHA-256 hex digest of the parsed config in canonical JSON form."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def build_driver_spec(doc: dict) -> DriverSpec:
    sec = dict(doc.get("driver", {}))
    law = JumpLaw(kind=sec.pop("poisson_kind", "binary"),
                  scale=float(sec.pop("poisson_scale", 1.0)))
    kwargs = {}
    for key in ("horizon", "step", "volatility", "poisson_rate", "mg_scale",
                "drift_slope"):
        if key in sec:
            kwargs[key] = float(sec.pop(key))
    if "mg_times" in sec:
        kwargs["mg_times"] = tuple(float(t) for t in sec.pop("mg_times"))
    for key in ("vr_jumps", "vg_jumps"):
        if key in sec:
            kwargs[key] = tuple(
                (float(t), float(z)) for t, z in sec.pop(key))
    return DriverSpec(poisson_law=law, **kwargs)


def _build_coefficient(section: dict, config_dir: str, label: str) -> CoefficientSpec:
    if not section:
        return CoefficientSpec.constant(0.0)
    sec = dict(section)
    factor = None
    if "time_factor" in sec:
        factor = _load_path_ref(sec.pop("time_factor"), config_dir, label)
    kind = sec.pop("kind", None)
    if kind == "constant":
        _require_only(sec, {"value"}, label)
        return CoefficientSpec.constant(float(sec.get("value", 0.0)),
                                        time_factor=factor)
    if kind == "affine":
        _require_only(sec, {"intercept", "slope"}, label)
        return CoefficientSpec.affine(float(sec.get("intercept", 0.0)),
                                      float(sec.get("slope", 0.0)),
                                      time_factor=factor)
    if kind == "table":
        _require_only(sec, {"x", "y", "lipschitz"}, label)
        if "lipschitz" not in sec:
            raise ConfigError(f"{label}: table coefficients need 'lipschitz'")
        return CoefficientSpec.table(sec.get("x", ()), sec.get("y", ()),
                                     lipschitz_constant=float(sec["lipschitz"]),
                                     time_factor=factor)
    raise ConfigError(f"{label}: 'kind' must be constant, affine or table, "
                      f"got {kind!r}")


def _require_only(sec, allowed, label):
    extra = set(sec) - allowed
    if extra:
        raise ConfigError(
            f"{label}: key(s) {sorted(extra)} do not apply to this kind")


def _load_path_ref(ref, config_dir: str, label: str) -> RegulatedPath:
    if not isinstance(ref, str):
        raise ConfigError(f"{label}: expected a CSV path string, got {ref!r}")
    full = ref if os.path.isabs(ref) else os.path.join(config_dir, ref)
    return read_path_csv(full)


def _build_barrier(value, horizon: float, config_dir: str, label: str):
    if isinstance(value, str):
        return _load_path_ref(value, config_dir, label)
    return RegulatedPath.constant([0.0, horizon], float(value))


def build_problem(doc: dict, config_dir: str = ".", seed: int | None = None):
    """Assemble an SdeProblem from a parsed config.

    ``seed`` overrides ``[solver] seed`` (default 0) for the driver draw.
    Returns ``(problem, seed_used)``.
    """
    spec = build_driver_spec(doc)
    solver = doc.get("solver", {})
    if seed is None:
        seed = int(solver.get("seed", 0))
    driver = simulate_driver(spec, seed)

    coeffs = doc.get("coefficients", {})
    sigma = _build_coefficient(coeffs.get("sigma", {}), config_dir,
                               "[coefficients.sigma]")
    b = _build_coefficient(coeffs.get("b", {}), config_dir, "[coefficients.b]")

    bars = doc["barriers"]
    lower = _build_barrier(bars["lower"], spec.horizon, config_dir,
                           "[barriers] lower")
    upper = _build_barrier(bars["upper"], spec.horizon, config_dir,
                           "[barriers] upper")

    prob = SdeProblem(
        x0=float(solver["x0"]),
        sigma=sigma,
        b=b,
        driver=driver,
        barriers=BarrierPair(lower, upper),
        m=float(solver.get("m", 1.0)),
        picard_tol=float(solver.get("picard_tol", 1e-9)),
        max_iters=int(solver.get("max_iters", 100)),
        driver_spec=spec,
    )
    return prob, seed
