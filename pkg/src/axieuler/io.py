"""
Snapshot persistence, versioned CSV emission, run manifests, and the run
configuration schema.

Snapshot binary layout (all integers and floats little-endian):

    bytes 0..3    magic "AXEU"
    uint32        format version (currently 1)
    uint32 x2     nr, nz
    float64 x3    r_max, z_min, z_max
    float64       time t
    float64 arrays Gamma, chi, u_r, u_theta, u_z, each nr*nz values in
                  row-major order with r varying fastest
    uint32        CRC-32 of everything before the trailer

CSV files are comma-delimited with '.' decimals, LF line endings, a
header row, and a leading schema line

    # axieuler-csv schema=<name> version=<int>

checked by every consumer (including the standalone figure tool).
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import AxiEulerError, AxiField, AxiGrid, EVEN, make_grid
from .euler import FlowState, SolverConfig

MAGIC = b"AXEU"
SNAPSHOT_VERSION = 1
CSV_VERSION = 1

CSV_SCHEMAS = {
    "diagnostics": ["t", "kinetic_energy", "gamma_inf", "gamma_l2",
                    "omega_inf"],
    "growth_beta": ["t", "beta", "beta_running", "argmax_r", "argmax_z",
                    "n_reflected"],
    "growth_lambda": ["t", "lambda"],
    "growth_member": ["t", "ratio", "norm"],
    "trajectory": ["t", "r", "z", "xi_r", "xi_z", "b_r", "b_theta", "b_z",
                   "bdotxi_rel", "rb_theta_drift", "xi_lower_slack"],
    "criterion_ledger": ["t", "bkm_integrand", "gen_integrand_r",
                         "gen_integrand_z", "running_integral", "verdict"],
    "beta_lambda": ["t", "beta", "lambda", "margin"],
    "scaling": ["t", "lambda_p", "Lambda_p", "profile_inf_norm", "threshold",
                "verdict"],
}


class FormatError(AxiEulerError):
    """Corrupt or mismatched file format."""


class ConfigError(AxiEulerError):
    """Invalid run configuration."""


# ---------------------------------------------------------------------------
# Snapshot binary format.
# ---------------------------------------------------------------------------

def write_snapshot(path, state: FlowState) -> None:
    g = state.grid
    head = MAGIC + struct.pack("<IIIdddd", SNAPSHOT_VERSION, g.nr, g.nz,
                               g.r_max, g.z_min, g.z_max, state.t)
    arrays = (state.gamma.values, state.chi.values, state.u.ur.values,
              state.u.utheta.values, state.u.uz.values)
    body = b"".join(np.ascontiguousarray(a.T, dtype="<f8").tobytes()
                    for a in arrays)
    blob = head + body
    crc = zlib.crc32(blob) & 0xFFFFFFFF
    Path(path).write_bytes(blob + struct.pack("<I", crc))


def read_snapshot(path) -> FlowState:
    raw = Path(path).read_bytes()
    if len(raw) < 48 or raw[:4] != MAGIC:
        raise FormatError(f"{path}: not a snapshot file (bad magic)")
    (crc_stored,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != crc_stored:
        raise FormatError(f"{path}: checksum mismatch")
    version, nr, nz = struct.unpack("<III", raw[4:16])
    if version != SNAPSHOT_VERSION:
        raise FormatError(f"{path}: snapshot version {version}, "
                          f"expected {SNAPSHOT_VERSION}")
    r_max, z_min, z_max, t = struct.unpack("<dddd", raw[16:48])
    n = nr * nz
    expected = 48 + 5 * 8 * n + 4
    if len(raw) != expected:
        raise FormatError(f"{path}: size {len(raw)} does not match header "
                          f"(expected {expected})")
    grid = make_grid(r_max, z_min, z_max, nr, nz)
    arrays = []
    off = 48
    for _ in range(5):
        a = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
        arrays.append(a.reshape(nz, nr).T.copy())
        off += 8 * n
    gamma = AxiField(grid, arrays[0], parity=EVEN)
    chi = AxiField(grid, arrays[1], parity=EVEN)
    from .fields import AxiVectorField
    u = AxiVectorField.from_arrays(grid, arrays[2], arrays[3], arrays[4])
    from .euler import recover_velocity
    _, psi = recover_velocity(chi, gamma, grid)
    return FlowState(t, gamma, chi, u, psi)


def load_snapshot_dir(directory) -> list[FlowState]:
    paths = sorted(Path(directory).glob("snapshot_*.axeu"))
    if not paths:
        raise FormatError(f"no snapshots found in {directory}")
    return [read_snapshot(p) for p in paths]


# ---------------------------------------------------------------------------
# CSV with schema headers.
# ---------------------------------------------------------------------------

def format_float(x) -> str:
    return f"{x:.17g}"


def write_csv(path, schema: str, rows) -> None:
    cols = CSV_SCHEMAS[schema]
    lines = [f"# axieuler-csv schema={schema} version={CSV_VERSION}",
             ",".join(cols)]
    for row in rows:
        cells = []
        for c in row:
            cells.append(c if isinstance(c, str) else format_float(c))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_csv(path, expect_schema: str | None = None):
    """(schema, version, columns, rows-of-strings) with validation."""
    text = Path(path).read_text()
    lines = [ln for ln in text.split("\n") if ln != ""]
    if not lines or not lines[0].startswith("# axieuler-csv"):
        raise FormatError(f"{path}: missing schema line")
    fields = dict(part.split("=") for part in lines[0].split()[2:])
    schema = fields.get("schema", "")
    version = int(fields.get("version", "0"))
    if version != CSV_VERSION:
        raise FormatError(
            f"{path}: csv schema version {version}, expected {CSV_VERSION}")
    if expect_schema is not None and schema != expect_schema:
        raise FormatError(
            f"{path}: schema {schema!r}, expected {expect_schema!r}")
    cols = lines[1].split(",")
    if schema in CSV_SCHEMAS and cols != CSV_SCHEMAS[schema]:
        raise FormatError(f"{path}: column mismatch for schema {schema!r}")
    rows = [ln.split(",") for ln in lines[2:]]
    return schema, version, cols, rows


def read_csv_numeric(path, expect_schema=None):
    """(columns, float array of shape (nrows, ncols)); non-numeric cells
    become NaN."""
    _, _, cols, rows = read_csv(path, expect_schema)

    def conv(cell):
        try:
            return float(cell)
        except ValueError:
            return np.nan

    data = np.array([[conv(c) for c in row] for row in rows], dtype=float)
    return cols, data


# ---------------------------------------------------------------------------
# Manifest.
# ---------------------------------------------------------------------------

def content_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(run_dir, config_dict: dict) -> None:
    run_dir = Path(run_dir)
    outputs = {}
    for p in sorted(run_dir.iterdir()):
        if p.name == "manifest.json" or p.is_dir():
            continue
        outputs[p.name] = content_hash(p)
    manifest = {
        "format_versions": {"snapshot": SNAPSHOT_VERSION, "csv": CSV_VERSION},
        "config": config_dict,
        "config_sha256": hashlib.sha256(
            json.dumps(config_dict, sort_keys=True).encode()).hexdigest(),
        "outputs": outputs,
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Run configuration.
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    grid: AxiGrid
    flow_name: str
    flow_params: dict
    solver: SolverConfig
    t_final: float
    dt: float | None
    snapshot_stride: int
    out_dir: str | None
    diagnostics: dict
    ensemble: dict
    wkb: dict
    scaling: dict
    raw: dict

    @property
    def sigma_list(self):
        return self.diagnostics.get("sigma", [0.0])

    @property
    def p_list(self):
        return self.diagnostics.get("p", [2.0])


_DEFAULT_ENSEMBLE = {"n_x": 64, "n_xi": 4, "r_min_seed": 0.1, "dt": 1e-3,
                     "record_every": 10}
_DEFAULT_WKB = {"eps": [0.1, 0.05, 0.025], "delta": None}


def _require(cond, where, msg):
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def load_config(path) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Validation failures name the file and the JSON path of the offending
    entry; parameter constraints mirror the criterion and norm
    specifications so bad runs fail at load time.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e

    def where(key):
        return f"{path}: {key}"

    gd = raw.get("grid", {})
    for k in ("r_max", "z_min", "z_max", "nr", "nz"):
        _require(k in gd, where(f"grid.{k}"), "missing")
    try:
        grid = make_grid(gd["r_max"], gd["z_min"], gd["z_max"], gd["nr"],
                         gd["nz"])
    except ValueError as e:
        raise ConfigError(f"{where('grid')}: {e}") from e

    fl = raw.get("flow", {})
    _require("name" in fl, where("flow.name"), "missing")
    flow_params = fl.get("params", {})

    sv = raw.get("solver", {})
    try:
        solver = SolverConfig(
            cfl=sv.get("cfl", 0.4),
            time_integrator=sv.get("time_integrator", "rk4"),
            advection_scheme=sv.get("advection_scheme", "centered2"),
            hyperviscosity=sv.get("hyperviscosity", 0.0))
    except ValueError as e:
        raise ConfigError(f"{where('solver')}: {e}") from e

    t_final = raw.get("t_final", 1.0)
    _require(t_final > 0, where("t_final"), "must be positive")
    dt = raw.get("dt")
    if dt is not None:
        _require(dt > 0, where("dt"), "must be positive")
    stride = raw.get("snapshot_stride", 10)
    _require(isinstance(stride, int) and stride >= 1,
             where("snapshot_stride"), "must be a positive integer")

    diag = raw.get("diagnostics", {})
    for pv in diag.get("p", []):
        _require(pv >= 1, where("diagnostics.p"), f"p={pv} below 1")
    for sval in diag.get("sigma", []):
        for pv in diag.get("p", [2.0]):
            lo, hi = -2.0 * (1 - 1.0 / pv), 2.0 / pv
            _require(lo < sval < hi, where("diagnostics.sigma"),
                     f"sigma={sval} outside (-2/p', 2/p) = ({lo}, {hi}) "
                     f"for p={pv}")
    ab = diag.get("criterion", None)
    if ab is not None:
        from .criteria import CriterionParams
        try:
            CriterionParams(a=ab.get("a", 0.5), b=ab.get("b", 0.5),
                            s=ab.get("s", 4.0), q=ab.get("q"))
        except ValueError as e:
            raise ConfigError(f"{where('diagnostics.criterion')}: {e}") from e

    ensemble = {**_DEFAULT_ENSEMBLE, **raw.get("ensemble", {})}
    _require(ensemble["n_x"] >= 1 and ensemble["n_xi"] >= 1,
             where("ensemble"), "ensemble must be non-empty")
    wkb = {**_DEFAULT_WKB, **raw.get("wkb", {})}
    for e in wkb["eps"]:
        _require(e > 0, where("wkb.eps"), "eps values must be positive")
    scaling = raw.get("scaling", {})
    if scaling:
        _require(scaling.get("beta", 1.0) > 0, where("scaling.beta"),
                 "beta must be positive")

    return RunConfig(grid=grid, flow_name=fl["name"], flow_params=flow_params,
                     solver=solver, t_final=t_final, dt=dt,
                     snapshot_stride=stride, out_dir=raw.get("out_dir"),
                     diagnostics=diag, ensemble=ensemble, wkb=wkb,
                     scaling=scaling, raw=raw)
