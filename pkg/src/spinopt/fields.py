"""Rabi-frequency maps of a circular loop antenna on a 2-D evaluation plane.

The analytic model discretizes the loop into straight segments (the feed gap
arc is omitted) and sums Biot-Savart contributions at each grid point.  The
Rabi frequency is proportional to the component of the quasi-static field
perpendicular to the NV quantization axis.  Maps can also be imported from an
externally simulated field via a plain CSV grid format.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import EmptyRegionError, FieldFormatError, SpinoptError

MU0 = 4e-7 * np.pi  # vacuum permeability, T*m/A


@dataclass(frozen=True)
class GridSpec:
    """Uniform 2-D grid with physical extent in mm."""

    width_mm: float = 5.0
    height_mm: float = 5.0
    nx: int = 500
    ny: int = 500

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs nx >= 2 and ny >= 2")
        if self.width_mm <= 0 or self.height_mm <= 0:
            raise ValueError("grid extent must be positive")

    def x_mm(self):
        """Pixel x coordinates, increasing left to right."""
        return np.linspace(-self.width_mm / 2, self.width_mm / 2, self.nx)

    def y_mm(self):
        """Pixel y coordinates; row 0 is the +y edge (image convention)."""
        return np.linspace(self.height_mm / 2, -self.height_mm / 2, self.ny)

    @property
    def center_index(self):
        """(row, col) of the pixel taken as the grid center."""
        return self.ny // 2, self.nx // 2

    def radius_mm(self):
        """Distance of every pixel from the grid center, shape (ny, nx)."""
        X, Y = np.meshgrid(self.x_mm(), self.y_mm())
        return np.hypot(X, Y)


@dataclass(frozen=True)
class ScalarField2D:
    """Real scalar quantity sampled on a GridSpec; row 0 is the +y edge."""

    grid: GridSpec
    values: np.ndarray
    unit: str = ""
    allow_inf: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.ny, self.grid.nx):
            raise ValueError(
                f"values shape {v.shape} does not match grid ({self.grid.ny}, {self.grid.nx})"
            )
        if self.allow_inf:
            if np.isnan(v).any():
                raise ValueError("field contains NaN")
        elif not np.isfinite(v).all():
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def center_value(self):
        iy, ix = self.grid.center_index
        return float(self.values[iy, ix])

    def with_values(self, values, unit=None, allow_inf=None):
        return ScalarField2D(
            self.grid,
            values,
            self.unit if unit is None else unit,
            self.allow_inf if allow_inf is None else allow_inf,
        )


@dataclass(frozen=True)
class AntennaSpec:
    """Circular loop antenna geometry and drive, lengths in mm.

    ``gap_azimuth_rad`` places the feed gap on the loop; the default 45 deg
    aligns it with the in-plane projection of the default quantization axis,
    which is where the analytic map best matches the reference field maps.
    ``evaluation_height_mm`` is the NV plane offset above the antenna plane.
    """

    loop_radius_mm: float = 0.8
    trace_width_mm: float = 0.127
    feed_gap_mm: float = 0.2
    drive_current: float = 1.0
    evaluation_height_mm: float = 0.1125
    gap_azimuth_rad: float = np.pi / 4

    def __post_init__(self):
        if self.loop_radius_mm <= 0:
            raise ValueError("loop radius must be positive")
        if self.trace_width_mm < 0:
            raise ValueError("trace width must be non-negative")
        circumference = 2 * np.pi * self.loop_radius_mm
        if not 0 <= self.feed_gap_mm < circumference:
            raise ValueError("feed gap must be in [0, loop circumference)")
        if self.evaluation_height_mm < 0:
            raise ValueError("evaluation height must be non-negative")


@dataclass(frozen=True)
class NVFrame:
    """NV quantization axis as a unit 3-vector in the antenna frame."""

    quantization_axis: tuple = dc_field(
        default=(1 / np.sqrt(3), 1 / np.sqrt(3), 1 / np.sqrt(3))
    )

    def __post_init__(self):
        axis = np.asarray(self.quantization_axis, dtype=float)
        if axis.shape != (3,):
            raise ValueError("quantization axis must be a 3-vector")
        norm = np.linalg.norm(axis)
        if not np.isclose(norm, 1.0, atol=1e-9):
            raise ValueError("quantization axis must be a unit vector")
        object.__setattr__(self, "quantization_axis", tuple(axis))

    @property
    def axis(self):
        return np.asarray(self.quantization_axis)


def loop_segments(spec: AntennaSpec, n_segments: int = 360):
    """Segment midpoints and direction elements of the gapped loop, in meters.

    Returns (midpoints (n,3), dl (n,3)).  The loop lies in the z=0 plane,
    centered on the origin; the feed-gap arc is skipped.
    """
    a = spec.loop_radius_mm * 1e-3
    gap_angle = (spec.feed_gap_mm * 1e-3) / a
    theta = np.linspace(gap_angle / 2, 2 * np.pi - gap_angle / 2, n_segments + 1)
    theta = theta + spec.gap_azimuth_rad
    nodes = np.stack(
        [a * np.cos(theta), a * np.sin(theta), np.zeros_like(theta)], axis=1
    )
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    dl = nodes[1:] - nodes[:-1]
    return mid, dl


def loop_b_field(spec: AntennaSpec, points_m, n_segments: int = 360):
    """Quasi-static B field (T) of the loop at the given points (M,3), meters.

    Midpoint-rule Biot-Savart over straight segments.  The source-field
    distance is clamped at half the trace width so points on the wire stay
    finite.
    """
    pts = np.atleast_2d(np.asarray(points_m, dtype=float))
    mid, dl = loop_segments(spec, n_segments)
    r_min = max(spec.trace_width_mm * 1e-3 / 2, 1e-12)
    B = np.zeros((pts.shape[0], 3))
    for k in range(len(mid)):
        r = pts - mid[k]
        d = np.maximum(np.sqrt(np.einsum("ij,ij->i", r, r)), r_min)
        B += np.cross(dl[k], r) / d[:, None] ** 3
    return MU0 * spec.drive_current / (4 * np.pi) * B


def biot_savart_rabi_map(
    spec: AntennaSpec,
    grid: GridSpec,
    frame: NVFrame = NVFrame(),
    n_segments: int = 360,
    normalize: bool = True,
) -> ScalarField2D:
    """Rabi-frequency map of the loop antenna on the evaluation plane.

    Omega(x) is proportional to |B_perp(x)|, the field component perpendicular
    to the quantization axis.  With ``normalize`` the map is scaled so the
    center pixel equals ``spec.drive_current``; otherwise raw |B_perp| in
    Tesla is returned.
    """
    x = grid.x_mm() * 1e-3
    y = grid.y_mm() * 1e-3
    X, Y = np.meshgrid(x, y)
    z = spec.evaluation_height_mm * 1e-3
    pts = np.stack([X.ravel(), Y.ravel(), np.full(X.size, z)], axis=1)
    B = loop_b_field(spec, pts, n_segments)
    axis = frame.axis
    B_par = B @ axis
    B_perp = B - B_par[:, None] * axis[None, :]
    omega = np.sqrt(np.einsum("ij,ij->i", B_perp, B_perp)).reshape(grid.ny, grid.nx)
    if normalize:
        iy, ix = grid.center_index
        center = omega[iy, ix]
        if center <= 0:
            raise SpinoptError("center pixel field vanishes; cannot normalize")
        omega = omega * (spec.drive_current / center)
        unit = "relative"
    else:
        unit = "T"
    return ScalarField2D(grid, omega, unit=unit)


# --- CSV grid I/O -----------------------------------------------------------

def export_field_map(field: ScalarField2D, path) -> None:
    """Write a field in the CSV grid format (header line, then ny rows)."""
    g = field.grid
    header = (
        f"# grid nx={g.nx} ny={g.ny} width_mm={g.width_mm!r} "
        f"height_mm={g.height_mm!r} unit={field.unit}"
    )
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in field.values:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def _parse_header(line: str):
    if not line.startswith("# grid "):
        raise FieldFormatError("missing '# grid' header line")
    fields = {}
    for token in line[len("# grid "):].split():
        if "=" not in token:
            raise FieldFormatError(f"malformed header token {token!r}")
        key, val = token.split("=", 1)
        fields[key] = val
    try:
        nx = int(fields["nx"])
        ny = int(fields["ny"])
        width = float(fields["width_mm"])
        height = float(fields["height_mm"])
    except (KeyError, ValueError) as exc:
        raise FieldFormatError(f"bad header: {exc}") from exc
    return GridSpec(width, height, nx, ny), fields.get("unit", "")


def import_field_map(path) -> ScalarField2D:
    """Read a CSV grid file; errors name the offending row and column."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        grid, unit = _parse_header(header)
        values = np.empty((grid.ny, grid.nx))
        for iy in range(grid.ny):
            line = fh.readline()
            if not line:
                raise FieldFormatError(f"unexpected end of file at data row {iy}")
            parts = line.rstrip("\n").split(",")
            if len(parts) != grid.nx:
                raise FieldFormatError(
                    f"row {iy} has {len(parts)} columns, expected {grid.nx}"
                )
            for ix, token in enumerate(parts):
                try:
                    v = float(token)
                except ValueError as exc:
                    raise FieldFormatError(
                        f"row {iy}, column {ix}: cannot parse {token!r}"
                    ) from exc
                if not np.isfinite(v):
                    raise FieldFormatError(
                        f"row {iy}, column {ix}: non-finite value {token!r}"
                    )
                values[iy, ix] = v
        extra = fh.readline()
        if extra.strip():
            raise FieldFormatError("trailing data after last expected row")
    return ScalarField2D(grid, values, unit=unit)


# --- deviation and uniformity ------------------------------------------------

def normalized_deviation(field: ScalarField2D, omega0: float) -> ScalarField2D:
    """Pointwise (Omega - Omega0)/Omega0."""
    if omega0 <= 0:
        raise SpinoptError("reference Rabi frequency must be positive")
    return field.with_values((field.values - omega0) / omega0, unit="relative")


def region_uniformity(field: ScalarField2D, mask, omega0: float) -> float:
    """1 - mean(|Omega - Omega0|)/Omega0 over the masked pixels."""
    if omega0 <= 0:
        raise SpinoptError("reference Rabi frequency must be positive")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != field.values.shape:
        raise ValueError("mask shape does not match field")
    if not mask.any():
        raise EmptyRegionError("uniformity of an empty region is undefined")
    return 1.0 - float(np.mean(np.abs(field.values[mask] - omega0))) / omega0


def uniformity_region(
    field: ScalarField2D,
    omega0: float,
    target: float,
    shape: str = "contour",
):
    """Largest region around Omega0 whose uniformity meets ``target``.

    shape="contour" grows the deviation level set {|Omega-Omega0| <= t*Omega0}
    until its uniformity drops to the target; this matches the closed
    iso-deviation contours used for the baseline regions.  shape="disk"
    instead grows a disk centered on the grid center (clipped to the largest
    inscribed disk).  Returns a boolean mask.
    """
    if not 0 < target <= 1:
        raise ValueError("target uniformity must be in (0, 1]")
    if omega0 <= 0:
        raise SpinoptError("reference Rabi frequency must be positive")
    dev = np.abs(field.values - omega0) / omega0
    if shape == "contour":
        return _contour_region(dev, target)
    if shape == "disk":
        return _disk_region(field.grid, dev, target)
    raise ValueError(f"unknown region shape {shape!r}")


def _contour_region(dev, target):
    if 1.0 - float(dev.min()) < target:
        # even the most uniform pixel misses the target
        raise EmptyRegionError("no pixel satisfies the uniformity target")
    lo, hi = 0.0, float(dev.max()) + 1.0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        sel = dev <= mid
        if sel.any() and 1.0 - dev[sel].mean() >= target:
            lo = mid
        else:
            hi = mid
    mask = dev <= lo
    if not mask.any():
        raise EmptyRegionError("no pixel satisfies the uniformity target")
    return mask


def _disk_region(grid, dev, target):
    r = grid.radius_mm()
    r_max = min(grid.width_mm, grid.height_mm) / 2
    inside = r <= r_max
    order = np.argsort(r[inside], kind="stable")
    r_sorted = r[inside][order]
    dev_sorted = dev[inside][order]
    prefix_mean = np.cumsum(dev_sorted) / np.arange(1, dev_sorted.size + 1)
    unif = 1.0 - prefix_mean
    # group ties in radius: a disk boundary includes all pixels at equal distance
    boundary = np.nonzero(np.diff(r_sorted) > 0)[0]
    last_of_radius = np.append(boundary, dev_sorted.size - 1)
    ok = last_of_radius[unif[last_of_radius] >= target]
    if ok.size == 0:
        raise EmptyRegionError("no disk satisfies the uniformity target")
    radius = r_sorted[ok[-1]]
    return r <= radius
