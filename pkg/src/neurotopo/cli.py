"""Batch command line for every pipeline and for the topology core.

Outputs are byte-reproducible: fixed JSON key order, fixed CSV layouts, no
timestamps. Defaults follow the standard analysis protocol (nucleus size
gates 40/200 px, axis criterion 2, 25 px search tiles, 15 px minimum path,
2 px jump tolerance). A TOML config file can pre-set any flag; explicit
flags win over the config.

Exit codes: 0 success, 2 unreadable or inconsistent inputs, 3 bad
parameters. Errors print to stderr as "ERROR <code>: <message>".
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .images import BinaryImage, DimensionMismatch, GrayImage, ImageStack, band_threshold
from .homology import betti_mod2, homology_integral
from .cubical import build_complex
from .dvf import reduced_betti
from .persistence import build_filtration, persistent_homology, zigzag_h0
from .pipelines import (
    LocateParams,
    NucleusParams,
    RoiPolyline,
    count_nuclei,
    count_synapses,
    default_levels,
    extract_structure,
    locate_neurons,
)
from .pnm import ImageFormatError, load_image, save_mask


class InputError(Exception):
    """Unreadable, malformed or mutually inconsistent inputs (exit 2)."""


class ParamError(Exception):
    """Invalid parameter values (exit 3)."""


def _fail(code: str, message: str, exit_code: int) -> None:
    click.echo(f"ERROR {code}: {message}", err=True)
    sys.exit(exit_code)


def _run_guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ImageFormatError, FileNotFoundError, IsADirectoryError, DimensionMismatch, InputError) as exc:
        _fail("INPUT", str(exc), 2)
    except (ParamError, ValueError) as exc:
        _fail("PARAM", str(exc), 3)


def _load_png(path: Path, channel: str = None) -> GrayImage:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("RGB", "RGBA"):
            if channel in ("red", "green", "blue"):
                arr = np.asarray(im)[:, :, {"red": 0, "green": 1, "blue": 2}[channel]]
            else:
                arr = np.asarray(im.convert("L"))
        elif im.mode in ("I", "I;16", "I;16B"):
            # 16-bit input: linear rescale v -> round(v * 255 / 65535)
            wide = np.asarray(im, dtype=np.uint32)
            arr = ((wide * 255 + 32767) // 65535).astype(np.uint8)
        else:
            arr = np.asarray(im.convert("L"))
    return GrayImage(arr)


def _load_channel(path: str, channel: str = None, calibration: float = None) -> GrayImage:
    """Load one grayscale channel from PGM, PAM or (CLI boundary only) PNG."""
    p = Path(path)
    if not p.exists():
        raise InputError(f"no such file: {path}")
    if p.suffix.lower() == ".png":
        img = _load_png(p, channel)
        return GrayImage(img.pixels, calibration) if calibration else img
    loaded = load_image(p, calibration)
    if isinstance(loaded, GrayImage):
        return loaded
    if channel and channel in loaded:
        return loaded[channel]
    raise InputError(f"{path} is multi-channel; expected a {channel or 'grayscale'} image")


def _parse_range(text: str) -> tuple:
    try:
        lo_s, hi_s = text.split(":")
        lo, hi = int(lo_s), int(hi_s)
    except Exception:
        raise ParamError(f"range must look like LO:HI, got {text!r}") from None
    if not (0 <= lo <= hi <= 255):
        raise ParamError(f"range bounds must satisfy 0 <= lo <= hi <= 255, got {text}")
    return lo, hi


def _parse_levels(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ParamError(f"levels must be a comma-separated number list, got {text!r}") from None


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _load_mask(path: str, threshold: int) -> BinaryImage:
    return band_threshold(_load_channel(path), threshold, 255)


def _config_defaults(config_path: str) -> dict:
    try:
        with open(config_path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such config file: {config_path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"malformed config {config_path}: {exc}") from None
    if not all(isinstance(v, dict) for v in data.values()):
        raise InputError(f"malformed config {config_path}: expected one table per subcommand")
    return data


@click.group()
@click.option("--config", "config_path", type=str, default=None, help="TOML file with per-subcommand defaults; explicit flags win.")
@click.pass_context
def main(ctx, config_path):
    """Topological analysis of fluorescence microscopy images."""
    if config_path:
        ctx.default_map = _run_guarded(_config_defaults, config_path)


@main.command()
@click.option("--in", "in_path", required=True, help="Mask image (PGM/PAM/PNG).")
@click.option("--threshold", default=128, show_default=True, help="Foreground = intensity at or above this value.")
@click.option("--method", type=click.Choice(["mod2", "integral", "reduced"]), default="mod2", show_default=True, help="mod2: Gaussian elimination over Z/2; integral: Smith normal form; reduced: vector-field reduction first (fastest at scale).")
def homology(in_path, threshold, method):
    """Betti numbers b0 (components) and b1 (holes) of a binarized image."""

    def run():
        mask = _load_mask(in_path, threshold)
        if method == "reduced":
            b0, b1 = reduced_betti(mask)
        elif method == "integral":
            res = homology_integral(build_complex(mask))
            b0, b1 = res.betti0, res.betti1
        else:
            b0, b1 = betti_mod2(build_complex(mask))
        click.echo(f"b0={b0} b1={b1}")

    _run_guarded(run)


@main.command()
@click.option("--red", "red_path", required=True, help="Red marker channel (PGM/PAM/PNG).")
@click.option("--green", "green_path", required=True, help="Green marker channel.")
@click.option("--roi", "roi_path", required=True, help="Dendrite ROI polyline, JSON {vertices, band_width}.")
@click.option("--red-range", default="50:255", show_default=True, help="Intensity band LO:HI counted as red signal.")
@click.option("--green-range", default="50:255", show_default=True, help="Intensity band LO:HI counted as green signal.")
@click.option("--calib", type=float, required=True, help="Microns per pixel (e.g. 0.22266 for a 228 um frame at 1024 px).")
@click.option("--out", "out_prefix", default="synapses", show_default=True, help="Prefix for report files.")
def synapses(red_path, green_path, roi_path, red_range, green_range, calib, out_prefix):
    """Count synapses: coincident red/green signal inside the dendrite band."""

    def run():
        red = _load_channel(red_path, "red", calib)
        green = _load_channel(green_path, "green", calib)
        try:
            roi = RoiPolyline.from_json(Path(roi_path).read_text())
        except FileNotFoundError:
            raise InputError(f"no such ROI file: {roi_path}") from None
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"malformed ROI file {roi_path}: {exc}") from None
        if calib <= 0:
            raise ParamError("--calib must be positive")
        report = count_synapses(red, green, roi, _parse_range(red_range), _parse_range(green_range), calib)
        prefix = Path(out_prefix)
        _write_json(prefix.with_suffix(".json"), report.to_json_dict())
        prefix.with_suffix(".csv").write_text(report.to_csv())
        save_mask(report.marked_mask, prefix.parent / (prefix.name + "_mask.pgm"))
        click.echo(f"count={report.count} density_per_100um={report.density_per_100um:.4f}")

    _run_guarded(run)


@main.command()
@click.option("--nuclei", "nuclei_path", required=True, help="Nucleus staining channel.")
@click.option("--neurons", "neurons_path", required=True, help="Neuron staining channel.")
@click.option("--min-area", default=40, show_default=True, help="Smallest nucleus kept, px; smaller components count as noise.")
@click.option("--max-area", default=200, show_default=True, help="Largest nucleus kept, px; larger components read as astrocytes or fused clusters.")
@click.option("--axis-limit", default=2.0, show_default=True, help="Oblong rejection threshold on the major/minor axis comparison.")
@click.option("--axis-mode", type=click.Choice(["ratio", "absolute"]), default="ratio", show_default=True, help="Compare axes by ratio or absolute difference.")
@click.option("--radii", default="5,10,15", show_default=True, help="Concentric circle radii for the dense-cluster mode check.")
@click.option("--nuclei-threshold", default="50:255", show_default=True, help="Binarization band for the nucleus channel.")
@click.option("--neuron-threshold", default="50:255", show_default=True, help="Binarization band for the neuron channel.")
@click.option("--median-radius", default=1, show_default=True, help="Median prefilter radius, px.")
@click.option("--out", "out_prefix", default="nuclei", show_default=True, help="Prefix for report files.")
def nuclei(nuclei_path, neurons_path, min_area, max_area, axis_limit, axis_mode, radii, nuclei_threshold, neuron_threshold, median_radius, out_prefix):
    """Count cell nuclei and the subset belonging to neurons."""

    def run():
        if min_area < 0 or max_area < min_area:
            raise ParamError("need 0 <= min-area <= max-area")
        radii_tuple = tuple(int(r) for r in radii.split(","))
        params = NucleusParams(
            min_area=min_area,
            max_area=max_area,
            axis_limit=axis_limit,
            axis_mode=axis_mode,
            circle_radii=radii_tuple,
            nuclei_threshold=_parse_range(nuclei_threshold),
            neuron_threshold=_parse_range(neuron_threshold),
            median_radius=median_radius,
        )
        report = count_nuclei(_load_channel(nuclei_path), _load_channel(neurons_path), params)
        prefix = Path(out_prefix)
        _write_json(prefix.with_suffix(".json"), report.to_json_dict())
        prefix.with_suffix(".csv").write_text(report.to_csv())
        click.echo(f"total_cells={report.total_cells} neurons={report.neuron_count}")

    _run_guarded(run)


@main.command()
@click.option("--in", "in_path", required=True, help="Culture image to scan for neurons.")
@click.option("--tile", default=25, show_default=True, help="Search tile side, px.")
@click.option("--min-path", default=15.0, show_default=True, help="Minimum in-tile path length, px, for a tile to join a region.")
@click.option("--max-gap", default=2, show_default=True, help="Largest hole a path may jump, px (2 or 3 in practice).")
@click.option("--seed-threshold", type=int, default=None, help="Absolute seed intensity; default: --seed-percentile of the histogram.")
@click.option("--seed-percentile", default=99.5, show_default=True, help="Percentile defining seed brightness when no absolute threshold is given.")
@click.option("--path-threshold", default=1, show_default=True, help="Foreground intensity for path finding.")
@click.option("--out", "out_prefix", default="locate", show_default=True, help="Prefix for report files.")
def locate(in_path, tile, min_path, max_gap, seed_threshold, seed_percentile, path_threshold, out_prefix):
    """Locate neurons: grow tile regions around bright seeds along dendrite paths."""

    def run():
        if max_gap < 0 or tile < 1 or min_path <= 0:
            raise ParamError("tile and min-path must be positive, max-gap non-negative")
        if seed_threshold is not None and not 0 <= seed_threshold <= 255:
            raise ParamError("seed-threshold must lie in [0, 255]")
        params = LocateParams(
            tile=tile,
            min_path=min_path,
            max_gap=max_gap,
            seed_threshold=seed_threshold,
            seed_percentile=seed_percentile,
            path_threshold=path_threshold,
        )
        report = locate_neurons(_load_channel(in_path), params)
        prefix = Path(out_prefix)
        _write_json(prefix.with_suffix(".json"), report.to_json_dict())
        lines = ["region,tile_x,tile_y"]
        for i, region in enumerate(report.regions, start=1):
            for tx, ty in region.tiles:
                lines.append(f"{i},{tx},{ty}")
        prefix.with_suffix(".csv").write_text("\n".join(lines) + "\n")
        click.echo(f"regions={len(report.regions)}")

    _run_guarded(run)


@main.command()
@click.option("--stack", "stack_paths", required=True, multiple=True, help="Slice images, bottom to top; repeat the flag per slice.")
@click.option("--levels", default=None, help="Descending superlevel thresholds, comma separated; default 8 equispaced.")
@click.option("--min-persistence", default=2, show_default=True, help="Levels a component must survive to count as structure.")
@click.option("--prefilter", default=1, show_default=True, help="Median prefilter radius, px.")
@click.option("--out", "out_prefix", default="structure", show_default=True, help="Prefix for output files.")
def structure(stack_paths, levels, min_persistence, prefilter, out_prefix):
    """Extract the persistent neuron structure from a z-stack."""

    def run():
        if min_persistence < 1:
            raise ParamError("min-persistence must be >= 1")
        slices = tuple(_load_channel(p) for p in stack_paths)
        stack = ImageStack(slices)
        level_tuple = _parse_levels(levels) if levels else default_levels()
        result = extract_structure(stack, level_tuple, min_persistence, prefilter)
        prefix = Path(out_prefix)
        save_mask(result.structure, prefix.with_suffix(".pgm"))
        prefix.with_suffix(".csv").write_text(result.barcode.to_csv())
        _write_json(
            prefix.with_suffix(".json"),
            {
                "levels": list(result.levels),
                "min_persistence": result.min_persistence,
                "prefilter_radius": result.prefilter_radius,
                "foreground_px": result.structure.count_foreground(),
            },
        )
        click.echo(f"structure_px={result.structure.count_foreground()}")

    _run_guarded(run)


@main.command()
@click.option("--in", "in_path", required=True, help="Grayscale image to filter by thresholds.")
@click.option("--levels", default=None, help="Monotone thresholds, comma separated; default 8 equispaced descending.")
@click.option("--direction", type=click.Choice(["superlevel", "sublevel"]), default="superlevel", show_default=True, help="superlevel: bright structure enters first.")
@click.option("--out", "out_path", default=None, help="Write the barcode CSV here instead of stdout.")
def persistence(in_path, levels, direction, out_path):
    """Barcode of a threshold filtration (region-scale images)."""

    def run():
        img = _load_channel(in_path)
        level_tuple = _parse_levels(levels) if levels else default_levels()
        if direction == "sublevel":
            level_tuple = tuple(sorted(level_tuple))
        filt = build_filtration(img, level_tuple, direction)
        csv = persistent_homology(filt).to_csv()
        if out_path:
            Path(out_path).write_text(csv)
        else:
            click.echo(csv, nl=False)

    _run_guarded(run)


@main.command()
@click.option("--stack", "stack_paths", required=True, multiple=True, help="Slice images in order; repeat the flag per slice.")
@click.option("--threshold", default=128, show_default=True, help="Foreground = intensity at or above this value.")
@click.option("--out", "out_path", default=None, help="Write the interval CSV here instead of stdout.")
def zigzag(stack_paths, threshold, out_path):
    """H0 intervals across a stack, linked through slice intersections."""

    def run():
        slices = [_load_mask(p, threshold) for p in stack_paths]
        csv = zigzag_h0(slices).to_csv()
        if out_path:
            Path(out_path).write_text(csv)
        else:
            click.echo(csv, nl=False)

    _run_guarded(run)


if __name__ == "__main__":
    main()
