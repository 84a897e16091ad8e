"""Command-line pipeline: track / preview-edges / reconstruct / flow / synth / bench.

Configuration is a flat ``key = value`` text file with ``#`` comments; every
key mirrors a GUI-style parameter name. Unknown keys are hard errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import flow as flowmod
from . import synth as synthmod
from .detect import DetectParams, canny_edges, detect_particles, otsu_threshold
from .frame_io import (
    BackgroundModel,
    DataError,
    Frame,
    PreprocessConfig,
    load_sequence,
    normalize_with_background,
    preprocess,
    write_image,
)
from .holo import OpticalConfig, ZScan, axial_scan, axial_scan_2d, extend_profile
from .refine import radial_profile, xcorr_refine
from .track import Template, TrackParams, Tracker, advance_tracks


class ConfigError(Exception):
    """Bad configuration input (exit code 1)."""


@dataclass
class RunConfig:
    # pre-processing
    roi: Optional[tuple[int, int, int, int]] = None
    boundary_region: int = 0
    resize_factor: float = 1.0
    normalized_intensity: bool = True
    gaussian_kernel_size: int = 0
    background_subtraction: str = "none"  # none | static | moving_average
    number_of_background_images: int = 10
    # particle localization
    number_of_scales: int = 3
    its_transform_threshold: float = 0.03
    segment_length: int = 10
    minimum_votes: float = 30.0
    multiple_of_iterations: float = 5.0
    mapping_kernel_size: int = 2
    canny_edge_multiple: float = 1.0
    # tracking
    cost_of_nonassignment: float = 80.0
    maximum_travel_distance: float = 80.0
    number_of_tracks: int = 100
    template_radius: int = 200
    tracking_boundary: bool = False
    max_misses: int = 5
    process_noise_position: float = 1.0
    process_noise_velocity: float = 0.25
    measurement_noise: float = 1.0
    initial_position_variance: float = 100.0
    initial_velocity_variance: float = 25.0
    # optics
    wavelength: float = 470.0  # nm
    refractive_index: float = 1.33
    conversion_factor: float = 132.0  # nm/px
    # reconstruction scan
    z_start: float = 10.0
    z_step: float = 0.5
    z_end: float = 100.0
    # refinement
    resampling_mode: str = "circular"  # circular | sector
    delta_r: float = 0.5
    delta_theta: float = 2 * math.pi / 64
    xcorr: bool = True
    # reconstruction
    enable_reconstruction: bool = True
    reconstruction_method: str = "1d"  # 1d | 1d_decov | 2d
    template_margins: float = 2.0
    paraxial_mask_radius: int = 3
    # run
    output_dir: str = "output"
    seed: int = 42


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes", "on"):
        return True
    if s.lower() in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_roi(s: str) -> Optional[tuple[int, int, int, int]]:
    if s.lower() in ("none", ""):
        return None
    parts = s.split(",")
    if len(parts) != 4:
        raise ConfigError(f"roi must be 'x0,y0,w,h' or 'none', got {s!r}")
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def _serialize_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config_text(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """Parse flat key = value lines into a RunConfig; unknown keys are errors."""
    cfg = replace(base) if base is not None else RunConfig()
    types = {f.name: f.type for f in fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in types:
            raise ConfigError(f"unknown config key: {key}")
        try:
            if key == "roi":
                setattr(cfg, key, _parse_roi(value))
            elif isinstance(getattr(cfg, key), bool):
                setattr(cfg, key, _parse_bool(value))
            elif isinstance(getattr(cfg, key), int):
                setattr(cfg, key, int(value))
            elif isinstance(getattr(cfg, key), float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"{f.name} = {_serialize_value(getattr(cfg, f.name))}" for f in fields(RunConfig)]
    return "\n".join(lines) + "\n"


def load_config(path: str | Path, base: Optional[RunConfig] = None) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(), base)


def _preprocess_config(cfg: RunConfig) -> PreprocessConfig:
    return PreprocessConfig(
        roi=cfg.roi,
        boundary_margin=cfg.boundary_region,
        resize_factor=cfg.resize_factor,
        gaussian_kernel=cfg.gaussian_kernel_size,
        normalize=cfg.normalized_intensity,
        background_mode=None if cfg.background_subtraction == "none" else cfg.background_subtraction,
        background_window=cfg.number_of_background_images,
    )


def _detect_params(cfg: RunConfig) -> DetectParams:
    return DetectParams(
        num_scales=cfg.number_of_scales,
        its_threshold=cfg.its_transform_threshold,
        min_segment_length=cfg.segment_length,
        min_votes=cfg.minimum_votes,
        iterations_multiple=cfg.multiple_of_iterations,
        mapping_kernel_radius=cfg.mapping_kernel_size,
        canny_multiple=cfg.canny_edge_multiple,
        seed=cfg.seed,
    )


def _track_params(cfg: RunConfig) -> TrackParams:
    return TrackParams(
        cost_non_assignment=cfg.cost_of_nonassignment,
        max_travel=cfg.maximum_travel_distance,
        max_tracks=cfg.number_of_tracks,
        template_radius=cfg.template_radius,
        boundary_required=cfg.tracking_boundary,
        max_misses=cfg.max_misses,
        process_noise_position=cfg.process_noise_position,
        process_noise_velocity=cfg.process_noise_velocity,
        measurement_noise=cfg.measurement_noise,
        initial_position_variance=cfg.initial_position_variance,
        initial_velocity_variance=cfg.initial_velocity_variance,
    )


def _optics(cfg: RunConfig) -> OpticalConfig:
    return OpticalConfig(
        wavelength_vacuum=cfg.wavelength,
        refractive_index=cfg.refractive_index,
        pixel_size=cfg.conversion_factor,
    )


def _zscan(cfg: RunConfig) -> ZScan:
    return ZScan(cfg.z_start, cfg.z_step, cfg.z_end)


def _fmt(v: float) -> str:
    return "nan" if v is None or not np.isfinite(v) else repr(float(v))


def _reconstruct_track(
    template: Template,
    center: tuple[float, float],
    heading: Optional[float],
    cfg: RunConfig,
) -> float:
    optics = _optics(cfg)
    scan = _zscan(cfg)
    if cfg.reconstruction_method == "2d":
        rec = axial_scan_2d(
            template.pixels,
            scan,
            optics,
            mask_radius=cfg.paraxial_mask_radius,
            center=(
                center[0] - (round(template.center[0]) - template.radius),
                center[1] - (round(template.center[1]) - template.radius),
            ),
        )
        return rec.z_star
    profile = radial_profile(
        template,
        center,
        mode=cfg.resampling_mode,
        delta_r=cfg.delta_r,
        delta_theta=cfg.delta_theta,
        heading=heading,
    )
    profile = extend_profile(profile, cfg.template_margins)
    rec = axial_scan(
        profile,
        scan,
        optics,
        mask_radius=cfg.paraxial_mask_radius,
        deconvolve=cfg.reconstruction_method == "1d_decov",
    )
    return rec.z_star


def _prepared_frames(input_dir: str | Path, cfg: RunConfig):
    """Yield preprocessed frames, handling the background model inline."""
    pre = _preprocess_config(cfg)
    mode = pre.background_mode
    if mode == "static":
        frames = list(load_sequence(input_dir, pixel_size=cfg.conversion_factor))
        model = BackgroundModel("static", pre.background_window)
        for f in frames[: pre.background_window]:
            model.push(f)
        for f in frames:
            yield preprocess(normalize_with_background(f, model), pre)
        return
    model = BackgroundModel("moving_average", pre.background_window) if mode else None
    for f in load_sequence(input_dir, pixel_size=cfg.conversion_factor):
        if model is not None:
            if model.mean is None:
                model.push(f)
            else:
                f = normalize_with_background(f, model)
        yield preprocess(f, pre)


def run_track(cfg: RunConfig, input_dir: str | Path, out_dir: Optional[Path] = None) -> Path:
    """Full pipeline over an image-sequence directory; returns the output dir.

    Per frame: preprocess, detect, associate; per assigned track: optional
    Xcorr refinement, then the configured axial reconstruction. Outputs one
    CSV per track, a summary.csv, and the effective config echo.
    """
    out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    detect_params = _detect_params(cfg)
    tracker = Tracker(_track_params(cfg))
    rows: dict[int, list[tuple[int, float, float, float, float]]] = {}

    stage = "load"
    frame_index = -1
    try:
        for frame in _prepared_frames(input_dir, cfg):
            frame_index = frame.index
            stage = "detect"
            detections = detect_particles(frame, detect_params)
            stage = "track"
            advance_tracks(tracker, detections, frame)
            stage = "refine/reconstruct"
            for t in tracker.tracks:
                if not t.history or t.history[-1][0] != frame.index:
                    continue
                _, x, y = t.history[-1]
                z = float("nan")
                if t.template is not None and t.template_frame == frame.index:
                    if cfg.xcorr:
                        res = xcorr_refine(t.template, (x, y))
                        x, y = res.x, res.y
                        t.history[-1] = (frame.index, x, y)
                    if cfg.enable_reconstruction:
                        heading = None
                        if cfg.resampling_mode == "sector":
                            vx, vy = t.kalman.state[2], t.kalman.state[3]
                            heading = float(np.arctan2(vy, vx))
                        z = _reconstruct_track(t.template, (x, y), heading, cfg)
                rows.setdefault(t.id, []).append((frame.index, x, y, z, t.last_score))
    except (DataError, ConfigError):
        raise
    except ValueError as exc:
        raise DataError(f"frame {frame_index}, stage {stage}: {exc}") from exc

    for tid in sorted(rows):
        path = out / f"track_{tid:05d}.csv"
        with path.open("w", newline="") as fh:
            fh.write("frame,x_px,y_px,z_um,score\n")
            for fr, x, y, z, score in rows[tid]:
                fh.write(f"{fr},{_fmt(x)},{_fmt(y)},{_fmt(z)},{_fmt(score)}\n")

    with (out / "summary.csv").open("w", newline="") as fh:
        fh.write("track_id,n_samples,first_frame,last_frame\n")
        for tid in sorted(rows):
            r = rows[tid]
            fh.write(f"{tid},{len(r)},{r[0][0]},{r[-1][0]}\n")

    (out / "config.txt").write_text(serialize_config(cfg))
    return out


def run_preview(
    cfg: RunConfig,
    input_dir: str | Path,
    frame_index: int,
    canny_multiples: Sequence[float],
    out_dir: Optional[Path] = None,
) -> list[Path]:
    """Emit one PNG triptych (frame | edges | detections) per Canny multiple."""
    from PIL import Image, ImageDraw

    out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame = None
    for f in _prepared_frames(input_dir, cfg):
        if f.index == frame_index:
            frame = f
            break
    if frame is None:
        raise DataError(f"frame index {frame_index} not found in {input_dir}")

    paths = []
    for multiple in canny_multiples:
        edges = canny_edges(frame, auto_multiple=multiple)
        params = replace(_detect_params(cfg), canny_multiple=multiple)
        detections = detect_particles(frame, params)

        gray = (np.clip(frame.intensities, 0, 1) * 255).astype(np.uint8)
        panel_frame = Image.fromarray(gray).convert("RGB")
        panel_edges = Image.fromarray((edges.binary * 255).astype(np.uint8)).convert("RGB")
        panel_dets = Image.fromarray(gray).convert("RGB")
        draw = ImageDraw.Draw(panel_dets)
        for d in detections:
            x, y = d.x, d.y
            draw.line([(x - 6, y), (x + 6, y)], fill=(255, 0, 0), width=1)
            draw.line([(x, y - 6), (x, y + 6)], fill=(255, 0, 0), width=1)
            draw.text((x + 4, y + 4), f"{d.score:.0f}", fill=(255, 255, 0))

        w, h = panel_frame.size
        trip = Image.new("RGB", (3 * w + 2, h), (32, 32, 32))
        trip.paste(panel_frame, (0, 0))
        trip.paste(panel_edges, (w + 1, 0))
        trip.paste(panel_dets, (2 * w + 2, 0))
        path = out / f"preview_frame{frame_index:04d}_canny{multiple:g}.png"
        trip.save(path)
        paths.append(path)
    return paths


def _read_track_csv(path: Path) -> flowmod.TrajectorySamples:
    frames, xs, ys, zs = [], [], [], []
    with path.open() as fh:
        header = fh.readline()
        if not header.startswith("frame"):
            raise DataError(f"{path.name}: not a track file")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 4:
                continue
            frames.append(int(parts[0]))
            xs.append(float(parts[1]))
            ys.append(float(parts[2]))
            zs.append(float(parts[3]))
    tid_text = path.stem.split("_")[-1]
    tid = int(tid_text) if tid_text.isdigit() else 0
    return flowmod.TrajectorySamples(
        tid, np.array(frames), np.array(xs), np.array(ys), np.array(zs)
    )


def run_flow(
    track_dir: Path,
    out_dir: Path,
    filt: flowmod.FlowFilter,
    conversion: float,
    order: int,
    bin_width: float,
    make_plots: bool,
) -> flowmod.FlowProfileFit:
    paths = sorted(track_dir.glob("track_*.csv"))
    if not paths:
        raise DataError(f"no track_*.csv files in {track_dir}")
    tracks = [_read_track_csv(p) for p in paths]
    records = flowmod.analyze_trajectories(tracks, filt, conversion)
    if not records:
        raise DataError("no trajectories survived the filters")
    fit = flowmod.fit_flow_profile(records, order=order, fit_range=filt.fit_range)

    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "profile.csv").open("w") as fh:
        fh.write("z_bin_um,mean_speed_um_s,count\n")
        for zc, vm, n in flowmod.bin_profile(records, bin_width):
            fh.write(f"{_fmt(zc)},{_fmt(vm)},{n}\n")
    (out_dir / "fit.json").write_text(
        json.dumps(
            {
                "order": fit.order,
                "coefficients": [float(c) for c in fit.coefficients],
                "r_squared": fit.r_squared,
                "samples_used": fit.samples_used,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    if make_plots:
        _flow_plots(records, fit, out_dir)
    return fit


def _flow_plots(records, fit, out_dir: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    z = np.array([r.mean_z for r in records])
    y = np.array([r.mean_y for r in records])
    x = np.array([r.mean_x for r in records])
    v = np.array([r.speed for r in records])

    fig, ax = plt.subplots(figsize=(6, 4))
    sc = ax.scatter(y, z, c=v, cmap="viridis", s=18)
    fig.colorbar(sc, ax=ax, label="speed (um/s)")
    ax.set_xlabel("mean y (px)")
    ax.set_ylabel("mean z (um)")
    fig.tight_layout()
    fig.savefig(out_dir / "profile_scatter.png", dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(z, v, "o", ms=4, label="trajectories")
    zz = np.linspace(z.min(), z.max(), 200)
    ax.plot(zz, np.polynomial.polynomial.polyval(zz, fit.coefficients), "r--",
            label=f"order-{fit.order} fit, R2={fit.r_squared:.3f}")
    ax.set_xlabel("mean z (um)")
    ax.set_ylabel("speed (um/s)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "profile_fit.png", dpi=120)
    plt.close(fig)

    for name, horiz in (("xz_view.png", x), ("yz_view.png", y)):
        fig, ax = plt.subplots(figsize=(5, 4))
        sc = ax.scatter(horiz, z, c=v, cmap="viridis", s=18)
        fig.colorbar(sc, ax=ax, label="speed (um/s)")
        ax.set_xlabel("mean x (px)" if name.startswith("xz") else "mean y (px)")
        ax.set_ylabel("mean z (um)")
        fig.tight_layout()
        fig.savefig(out_dir / name, dpi=120)
        plt.close(fig)


def run_reconstruct(
    cfg: RunConfig, image_path: Path, out_csv: Path, plot: Optional[Path]
) -> float:
    """Scan a saved particle template along z and write the intensity curve."""
    from .frame_io import read_image

    img = read_image(image_path)
    side = min(img.shape)
    if side % 2 == 0:
        side -= 1
    oy = (img.shape[0] - side) // 2
    ox = (img.shape[1] - side) // 2
    img = img[oy : oy + side, ox : ox + side]
    radius = side // 2
    center = (float(radius), float(radius))
    template = Template(img, center, radius, True)
    if cfg.xcorr:
        res = xcorr_refine(template, center)
        center = (res.x, res.y)

    optics = _optics(cfg)
    scan = _zscan(cfg)
    if cfg.reconstruction_method == "2d":
        rec = axial_scan_2d(img, scan, optics, cfg.paraxial_mask_radius, center)
    else:
        profile = radial_profile(
            template, center, mode="circular", delta_r=cfg.delta_r, delta_theta=cfg.delta_theta
        )
        profile = extend_profile(profile, cfg.template_margins)
        rec = axial_scan(
            profile,
            scan,
            optics,
            mask_radius=cfg.paraxial_mask_radius,
            deconvolve=cfg.reconstruction_method == "1d_decov",
        )

    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with out_csv.open("w") as fh:
        fh.write("z_um,intensity\n")
        for z, i in zip(rec.z_values, rec.intensities):
            fh.write(f"{_fmt(z)},{_fmt(i)}\n")
    if plot is not None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(rec.z_values, rec.intensities)
        ax.axvline(rec.z_star, color="r", ls="--", label=f"z* = {rec.z_star:.2f} um")
        ax.set_xlabel("z (um)")
        ax.set_ylabel("reconstructed intensity")
        ax.legend()
        fig.tight_layout()
        fig.savefig(plot, dpi=120)
        plt.close(fig)
    return rec.z_star


def run_synth(args: argparse.Namespace) -> Path:
    """Write a synthetic image sequence plus ground_truth.csv."""
    optics = OpticalConfig(args.wavelength, args.refractive_index, args.conversion_factor)
    shape = (args.width, args.height)
    fov_x = args.width * optics.pixel_size * 1e-3
    fov_y = args.height * optics.pixel_size * 1e-3
    rng = np.random.default_rng(args.seed)

    particles: list[synthmod.ParticleSpec]
    motions: Optional[list[synthmod.Motion]]
    if args.preset == "static":
        particles = [synthmod.ParticleSpec(fov_x / 2, fov_y / 2, args.z, args.particle_radius)]
        motions = None
    elif args.preset == "sinusoid":
        p = synthmod.ParticleSpec(fov_x / 2, fov_y / 2, args.z, args.particle_radius)
        particles = [p]
        motions = [synthmod.sinusoid_motion(p, args.amplitude_nm * 1e-3, args.period_frames)]
    elif args.preset == "zgrid":
        zs = np.arange(args.z_grid_start, args.z_grid_end + args.z_grid_step / 2, args.z_grid_step)
        particles = [
            synthmod.ParticleSpec(fov_x / 2, fov_y / 2, float(z), args.particle_radius)
            for z in zs
        ]
        motions = None  # rendered one per frame below
    elif args.preset == "flow":
        particles = []
        motions = []
        for _ in range(args.n_particles):
            p = synthmod.ParticleSpec(
                float(rng.uniform(0.05 * fov_x, 0.95 * fov_x)),
                float(rng.uniform(0.1 * fov_y, 0.9 * fov_y)),
                float(rng.uniform(args.z_grid_start, args.z_grid_end)),
                args.particle_radius,
            )
            particles.append(p)
            motions.append(
                synthmod.poiseuille_motion(
                    p, args.v_max, args.channel_height, args.frame_rate, wrap_um=0.9 * fov_x
                )
            )
    else:
        raise ConfigError(f"unknown preset {args.preset!r}")

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    truth_rows: list[synthmod.GroundTruthRow] = []
    if args.preset == "zgrid":
        # one particle per frame, stepping through the z grid
        for t, p in enumerate(particles):
            spec = synthmod.SceneSpec(
                [p], optics, shape, args.noise, None, 1, args.frame_rate, args.seed + t
            )
            frame = synthmod.synth_hologram(spec)
            write_image(out / f"frame_{t:05d}.png", frame.intensities)
            truth_rows.append(
                synthmod.GroundTruthRow(
                    t, 0, p.x_um * 1e3 / optics.pixel_size, p.y_um * 1e3 / optics.pixel_size, p.z_um
                )
            )
    else:
        spec = synthmod.SceneSpec(
            particles, optics, shape, args.noise, motions, args.frames, args.frame_rate, args.seed
        )
        frames, truth_rows = synthmod.synth_motion_video(spec)
        for frame in frames:
            write_image(out / f"frame_{frame.index:05d}.png", frame.intensities)

    with (out / "ground_truth.csv").open("w") as fh:
        fh.write("frame,particle_id,x_px,y_px,z_um\n")
        for row in truth_rows:
            fh.write(
                f"{row.frame},{row.particle_id},{_fmt(row.x_px)},{_fmt(row.y_px)},{_fmt(row.z_um)}\n"
            )
    return out


def run_bench(args: argparse.Namespace) -> dict[str, float]:
    """Throughput of the full pipeline and the 1D-vs-2D scan comparison."""
    optics = OpticalConfig()
    fov = args.size * optics.pixel_size * 1e-3
    particles = [
        synthmod.ParticleSpec(fov * 0.35, fov * 0.4, 30.0, 0.5),
        synthmod.ParticleSpec(fov * 0.65, fov * 0.6, 45.0, 0.5),
    ]
    spec = synthmod.SceneSpec(
        particles, optics, (args.size, args.size), 0.01, None, args.frames, seed=7
    )
    frames, _ = synthmod.synth_motion_video(spec)
    frames = [
        Frame(f.intensities.astype(np.float32), f.index, f.pixel_size) for f in frames
    ]

    cfg = RunConfig(
        template_radius=args.template_radius,
        gaussian_kernel_size=5,
        z_start=10.0,
        z_step=0.5,
        z_end=100.0,
        xcorr=True,
    )
    pre = _preprocess_config(cfg)
    detect_params = _detect_params(cfg)
    tracker = Tracker(_track_params(cfg))
    t0 = time.perf_counter()
    for frame in frames:
        prepared = preprocess(frame, pre)
        detections = detect_particles(prepared, detect_params)
        advance_tracks(tracker, detections, prepared)
        for t in tracker.tracks:
            if t.template is None or t.template_frame != frame.index:
                continue
            _, x, y = t.history[-1]
            if cfg.xcorr:
                res = xcorr_refine(t.template, (x, y))
                x, y = res.x, res.y
            _reconstruct_track(t.template, (x, y), None, cfg)
    elapsed = time.perf_counter() - t0
    fps = len(frames) / elapsed

    # 1D vs 2D scan on one large template
    big = synthmod.synth_hologram(
        synthmod.SceneSpec(
            [synthmod.ParticleSpec(fov / 2, fov / 2, 50.0, 0.5)], optics, (args.size, args.size)
        )
    )
    template = Template(
        big.intensities[
            args.size // 2 - 200 : args.size // 2 + 201,
            args.size // 2 - 200 : args.size // 2 + 201,
        ].copy(),
        (args.size // 2, args.size // 2),
        200,
        True,
    )
    scan = ZScan(10.0, 0.5, 100.0)
    center = (float(args.size // 2), float(args.size // 2))
    t0 = time.perf_counter()
    profile = radial_profile(template, center)
    profile = extend_profile(profile, 2.0)
    axial_scan(profile, scan, optics)
    t_1d = time.perf_counter() - t0
    t0 = time.perf_counter()
    axial_scan_2d(template.pixels, scan, optics)
    t_2d = time.perf_counter() - t0

    results = {
        "pipeline_fps": fps,
        "scan_1d_s": t_1d,
        "scan_2d_s": t_2d,
        "speedup_2d_over_1d": t_2d / t_1d,
    }
    for k, v in results.items():
        print(f"{k}={v:.4f}")
    return results


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holotrack",
        description="Track particles in microscopy/holography image sequences "
        "and reconstruct axial positions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_track = sub.add_parser("track", help="run the full tracking pipeline")
    p_track.add_argument("input", help="directory of grayscale raster frames")
    p_track.add_argument("--config", help="flat key=value configuration file")
    p_track.add_argument("--output", help="output directory (overrides config)")

    p_prev = sub.add_parser("preview-edges", help="edge/detection previews for Canny multiples")
    p_prev.add_argument("input")
    p_prev.add_argument("--config")
    p_prev.add_argument("--output")
    p_prev.add_argument("--frame", type=int, default=0)
    p_prev.add_argument(
        "--multiples", type=float, nargs="+", default=[0.5, 1.0, 2.0], metavar="M"
    )

    p_rec = sub.add_parser("reconstruct", help="z-scan a saved particle template image")
    p_rec.add_argument("image")
    p_rec.add_argument("--config")
    p_rec.add_argument("--out", default="curve.csv")
    p_rec.add_argument("--plot", default=None)

    p_flow = sub.add_parser("flow", help="flow profile from per-track CSV files")
    p_flow.add_argument("tracks", help="directory containing track_*.csv")
    p_flow.add_argument("--output", default="flow_out")
    p_flow.add_argument("--min-travel", type=float, default=5.0)
    p_flow.add_argument("--min-track-size", type=int, default=5)
    p_flow.add_argument("--max-axial-std", type=float, default=5.0)
    p_flow.add_argument("--frame-rate", type=float, default=200.0)
    p_flow.add_argument("--z-min", type=float, default=0.0)
    p_flow.add_argument("--z-max", type=float, default=1e9)
    p_flow.add_argument("--fit-min", type=float, default=0.0)
    p_flow.add_argument("--fit-max", type=float, default=1e9)
    p_flow.add_argument("--order", type=int, default=2)
    p_flow.add_argument("--bin-width", type=float, default=2.0)
    p_flow.add_argument("--conversion-factor", type=float, default=132.0)
    p_flow.add_argument("--plots", action="store_true")

    p_synth = sub.add_parser("synth", help="write a synthetic hologram sequence")
    p_synth.add_argument("output")
    p_synth.add_argument(
        "--preset", choices=["static", "sinusoid", "zgrid", "flow"], default="static"
    )
    p_synth.add_argument("--width", type=int, default=512)
    p_synth.add_argument("--height", type=int, default=512)
    p_synth.add_argument("--frames", type=int, default=10)
    p_synth.add_argument("--noise", type=float, default=0.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--z", type=float, default=30.0)
    p_synth.add_argument("--particle-radius", type=float, default=0.5)
    p_synth.add_argument("--amplitude-nm", type=float, default=250.0)
    p_synth.add_argument("--period-frames", type=float, default=400.0)
    p_synth.add_argument("--n-particles", type=int, default=10)
    p_synth.add_argument("--v-max", type=float, default=1050.0)
    p_synth.add_argument("--channel-height", type=float, default=100.0)
    p_synth.add_argument("--frame-rate", type=float, default=200.0)
    p_synth.add_argument("--z-grid-start", type=float, default=40.0)
    p_synth.add_argument("--z-grid-end", type=float, default=130.0)
    p_synth.add_argument("--z-grid-step", type=float, default=10.0)
    p_synth.add_argument("--wavelength", type=float, default=470.0)
    p_synth.add_argument("--refractive-index", type=float, default=1.33)
    p_synth.add_argument("--conversion-factor", type=float, default=132.0)

    p_bench = sub.add_parser("bench", help="pipeline throughput and 1D-vs-2D scan timing")
    p_bench.add_argument("--size", type=int, default=1024)
    p_bench.add_argument("--frames", type=int, default=10)
    p_bench.add_argument("--template-radius", type=int, default=100)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    try:
        cfg = RunConfig()
        if getattr(args, "config", None):
            cfg = load_config(args.config)

        if args.command == "track":
            out = run_track(cfg, args.input, Path(args.output) if args.output else None)
            print(f"wrote tracks to {out}")
        elif args.command == "preview-edges":
            paths = run_preview(
                cfg,
                args.input,
                args.frame,
                args.multiples,
                Path(args.output) if args.output else None,
            )
            for p in paths:
                print(p)
        elif args.command == "reconstruct":
            z_star = run_reconstruct(
                cfg, Path(args.image), Path(args.out), Path(args.plot) if args.plot else None
            )
            print(f"z_star={z_star:.3f}")
        elif args.command == "flow":
            filt = flowmod.FlowFilter(
                min_travel=args.min_travel,
                min_track_size=args.min_track_size,
                max_axial_std=args.max_axial_std,
                frame_rate=args.frame_rate,
                z_range=(args.z_min, args.z_max),
                fit_range=(args.fit_min, args.fit_max),
            )
            fit = run_flow(
                Path(args.tracks),
                Path(args.output),
                filt,
                args.conversion_factor,
                args.order,
                args.bin_width,
                args.plots,
            )
            print(f"r_squared={fit.r_squared:.4f} samples={fit.samples_used}")
        elif args.command == "synth":
            out = run_synth(args)
            print(f"wrote sequence to {out}")
        elif args.command == "bench":
            run_bench(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
