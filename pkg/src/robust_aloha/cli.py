"""Command-line driver: ``robust-aloha {add-noise,denoise,psnr,presets}``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ChannelMismatchError, InvalidConfigError, InvalidShapeError, NumericError, ParseError, RobustAlohaError
from .hankel import HankelShape
from .imageio import load, save
from .metrics import CSV_FIELDS, csv_row, psnr
from .noise import NoiseSpec, add_noise
from .pipeline import plan_grid, run_denoise
from .solver import ChannelMode, SolverConfig

log = logging.getLogger("robust_aloha")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4
THREADS_ENV = "ROBUST_ALOHA_THREADS"


@dataclasses.dataclass(frozen=True)
class Preset:
    patch: int
    filt: int
    tau: float
    lmafit_tol: float


# per image: (25% noise variant, 40% noise variant)
PRESETS: dict[str, tuple[Preset, Preset]] = {
    "baboon": (Preset(45, 13, 0.1, 0.2), Preset(45, 13, 0.075, 0.3)),
    "barbara": (Preset(25, 11, 0.1, 0.2), Preset(25, 11, 0.1, 0.3)),
    "boat": (Preset(25, 11, 0.1, 0.2), Preset(25, 11, 0.1, 0.3)),
    "cameraman": (Preset(31, 13, 0.1, 0.2), Preset(31, 13, 0.075, 0.3)),
    "house": (Preset(25, 11, 0.1, 0.2), Preset(25, 11, 0.1, 0.3)),
    "lena": (Preset(25, 11, 0.1, 0.2), Preset(25, 11, 0.1, 0.3)),
    "peppers": (Preset(25, 9, 0.1, 0.2), Preset(45, 13, 0.075, 0.3)),
    "default": (Preset(25, 11, 0.1, 0.2), Preset(25, 11, 0.1, 0.3)),
}


def preset_for(name: str, density: float | None) -> Preset:
    if name not in PRESETS:
        raise InvalidConfigError(f"--preset: unknown preset {name!r}")
    low, high = PRESETS[name]
    # nearest of the two tabulated noise levels
    return high if density is not None and density >= 0.325 else low


class _ConfigError(Exception):
    pass


def _fail(flag: str, msg: str):
    raise _ConfigError(f"{flag}: {msg}")


def _kind(value: str) -> str:
    return value.replace("-", "_")


def build_solver_config(args, channels: int) -> tuple[SolverConfig, tuple[int, int]]:
    """Resolve flag > preset > built-in default."""
    preset = preset_for(args.preset or "default", args.p)
    patch = args.patch if args.patch is not None else preset.patch
    filt = args.filter if args.filter is not None else preset.filt
    if patch < 1:
        _fail("--patch", "must be positive")
    if not (1 <= filt <= patch):
        _fail("--filter", f"must lie in [1, patch={patch}]")
    stride = args.stride if args.stride is not None else max(1, patch // 2)
    if stride < 1:
        _fail("--stride", "must be >= 1")
    if channels == 1:
        mode = ChannelMode.SINGLE
    else:
        mode = {"independent": ChannelMode.INDEPENDENT, "common": ChannelMode.COMMON_LOCATION,
                "single": ChannelMode.SINGLE}[args.channel_mode or "independent"]
    fields = dict(
        filter=HankelShape.square(patch, filt),
        tau=args.tau if args.tau is not None else preset.tau,
        lmafit_tol=preset.lmafit_tol,
        channel_mode=mode,
        seed=args.seed,
    )
    for flag, name, value in (("--mu", "mu", args.mu), ("--beta", "beta", args.beta),
                              ("--tol", "admm_tol", args.tol), ("--max-iters", "max_admm_iters", args.max_iters)):
        if value is not None:
            fields[name] = value
    try:
        cfg = SolverConfig(**fields)
    except InvalidConfigError as exc:
        raise _ConfigError(str(exc)) from exc
    return cfg, (stride, stride)


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get(THREADS_ENV, "1")
        try:
            n = int(env)
        except ValueError:
            _fail(THREADS_ENV, f"not an integer: {env!r}")
    if n < 1:
        _fail("--threads", "must be >= 1")
    return n


def _config_dict(cfg: SolverConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["channel_mode"] = cfg.channel_mode.value
    return d


def write_manifest(target: Path, command: str, argv, **fields) -> Path:
    path = target.with_name(target.name + ".manifest.json")
    manifest = {
        "command": command,
        "argv": list(argv),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        **fields,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _sibling(output: Path, tag: str) -> Path:
    return output.with_name(f"{output.stem}.{tag}{output.suffix}")


def cmd_add_noise(args, argv) -> int:
    try:
        spec = NoiseSpec(
            kind=_kind(args.kind),
            density=args.p,
            seed=args.seed,
            channel_locations=args.channel_mode or "independent",
        )
    except InvalidConfigError as exc:
        flag = "--p" if "density" in str(exc) else "--kind"
        raise _ConfigError(f"{flag}: {exc}") from exc
    img = load(args.input)
    noisy, mask = add_noise(img.data, spec)
    out = Path(args.output)
    depth = args.bit_depth or img.bit_depth or 8
    save(out, noisy, depth)
    if mask.ndim == 3 and spec.channel_locations == "common":
        mask = mask[..., 0]
    mask_path = _sibling(out, "mask")
    save(mask_path, mask.astype(float), 8)
    write_manifest(out, "add-noise", argv, input=args.input, output=str(out), mask=str(mask_path),
                   noise=dataclasses.asdict(spec), seed=args.seed, bit_depth=depth)
    print(f"wrote {out} ({int(mask.sum())} corrupted samples)")
    return EXIT_OK


def cmd_denoise(args, argv) -> int:
    img = load(args.input)
    reference = load(args.reference).data if args.reference else None
    if reference is not None and reference.shape != img.data.shape:
        raise _ConfigError(f"--reference: shape {reference.shape} differs from input {img.data.shape}")
    cfg, stride = build_solver_config(args, img.channels)
    H, W = img.data.shape[:2]
    if cfg.filter.patch_rows > min(H, W):
        _fail("--patch", f"{cfg.filter.patch_rows} exceeds image size {H}x{W}")
    grid = plan_grid((H, W), cfg.filter.patch_dims, stride)
    kind = "salt_pepper" if args.mode == "salt-pepper" else "rvin"
    threads = _threads(args)
    t0 = time.perf_counter()
    res = run_denoise(img.data, kind, cfg, grid, threads=threads, amf_window=args.amf_window)
    seconds = time.perf_counter() - t0
    out = Path(args.output)
    depth = args.bit_depth or img.bit_depth or 8
    save(out, res.image, depth)
    extra = {}
    if args.emit_layers:
        x_path, e_path = _sibling(out, "X"), _sibling(out, "E")
        save(x_path, res.image, depth)
        e = np.abs(res.sparse)
        save(e_path, e / e.max() if e.max() > 0 else e, depth)
        extra["layers"] = [str(x_path), str(e_path)]
        if res.noise_mask is not None:
            m_path = _sibling(out, "amfmask")
            save(m_path, res.noise_mask.astype(float) if res.noise_mask.ndim == 2 else res.noise_mask.any(-1).astype(float), 8)
            extra["layers"].append(str(m_path))
    report = None
    if reference is not None:
        report = psnr(reference, res.image)
        csv_path = Path(args.metrics_csv) if args.metrics_csv else out.with_name("metrics.csv")
        new = not csv_path.exists()
        with open(csv_path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(CSV_FIELDS)
            w.writerow(csv_row(os.path.basename(args.input), kind, args.p if args.p is not None else math.nan,
                               args.seed, "robust_aloha" if kind == "rvin" else "am_aloha", report.psnr_db, seconds))
        extra["metrics_csv"] = str(csv_path)
        extra["psnr_db"] = report.psnr_db
    write_manifest(out, "denoise", argv, input=args.input, output=str(out), mode=kind, solver=_config_dict(cfg),
                   grid={"patch": list(cfg.filter.patch_dims), "stride": list(stride), "patches": len(grid.origins)},
                   seed=args.seed, threads=threads, reference=args.reference, bit_depth=depth, **extra)
    msg = f"wrote {out} in {seconds:.1f}s"
    if report is not None:
        msg += f", PSNR {report.psnr_db:.2f} dB"
    print(msg)
    return EXIT_OK


def cmd_psnr(args, argv) -> int:
    ref = load(args.reference).data
    cand = load(args.candidate).data
    if ref.shape != cand.shape:
        raise _ConfigError(f"image shapes differ: {ref.shape} vs {cand.shape}")
    sys.stdout.write(psnr(ref, cand).to_text())
    return EXIT_OK


def cmd_presets(args, argv) -> int:
    print("name       noise  patch  filter  tau     lmafit_tol")
    for name, variants in PRESETS.items():
        for level, p in zip(("25%", "40%"), variants):
            print(f"{name:<10} {level:<6} {p.patch:<6} {p.filt:<7} {p.tau:<7g} {p.lmafit_tol:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-aloha", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("add-noise", help="inject RVIN or salt/pepper noise")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--kind", choices=["rvin", "salt-pepper", "salt_pepper"], default="rvin")
    p.add_argument("--p", type=float, default=0.25, help="noise density in [0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channel-mode", choices=["independent", "common"], default=None,
                   help="noise locations across colour channels")
    p.add_argument("--bit-depth", type=int, choices=[8, 16], default=None)
    p.set_defaults(func=cmd_add_noise)

    d = sub.add_parser("denoise", help="remove impulse noise patch by patch")
    d.add_argument("input")
    d.add_argument("output")
    d.add_argument("--preset", choices=sorted(PRESETS), default=None)
    d.add_argument("--patch", type=int)
    d.add_argument("--filter", type=int)
    d.add_argument("--tau", type=float)
    d.add_argument("--mu", type=float)
    d.add_argument("--beta", type=float)
    d.add_argument("--stride", type=int)
    d.add_argument("--tol", type=float)
    d.add_argument("--max-iters", type=int)
    d.add_argument("--p", type=float, default=None, help="known noise density; selects the 40%% preset variant when >= 0.325")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--mode", choices=["rvin", "salt-pepper"], default="rvin")
    d.add_argument("--channel-mode", choices=["independent", "common", "single"], default=None)
    d.add_argument("--amf-window", type=int, default=19)
    d.add_argument("--emit-layers", action="store_true")
    d.add_argument("--reference")
    d.add_argument("--metrics-csv")
    d.add_argument("--threads", type=int, default=None)
    d.add_argument("--bit-depth", type=int, choices=[8, 16], default=None)
    d.set_defaults(func=cmd_denoise)

    q = sub.add_parser("psnr", help="PSNR of a candidate against a reference")
    q.add_argument("reference")
    q.add_argument("candidate")
    q.set_defaults(func=cmd_psnr)

    r = sub.add_parser("presets", help="list parameter presets")
    r.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, argv)
    except (_ConfigError, InvalidConfigError, InvalidShapeError, ChannelMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        where = f" (patch origin {exc.origin})" if exc.origin is not None else ""
        print(f"error: solver failed{where}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RobustAlohaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
