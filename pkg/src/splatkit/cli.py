"""Command-line surface: render, pairs, stereo, compose, metrics, evalset.

Exit codes: 0 success, 1 validation/parameter problem, 2 I/O or parse
problem, 3 internal invariant violation. Every command is deterministic
given its flags and seeds; randomized commands refuse to run without an
explicit --seed. Parameter defaults that fired are recorded in the JSON
sidecar next to each output so runs stay auditable.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numba
import numpy as np

# numba probes TBB even when another threading layer ends up selected;
# the probe warning is pure noise on stderr for every command
warnings.filterwarnings("ignore", message="The TBB threading layer requires")

from . import storage
from .errors import (
    DegenerateInputError,
    ParameterError,
    ParseError,
    ShapeError,
    SplatkitError,
    ValidationError,
)
from .geometry import disparity_to_flow, flow_from_depth
from .imaging import as_image, as_mask
from .metrics import diff_map, report
from .refine import fill_pushpull
from .splatting import (
    DEFAULT_BETA,
    DEFAULT_PERCENTILES,
    DEFAULT_TAU,
    SplatResult,
    importance_from_depth,
    importance_from_disparity,
    softmax_splat,
)
from .trainpair import (
    DEFAULT_EDGE_THRESHOLD,
    SesParams,
    compose_sparse,
    ses_pair,
    tpa_pair,
)

MANIFEST_SCHEMA = 1


def _set_jobs(jobs: int) -> int:
    if jobs < 1:
        raise ParameterError(f"--jobs must be >= 1, got {jobs}")
    usable = min(jobs, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(usable)
    return usable


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _out_file(path_str) -> Path:
    path = Path(path_str)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _load_image(path: Path):
    """Load a PNG (any depth) or a single-channel PFM as a [0,1] image."""
    if path.suffix.lower() == ".pfm":
        raster = storage.read_pfm(path)
        return as_image(raster), None
    img, bit_depth = storage.read_image(path)
    return img, bit_depth


def _importance_for_flow(flow, depth, beta, p_lo, p_hi):
    """Pick the importance source: target depth when the flow carries it,
    source depth when supplied, uniform otherwise."""
    if flow.tgt_depth is not None:
        pool = flow.tgt_depth[flow.valid]
        if pool.size == 0:
            return np.zeros(flow.shape), ("none", 0.0, 0.0)
        d_lo = float(np.percentile(pool, p_lo))
        d_hi = float(np.percentile(pool, p_hi))
        return (
            importance_from_depth(flow.tgt_depth, beta, d_lo, d_hi),
            ("target_depth", d_lo, d_hi),
        )
    if depth is not None:
        d_lo = float(np.percentile(depth, p_lo))
        d_hi = float(np.percentile(depth, p_hi))
        return importance_from_depth(depth, beta, d_lo, d_hi), ("source_depth", d_lo, d_hi)
    return np.zeros(flow.shape), ("uniform", 0.0, 0.0)


# ---------------------------------------------------------------------------
# render

def cmd_render(args) -> int:
    jobs = _set_jobs(args.jobs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    image, bit_depth = _load_image(Path(args.image))
    depth = storage.read_pfm(Path(args.depth))
    h, w = image.shape[:2]
    if depth.shape != (h, w):
        raise ShapeError(f"depth {depth.shape} does not match image {(h, w)}")
    traj = storage.load_trajectory(Path(args.trajectory), w, h, args.world_axes)
    n = len(traj)
    if not (0 <= args.src_idx < n and 0 <= args.tgt_idx < n):
        raise ParameterError(f"frame indices must be in [0, {n}), got {args.src_idx}/{args.tgt_idx}")

    flow = flow_from_depth(depth, traj.camera(args.src_idx), traj.camera(args.tgt_idx))
    importance, (imp_source, d_lo, d_hi) = _importance_for_flow(
        flow, depth, args.beta, args.p_lo, args.p_hi
    )
    result = softmax_splat(image, flow, importance, args.tau)
    view = result.image
    if args.fill:
        view = fill_pushpull(view, result.mask)

    storage.write_image(out_dir / "view.png", view, bit_depth or 8)
    storage.write_image(out_dir / "mask.png", result.mask, 8)
    storage.write_pfm(out_dir / "weight.pfm", result.weight)
    if args.dump_flow:
        storage.write_flo(_out_file(args.dump_flow), flow)
    _write_json(
        out_dir / "meta.json",
        {
            "schema": MANIFEST_SCHEMA,
            "command": "render",
            "beta": args.beta,
            "tau": args.tau,
            "percentiles": [args.p_lo, args.p_hi],
            "depth_bounds": [d_lo, d_hi],
            "importance_source": imp_source,
            "fill": bool(args.fill),
            "src_idx": args.src_idx,
            "tgt_idx": args.tgt_idx,
            "world_axes": args.world_axes,
            "seed": args.seed,
            "jobs": jobs,
        },
    )
    return 0


# ---------------------------------------------------------------------------
# pairs

def _pair_entry(entry: dict, out_dir: Path, index: int) -> None:
    for key in ("src_image", "tgt_image", "mode", "out_prefix"):
        if key not in entry:
            raise ParameterError(f"manifest entry {index} is missing {key!r}")
    mode = entry["mode"]
    if mode not in ("tpa", "ses"):
        raise ParameterError(f"manifest entry {index}: mode must be tpa or ses, got {mode!r}")
    params = entry.get("params", {})
    beta = float(params.get("beta", DEFAULT_BETA))
    tau = float(params.get("tau", DEFAULT_TAU))
    p_lo = float(params.get("p_lo", DEFAULT_PERCENTILES[0]))
    p_hi = float(params.get("p_hi", DEFAULT_PERCENTILES[1]))

    src, src_depth_bits = _load_image(Path(entry["src_image"]))
    tgt, _ = _load_image(Path(entry["tgt_image"]))
    h, w = src.shape[:2]

    depth = None
    if entry.get("depth"):
        depth = storage.read_pfm(Path(entry["depth"]))
    if entry.get("flow"):
        flow = storage.read_flo(Path(entry["flow"]))
    elif entry.get("trajectory") is not None:
        if depth is None:
            raise ParameterError(f"manifest entry {index}: trajectory mode needs a depth map")
        traj = storage.load_trajectory(Path(entry["trajectory"]), w, h)
        flow = flow_from_depth(depth, traj.camera(int(entry["src_idx"])),
                               traj.camera(int(entry["tgt_idx"])))
    else:
        raise ParameterError(f"manifest entry {index}: needs either flow or depth+trajectory")
    if flow.shape != (h, w):
        raise ShapeError(f"manifest entry {index}: flow {flow.shape} vs image {(h, w)}")

    importance, (imp_source, d_lo, d_hi) = _importance_for_flow(flow, depth, beta, p_lo, p_hi)

    if mode == "tpa":
        pair = tpa_pair(src, tgt, flow, importance, tau)
        seed = entry.get("seed")
    else:
        if "seed" not in entry:
            raise ParameterError(f"manifest entry {index}: ses mode requires a seed")
        seed = int(entry["seed"])
        ses = SesParams(
            edge_threshold=float(params.get("edge_threshold", DEFAULT_EDGE_THRESHOLD)),
            coverage=float(params.get("coverage", 0.3)),
            blob_count=int(params.get("blob_count", 12)),
            seed=seed,
        )
        pair = ses_pair(src, tgt, flow, importance, ses, tau)

    prefix = out_dir / entry["out_prefix"]
    prefix.parent.mkdir(parents=True, exist_ok=True)

    def pth(name: str) -> Path:
        return Path(str(prefix) + name)

    storage.write_image(pth("cond.png"), pair.conditioned, 8)
    storage.write_image(pth("target.png"), pair.target, 8)
    storage.write_image(pth("splat_mask.png"), pair.splat_mask, 8)
    storage.write_image(pth("error_mask.png"), pair.error_mask, 8)
    meta = {
        "schema": MANIFEST_SCHEMA,
        "command": "pairs",
        "mode": mode,
        "seed": seed,
        "beta": beta,
        "tau": tau,
        "percentiles": [p_lo, p_hi],
        "depth_bounds": [d_lo, d_hi],
        "importance_source": imp_source,
        "edge_threshold": float(params.get("edge_threshold", DEFAULT_EDGE_THRESHOLD)),
        "coverage": float(params.get("coverage", 0.3)),
        "blob_count": int(params.get("blob_count", 12)),
        "src_image": entry["src_image"],
        "tgt_image": entry["tgt_image"],
    }
    _write_json(pth("meta.json"), meta)


def cmd_pairs(args) -> int:
    _set_jobs(args.jobs)
    manifest_path = Path(args.manifest)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"manifest is not valid JSON: {e}", line=e.lineno) from None
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ParameterError(f"manifest schema must be {MANIFEST_SCHEMA}, got {manifest.get('schema')}")
    entries = manifest.get("entries")
    if not isinstance(entries, list) or not entries:
        raise ParameterError("manifest needs a non-empty 'entries' list")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for i, entry in enumerate(entries):
        try:
            _pair_entry(entry, out_dir, i)
        except Exception as e:
            if args.strict:
                raise
            failures += 1
            print(f"splatkit pairs: entry {i} failed, skipping: {e}", file=sys.stderr)
    if failures:
        print(f"splatkit pairs: {failures}/{len(entries)} entries failed", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# stereo

def _expand_sequence(paths: list[str], suffixes: tuple[str, ...]) -> list[Path]:
    if len(paths) == 1 and Path(paths[0]).is_dir():
        found = sorted(
            p for p in Path(paths[0]).iterdir() if p.suffix.lower() in suffixes
        )
        if not found:
            raise ParameterError(f"no {'/'.join(suffixes)} files in {paths[0]}")
        return found
    return [Path(p) for p in paths]


def cmd_stereo(args) -> int:
    jobs = _set_jobs(args.jobs)
    lefts = _expand_sequence(args.left, (".png",))
    disps = _expand_sequence(args.disparity, (".pfm",))
    if len(lefts) != len(disps):
        raise ParameterError(f"{len(lefts)} left frames but {len(disps)} disparity maps")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    for left_path, disp_path in zip(lefts, disps):
        image, bit_depth = _load_image(left_path)
        disp = storage.read_pfm(disp_path)
        if disp.shape != image.shape[:2]:
            raise ShapeError(f"{disp_path}: disparity {disp.shape} vs image {image.shape[:2]}")
        flow = disparity_to_flow(disp, "left-to-right")
        importance = importance_from_disparity(disp, args.beta)
        result = softmax_splat(image, flow, importance, args.tau)
        right = fill_pushpull(result.image, result.mask)
        storage.write_image(out_dir / f"{left_path.stem}_right.png", right, bit_depth or 8)
    _write_json(
        out_dir / "meta.json",
        {
            "schema": MANIFEST_SCHEMA,
            "command": "stereo",
            "beta": args.beta,
            "tau": args.tau,
            "frames": len(lefts),
            "jobs": jobs,
        },
    )
    return 0


# ---------------------------------------------------------------------------
# compose

def cmd_compose(args) -> int:
    view_a, bits_a = _load_image(Path(args.view_a))
    mask_a = as_mask(_load_image(Path(args.mask_a))[0][:, :, 0])
    view_b, _ = _load_image(Path(args.view_b))
    mask_b = as_mask(_load_image(Path(args.mask_b))[0][:, :, 0])
    a = SplatResult(image=view_a, weight=mask_a, mask=mask_a, tau=0.0)
    b = SplatResult(image=view_b, weight=mask_b, mask=mask_b, tau=0.0)
    image, mask = compose_sparse(a, b, args.sigma)
    out = _out_file(args.out)
    storage.write_image(out, image, bits_a or 8)
    mask_out = _out_file(args.out_mask) if args.out_mask else out.with_name(out.stem + "_mask.png")
    storage.write_image(mask_out, mask, 8)
    return 0


# ---------------------------------------------------------------------------
# metrics

def cmd_metrics(args) -> int:
    ref, _ = _load_image(Path(args.ref))
    test, _ = _load_image(Path(args.test))
    mask = None
    if args.mask:
        mask = as_mask(_load_image(Path(args.mask))[0][:, :, 0])
    rep = report(ref, test, mask)
    print(rep.to_json())
    if args.json:
        _out_file(args.json).write_text(rep.to_json() + "\n", encoding="utf-8")
    if args.csv:
        _out_file(args.csv).write_text(
            "psnr_db,ssim,valid_fraction\n"
            f"{rep.psnr_db!r},{rep.ssim!r},{rep.valid_fraction!r}\n",
            encoding="utf-8",
        )
    if args.diff or args.fig:
        dm = diff_map(ref, test)
        if args.diff:
            storage.write_image(_out_file(args.diff), dm, 8)
        if args.fig:
            _render_metric_figure(_out_file(args.fig), dm, rep)
    return 0


def _render_metric_figure(path: Path, dm: np.ndarray, rep) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.5), dpi=120)
    shown = ax.imshow(dm, cmap="magma", vmin=0.0, vmax=max(float(dm.max()), 1e-6))
    ax.set_title(f"PSNR {rep.psnr_db:.3f} dB    SSIM {rep.ssim:.4f}")
    ax.set_axis_off()
    fig.colorbar(shown, ax=ax, fraction=0.046, pad=0.04, label="mean |ref − test|")
    fig.savefig(path, bbox_inches="tight", metadata={"Software": "splatkit"})
    plt.close(fig)


# ---------------------------------------------------------------------------
# evalset

def cmd_evalset(args) -> int:
    pairs = storage.make_eval_pairs(args.n_frames, skip=args.skip, rand=args.rand, seed=args.seed)
    for p in pairs:
        print(f"{p.src_index} {p.tgt_index}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splatkit",
        description="Depth-weighted softmax splatting, training-pair synthesis, and view evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_engine_flags(p):
        p.add_argument("--beta", type=float, default=DEFAULT_BETA,
                       help="importance sharpness (default %(default)s)")
        p.add_argument("--tau", type=float, default=DEFAULT_TAU,
                       help="weight threshold for valid splats (default %(default)s)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")

    p = sub.add_parser("render", help="splat one frame of a posed sequence to a target view")
    p.add_argument("--image", required=True)
    p.add_argument("--depth", required=True, help="source-view depth map (.pfm)")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--src-idx", type=int, required=True)
    p.add_argument("--tgt-idx", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    add_engine_flags(p)
    p.add_argument("--p-lo", type=float, default=DEFAULT_PERCENTILES[0],
                   help="lower depth percentile for importance bounds")
    p.add_argument("--p-hi", type=float, default=DEFAULT_PERCENTILES[1],
                   help="upper depth percentile for importance bounds")
    p.add_argument("--fill", action="store_true", help="fill disocclusions (push-pull)")
    p.add_argument("--world-axes", default="xyz", help="signed world-axis permutation, e.g. x-yz")
    p.add_argument("--dump-flow", default=None, help="also write the flow field (.flo)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("pairs", help="generate training pairs from a JSON manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--strict", action="store_true", help="abort on the first failing entry")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("stereo", help="synthesize right-eye views from left views + disparity")
    p.add_argument("--left", nargs="+", required=True, help="left-eye PNGs or one directory")
    p.add_argument("--disparity", nargs="+", required=True, help="disparity PFMs or one directory")
    p.add_argument("--out", required=True, help="output directory")
    add_engine_flags(p)
    p.set_defaults(func=cmd_stereo)

    p = sub.add_parser("compose", help="merge two splatted views with a blurred blending mask")
    p.add_argument("--view-a", required=True)
    p.add_argument("--mask-a", required=True)
    p.add_argument("--view-b", required=True)
    p.add_argument("--mask-b", required=True)
    p.add_argument("--sigma", type=float, default=3.0, help="blend mask blur in px (default 3)")
    p.add_argument("--out", required=True)
    p.add_argument("--out-mask", default=None)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("metrics", help="PSNR/SSIM report and difference map")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--mask", default=None, help="restrict PSNR to mask > 0.5")
    p.add_argument("--json", default=None, help="also write the report to a file")
    p.add_argument("--csv", default=None, help="also write a delimited report row")
    p.add_argument("--diff", default=None, help="write the |ref−test| map as PNG")
    p.add_argument("--fig", default=None, help="render an annotated difference figure (PNG)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("evalset", help="emit source/target frame index pairs")
    p.add_argument("--n-frames", type=int, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--skip", type=int, default=None, help="pair every frame with frame+K")
    group.add_argument("--rand", type=int, default=None, help="random offset within ±R")
    p.add_argument("--seed", type=int, default=None, help="required with --rand")
    p.set_defaults(func=cmd_evalset)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, ShapeError, DegenerateInputError, ValidationError) as e:
        print(f"splatkit {args.command}: {e}", file=sys.stderr)
        return 1
    except ParseError as e:
        print(f"splatkit {args.command}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        name = getattr(e, "filename", None)
        where = f" ({name})" if name else ""
        print(f"splatkit {args.command}: {e}{where}", file=sys.stderr)
        return 2
    except SplatkitError as e:
        print(f"splatkit {args.command}: internal error: {e}", file=sys.stderr)
        return 3
    except Exception as e:  # anything else is an invariant violation
        print(f"splatkit {args.command}: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
