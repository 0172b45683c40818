"""Command-line front end: transform, report, and plot subcommands.

Settings resolve in fixed precedence: built-in defaults, then the YAML
config file, then SCALEMATCH_* environment variables, then explicit flags.
Progress and diagnostics go to stderr; stdout carries only machine-readable
results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import yaml

from .errors import ConfigError, ScaleMatchError
from .imageops import InpaintParams, MattingParams
from .match import MatchMethod
from .model import (
    ROLE_SOURCE,
    ROLE_TARGET,
    index_to_json_dict,
    load_index,
    save_image,
)
from .pipeline import PipelineConfig, transform_dataset
from .stats import LAYOUT_EQUAL_WIDTH, DivergenceReport, compare_indices
from .svg import render_divergence_svg

_ENV_PREFIX = "SCALEMATCH_"

# key -> (type, default); paths default to None and stay strings
_SETTINGS = {
    "source": (str, None),
    "source_images": (str, None),
    "target": (str, None),
    "out": (str, None),
    "report": (str, None),
    "method": (str, None),
    "psi_p": (float, 0.4),
    "bins": (int, 100),
    "tail_quantile": (float, 0.99),
    "seed": (int, 0),
    "workers": (int, 1),
    "layout": (str, LAYOUT_EQUAL_WIDTH),
    "matting_radius": (int, 4),
    "matting_eps": (float, 1e-4),
    "inpaint_max_iters": (int, 500),
    "inpaint_tol": (float, 0.1),
    "drop_ignored": (bool, False),
}


def _coerce(key: str, raw, kind):
    if kind is bool and isinstance(raw, str):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"setting {key!r} expects {kind.__name__}, got {raw!r}") from None


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, environment, and flags (in that order)."""
    merged = {k: default for k, (_, default) in _SETTINGS.items()}

    config_path = getattr(args, "config", None) or os.environ.get(_ENV_PREFIX + "CONFIG")
    if config_path:
        try:
            loaded = yaml.safe_load(Path(config_path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config file {config_path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {config_path} is not valid YAML: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {config_path} must hold a mapping")
        for key, value in loaded.items():
            norm = str(key).replace("-", "_")
            if norm not in _SETTINGS:
                raise ConfigError(f"config file {config_path} has unknown setting {key!r}")
            merged[norm] = _coerce(norm, value, _SETTINGS[norm][0])

    for key, (kind, _) in _SETTINGS.items():
        env = os.environ.get(_ENV_PREFIX + key.upper())
        if env is not None:
            merged[key] = _coerce(key, env, kind)

    for key in _SETTINGS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _require(settings: dict, *keys: str) -> None:
    missing = [k for k in keys if not settings.get(k)]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ConfigError(f"missing required settings: {flags}")


def _check_readable(path: str, what: str) -> None:
    if not Path(path).exists():
        raise ConfigError(f"{what} path does not exist: {path}")


def _pipeline_config(settings: dict) -> PipelineConfig:
    return PipelineConfig(
        method=MatchMethod.parse(settings["method"]),
        psi_p=settings["psi_p"],
        bins=settings["bins"],
        tail_quantile=settings["tail_quantile"],
        seed=settings["seed"],
        layout=settings["layout"],
        matting=MattingParams(radius=settings["matting_radius"], eps=settings["matting_eps"]),
        inpaint=InpaintParams(
            max_iters=settings["inpaint_max_iters"], tol=settings["inpaint_tol"]
        ),
    )


def _progress_bar(total: int):
    from tqdm import tqdm

    bar = tqdm(total=total, unit="img", file=sys.stderr, leave=False)

    def update(done: int, _total: int) -> None:
        bar.n = done
        bar.refresh()

    return bar, update


def cmd_transform(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    _require(settings, "source", "source_images", "target", "out", "method")
    _check_readable(settings["source"], "source annotations")
    _check_readable(settings["source_images"], "source images")
    _check_readable(settings["target"], "target annotations")
    if settings["workers"] < 1:
        raise ConfigError(f"worker count must be >= 1, got {settings['workers']}")
    cfg = _pipeline_config(settings)

    source_role = ROLE_SOURCE if cfg.method.needs_masks else ROLE_TARGET
    source = load_index(settings["source"], role=source_role, drop_ignored=settings["drop_ignored"])
    target = load_index(settings["target"], role=ROLE_TARGET, drop_ignored=settings["drop_ignored"])

    out_dir = Path(settings["out"])
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)

    bar, update = _progress_bar(len(source.images))
    try:
        result = transform_dataset(
            source,
            target,
            cfg,
            images=settings["source_images"],
            workers=settings["workers"],
            sink=lambda rec, raster: save_image(raster, img_dir / rec.file_name),
            progress=update,
        )
    finally:
        bar.close()

    ann_path = out_dir / "annotations.json"
    ann_path.write_text(json.dumps(index_to_json_dict(result.index)), encoding="utf-8")
    report_path = Path(settings["report"] or out_dir / "report.json")
    result.report.write(report_path)
    result.report.before.write_csv(out_dir / "histogram_before.csv")
    if result.report.after is not None:
        result.report.after.write_csv(out_dir / "histogram_after.csv")

    n_err = len(result.report.errors)
    print(
        f"transformed {len(result.index.images)} images "
        f"({result.report.dropped_instances} instances dropped, {n_err} image errors); "
        f"report: {report_path}",
        file=sys.stderr,
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    _require(settings, "source", "target")
    _check_readable(settings["source"], "source annotations")
    _check_readable(settings["target"], "target annotations")
    source = load_index(settings["source"], role=ROLE_TARGET, drop_ignored=settings["drop_ignored"])
    target = load_index(settings["target"], role=ROLE_TARGET, drop_ignored=settings["drop_ignored"])
    div = compare_indices(source, target, settings["bins"], settings["layout"])

    payload = json.dumps(div.to_dict(), sort_keys=True, indent=2)
    print(payload)
    if settings["report"]:
        path = Path(settings["report"])
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(payload + "\n", encoding="utf-8")
    if getattr(args, "csv", None):
        div.write_csv(args.csv)
    return 0


def _divergence_for_plot(args: argparse.Namespace, settings: dict) -> DivergenceReport:
    if getattr(args, "from_report", None):
        _check_readable(args.from_report, "report")
        data = json.loads(Path(args.from_report).read_text(encoding="utf-8"))
        if "boundaries" in data:
            return DivergenceReport.from_dict(data)
        which = getattr(args, "which", None) or ("after" if data.get("after") else "before")
        section = data.get(which)
        if not section:
            raise ConfigError(f"report has no {which!r} section to plot")
        return DivergenceReport.from_dict(section)
    _require(settings, "source", "target")
    _check_readable(settings["source"], "source annotations")
    _check_readable(settings["target"], "target annotations")
    source = load_index(settings["source"], role=ROLE_TARGET, drop_ignored=settings["drop_ignored"])
    target = load_index(settings["target"], role=ROLE_TARGET, drop_ignored=settings["drop_ignored"])
    return compare_indices(source, target, settings["bins"], settings["layout"])


def cmd_plot(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    div = _divergence_for_plot(args, settings)
    out = getattr(args, "svg_out", None) or settings["out"]
    if not out:
        raise ConfigError("missing required settings: --svg-out")
    svg = render_divergence_svg(div)
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    print(f"wrote {path}", file=sys.stderr)
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="YAML config file; flags override its keys")
    sub.add_argument("--source", help="source annotation JSON")
    sub.add_argument("--target", help="target annotation JSON")
    sub.add_argument("--bins", type=int, help="histogram bin count (default 100)")
    sub.add_argument(
        "--layout",
        choices=["equal-width", "equal-frequency"],
        help="histogram bin layout (default equal-width)",
    )
    sub.add_argument(
        "--drop-ignored",
        action="store_const",
        const=True,
        dest="drop_ignored",
        help="drop annotations flagged iscrowd/ignore at load",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scalematch",
        description="Rewrite a segmentation dataset so its object-size distribution matches a target's.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transform", help="transform a source dataset toward a target size distribution")
    _add_common(t)
    t.add_argument("--source-images", dest="source_images", help="directory with source image files")
    t.add_argument("--out", help="output dataset directory")
    t.add_argument(
        "--method",
        choices=["rsm", "msm", "rsm+", "msm+", "cp", "cp+"],
        help="size matching method",
    )
    t.add_argument("--psi-p", dest="psi_p", type=float, help="probability of keeping the inpainted background (default 0.4)")
    t.add_argument("--tail-quantile", dest="tail_quantile", type=float, help="target tail trim quantile (default 0.99)")
    t.add_argument("--seed", type=int, help="RNG seed (default 0)")
    t.add_argument("--workers", type=int, help="parallel image workers (default 1)")
    t.add_argument("--report", help="report JSON path (default <out>/report.json)")
    t.add_argument("--matting-radius", dest="matting_radius", type=int, help="feathering radius in px (default 4)")
    t.add_argument("--matting-eps", dest="matting_eps", type=float, help="feathering regularization (default 1e-4)")
    t.add_argument("--inpaint-max-iters", dest="inpaint_max_iters", type=int, help="diffusion sweep cap (default 500)")
    t.add_argument("--inpaint-tol", dest="inpaint_tol", type=float, help="diffusion stop tolerance (default 0.1)")
    t.set_defaults(func=cmd_transform)

    r = sub.add_parser("report", help="divergence report between two datasets (no image IO)")
    _add_common(r)
    r.add_argument("--report", help="also write the report JSON here")
    r.add_argument("--csv", help="also write the binned histogram CSV here")
    r.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="render a histogram comparison as SVG")
    _add_common(p)
    p.add_argument("--from-report", dest="from_report", help="plot a report JSON instead of comparing indices")
    p.add_argument("--which", choices=["before", "after"], help="which report section to plot")
    p.add_argument("--svg-out", dest="svg_out", help="output SVG path")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScaleMatchError as e:
        print(f"scalematch: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"scalematch: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
