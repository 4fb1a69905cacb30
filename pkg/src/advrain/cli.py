"""Command-line front end: attack, render, eval, sweep, baseline.

A run config is a JSON object:

    {
      "dataset_dir": "data/",          # per-class subdirectories of PNGs
      "output_dir": "out/",
      "oracle": {"mode": "synthetic", "rect": [8,8,16,16], "threshold": 0.5}
                | {"mode": "http", "endpoint": "http://...", "class_count": 2},
      "search": {... SearchConfig fields ...}
    }

Class labels come from dataset_dir/labels.json ({"classname": index});
without it, sorted directory names are enumerated from 0. All outputs
are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

from .errors import AdvRainError, ConfigInvalid, OracleError
from .imagecore import load_image, save_image
from .metrics import EvalReport, evaluate, sweep_csv
from .optimizer import SearchConfig, random_baseline, random_search
from .oracle import OracleConfig
from .render import load_pattern, pattern_to_dict, render

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3


@dataclasses.dataclass(frozen=True)
class RunConfig:
    dataset_dir: Path
    output_dir: Path
    oracle: OracleConfig
    search: SearchConfig

    @classmethod
    def load(cls, path, seed_override=None) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigInvalid(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a JSON object")
        unknown = set(data) - {"dataset_dir", "output_dir", "oracle", "search"}
        if unknown:
            raise ConfigInvalid(f"unknown config fields: {sorted(unknown)}")
        for key in ("dataset_dir", "output_dir", "oracle"):
            if key not in data:
                raise ConfigInvalid(f"config is missing {key!r}")
        base = Path(path).resolve().parent
        dataset_dir = (base / data["dataset_dir"]).resolve()
        output_dir = (base / data["output_dir"]).resolve()
        if not dataset_dir.is_dir():
            raise ConfigInvalid(f"dataset_dir does not exist: {dataset_dir}")
        oracle_cfg = OracleConfig.from_dict(data["oracle"])
        endpoint = os.environ.get("ADVRAIN_ORACLE_URL")
        if endpoint:
            oracle_cfg = dataclasses.replace(oracle_cfg, mode="http", endpoint=endpoint)
        search = SearchConfig.from_dict(data.get("search", {}))
        if seed_override is not None:
            search = dataclasses.replace(search, rng_seed=seed_override)
        return cls(dataset_dir=dataset_dir, output_dir=output_dir,
                   oracle=oracle_cfg, search=search)


def load_dataset(dataset_dir: Path):
    """Return a list of (class_name, class_index, images, labels)."""
    labels_path = dataset_dir / "labels.json"
    if labels_path.exists():
        with open(labels_path) as fh:
            try:
                index = {str(k): int(v) for k, v in json.load(fh).items()}
            except (ValueError, AttributeError) as exc:
                raise ConfigInvalid(f"invalid labels.json: {exc}")
    else:
        names = sorted(p.name for p in dataset_dir.iterdir() if p.is_dir())
        index = {name: i for i, name in enumerate(names)}
    classes = []
    for name in sorted(index):
        class_dir = dataset_dir / name
        if not class_dir.is_dir():
            raise ConfigInvalid(f"labels.json names missing directory {name!r}")
        paths = sorted(class_dir.glob("*.png"))
        if not paths:
            raise ConfigInvalid(f"no PNG files in {class_dir}")
        images = [load_image(p) for p in paths]
        classes.append((name, index[name], images, [index[name]] * len(images)))
    if not classes:
        raise ConfigInvalid(f"no class subdirectories in {dataset_dir}")
    return classes


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _run_attack(config: RunConfig, search_fn, result_name: str) -> None:
    for name, class_index, images, labels in load_dataset(config.dataset_dir):
        search = dataclasses.replace(config.search, target_class=class_index)
        oracle = config.oracle.build()
        result = search_fn(images, labels, oracle, search)
        class_dir = config.output_dir / name
        atomic_write_text(class_dir / "pattern.json",
                          dump_json_pattern(result.best_pattern))
        atomic_write_text(class_dir / result_name,
                          dump_json(result.to_dict(search)))
        print(f"{name}: clean_acc={result.clean_accuracy:.3f} "
              f"adv_acc={result.adversarial_accuracy:.3f} "
              f"evals={result.evaluations_used}")


def dump_json_pattern(pattern) -> str:
    return dump_json(pattern_to_dict(pattern))


def cmd_attack(args) -> int:
    config = RunConfig.load(args.config, seed_override=args.seed)
    _run_attack(config, random_search, "result.json")
    return EXIT_OK


def cmd_baseline(args) -> int:
    config = RunConfig.load(args.config, seed_override=args.seed)
    _run_attack(config, random_baseline, "baseline_result.json")
    return EXIT_OK


def cmd_render(args) -> int:
    if not Path(args.pattern).exists():
        raise ConfigInvalid(f"pattern file not found: {args.pattern}")
    if not Path(args.image).exists():
        raise ConfigInvalid(f"image file not found: {args.image}")
    pattern = load_pattern(args.pattern)
    image = load_image(args.image)
    if (pattern.image_height, pattern.image_width) != (image.height, image.width):
        raise ConfigInvalid(
            f"pattern is for {pattern.image_width}x{pattern.image_height} but "
            f"image is {image.width}x{image.height}"
        )
    out = render(image, pattern)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_image(out, args.out)
    return EXIT_OK


def _evaluate_dataset(config: RunConfig, pattern) -> dict:
    """Per-class evaluation plus count-weighted aggregate totals."""
    total = correct_clean = correct_adv = initially_correct = flipped = 0
    ssim_sum = 0.0
    per_class = {}
    for name, class_index, images, labels in load_dataset(config.dataset_dir):
        oracle = config.oracle.build()
        report = evaluate(images, labels, pattern, oracle)
        count = len(images)
        per_class[name] = report.to_dict()
        total += count
        correct_clean += round(report.clean_accuracy * count)
        correct_adv += round(report.overall_accuracy * count)
        init = round(report.clean_accuracy * count)
        initially_correct += init
        flipped += round(report.attack_success_rate * init)
        ssim_sum += report.mean_ssim * count
    return {
        "clean_accuracy": correct_clean / total,
        "adversarial_accuracy": correct_adv / total,
        "attack_success_rate": flipped / initially_correct if initially_correct else 0.0,
        "mean_ssim": ssim_sum / total,
        "per_class": per_class,
    }


def cmd_eval(args) -> int:
    config = RunConfig.load(args.config, seed_override=args.seed)
    if not Path(args.pattern).exists():
        raise ConfigInvalid(f"pattern file not found: {args.pattern}")
    pattern = load_pattern(args.pattern)
    summary = _evaluate_dataset(config, pattern)
    out_path = Path(args.out) if args.out else config.output_dir / "eval_report.json"
    atomic_write_text(out_path, dump_json(summary))
    print(f"clean_acc={summary['clean_accuracy']:.3f} "
          f"adv_acc={summary['adversarial_accuracy']:.3f} "
          f"asr={summary['attack_success_rate']:.3f} "
          f"mean_ssim={summary['mean_ssim']:.3f}")
    return EXIT_OK


def _parse_number_list(text: str, kind, flag: str):
    try:
        values = [kind(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigInvalid(f"{flag} expects a comma-separated list, got {text!r}")
    if not values:
        raise ConfigInvalid(f"{flag} must name at least one value")
    return values


def cmd_sweep(args) -> int:
    config = RunConfig.load(args.config, seed_override=args.seed)
    drops = _parse_number_list(args.drops, int, "--drops")
    radii = _parse_number_list(args.radii, float, "--radii")
    rows = []
    for n in drops:
        for r in radii:
            cell_search = dataclasses.replace(config.search, drop_count=n, drop_radius=r)
            total = correct_clean = correct_adv = initially_correct = flipped = 0
            ssim_sum = 0.0
            for name, class_index, images, labels in load_dataset(config.dataset_dir):
                search = dataclasses.replace(cell_search, target_class=class_index)
                oracle = config.oracle.build()
                result = random_search(images, labels, oracle, search)
                report = evaluate(images, labels, result.best_pattern, oracle)
                count = len(images)
                total += count
                correct_clean += round(report.clean_accuracy * count)
                correct_adv += round(report.overall_accuracy * count)
                init = round(report.clean_accuracy * count)
                initially_correct += init
                flipped += round(report.attack_success_rate * init)
                ssim_sum += report.mean_ssim * count
            rows.append((n, r, EvalReport(
                overall_accuracy=correct_adv / total,
                clean_accuracy=correct_clean / total,
                attack_success_rate=flipped / initially_correct if initially_correct else 0.0,
                per_class={},
                mean_ssim=ssim_sum / total,
            )))
            print(f"n={n} r={r}: adv_acc={rows[-1][2].overall_accuracy:.3f}")
    out_path = Path(args.out) if args.out else config.output_dir / "sweep.csv"
    atomic_write_text(out_path, sweep_csv(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advrain",
        description="Raindrop adversarial perturbations: attack, render, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="override search.rng_seed")

    p = sub.add_parser("attack", help="saliency-guided search per target class")
    add_common(p)
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("baseline", help="random-placement baseline search")
    add_common(p)
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("render", help="apply a saved pattern to one image")
    p.add_argument("--pattern", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("eval", help="evaluate a saved pattern on the dataset")
    add_common(p)
    p.add_argument("--pattern", required=True)
    p.add_argument("--out", default=None, help="report path (default: output_dir/eval_report.json)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="attack+eval over a (drops x radii) grid")
    add_common(p)
    p.add_argument("--drops", required=True, help="comma-separated drop counts")
    p.add_argument("--radii", required=True, help="comma-separated radii")
    p.add_argument("--out", default=None, help="CSV path (default: output_dir/sweep.csv)")
    p.set_defaults(fn=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (AdvRainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
