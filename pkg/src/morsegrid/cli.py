"""``morsegrid`` command line: convert, persist, render, predict, pipeline.

Exit codes: 0 success, 2 input error, 3 internal consistency failure,
4 insufficient data for prediction.
"""

from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from morsegrid import color
from morsegrid.cubical import build_complex
from morsegrid.errors import AcyclicityViolation, IncompleteSurjection, InsufficientData, MorsegridError
from morsegrid.export import parse_txt, render_diagram, write_csv, write_txt
from morsegrid.image_io import GrayImage, RgbImage, read_any, write_pgm
from morsegrid.morse import TIEBREAKS, build_gradient, build_morse_complex
from morsegrid.persistence import compute_persistence, oracle_persistence
from morsegrid.predict import format_report, run_prediction, summary_line

log = logging.getLogger("morsegrid")

EXIT_INPUT, EXIT_INTERNAL, EXIT_DATA = 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def atomic_write(path: Path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


def expand_inputs(paths, pattern=None) -> list[Path]:
    out = [Path(p) for p in paths]
    if pattern:
        matches = sorted(glob.glob(pattern))
        if not matches:
            raise CliError(f"--glob {pattern!r} matched no files")
        out += [Path(m) for m in matches]
    if not out:
        raise CliError("no input files given")
    return out


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("MORSEGRID_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def run_batch(fn, items):
    """Apply fn to every item, concurrently; results in input order."""
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# option parsing helpers


def _triple(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3 or not all(0 <= p <= 255 for p in parts):
        raise argparse.ArgumentTypeError(f"expected r,g,b with channels in 0..255, got {text!r}")
    return tuple(parts)


def _rect(text: str) -> tuple[int, int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected x,y,w,h, got {text!r}")
    return tuple(parts)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def conversion_method(args):
    name = args.method
    if name == "average":
        return color.Average()
    if name == "luminosity":
        return color.Luminosity()
    if name == "weighted":
        if not args.weights:
            raise CliError("--method weighted needs --weights wr,wg,wb")
        try:
            return color.Weighted.parse(args.weights)
        except (ValueError, ZeroDivisionError) as exc:
            raise CliError(f"bad --weights: {exc}") from None
    if name == "surjection":
        if not args.table:
            raise CliError("--method surjection needs --table FILE")
        try:
            return color.Surjection.from_csv(read_bytes(args.table).decode("utf-8"))
        except ValueError as exc:
            raise CliError(f"bad surjection table {args.table}: {exc}") from None
    raise CliError(f"unknown method {name!r}")


def preprocess_spec(args) -> color.PreprocessSpec:
    return color.PreprocessSpec(
        crop=args.crop,
        background_colors=frozenset(args.background or ()),
        tolerance=args.tolerance,
        saturate=_bool(args.saturate),
        contrast_stretch=_bool(args.contrast),
    )


def load_gray(path, args=None) -> GrayImage:
    img = read_any(read_bytes(path))
    if isinstance(img, RgbImage):
        if args is None or not getattr(args, "method", None):
            raise CliError(f"{path} is an RGB image; convert it first or use the pipeline command")
        img = color.to_gray(color.preprocess(img, preprocess_spec(args)), conversion_method(args))
    if getattr(args, "superlevel", False):
        img = GrayImage(255 - img.values.astype(np.int64))
    return img


def diagram_for(img: GrayImage, args):
    K = build_complex(img)
    D = compute_persistence(build_morse_complex(build_gradient(K, args.tiebreak)))
    if args.oracle:
        O = oracle_persistence(K, args.oracle_max_cells)
        if O.multiset() != D.multiset():
            raise CliError("Morse-reduced diagram disagrees with the full-reduction oracle", EXIT_INTERNAL)
    return D


# --------------------------------------------------------------------------
# commands


def cmd_convert(args) -> int:
    rgb = read_any(read_bytes(args.input))
    if isinstance(rgb, GrayImage):
        rgb = RgbImage(np.repeat(rgb.values[..., None], 3, axis=2))
    rgb = color.preprocess(rgb, preprocess_spec(args))
    method = conversion_method(args)
    gray = color.to_gray(rgb, method)
    out = Path(args.output or Path(args.input).with_suffix(".pgm"))
    atomic_write(out, write_pgm(gray, args.mode))
    print(f"method={method.name} output={out}")
    shown = [(method.name, gray)]
    for ref in (color.Average(), color.Luminosity()):
        if ref.name != method.name:
            shown.append((ref.name, color.to_gray(rgb, ref)))
    for name, g in shown:
        s = color.histogram_summary(g)
        print(f"  {name:<11} min={s['min']} max={s['max']} mean={s['mean']} distinct={s['distinct']}")
    return 0


def _persist_one(path: Path, args):
    img = load_gray(path, args)
    D = diagram_for(img, args)
    outdir = Path(args.outdir) if args.outdir else path.parent
    txt = outdir / f"{path.stem}.txt"
    csv_path = outdir / f"{path.stem}.csv"
    atomic_write(txt, write_txt(D, keep_zero=args.keep_zero))
    atomic_write(csv_path, write_csv(D, include_essential=args.include_essential, keep_zero=args.keep_zero))
    return path, D, txt, csv_path


def cmd_persist(args) -> int:
    inputs = expand_inputs(args.input, args.glob)
    for path, D, txt, csv_path in run_batch(lambda p: _persist_one(p, args), inputs):
        print(f"{path}: {len(D.finite())} finite pairs, {len(D.essential())} essential -> {txt}, {csv_path}")
    return 0


def cmd_render(args) -> int:
    try:
        D = parse_txt(read_bytes(args.input))
    except UnicodeDecodeError:
        raise CliError(f"{args.input} is not a text diagram") from None
    out = Path(args.output or Path(args.input).with_suffix(".svg"))
    atomic_write(out, render_diagram(D, args.style, title=args.title or Path(args.input).stem, keep_zero=args.keep_zero))
    print(f"{args.style} plot -> {out}")
    return 0


def cmd_predict(args) -> int:
    inputs = expand_inputs(args.input, args.glob)
    inputs = sorted(set(inputs), key=lambda p: str(p))
    if args.dates:
        dates = [int(d) for d in args.dates.split(",")]
        if len(dates) != len(inputs):
            raise CliError(f"--dates lists {len(dates)} indices for {len(inputs)} files")
    else:
        dates = list(range(1, len(inputs) + 1))
    files = [(d, read_bytes(p), str(p)) for d, p in zip(dates, inputs)]
    try:
        ratio = Fraction(args.outlier_ratio)
    except (ValueError, ZeroDivisionError):
        raise CliError(f"bad --outlier-ratio {args.outlier_ratio!r}") from None
    S, pred, actual, report = run_prediction(files, seed=args.seed, degree=args.degree, outlier_ratio=ratio)
    text = format_report(pred, actual, report, S.dropped)
    if args.output:
        atomic_write(Path(args.output), text.encode("ascii"))
    else:
        sys.stdout.write(text)
    for date, reason in S.dropped:
        log.warning("dropped date %d: %s", date, reason)
    print(summary_line(pred, report, S.dropped))
    return 0


def _pipeline_one(path: Path, args):
    raw = read_any(read_bytes(path))
    if isinstance(raw, RgbImage):
        gray = color.to_gray(color.preprocess(raw, preprocess_spec(args)), conversion_method(args))
    else:
        gray = raw
    if args.superlevel:
        gray = GrayImage(255 - gray.values.astype(np.int64))
    outdir = Path(args.outdir)
    stem = path.stem
    atomic_write(outdir / f"{stem}.pgm", write_pgm(gray, "binary"))
    D = diagram_for(gray, args)
    atomic_write(outdir / f"{stem}.txt", write_txt(D, keep_zero=args.keep_zero))
    atomic_write(outdir / f"{stem}.csv", write_csv(D, include_essential=args.include_essential, keep_zero=args.keep_zero))
    atomic_write(outdir / f"{stem}.svg", render_diagram(D, args.style, title=stem, keep_zero=args.keep_zero))
    return path, D


def cmd_pipeline(args) -> int:
    inputs = expand_inputs(args.input, args.glob)
    for path, D in run_batch(lambda p: _pipeline_one(p, args), inputs):
        print(f"{path}: {len(D.finite())} finite pairs, {len(D.essential())} essential -> {args.outdir}")
    return 0


# --------------------------------------------------------------------------
# parser


def _add_conversion(p):
    p.add_argument("--method", choices=["average", "luminosity", "weighted", "surjection"], default="luminosity",
                   help="RGB to gray conversion")
    p.add_argument("--weights", default=None, help="wr,wg,wb for --method weighted; must sum to 1")
    p.add_argument("--table", default=None, help="r,g,b,gray CSV table for --method surjection")
    p.add_argument("--crop", type=_rect, default=None, help="crop rectangle x,y,w,h before conversion")
    p.add_argument("--background", type=_triple, action="append", default=None,
                   help="r,g,b background color to paint black (repeatable)")
    p.add_argument("--tolerance", type=int, default=0, help="per-channel tolerance for --background")
    p.add_argument("--saturate", action="store_true", default=False, help="push HSV saturation to the maximum")
    p.add_argument("--contrast", action="store_true", default=False, help="stretch every channel to 0..255")


def _add_analysis(p):
    p.add_argument("--superlevel", action="store_true", default=False,
                   help="invert the image so bright regions enter first")
    p.add_argument("--tiebreak", choices=TIEBREAKS, default="row", help="pixel order among equal gray values")
    p.add_argument("--keep-zero", action="store_true", default=False, help="export zero-length pairs")
    p.add_argument("--include-essential", action="store_true", default=False,
                   help="write essential classes (death inf) to the CSV")
    p.add_argument("--oracle", action="store_true", default=False,
                   help="cross-check against full boundary-matrix reduction; exit 3 on mismatch")
    p.add_argument("--oracle-max-cells", type=int, default=10_000, help="cell bound for --oracle")
    p.add_argument("--glob", default=None, help="process every file matching this pattern")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key=value file supplying defaults for any flag")
    common.add_argument("-v", "--verbose", action="store_true", default=False, help="debug logging")

    parser = argparse.ArgumentParser(prog="morsegrid", description=__doc__.splitlines()[0], formatter_class=fmt,
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="RGB image to grayscale PGM", formatter_class=fmt, parents=[common])
    p.add_argument("input", help="PPM, PNG or PGM input")
    p.add_argument("-o", "--output", default=None, help="output PGM; None means the input path with .pgm")
    p.add_argument("--mode", choices=["binary", "ascii"], default="binary", help="PGM flavor (P5 or P2)")
    _add_conversion(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("persist", help="persistence diagram of a grayscale PGM", formatter_class=fmt,
                       parents=[common])
    p.add_argument("input", nargs="*", help="PGM inputs")
    p.add_argument("-o", "--outdir", default=None, help="output directory; None writes next to each input")
    _add_analysis(p)
    p.set_defaults(func=cmd_persist)

    p = sub.add_parser("render", help="SVG barcode or scatter plot of a .txt diagram", formatter_class=fmt,
                       parents=[common])
    p.add_argument("input", help="diagram .txt written by persist")
    p.add_argument("-o", "--output", default=None, help="output SVG; None means the input path with .svg")
    p.add_argument("--style", choices=["barcode", "scatter"], default="barcode", help="plot style")
    p.add_argument("--title", default=None, help="plot title; None uses the input file stem")
    p.add_argument("--keep-zero", action="store_true", default=False, help="draw zero-length pairs")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("predict", help="extrapolate lifespans from dated diagram CSVs", formatter_class=fmt,
                       parents=[common])
    p.add_argument("input", nargs="*", help="CSV files, one per date, ordered by file name")
    p.add_argument("--glob", default=None, help="add every CSV matching this pattern")
    p.add_argument("--dates", default=None, help="comma separated date indices in file-name order; None numbers files 1..n")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (PCG64)")
    p.add_argument("--degree", type=int, default=1, help="polynomial degree of the per-index fit")
    p.add_argument("--outlier-ratio", default="1/2", help="drop dates with fewer records than this times the median")
    p.add_argument("-o", "--output", default=None, help="report CSV; None prints to stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("pipeline", help="convert, persist and render in one pass", formatter_class=fmt,
                       parents=[common])
    p.add_argument("input", nargs="*", help="RGB or PGM inputs")
    p.add_argument("-o", "--outdir", default="out", help="output directory")
    p.add_argument("--style", choices=["barcode", "scatter"], default="barcode", help="plot style")
    _add_conversion(p)
    _add_analysis(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def read_config(path) -> dict:
    out = {}
    for lineno, line in enumerate(read_bytes(path).decode("utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser, argv, cfg):
    """Re-parse with config values as defaults, so explicit flags still win."""
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise CliError(f"config key {key!r} is not an option of {args.command}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = _bool(value)
        elif isinstance(action, argparse._AppendAction):
            defaults[key] = [action.type(v) if action.type else v for v in value.split(";")]
        elif action.type is not None:
            try:
                defaults[key] = action.type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise CliError(f"config key {key!r}: {exc}") from None
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, argv, read_config(args.config))
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InsufficientData as exc:
        print(f"error: insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AcyclicityViolation as exc:
        print(f"error: internal: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except IncompleteSurjection as exc:
        print(f"error: IncompleteSurjection: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MorsegridError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
