"""Discrete-Morse-reduced cubical persistent homology for RGB images."""

from morsegrid.color import (
    Average,
    Luminosity,
    PreprocessSpec,
    Surjection,
    Weighted,
    compare_methods,
    preprocess,
    to_gray,
)
from morsegrid.cubical import CubicalComplex, build_complex
from morsegrid.export import parse_csv, parse_txt, render_diagram, write_csv, write_txt
from morsegrid.image_io import GrayImage, RgbImage, read_any, read_pgm, read_rgb, write_pgm, write_ppm
from morsegrid.morse import GradientField, MorseComplex, build_gradient, build_morse_complex
from morsegrid.persistence import (
    PersistenceDiagram,
    PersistencePair,
    betti_numbers,
    bottleneck_distance,
    compute_persistence,
    oracle_persistence,
)

__version__ = "0.1.0"


def diagram_of(img: GrayImage, tiebreak: str = "row") -> PersistenceDiagram:
    """Grayscale image -> persistence diagram through the Morse-reduced route."""
    return compute_persistence(build_morse_complex(build_gradient(build_complex(img), tiebreak)))


__all__ = [
    "Average",
    "CubicalComplex",
    "GradientField",
    "GrayImage",
    "Luminosity",
    "MorseComplex",
    "PersistenceDiagram",
    "PersistencePair",
    "PreprocessSpec",
    "RgbImage",
    "Surjection",
    "Weighted",
    "betti_numbers",
    "bottleneck_distance",
    "build_complex",
    "build_gradient",
    "build_morse_complex",
    "compare_methods",
    "compute_persistence",
    "diagram_of",
    "oracle_persistence",
    "parse_csv",
    "parse_txt",
    "preprocess",
    "read_any",
    "read_pgm",
    "read_rgb",
    "render_diagram",
    "to_gray",
    "write_csv",
    "write_pgm",
    "write_ppm",
    "write_txt",
]
