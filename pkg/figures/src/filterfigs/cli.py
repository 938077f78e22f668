"""Script entry point: render a JSON figure recipe to an image file."""

import argparse
import sys

from .render import RecipeError, render

EXIT_OK = 0
EXIT_CONFIG = 2


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="filterfigs",
        description="Render a figure from results-table CSVs using a JSON "
                    "recipe (kind, output, series, optional overlays).")
    parser.add_argument("recipe", help="path to the JSON recipe file")
    args = parser.parse_args(argv)
    try:
        out = render(args.recipe)
    except (RecipeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
