"""Command line: ``cavityfigs FIGSPEC INPUT_DIR OUTPUT``.

FIGSPEC is one of fig1, fig2, fig3, fig4; INPUT_DIR holds the simulator's
CSV outputs; OUTPUT is the image path (.svg or .png).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import RENDERERS, RenderError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cavityfigs", description=__doc__)
    parser.add_argument("fig_spec", choices=sorted(RENDERERS))
    parser.add_argument("input_dir", type=Path)
    parser.add_argument("output", type=Path)
    args = parser.parse_args(argv)
    try:
        info = render(args.fig_spec, args.input_dir, args.output)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.fig_spec}: wrote {args.output} ({info})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
