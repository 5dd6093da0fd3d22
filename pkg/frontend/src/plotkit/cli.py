"""Command line entry: `plot conv ...` and `plot mesh ...`."""

import argparse
import sys

from .csvdata import CsvError
from .figures import PlotSpec, plot_convergence, plot_mesh
from .meshfile import MeshFileError


def build_parser():
    parser = argparse.ArgumentParser(prog="plot")
    sub = parser.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("conv", help="log-log convergence figure")
    pc.add_argument("--csv", action="append", required=True,
                    help="report.csv path; repeat to overlay files")
    pc.add_argument("--x", choices=["h", "ndof"], default="h")
    pc.add_argument("--cols", default="err_pair_H1",
                    help="comma-separated error columns")
    pc.add_argument("--slopes", default="",
                    help="comma-separated reference rates, e.g. 1,2")
    pc.add_argument("--out", default="fig.svg")

    pm = sub.add_parser("mesh", help="mesh wireframe figure")
    pm.add_argument("--in", dest="infile", required=True)
    pm.add_argument("--out", default="mesh.svg")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "conv":
            slopes = [float(s) for s in args.slopes.split(",") if s]
            spec = PlotSpec(csv_paths=args.csv, x_axis=args.x,
                            columns=[c for c in args.cols.split(",") if c],
                            out=args.out, slopes=slopes)
            rates = plot_convergence(spec)
            for (path, col), rate in rates.items():
                print("%s:%s rate %.4f" % (path, col, rate))
        else:
            count = plot_mesh(args.infile, args.out)
            print("rendered %d triangles to %s" % (count, args.out))
    except (CsvError, MeshFileError, ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
