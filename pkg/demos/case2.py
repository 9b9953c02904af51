# Case II: output tracking of a non-smooth and a smooth desired trajectory.
# Usage: python3 demos/case2.py [out_dir] [--plot]
import sys

from uioinv.experiment import _plain, run_demo

args = [a for a in sys.argv[1:] if a != "--plot"]
out = args[0] if args else "demo_out/case2"
reports = run_demo("case2", out, plot="--plot" in sys.argv)

for name, rep in reports.items():
    print(("PASS" if rep.passed else "FAIL"), name)
    for key, value in sorted(_plain(rep.metrics).items()):
        print(f"    {key}: {value}")
