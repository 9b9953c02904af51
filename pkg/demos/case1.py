# Case I: reconstruction of a scalar NMP plant, a WarmStart step run and the bound curve.
# Usage: python3 demos/case1.py [out_dir] [--plot]
import sys

from uioinv.experiment import _plain, run_demo

args = [a for a in sys.argv[1:] if a != "--plot"]
out = args[0] if args else "demo_out/case1"
reports = run_demo("case1", out, plot="--plot" in sys.argv)

for name, rep in reports.items():
    print(("PASS" if rep.passed else "FAIL"), name)
    for key, value in sorted(_plain(rep.metrics).items()):
        print(f"    {key}: {value}")
