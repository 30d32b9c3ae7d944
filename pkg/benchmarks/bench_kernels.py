"""Compare the compiled and numpy raster kernels, then time a full solve.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from planelayout import kernels
from planelayout.kernels import get_backend


def timeit(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(rng, W=320, H=240):
    polys = []
    for _ in range(40):
        c = rng.uniform([0, 0], [W, H])
        ang = np.sort(rng.uniform(0, 2 * np.pi, int(rng.integers(3, 9))))
        r = rng.uniform(20, 200)
        polys.append((c[0] + r * np.cos(ang), c[1] + r * np.sin(ang)))
    normals = rng.normal(size=(40, 3))
    normals[:, 2] = np.abs(normals[:, 2]) + 0.5
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    depth = rng.uniform(0.5, 5, (H, W))
    depth[rng.random((H, W)) < 0.3] = 0
    return polys, normals, depth


def bench(mod, polys, normals, hole_depth, repeat, W=320, H=240):
    def fill():
        for xs, ys in polys:
            mod.fill_polygon(xs, ys, H, W)

    def zbuf():
        d = np.zeros((H, W))
        lab = np.full((H, W), -1, dtype=np.int32)
        for i, (xs, ys) in enumerate(polys):
            mod.zbuffer_polygon(xs, ys, normals[i], 2.0, 160.0, 160.0, 160.0, 120.0, i, d, lab)
        return d, lab

    def holes():
        mod.min_fill_pass(hole_depth, 2)

    return {"fill_polygon x40": timeit(fill, repeat), "zbuffer_polygon x40": timeit(zbuf, repeat),
            "min_fill_pass": timeit(holes, repeat)}, zbuf()


def end_to_end(backend):
    env = dict(os.environ, PLANELAYOUT_PURE_PYTHON="1" if backend == "python" else "0")
    code = ("import time; from planelayout.synth import generate_scene, preset_spec;"
            "from planelayout.pipeline import reconstruct;"
            "s,_=generate_scene(preset_spec('tshape')); t=time.perf_counter(); reconstruct(s);"
            "print(time.perf_counter()-t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-e2e", action="store_true", help="skip the end-to-end tshape timing")
    args = ap.parse_args()
    try:
        get_backend("cython")
    except ImportError:
        sys.exit("compiled kernels not built; run `pip install -e . --no-build-isolation` first")

    polys, normals, depth = workloads(np.random.default_rng(args.seed))
    res, out = {}, {}
    for name in ("python", "cython"):
        res[name], out[name] = bench(get_backend(name), polys, normals, depth, args.repeat)
    same = all(np.array_equal(a, b) for a, b in zip(out["python"], out["cython"]))

    print(f"default backend: {kernels.BACKEND}")
    print(f"{'kernel':<22}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for k in res["python"]:
        p, c = res["python"][k] * 1e3, res["cython"][k] * 1e3
        print(f"{k:<22}{p:>12.3f}{c:>12.3f}{p / c:>9.1f}x")
    print(f"z-buffer outputs bit-identical: {same}")
    if not args.skip_e2e:
        p, c = end_to_end("python"), end_to_end("cython")
        print(f"{'tshape reconstruct':<22}{p * 1e3:>12.1f}{c * 1e3:>12.1f}{p / c:>9.1f}x")


if __name__ == "__main__":
    main()
