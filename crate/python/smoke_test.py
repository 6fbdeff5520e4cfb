"""Smoke test for the Python bindings.

Uses an installed `morphoscope` module if there is one, otherwise loads the
extension from cargo's target directory (build it with
`cargo build -p morphoscope-py --release` first).
"""

import importlib.util
import math
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import morphoscope

        return morphoscope
    except ImportError:
        pass
    suffix = {"darwin": "dylib", "win32": "dll"}.get(sys.platform, "so")
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / f"libmorphoscope_py.{suffix}"
        if lib.exists():
            spec = importlib.util.spec_from_file_location("morphoscope", lib)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("morphoscope extension not found; run `cargo build -p morphoscope-py --release`")


def main():
    ms = load()
    gen = ms.PhantomGenerator(size=32, seed=3)
    young, seg = gen.reference(60.0)
    old, _ = gen.reference(75.0)
    assert young.dims == [32, 32, 32]
    assert seg.count(4) > 0

    res = ms.register(young, old, mask=seg)
    assert res.final_lncc > 0.9, res.final_lncc
    assert res.min_jacobian > 0.0

    aging = ms.aging_field(young, old, 60.0, 75.0, mask=seg)
    assert math.isclose(aging.gap_years, 15.0)
    a, d = ms.regional_scores(aging.v0.scaled(4.0), aging, seg, "ventricles")
    assert abs(a - 4.0) < 1e-9 and d < 1e-9, (a, d)

    t, p = ms.t_test([1.0, 2.0, 3.0], [3.0, 4.0, 5.0])
    assert abs(t + 2.449) < 1e-3 and abs(p - 0.0705) < 1e-3
    assert ms.cohens_d([1.0, 2.0, 3.0], [3.0, 4.0, 5.0]) == (-2.0, "very_large")

    assert ms.efc(ms.ScalarVolume([4, 4, 4], [0.5] * 64)) > 0.999
    with tempfile.TemporaryDirectory() as tmp:
        path = str(pathlib.Path(tmp) / "young.nii")
        young.write(path)
        assert ms.ScalarVolume.read(path).dims == young.dims
        res.svf.write(str(pathlib.Path(tmp) / "v"))
        back = ms.Svf.read(str(pathlib.Path(tmp) / "v"))
        assert abs(back.max_norm() - res.svf.max_norm()) < 1e-5

    try:
        ms.ScalarVolume([1, 4, 4], [0.0] * 16)
    except ValueError:
        pass
    else:
        raise AssertionError("degenerate grid accepted")
    print(f"morphoscope {ms.__version__}: smoke test passed (lncc {res.final_lncc:.3f})")


if __name__ == "__main__":
    main()
