from pair_upsampler import PooledUpsampler, Upsampler, UpsamplerConfig, geometry
from pair_upsampler.common.enums import ShapeKinds
from pair_upsampler.common.exceptions import UpsamplerError
from pair_upsampler.types import AnalyticShape

# NOTE: The weights below are untrained. The purpose of this test is to verify that the code runs
# without import errors end to end and returns clouds of the promised size for both front ends.
CONFIG = UpsamplerConfig(n=16, r=2, k=4, c=8, c_expanded=8, extractor_depth=2, hidden=8)


def _cloud():
    return geometry.sample_analytic_surface(AnalyticShape(ShapeKinds.SPHERE), 64, 0)


def test_sequential_upsampler():
    print("--- Testing Upsampler ---")
    upsampler = Upsampler.initialize(CONFIG, seed=0)
    try:
        coarse, refined = upsampler.upsample_cloud(_cloud())
        print(f"Upsampler produced {len(coarse)} coarse and {len(refined)} refined points.")
        assert len(refined) == CONFIG.r * 64
    except UpsamplerError as e:
        print(f"Upsampler raised a library error: {e}")
        raise
    print("--- Upsampler Test Complete ---\n")


def test_pooled_upsampler():
    print("--- Testing PooledUpsampler ---")
    upsampler = Upsampler.initialize(CONFIG, seed=0)
    pooled = PooledUpsampler(upsampler.params, workers=2)
    _, refined = pooled.upsample_cloud(_cloud())
    _, expected = upsampler.upsample_cloud(_cloud())
    print(f"PooledUpsampler produced {len(refined)} refined points.")
    assert refined.points.tobytes() == expected.points.tobytes()
    print("--- PooledUpsampler Test Complete ---\n")


def main():
    test_sequential_upsampler()
    test_pooled_upsampler()


if __name__ == "__main__":
    main()
