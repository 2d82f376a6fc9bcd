import pytest

from archscope.spaces import (
    MBCONV_V2,
    MBCONV_V3,
    RESNET_BOTTLENECK,
    BlockSpec,
    DesignSpace,
    HeadSpec,
    StemSpec,
    UnitSpec,
)


def _mini_blocks(family):
    se = family == MBCONV_V3
    act = "hswish" if se else "relu"
    return tuple(
        BlockSpec(
            code=f"MBConv{e}-{k}", family=family, kernel=k, expansion=e,
            uses_se=se, activation=act,
        )
        for e, k in ((3, 3), (3, 5), (6, 3))
    )


def build_mini_space(resolutions=(32,), family=MBCONV_V2):
    """Tiny enumerable space: 2 units, 3 blocks each, depths 1..2, 144 bodies."""
    blocks = _mini_blocks(family)
    units = (
        UnitSpec(index=1, depth_min=1, depth_max=2, blocks=blocks, base_channels=8),
        UnitSpec(index=2, depth_min=1, depth_max=2, blocks=blocks, base_channels=16),
    )
    return DesignSpace(
        name="mini",
        family=family,
        units=units,
        resolutions=tuple(resolutions),
        stem=StemSpec(kernel=3, stride=2, out_channels=4),
        head=HeadSpec(conv_channels=0, hidden=32, classes=10),
    )


def build_mini_ratio_space():
    """Enumerable bottleneck space with a 2-value channel-ratio gene."""
    blocks = tuple(
        BlockSpec(
            code=f"C{round(r * 100)}-B{round(e * 100)}",
            family=RESNET_BOTTLENECK,
            kernel=3,
            expansion=e,
            channel_ratio=r,
        )
        for r in (0.65, 1.0)
        for e in (0.2, 0.35)
    )
    units = (
        UnitSpec(index=1, depth_min=1, depth_max=2, blocks=blocks,
                 channel_ratios=(0.65, 1.0), base_channels=32),
        UnitSpec(index=2, depth_min=1, depth_max=2, blocks=blocks,
                 channel_ratios=(0.65, 1.0), base_channels=64),
    )
    return DesignSpace(
        name="mini-ratio",
        family=RESNET_BOTTLENECK,
        units=units,
        resolutions=(64,),
        stem=StemSpec(kernel=3, stride=2, out_channels=16),
        head=HeadSpec(classes=10),
    )


@pytest.fixture
def mini_space():
    return build_mini_space()


@pytest.fixture
def mini_space_2res():
    return build_mini_space(resolutions=(32, 64))


@pytest.fixture
def mini_ratio_space():
    return build_mini_ratio_space()
