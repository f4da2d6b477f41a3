import pytest

from buffcs.buffering import Strategy
from buffcs.harness import ExperimentConfig
from buffcs.localizer import LocalizerConfig
from buffcs.scenegen import BiasedDwell, SceneSpec, SweepGrid


def small_profile():
    return [
        SceneSpec(scene_id=0, extent=(2.0, 2.0, 1.5), point_count=300,
                  trajectory=BiasedDwell(0.8, ((0.0, 0.0, 0.0), (0.5, 1.0, 1.0))),
                  frames=120, view_radius=0.5, stream="scene-0"),
        SceneSpec(scene_id=1, extent=(2.0, 2.0, 1.5), point_count=300,
                  trajectory=SweepGrid(), frames=80, view_radius=0.5, stream="scene-1"),
        SceneSpec(scene_id=2, extent=(2.0, 2.0, 1.5), point_count=300,
                  trajectory=BiasedDwell(0.7), frames=100, view_radius=0.5, stream="scene-2"),
    ]


@pytest.fixture
def small_config():
    return ExperimentConfig(
        scene_profile=small_profile(),
        strategies=[Strategy.RESERVOIR, Strategy.CLASS_BALANCE, Strategy.BUFF_CS],
        buffer_sizes=[16],
        seeds=[0, 1],
        localizer=LocalizerConfig(),
    )
