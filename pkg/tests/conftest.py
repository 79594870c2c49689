from __future__ import annotations

import pytest

from synthetic_world import make_world, write_world


@pytest.fixture(scope="session")
def world():
    """Clean linear world: 6 pieces x 5 performances, 40 words."""
    return make_world()


@pytest.fixture(scope="session")
def world_with_aux():
    """Same world plus auxiliary description pairs for both sources."""
    return make_world(aux_per_source=8)


@pytest.fixture(scope="session")
def world_dir(tmp_path_factory, world_with_aux):
    """The aux world written to disk: catalog, pairs, embeddings paths."""
    directory = tmp_path_factory.mktemp("world")
    return write_world(world_with_aux, directory)
