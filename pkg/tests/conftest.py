import numpy as np
import pytest

from ztree.data_model import (BINARY, CONTINUOUS, TIME_TO_EVENT, Dataset,
                              FeatureSpec, TargetSpec)


def make_dataset(columns, y, target_kind=CONTINUOUS, kinds=None, levels=None,
                 events=None, treatment=None):
    """Small-dataset builder for tests.

    columns: dict name -> array; kinds/levels override the default of
    continuous for float columns and nominal for string columns.
    """
    kinds = kinds or {}
    levels = dict(levels or {})
    specs = []
    data = {}
    for name, col in columns.items():
        col = np.asarray(col)
        kind = kinds.get(name)
        if kind is None:
            kind = "nominal" if col.dtype.kind in "UO" else CONTINUOUS
        if kind == CONTINUOUS:
            specs.append(FeatureSpec(name, CONTINUOUS))
            data[name] = col.astype(np.float64)
        else:
            if name in levels:
                levs = tuple(levels[name])
            else:
                levs = tuple(sorted(set(str(v) for v in col)))
            code = {lev: i for i, lev in enumerate(levs)}
            specs.append(FeatureSpec(name, kind, levs))
            data[name] = np.array([code[str(v)] for v in col], dtype=np.int32)
    tspec = TargetSpec("y", target_kind,
                       event_indicator_name="event" if target_kind == TIME_TO_EVENT else None)
    return Dataset(specs, data, tspec, np.asarray(y), events=events,
                   treatment=treatment, treatment_name="trt" if treatment is not None else None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
