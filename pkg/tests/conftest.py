from datetime import datetime, timezone

import numpy as np
import pytest

from loadsr.series import IntervalSeries

START = datetime(2018, 1, 1, tzinfo=timezone.utc)


def make_series(values, interval_seconds=900, household_id="h0", start=START, gaps=None):
    return IntervalSeries(
        household_id=household_id,
        start_time=start,
        interval_seconds=interval_seconds,
        values=np.asarray(values, dtype=np.float64),
        gaps=gaps,
    )


@pytest.fixture
def series_factory():
    return make_series
