import json

import numpy as np
import pytest

from satfuse.corpus import ReviewRecord


def make_record(i, course="c0", domain="cs", text="great course", rating=4.0,
                behavior=None, completion=None, ts=1_600_000_000):
    return ReviewRecord(
        id=f"r{i:04d}", course_id=course, domain_tag=domain, text=text,
        rating=rating, timestamp=ts, behavior_raw=behavior or {},
        completion=completion,
    )


@pytest.fixture
def tiny_dataset():
    """Ten reviews over two courses with assorted behavior payloads."""
    rng = np.random.default_rng(7)
    records = []
    for i in range(10):
        course = "c0" if i < 6 else "c1"
        behavior = {
            "viewing_duration": [(1_600_000_000 - 86400 * d, float(20 + i + d))
                                 for d in range(3)],
            "quiz_attempts": float(i % 4),
        }
        if i % 3 == 0:
            behavior.pop("quiz_attempts")
        records.append(make_record(
            i, course=course, domain="cs" if i % 2 else "business",
            text=f"lecture quality topic{i % 3} python pacing",
            rating=float(1 + (i * 7) % 5), behavior=behavior,
            completion=("completed", "in_progress", None)[i % 3],
        ))
    return records


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    return path
