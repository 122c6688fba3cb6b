import numpy as np
import pytest

from psdes.dataio import Dataset, apply_scaler, fit_scaler, stratified_split
from psdes.destech import metades_train
from psdes.pool import build_pool, cache_dsel_outputs
from psdes.postselect import PsDesSystem


def make_blobs(n=200, n_classes=3, d=4, seed=0, spread=1.5, name="blobs"):
    """Gaussian clusters with overlapping classes, labels balanced."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=spread, size=(n_classes, d))
    y = np.arange(n) % n_classes
    X = centers[y] + rng.normal(size=(n, d))
    return Dataset(X, y, tuple(f"c{i}" for i in range(n_classes)), name)


def prepare(ds, b=10, seed=0, k=7, kp_meta=5):
    split = stratified_split(ds, rng=np.random.default_rng(seed))
    scaler = fit_scaler(split.train)
    train, dsel, test = (apply_scaler(scaler, p) for p in (split.train, split.dsel, split.test))
    pool = cache_dsel_outputs(build_pool(train, b, seed=seed), dsel)
    meta = metades_train(pool, dsel, 1.0, k, kp_meta)
    return train, dsel, test, pool, meta


@pytest.fixture(scope="session")
def blobs3():
    return make_blobs(200, 3, 4, seed=1)


@pytest.fixture(scope="session")
def prepared3(blobs3):
    return prepare(blobs3, b=10, seed=3)


@pytest.fixture(scope="session")
def system3(prepared3):
    _, dsel, _, pool, meta = prepared3
    return PsDesSystem(pool, dsel, meta_model=meta, seed=11)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
