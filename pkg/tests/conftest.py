import numpy as np
import pytest

from geoquant.gaussmodel import GaussianModel


def random_spd(rng, n, scale=1.0):
    A = rng.standard_normal((n, n))
    return scale * (A @ A.T / n + 0.2 * np.eye(n))


def random_model(rng, n, spread=1.0):
    return GaussianModel(spread * rng.standard_normal(n), random_spd(rng, n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


KRAFT_LOG = []


@pytest.fixture(autouse=True, scope="session")
def record_length_updates():
    """Log |Kraft sum - 1| after every length update made by any fit in the session."""
    import geoquant.lloyd as lloyd

    original = lloyd.length_update

    def recording(cb):
        out = original(cb)
        KRAFT_LOG.append(abs(out.kraft_sum() - 1.0))
        return out

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(lloyd, "length_update", recording)
        yield KRAFT_LOG


def pytest_terminal_summary(terminalreporter):
    if KRAFT_LOG:
        terminalreporter.write_line(
            f"length updates checked: {len(KRAFT_LOG)}, max |kraft - 1| = {max(KRAFT_LOG):.3e}")
