"""Post-selection dynamic ensemble selection (PS-DES)."""
from importlib.resources import files

__version__ = "0.1.0"


def sample_dataset_path(name: str):
    """Path to a bundled sample CSV (``"haberman"`` or ``"heart"``)."""
    return files(__name__).joinpath("data", f"{name}.csv")
