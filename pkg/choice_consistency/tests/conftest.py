"""
Pytest configuration and fixtures for the choice-consistency tests.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add the repository root to the Python path
repo_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(repo_root))

from choice_consistency.choice_data import ChoiceDataset, make_dataset  # noqa: E402

SAMPLE_TRANSACTIONS = """membership_id,store_id,timestamp,category,quantity_kg,expenditure,shelf_expenditure,discount_flag
a1,A1,2019-04-13 12:07:10,Meat,1.5,45.0,,
a1,A1,2019-09-21 16:35:45,Meat,2.0,40.0,,
a1,A1,2019-10-19 10:10:10,Vegetable,4.2,8.4,,
a1,A1,2019-11-10 19:05:05,Vegetable,1.8,3.6,,
"""


def ces_dataset(g: float = 1.0, m: float = 1.0, n_rounds: int = 22, seed: int = 7,
                noise: float = 0.0, label: str = "ces") -> ChoiceDataset:
    """Two-good CES chooser on budgets with log price ratio uniform on [-ln 3, ln 3]."""
    rng = np.random.default_rng(seed)
    log_ratio = rng.uniform(-np.log(3.0), np.log(3.0), size=n_rounds)
    p1, p2 = np.exp(log_ratio / 2), np.exp(-log_ratio / 2)
    share = g / (np.exp(log_ratio) ** m + g)
    if noise:
        share = np.clip(share + rng.normal(0.0, noise, size=n_rounds), 0.0, 1.0)
    expenditure = 100.0
    rows = [((a, b), (s * expenditure / a, (1 - s) * expenditure / b)) for a, b, s in zip(p1, p2, share)]
    return make_dataset(rows, label=label)


def random_instance(rng: np.random.Generator, max_obs: int = 6, label: str = "rand") -> ChoiceDataset:
    """Integer prices and quantities in 1..4, two goods, 2..max_obs observations."""
    t = int(rng.integers(2, max_obs + 1))
    prices = rng.integers(1, 5, size=(t, 2))
    bundles = rng.integers(1, 5, size=(t, 2))
    return make_dataset(list(zip(prices, bundles)), label=label)


@pytest.fixture
def d_dagger():
    """Two observations each strictly revealed preferred to the other."""
    return make_dataset([((1, 2), (0, 1)), ((2, 1), (1, 0))], label="d")


@pytest.fixture
def gapp_dataset():
    """Passes GARP, fails the price-preference axiom."""
    return make_dataset([((1, 2), (0, 2)), ((2, 1), (3, 1))], label="gapp")


@pytest.fixture
def triangle_dataset():
    """Three observations violating GARP pairwise."""
    return make_dataset([((1, 2), (0, 1)), ((2, 1), (1, 0)), ((1, 1), (0.6, 0.6))], label="tri")


@pytest.fixture
def on_budget_dataset():
    """GARP fails only through a bundle lying exactly on another budget line."""
    return make_dataset([((1, 1), (1, 1)), ((2, 1), (2, 0))], label="edge")


@pytest.fixture
def random_instances():
    rng = np.random.default_rng(20240501)
    return [random_instance(rng, label=f"r{i:03d}") for i in range(150)]


@pytest.fixture
def sample_transactions_csv(tmp_path):
    path = tmp_path / "transactions.csv"
    path.write_text(SAMPLE_TRANSACTIONS, encoding="utf-8")
    return path


@pytest.fixture
def write_csv(tmp_path):
    """Write text to a CSV file under tmp_path."""
    def _write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write
