"""Shared chain fixtures and the acceptance pass/fail reporter."""

import numpy as np
import pytest

import edgeworth_markov as em
from edgeworth_markov.cli import KernelTable, discretize_kernel

ACCEPTANCE_LINES = []


def record_acceptance(name: str, ok: bool, detail: str = ""):
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_chain_a():
    """2-state lattice chain: P=[[0.7,0.3],[0.4,0.6]], f=(3,-4), already centered."""
    return em.validate(em.ChainSpec(
        d=2, P=[[0.7, 0.3], [0.4, 0.6]], f=[3.0, -4.0], mu=[0.5, 0.5],
        label="two-state lattice"))


def make_chain_b():
    """Random strictly positive 5-state chain, fixed seed, centered f."""
    rng = np.random.default_rng(20240711)
    P = rng.uniform(0.2, 1.0, (5, 5))
    P /= P.sum(axis=1, keepdims=True)
    f = rng.normal(size=5)
    spec = em.validate(em.ChainSpec(d=5, P=P, f=f, mu=np.full(5, 0.2),
                                    label="random five-state"))
    return em.center_observable(spec, em.stationary(spec).pi)


def make_chain_c():
    """Rank-one 4-state chain (i.i.d. sampling from mu), centered f."""
    mu = np.array([0.4, 0.3, 0.2, 0.1])
    P = np.tile(mu, (4, 1))
    spec = em.validate(em.ChainSpec(d=4, P=P, f=[2.0, -1.0, 0.5, 3.0], mu=mu,
                                    label="rank-one"))
    return em.center_observable(spec, em.stationary(spec).pi)


def make_chain_c_symmetric():
    """Rank-one chain whose observable distribution is symmetric (gamma_3 = 0)."""
    mu = np.array([0.2, 0.3, 0.3, 0.2])
    P = np.tile(mu, (4, 1))
    return em.validate(em.ChainSpec(d=4, P=P, f=[-2.0, -1.0, 1.0, 2.0], mu=mu,
                                    label="rank-one symmetric"))


def make_chain_accept3():
    """Strictly positive 3-state chain with non-lattice f of irrational ratios,
    f = (1, sqrt(2) - 2, b) with b solved so the stationary mean is zero."""
    P = np.array([[0.90, 0.05, 0.05],
                  [0.05, 0.85, 0.10],
                  [0.10, 0.30, 0.60]])
    probe = em.validate(em.ChainSpec(d=3, P=P, f=[1.0, np.sqrt(2.0) - 2.0, 0.0],
                                     mu=np.full(3, 1 / 3)))
    pi = em.stationary(probe).pi
    b = -(pi[0] * 1.0 + pi[1] * (np.sqrt(2.0) - 2.0)) / pi[2]
    return em.validate(em.ChainSpec(d=3, P=P, f=[1.0, np.sqrt(2.0) - 2.0, b],
                                    mu=np.full(3, 1 / 3), label="three-state non-lattice"))


def make_cosine_kernel(m: int = 64, amplitude: float = 0.9):
    """Kernel table sampling p(x,y) = 1 + amplitude cos(2 pi (x - y)) at
    midpoints.  The observable x^64 concentrates mass near the right edge;
    its strong skewness and kurtosis keep the first- and second-order
    corrections well above the 2e6-path Monte-Carlo noise floor."""
    x = (np.arange(m) + 0.5) / m
    values = 1.0 + amplitude * np.cos(2.0 * np.pi * (x[:, None] - x[None, :]))
    return KernelTable(m=m, values=values, f_values=x**64)


def make_kernel_chain(m: int = 64, amplitude: float = 0.9):
    spec = discretize_kernel(make_cosine_kernel(m, amplitude))
    return em.center_observable(spec, em.stationary(spec).pi)


@pytest.fixture(scope="session")
def chain_a():
    return make_chain_a()


@pytest.fixture(scope="session")
def chain_b():
    return make_chain_b()


@pytest.fixture(scope="session")
def chain_c():
    return make_chain_c()


@pytest.fixture(scope="session")
def chain_accept3():
    return make_chain_accept3()


@pytest.fixture(scope="session")
def summary_a(chain_a):
    ss = em.stationary(chain_a)
    return chain_a, ss, em.spectral_summary(chain_a, ss, k=4)


@pytest.fixture(scope="session")
def summary_b(chain_b):
    ss = em.stationary(chain_b)
    return chain_b, ss, em.spectral_summary(chain_b, ss, k=4)


@pytest.fixture(scope="session")
def summary_c(chain_c):
    ss = em.stationary(chain_c)
    return chain_c, ss, em.spectral_summary(chain_c, ss, k=4)
